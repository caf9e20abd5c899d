//! `crmsbm` command-line tool.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crmsbm::baselines::{dcsbm_gibbs, write_baseline_trace_csv, BaselineConfig, BaselineKind};
use crmsbm::data_io::{
    load_edge_list, make_holdout, preprocess, write_holdout_manifest, HoldoutOptions, PreprocessOptions,
    RawEdgeList, RawRecord,
};
use crmsbm::eval::{autocorrelation, evaluate_files, write_acf_csv, write_metrics_json};
use crmsbm::graph_gen::{sample_network, Interaction, NetworkConfig};
use crmsbm::inference::{
    run_mcmc, write_labels_csv, write_predictions_csv, write_trace_csv, EdgeCountMatrix, InteractionMode,
    McmcConfig,
};
use crmsbm::validate::{validate_signatures, validate_total_mass, write_signature_csv};
use crmsbm::{seeded_rng, GgpParams};

/// Exit status when validation tolerances are violated.
const EXIT_TOLERANCE: u8 = 3;

#[derive(Parser, Debug, Serialize)]
#[command(name = "crmsbm", version, about = "Block models built on completely random measures")]
struct Cli {
    /// `key = value` defaults; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "CRMSBM_OUT_DIR", default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Simulate a network and its ground truth.
    Generate(GenerateArgs),
    /// Fit a model to an edge list, optionally holding out dyads.
    Fit(FitArgs),
    /// Fit one of the comparison block models.
    Baseline(BaselineArgs),
    /// Score predictions against a holdout manifest; autocorrelations of a trace.
    #[command(alias = "predict")]
    Evaluate(EvaluateArgs),
    /// Check simulated networks and total masses against exact probabilities.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[arg(long = "K", id = "K", default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=10_000))]
    k: u64,
    #[arg(long, default_value_t = 20.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_a: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_b: f64,
    /// Use η ≡ 1 instead of Gamma(λa, λb) interactions.
    #[arg(long)]
    unit_eta: bool,
    /// Dirichlet concentration of the block proportions.
    #[arg(long, default_value_t = 1.0)]
    beta0: f64,
    /// Atom weight threshold (default: automatic).
    #[arg(long)]
    truncation: Option<f64>,
    #[arg(long, default_value_t = 50_000_000)]
    max_edges: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file stem.
    #[arg(long, default_value = "network")]
    stem: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Model {
    Crmsbm,
    /// Single block with η ≡ 1.
    Crm,
    Pirm,
    Dcsbm,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum BaselineModel {
    Pirm,
    Dcsbm,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[arg(long, value_enum, default_value_t = Model::Crmsbm)]
    model: Model,
    #[command(flatten)]
    common: CommonFit,
}

#[derive(Args, Debug, Serialize)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    model: BaselineModel,
    #[command(flatten)]
    common: CommonFit,
}

#[derive(Args, Debug, Serialize)]
struct CommonFit {
    /// Edge list `src dst [count]`.
    #[arg(long)]
    input: PathBuf,
    /// Number of blocks (CRMSBM only).
    #[arg(long = "K", id = "K", default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=10_000))]
    k: u64,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Default: half of the iterations.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Fraction of dyads to hold out; 0 disables.
    #[arg(long, default_value_t = 0.0)]
    holdout: f64,
    #[arg(long)]
    include_self_pairs: bool,
    #[arg(long)]
    symmetrize: bool,
    /// Keep edge multiplicities instead of thresholding to {0, 1}.
    #[arg(long)]
    multigraph: bool,
    #[arg(long)]
    drop_self_edges: bool,
    /// Clip imputed held-out counts to {0, 1}.
    #[arg(long)]
    clip: bool,
    #[arg(long, default_value_t = 150)]
    mh_steps: usize,
    #[arg(long, default_value_t = 0.1)]
    step_size: f64,
    /// Record labels every this many iterations (0: never).
    #[arg(long, default_value_t = 0)]
    label_stride: usize,
    /// Starting number of blocks for the baselines.
    #[arg(long, default_value_t = 5)]
    initial_blocks: usize,
    /// Independent chains, run concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=10_000))]
    chains: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file stem (default: the model name).
    #[arg(long)]
    stem: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    /// Prediction CSV `i,j,score`.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Holdout manifest `i,j,true_label`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Trace CSV whose columns get autocorrelations.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    max_lag: usize,
    /// Rows of the trace to skip before computing autocorrelations.
    #[arg(long, default_value_t = 0)]
    skip: usize,
    #[arg(long, default_value = "eval")]
    stem: String,
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Simulated networks for the signature table.
    #[arg(long, default_value_t = 100_000)]
    networks: usize,
    /// Simulated total masses for the KS test.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Largest edge count tabulated.
    #[arg(long, default_value_t = 4)]
    max_edges: u64,
    #[arg(long, default_value_t = 4.0)]
    z_max: f64,
    #[arg(long, default_value_t = 0.01)]
    ks_max: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "validate")]
    stem: String,
}

fn parse_cli() -> std::result::Result<Cli, clap::Error> {
    let mut argv: Vec<_> = std::env::args_os().collect();
    let cmd = Cli::command();
    let matches = cmd.clone().try_get_matches_from(&argv)?;
    if let Some(path) = matches.get_one::<PathBuf>("config") {
        if let Err(e) = config::apply(&cmd, &matches, path, &mut argv) {
            return Err(Cli::command().error(clap::error::ErrorKind::InvalidValue, format!("{e:#}")));
        }
    }
    let matches = Cli::command().try_get_matches_from(&argv)?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let cli = match parse_cli() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Fit(a) => {
            let model = match a.model {
                Model::Crmsbm | Model::Crm => None,
                Model::Pirm => Some(BaselineKind::Pirm),
                Model::Dcsbm => Some(BaselineKind::Dcsbm),
            };
            fit(cli, a.model, model, &a.common)
        }
        Command::Baseline(a) => {
            let (model, kind) = match a.model {
                BaselineModel::Pirm => (Model::Pirm, BaselineKind::Pirm),
                BaselineModel::Dcsbm => (Model::Dcsbm, BaselineKind::Dcsbm),
            };
            fit(cli, model, Some(kind), &a.common)
        }
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Validate(a) => validate(cli, a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> crmsbm::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Records the fully resolved invocation next to the outputs.
fn write_manifest(cli: &Cli, stem: &str) -> Result<()> {
    let value = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "resolved": cli,
    });
    write_json(&cli.out.join(format!("{stem}.config.json")), &value)
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<ExitCode> {
    let params = GgpParams::new(a.alpha, a.sigma, a.tau)?;
    let mut config = NetworkConfig::new(a.k as usize, params);
    config.beta0 = a.beta0;
    config.truncation = a.truncation;
    config.max_edges = a.max_edges;
    config.interaction = if a.unit_eta {
        Interaction::Unit
    } else {
        Interaction::Gamma { lambda_a: a.lambda_a, lambda_b: a.lambda_b }
    };
    let net = sample_network(&config, &mut seeded_rng(a.seed, 0))?;
    let raw = RawEdgeList {
        records: net.edges.iter().map(|e| RawRecord { source: e.source, target: e.target, count: e.count }).collect(),
        labels: (1..=net.n_vertices()).map(|i| i.to_string()).collect(),
    };
    crmsbm::data_io::save_edge_list(&cli.out.join(format!("{}.edges", a.stem)), &raw)?;
    net.write_sidecar(&cli.out.join(format!("{}.truth.json", a.stem)))?;
    write_manifest(cli, &a.stem)?;
    println!("{} vertices, {} edges", net.n_vertices(), net.total_edges());
    Ok(ExitCode::SUCCESS)
}

fn one_based(labels: &[usize]) -> Vec<usize> {
    labels.iter().map(|l| l + 1).collect()
}

fn fit(cli: &Cli, model: Model, baseline: Option<BaselineKind>, a: &CommonFit) -> Result<ExitCode> {
    let stem = a.stem.clone().unwrap_or_else(|| format!("{model:?}").to_lowercase());
    let raw = load_edge_list(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let options = PreprocessOptions { symmetrize: a.symmetrize, binary: !a.multigraph, drop_self_edges: a.drop_self_edges };
    let data = preprocess(&raw, &options)?;
    let mut matrix = data.matrix;
    let manifest = cli.out.join(format!("{stem}.holdout.csv"));
    if a.holdout > 0.0 {
        let mut opts = HoldoutOptions::new(a.holdout);
        opts.symmetric = a.symmetrize;
        opts.include_self_pairs = a.include_self_pairs;
        let h = make_holdout(&matrix, &opts, &mut seeded_rng(a.seed, 0))?;
        write_with(&manifest, |w| write_holdout_manifest(w, &h.truth))?;
        matrix = h.matrix;
    }
    write_manifest(cli, &stem)?;

    let n_chains = a.chains as usize;
    let results: Vec<Result<serde_json::Value>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n_chains)
            .map(|c| {
                let suffix = if n_chains > 1 { format!(".chain{}", c + 1) } else { String::new() };
                let prefix = cli.out.join(format!("{stem}{suffix}"));
                let matrix = &matrix;
                let labels = &data.labels;
                scope.spawn(move || match baseline {
                    None => fit_crmsbm(model, a, matrix, labels, c, &prefix),
                    Some(kind) => fit_baseline(kind, a, matrix, labels, c, &prefix),
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });

    for (c, r) in results.into_iter().enumerate() {
        let mut summary = r?;
        let suffix = if n_chains > 1 { format!(".chain{}", c + 1) } else { String::new() };
        let predictions = cli.out.join(format!("{stem}{suffix}.predictions.csv"));
        if a.holdout > 0.0 {
            let metrics = evaluate_files(&predictions, &manifest)?;
            println!("chain {}: AUC {:.4} over {} pairs", c + 1, metrics.auc, metrics.n_pairs);
            summary["auc"] = serde_json::json!(metrics.auc);
        }
        write_json(&cli.out.join(format!("{stem}{suffix}.summary.json")), &summary)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn path_with(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn fit_crmsbm(
    model: Model,
    a: &CommonFit,
    matrix: &EdgeCountMatrix,
    names: &[String],
    chain: usize,
    prefix: &Path,
) -> Result<serde_json::Value> {
    let k = if model == Model::Crm { 1 } else { a.k as usize };
    let mut config = McmcConfig::new(k, a.iters);
    config.burn_in = a.burn_in;
    config.mh.steps = a.mh_steps;
    config.mh.step_size = a.step_size;
    config.label_stride = a.label_stride;
    config.clip_imputed = a.clip;
    if model == Model::Crm {
        config.interaction = InteractionMode::Unit;
    }
    let chain_out = run_mcmc(matrix, &config, &mut seeded_rng(a.seed, 1 + chain as u64))?;
    write_with(&path_with(prefix, ".trace.csv"), |w| write_trace_csv(w, &chain_out.trace, k))?;
    if a.holdout > 0.0 {
        write_with(&path_with(prefix, ".predictions.csv"), |w| write_predictions_csv(w, &chain_out.predictions))?;
    }
    if a.label_stride > 0 {
        write_with(&path_with(prefix, ".labels.csv"), |w| write_labels_csv(w, &chain_out.label_snapshots))?;
    }
    Ok(serde_json::json!({
        "model": model,
        "vertices": names,
        "map_labels": one_based(&chain_out.map_labels),
        "mode_labels": one_based(&chain_out.mode_labels),
        "map_logp": chain_out.map_logp,
        "final_measure": chain_out.measure,
    }))
}

fn fit_baseline(
    kind: BaselineKind,
    a: &CommonFit,
    matrix: &EdgeCountMatrix,
    names: &[String],
    chain: usize,
    prefix: &Path,
) -> Result<serde_json::Value> {
    let mut config = BaselineConfig::new(a.iters);
    config.burn_in = a.burn_in;
    config.mh_steps = a.mh_steps;
    config.step_size = a.step_size;
    config.label_stride = a.label_stride;
    config.clip_imputed = a.clip;
    config.initial_blocks = a.initial_blocks;
    let out = dcsbm_gibbs(matrix, kind, &config, &mut seeded_rng(a.seed, 1 + chain as u64))?;
    write_with(&path_with(prefix, ".trace.csv"), |w| write_baseline_trace_csv(w, &out.trace))?;
    if a.holdout > 0.0 {
        write_with(&path_with(prefix, ".predictions.csv"), |w| write_predictions_csv(w, &out.predictions))?;
    }
    if a.label_stride > 0 {
        write_with(&path_with(prefix, ".labels.csv"), |w| write_labels_csv(w, &out.label_snapshots))?;
    }
    Ok(serde_json::json!({
        "model": kind,
        "vertices": names,
        "map_labels": one_based(&out.map_labels),
        "final_state": out.state,
    }))
}

/// Reads a numeric CSV with a header row.
fn read_trace(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().context("empty trace")?.split(',').map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            bail!("{}: line {} has {} fields, expected {}", path.display(), n + 2, fields.len(), header.len());
        }
        for (col, f) in cols.iter_mut().zip(fields) {
            col.push(f.trim().parse::<f64>().with_context(|| format!("{}: line {}", path.display(), n + 2))?);
        }
    }
    Ok((header, cols))
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<ExitCode> {
    match (&a.predictions, &a.manifest) {
        (Some(p), Some(m)) => {
            let metrics = evaluate_files(p, m)?;
            write_metrics_json(&cli.out.join(format!("{}.metrics.json", a.stem)), &metrics)?;
            println!("AUC {:.4} over {} pairs ({} positive)", metrics.auc, metrics.n_pairs, metrics.n_positive);
        }
        (None, None) => {}
        _ => bail!("--predictions and --manifest go together"),
    }
    if let Some(trace) = &a.trace {
        let (header, cols) = read_trace(trace)?;
        let mut names = Vec::new();
        let mut acfs = Vec::new();
        for (name, col) in header.iter().zip(&cols) {
            if name == "iter" {
                continue;
            }
            let series = col.get(a.skip..).unwrap_or(&[]);
            let lag = a.max_lag.min(series.len().saturating_sub(1));
            names.push(name.as_str());
            acfs.push(autocorrelation(series, lag)?);
        }
        write_with(&cli.out.join(format!("{}.acf.csv", a.stem)), |w| write_acf_csv(w, &names, &acfs))?;
    } else if a.predictions.is_none() {
        bail!("nothing to evaluate: give --predictions/--manifest or --trace");
    }
    write_manifest(cli, &a.stem)?;
    Ok(ExitCode::SUCCESS)
}

fn validate(cli: &Cli, a: &ValidateArgs) -> Result<ExitCode> {
    let params = GgpParams::new(a.alpha, a.sigma, a.tau)?;
    let report = validate_signatures(&params, a.networks, a.max_edges, &mut seeded_rng(a.seed, 0))?;
    let ks = validate_total_mass(&params, a.samples, &mut seeded_rng(a.seed, 1))?;
    let sig_path = cli.out.join(format!("{}.signatures.csv", a.stem));
    write_with(&sig_path, |w| write_signature_csv(w, &report))?;
    let max_z = report.max_abs_z();
    let pass = max_z < a.z_max && ks < a.ks_max;
    write_json(
        &cli.out.join(format!("{}.json", a.stem)),
        &serde_json::json!({
            "max_abs_z": max_z,
            "total_variation": report.total_variation,
            "ks": ks,
            "pass": pass,
        }),
    )?;
    write_manifest(cli, &a.stem)?;
    let mut table = Vec::new();
    write_signature_csv(&mut table, &report)?;
    print!("{}", String::from_utf8_lossy(&table));
    println!("max |z| {max_z:.3}, TV {:.4}, KS {ks:.4}: {}", report.total_variation, if pass { "pass" } else { "FAIL" });
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(EXIT_TOLERANCE) })
}
