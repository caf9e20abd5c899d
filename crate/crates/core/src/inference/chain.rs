//! The full sampler: MH over measures, Gibbs over labels, then imputation
//! of weights, interactions and edges, once per iteration.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::sample_total_mass;
use crate::GgpParams;

use super::gibbs::gibbs_z_sweep;
use super::impute::{impute_all_weights, impute_edges, impute_eta, pair_rate};
use super::likelihood::log_joint_stats;
use super::matrix::EdgeCountMatrix;
use super::mh::{mh_sweep, MhConfig};
use super::state::{BlockMeasure, BlockState, InteractionPrior, MeasureState};
use super::stats::suff_stats;

/// Interaction model used by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InteractionMode {
    /// Gamma-distributed tile rates with sampled `λa, λb`.
    Gamma,
    /// `η ≡ 1`.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_blocks: usize,
    pub iterations: usize,
    /// Iterations discarded before predictions and the MAP labelling are
    /// collected; `None` means half of `iterations`.
    pub burn_in: Option<usize>,
    pub mh: MhConfig,
    pub interaction: InteractionMode,
    /// Record the labels every this many iterations; 0 disables snapshots.
    pub label_stride: usize,
    /// Clip imputed held-out counts to `{0, 1}`.
    pub clip_imputed: bool,
    /// Starting labels; uniform random when absent.
    pub initial_labels: Option<Vec<usize>>,
}

impl McmcConfig {
    pub fn new(n_blocks: usize, iterations: usize) -> Self {
        Self {
            n_blocks,
            iterations,
            burn_in: None,
            mh: MhConfig::default(),
            interaction: InteractionMode::Gamma,
            label_stride: 0,
            clip_imputed: false,
            initial_labels: None,
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 2)
    }
}

/// One row of the parameter trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based iteration.
    pub iter: usize,
    pub logp: f64,
    pub sigma: f64,
    pub tau: f64,
    pub alpha: Vec<f64>,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub accept_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub trace: Vec<TraceRow>,
    /// `(iteration, labels)` snapshots.
    pub label_snapshots: Vec<(usize, Vec<usize>)>,
    pub labels: BlockState,
    pub measure: MeasureState,
    /// Labels at the highest log joint after burn-in (the final labels when
    /// no iteration passed burn-in).
    pub map_labels: Vec<usize>,
    pub map_logp: f64,
    /// Per-vertex posterior mode after burn-in, with every sample relabelled
    /// to agree best with the first post-burn-in sample.
    pub mode_labels: Vec<usize>,
    /// Held-out pairs with the posterior mean of `1 − exp(−η w_i w_j)`.
    pub predictions: Vec<(usize, usize, f64)>,
}

/// Overdispersed starting point: `σ = 0.5`, `τ = 1`, `α_ℓ = k/K`, and
/// `s_ℓ = t_ℓ = T/2` for one forward draw of the total mass.
pub fn initial_state<R: Rng + ?Sized>(
    n_vertices: usize,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<(BlockState, MeasureState)> {
    let k = config.n_blocks;
    if k == 0 {
        return Err(Error::domain("number of blocks must be at least 1"));
    }
    let labels = match &config.initial_labels {
        Some(l) => l.clone(),
        None => (0..n_vertices).map(|_| rng.random_range(0..k)).collect(),
    };
    let z = BlockState::new(labels, k, 1.0)?;
    let alpha = (n_vertices as f64 / k as f64).max(1.0);
    let params = GgpParams::new(alpha, 0.5, 1.0)?;
    let blocks = (0..k)
        .map(|_| {
            let total = sample_total_mass(&params, rng)?;
            Ok(BlockMeasure { alpha, s: total / 2.0, t: total / 2.0, u: PI / 2.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    let interaction = match config.interaction {
        InteractionMode::Gamma => InteractionPrior::Gamma { lambda_a: 1.0, lambda_b: 1.0 },
        InteractionMode::Unit => InteractionPrior::Unit,
    };
    let m = MeasureState { sigma: 0.5, tau: 1.0, blocks, interaction };
    m.validate()?;
    Ok((z, m))
}

pub fn run_mcmc<R: Rng + ?Sized>(a: &EdgeCountMatrix, config: &McmcConfig, rng: &mut R) -> Result<Chain> {
    a.validate()?;
    let (z, m) = initial_state(a.n_vertices(), config, rng)?;
    run_mcmc_from(a, config, z, m, rng)
}

/// Runs the sampler from a given state.
pub fn run_mcmc_from<R: Rng + ?Sized>(
    a: &EdgeCountMatrix,
    config: &McmcConfig,
    mut z: BlockState,
    mut m: MeasureState,
    rng: &mut R,
) -> Result<Chain> {
    let mut work = a.clone();
    work.clear_imputed();
    let burn_in = config.burn_in();
    let holdout: Vec<(usize, usize)> = a.holdout().collect();
    let mut score_sums = vec![0.0; holdout.len()];
    let mut n_scored = 0usize;
    let needs_edges = !holdout.is_empty() || a.is_binary();

    let mut stats = suff_stats(&work, &z)?;
    let mut map_labels = z.labels.clone();
    let mut map_logp = f64::NEG_INFINITY;
    let mut modes = ModeAccumulator::new(z.labels.len(), z.n_blocks);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut label_snapshots = Vec::new();

    for iter in 1..=config.iterations {
        let accept_rate = mh_sweep(&stats, &mut z, &mut m, &config.mh, rng)?;
        stats = gibbs_z_sweep(&work, &mut z, &m, rng)?;
        let weights = impute_all_weights(&stats, &z, &m, rng)?;
        let eta = impute_eta(&stats, &m, rng);
        if iter > burn_in {
            for (sum, &(i, j)) in score_sums.iter_mut().zip(&holdout) {
                *sum += -(-pair_rate(&z.labels, &weights, &eta, i, j)).exp_m1();
            }
            n_scored += 1;
        }
        if needs_edges {
            impute_edges(&mut work, &z.labels, &weights, &eta, config.clip_imputed, rng)?;
            stats = suff_stats(&work, &z)?;
        }
        let logp = log_joint_stats(&stats, &z, &m)?;
        if iter > burn_in {
            modes.add(&z.labels);
            if logp > map_logp {
                map_logp = logp;
                map_labels.clone_from(&z.labels);
            }
        }
        trace.push(TraceRow {
            iter,
            logp,
            sigma: m.sigma,
            tau: m.tau,
            alpha: m.blocks.iter().map(|b| b.alpha).collect(),
            s: m.blocks.iter().map(|b| b.s).collect(),
            t: m.blocks.iter().map(|b| b.t).collect(),
            accept_rate,
        });
        if config.label_stride > 0 && iter % config.label_stride == 0 {
            label_snapshots.push((iter, z.labels.clone()));
        }
    }
    if map_logp == f64::NEG_INFINITY {
        map_labels.clone_from(&z.labels);
    }
    let mode_labels = modes.modes().unwrap_or_else(|| z.labels.clone());
    let predictions = holdout
        .iter()
        .zip(&score_sums)
        .map(|(&(i, j), &s)| (i, j, if n_scored > 0 { s / n_scored as f64 } else { f64::NAN }))
        .collect();
    Ok(Chain {
        trace,
        label_snapshots,
        labels: z,
        measure: m,
        map_labels,
        map_logp,
        mode_labels,
        predictions,
    })
}

/// Relabelling `π` maximising `#{i : π(labels_i) = reference_i}`: exact
/// over all permutations for `K ≤ 7`, greedy on the confusion matrix above.
pub fn align_labels(labels: &[usize], reference: &[usize], k: usize) -> Vec<usize> {
    let mut confusion = vec![vec![0u64; k]; k];
    for (&l, &r) in labels.iter().zip(reference) {
        confusion[l][r] += 1;
    }
    let perm = if k <= 7 {
        best_permutation(&confusion)
    } else {
        greedy_permutation(&confusion)
    };
    labels.iter().map(|&l| perm[l]).collect()
}

fn best_permutation(confusion: &[Vec<u64>]) -> Vec<usize> {
    fn search(c: &[Vec<u64>], row: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, score: u64, best: &mut (u64, Vec<usize>)) {
        if row == c.len() {
            if score > best.0 || best.1.is_empty() {
                *best = (score, cur.clone());
            }
            return;
        }
        for col in 0..c.len() {
            if !used[col] {
                used[col] = true;
                cur.push(col);
                search(c, row + 1, used, cur, score + c[row][col], best);
                cur.pop();
                used[col] = false;
            }
        }
    }
    let mut best = (0, Vec::new());
    search(confusion, 0, &mut vec![false; confusion.len()], &mut Vec::new(), 0, &mut best);
    best.1
}

fn greedy_permutation(confusion: &[Vec<u64>]) -> Vec<usize> {
    let k = confusion.len();
    let mut cells: Vec<(u64, usize, usize)> = (0..k)
        .flat_map(|r| (0..k).map(move |c| (r, c)))
        .map(|(r, c)| (confusion[r][c], r, c))
        .collect();
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut perm = vec![usize::MAX; k];
    let mut taken = vec![false; k];
    for (_, r, c) in cells {
        if perm[r] == usize::MAX && !taken[c] {
            perm[r] = c;
            taken[c] = true;
        }
    }
    perm
}

/// Per-vertex label counts of aligned samples.
struct ModeAccumulator {
    k: usize,
    reference: Option<Vec<usize>>,
    counts: Vec<u32>,
}

impl ModeAccumulator {
    fn new(n: usize, k: usize) -> Self {
        Self { k, reference: None, counts: vec![0; n * k] }
    }

    fn add(&mut self, labels: &[usize]) {
        let aligned = match &self.reference {
            Some(r) => align_labels(labels, r, self.k),
            None => {
                self.reference = Some(labels.to_vec());
                labels.to_vec()
            }
        };
        for (i, &l) in aligned.iter().enumerate() {
            self.counts[i * self.k + l] += 1;
        }
    }

    fn modes(&self) -> Option<Vec<usize>> {
        self.reference.as_ref()?;
        Some(
            self.counts
                .chunks(self.k)
                .map(|c| (0..self.k).max_by_key(|&l| (c[l], std::cmp::Reverse(l))).unwrap_or(0))
                .collect(),
        )
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Trace CSV: `iter,logp,sigma,tau,alpha_1..K,s_1..K,t_1..K,accept_rate`.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &[TraceRow], n_blocks: usize) -> Result<()> {
    let mut header = vec!["iter".to_string(), "logp".into(), "sigma".into(), "tau".into()];
    for name in ["alpha", "s", "t"] {
        header.extend((1..=n_blocks).map(|l| format!("{name}_{l}")));
    }
    header.push("accept_rate".into());
    writeln!(out, "{}", header.join(","))?;
    for r in trace {
        let mut row = vec![r.iter.to_string(), fmt_f64(r.logp), fmt_f64(r.sigma), fmt_f64(r.tau)];
        for v in [&r.alpha, &r.s, &r.t] {
            row.extend(v.iter().map(|&x| fmt_f64(x)));
        }
        row.push(fmt_f64(r.accept_rate));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Label snapshots, one row per snapshot: the iteration then the 1-based
/// labels.
pub fn write_labels_csv<W: Write>(out: &mut W, snapshots: &[(usize, Vec<usize>)]) -> Result<()> {
    for (iter, labels) in snapshots {
        let mut row = vec![iter.to_string()];
        row.extend(labels.iter().map(|l| (l + 1).to_string()));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Prediction CSV `i,j,score` with 1-based vertices.
pub fn write_predictions_csv<W: Write>(out: &mut W, predictions: &[(usize, usize, f64)]) -> Result<()> {
    writeln!(out, "i,j,score")?;
    for &(i, j, s) in predictions {
        writeln!(out, "{},{},{}", i + 1, j + 1, fmt_f64(s))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn small_network() -> EdgeCountMatrix {
        let triples = [(0, 1, 1), (1, 2, 1), (2, 0, 1), (3, 4, 1), (4, 5, 1), (5, 3, 1), (0, 3, 1)];
        let mut a = EdgeCountMatrix::from_triples(6, triples, true).unwrap();
        a.hold_out(1, 0).unwrap();
        a.hold_out(4, 3).unwrap();
        a
    }

    #[test]
    fn alignment_undoes_permutations() {
        let reference = vec![0, 0, 1, 1, 2, 2, 3];
        let permuted: Vec<usize> = reference.iter().map(|&l| [2, 3, 0, 1][l]).collect();
        assert_eq!(align_labels(&permuted, &reference, 4), reference);
        let g = greedy_permutation(&[vec![0, 5, 1], vec![4, 0, 0], vec![0, 1, 3]]);
        assert_eq!(g, vec![1, 0, 2]);
        let mut acc = ModeAccumulator::new(3, 2);
        acc.add(&[0, 0, 1]);
        acc.add(&[1, 1, 0]);
        acc.add(&[1, 0, 0]);
        assert_eq!(acc.modes().unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let a = small_network();
        let cfg = McmcConfig::new(2, 0);
        let chain = run_mcmc(&a, &cfg, &mut seeded_rng(70, 0)).unwrap();
        assert!(chain.trace.is_empty());
        let (z, m) = initial_state(6, &cfg, &mut seeded_rng(70, 0)).unwrap();
        assert_eq!(chain.labels, z);
        assert_eq!(chain.measure, m);
    }

    #[test]
    fn short_chain_is_deterministic_and_well_formed() {
        let a = small_network();
        let mut cfg = McmcConfig::new(2, 20);
        cfg.mh.steps = 10;
        cfg.label_stride = 5;
        let c1 = run_mcmc(&a, &cfg, &mut seeded_rng(71, 0)).unwrap();
        let c2 = run_mcmc(&a, &cfg, &mut seeded_rng(71, 0)).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1.trace.len(), 20);
        assert_eq!(c1.label_snapshots.len(), 4);
        assert_eq!(c1.predictions.len(), 2);
        assert!(c1.predictions.iter().all(|p| p.2 > 0.0 && p.2 < 1.0));
        assert!(c1.trace.iter().all(|r| r.logp.is_finite()));

        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &c1.trace, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,logp,sigma,tau,alpha_1,alpha_2,s_1,s_2,t_1,t_2,accept_rate\n"));
        assert_eq!(text.lines().count(), 21);
        let mut buf = Vec::new();
        write_predictions_csv(&mut buf, &c1.predictions).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("i,j,score\n2,1,"));
    }
}
