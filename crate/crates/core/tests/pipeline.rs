//! End-to-end runs through the library API.

use crmsbm::baselines::{dcsbm_gibbs, BaselineConfig, BaselineKind};
use crmsbm::data_io::{
    load_edge_list, make_holdout, preprocess, save_edge_list, write_holdout_manifest, HoldoutOptions,
    PreprocessOptions, RawEdgeList, RawRecord,
};
use crmsbm::eval::evaluate_files;
use crmsbm::graph_gen::{sample_network, Interaction, NetworkConfig};
use crmsbm::inference::{run_mcmc, write_predictions_csv, McmcConfig};
use crmsbm::{seeded_rng, GgpParams};

#[test]
fn generate_fit_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = NetworkConfig::new(2, GgpParams::new(15.0, 0.5, 1.0).unwrap());
    config.beta0 = 20.0;
    config.interaction = Interaction::Fixed(vec![vec![3.0, 0.1], vec![0.1, 3.0]]);
    let net = sample_network(&config, &mut seeded_rng(4, 0)).unwrap();
    let raw = RawEdgeList {
        records: net.edges.iter().map(|e| RawRecord { source: e.source, target: e.target, count: e.count }).collect(),
        labels: (1..=net.n_vertices()).map(|i| i.to_string()).collect(),
    };
    let edges = dir.path().join("net.edges");
    save_edge_list(&edges, &raw).unwrap();
    let data = preprocess(&load_edge_list(&edges).unwrap(), &PreprocessOptions::default()).unwrap();
    assert_eq!(data.matrix.n_vertices(), net.n_vertices());
    assert!(data.matrix.is_binary());

    let h = make_holdout(&data.matrix, &HoldoutOptions::new(0.05), &mut seeded_rng(4, 1)).unwrap();
    let manifest = dir.path().join("holdout.csv");
    let mut buf = Vec::new();
    write_holdout_manifest(&mut buf, &h.truth).unwrap();
    std::fs::write(&manifest, buf).unwrap();

    let chain = run_mcmc(&h.matrix, &McmcConfig::new(2, 200), &mut seeded_rng(4, 2)).unwrap();
    assert_eq!(chain.trace.len(), 200);
    assert_eq!(chain.predictions.len(), h.truth.len());
    let preds = dir.path().join("pred.csv");
    let mut buf = Vec::new();
    write_predictions_csv(&mut buf, &chain.predictions).unwrap();
    std::fs::write(&preds, buf).unwrap();
    let metrics = evaluate_files(&preds, &manifest).unwrap();
    assert_eq!(metrics.n_pairs, h.truth.len());
    assert!(metrics.auc > 0.7, "AUC {}", metrics.auc);

    let base = dcsbm_gibbs(&h.matrix, BaselineKind::Pirm, &BaselineConfig::new(100), &mut seeded_rng(4, 3)).unwrap();
    assert_eq!(base.predictions.len(), h.truth.len());
    assert!(base.predictions.iter().all(|p| (0.0..=1.0).contains(&p.2)));
}

#[test]
fn single_vertex_baseline_is_one_block() {
    let a = crmsbm::inference::EdgeCountMatrix::from_triples(1, [(0, 0, 2)], false).unwrap();
    let chain = dcsbm_gibbs(&a, BaselineKind::Dcsbm, &BaselineConfig::new(10), &mut seeded_rng(1, 0)).unwrap();
    assert!(chain.trace.iter().all(|r| r.n_blocks == 1));
    assert_eq!(chain.map_labels, vec![0]);
}
