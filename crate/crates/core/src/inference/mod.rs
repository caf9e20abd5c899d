//! Collapsed-likelihood MCMC for the block model: the joint density of
//! labels, per-block measures and edge counts, and the samplers over it.

mod chain;
mod gibbs;
mod impute;
mod likelihood;
mod matrix;
mod mh;
mod state;
mod stats;

pub use chain::{
    initial_state, run_mcmc, run_mcmc_from, write_labels_csv, write_predictions_csv, write_trace_csv, Chain,
    InteractionMode, McmcConfig, TraceRow,
};
pub use gibbs::{gibbs_conditional, gibbs_z_sweep, Adjacency};
pub use impute::{impute_all_weights, impute_edges, impute_eta, impute_weights, pair_rate};
pub use likelihood::{
    block_total, log_alpha_prior, log_e_block, log_hyperprior, log_joint, log_joint_stats, log_pochhammer_sum,
    log_remaining_mass, log_tile, log_vertex_factor, HYPERPRIOR_RATE, HYPERPRIOR_SHAPE,
};
pub use matrix::EdgeCountMatrix;
pub use mh::{mh_sweep, MhConfig, UpdateMask};
pub use state::{BlockMeasure, BlockState, InteractionPrior, MeasureState};
pub use stats::{suff_stats, SufficientStats};
