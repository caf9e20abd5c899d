//! The collapsed joint density of labels, block measures and edge counts.

use crate::error::{Error, Result};
use crate::measure::log_total_mass_density_augmented;
use crate::special::{gamma_log_pdf, lgamma, pochhammer_log};
use crate::GgpParams;

use super::matrix::EdgeCountMatrix;
use super::state::{BlockMeasure, BlockState, InteractionPrior, MeasureState};
use super::stats::{suff_stats, SufficientStats};

/// Below this the remaining-mass density is treated as zero.
const LOG_G_FLOOR: f64 = -700.0;

/// Shape and rate of the Gamma(2, 1) hyperprior on `β0`, `λa`, `λb`.
pub const HYPERPRIOR_SHAPE: f64 = 2.0;
pub const HYPERPRIOR_RATE: f64 = 1.0;

/// `ln g(t_ℓ, u_ℓ)` for the block's own window measure, floored to `-∞`.
pub fn log_remaining_mass(sigma: f64, tau: f64, b: &BlockMeasure) -> f64 {
    let Ok(params) = GgpParams::new(b.alpha, sigma, tau) else {
        return f64::NEG_INFINITY;
    };
    let v = log_total_mass_density_augmented(&params, b.t, b.u);
    if v < LOG_G_FLOOR || v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// `ln (1−σ)_{n−1} = ln Γ(n−σ) − ln Γ(1−σ)`: what a vertex with `n`
/// endpoints contributes once its weight is integrated out.
pub fn log_vertex_factor(sigma: f64, n: u64) -> f64 {
    pochhammer_log(1.0 - sigma, n.saturating_sub(1))
}

/// Sum of [`log_vertex_factor`] over a degree histogram.
pub fn log_pochhammer_sum<'a>(sigma: f64, histogram: impl IntoIterator<Item = (&'a u64, &'a u64)>) -> f64 {
    histogram
        .into_iter()
        .map(|(&n, &count)| count as f64 * log_vertex_factor(sigma, n))
        .sum()
}

/// `ln E_ℓ` from its ingredients: `k` vertices with `n` endpoints in total,
/// the Pochhammer sum, and the precomputed `ln g(t_ℓ, u_ℓ)`.
///
/// An empty block contributes `ln g` plus an Exp(1) pseudo-prior on the
/// then unconstrained `s_ℓ`.
pub(crate) fn log_e_parts(k: usize, n: u64, log_poch: f64, b: &BlockMeasure, sigma: f64, tau: f64, log_g: f64) -> f64 {
    if k == 0 {
        return log_g - b.s;
    }
    let shape = n as f64 - k as f64 * sigma;
    if !(shape > 0.0) {
        return f64::NAN;
    }
    k as f64 * b.alpha.ln() + (shape - 1.0) * b.s.ln() - lgamma(shape) - tau * b.s + log_g + log_poch
}

/// `ln E_ℓ` for block `l`.
pub fn log_e_block(stats: &SufficientStats, m: &MeasureState, l: usize) -> Result<f64> {
    let b = &m.blocks[l];
    let k = stats.block_sizes[l];
    let n = stats.block_counts[l];
    if k > 0 && !(n as f64 - k as f64 * m.sigma > 0.0) {
        return Err(Error::contract(format!("block {l} has n - kσ <= 0")));
    }
    let log_g = log_remaining_mass(m.sigma, m.tau, b);
    let log_poch = log_pochhammer_sum(m.sigma, &stats.degree_histograms[l]);
    Ok(log_e_parts(k, n, log_poch, b, m.sigma, m.tau, log_g))
}

/// Block total mass `T_ℓ`; `s_ℓ` only counts for occupied blocks.
pub fn block_total(b: &BlockMeasure, occupied: bool) -> f64 {
    if occupied {
        b.s + b.t
    } else {
        b.t
    }
}

/// Tile factor `ln G(λa + n, λb + T_ℓ T_m) − ln G(λa, λb)`, or `−T_ℓ T_m`
/// for unit interactions.
pub fn log_tile(n: u64, mass_product: f64, interaction: &InteractionPrior) -> f64 {
    match *interaction {
        InteractionPrior::Gamma { lambda_a, lambda_b } => {
            let a = lambda_a + n as f64;
            let b = lambda_b + mass_product;
            (lgamma(a) - a * b.ln()) - (lgamma(lambda_a) - lambda_a * lambda_b.ln())
        }
        InteractionPrior::Unit => -mass_product,
    }
}

/// Dirichlet-type prior over the block window measures `α_ℓ`.
pub fn log_alpha_prior(m: &MeasureState, beta0: f64) -> f64 {
    let k = m.n_blocks() as f64;
    let total: f64 = m.total_alpha();
    let conc = beta0 / k;
    lgamma(beta0) + (conc - 1.0) * m.blocks.iter().map(|b| b.alpha.ln()).sum::<f64>()
        - k * lgamma(conc)
        - beta0 * total.ln()
}

/// Gamma(2, 1) hyperpriors on `β0` (when `K > 1`) and on `λa`, `λb` (gamma
/// interactions only).
pub fn log_hyperprior(z: &BlockState, m: &MeasureState) -> f64 {
    let mut lp = 0.0;
    if z.n_blocks > 1 {
        lp += gamma_log_pdf(z.beta0, HYPERPRIOR_SHAPE, HYPERPRIOR_RATE);
    }
    if let InteractionPrior::Gamma { lambda_a, lambda_b } = m.interaction {
        lp += gamma_log_pdf(lambda_a, HYPERPRIOR_SHAPE, HYPERPRIOR_RATE)
            + gamma_log_pdf(lambda_b, HYPERPRIOR_SHAPE, HYPERPRIOR_RATE);
    }
    lp
}

fn finite_or_err(term: &str, v: f64) -> Result<f64> {
    if v.is_nan() || v == f64::INFINITY {
        Err(Error::numeric("log_joint", format!("{term} evaluated to {v}")))
    } else {
        Ok(v)
    }
}

/// Collapsed log joint from precomputed statistics.
pub fn log_joint_stats(stats: &SufficientStats, z: &BlockState, m: &MeasureState) -> Result<f64> {
    let k = m.n_blocks();
    if stats.n_blocks() != k || z.n_blocks != k {
        return Err(Error::contract(format!(
            "block counts disagree: stats {}, labels {}, measure {k}",
            stats.n_blocks(),
            z.n_blocks
        )));
    }
    let mut total = finite_or_err("alpha prior", log_alpha_prior(m, z.beta0))?;
    for l in 0..k {
        total += finite_or_err(&format!("E_{}", l + 1), log_e_block(stats, m, l)?)?;
    }
    let masses: Vec<f64> = (0..k)
        .map(|l| block_total(&m.blocks[l], stats.block_sizes[l] > 0))
        .collect();
    let mut tiles = 0.0;
    for l in 0..k {
        for mm in 0..k {
            tiles += log_tile(stats.tile(l, mm), masses[l] * masses[mm], &m.interaction);
        }
    }
    total += finite_or_err("tile terms", tiles)?;
    total -= stats.log_factorial_sum;
    Ok(total)
}

/// Collapsed log joint `ln p(A, z, Φ)` up to the flat priors on `σ, τ, α`.
pub fn log_joint(a: &EdgeCountMatrix, z: &BlockState, m: &MeasureState) -> Result<f64> {
    m.validate()?;
    log_joint_stats(&suff_stats(a, z)?, z, m)
}
