//! Conditional draws of the vertex weights, tile interactions and the
//! unobserved or latent edge counts.

use rand::Rng;

use crate::error::{Error, Result};
use crate::variates::{dirichlet, gamma, poisson};

use super::likelihood::block_total;
use super::matrix::EdgeCountMatrix;
use super::state::{BlockState, InteractionPrior, MeasureState};
use super::stats::SufficientStats;

/// Normalised weights `w_i / s_ℓ ~ Dirichlet(n_i − σ)` of the vertices in
/// block `l`, in ascending vertex order.
pub fn impute_weights<R: Rng + ?Sized>(
    stats: &SufficientStats,
    z: &BlockState,
    m: &MeasureState,
    l: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let params: Vec<f64> = z
        .labels
        .iter()
        .zip(&stats.vertex_counts)
        .filter(|(&zl, _)| zl == l)
        .map(|(_, &n)| n as f64 - m.sigma)
        .collect();
    if params.is_empty() {
        return Err(Error::contract(format!("block {l} is empty")));
    }
    if let Some(p) = params.iter().find(|&&p| !(p > 0.0)) {
        return Err(Error::contract(format!("Dirichlet parameter {p} in block {l}")));
    }
    Ok(dirichlet(&params, rng))
}

/// Unnormalised weights `w_i` for every vertex.
pub fn impute_all_weights<R: Rng + ?Sized>(
    stats: &SufficientStats,
    z: &BlockState,
    m: &MeasureState,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut w = vec![0.0; z.labels.len()];
    for l in 0..z.n_blocks {
        if stats.block_sizes[l] == 0 {
            continue;
        }
        let draws = impute_weights(stats, z, m, l, rng)?;
        let members = z.labels.iter().enumerate().filter(|(_, &zl)| zl == l).map(|(i, _)| i);
        for (i, p) in members.zip(draws) {
            w[i] = p * m.blocks[l].s;
        }
    }
    Ok(w)
}

/// Tile interactions, row-major `K × K`: `η_ℓm ~ Gamma(n_ℓm + λa,
/// T_ℓ T_m + λb)`, or all ones for unit interactions.
pub fn impute_eta<R: Rng + ?Sized>(stats: &SufficientStats, m: &MeasureState, rng: &mut R) -> Vec<f64> {
    let k = m.n_blocks();
    match m.interaction {
        InteractionPrior::Unit => vec![1.0; k * k],
        InteractionPrior::Gamma { lambda_a, lambda_b } => {
            let masses: Vec<f64> = (0..k)
                .map(|l| block_total(&m.blocks[l], stats.block_sizes[l] > 0))
                .collect();
            let mut eta = Vec::with_capacity(k * k);
            for l in 0..k {
                for mm in 0..k {
                    let shape = stats.tile(l, mm) as f64 + lambda_a;
                    eta.push(gamma(shape, masses[l] * masses[mm] + lambda_b, rng));
                }
            }
            eta
        }
    }
}

/// Poisson rate `η_{z_i z_j} w_i w_j` of pair `(i, j)`.
pub fn pair_rate(labels: &[usize], weights: &[f64], eta: &[f64], i: usize, j: usize) -> f64 {
    let k = (eta.len() as f64).sqrt() as usize;
    eta[labels[i] * k + labels[j]] * weights[i] * weights[j]
}

/// Redraws the counts the data do not pin down.
///
/// Held-out pairs get `Poisson(rate)` (clipped to `{0, 1}` when `clip` is
/// set). In binary mode each observed positive entry gets a zero-truncated
/// update: a `Poisson(rate)` proposal replaces the count unless it is zero.
pub fn impute_edges<R: Rng + ?Sized>(
    a: &mut EdgeCountMatrix,
    labels: &[usize],
    weights: &[f64],
    eta: &[f64],
    clip: bool,
    rng: &mut R,
) -> Result<()> {
    let holdout: Vec<(usize, usize)> = a.holdout().collect();
    for (i, j) in holdout {
        let mut c = poisson(pair_rate(labels, weights, eta, i, j), rng)?;
        if clip {
            c = c.min(1);
        }
        a.set(i, j, c)?;
    }
    if a.is_binary() {
        let observed: Vec<(usize, usize)> = a.observed_entries().map(|(i, j, _)| (i, j)).collect();
        for (i, j) in observed {
            let c = poisson(pair_rate(labels, weights, eta, i, j), rng)?;
            if c > 0 {
                a.set(i, j, c)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{suff_stats, BlockMeasure};
    use crate::seeded_rng;

    fn measure(k: usize) -> MeasureState {
        MeasureState {
            sigma: 0.5,
            tau: 1.0,
            blocks: vec![BlockMeasure { alpha: 2.0, s: 3.0, t: 1.0, u: 1.0 }; k],
            interaction: InteractionPrior::Gamma { lambda_a: 1.0, lambda_b: 2.0 },
        }
    }

    #[test]
    fn single_vertex_block_gets_unit_weight() {
        let a = EdgeCountMatrix::from_triples(2, [(0, 1, 1)], true).unwrap();
        let z = BlockState::new(vec![0, 1], 2, 1.0).unwrap();
        let st = suff_stats(&a, &z).unwrap();
        let w = impute_weights(&st, &z, &measure(2), 1, &mut seeded_rng(60, 0)).unwrap();
        assert_eq!(w, vec![1.0]);
        let all = impute_all_weights(&st, &z, &measure(2), &mut seeded_rng(60, 0)).unwrap();
        assert_eq!(all, vec![3.0, 3.0]);
    }

    #[test]
    fn dirichlet_means() {
        let a = EdgeCountMatrix::from_triples(3, [(0, 1, 1), (1, 2, 1), (2, 2, 2)], false).unwrap();
        let z = BlockState::new(vec![0, 0, 0], 1, 1.0).unwrap();
        let st = suff_stats(&a, &z).unwrap();
        let m = measure(1);
        let mut rng = seeded_rng(61, 0);
        let reps = 100_000;
        let mut sums = [0.0; 3];
        for _ in 0..reps {
            let w = impute_weights(&st, &z, &m, 0, &mut rng).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (s, x) in sums.iter_mut().zip(w) {
                *s += x;
            }
        }
        // n = (1, 2, 5), n_ℓ − kσ = 8 − 1.5.
        let expected = [0.5 / 6.5, 1.5 / 6.5, 4.5 / 6.5];
        for (s, e) in sums.iter().zip(expected) {
            let mean = s / reps as f64;
            let sd = (e * (1.0 - e) / 7.5 / reps as f64).sqrt();
            assert!((mean - e).abs() < 5.0 * sd, "{mean} vs {e}");
        }
    }

    #[test]
    fn eta_mean_and_support() {
        let a = EdgeCountMatrix::from_triples(2, [(0, 1, 3)], false).unwrap();
        let z = BlockState::new(vec![0, 1], 2, 1.0).unwrap();
        let st = suff_stats(&a, &z).unwrap();
        let m = measure(2);
        let mut rng = seeded_rng(62, 0);
        let reps = 50_000;
        let mut sum = [0.0; 4];
        for _ in 0..reps {
            let eta = impute_eta(&st, &m, &mut rng);
            assert!(eta.iter().all(|&e| e > 0.0));
            for (s, e) in sum.iter_mut().zip(eta) {
                *s += e;
            }
        }
        for (idx, n) in [(0, 0.0), (1, 3.0)] {
            let (shape, rate) = (n + 1.0, 16.0 + 2.0);
            let mean = sum[idx] / reps as f64;
            let sd = (shape / (rate * rate) / reps as f64).sqrt();
            assert!((mean - shape / rate).abs() < 5.0 * sd, "{mean}");
        }
    }

    #[test]
    fn zero_rate_and_truncation() {
        let mut a = EdgeCountMatrix::from_triples(3, [(0, 1, 1), (1, 2, 1)], true).unwrap();
        a.hold_out(2, 0).unwrap();
        let labels = [0, 0, 0];
        let mut rng = seeded_rng(63, 0);
        impute_edges(&mut a, &labels, &[0.0, 1.0, 1.0], &[1.0], false, &mut rng).unwrap();
        assert_eq!(a.count(2, 0), 0);
        for _ in 0..200 {
            impute_edges(&mut a, &labels, &[1e-3, 1e-3, 1e-3], &[1.0], false, &mut rng).unwrap();
            assert!(a.count(0, 1) >= 1 && a.count(1, 2) >= 1);
        }
    }
}
