//! Validation of the sampler against exact small-network probabilities and
//! of the total-mass law against its quadrature CDF.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_gen::{default_truncation, AtomSampler, GeneratedNetwork, Interaction, NetworkConfig, sample_network};
use crate::measure::{log_total_mass_density, total_mass_sampler, truncated_mass_mean};
use crate::quad::Quadrature;
use crate::special::{lgamma, log_factorial, pochhammer_log};
use crate::GgpParams;

/// Endpoint counts of the vertices that carry edges, sorted decreasingly.
pub fn signature_of(network: &GeneratedNetwork) -> Vec<u64> {
    let mut sig: Vec<u64> = network.endpoint_counts().into_iter().filter(|&n| n > 0).collect();
    sig.sort_unstable_by(|a, b| b.cmp(a));
    sig
}

/// Partitions of `n` into parts no larger than `max_part`, decreasing.
fn partitions(n: u64, max_part: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if n == 0 {
        out.push(prefix.clone());
        return;
    }
    for part in (1..=n.min(max_part)).rev() {
        prefix.push(part);
        partitions(n - part, part, prefix, out);
        prefix.pop();
    }
}

/// All integer partitions of `2L` for `L = 0..=max_edges`.
pub fn enumerate_signatures(max_edges: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for l in 0..=max_edges {
        partitions(2 * l, 2 * l, &mut Vec::new(), &mut out);
    }
    out
}

/// `ln [n! / Π_i ((i!)^{m_i} m_i!)]`, with `m_i` the number of parts equal
/// to `i`: the log number of set partitions of `n` labelled endpoints with
/// the given block sizes.
pub fn log_multiplicity_factor(signature: &[u64]) -> f64 {
    let n: u64 = signature.iter().sum();
    let mut multiplicities: BTreeMap<u64, u64> = BTreeMap::new();
    for &p in signature {
        *multiplicities.entry(p).or_insert(0) += 1;
    }
    log_factorial(n)
        - multiplicities
            .iter()
            .map(|(&part, &m)| m as f64 * log_factorial(part) + log_factorial(m))
            .sum::<f64>()
}

/// [`log_multiplicity_factor`] as an exact integer.
pub fn multiplicity_factor(signature: &[u64]) -> u128 {
    let fact = |k: u64| (1..=k as u128).product::<u128>();
    let n: u64 = signature.iter().sum();
    let mut multiplicities: BTreeMap<u64, u64> = BTreeMap::new();
    for &p in signature {
        *multiplicities.entry(p).or_insert(0) += 1;
    }
    let denom: u128 = multiplicities
        .iter()
        .map(|(&part, &m)| fact(part).pow(m as u32) * fact(m))
        .product();
    fact(n) / denom
}

fn quadrature() -> Quadrature {
    Quadrature::new(1e-14, 1e-9)
}

/// `∫_0^∞ g(t) h(t) dt` for a smooth, rapidly decaying `h`.
fn integrate_against_g<F: FnMut(f64) -> Result<f64>>(params: &GgpParams, mut h: F) -> Result<f64> {
    let mut failure = None;
    let scale = params.mean_total_mass().min(1.0);
    let est = quadrature().integrate_semi_infinite(
        |t| {
            if failure.is_some() || t <= 0.0 {
                return 0.0;
            }
            let value = log_total_mass_density(params, t).and_then(|lg| Ok(lg.exp() * h(t)?));
            match value {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        scale,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(est.value),
    }
}

/// Probability that a forward-simulated K = 1, η ≡ 1 network has exactly
/// this endpoint-count signature.
///
/// It is the collapsed joint of a labelled endpoint partition, integrated
/// over `(s, t)`, times `1/L!` for the edge ordering and the number of
/// labelled partitions sharing the signature.
pub fn signature_probability(params: &GgpParams, signature: &[u64]) -> Result<f64> {
    let n: u64 = signature.iter().sum();
    if n % 2 == 1 {
        return Err(Error::domain("signature must have an even number of endpoints"));
    }
    if signature.contains(&0) {
        return Err(Error::domain("signature parts must be positive"));
    }
    let edges = n / 2;
    let sigma = params.sigma();
    let tau = params.tau();
    let k = signature.len() as f64;
    let log_front = log_multiplicity_factor(signature) - log_factorial(edges);
    if signature.is_empty() {
        return integrate_against_g(params, |t| Ok((-t * t).exp()));
    }
    let a = n as f64 - k * sigma;
    let log_const = k * params.alpha().ln()
        + signature.iter().map(|&p| pochhammer_log(1.0 - sigma, p - 1)).sum::<f64>()
        - lgamma(a)
        + log_front;
    // s = r²: ∫ s^{a−1} e^{−τs−(s+t)²} ds = ∫ 2 r^{2a−1} e^{−τr²−(r²+t)²} dr.
    let inner = |t: f64| -> Result<f64> {
        let est = quadrature().integrate_semi_infinite(
            |r| {
                let s = r * r;
                2.0 * ((2.0 * a - 1.0) * r.ln() - tau * s - (s + t) * (s + t) + log_const).exp()
            },
            0.0,
            1.0,
        )?;
        Ok(est.value)
    };
    integrate_against_g(params, inner)
}

/// `P(L = l) = E[e^{−T²} T^{2l} / l!]` by direct quadrature of `g`.
pub fn edge_count_probability(params: &GgpParams, l: u64) -> Result<f64> {
    integrate_against_g(params, |t| {
        Ok((-(t * t) + 2.0 * l as f64 * t.ln() - log_factorial(l)).exp())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureRow {
    pub signature: Vec<u64>,
    pub analytic: f64,
    pub empirical: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureReport {
    pub rows: Vec<SignatureRow>,
    /// Networks with more than `max_edges` edges.
    pub discard: SignatureRow,
    pub n_networks: usize,
    pub total_variation: f64,
}

impl SignatureReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().chain([&self.discard]).map(|r| r.z.abs()).fold(0.0, f64::max)
    }
}

fn z_score(empirical: f64, analytic: f64, n: usize) -> f64 {
    let sd = (analytic * (1.0 - analytic) / n as f64).sqrt();
    if sd > 0.0 {
        (empirical - analytic) / sd
    } else if empirical == analytic {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Compares signature frequencies of `n_networks` simulated K = 1, η ≡ 1
/// networks with their exact probabilities; networks with more than
/// `max_edges` edges fall into a single discard bucket.
pub fn validate_signatures<R: Rng + ?Sized>(
    params: &GgpParams,
    n_networks: usize,
    max_edges: u64,
    rng: &mut R,
) -> Result<SignatureReport> {
    if n_networks == 0 {
        return Err(Error::domain("need at least one network"));
    }
    let signatures = enumerate_signatures(max_edges);
    let analytic: Vec<f64> = signatures
        .iter()
        .map(|s| signature_probability(params, s))
        .collect::<Result<_>>()?;
    let discard_analytic = 1.0 - analytic.iter().sum::<f64>();

    let mut config = NetworkConfig::new(1, *params);
    config.interaction = Interaction::Unit;
    let position: BTreeMap<&[u64], usize> =
        signatures.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let mut counts = vec![0usize; signatures.len()];
    let mut discarded = 0usize;
    for _ in 0..n_networks {
        let net = sample_network(&config, rng)?;
        if net.total_edges() > max_edges {
            discarded += 1;
            continue;
        }
        let sig = signature_of(&net);
        counts[position[sig.as_slice()]] += 1;
    }
    let nf = n_networks as f64;
    let rows: Vec<SignatureRow> = signatures
        .into_iter()
        .zip(analytic)
        .zip(counts)
        .map(|((signature, analytic), c)| {
            let empirical = c as f64 / nf;
            SignatureRow { signature, analytic, empirical, z: z_score(empirical, analytic, n_networks) }
        })
        .collect();
    let discard_emp = discarded as f64 / nf;
    let discard = SignatureRow {
        signature: Vec::new(),
        analytic: discard_analytic,
        empirical: discard_emp,
        z: z_score(discard_emp, discard_analytic, n_networks),
    };
    let total_variation = 0.5
        * (rows.iter().map(|r| (r.empirical - r.analytic).abs()).sum::<f64>()
            + (discard.empirical - discard.analytic).abs());
    Ok(SignatureReport { rows, discard, n_networks, total_variation })
}

fn format_signature(sig: &[u64]) -> String {
    let parts: Vec<String> = sig.iter().map(u64::to_string).collect();
    format!("({})", parts.join(" "))
}

/// Signature table CSV `signature,analytic,empirical,z`; the discard bucket
/// is the last row, labelled `discard`.
pub fn write_signature_csv<W: Write>(out: &mut W, report: &SignatureReport) -> Result<()> {
    writeln!(out, "signature,analytic,empirical,z")?;
    for r in &report.rows {
        writeln!(out, "{},{:?},{:?},{:?}", format_signature(&r.signature), r.analytic, r.empirical, r.z)?;
    }
    let d = &report.discard;
    writeln!(out, "discard,{:?},{:?},{:?}", d.analytic, d.empirical, d.z)?;
    Ok(())
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Total masses of simulated measures: the sum of the generated atom
/// weights plus the expected mass below the truncation threshold.
pub fn simulate_total_masses<R: Rng + ?Sized>(params: &GgpParams, n_samples: usize, rng: &mut R) -> Result<Vec<f64>> {
    let eps = default_truncation(params);
    let sampler = AtomSampler::new(*params, eps, crate::graph_gen::DEFAULT_MAX_ATOMS)?;
    let remainder = truncated_mass_mean(params, eps)?;
    (0..n_samples)
        .map(|_| Ok(sampler.sample_weights(rng)?.iter().sum::<f64>() + remainder))
        .collect()
}

/// KS distance between simulated total masses and the quadrature CDF of
/// `oracle` (normally the simulation parameters themselves).
pub fn validate_total_mass_against<R: Rng + ?Sized>(
    params: &GgpParams,
    oracle: &GgpParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let samples = simulate_total_masses(params, n_samples, rng)?;
    let table = total_mass_sampler(oracle)?;
    Ok(ks_statistic(&samples, |t| table.cdf(t)))
}

pub fn validate_total_mass<R: Rng + ?Sized>(params: &GgpParams, n_samples: usize, rng: &mut R) -> Result<f64> {
    validate_total_mass_against(params, params, n_samples, rng)
}
