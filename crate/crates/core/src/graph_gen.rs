//! Forward simulation of block-structured networks from GGP random measures.
//!
//! Atoms `(w_i, θ_i, u_i)` are drawn by thinning a dominating Poisson process
//! above a truncation threshold `ε`. Traits `u_i` pick the block through the
//! cumulative block proportions, tiles receive `Poisson(η_{ℓm} T_ℓ T_m)`
//! edges and each edge picks its endpoints within the two blocks with
//! probability proportional to the atom weights.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{truncated_mass_mean, truncated_tail_mass, GgpParams};
use crate::special::lgamma;
use crate::variates::{dirichlet, gamma, poisson, CumulativeSampler};

/// Atoms of a GGP restricted to `[0, α)` with weights above a threshold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomSet {
    pub weights: Vec<f64>,
    pub locations: Vec<f64>,
    pub traits: Vec<f64>,
    pub threshold: f64,
}

impl AtomSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Default cap on the expected number of proposed atoms per draw.
pub const DEFAULT_MAX_ATOMS: f64 = 5e7;

/// Thinning sampler for GGP atoms with weight at least `threshold`.
///
/// The dominating intensity is `e^{-τε} w^{-1-σ}` on `[ε, c)` (exact Pareto
/// inversion) and `c^{-1-σ} e^{-τw}` on `[c, ∞)` (shifted exponential), with
/// the split `c = max(ε, 1/τ)` adapted to the exponential scale so both
/// acceptance rates stay above `e^{-1}`. For `τ = 0` the Pareto piece covers
/// the whole range and is exact.
#[derive(Debug, Clone)]
pub struct AtomSampler {
    params: GgpParams,
    threshold: f64,
    split: f64,
    pareto_mass: f64,
    tail_mass: f64,
    eps_pow: f64,
    split_pow: f64,
}

impl AtomSampler {
    pub fn new(params: GgpParams, threshold: f64, max_atoms: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::domain(format!(
                "truncation threshold must be positive, got {threshold}"
            )));
        }
        let sigma = params.sigma();
        let tau = params.tau();
        let norm = params.alpha() / lgamma(1.0 - sigma).exp();
        let split = if tau > 0.0 {
            threshold.max(1.0 / tau)
        } else {
            f64::INFINITY
        };
        let eps_pow = threshold.powf(-sigma);
        let split_pow = if split.is_finite() { split.powf(-sigma) } else { 0.0 };
        let pareto_mass = norm * (-tau * threshold).exp() * (eps_pow - split_pow) / sigma;
        let tail_mass = if split.is_finite() {
            norm * split.powf(-1.0 - sigma) * (-tau * split).exp() / tau
        } else {
            0.0
        };
        let expected = pareto_mass + tail_mass;
        if !(expected <= max_atoms) {
            return Err(Error::Resource(format!(
                "expected {expected:.3e} proposed atoms exceeds the cap {max_atoms:.3e}; raise the truncation threshold"
            )));
        }
        Ok(Self {
            params,
            threshold,
            split,
            pareto_mass,
            tail_mass,
            eps_pow,
            split_pow,
        })
    }

    pub fn params(&self) -> &GgpParams {
        &self.params
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Expected number of proposals per draw.
    pub fn expected_proposals(&self) -> f64 {
        self.pareto_mass + self.tail_mass
    }

    /// Draws the atom weights only.
    pub fn sample_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let sigma = self.params.sigma();
        let tau = self.params.tau();
        let n1 = poisson(self.pareto_mass, rng)?;
        let n2 = poisson(self.tail_mass, rng)?;
        let mut weights = Vec::with_capacity((n1 + n2) as usize);
        let span = self.eps_pow - self.split_pow;
        for _ in 0..n1 {
            let v: f64 = rng.random();
            let w = (self.eps_pow - v * span).powf(-1.0 / sigma);
            if tau == 0.0 || rng.random::<f64>() < (-tau * (w - self.threshold)).exp() {
                weights.push(w);
            }
        }
        for _ in 0..n2 {
            let e: f64 = rng.sample(rand_distr::Exp1);
            let w = self.split + e / tau;
            if rng.random::<f64>() < (w / self.split).powf(-1.0 - sigma) {
                weights.push(w);
            }
        }
        Ok(weights)
    }

    /// Draws weights together with uniform locations on `[0, α)` and uniform
    /// traits on `[0, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AtomSet> {
        let weights = self.sample_weights(rng)?;
        let alpha = self.params.alpha();
        let locations = weights.iter().map(|_| rng.random::<f64>() * alpha).collect();
        let traits = weights.iter().map(|_| rng.random::<f64>()).collect();
        Ok(AtomSet {
            weights,
            locations,
            traits,
            threshold: self.threshold,
        })
    }
}

/// Samples the GGP atoms with weight at least `truncation`.
pub fn sample_atoms<R: Rng + ?Sized>(
    params: &GgpParams,
    truncation: f64,
    rng: &mut R,
) -> Result<AtomSet> {
    AtomSampler::new(*params, truncation, DEFAULT_MAX_ATOMS)?.sample(rng)
}

/// Default truncation threshold: `1e-6` times the typical total mass.
pub fn default_truncation(params: &GgpParams) -> f64 {
    1e-6 * params.typical_total_mass()
}

/// Block proportions `β ~ Dirichlet(β0/K, …, β0/K)`.
pub fn sample_block_proportions<R: Rng + ?Sized>(k: usize, beta0: f64, rng: &mut R) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::domain("number of blocks must be at least 1"));
    }
    if !(beta0 > 0.0) {
        return Err(Error::domain(format!("beta0 must be positive, got {beta0}")));
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    Ok(dirichlet(&vec![beta0 / k as f64; k], rng))
}

/// Block of a trait `u` under proportions `β`: the `ℓ` with `u ∈ J_ℓ`.
pub fn block_of_trait(u: f64, proportions: &[f64]) -> usize {
    let mut acc = 0.0;
    for (l, b) in proportions.iter().enumerate() {
        acc += b;
        if u < acc {
            return l;
        }
    }
    proportions.len() - 1
}

/// How the interaction matrix `η` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Interaction {
    /// `η_{ℓm} ~ Gamma(λa, λb)` (shape/rate).
    Gamma { lambda_a: f64, lambda_b: f64 },
    /// `η ≡ 1`, the `λa = λb → ∞` limit.
    Unit,
    /// A fixed matrix.
    Fixed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub blocks: usize,
    pub params: GgpParams,
    pub beta0: f64,
    pub interaction: Interaction,
    /// Absolute weight threshold; `None` uses [`default_truncation`].
    pub truncation: Option<f64>,
    pub max_atoms: f64,
    pub max_edges: u64,
    /// Keep atoms that received no edge endpoint as isolated vertices.
    pub keep_unselected: bool,
}

impl NetworkConfig {
    pub fn new(blocks: usize, params: GgpParams) -> Self {
        Self {
            blocks,
            params,
            beta0: 1.0,
            interaction: Interaction::Gamma {
                lambda_a: 1.0,
                lambda_b: 1.0,
            },
            truncation: None,
            max_atoms: DEFAULT_MAX_ATOMS,
            max_edges: 50_000_000,
            keep_unselected: false,
        }
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
            .unwrap_or_else(|| default_truncation(&self.params))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub count: u64,
}

/// A simulated network with its ground truth.
///
/// Vertices are indexed from 0 in order of atom generation; blocks are
/// 0-based as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedNetwork {
    pub edges: Vec<Edge>,
    pub vertex_blocks: Vec<usize>,
    pub vertex_weights: Vec<f64>,
    pub vertex_traits: Vec<f64>,
    pub block_proportions: Vec<f64>,
    pub interaction: Vec<Vec<f64>>,
    /// Truncated block masses `T_ℓ`.
    pub block_masses: Vec<f64>,
    /// Edge counts `L_{ℓm}` per tile.
    pub tile_counts: Vec<Vec<u64>>,
    pub truncation: f64,
    /// Expected mass of atoms below the threshold, `α ∫_0^ε w ρ(dw)`.
    pub truncated_mass_mean: f64,
    /// `α ∫_0^ε (1 − e^{−w}) ρ(dw)`.
    pub neglected_tail_mass: f64,
}

impl GeneratedNetwork {
    pub fn n_vertices(&self) -> usize {
        self.vertex_blocks.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.block_proportions.len()
    }

    pub fn total_edges(&self) -> u64 {
        self.edges.iter().map(|e| e.count).sum()
    }

    /// Endpoint counts `n_i = Σ_j (A_ij + A_ji)`.
    pub fn endpoint_counts(&self) -> Vec<u64> {
        let mut n = vec![0u64; self.n_vertices()];
        for e in &self.edges {
            n[e.source] += e.count;
            n[e.target] += e.count;
        }
        n
    }

    /// JSON sidecar with the ground truth (`z` 1-based).
    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let sidecar = serde_json::json!({
            "z": self.vertex_blocks.iter().map(|z| z + 1).collect::<Vec<_>>(),
            "beta": self.block_proportions,
            "eta": self.interaction,
            "w": self.vertex_weights,
            "block_masses": self.block_masses,
            "tile_counts": self.tile_counts,
            "truncation": self.truncation,
            "truncated_mass_mean": self.truncated_mass_mean,
            "neglected_tail_mass": self.neglected_tail_mass,
        });
        std::fs::write(path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        Ok(())
    }
}

fn interaction_matrix<R: Rng + ?Sized>(
    interaction: &Interaction,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    match interaction {
        Interaction::Unit => Ok(vec![vec![1.0; k]; k]),
        Interaction::Gamma { lambda_a, lambda_b } => {
            if !(*lambda_a > 0.0 && *lambda_b > 0.0) {
                return Err(Error::domain("lambda_a and lambda_b must be positive"));
            }
            Ok((0..k)
                .map(|_| (0..k).map(|_| gamma(*lambda_a, *lambda_b, rng)).collect())
                .collect())
        }
        Interaction::Fixed(m) => {
            if m.len() != k || m.iter().any(|row| row.len() != k) {
                return Err(Error::domain(format!("fixed interaction must be {k}x{k}")));
            }
            if m.iter().flatten().any(|&x| !(x >= 0.0)) {
                return Err(Error::domain("interaction entries must be nonnegative"));
            }
            Ok(m.clone())
        }
    }
}

/// Runs the full generative process.
pub fn sample_network<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<GeneratedNetwork> {
    let k = config.blocks;
    let proportions = sample_block_proportions(k, config.beta0, rng)?;
    let eps = config.truncation();
    let atoms = AtomSampler::new(config.params, eps, config.max_atoms)?.sample(rng)?;
    let eta = interaction_matrix(&config.interaction, k, rng)?;
    network_from_atoms(config, &atoms, proportions, eta, rng)
}

/// Places edges on given atoms, proportions and interaction matrix.
pub fn network_from_atoms<R: Rng + ?Sized>(
    config: &NetworkConfig,
    atoms: &AtomSet,
    proportions: Vec<f64>,
    eta: Vec<Vec<f64>>,
    rng: &mut R,
) -> Result<GeneratedNetwork> {
    let k = proportions.len();
    let blocks: Vec<usize> = atoms
        .traits
        .iter()
        .map(|&u| block_of_trait(u, &proportions))
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &b) in blocks.iter().enumerate() {
        members[b].push(i);
    }
    let masses: Vec<f64> = members
        .iter()
        .map(|m| m.iter().map(|&i| atoms.weights[i]).sum())
        .collect();
    let samplers: Vec<CumulativeSampler> = members
        .iter()
        .map(|m| CumulativeSampler::new(&m.iter().map(|&i| atoms.weights[i]).collect::<Vec<_>>()))
        .collect();

    let mut tile_counts = vec![vec![0u64; k]; k];
    let mut total = 0u64;
    for l in 0..k {
        for m in 0..k {
            let count = poisson(eta[l][m] * masses[l] * masses[m], rng)?;
            total += count;
            if total > config.max_edges {
                return Err(Error::Resource(format!(
                    "edge count exceeds the cap {}",
                    config.max_edges
                )));
            }
            tile_counts[l][m] = count;
        }
    }

    let mut multi: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for l in 0..k {
        for m in 0..k {
            for _ in 0..tile_counts[l][m] {
                let src = members[l][samplers[l].sample(rng)];
                let dst = members[m][samplers[m].sample(rng)];
                *multi.entry((src, dst)).or_insert(0) += 1;
            }
        }
    }

    let mut selected = vec![config.keep_unselected; atoms.len()];
    for &(s, t) in multi.keys() {
        selected[s] = true;
        selected[t] = true;
    }
    let mut index = vec![usize::MAX; atoms.len()];
    let mut next = 0;
    for (i, keep) in selected.iter().enumerate() {
        if *keep {
            index[i] = next;
            next += 1;
        }
    }
    let keep: Vec<usize> = (0..atoms.len()).filter(|&i| selected[i]).collect();
    let edges = multi
        .into_iter()
        .map(|((s, t), count)| Edge {
            source: index[s],
            target: index[t],
            count,
        })
        .collect();

    Ok(GeneratedNetwork {
        edges,
        vertex_blocks: keep.iter().map(|&i| blocks[i]).collect(),
        vertex_weights: keep.iter().map(|&i| atoms.weights[i]).collect(),
        vertex_traits: keep.iter().map(|&i| atoms.traits[i]).collect(),
        block_proportions: proportions,
        interaction: eta,
        block_masses: masses,
        tile_counts,
        truncation: atoms.threshold,
        truncated_mass_mean: truncated_mass_mean(&config.params, atoms.threshold)?,
        neglected_tail_mass: truncated_tail_mass(&config.params, atoms.threshold)?,
    })
}
