//! Comparison block models with a Chinese-restaurant-process prior on the
//! labels: the Poisson IRM (pIRM) and the degree-corrected SBM (DCSBM).
//!
//! `A_ij ~ Poisson(k_ℓ k_m θ⁽¹⁾_i θ⁽²⁾_j η_ℓm)` with `ℓ = z_i`, `m = z_j`,
//! `k_ℓ` the block sizes, `η_ℓm ~ Gamma(λa, λb)` and, per block, the
//! degree simplices `θ⁽¹⁾, θ⁽²⁾ ~ Dirichlet(γ)` (DCSBM) or uniform `1/k_ℓ`
//! (pIRM). Both `η` and `θ` are integrated out.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Adjacency, EdgeCountMatrix};
use crate::special::{gamma_log_pdf, lgamma, log_factorial};
use crate::variates::{categorical_log, dirichlet, gamma, poisson, standard_normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    Pirm,
    Dcsbm,
}

/// Labels and hyperparameters; `θ` and `η` are collapsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcsbmState {
    pub kind: BaselineKind,
    /// Labels `0..n_blocks`, every block nonempty.
    pub labels: Vec<usize>,
    pub n_blocks: usize,
    pub alpha_crp: f64,
    /// Dirichlet concentration of the degree simplices (unused by pIRM).
    pub gamma: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
}

impl DcsbmState {
    pub fn new(kind: BaselineKind, labels: Vec<usize>) -> Result<Self> {
        let mut s = Self {
            kind,
            labels,
            n_blocks: 0,
            alpha_crp: 1.0,
            gamma: 1.0,
            lambda_a: 1.0,
            lambda_b: 1.0,
        };
        s.compact();
        s.validate()?;
        Ok(s)
    }

    /// Renumbers the labels to `0..K` in order of first appearance.
    pub fn compact(&mut self) {
        let mut map = std::collections::BTreeMap::new();
        for l in &mut self.labels {
            let next = map.len();
            *l = *map.entry(*l).or_insert(next);
        }
        self.n_blocks = map.len();
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.alpha_crp, self.gamma, self.lambda_a, self.lambda_b];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::domain("baseline hyperparameters must be positive"));
        }
        let mut used = vec![false; self.n_blocks];
        for &l in &self.labels {
            if l >= self.n_blocks {
                return Err(Error::contract(format!("label {l} out of range")));
            }
            used[l] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::contract("empty block in baseline state"));
        }
        Ok(())
    }
}

fn log_gamma_ratio_norm(n: u64, exposure: f64, lambda_a: f64, lambda_b: f64) -> f64 {
    let a = lambda_a + n as f64;
    let b = lambda_b + exposure;
    (lgamma(a) - a * b.ln()) - (lgamma(lambda_a) - lambda_a * lambda_b.ln())
}

/// Tile factor `(k_ℓ k_m)^n G(λa + n, λb + k_ℓ k_m) / G(λa, λb)`.
fn log_tile(n: u64, kl: usize, km: usize, lambda_a: f64, lambda_b: f64) -> f64 {
    let exposure = (kl * km) as f64;
    if exposure == 0.0 {
        return 0.0;
    }
    n as f64 * exposure.ln() + log_gamma_ratio_norm(n, exposure, lambda_a, lambda_b)
}

/// Degree factor of one block for one direction: the Dirichlet–multinomial
/// `Γ(kγ)/Γ(kγ + D) Π Γ(γ + d_i)/Γ(γ)` for DCSBM, `k^{−D}` for pIRM.
/// `sum_lg` is `Σ_i ln Γ(γ + d_i)`.
fn log_degree_term(kind: BaselineKind, k: usize, total: u64, sum_lg: f64, gamma: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    match kind {
        BaselineKind::Pirm => -(total as f64) * (k as f64).ln(),
        BaselineKind::Dcsbm => {
            let kg = k as f64 * gamma;
            lgamma(kg) - lgamma(kg + total as f64) + sum_lg - k as f64 * lgamma(gamma)
        }
    }
}

/// `ln` of the CRP probability of the partition.
pub fn log_crp(sizes: &[usize], alpha: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    sizes.len() as f64 * alpha.ln() + lgamma(alpha) - lgamma(alpha + n as f64)
        + sizes.iter().map(|&k| lgamma(k as f64)).sum::<f64>()
}

/// Block-level aggregates.
#[derive(Debug, Clone)]
struct Aggregates {
    sizes: Vec<usize>,
    tiles: Vec<Vec<u64>>,
    out_total: Vec<u64>,
    in_total: Vec<u64>,
    out_lg: Vec<f64>,
    in_lg: Vec<f64>,
}

struct Degrees {
    out: Vec<u64>,
    inc: Vec<u64>,
    log_factorial_sum: f64,
}

impl Degrees {
    fn new(a: &EdgeCountMatrix) -> Self {
        let n = a.n_vertices();
        let mut d = Self { out: vec![0; n], inc: vec![0; n], log_factorial_sum: 0.0 };
        for (i, j, c) in a.entries() {
            d.out[i] += c;
            d.inc[j] += c;
            d.log_factorial_sum += log_factorial(c);
        }
        d
    }
}

impl Aggregates {
    fn new(a: &EdgeCountMatrix, deg: &Degrees, state: &DcsbmState) -> Self {
        let k = state.n_blocks;
        let mut agg = Self {
            sizes: vec![0; k],
            tiles: vec![vec![0; k]; k],
            out_total: vec![0; k],
            in_total: vec![0; k],
            out_lg: vec![0.0; k],
            in_lg: vec![0.0; k],
        };
        for (i, &l) in state.labels.iter().enumerate() {
            agg.sizes[l] += 1;
            agg.out_total[l] += deg.out[i];
            agg.in_total[l] += deg.inc[i];
            agg.out_lg[l] += lgamma(state.gamma + deg.out[i] as f64);
            agg.in_lg[l] += lgamma(state.gamma + deg.inc[i] as f64);
        }
        for (i, j, c) in a.entries() {
            agg.tiles[state.labels[i]][state.labels[j]] += c;
        }
        agg
    }

    fn block_term(&self, state: &DcsbmState, l: usize) -> f64 {
        log_degree_term(state.kind, self.sizes[l], self.out_total[l], self.out_lg[l], state.gamma)
            + log_degree_term(state.kind, self.sizes[l], self.in_total[l], self.in_lg[l], state.gamma)
    }

    fn log_joint(&self, state: &DcsbmState, log_factorial_sum: f64) -> f64 {
        let k = self.sizes.len();
        let mut lp = log_crp(&self.sizes, state.alpha_crp) - log_factorial_sum;
        for l in 0..k {
            lp += self.block_term(state, l);
            for m in 0..k {
                lp += log_tile(self.tiles[l][m], self.sizes[l], self.sizes[m], state.lambda_a, state.lambda_b);
            }
        }
        lp
    }
}

/// Collapsed log joint `ln p(A, z | α_crp, γ, λa, λb)`.
pub fn dcsbm_log_joint(a: &EdgeCountMatrix, state: &DcsbmState) -> Result<f64> {
    state.validate()?;
    if state.labels.len() != a.n_vertices() {
        return Err(Error::contract("label count differs from vertex count"));
    }
    let deg = Degrees::new(a);
    let lp = Aggregates::new(a, &deg, state).log_joint(state, deg.log_factorial_sum);
    if lp.is_nan() {
        return Err(Error::numeric("dcsbm_log_joint", "NaN"));
    }
    Ok(lp)
}

/// Gamma(2, 1) hyperpriors on `α_crp`, `λa`, `λb` and (DCSBM) `γ`.
pub fn baseline_log_hyperprior(state: &DcsbmState) -> f64 {
    let mut lp = gamma_log_pdf(state.alpha_crp, 2.0, 1.0)
        + gamma_log_pdf(state.lambda_a, 2.0, 1.0)
        + gamma_log_pdf(state.lambda_b, 2.0, 1.0);
    if state.kind == BaselineKind::Dcsbm {
        lp += gamma_log_pdf(state.gamma, 2.0, 1.0);
    }
    lp
}

/// Gibbs workspace for the labels.
struct LabelSampler<'a> {
    adj: &'a Adjacency,
    deg: &'a Degrees,
    agg: Aggregates,
}

impl LabelSampler<'_> {
    fn links(&self, labels: &[usize], k: usize, i: usize) -> (Vec<u64>, Vec<u64>) {
        let mut out_to = vec![0u64; k];
        let mut in_from = vec![0u64; k];
        for &(j, c) in &self.adj.out[i] {
            out_to[labels[j]] += c;
        }
        for &(j, c) in &self.adj.inc[i] {
            in_from[labels[j]] += c;
        }
        (out_to, in_from)
    }

    fn shift(&mut self, state: &DcsbmState, i: usize, l: usize, links: &(Vec<u64>, Vec<u64>), add: bool) {
        let k = self.agg.sizes.len();
        let g = state.gamma;
        let (lo, li) = (lgamma(g + self.deg.out[i] as f64), lgamma(g + self.deg.inc[i] as f64));
        let self_loop = self.adj.self_loops[i];
        let agg = &mut self.agg;
        let step = |x: &mut u64, d: u64| *x = if add { *x + d } else { *x - d };
        if add {
            agg.sizes[l] += 1;
            agg.out_lg[l] += lo;
            agg.in_lg[l] += li;
        } else {
            agg.sizes[l] -= 1;
            agg.out_lg[l] -= lo;
            agg.in_lg[l] -= li;
        }
        step(&mut agg.out_total[l], self.deg.out[i]);
        step(&mut agg.in_total[l], self.deg.inc[i]);
        for m in 0..k {
            if m != l {
                step(&mut agg.tiles[l][m], links.0[m]);
                step(&mut agg.tiles[m][l], links.1[m]);
            }
        }
        step(&mut agg.tiles[l][l], links.0[l] + links.1[l] + self_loop);
    }

    /// Removes block `l` (empty) by moving the last block into its slot.
    fn drop_block(&mut self, state: &mut DcsbmState, l: usize) {
        let last = self.agg.sizes.len() - 1;
        let agg = &mut self.agg;
        agg.sizes.swap_remove(l);
        agg.out_total.swap_remove(l);
        agg.in_total.swap_remove(l);
        agg.out_lg.swap_remove(l);
        agg.in_lg.swap_remove(l);
        agg.tiles.swap_remove(l);
        for row in &mut agg.tiles {
            row.swap_remove(l);
        }
        if l != last {
            for z in &mut state.labels {
                if *z == last {
                    *z = l;
                }
            }
        }
        state.n_blocks -= 1;
    }

    fn add_block(&mut self, state: &mut DcsbmState) {
        let agg = &mut self.agg;
        agg.sizes.push(0);
        agg.out_total.push(0);
        agg.in_total.push(0);
        agg.out_lg.push(0.0);
        agg.in_lg.push(0.0);
        for row in &mut agg.tiles {
            row.push(0);
        }
        agg.tiles.push(vec![0; agg.sizes.len()]);
        state.n_blocks += 1;
    }

    /// Log conditional over existing blocks plus a new one (last entry) for
    /// a vertex already removed from the aggregates.
    fn scores(&self, state: &DcsbmState, i: usize, links: &(Vec<u64>, Vec<u64>)) -> Vec<f64> {
        let agg = &self.agg;
        let k = agg.sizes.len();
        let (la, lb) = (state.lambda_a, state.lambda_b);
        let g = state.gamma;
        let (d_out, d_in) = (self.deg.out[i], self.deg.inc[i]);
        let (lo, li) = (lgamma(g + d_out as f64), lgamma(g + d_in as f64));
        let self_loop = self.adj.self_loops[i];
        (0..=k)
            .map(|c| {
                let (kc, out_c, in_c, olg, ilg) = if c < k {
                    (agg.sizes[c], agg.out_total[c], agg.in_total[c], agg.out_lg[c], agg.in_lg[c])
                } else {
                    (0, 0, 0, 0.0, 0.0)
                };
                let mut s = if c < k { (kc as f64).ln() } else { state.alpha_crp.ln() };
                s += log_degree_term(state.kind, kc + 1, out_c + d_out, olg + lo, g)
                    + log_degree_term(state.kind, kc + 1, in_c + d_in, ilg + li, g)
                    - log_degree_term(state.kind, kc, out_c, olg, g)
                    - log_degree_term(state.kind, kc, in_c, ilg, g);
                for m in 0..k {
                    if m == c {
                        continue;
                    }
                    let km = agg.sizes[m];
                    let row = if c < k { agg.tiles[c][m] } else { 0 };
                    let col = if c < k { agg.tiles[m][c] } else { 0 };
                    s += log_tile(row + links.0[m], kc + 1, km, la, lb) - log_tile(row, kc, km, la, lb);
                    s += log_tile(col + links.1[m], km, kc + 1, la, lb) - log_tile(col, km, kc, la, lb);
                }
                let (diag, own) = if c < k { (agg.tiles[c][c], links.0[c] + links.1[c]) } else { (0, 0) };
                s += log_tile(diag + own + self_loop, kc + 1, kc + 1, la, lb) - log_tile(diag, kc, kc, la, lb);
                s
            })
            .collect()
    }

    fn sweep<R: Rng + ?Sized>(&mut self, state: &mut DcsbmState, rng: &mut R) {
        for i in 0..state.labels.len() {
            let old = state.labels[i];
            let links = self.links(&state.labels, state.n_blocks, i);
            self.shift(state, i, old, &links, false);
            let mut links = links;
            if self.agg.sizes[old] == 0 {
                self.drop_block(state, old);
                let last = links.0.len() - 1;
                links.0.swap(old, last);
                links.1.swap(old, last);
                links.0.pop();
                links.1.pop();
            }
            let scores = self.scores(state, i, &links);
            let c = categorical_log(&scores, rng);
            if c == state.n_blocks {
                self.add_block(state);
                links.0.push(0);
                links.1.push(0);
            }
            state.labels[i] = c;
            self.shift(state, i, c, &links, true);
        }
    }
}

/// Normalised log conditional of vertex `i` over the existing blocks of the
/// other vertices plus one new block (last entry).
pub fn baseline_conditional(a: &EdgeCountMatrix, state: &DcsbmState, i: usize) -> Result<Vec<f64>> {
    state.validate()?;
    let adj = Adjacency::new(a);
    let deg = Degrees::new(a);
    let mut st = state.clone();
    let mut ls = LabelSampler { adj: &adj, deg: &deg, agg: Aggregates::new(a, &deg, &st) };
    let old = st.labels[i];
    let mut links = ls.links(&st.labels, st.n_blocks, i);
    ls.shift(&st, i, old, &links, false);
    if ls.agg.sizes[old] == 0 {
        ls.drop_block(&mut st, old);
        let last = links.0.len() - 1;
        links.0.swap(old, last);
        links.1.swap(old, last);
        links.0.pop();
        links.1.pop();
    }
    let scores = ls.scores(&st, i, &links);
    let norm = crate::special::log_sum_exp(&scores);
    Ok(scores.iter().map(|s| s - norm).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub iterations: usize,
    /// `None` means half of `iterations`.
    pub burn_in: Option<usize>,
    pub mh_steps: usize,
    pub step_size: f64,
    /// Blocks of the uniform random starting partition.
    pub initial_blocks: usize,
    pub label_stride: usize,
    pub clip_imputed: bool,
}

impl BaselineConfig {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            burn_in: None,
            mh_steps: 150,
            step_size: 0.1,
            initial_blocks: 5,
            label_stride: 0,
            clip_imputed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTraceRow {
    pub iter: usize,
    pub logp: f64,
    pub n_blocks: usize,
    pub alpha_crp: f64,
    pub gamma: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub accept_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineChain {
    pub trace: Vec<BaselineTraceRow>,
    pub label_snapshots: Vec<(usize, Vec<usize>)>,
    pub state: DcsbmState,
    pub map_labels: Vec<usize>,
    pub predictions: Vec<(usize, usize, f64)>,
}

/// Log-scale random-walk MH on `α_crp`, `(λa, λb)` and (DCSBM) `γ`.
fn hyper_sweep<R: Rng + ?Sized>(
    a: &EdgeCountMatrix,
    deg: &Degrees,
    state: &mut DcsbmState,
    config: &BaselineConfig,
    rng: &mut R,
) -> f64 {
    // Labels stay fixed here, so only the γ-dependent sums need refreshing.
    let mut agg = Aggregates::new(a, deg, state);
    let refresh = |agg: &mut Aggregates, s: &DcsbmState| {
        agg.out_lg.iter_mut().for_each(|x| *x = 0.0);
        agg.in_lg.iter_mut().for_each(|x| *x = 0.0);
        for (i, &l) in s.labels.iter().enumerate() {
            agg.out_lg[l] += lgamma(s.gamma + deg.out[i] as f64);
            agg.in_lg[l] += lgamma(s.gamma + deg.inc[i] as f64);
        }
    };
    // Log-Jacobian of the exp map included in the target.
    let target = |agg: &Aggregates, s: &DcsbmState| {
        agg.log_joint(s, deg.log_factorial_sum)
            + baseline_log_hyperprior(s)
            + s.alpha_crp.ln()
            + s.lambda_a.ln()
            + s.lambda_b.ln()
            + s.gamma.ln()
    };
    let mut current = target(&agg, state);
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let n_groups = if state.kind == BaselineKind::Dcsbm { 3 } else { 2 };
    for _ in 0..config.mh_steps {
        for group in 0..n_groups {
            let mut p = state.clone();
            let mut step = |x: &mut f64| *x *= (config.step_size * standard_normal(rng)).exp();
            match group {
                0 => step(&mut p.alpha_crp),
                1 => {
                    step(&mut p.lambda_a);
                    step(&mut p.lambda_b);
                }
                _ => step(&mut p.gamma),
            }
            proposed += 1;
            if p.validate().is_err() {
                continue;
            }
            if group == 2 {
                refresh(&mut agg, &p);
            }
            let lp = target(&agg, &p);
            if rng.random::<f64>().ln() < lp - current {
                *state = p;
                current = lp;
                accepted += 1;
            } else if group == 2 {
                refresh(&mut agg, state);
            }
        }
    }
    accepted as f64 / proposed.max(1) as f64
}

/// Per-vertex degree weights `θ⁽¹⁾, θ⁽²⁾` and tile rates `η`, drawn from
/// their conditionals.
fn impute_rates<R: Rng + ?Sized>(
    deg: &Degrees,
    agg: &Aggregates,
    state: &DcsbmState,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let n = state.labels.len();
    let k = state.n_blocks;
    let mut theta_out = vec![0.0; n];
    let mut theta_in = vec![0.0; n];
    for l in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| state.labels[i] == l).collect();
        match state.kind {
            BaselineKind::Pirm => {
                for &i in &members {
                    theta_out[i] = 1.0 / members.len() as f64;
                    theta_in[i] = 1.0 / members.len() as f64;
                }
            }
            BaselineKind::Dcsbm => {
                let po: Vec<f64> = members.iter().map(|&i| state.gamma + deg.out[i] as f64).collect();
                let pi: Vec<f64> = members.iter().map(|&i| state.gamma + deg.inc[i] as f64).collect();
                for (&i, w) in members.iter().zip(dirichlet(&po, rng)) {
                    theta_out[i] = w;
                }
                for (&i, w) in members.iter().zip(dirichlet(&pi, rng)) {
                    theta_in[i] = w;
                }
            }
        }
    }
    let eta = (0..k)
        .map(|l| {
            (0..k)
                .map(|m| {
                    let exposure = (agg.sizes[l] * agg.sizes[m]) as f64;
                    gamma(state.lambda_a + agg.tiles[l][m] as f64, state.lambda_b + exposure, rng)
                })
                .collect()
        })
        .collect();
    (theta_out, theta_in, eta)
}

pub fn dcsbm_gibbs<R: Rng + ?Sized>(
    a: &EdgeCountMatrix,
    kind: BaselineKind,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<BaselineChain> {
    if a.n_vertices() == 0 {
        return Err(Error::domain("network has no vertices"));
    }
    let k0 = config.initial_blocks.clamp(1, a.n_vertices());
    let labels = (0..a.n_vertices()).map(|_| rng.random_range(0..k0)).collect();
    let state = DcsbmState::new(kind, labels)?;
    dcsbm_gibbs_from(a, state, config, rng)
}

pub fn dcsbm_gibbs_from<R: Rng + ?Sized>(
    a: &EdgeCountMatrix,
    mut state: DcsbmState,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<BaselineChain> {
    state.validate()?;
    let burn_in = config.burn_in.unwrap_or(config.iterations / 2);
    let mut work = a.clone();
    work.clear_imputed();
    let holdout: Vec<(usize, usize)> = a.holdout().collect();
    let mut sums = vec![0.0; holdout.len()];
    let mut n_scored = 0usize;
    let mut trace = Vec::with_capacity(config.iterations);
    let mut label_snapshots = Vec::new();
    let mut map = (f64::NEG_INFINITY, state.labels.clone());

    for iter in 1..=config.iterations {
        let adj = Adjacency::new(&work);
        let deg = Degrees::new(&work);
        let accept_rate = hyper_sweep(&work, &deg, &mut state, config, rng);
        let mut sampler = LabelSampler { adj: &adj, deg: &deg, agg: Aggregates::new(&work, &deg, &state) };
        sampler.sweep(&mut state, rng);
        let (t_out, t_in, eta) = impute_rates(&deg, &sampler.agg, &state, rng);
        let sizes = sampler.agg.sizes.clone();
        let rate = |i: usize, j: usize| {
            let (l, m) = (state.labels[i], state.labels[j]);
            (sizes[l] * sizes[m]) as f64 * t_out[i] * t_in[j] * eta[l][m]
        };
        if iter > burn_in {
            for (s, &(i, j)) in sums.iter_mut().zip(&holdout) {
                *s += -(-rate(i, j)).exp_m1();
            }
            n_scored += 1;
        }
        for &(i, j) in &holdout {
            let mut c = poisson(rate(i, j), rng)?;
            if config.clip_imputed {
                c = c.min(1);
            }
            work.set(i, j, c)?;
        }
        if work.is_binary() {
            let observed: Vec<(usize, usize)> = work.observed_entries().map(|(i, j, _)| (i, j)).collect();
            for (i, j) in observed {
                let c = poisson(rate(i, j), rng)?;
                if c > 0 {
                    work.set(i, j, c)?;
                }
            }
        }
        let logp = dcsbm_log_joint(&work, &state)?;
        if iter > burn_in && logp > map.0 {
            map = (logp, state.labels.clone());
        }
        trace.push(BaselineTraceRow {
            iter,
            logp,
            n_blocks: state.n_blocks,
            alpha_crp: state.alpha_crp,
            gamma: state.gamma,
            lambda_a: state.lambda_a,
            lambda_b: state.lambda_b,
            accept_rate,
        });
        if config.label_stride > 0 && iter % config.label_stride == 0 {
            label_snapshots.push((iter, state.labels.clone()));
        }
    }
    let map_labels = if map.0 == f64::NEG_INFINITY { state.labels.clone() } else { map.1 };
    let predictions = holdout
        .iter()
        .zip(&sums)
        .map(|(&(i, j), &s)| (i, j, if n_scored > 0 { s / n_scored as f64 } else { f64::NAN }))
        .collect();
    Ok(BaselineChain { trace, label_snapshots, state, map_labels, predictions })
}

/// Trace CSV `iter,logp,n_blocks,alpha_crp,gamma,lambda_a,lambda_b,accept_rate`.
pub fn write_baseline_trace_csv<W: Write>(out: &mut W, trace: &[BaselineTraceRow]) -> Result<()> {
    writeln!(out, "iter,logp,n_blocks,alpha_crp,gamma,lambda_a,lambda_b,accept_rate")?;
    for r in trace {
        writeln!(
            out,
            "{},{:?},{},{:?},{:?},{:?},{:?},{:?}",
            r.iter, r.logp, r.n_blocks, r.alpha_crp, r.gamma, r.lambda_a, r.lambda_b, r.accept_rate
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::adjusted_rand;
    use crate::quad::Quadrature;
    use crate::seeded_rng;

    fn partitions(n: usize) -> Vec<Vec<usize>> {
        // Restricted growth strings.
        let mut out = vec![vec![0]];
        for _ in 1..n {
            let mut next = Vec::new();
            for p in &out {
                let k = p.iter().max().unwrap() + 1;
                for l in 0..=k {
                    let mut q = p.clone();
                    q.push(l);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    fn sizes(labels: &[usize]) -> Vec<usize> {
        let k = labels.iter().max().unwrap() + 1;
        let mut s = vec![0; k];
        for &l in labels {
            s[l] += 1;
        }
        s
    }

    fn sample_matrix() -> EdgeCountMatrix {
        EdgeCountMatrix::from_triples(
            5,
            [(0, 1, 2), (1, 0, 1), (0, 0, 1), (2, 3, 3), (3, 4, 1), (4, 2, 1), (1, 3, 1), (4, 4, 2)],
            false,
        )
        .unwrap()
    }

    #[test]
    fn crp_normalises_over_partitions() {
        let parts = partitions(4);
        assert_eq!(parts.len(), 15);
        for alpha in [0.3, 1.0, 4.0] {
            let total: f64 = parts.iter().map(|p| log_crp(&sizes(p), alpha).exp()).sum();
            assert!((total - 1.0).abs() < 1e-12, "{total}");
        }
    }

    fn state(kind: BaselineKind, labels: Vec<usize>) -> DcsbmState {
        let mut s = DcsbmState::new(kind, labels).unwrap();
        s.alpha_crp = 0.7;
        s.gamma = 1.3;
        s.lambda_a = 1.5;
        s.lambda_b = 0.8;
        s
    }

    #[test]
    fn conditional_matches_brute_force() {
        let a = sample_matrix();
        for kind in [BaselineKind::Pirm, BaselineKind::Dcsbm] {
            for labels in [vec![0, 0, 1, 1, 2], vec![0, 1, 1, 2, 2], vec![0, 0, 0, 0, 0]] {
                let st = state(kind, labels);
                for i in 0..5 {
                    let cond = baseline_conditional(&a, &st, i).unwrap();
                    // Brute force keyed by the set of other vertices sharing i's block.
                    let others: Vec<usize> = (0..5).filter(|&j| j != i).collect();
                    let mut blocks: Vec<Vec<usize>> = Vec::new();
                    for &j in &others {
                        match blocks.iter_mut().find(|b| st.labels[b[0]] == st.labels[j]) {
                            Some(b) => b.push(j),
                            None => blocks.push(vec![j]),
                        }
                    }
                    let mut brute: Vec<(Vec<usize>, f64)> = Vec::new();
                    for c in 0..=blocks.len() {
                        let mut lab = vec![0; 5];
                        for (b, members) in blocks.iter().enumerate() {
                            for &j in members {
                                lab[j] = b;
                            }
                        }
                        lab[i] = c;
                        let mut s = st.clone();
                        s.labels = lab;
                        s.compact();
                        let key = if c < blocks.len() { blocks[c].clone() } else { vec![] };
                        brute.push((key, dcsbm_log_joint(&a, &s).unwrap()));
                    }
                    let norm = crate::special::log_sum_exp(&brute.iter().map(|b| b.1).collect::<Vec<_>>());
                    // Map the sampler's block order onto member sets.
                    let mut keyed: Vec<(Vec<usize>, f64)> = Vec::new();
                    let old = st.labels[i];
                    let emptied = !others.iter().any(|&j| st.labels[j] == old);
                    let last = st.n_blocks - 1;
                    for (c, &lp) in cond.iter().enumerate() {
                        let orig = if emptied && c == old { last } else { c };
                        let members: Vec<usize> = if c == cond.len() - 1 {
                            vec![]
                        } else {
                            others.iter().copied().filter(|&j| st.labels[j] == orig).collect()
                        };
                        keyed.push((members, lp));
                    }
                    assert_eq!(keyed.len(), brute.len());
                    for (key, lp) in &brute {
                        let got = keyed.iter().find(|k| &k.0 == key).expect("block present").1;
                        assert!((got - (lp - norm)).abs() < 1e-10, "{kind:?} i={i}: {got} vs {}", lp - norm);
                    }
                }
            }
        }
    }

    #[test]
    fn dcsbm_tends_to_pirm_for_large_gamma() {
        let a = sample_matrix();
        let p = state(BaselineKind::Pirm, vec![0, 0, 1, 1, 2]);
        let mut d = p.clone();
        d.kind = BaselineKind::Dcsbm;
        d.gamma = 1e8;
        let lp = dcsbm_log_joint(&a, &p).unwrap();
        let ld = dcsbm_log_joint(&a, &d).unwrap();
        assert!((lp - ld).abs() < 1e-5, "{lp} vs {ld}");
    }

    fn ln_poisson(k: u64, rate: f64) -> f64 {
        if rate == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        k as f64 * rate.ln() - rate - log_factorial(k)
    }

    #[test]
    fn collapsed_form_matches_quadrature() {
        // Vertices 0 and 1 share block 0, vertex 2 is alone in block 1.
        let counts = [[1u64, 2, 0], [0, 0, 1], [1, 0, 2]];
        let a = EdgeCountMatrix::from_triples(
            3,
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j, counts[i][j]))),
            false,
        )
        .unwrap();
        let st = state(BaselineKind::Dcsbm, vec![0, 0, 1]);
        let collapsed = dcsbm_log_joint(&a, &st).unwrap() - log_crp(&[2, 1], st.alpha_crp);

        let labels = [0usize, 0, 1];
        let k = [2.0, 1.0];
        let (g, la, lb) = (st.gamma, st.lambda_a, st.lambda_b);
        let beta_ln = 2.0 * lgamma(g) - lgamma(2.0 * g);
        let inner = Quadrature::new(0.0, 1e-11);
        let like = |p: f64, q: f64| -> f64 {
            let th_out = [p, 1.0 - p, 1.0];
            let th_in = [q, 1.0 - q, 1.0];
            let mut total = 1.0;
            for l in 0..2 {
                for m in 0..2 {
                    let f = |eta: f64| {
                        let mut s = gamma_log_pdf(eta, la, lb);
                        for i in 0..3 {
                            for j in 0..3 {
                                if labels[i] == l && labels[j] == m {
                                    let r = k[l] * k[m] * th_out[i] * th_in[j] * eta;
                                    s += ln_poisson(counts[i][j], r);
                                }
                            }
                        }
                        s.exp()
                    };
                    total *= inner.integrate_semi_infinite(f, 0.0, 1.0).unwrap().value;
                }
            }
            total
        };
        let beta = |x: f64| ((g - 1.0) * (x.ln() + (1.0 - x).ln()) - beta_ln).exp();
        let outer = Quadrature::new(0.0, 1e-9);
        let value = outer
            .integrate(
                |p| {
                    beta(p)
                        * outer
                            .integrate(|q| beta(q) * like(p, q), 0.0, 1.0)
                            .unwrap()
                            .value
                },
                0.0,
                1.0,
            )
            .unwrap()
            .value;
        assert!((value.ln() - collapsed).abs() < 1e-6, "{} vs {collapsed}", value.ln());
    }

    #[test]
    fn recovers_planted_blocks() {
        let mut rng = seeded_rng(11, 0);
        let n = 30;
        let truth: Vec<usize> = (0..n).map(|i| i / 15).collect();
        let mut triples = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let p = if truth[i] == truth[j] { 0.5 } else { 0.03 };
                if i != j && rng.random::<f64>() < p {
                    triples.push((i, j, 1));
                }
            }
        }
        let a = EdgeCountMatrix::from_triples(n, triples, true).unwrap();
        for kind in [BaselineKind::Pirm, BaselineKind::Dcsbm] {
            let mut config = BaselineConfig::new(60);
            config.mh_steps = 20;
            let chain = dcsbm_gibbs(&a, kind, &config, &mut rng).unwrap();
            let ari = adjusted_rand(&chain.map_labels, &truth).unwrap();
            assert!(ari > 0.9, "{kind:?}: ARI {ari}");
            assert!(chain.trace.iter().all(|r| r.logp.is_finite()));
        }
    }

    #[test]
    fn predictions_cover_holdout_and_are_probabilities() {
        let mut a = sample_matrix();
        a.hold_out(0, 2).unwrap();
        a.hold_out(3, 1).unwrap();
        let mut rng = seeded_rng(3, 0);
        let chain = dcsbm_gibbs(&a, BaselineKind::Dcsbm, &BaselineConfig::new(20), &mut rng).unwrap();
        assert_eq!(chain.predictions.len(), 2);
        assert!(chain.predictions.iter().all(|p| (0.0..=1.0).contains(&p.2)));
    }
}
