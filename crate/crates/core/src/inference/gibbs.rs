//! Gibbs updates of the block labels with the measures held fixed.

use rand::Rng;

use crate::error::Result;
use crate::variates::categorical_log;

use super::likelihood::{block_total, log_e_parts, log_pochhammer_sum, log_remaining_mass, log_tile, log_vertex_factor};
use super::matrix::EdgeCountMatrix;
use super::state::{BlockState, MeasureState};
use super::stats::{suff_stats, SufficientStats};

/// Outgoing and incoming neighbour lists, self-loops kept apart.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub out: Vec<Vec<(usize, u64)>>,
    pub inc: Vec<Vec<(usize, u64)>>,
    pub self_loops: Vec<u64>,
}

impl Adjacency {
    pub fn new(a: &EdgeCountMatrix) -> Self {
        let n = a.n_vertices();
        let mut adj = Self {
            out: vec![Vec::new(); n],
            inc: vec![Vec::new(); n],
            self_loops: vec![0; n],
        };
        for (i, j, c) in a.entries() {
            if i == j {
                adj.self_loops[i] += c;
            } else {
                adj.out[i].push((j, c));
                adj.inc[j].push((i, c));
            }
        }
        adj
    }
}

/// Mutable statistics plus per-block quantities that stay fixed while only
/// labels move.
struct Workspace<'a> {
    m: &'a MeasureState,
    stats: SufficientStats,
    log_g: Vec<f64>,
    log_poch: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(stats: SufficientStats, m: &'a MeasureState) -> Self {
        let log_g = m.blocks.iter().map(|b| log_remaining_mass(m.sigma, m.tau, b)).collect();
        let log_poch = stats
            .degree_histograms
            .iter()
            .map(|h| log_pochhammer_sum(m.sigma, h))
            .collect();
        Self { m, stats, log_g, log_poch }
    }

    fn k(&self) -> usize {
        self.m.n_blocks()
    }

    fn log_e(&self, l: usize, k: usize, n: u64, log_poch: f64) -> f64 {
        log_e_parts(k, n, log_poch, &self.m.blocks[l], self.m.sigma, self.m.tau, self.log_g[l])
    }

    fn mass(&self, l: usize, occupied: bool) -> f64 {
        block_total(&self.m.blocks[l], occupied)
    }

    /// Edge counts from `i` to each block and from each block to `i`,
    /// excluding self-loops.
    fn link_counts(&self, adj: &Adjacency, labels: &[usize], i: usize) -> (Vec<u64>, Vec<u64>) {
        let k = self.k();
        let mut out_to = vec![0u64; k];
        let mut in_from = vec![0u64; k];
        for &(j, c) in &adj.out[i] {
            out_to[labels[j]] += c;
        }
        for &(j, c) in &adj.inc[i] {
            in_from[labels[j]] += c;
        }
        (out_to, in_from)
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) vertex `i` as a member of
    /// block `l`.
    fn apply(&mut self, i: usize, l: usize, links: &(Vec<u64>, Vec<u64>), self_loop: u64, sign: i64) {
        let k = self.k();
        let n_i = self.stats.vertex_counts[i];
        let shift = |x: &mut u64, d: u64| {
            *x = if sign > 0 { *x + d } else { *x - d };
        };
        shift(&mut self.stats.block_counts[l], n_i);
        if sign > 0 {
            self.stats.block_sizes[l] += 1;
            *self.stats.degree_histograms[l].entry(n_i).or_insert(0) += 1;
            self.log_poch[l] += log_vertex_factor(self.m.sigma, n_i);
        } else {
            self.stats.block_sizes[l] -= 1;
            let h = &mut self.stats.degree_histograms[l];
            let c = h.get_mut(&n_i).expect("vertex degree present in its block");
            *c -= 1;
            if *c == 0 {
                h.remove(&n_i);
            }
            self.log_poch[l] -= log_vertex_factor(self.m.sigma, n_i);
            if self.stats.block_sizes[l] == 0 {
                self.log_poch[l] = 0.0;
            }
        }
        let (out_to, in_from) = links;
        for mm in 0..k {
            if mm == l {
                continue;
            }
            shift(&mut self.stats.tile_counts[l * k + mm], out_to[mm]);
            shift(&mut self.stats.tile_counts[mm * k + l], in_from[mm]);
        }
        shift(&mut self.stats.tile_counts[l * k + l], out_to[l] + in_from[l] + self_loop);
    }

    /// Unnormalised log conditional of each block for a vertex that has
    /// been removed from the statistics.
    fn scores(&self, i: usize, links: &(Vec<u64>, Vec<u64>), self_loop: u64) -> Vec<f64> {
        let k = self.k();
        let st = &self.stats;
        let n_i = st.vertex_counts[i];
        let (out_to, in_from) = links;
        let base_mass: Vec<f64> = (0..k).map(|l| self.mass(l, st.block_sizes[l] > 0)).collect();
        let interaction = &self.m.interaction;
        (0..k)
            .map(|c| {
                let (kc, nc) = (st.block_sizes[c], st.block_counts[c]);
                let poch_new = self.log_poch[c] + log_vertex_factor(self.m.sigma, n_i);
                let mut score = self.log_e(c, kc + 1, nc + n_i, poch_new) - self.log_e(c, kc, nc, self.log_poch[c]);
                let new_mass = self.mass(c, true);
                for mm in 0..k {
                    if mm == c {
                        let old = st.tile(c, c);
                        let new = old + out_to[c] + in_from[c] + self_loop;
                        score += log_tile(new, new_mass * new_mass, interaction)
                            - log_tile(old, base_mass[c] * base_mass[c], interaction);
                    } else {
                        let prod_old = base_mass[c] * base_mass[mm];
                        let prod_new = new_mass * base_mass[mm];
                        let row = st.tile(c, mm);
                        let col = st.tile(mm, c);
                        score += log_tile(row + out_to[mm], prod_new, interaction) - log_tile(row, prod_old, interaction);
                        score += log_tile(col + in_from[mm], prod_new, interaction) - log_tile(col, prod_old, interaction);
                    }
                }
                score
            })
            .collect()
    }
}

fn normalise(scores: &[f64]) -> Vec<f64> {
    let norm = crate::special::log_sum_exp(scores);
    scores.iter().map(|s| s - norm).collect()
}

/// Normalised log conditional `ln p(z_i = c | z_{−i}, Φ, A)` for every
/// block `c`.
pub fn gibbs_conditional(a: &EdgeCountMatrix, z: &BlockState, m: &MeasureState, i: usize) -> Result<Vec<f64>> {
    m.validate()?;
    let adj = Adjacency::new(a);
    let mut ws = Workspace::new(suff_stats(a, z)?, m);
    let links = ws.link_counts(&adj, &z.labels, i);
    ws.apply(i, z.labels[i], &links, adj.self_loops[i], -1);
    Ok(normalise(&ws.scores(i, &links, adj.self_loops[i])))
}

/// One systematic-scan Gibbs sweep over the labels in ascending vertex
/// order. Returns the statistics of the updated labelling.
pub fn gibbs_z_sweep<R: Rng + ?Sized>(
    a: &EdgeCountMatrix,
    z: &mut BlockState,
    m: &MeasureState,
    rng: &mut R,
) -> Result<SufficientStats> {
    let stats = suff_stats(a, z)?;
    if z.n_blocks == 1 {
        return Ok(stats);
    }
    let adj = Adjacency::new(a);
    let mut ws = Workspace::new(stats, m);
    for i in 0..z.labels.len() {
        let links = ws.link_counts(&adj, &z.labels, i);
        let self_loop = adj.self_loops[i];
        ws.apply(i, z.labels[i], &links, self_loop, -1);
        let scores = ws.scores(i, &links, self_loop);
        let c = categorical_log(&scores, rng);
        ws.apply(i, c, &links, self_loop, 1);
        z.labels[i] = c;
    }
    Ok(ws.stats)
}
