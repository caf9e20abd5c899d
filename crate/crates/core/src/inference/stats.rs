use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::special::log_factorial;

use super::matrix::EdgeCountMatrix;
use super::state::BlockState;

/// Counts entering the collapsed joint.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// `n_i`, endpoint count per vertex.
    pub vertex_counts: Vec<u64>,
    /// `n_ℓ`, endpoint count per block.
    pub block_counts: Vec<u64>,
    /// `k_ℓ`, vertices per block.
    pub block_sizes: Vec<usize>,
    /// `n_ℓm`, edge count per tile, row-major `K × K`.
    pub tile_counts: Vec<u64>,
    /// Per block, how many of its vertices have each endpoint count.
    pub degree_histograms: Vec<BTreeMap<u64, u64>>,
    /// `Σ ln A_ij!`.
    pub log_factorial_sum: f64,
}

impl SufficientStats {
    pub fn n_blocks(&self) -> usize {
        self.block_counts.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_counts.len()
    }

    pub fn total_vertices(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn tile(&self, l: usize, m: usize) -> u64 {
        self.tile_counts[l * self.n_blocks() + m]
    }
}

pub fn suff_stats(a: &EdgeCountMatrix, z: &BlockState) -> Result<SufficientStats> {
    z.validate()?;
    if z.labels.len() != a.n_vertices() {
        return Err(Error::contract(format!(
            "{} labels for {} vertices",
            z.labels.len(),
            a.n_vertices()
        )));
    }
    let k = z.n_blocks;
    let mut tile_counts = vec![0u64; k * k];
    let mut log_factorial_sum = 0.0;
    for (i, j, c) in a.entries() {
        tile_counts[z.labels[i] * k + z.labels[j]] += c;
        log_factorial_sum += log_factorial(c);
    }
    let vertex_counts = a.endpoint_counts();
    let mut block_counts = vec![0u64; k];
    let mut block_sizes = vec![0usize; k];
    let mut degree_histograms = vec![BTreeMap::new(); k];
    for (i, &n) in vertex_counts.iter().enumerate() {
        let l = z.labels[i];
        block_counts[l] += n;
        block_sizes[l] += 1;
        *degree_histograms[l].entry(n).or_insert(0) += 1;
    }
    Ok(SufficientStats {
        vertex_counts,
        block_counts,
        block_sizes,
        tile_counts,
        degree_histograms,
        log_factorial_sum,
    })
}
