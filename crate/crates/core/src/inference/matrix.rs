use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse directed count matrix `A_ij` with a held-out mask `W_ij`.
///
/// Vertices are 0-based and only positive counts are stored. Held-out pairs
/// carry no observed count; during sampling a working copy may hold imputed
/// counts on them (see [`set`](Self::set)).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCountMatrix {
    n_vertices: usize,
    counts: BTreeMap<(usize, usize), u64>,
    holdout: BTreeSet<(usize, usize)>,
    binary: bool,
}

impl EdgeCountMatrix {
    pub fn new(n_vertices: usize, binary: bool) -> Self {
        Self {
            n_vertices,
            counts: BTreeMap::new(),
            holdout: BTreeSet::new(),
            binary,
        }
    }

    /// Builds a matrix from `(i, j, count)` triples; repeated pairs add up and
    /// zero counts are ignored.
    pub fn from_triples(
        n_vertices: usize,
        triples: impl IntoIterator<Item = (usize, usize, u64)>,
        binary: bool,
    ) -> Result<Self> {
        let mut m = Self::new(n_vertices, binary);
        for (i, j, c) in triples {
            m.add(i, j, c)?;
        }
        Ok(m)
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n_vertices || j >= self.n_vertices {
            return Err(Error::domain(format!(
                "pair ({i}, {j}) out of range for {} vertices",
                self.n_vertices
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, i: usize, j: usize, count: u64) -> Result<()> {
        self.check_index(i, j)?;
        if self.holdout.contains(&(i, j)) {
            return Err(Error::contract(format!("pair ({i}, {j}) is held out")));
        }
        if count > 0 {
            *self.counts.entry((i, j)).or_insert(0) += count;
        }
        Ok(())
    }

    /// Overwrites the count of `(i, j)`, held out or not.
    pub fn set(&mut self, i: usize, j: usize, count: u64) -> Result<()> {
        self.check_index(i, j)?;
        if count == 0 {
            self.counts.remove(&(i, j));
        } else {
            self.counts.insert((i, j), count);
        }
        Ok(())
    }

    /// Marks `(i, j)` as held out, removing any stored count.
    pub fn hold_out(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_index(i, j)?;
        self.counts.remove(&(i, j));
        self.holdout.insert((i, j));
        Ok(())
    }

    /// Removes `(i, j)` from the held-out set.
    pub fn release(&mut self, i: usize, j: usize) -> bool {
        self.holdout.remove(&(i, j))
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn set_binary(&mut self, binary: bool) {
        self.binary = binary;
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts.get(&(i, j)).copied().unwrap_or(0)
    }

    pub fn is_held_out(&self, i: usize, j: usize) -> bool {
        self.holdout.contains(&(i, j))
    }

    /// Drops every count stored on a held-out pair.
    pub fn clear_imputed(&mut self) {
        let holdout = &self.holdout;
        self.counts.retain(|p, _| !holdout.contains(p));
    }

    /// Positive entries in `(i, j)` order, including imputed ones.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.counts.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    pub fn holdout(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.holdout.iter().copied()
    }

    pub fn n_entries(&self) -> usize {
        self.counts.len()
    }

    pub fn n_holdout(&self) -> usize {
        self.holdout.len()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Positive entries outside the held-out set.
    pub fn observed_entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.entries().filter(|&(i, j, _)| !self.holdout.contains(&(i, j)))
    }

    /// Endpoint counts `n_i = Σ_j (A_ij + A_ji)` over all stored entries.
    pub fn endpoint_counts(&self) -> Vec<u64> {
        Self::tally(self.n_vertices, self.entries())
    }

    /// Endpoint counts restricted to observed entries.
    pub fn observed_endpoint_counts(&self) -> Vec<u64> {
        Self::tally(self.n_vertices, self.observed_entries())
    }

    fn tally(n_vertices: usize, entries: impl Iterator<Item = (usize, usize, u64)>) -> Vec<u64> {
        let mut n = vec![0u64; n_vertices];
        for (i, j, c) in entries {
            n[i] += c;
            n[j] += c;
        }
        n
    }

    /// Checks the invariant the samplers rely on: every vertex has at least
    /// one observed incident edge.
    pub fn validate(&self) -> Result<()> {
        if self.n_vertices == 0 {
            return Err(Error::domain("network has no vertices"));
        }
        if let Some(i) = self.observed_endpoint_counts().iter().position(|&n| n == 0) {
            return Err(Error::contract(format!(
                "vertex {i} has no observed incident edge"
            )));
        }
        Ok(())
    }
}
