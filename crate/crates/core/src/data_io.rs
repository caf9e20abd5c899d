//! Edge-list ingestion, preprocessing into binary count matrices, and
//! held-out dyad selection.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::EdgeCountMatrix;

/// One edge-list line, with endpoints as 0-based indices into
/// [`RawEdgeList::labels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub source: usize,
    pub target: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawEdgeList {
    pub records: Vec<RawRecord>,
    /// Vertex labels in order of first appearance.
    pub labels: Vec<String>,
}

impl RawEdgeList {
    /// Edge list of the stored counts of a matrix (imputed held-out counts
    /// excluded), with the given vertex labels or 1-based numbers.
    pub fn from_matrix(a: &EdgeCountMatrix, labels: Option<&[String]>) -> Self {
        let labels = match labels {
            Some(l) => l.to_vec(),
            None => (1..=a.n_vertices()).map(|i| i.to_string()).collect(),
        };
        let records = a
            .observed_entries()
            .map(|(source, target, count)| RawRecord { source, target, count })
            .collect();
        Self { records, labels }
    }
}

/// Parses whitespace-separated `src dst [count]` lines; blank lines and
/// lines starting with `#` are skipped.
pub fn parse_edge_list(text: &str) -> Result<RawEdgeList> {
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = RawEdgeList::default();
    let mut intern = |label: &str, out: &mut RawEdgeList| -> usize {
        *index.entry(label.to_string()).or_insert_with(|| {
            out.labels.push(label.to_string());
            out.labels.len() - 1
        })
    };
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno + 1, message };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(err(format!("expected `src dst [count]`, got {} fields", fields.len())));
        }
        let count = match fields.get(2) {
            Some(c) => c.parse::<u64>().map_err(|_| err(format!("invalid count `{c}`")))?,
            None => 1,
        };
        if count < 1 {
            return Err(err("count must be at least 1".into()));
        }
        let source = intern(fields[0], &mut out);
        let target = intern(fields[1], &mut out);
        out.records.push(RawRecord { source, target, count });
    }
    Ok(out)
}

pub fn load_edge_list(path: &Path) -> Result<RawEdgeList> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

pub fn write_edge_list<W: Write>(out: &mut W, raw: &RawEdgeList) -> Result<()> {
    for r in &raw.records {
        writeln!(out, "{} {} {}", raw.labels[r.source], raw.labels[r.target], r.count)?;
    }
    Ok(())
}

pub fn save_edge_list(path: &Path, raw: &RawEdgeList) -> Result<()> {
    let mut buf = Vec::new();
    write_edge_list(&mut buf, raw)?;
    std::fs::write(path, buf)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    /// Set `A_ij = A_ji = max(A_ij, A_ji)`.
    pub symmetrize: bool,
    /// Threshold counts to indicators.
    pub binary: bool,
    pub drop_self_edges: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self { symmetrize: false, binary: true, drop_self_edges: false }
    }
}

/// A preprocessed network with the labels of its surviving vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub matrix: EdgeCountMatrix,
    pub labels: Vec<String>,
}

/// Aggregates repeated pairs, optionally symmetrises and drops self-edges,
/// thresholds to binary, removes vertices without edges and reindexes the
/// rest in their original order.
pub fn preprocess(raw: &RawEdgeList, options: &PreprocessOptions) -> Result<Dataset> {
    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for r in &raw.records {
        if r.source >= raw.labels.len() || r.target >= raw.labels.len() {
            return Err(Error::contract(format!("record {r:?} refers to an unknown vertex")));
        }
        if options.drop_self_edges && r.source == r.target {
            continue;
        }
        *counts.entry((r.source, r.target)).or_insert(0) += r.count;
    }
    if options.symmetrize {
        let pairs: Vec<((usize, usize), u64)> = counts.iter().map(|(&p, &c)| (p, c)).collect();
        for ((i, j), c) in pairs {
            let e = counts.entry((j, i)).or_insert(0);
            *e = (*e).max(c);
        }
    }
    if options.binary {
        counts.values_mut().for_each(|c| *c = 1);
    }
    let used: BTreeSet<usize> = counts.keys().flat_map(|&(i, j)| [i, j]).collect();
    if used.is_empty() {
        return Err(Error::domain("network has no edges after preprocessing"));
    }
    let new_index: BTreeMap<usize, usize> = used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let labels = used.iter().map(|&old| raw.labels[old].clone()).collect();
    let matrix = EdgeCountMatrix::from_triples(
        used.len(),
        counts.into_iter().map(|((i, j), c)| (new_index[&i], new_index[&j], c)),
        options.binary,
    )?;
    Ok(Dataset { matrix, labels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutOptions {
    pub fraction: f64,
    /// Count `(i, i)` as a potential dyad.
    pub include_self_pairs: bool,
    /// Treat `(i, j)` and `(j, i)` as one dyad, held out together.
    pub symmetric: bool,
    /// Repair rounds before giving up.
    pub max_rounds: usize,
}

impl HoldoutOptions {
    pub fn new(fraction: f64) -> Self {
        Self { fraction, include_self_pairs: false, symmetric: false, max_rounds: 10_000 }
    }
}

/// Held-out dyads with their true values (`true_label` is 1 when the dyad
/// had an edge in either stored orientation).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holdout {
    pub matrix: EdgeCountMatrix,
    /// `(i, j, true_label)`, `i ≤ j` in symmetric mode.
    pub truth: Vec<(usize, usize, u8)>,
}

/// Enumerates the potential dyads by index without materialising them.
struct DyadPool {
    n: usize,
    self_pairs: bool,
    symmetric: bool,
}

impl DyadPool {
    fn len(&self) -> usize {
        let n = self.n;
        match (self.symmetric, self.self_pairs) {
            (false, true) => n * n,
            (false, false) => n * (n - 1),
            (true, true) => n * (n + 1) / 2,
            (true, false) => n * (n - 1) / 2,
        }
    }

    fn get(&self, idx: usize) -> (usize, usize) {
        let n = self.n;
        if !self.symmetric {
            if self.self_pairs {
                (idx / n, idx % n)
            } else {
                let i = idx / (n - 1);
                let r = idx % (n - 1);
                (i, if r >= i { r + 1 } else { r })
            }
        } else {
            // Row i holds pairs (i, j) for j ≥ i (or j > i).
            let off = usize::from(!self.self_pairs);
            let mut i = 0;
            let mut rem = idx;
            loop {
                let row = n - i - off;
                if rem < row {
                    return (i, i + off + rem);
                }
                rem -= row;
                i += 1;
            }
        }
    }

    fn index_of(&self, (i, j): (usize, usize)) -> usize {
        let n = self.n;
        if !self.symmetric {
            if self.self_pairs {
                i * n + j
            } else {
                i * (n - 1) + if j > i { j - 1 } else { j }
            }
        } else {
            let off = usize::from(!self.self_pairs);
            let (i, j) = (i.min(j), i.max(j));
            // Rows before i hold Σ_{r<i} (n − r − off) pairs.
            i * (n - off) - i * i.saturating_sub(1) / 2 + (j - i - off)
        }
    }
}

/// Selects `round(fraction × #dyads)` dyads uniformly at random; while
/// some vertex is left without an observed edge, one of its held-out edges
/// is restored (and protected from later removal) and another dyad is
/// removed in its place.
pub fn make_holdout<R: Rng + ?Sized>(a: &EdgeCountMatrix, options: &HoldoutOptions, rng: &mut R) -> Result<Holdout> {
    if !(0.0..1.0).contains(&options.fraction) {
        return Err(Error::domain(format!("holdout fraction {} outside [0, 1)", options.fraction)));
    }
    a.validate()?;
    let pool = DyadPool { n: a.n_vertices(), self_pairs: options.include_self_pairs, symmetric: options.symmetric };
    let n_pool = pool.len();
    let target = (options.fraction * n_pool as f64).round() as usize;
    let has_edge = |(i, j): (usize, usize)| a.count(i, j) > 0 || (options.symmetric && a.count(j, i) > 0);

    let mut held: BTreeSet<usize> = index::sample(rng, n_pool, target).into_iter().collect();
    let mut protected: BTreeSet<usize> = BTreeSet::new();

    // Observed degree of each vertex after removing the held dyads.
    let degree_of = |held: &BTreeSet<usize>| {
        let mut deg = vec![0u64; a.n_vertices()];
        for (i, j, c) in a.observed_entries() {
            if !held.contains(&pool.index_of((i, j))) {
                deg[i] += c;
                deg[j] += c;
            }
        }
        deg
    };

    let mut rounds = 0;
    loop {
        let deg = degree_of(&held);
        let stranded: Vec<usize> = (0..a.n_vertices()).filter(|&v| deg[v] == 0).collect();
        if stranded.is_empty() {
            break;
        }
        rounds += 1;
        if rounds > options.max_rounds || protected.len() + target > n_pool {
            return Err(Error::domain(format!(
                "could not hold out {target} dyads while keeping an edge at every vertex"
            )));
        }
        for v in stranded {
            let mut incident: Vec<usize> = held
                .iter()
                .copied()
                .filter(|&d| {
                    let (i, j) = pool.get(d);
                    (i == v || j == v) && has_edge((i, j))
                })
                .collect();
            if incident.is_empty() {
                // Already repaired by an earlier vertex this round.
                continue;
            }
            incident.sort_unstable();
            let restore = incident[rng.random_range(0..incident.len())];
            held.remove(&restore);
            protected.insert(restore);
            if protected.len() + held.len() >= n_pool {
                return Err(Error::domain("no dyads left to hold out"));
            }
            loop {
                let d = rng.random_range(0..n_pool);
                if !held.contains(&d) && !protected.contains(&d) {
                    held.insert(d);
                    break;
                }
            }
        }
    }

    let mut matrix = a.clone();
    let mut truth = Vec::with_capacity(held.len());
    for &d in &held {
        let (i, j) = pool.get(d);
        truth.push((i, j, u8::from(has_edge((i, j)))));
        matrix.hold_out(i, j)?;
        if options.symmetric && i != j {
            matrix.hold_out(j, i)?;
        }
    }
    Ok(Holdout { matrix, truth })
}

/// Holdout manifest `i,j,true_label` with 1-based vertices.
pub fn write_holdout_manifest<W: Write>(out: &mut W, truth: &[(usize, usize, u8)]) -> Result<()> {
    writeln!(out, "i,j,true_label")?;
    for &(i, j, l) in truth {
        writeln!(out, "{},{},{l}", i + 1, j + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn parse_format_contract() {
        assert_eq!(parse_edge_list("").unwrap(), RawEdgeList::default());
        let raw = parse_edge_list("# comment\na b\n\nb a 3\n").unwrap();
        assert_eq!(raw.labels, vec!["a", "b"]);
        assert_eq!(
            raw.records,
            vec![RawRecord { source: 0, target: 1, count: 1 }, RawRecord { source: 1, target: 0, count: 3 }]
        );
        match parse_edge_list("a b\nc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_edge_list("a b 0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_edge_list("a b x"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let raw = parse_edge_list("x y 2\ny z\nz z 4\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        save_edge_list(&p, &raw).unwrap();
        assert_eq!(load_edge_list(&p).unwrap(), raw);
    }

    #[test]
    fn preprocess_rules() {
        let mut raw = parse_edge_list("a b 5\nb c\n").unwrap();
        raw.labels.push("lonely".into());
        let d = preprocess(&raw, &PreprocessOptions::default()).unwrap();
        assert_eq!(d.matrix.n_vertices(), 3);
        assert_eq!(d.matrix.count(0, 1), 1);
        assert!(d.matrix.is_binary());

        let again = preprocess(&RawEdgeList::from_matrix(&d.matrix, Some(&d.labels)), &PreprocessOptions::default()).unwrap();
        assert_eq!(again, d);

        let sym = preprocess(&raw, &PreprocessOptions { symmetrize: true, ..Default::default() }).unwrap();
        assert_eq!(sym.matrix.count(1, 0), 1);
        assert_eq!(sym.matrix.total_count(), 4);

        let raw = parse_edge_list("a a\nb c\n").unwrap();
        let d = preprocess(&raw, &PreprocessOptions { drop_self_edges: true, ..Default::default() }).unwrap();
        assert_eq!(d.labels, vec!["b", "c"]);
        assert!(preprocess(&parse_edge_list("a a").unwrap(), &PreprocessOptions { drop_self_edges: true, ..Default::default() }).is_err());
    }

    #[test]
    fn pool_indexing_is_a_bijection() {
        for &(symmetric, self_pairs) in &[(false, false), (false, true), (true, false), (true, true)] {
            let pool = DyadPool { n: 6, self_pairs, symmetric };
            let mut seen = BTreeSet::new();
            for d in 0..pool.len() {
                let (i, j) = pool.get(d);
                assert!(self_pairs || i != j);
                assert!(!symmetric || i <= j);
                assert_eq!(pool.index_of((i, j)), d);
                assert!(seen.insert((i, j)));
            }
        }
    }

    fn ring(n: usize) -> EdgeCountMatrix {
        EdgeCountMatrix::from_triples(n, (0..n).flat_map(|i| [(i, (i + 1) % n, 1), (i, (i + 7) % n, 1)]), true).unwrap()
    }

    #[test]
    fn holdout_contracts() {
        let a = ring(40);
        let mut rng = seeded_rng(90, 0);
        let h = make_holdout(&a, &HoldoutOptions::new(0.0), &mut rng).unwrap();
        assert!(h.truth.is_empty());

        let opts = HoldoutOptions::new(0.05);
        let h = make_holdout(&a, &opts, &mut rng).unwrap();
        assert_eq!(h.truth.len(), (0.05f64 * 40.0 * 39.0).round() as usize);
        assert_eq!(h.matrix.n_holdout(), h.truth.len());
        h.matrix.validate().unwrap();
        assert!(h.matrix.observed_endpoint_counts().iter().all(|&d| d >= 1));
        for &(i, j, l) in &h.truth {
            assert_ne!(i, j);
            assert_eq!(l as u64, a.count(i, j));
        }
        let again = make_holdout(&a, &opts, &mut seeded_rng(90, 0)).unwrap();
        let first = make_holdout(&a, &opts, &mut seeded_rng(90, 0)).unwrap();
        assert_eq!(again, first);

        let sym = make_holdout(&a, &HoldoutOptions { symmetric: true, ..HoldoutOptions::new(0.1) }, &mut rng).unwrap();
        assert_eq!(sym.truth.len(), (0.1f64 * 780.0).round() as usize);
        assert_eq!(sym.matrix.n_holdout(), 2 * sym.truth.len());
        sym.matrix.validate().unwrap();
    }

    #[test]
    fn infeasible_holdout_is_reported() {
        // Two vertices, two dyads, both held out: restoring the edge leaves
        // no dyad to remove in its place.
        let a = EdgeCountMatrix::from_triples(2, [(0, 1, 1)], true).unwrap();
        let r = make_holdout(&a, &HoldoutOptions::new(0.9), &mut seeded_rng(91, 0));
        assert!(matches!(r, Err(Error::Domain(_))), "{r:?}");
    }
}
