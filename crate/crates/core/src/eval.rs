//! Scores and diagnostics: held-out AUC, trace autocorrelation and the
//! adjusted Rand index.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mann–Whitney AUC: the probability that a random positive outscores a
/// random negative, ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::domain("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::domain("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::domain("AUC needs both positive and negative labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks over tied groups.
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        rank_sum_pos += mid * order[start..end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Normalised sample autocorrelation at lags `0..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::domain(format!("series of length {n} too short for lag {max_lag}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if !(c0 > 0.0) {
        return Err(Error::domain("constant series has no autocorrelation"));
    }
    Ok((0..=max_lag)
        .map(|lag| dev[..n - lag].iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect())
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labellings of the same items.
pub fn adjusted_rand(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain("labellings differ in length"));
    }
    if a.is_empty() {
        return Err(Error::domain("empty labelling"));
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        // Both partitions trivial (all singletons or one cluster each).
        return Ok(if a.len() < 2 || sum_a == sum_b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub n_pairs: usize,
    pub n_positive: usize,
}

/// Reads the holdout manifest `i,j,true_label` and the prediction CSV
/// `i,j,score` and computes the AUC over the pairs they share.
pub fn evaluate_files(predictions: &Path, manifest: &Path) -> Result<Metrics> {
    let preds = read_triples(predictions, "score")?;
    let truth = read_triples(manifest, "true_label")?;
    let truth: BTreeMap<(usize, usize), f64> = truth.into_iter().map(|(i, j, v)| ((i, j), v)).collect();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, j, s) in preds {
        if let Some(&t) = truth.get(&(i, j)) {
            scores.push(s);
            labels.push(t > 0.0);
        }
    }
    let n_positive = labels.iter().filter(|&&l| l).count();
    Ok(Metrics { auc: auc(&scores, &labels)?, n_pairs: scores.len(), n_positive })
}

fn read_triples(path: &Path, value_column: &str) -> Result<Vec<(usize, usize, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with('i')) {
            continue;
        }
        let parse_err = |m: &str| Error::Parse { line: idx + 1, message: format!("{}: {m}", path.display()) };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(&format!("expected i,j,{value_column}")));
        }
        let i: usize = fields[0].trim().parse().map_err(|_| parse_err("bad i"))?;
        let j: usize = fields[1].trim().parse().map_err(|_| parse_err("bad j"))?;
        let v: f64 = fields[2].trim().parse().map_err(|_| parse_err(&format!("bad {value_column}")))?;
        out.push((i, j, v));
    }
    Ok(out)
}

pub fn write_metrics_json(path: &Path, metrics: &Metrics) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(metrics)? + "\n")?;
    Ok(())
}

/// ACF CSV: `lag` followed by one column per named series.
pub fn write_acf_csv<W: Write>(out: &mut W, names: &[&str], acfs: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "lag,{}", names.join(","))?;
    let len = acfs.iter().map(Vec::len).min().unwrap_or(0);
    for lag in 0..len {
        let row: Vec<String> = acfs.iter().map(|a| format!("{:?}", a[lag])).collect();
        writeln!(out, "{lag},{}", row.join(","))?;
    }
    Ok(())
}
