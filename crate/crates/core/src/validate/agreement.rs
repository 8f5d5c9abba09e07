//! Agreement scores: adjusted Rand index, macro F1 and average pairwise
//! cosine similarity.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::AnnotationRecord;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::rng::{stream, Domain};

/// Row count below which APCS averages every pair.
pub const APCS_EXACT_MAX_ROWS: usize = 2000;
/// Pairs drawn when APCS is estimated by sampling.
pub const APCS_SAMPLED_PAIRS: usize = 200_000;

fn choose2(n: u64) -> f64 {
    (n as f64) * (n.saturating_sub(1) as f64) / 2.0
}

/// Adjusted Rand index between two labelings of the same rows. Every
/// distinct label, noise included, is one block. Returns 1.0 when both
/// partitions are trivial in the same way (the index is 0/0).
pub fn adjusted_rand(a: &[i32], b: &[i32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::format(
            "adjusted rand",
            format!("partitions cover {} and {} rows", a.len(), b.len()),
        ));
    }
    let mut table: HashMap<(i32, i32), u64> = HashMap::new();
    let mut rows: HashMap<i32, u64> = HashMap::new();
    let mut cols: HashMap<i32, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Macro-averaged F1 of `predicted_label` against `gold_label` over every
/// label seen in either column.
pub fn f1_macro(records: &[AnnotationRecord]) -> Result<f64> {
    let missing = records.iter().filter(|r| r.predicted_label.is_none()).count();
    if missing > 0 {
        return Err(Error::MissingPredictions { count: missing });
    }
    let mut tp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fn_: BTreeMap<&str, usize> = BTreeMap::new();
    let mut labels = BTreeSet::new();
    for r in records {
        let gold = r.gold_label.as_str();
        let pred = r.predicted_label.as_deref().expect("checked above");
        labels.insert(gold);
        labels.insert(pred);
        if gold == pred {
            *tp.entry(gold).or_default() += 1;
        } else {
            *fp.entry(pred).or_default() += 1;
            *fn_.entry(gold).or_default() += 1;
        }
    }
    if labels.is_empty() {
        return Err(Error::format("f1", "no records"));
    }
    let get = |m: &BTreeMap<&str, usize>, l: &str| m.get(l).copied().unwrap_or(0) as f64;
    let sum: f64 = labels
        .iter()
        .map(|l| {
            let t = get(&tp, l);
            2.0 * t / (2.0 * t + get(&fp, l) + get(&fn_, l))
        })
        .sum();
    Ok(sum / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApcsEstimate {
    pub mean: f64,
    /// Standard error of the sampled mean; zero when every pair was used.
    pub std_error: f64,
    pub pairs: u64,
    pub exact: bool,
}

/// Average cosine similarity over unordered row pairs.
pub fn apcs(x: &Matrix, seed: u64) -> Result<ApcsEstimate> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::format("apcs", "need at least two rows"));
    }
    let norms: Vec<f64> = x.iter_rows().map(|r| dot(r, r).sqrt()).collect();
    if let Some(row) = norms.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroNorm { row });
    }
    let cos = |i: usize, j: usize| dot(x.row(i), x.row(j)) / (norms[i] * norms[j]);
    if n < APCS_EXACT_MAX_ROWS {
        let partial: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| cos(i, j)).sum())
            .collect();
        let pairs = choose2(n as u64);
        return Ok(ApcsEstimate {
            mean: partial.iter().sum::<f64>() / pairs,
            std_error: 0.0,
            pairs: pairs as u64,
            exact: true,
        });
    }
    let mut rng = stream(seed, Domain::Apcs, 0);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..APCS_SAMPLED_PAIRS {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let c = cos(i, j);
        sum += c;
        sq += c * c;
    }
    let m = APCS_SAMPLED_PAIRS as f64;
    let mean = sum / m;
    let var = (sq / m - mean * mean).max(0.0) * m / (m - 1.0);
    Ok(ApcsEstimate {
        mean,
        std_error: (var / m).sqrt(),
        pairs: APCS_SAMPLED_PAIRS as u64,
        exact: false,
    })
}
