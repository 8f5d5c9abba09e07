//! Lloyd's algorithm with k-means++ seeding.

use rand::Rng as _;
use rayon::prelude::*;

use super::{canonicalize, ClusterAssignment, ClusterConfig, ModelDetail};
use crate::error::{Error, Result};
use crate::matrix::{sq_euclidean, Matrix};
use crate::rng::{stream, Domain, Rng};

struct Fit {
    labels: Vec<i32>,
    centroids: Vec<Vec<f64>>,
    inertia: f64,
    trace: Vec<f64>,
    iterations: usize,
}

pub fn kmeans(data: &Matrix, cfg: &ClusterConfig) -> Result<ClusterAssignment> {
    cfg.validate()?;
    check_k(data, cfg.k)?;
    let mut best: Option<(usize, Fit)> = None;
    for restart in 0..cfg.n_init {
        let mut rng = stream(cfg.seed, Domain::KMeans, restart as u64);
        let fit = lloyd(data, cfg.k, cfg.max_iter, cfg.tol, &mut rng);
        if best.as_ref().is_none_or(|(_, b)| fit.inertia < b.inertia) {
            best = Some((restart, fit));
        }
    }
    let (restart, fit) = best.expect("n_init >= 1");
    let (labels, order) = canonicalize(&fit.labels);
    let centroids: Vec<Vec<f64>> = order.iter().map(|&o| fit.centroids[o].clone()).collect();
    let mut a = ClusterAssignment {
        labels,
        n_clusters: centroids.len(),
        centroids: Some(centroids),
        model_detail: ModelDetail::Kmeans {
            inertia: fit.inertia,
            inertia_trace: fit.trace,
            iterations: fit.iterations,
            restart,
        },
        degenerate: None,
    };
    a.flag_degenerate();
    Ok(a)
}

pub(super) fn check_k(data: &Matrix, k: usize) -> Result<()> {
    if data.rows() == 0 {
        return Err(Error::config("cannot cluster an empty matrix"));
    }
    if k > data.rows() {
        return Err(Error::config(format!(
            "k = {k} exceeds the number of rows ({})",
            data.rows()
        )));
    }
    Ok(())
}

fn lloyd(data: &Matrix, k: usize, max_iter: usize, tol: f64, rng: &mut Rng) -> Fit {
    let mut centroids = plus_plus(data, k, rng);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let (mut labels, mut dists) = assign(data, &centroids);
    loop {
        repair_empty(data, &mut centroids, &mut labels, &mut dists);
        trace.push(dists.iter().sum::<f64>());
        if iterations == max_iter {
            break;
        }
        iterations += 1;
        let updated = super::cluster_means(data, &labels, k);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_euclidean(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = updated;
        (labels, dists) = assign(data, &centroids);
        if shift < tol {
            repair_empty(data, &mut centroids, &mut labels, &mut dists);
            trace.push(dists.iter().sum::<f64>());
            break;
        }
    }
    Fit {
        labels,
        centroids,
        inertia: *trace.last().expect("at least one step"),
        trace,
        iterations,
    }
}

/// k-means++: first centre uniform, then each next centre drawn with
/// probability proportional to squared distance to the nearest chosen one.
fn plus_plus(data: &Matrix, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = data.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = data
        .iter_rows()
        .map(|r| sq_euclidean(r, data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // Rounding can land on an already-chosen zero-weight row.
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
            }
            pick
        } else {
            // All remaining rows coincide with a centre: take any unchosen one.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_euclidean(data.row(i), data.row(next)));
        }
    }
    chosen.iter().map(|&i| data.row(i).to_vec()).collect()
}

/// Nearest centroid (lowest index on ties) and the squared distance to it.
fn assign(data: &Matrix, centroids: &[Vec<f64>]) -> (Vec<i32>, Vec<f64>) {
    (0..data.rows())
        .into_par_iter()
        .map(|i| {
            let row = data.row(i);
            let mut best = (0, f64::INFINITY);
            for (c, centre) in centroids.iter().enumerate() {
                let d = sq_euclidean(row, centre);
                if d < best.1 {
                    best = (c as i32, d);
                }
            }
            best
        })
        .unzip()
}

/// Gives every empty cluster the row farthest from its current centroid,
/// taken from a cluster that keeps at least one member.
fn repair_empty(data: &Matrix, centroids: &mut [Vec<f64>], labels: &mut [i32], dists: &mut [f64]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l as usize] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i] as usize] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        let Some(i) = donor else { break };
        counts[labels[i] as usize] -= 1;
        counts[c] = 1;
        labels[i] = c as i32;
        dists[i] = 0.0;
        centroids[c] = data.row(i).to_vec();
    }
}
