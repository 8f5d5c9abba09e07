//! Clustering of (reduced) embeddings: k-means, Gaussian mixtures and
//! HDBSCAN.
//!
//! All three return a [`ClusterAssignment`] whose labels are canonicalized by
//! first appearance, so label 0 is the cluster of the first non-noise row,
//! label 1 the next new cluster, and so on.

mod gmm;
mod hdbscan;
mod kmeans;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use gmm::{gmm, CovarianceType};
pub use hdbscan::{core_distances, hdbscan, mutual_reachability_mst, CondensedCluster};
pub use kmeans::kmeans;

use crate::corpus::{read_row_labels, write_row_labels, RowKey};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::NOISE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Kmeans,
    Gmm,
    Hdbscan,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::Gmm => "gmm",
            Algorithm::Hdbscan => "hdbscan",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub algorithm: Algorithm,
    /// Number of clusters for k-means and GMM.
    pub k: usize,
    pub hdbscan_min_cluster_size: usize,
    pub hdbscan_min_samples: usize,
    pub hdbscan_eps: f64,
    /// Let HDBSCAN return the root of the condensed tree as its only cluster.
    pub hdbscan_allow_single_cluster: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Independent k-means++ restarts; the lowest final inertia wins.
    pub n_init: usize,
    pub covariance: CovarianceType,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Kmeans,
            k: 3,
            hdbscan_min_cluster_size: 5,
            hdbscan_min_samples: 5,
            hdbscan_eps: 0.0,
            hdbscan_allow_single_cluster: true,
            max_iter: 300,
            tol: 1e-6,
            seed: 0,
            n_init: 4,
            covariance: CovarianceType::Full,
        }
    }
}

impl ClusterConfig {
    pub fn kmeans(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            ..Self::default()
        }
    }

    pub fn gmm(k: usize, seed: u64) -> Self {
        Self {
            algorithm: Algorithm::Gmm,
            k,
            seed,
            ..Self::default()
        }
    }

    pub fn hdbscan(min_cluster_size: usize, min_samples: usize) -> Self {
        Self {
            algorithm: Algorithm::Hdbscan,
            hdbscan_min_cluster_size: min_cluster_size,
            hdbscan_min_samples: min_samples,
            ..Self::default()
        }
    }

    /// Checks parameter ranges. `k` may be 1 here; sweeps restrict it further.
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be >= 1"));
        }
        match self.algorithm {
            Algorithm::Kmeans | Algorithm::Gmm => {
                if self.k == 0 {
                    return Err(Error::config("k must be >= 1"));
                }
                if self.n_init == 0 {
                    return Err(Error::config("n_init must be >= 1"));
                }
            }
            Algorithm::Hdbscan => {
                if !(2..=100).contains(&self.hdbscan_min_cluster_size) {
                    return Err(Error::config(format!(
                        "hdbscan_min_cluster_size must be in [2, 100], got {}",
                        self.hdbscan_min_cluster_size
                    )));
                }
                if !(2..=100).contains(&self.hdbscan_min_samples) {
                    return Err(Error::config(format!(
                        "hdbscan_min_samples must be in [2, 100], got {}",
                        self.hdbscan_min_samples
                    )));
                }
                if !(0.0..=1.0).contains(&self.hdbscan_eps) {
                    return Err(Error::config(format!(
                        "hdbscan_eps must be in [0, 1], got {}",
                        self.hdbscan_eps
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Algorithm-specific fit details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum ModelDetail {
    Kmeans {
        inertia: f64,
        /// Inertia after each assignment step of the winning restart.
        inertia_trace: Vec<f64>,
        iterations: usize,
        restart: usize,
    },
    Gmm {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        /// Row-major `d x d` matrices; off-diagonals are zero for the
        /// diagonal model.
        covariances: Vec<Vec<f64>>,
        /// Mean per-row log-likelihood before each M step.
        log_likelihood_trace: Vec<f64>,
        converged: bool,
    },
    Hdbscan {
        condensed: Vec<CondensedCluster>,
        mst_weight: f64,
        noise_count: usize,
    },
    /// Labels read from a file rather than fitted here.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<i32>,
    pub n_clusters: usize,
    pub centroids: Option<Vec<Vec<f64>>>,
    pub model_detail: ModelDetail,
    /// Set when the solution exists but is unusable (no clusters, or more
    /// clusters than half the rows).
    pub degenerate: Option<String>,
}

impl ClusterAssignment {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Member row indices per cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != NOISE {
                out[l as usize].push(i);
            }
        }
        out
    }

    fn flag_degenerate(&mut self) {
        let rows = self.labels.len();
        self.degenerate = if self.n_clusters == 0 {
            Some("no clusters: every row is noise".into())
        } else if self.n_clusters > rows / 2 {
            Some(format!(
                "{} clusters for {rows} rows exceeds rows/2",
                self.n_clusters
            ))
        } else {
            None
        };
    }
}

/// Runs the configured algorithm.
pub fn cluster(data: &Matrix, cfg: &ClusterConfig) -> Result<ClusterAssignment> {
    match cfg.algorithm {
        Algorithm::Kmeans => kmeans(data, cfg),
        Algorithm::Gmm => gmm(data, cfg),
        Algorithm::Hdbscan => hdbscan(data, cfg),
    }
}

/// Relabels clusters by first appearance. Returns the new labels and, for
/// each new id, the old id it came from.
pub fn canonicalize(labels: &[i32]) -> (Vec<i32>, Vec<usize>) {
    let mut map = std::collections::HashMap::new();
    let mut order = Vec::new();
    let out = labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                return NOISE;
            }
            *map.entry(l).or_insert_with(|| {
                order.push(l as usize);
                order.len() as i32 - 1
            })
        })
        .collect();
    (out, order)
}

/// Mean of the member rows of each cluster.
pub(crate) fn cluster_means(data: &Matrix, labels: &[i32], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; data.cols()]; k];
    let mut counts = vec![0usize; k];
    for (row, &l) in data.iter_rows().zip(labels) {
        if l == NOISE {
            continue;
        }
        counts[l as usize] += 1;
        for (s, v) in sums[l as usize].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Writes `annotator_id,item_id,cluster` and a `<path>.json` sidecar holding
/// everything but the labels. Returns the sidecar path.
pub fn save_assignment(
    assignment: &ClusterAssignment,
    keys: &[RowKey],
    config: &ClusterConfig,
    path: &Path,
) -> Result<PathBuf> {
    if keys.len() != assignment.labels.len() {
        return Err(Error::format(
            "assignment",
            format!(
                "{} labels for {} row keys",
                assignment.labels.len(),
                keys.len()
            ),
        ));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_row_labels(keys, &assignment.labels, "cluster", file)?;
    let sidecar = crate::dimred::sidecar_path(path);
    let file = File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let body = serde_json::json!({
        "config": config,
        "n_clusters": assignment.n_clusters,
        "degenerate": assignment.degenerate,
        "centroids": assignment.centroids,
        "model_detail": assignment.model_detail,
    });
    serde_json::to_writer_pretty(BufWriter::new(file), &body)?;
    Ok(sidecar)
}

/// Reads cluster labels aligned with `keys`, checking that they form a valid
/// assignment (noise allowed, other labels dense from 0).
pub fn load_labels(path: &Path, keys: &[RowKey]) -> Result<Vec<i32>> {
    let labels = read_row_labels(path, keys)?;
    if let Some(bad) = labels.iter().find(|&&l| l < NOISE) {
        return Err(Error::format(
            path.display().to_string(),
            format!("invalid cluster label {bad}"),
        ));
    }
    Ok(labels)
}

/// Builds an assignment from externally supplied labels, relabeling to the
/// canonical order and computing centroids.
pub fn assignment_from_labels(data: &Matrix, labels: &[i32]) -> Result<ClusterAssignment> {
    if labels.len() != data.rows() {
        return Err(Error::format(
            "assignment",
            format!("{} labels for {} rows", labels.len(), data.rows()),
        ));
    }
    let (labels, order) = canonicalize(labels);
    let n_clusters = order.len();
    let centroids = cluster_means(data, &labels, n_clusters);
    let mut a = ClusterAssignment {
        labels,
        n_clusters,
        centroids: Some(centroids),
        model_detail: ModelDetail::External,
        degenerate: None,
    };
    a.flag_degenerate();
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_labels_follow_first_appearance() {
        let (l, order) = canonicalize(&[2, 2, -1, 0, 2, 1]);
        assert_eq!(l, vec![0, 0, -1, 1, 0, 2]);
        assert_eq!(order, vec![2, 0, 1]);
    }

    #[test]
    fn config_ranges_are_enforced() {
        let mut c = ClusterConfig::hdbscan(1, 5);
        assert!(c.validate().is_err());
        c.hdbscan_min_cluster_size = 5;
        c.hdbscan_eps = 1.5;
        assert!(c.validate().is_err());
        let mut c = ClusterConfig::kmeans(3, 0);
        c.tol = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn degenerate_flags() {
        let data = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let a = assignment_from_labels(&data, &[0, 1, 2, 2]).unwrap();
        assert!(a.is_degenerate());
        let a = assignment_from_labels(&data, &[-1, -1, -1, -1]).unwrap();
        assert_eq!(a.n_clusters, 0);
        assert!(a.is_degenerate());
        let a = assignment_from_labels(&data, &[0, 0, 1, 1]).unwrap();
        assert!(!a.is_degenerate());
    }

    #[test]
    fn assignment_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let data = Matrix::from_rows(&[[0.0], [1.0], [5.0]]).unwrap();
        let a = assignment_from_labels(&data, &[0, 0, -1]).unwrap();
        let keys: Vec<RowKey> = (0..3).map(|i| RowKey::new("a", format!("i{i}"))).collect();
        let path = dir.path().join("assign.csv");
        let side = save_assignment(&a, &keys, &ClusterConfig::default(), &path).unwrap();
        assert!(side.exists());
        assert_eq!(load_labels(&path, &keys).unwrap(), a.labels);
    }
}
