//! Hyperparameter search over reduction and clustering configurations,
//! ranked by silhouette.
//!
//! Trial `t` is a pure function of `(spec, seed, t)`, so the trial sequence
//! does not depend on parallelism or on how many trials a budget admits.
//! Trials run in batches; a batch only starts while budget remains, and its
//! results are merged in trial order.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{cluster, Algorithm, ClusterConfig};
use crate::corpus::Dataset;
use crate::dimred::{reduce, ReducedMatrix, ReductionConfig, ReductionMethod};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::validate::{validate, MetricSpace, ValidateOptions, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
    /// Grid spacing; random search ignores it.
    #[serde(default = "one")]
    pub step: usize,
}

fn one() -> usize {
    1
}

impl IntRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max, step: 1 }
    }

    fn grid(&self) -> Vec<usize> {
        (self.min..=self.max).step_by(self.step.max(1)).collect()
    }

    fn sample(&self, rng: &mut crate::rng::Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }

    fn within(&self, lo: usize, hi: usize) -> bool {
        self.min >= lo && self.max <= hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloatRange {
    pub min: f64,
    pub max: f64,
    /// Number of evenly spaced grid values; random search ignores it.
    #[serde(default = "three")]
    pub points: usize,
}

fn three() -> usize {
    3
}

impl FloatRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self {
            min,
            max,
            points: 3,
        }
    }

    fn grid(&self) -> Vec<f64> {
        if self.points <= 1 || self.max == self.min {
            return vec![self.min];
        }
        let n = self.points - 1;
        (0..=n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / n as f64)
            .collect()
    }

    fn sample(&self, rng: &mut crate::rng::Rng) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    fn within(&self, lo: f64, hi: f64) -> bool {
        self.min >= lo && self.max <= hi
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    Random,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub methods: Vec<ReductionMethod>,
    pub n_components: IntRange,
    pub umap_neighbors: IntRange,
    pub umap_min_dist: FloatRange,
    pub umap_epochs: usize,
    pub algorithms: Vec<Algorithm>,
    pub k: IntRange,
    pub hdbscan_eps: FloatRange,
    pub hdbscan_min_samples: IntRange,
    pub hdbscan_min_cluster_size: IntRange,
    pub mode: SearchMode,
    pub max_trials: Option<usize>,
    pub max_seconds: Option<f64>,
    pub seed: u64,
    /// Trials evaluated concurrently; 0 uses every available thread.
    pub parallelism: usize,
    /// Accept ranges outside the default bounds.
    pub allow_out_of_range: bool,
    /// Clustering settings shared by all trials (algorithm and grid-searched
    /// fields are overwritten per trial).
    pub cluster: ClusterConfig,
    pub validate: ValidateOptions,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            methods: vec![ReductionMethod::Umap],
            n_components: IntRange::new(2, 40),
            umap_neighbors: IntRange::new(80, 100),
            umap_min_dist: FloatRange::new(0.8, 1.0),
            umap_epochs: ReductionConfig::default().umap_epochs,
            algorithms: vec![Algorithm::Kmeans],
            k: IntRange::new(2, 19),
            hdbscan_eps: FloatRange::new(0.0, 1.0),
            hdbscan_min_samples: IntRange::new(2, 100),
            hdbscan_min_cluster_size: IntRange::new(2, 100),
            mode: SearchMode::Random,
            max_trials: Some(50),
            max_seconds: None,
            seed: 0,
            parallelism: 0,
            allow_out_of_range: false,
            cluster: ClusterConfig::default(),
            validate: ValidateOptions::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.algorithms.is_empty() {
            return Err(Error::config("methods and algorithms must be non-empty"));
        }
        let ints = [
            ("n_components", &self.n_components, 2, 40),
            ("umap_neighbors", &self.umap_neighbors, 80, 100),
            ("k", &self.k, 2, 19),
            ("hdbscan_min_samples", &self.hdbscan_min_samples, 2, 100),
            ("hdbscan_min_cluster_size", &self.hdbscan_min_cluster_size, 2, 100),
        ];
        for (name, r, lo, hi) in ints {
            if r.min > r.max || r.step == 0 {
                return Err(Error::config(format!("{name}: empty range")));
            }
            if !self.allow_out_of_range && !r.within(lo, hi) {
                return Err(Error::config(format!(
                    "{name} range [{}, {}] leaves [{lo}, {hi}]; set allow_out_of_range to override",
                    r.min, r.max
                )));
            }
        }
        let floats = [
            ("umap_min_dist", &self.umap_min_dist, 0.8, 1.0),
            ("hdbscan_eps", &self.hdbscan_eps, 0.0, 1.0),
        ];
        for (name, r, lo, hi) in floats {
            if !(r.min <= r.max) || r.points == 0 {
                return Err(Error::config(format!("{name}: empty range")));
            }
            if !self.allow_out_of_range && !r.within(lo, hi) {
                return Err(Error::config(format!(
                    "{name} range [{}, {}] leaves [{lo}, {hi}]; set allow_out_of_range to override",
                    r.min, r.max
                )));
            }
        }
        match (self.mode, self.max_trials, self.max_seconds) {
            (_, Some(0), _) => return Err(Error::config("max_trials must be > 0")),
            (_, _, Some(s)) if !(s > 0.0) => {
                return Err(Error::config("max_seconds must be > 0"))
            }
            (SearchMode::Random, None, None) => {
                return Err(Error::config(
                    "random search needs max_trials and/or max_seconds",
                ))
            }
            _ => {}
        }
        self.validate.validate()
    }

    fn reduction(&self, method: ReductionMethod) -> ReductionConfig {
        ReductionConfig {
            method,
            umap_epochs: self.umap_epochs,
            seed: self.seed,
            ..ReductionConfig::default()
        }
    }

    fn clustering(&self, algorithm: Algorithm) -> ClusterConfig {
        ClusterConfig {
            algorithm,
            seed: self.seed,
            ..self.cluster.clone()
        }
    }

    /// Configuration of random-search trial `t`.
    pub fn random_trial(&self, t: usize) -> TrialConfig {
        let mut rng = stream(self.seed, Domain::Trial, t as u64);
        let method = self.methods[rng.random_range(0..self.methods.len())];
        let mut reduction = self.reduction(method);
        if method != ReductionMethod::None {
            reduction.n_components = self.n_components.sample(&mut rng);
        }
        if method == ReductionMethod::Umap {
            reduction.umap_neighbors = self.umap_neighbors.sample(&mut rng);
            reduction.umap_min_dist = self.umap_min_dist.sample(&mut rng);
        }
        let algorithm = self.algorithms[rng.random_range(0..self.algorithms.len())];
        let mut c = self.clustering(algorithm);
        match algorithm {
            Algorithm::Kmeans | Algorithm::Gmm => c.k = self.k.sample(&mut rng),
            Algorithm::Hdbscan => {
                c.hdbscan_eps = self.hdbscan_eps.sample(&mut rng);
                c.hdbscan_min_samples = self.hdbscan_min_samples.sample(&mut rng);
                c.hdbscan_min_cluster_size = self.hdbscan_min_cluster_size.sample(&mut rng);
            }
        }
        TrialConfig {
            reduction,
            cluster: c,
        }
    }

    /// Every grid configuration in a fixed order.
    pub fn grid(&self) -> Vec<TrialConfig> {
        let mut reductions = Vec::new();
        for &method in &self.methods {
            let base = self.reduction(method);
            match method {
                ReductionMethod::None => reductions.push(base),
                ReductionMethod::Pca => {
                    for n in self.n_components.grid() {
                        reductions.push(ReductionConfig {
                            n_components: n,
                            ..base.clone()
                        });
                    }
                }
                ReductionMethod::Umap => {
                    for n in self.n_components.grid() {
                        for nb in self.umap_neighbors.grid() {
                            for md in self.umap_min_dist.grid() {
                                reductions.push(ReductionConfig {
                                    n_components: n,
                                    umap_neighbors: nb,
                                    umap_min_dist: md,
                                    ..base.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        let mut clusterings = Vec::new();
        for &algorithm in &self.algorithms {
            let base = self.clustering(algorithm);
            match algorithm {
                Algorithm::Kmeans | Algorithm::Gmm => {
                    for k in self.k.grid() {
                        clusterings.push(ClusterConfig { k, ..base.clone() });
                    }
                }
                Algorithm::Hdbscan => {
                    for eps in self.hdbscan_eps.grid() {
                        for ms in self.hdbscan_min_samples.grid() {
                            for mcs in self.hdbscan_min_cluster_size.grid() {
                                clusterings.push(ClusterConfig {
                                    hdbscan_eps: eps,
                                    hdbscan_min_samples: ms,
                                    hdbscan_min_cluster_size: mcs,
                                    ..base.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(reductions.len() * clusterings.len());
        for r in &reductions {
            for c in &clusterings {
                out.push(TrialConfig {
                    reduction: r.clone(),
                    cluster: c.clone(),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub reduction: ReductionConfig,
    pub cluster: ClusterConfig,
}

impl TrialConfig {
    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn reduction_key(&self) -> String {
        serde_json::to_string(&self.reduction).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub config: TrialConfig,
    pub config_hash: String,
    pub n_clusters: usize,
    pub report: Option<ValidationReport>,
    pub degenerate: bool,
    /// Why the trial is degenerate, when it is.
    pub reason: Option<String>,
    pub wall_time: f64,
}

impl TrialResult {
    pub fn silhouette(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.silhouette)
    }
}

/// Ranking used by [`select_best`] and for sorting: silhouette descending,
/// then Davies-Bouldin ascending, then fewer clusters, then config hash.
/// Degenerate trials sort after all others, by trial index.
pub fn rank(a: &TrialResult, b: &TrialResult) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a.degenerate, b.degenerate) {
        (false, true) => return Ordering::Less,
        (true, false) => return Ordering::Greater,
        (true, true) => return a.trial.cmp(&b.trial).then_with(|| a.config_hash.cmp(&b.config_hash)),
        (false, false) => {}
    }
    let (ra, rb) = (
        a.report.as_ref().expect("non-degenerate trials carry a report"),
        b.report.as_ref().expect("non-degenerate trials carry a report"),
    );
    rb.silhouette
        .total_cmp(&ra.silhouette)
        .then(ra.davies_bouldin.total_cmp(&rb.davies_bouldin))
        .then(a.n_clusters.cmp(&b.n_clusters))
        .then_with(|| a.config_hash.cmp(&b.config_hash))
}

/// The best non-degenerate trial.
pub fn select_best(trials: &[TrialResult]) -> Result<&TrialResult> {
    trials
        .iter()
        .filter(|t| !t.degenerate)
        .min_by(|a, b| rank(a, b))
        .ok_or_else(|| Error::Degenerate("every sweep trial is degenerate".into()))
}

/// Where sweep trials are logged and whether to resume from the log.
#[derive(Debug, Clone, Default)]
pub struct SweepLog<'a> {
    pub path: Option<&'a Path>,
    pub resume: bool,
}

/// Runs the sweep and returns every trial sorted by [`rank`].
pub fn run_sweep(
    ds: &Dataset,
    spec: &SweepSpec,
    log: SweepLog<'_>,
    ground_truth: Option<&[i32]>,
) -> Result<Vec<TrialResult>> {
    spec.validate()?;
    let start = Instant::now();
    let grid = match spec.mode {
        SearchMode::Grid => Some(spec.grid()),
        SearchMode::Random => None,
    };
    let limit = match (&grid, spec.max_trials) {
        (Some(g), Some(m)) => g.len().min(m),
        (Some(g), None) => g.len(),
        (None, m) => m.unwrap_or(usize::MAX),
    };
    let config_of = |t: usize| match &grid {
        Some(g) => g[t].clone(),
        None => spec.random_trial(t),
    };

    let mut done: Vec<TrialResult> = Vec::new();
    if log.resume {
        if let Some(path) = log.path.filter(|p| p.exists()) {
            done = read_log(path)?;
            for (t, r) in done.iter().enumerate() {
                if r.trial != t || t >= limit || r.config != config_of(t) {
                    return Err(Error::format(
                        path.display().to_string(),
                        format!("log entry {t} does not match this sweep spec and seed"),
                    ));
                }
            }
            log::info!("resuming sweep after {} logged trials", done.len());
        }
    }
    let mut writer = match log.path {
        Some(path) => {
            let file = if log.resume {
                OpenOptions::new().create(true).append(true).open(path)
            } else {
                File::create(path)
            };
            Some(file.map_err(|e| Error::io(path, e))?)
        }
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let batch = pool.current_num_threads().max(1);
    let emb = ds.embeddings();
    let mut cache: HashMap<String, Arc<ReducedMatrix>> = HashMap::new();

    while done.len() < limit {
        if spec.max_seconds.is_some_and(|s| start.elapsed().as_secs_f64() >= s) {
            break;
        }
        let first = done.len();
        let configs: Vec<TrialConfig> = (first..limit.min(first + batch)).map(config_of).collect();

        let mut missing: Vec<&ReductionConfig> = Vec::new();
        for c in &configs {
            let key = c.reduction_key();
            if !cache.contains_key(&key) && !missing.iter().any(|m| **m == c.reduction) {
                missing.push(&c.reduction);
            }
        }
        let reduced: Vec<(String, Result<ReducedMatrix>)> = pool.install(|| {
            missing
                .par_iter()
                .map(|r| {
                    let key = serde_json::to_string(r).expect("config serializes");
                    (key, reduce(emb, r))
                })
                .collect()
        });
        let mut failed: HashMap<String, String> = HashMap::new();
        for (key, r) in reduced {
            match r {
                Ok(m) => {
                    cache.insert(key, Arc::new(m));
                }
                Err(e) if e.kind() == crate::ErrorKind::Data => return Err(e),
                Err(e) => {
                    failed.insert(key, e.to_string());
                }
            }
        }

        let results: Vec<TrialResult> = pool.install(|| {
            configs
                .into_par_iter()
                .enumerate()
                .map(|(i, config)| {
                    let key = config.reduction_key();
                    let reduced = cache.get(&key).cloned();
                    let failure = failed.get(&key).cloned();
                    run_trial(first + i, config, ds, reduced, failure, spec, ground_truth)
                })
                .collect()
        });
        for r in results {
            if let Some(w) = writer.as_mut() {
                let mut line = serde_json::to_vec(&r)?;
                line.push(b'\n');
                w.write_all(&line)
                    .map_err(|e| Error::io(log.path.expect("writer has a path"), e))?;
            }
            done.push(r);
        }
    }

    if done.is_empty() {
        return Err(Error::Degenerate(
            "no sweep trial completed within the budget".into(),
        ));
    }
    done.sort_by(rank);
    Ok(done)
}

fn run_trial(
    trial: usize,
    config: TrialConfig,
    ds: &Dataset,
    reduced: Option<Arc<ReducedMatrix>>,
    failure: Option<String>,
    spec: &SweepSpec,
    ground_truth: Option<&[i32]>,
) -> TrialResult {
    let start = Instant::now();
    let config_hash = config.hash();
    let outcome = (|| -> Result<(usize, Option<String>, ValidationReport)> {
        let reduced = reduced.ok_or_else(|| {
            Error::Degenerate(failure.unwrap_or_else(|| "reduction failed".into()))
        })?;
        let assignment = cluster(&reduced.values, &config.cluster)?;
        let space = match spec.validate.metric_space {
            MetricSpace::Reduced => &reduced.values,
            MetricSpace::Original => ds.embeddings().values(),
        };
        let report = validate(space, &assignment.labels, ds, &spec.validate, ground_truth)?;
        Ok((assignment.n_clusters, assignment.degenerate, report))
    })();
    let wall_time = start.elapsed().as_secs_f64();
    match outcome {
        Ok((n_clusters, reason, report)) => TrialResult {
            trial,
            config,
            config_hash,
            n_clusters,
            degenerate: reason.is_some(),
            reason,
            report: Some(report),
            wall_time,
        },
        Err(e) => TrialResult {
            trial,
            config,
            config_hash,
            n_clusters: 0,
            report: None,
            degenerate: true,
            reason: Some(e.to_string()),
            wall_time,
        },
    }
}

/// Reads a sweep log in trial order.
pub fn read_log(path: &Path) -> Result<Vec<TrialResult>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: TrialResult = serde_json::from_str(&line).map_err(|e| {
            Error::format(format!("{}:{}", path.display(), n + 1), e.to_string())
        })?;
        out.push(r);
    }
    out.sort_by_key(|r| r.trial);
    Ok(out)
}
