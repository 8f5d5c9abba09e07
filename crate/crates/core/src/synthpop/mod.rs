//! Synthetic annotator populations with planted voice groups.
//!
//! Each non-noise row is `centroid(group) + offset(item) + spread * N(0, I)`.
//! The per-item offset is shared by every group, so the generator produces
//! both a text-driven and a behaviour-driven structure.

mod fixtures;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use fixtures::{make_paper_like_fixture, paper_like_config, FixtureProfile};

use crate::corpus::{
    read_row_labels, save_embeddings, write_annotations, write_metadata, write_row_labels,
    AnnotationRecord, AnnotatorMetadata, Dataset, EmbeddingFormat, EmbeddingMatrix, JoinOptions,
    RowKey,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stream, Domain};
use crate::NOISE;

/// Probability distribution over categorical values.
pub type Categorical = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoiceSpec {
    pub group_id: i32,
    /// Number of annotators in the group.
    pub size: usize,
    pub centroid: Vec<f64>,
    /// Isotropic standard deviation around the centroid.
    pub spread: f64,
    /// Topic index -> label distribution. Must cover every topic.
    pub label_policy: BTreeMap<usize, Categorical>,
    /// Attribute name -> value distribution.
    pub attribute_profile: BTreeMap<String, Categorical>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeSampling {
    /// Independent draw per annotator.
    #[default]
    Sampled,
    /// Exact per-group counts (largest-remainder rounding), randomly permuted.
    Quota,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub dim: usize,
    pub items: usize,
    pub topics: usize,
    pub voices: Vec<VoiceSpec>,
    #[serde(default)]
    pub noise_rows: usize,
    pub seed: u64,
    /// Standard deviation of the shared per-item offset.
    #[serde(default)]
    pub item_offset_scale: f64,
    #[serde(default)]
    pub attribute_sampling: AttributeSampling,
}

/// Generated dataset plus the planted group of every row ([`NOISE`] for noise
/// rows).
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub ground_truth: Vec<i32>,
}

pub(crate) fn check_distribution(what: &str, dist: &Categorical) -> Result<()> {
    let total: f64 = dist.values().sum();
    if dist.values().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "{what}: probabilities must lie in [0,1] and sum to 1 (got {total})"
        )));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::config("synth.dim must be at least 2"));
        }
        if self.voices.is_empty() {
            return Err(Error::config("synth.voices must not be empty"));
        }
        if self.items == 0 || self.topics == 0 {
            return Err(Error::config("synth.items and synth.topics must be positive"));
        }
        if !(self.item_offset_scale >= 0.0) {
            return Err(Error::config("synth.item_offset_scale must be >= 0"));
        }
        let mut attrs = None;
        for (v, voice) in self.voices.iter().enumerate() {
            let at = |field: &str| format!("synth.voices[{v}].{field}");
            if voice.group_id < 0 {
                return Err(Error::config(format!("{} must be >= 0", at("group_id"))));
            }
            if voice.centroid.len() != self.dim {
                return Err(Error::config(format!(
                    "{} has length {}, expected dim {}",
                    at("centroid"),
                    voice.centroid.len(),
                    self.dim
                )));
            }
            if !(voice.spread >= 0.0) {
                return Err(Error::config(format!("{} must be >= 0", at("spread"))));
            }
            for t in 0..self.topics {
                let policy = voice.label_policy.get(&t).ok_or_else(|| {
                    Error::config(format!("{} has no entry for topic {t}", at("label_policy")))
                })?;
                check_distribution(&at(&format!("label_policy.{t}")), policy)?;
            }
            for (name, dist) in &voice.attribute_profile {
                check_distribution(&at(&format!("attribute_profile.{name}")), dist)?;
            }
            let names: Vec<&String> = voice.attribute_profile.keys().collect();
            match &attrs {
                None => attrs = Some(names),
                Some(prev) if *prev != names => {
                    return Err(Error::config(format!(
                        "{} must name the same attributes in every voice",
                        at("attribute_profile")
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn label_set(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .voices
            .iter()
            .flat_map(|v| v.label_policy.values().flat_map(|d| d.keys().cloned()))
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }
}

fn draw_categorical<R: rand::Rng>(dist: &Categorical, rng: &mut R) -> String {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (value, p) in dist {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(value);
        if u < acc {
            return value.clone();
        }
    }
    last.expect("validated distribution has positive mass").clone()
}

/// Largest-remainder rounding of `size * p`; counts sum to `size`.
fn quota_counts(dist: &Categorical, size: usize) -> Vec<(String, usize)> {
    let raw: Vec<(String, f64)> = dist
        .iter()
        .map(|(k, p)| (k.clone(), p * size as f64))
        .collect();
    let mut counts: Vec<(String, usize)> = raw
        .iter()
        .map(|(k, x)| (k.clone(), x.floor() as usize))
        .collect();
    let assigned: usize = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a].1 - raw[a].1.floor();
        let rb = raw[b].1 - raw[b].1.floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(size.saturating_sub(assigned)) {
        counts[i].1 += 1;
    }
    counts
}

pub fn annotator_id(index: usize) -> String {
    format!("ann-{index:04}")
}

pub fn item_id(index: usize) -> String {
    format!("item-{index:03}")
}

/// Generates a dataset from `cfg`. Output is a pure function of the config.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let dim = cfg.dim;
    let seed = cfg.seed;

    let offsets: Vec<Vec<f64>> = (0..cfg.items)
        .map(|t| {
            let mut rng = stream(seed, Domain::ItemOffset, t as u64);
            (0..dim)
                .map(|_| cfg.item_offset_scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let topic_of = |t: usize| t % cfg.topics;

    let n_annotators: usize = cfg.voices.iter().map(|v| v.size).sum();
    let rows = n_annotators * cfg.items + cfg.noise_rows;
    let mut data = Vec::with_capacity(rows * dim);
    let mut keys = Vec::with_capacity(rows);
    let mut annotations = Vec::with_capacity(rows);
    let mut metadata = Vec::with_capacity(n_annotators + cfg.noise_rows);
    let mut truth = Vec::with_capacity(rows);

    let mut a = 0usize;
    for (g, voice) in cfg.voices.iter().enumerate() {
        let group_attrs = assign_attributes(cfg, g, voice, a);
        for attrs in group_attrs {
            let ann = annotator_id(a);
            for t in 0..cfg.items {
                let r = a * cfg.items + t;
                let mut rng = stream(seed, Domain::RowNoise, r as u64);
                for j in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push(voice.centroid[j] + offsets[t][j] + voice.spread * z);
                }
                let mut rng = stream(seed, Domain::GoldLabel, r as u64);
                let label = draw_categorical(&voice.label_policy[&topic_of(t)], &mut rng);
                keys.push(RowKey::new(&ann, item_id(t)));
                annotations.push(AnnotationRecord {
                    annotator_id: ann.clone(),
                    item_id: item_id(t),
                    gold_label: label,
                    predicted_label: None,
                });
                truth.push(voice.group_id);
            }
            metadata.push(AnnotatorMetadata {
                annotator_id: ann,
                attributes: attrs,
            });
            a += 1;
        }
    }

    if cfg.noise_rows > 0 {
        generate_noise_rows(cfg, &offsets, &mut data, &mut keys, &mut annotations, &mut metadata);
        truth.extend(std::iter::repeat_n(NOISE, cfg.noise_rows));
    }

    let emb = EmbeddingMatrix::new(Matrix::from_vec(rows, dim, data)?, keys)?;
    let dataset = Dataset::join(
        emb,
        annotations,
        metadata,
        &JoinOptions {
            strict: true,
            label_set: Some(cfg.label_set()),
        },
    )?;
    Ok(SynthOutput {
        dataset,
        ground_truth: truth,
    })
}

fn assign_attributes(
    cfg: &SynthConfig,
    group: usize,
    voice: &VoiceSpec,
    first_annotator: usize,
) -> Vec<BTreeMap<String, String>> {
    let mut out = vec![BTreeMap::new(); voice.size];
    match cfg.attribute_sampling {
        AttributeSampling::Sampled => {
            for (i, attrs) in out.iter_mut().enumerate() {
                let mut rng = stream(cfg.seed, Domain::Attributes, (first_annotator + i) as u64);
                for (name, dist) in &voice.attribute_profile {
                    attrs.insert(name.clone(), draw_categorical(dist, &mut rng));
                }
            }
        }
        AttributeSampling::Quota => {
            for (k, (name, dist)) in voice.attribute_profile.iter().enumerate() {
                let mut values: Vec<&String> = Vec::with_capacity(voice.size);
                let counts = quota_counts(dist, voice.size);
                for (value, c) in &counts {
                    values.extend(std::iter::repeat_n(value, *c));
                }
                let mut rng =
                    stream(cfg.seed, Domain::QuotaShuffle, ((group as u64) << 16) | k as u64);
                values.shuffle(&mut rng);
                for (attrs, v) in out.iter_mut().zip(values) {
                    attrs.insert(name.clone(), v.clone());
                }
            }
        }
    }
    out
}

/// Noise rows sit uniformly inside the box spanned by the centroids, padded by
/// three times the largest spread. Each belongs to its own annotator whose
/// attributes follow the size-weighted mixture of the voice profiles.
fn generate_noise_rows(
    cfg: &SynthConfig,
    offsets: &[Vec<f64>],
    data: &mut Vec<f64>,
    keys: &mut Vec<RowKey>,
    annotations: &mut Vec<AnnotationRecord>,
    metadata: &mut Vec<AnnotatorMetadata>,
) {
    let dim = cfg.dim;
    let pad = 3.0 * cfg.voices.iter().map(|v| v.spread).fold(0.0, f64::max);
    let lo: Vec<f64> = (0..dim)
        .map(|j| cfg.voices.iter().map(|v| v.centroid[j]).fold(f64::INFINITY, f64::min) - pad)
        .collect();
    let hi: Vec<f64> = (0..dim)
        .map(|j| cfg.voices.iter().map(|v| v.centroid[j]).fold(f64::NEG_INFINITY, f64::max) + pad)
        .collect();
    let total: usize = cfg.voices.iter().map(|v| v.size).sum::<usize>().max(1);
    let mut pooled: BTreeMap<String, Categorical> = BTreeMap::new();
    for v in &cfg.voices {
        let w = v.size as f64 / total as f64;
        for (name, dist) in &v.attribute_profile {
            let entry = pooled.entry(name.clone()).or_default();
            for (value, p) in dist {
                *entry.entry(value.clone()).or_default() += w * p;
            }
        }
    }
    let labels = cfg.label_set();
    for n in 0..cfg.noise_rows {
        let mut rng = stream(cfg.seed, Domain::NoiseRow, n as u64);
        let t = n % cfg.items;
        for j in 0..dim {
            let u: f64 = rng.random();
            data.push(lo[j] + u * (hi[j] - lo[j]) + offsets[t][j]);
        }
        let ann = format!("noise-{n:04}");
        let label = labels[rng.random_range(0..labels.len())].clone();
        let attributes = pooled
            .iter()
            .map(|(name, dist)| (name.clone(), draw_categorical(dist, &mut rng)))
            .collect();
        keys.push(RowKey::new(&ann, item_id(t)));
        annotations.push(AnnotationRecord {
            annotator_id: ann.clone(),
            item_id: item_id(t),
            gold_label: label,
            predicted_label: None,
        });
        metadata.push(AnnotatorMetadata {
            annotator_id: ann,
            attributes,
        });
    }
}

/// Paths of the files written by [`write_synth`].
#[derive(Debug, Clone)]
pub struct SynthFiles {
    pub embeddings: PathBuf,
    pub annotations: PathBuf,
    pub metadata: PathBuf,
    pub ground_truth: PathBuf,
}

/// Writes the dataset in corpus formats plus `ground_truth.csv`.
pub fn write_synth(out: &SynthOutput, dir: &Path, format: EmbeddingFormat) -> Result<SynthFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = SynthFiles {
        embeddings: dir.join(match format {
            EmbeddingFormat::Csv => "embeddings.csv",
            EmbeddingFormat::RawBinary => "embeddings.bin",
        }),
        annotations: dir.join("annotations.jsonl"),
        metadata: dir.join("metadata.csv"),
        ground_truth: dir.join("ground_truth.csv"),
    };
    let ds = &out.dataset;
    save_embeddings(ds.embeddings(), &files.embeddings, format)?;
    let create = |p: &Path| File::create(p).map_err(|e| Error::io(p, e));
    write_annotations(ds.annotations(), create(&files.annotations)?)?;
    let meta: Vec<AnnotatorMetadata> = ds.metadata().values().cloned().collect();
    write_metadata(&meta, create(&files.metadata)?)?;
    write_ground_truth(ds.embeddings().row_index(), &out.ground_truth, create(&files.ground_truth)?)?;
    Ok(files)
}

pub fn write_ground_truth<W: Write>(keys: &[RowKey], truth: &[i32], writer: W) -> Result<()> {
    write_row_labels(keys, truth, "group_id", writer)
}

/// Reads a ground-truth CSV and aligns it with `keys`.
pub fn read_ground_truth(path: &Path, keys: &[RowKey]) -> Result<Vec<i32>> {
    read_row_labels(path, keys)
}
