//! Cluster validity: internal indices on the clustered space, metadata
//! composition against dataset baselines, voice typing, and agreement
//! scores.

mod agreement;
mod external;
mod internal;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use agreement::{
    adjusted_rand, apcs, f1_macro, ApcsEstimate, APCS_EXACT_MAX_ROWS, APCS_SAMPLED_PAIRS,
};
pub use external::{
    average_purity, is_prototypical, over_represented, prototypical_flags, purity_per_cluster,
    voice_type, ClusterComposition, OverRepresented, PrototypicalRule, VoiceType,
    PROTOTYPICAL_THRESHOLD,
};
pub use internal::{davies_bouldin, silhouette};

use crate::corpus::{label_distribution, Dataset, Weighting};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::NOISE;

/// Which space silhouette and Davies-Bouldin are measured in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSpace {
    /// The space the clustering ran in.
    #[default]
    Reduced,
    /// The input embeddings.
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateOptions {
    /// Attributes to evaluate; empty means every metadata attribute.
    pub attributes: Vec<String>,
    /// How baseline distributions count rows.
    pub weighting: Weighting,
    pub purity_size_weighted: bool,
    pub prototypical_rule: PrototypicalRule,
    pub prototypical_threshold: f64,
    pub metric_space: MetricSpace,
    /// Treat noise rows as one extra cluster in the metadata metrics.
    pub include_noise_in_external: bool,
    /// Compute APCS over the input embeddings.
    pub apcs: bool,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            attributes: Vec::new(),
            weighting: Weighting::Row,
            purity_size_weighted: false,
            prototypical_rule: PrototypicalRule::MajorityShare,
            prototypical_threshold: PROTOTYPICAL_THRESHOLD,
            metric_space: MetricSpace::Reduced,
            include_noise_in_external: false,
            apcs: false,
            seed: 0,
        }
    }
}

impl ValidateOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.prototypical_threshold) {
            return Err(Error::config(format!(
                "prototypical_threshold must be in [0, 1), got {}",
                self.prototypical_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub average_purity: f64,
    pub prototypical_pct: f64,
    pub baseline: BTreeMap<String, f64>,
    pub per_cluster: Vec<ClusterComposition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterVoice {
    pub cluster_id: usize,
    pub size: usize,
    pub voice_type: VoiceType,
    pub over_represented: Vec<OverRepresented>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_clusters: usize,
    pub rows: usize,
    pub silhouette: f64,
    /// `+inf` when two centroids coincide; serialized as the string "inf".
    #[serde(with = "extended_float")]
    pub davies_bouldin: f64,
    pub per_attribute: BTreeMap<String, AttributeReport>,
    pub clusters: Vec<ClusterVoice>,
    pub apcs: Option<ApcsEstimate>,
    pub f1_macro: Option<f64>,
    pub noise_fraction: f64,
    pub ari: Option<f64>,
    pub metric_space: MetricSpace,
}

impl ValidationReport {
    pub fn voice_count(&self, t: VoiceType) -> usize {
        self.clusters.iter().filter(|c| c.voice_type == t).count()
    }
}

/// Full validation of `labels` over `data` (the metric space) and the
/// dataset's metadata. `ground_truth`, when given, adds the ARI.
pub fn validate(
    data: &Matrix,
    labels: &[i32],
    ds: &Dataset,
    opts: &ValidateOptions,
    ground_truth: Option<&[i32]>,
) -> Result<ValidationReport> {
    opts.validate()?;
    if labels.len() != ds.rows() || data.rows() != ds.rows() {
        return Err(Error::format(
            "validate",
            format!(
                "{} labels and {} metric rows for a dataset of {} rows",
                labels.len(),
                data.rows(),
                ds.rows()
            ),
        ));
    }
    let sil = silhouette(data, labels)?;
    let db = davies_bouldin(data, labels)?;
    let n_clusters = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let noise = labels.iter().filter(|&&l| l == NOISE).count();

    let external_labels: Vec<i32> = if opts.include_noise_in_external {
        labels
            .iter()
            .map(|&l| if l == NOISE { n_clusters as i32 } else { l })
            .collect()
    } else {
        labels.to_vec()
    };
    let attributes: Vec<String> = if opts.attributes.is_empty() {
        ds.attributes().map(str::to_string).collect()
    } else {
        opts.attributes.clone()
    };
    let mut per_attribute = BTreeMap::new();
    let mut baselines = BTreeMap::new();
    for attr in &attributes {
        let values = ds.row_attribute(attr)?;
        let baseline = label_distribution(ds, attr, opts.weighting)?;
        let mut per_cluster = purity_per_cluster(&external_labels, &values);
        let pct = prototypical_flags(
            &mut per_cluster,
            &baseline,
            opts.prototypical_rule,
            opts.prototypical_threshold,
        );
        baselines.insert(attr.clone(), baseline.clone());
        per_attribute.insert(
            attr.clone(),
            AttributeReport {
                average_purity: average_purity(&per_cluster, opts.purity_size_weighted),
                prototypical_pct: pct,
                baseline,
                per_cluster,
            },
        );
    }

    let mut cluster_ids: Vec<(usize, usize)> = per_attribute
        .values()
        .next()
        .map(|a| a.per_cluster.iter().map(|c| (c.cluster_id, c.size)).collect())
        .unwrap_or_default();
    cluster_ids.sort_unstable();
    let mut clusters = Vec::with_capacity(cluster_ids.len());
    for (id, size) in cluster_ids {
        let comps: Vec<(&str, &ClusterComposition)> = per_attribute
            .iter()
            .filter_map(|(a, r)| {
                r.per_cluster
                    .iter()
                    .find(|c| c.cluster_id == id)
                    .map(|c| (a.as_str(), c))
            })
            .collect();
        let over = over_represented(&comps, &baselines);
        clusters.push(ClusterVoice {
            cluster_id: id,
            size,
            voice_type: voice_type(&over),
            over_represented: over,
        });
    }
    for report in per_attribute.values_mut() {
        for c in report.per_cluster.iter_mut() {
            if let Some(v) = clusters.iter().find(|v| v.cluster_id == c.cluster_id) {
                c.voice_type = v.voice_type;
            }
        }
    }

    let apcs = if opts.apcs {
        Some(apcs(ds.embeddings().values(), opts.seed)?)
    } else {
        None
    };
    let f1 = if !ds.annotations().is_empty()
        && ds.annotations().iter().all(|r| r.predicted_label.is_some())
    {
        Some(f1_macro(ds.annotations())?)
    } else {
        None
    };
    let ari = ground_truth.map(|gt| adjusted_rand(labels, gt)).transpose()?;
    Ok(ValidationReport {
        n_clusters,
        rows: labels.len(),
        silhouette: sil,
        davies_bouldin: db,
        per_attribute,
        clusters,
        apcs,
        f1_macro: f1,
        noise_fraction: noise as f64 / labels.len() as f64,
        ari,
        metric_space: opts.metric_space,
    })
}

/// Aligned plain-text table with one row per `(setting, report)`: cluster
/// count, DB index, silhouette, then purity and prototypical share for each
/// attribute of the first report.
pub fn render_table(rows: &[(&str, &ValidationReport)]) -> String {
    let attrs: Vec<String> = rows
        .first()
        .map(|(_, r)| r.per_attribute.keys().cloned().collect())
        .unwrap_or_default();
    let mut header = vec![
        "Setting".to_string(),
        "# Clusters".into(),
        "DB Index".into(),
        "Silhouette".into(),
    ];
    header.extend(attrs.iter().map(|a| format!("Purity {a}")));
    header.extend(attrs.iter().map(|a| format!("Prototypical % {a}")));
    let mut cells = vec![header];
    for (name, r) in rows {
        let mut line = vec![
            name.to_string(),
            r.n_clusters.to_string(),
            fmt_metric(r.davies_bouldin),
            fmt_metric(r.silhouette),
        ];
        for a in &attrs {
            line.push(
                r.per_attribute
                    .get(a)
                    .map_or("-".into(), |x| fmt_metric(x.average_purity)),
            );
        }
        for a in &attrs {
            line.push(
                r.per_attribute
                    .get(a)
                    .map_or("-".into(), |x| format!("{:.1}", 100.0 * x.prototypical_pct)),
            );
        }
        cells.push(line);
    }
    let widths: Vec<usize> = (0..cells[0].len())
        .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, &w))| {
                if c == 0 {
                    format!("{v:<w$}")
                } else {
                    format!("{v:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}

fn fmt_metric(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "inf".into()
    }
}

/// Floats that may be infinite, written as JSON numbers or "inf"/"-inf".
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float '{other}'"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthpop::{generate, AttributeSampling, Categorical, SynthConfig, VoiceSpec};

    fn two_voice_dataset() -> crate::synthpop::SynthOutput {
        let cat = |p: &[(&str, f64)]| -> Categorical {
            p.iter().map(|(k, v)| (k.to_string(), *v)).collect()
        };
        let voice = |g: i32, x: f64, pol: &[(&str, f64)]| VoiceSpec {
            group_id: g,
            size: 10,
            centroid: vec![x, 0.0],
            spread: 0.1,
            label_policy: [(0, cat(&[("yes", 1.0)]))].into(),
            attribute_profile: [("political".to_string(), cat(pol))].into(),
        };
        generate(&SynthConfig {
            dim: 2,
            items: 3,
            topics: 1,
            voices: vec![
                voice(0, 0.0, &[("left", 1.0)]),
                voice(1, 20.0, &[("left", 0.2), ("right", 0.8)]),
            ],
            noise_rows: 0,
            seed: 4,
            item_offset_scale: 0.0,
            attribute_sampling: AttributeSampling::Quota,
        })
        .unwrap()
    }

    #[test]
    fn planted_voices_validate_cleanly() {
        let out = two_voice_dataset();
        let ds = &out.dataset;
        let report = validate(
            ds.embeddings().values(),
            &out.ground_truth,
            ds,
            &ValidateOptions::default(),
            Some(&out.ground_truth),
        )
        .unwrap();
        assert_eq!(report.ari, Some(1.0));
        assert!(report.silhouette > 0.95);
        let pol = &report.per_attribute["political"];
        assert!((pol.average_purity - 0.9).abs() < 1e-12);
        assert_eq!(pol.prototypical_pct, 1.0);
        assert_eq!(report.clusters[0].voice_type, VoiceType::Majority);
        assert_eq!(report.clusters[1].voice_type, VoiceType::Minority);
        let table = render_table(&[("planted", &report)]);
        assert!(table.contains("Purity political"));
        let json = serde_json::to_string(&report).unwrap();
        let back: ValidationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n_clusters, report.n_clusters);
    }

    #[test]
    fn infinite_db_round_trips() {
        #[derive(Serialize, Deserialize)]
        struct W(#[serde(with = "extended_float")] f64);
        let s = serde_json::to_string(&W(f64::INFINITY)).unwrap();
        assert_eq!(s, "\"inf\"");
        assert_eq!(serde_json::from_str::<W>(&s).unwrap().0, f64::INFINITY);
    }
}
