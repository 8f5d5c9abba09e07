//! Metadata composition of clusters: purity, prototypicality and voice type.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::NOISE;

/// Default prototypicality threshold on shares.
pub const PROTOTYPICAL_THRESHOLD: f64 = 0.10;

/// Differences within this distance of the threshold count as equal to it,
/// so a share of exactly `baseline + threshold` is not prototypical even when
/// the subtraction rounds up.
const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// How a cluster's attribute distribution is compared with the baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrototypicalRule {
    /// |majority share − baseline share of the same value| > threshold.
    #[default]
    MajorityShare,
    /// Total-variation distance between the two distributions > threshold.
    TotalVariation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoiceType {
    Majority,
    Minority,
    InterMinority,
    #[default]
    None,
}

impl std::fmt::Display for VoiceType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VoiceType::Majority => "majority",
            VoiceType::Minority => "minority",
            VoiceType::InterMinority => "inter-minority",
            VoiceType::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterComposition {
    pub cluster_id: usize,
    pub size: usize,
    pub majority_value: String,
    pub purity: f64,
    pub distribution: BTreeMap<String, f64>,
    pub prototypical: bool,
    pub voice_type: VoiceType,
}

/// Per-cluster value distributions for one attribute. `values[i]` is the
/// attribute value of row `i`; noise rows are skipped and so are clusters
/// left without rows.
pub fn purity_per_cluster(labels: &[i32], values: &[&str]) -> Vec<ClusterComposition> {
    let k = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let mut counts: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); k];
    for (&l, &v) in labels.iter().zip(values) {
        if l != NOISE {
            *counts[l as usize].entry(v).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .filter_map(|(id, c)| {
            let size: usize = c.values().sum();
            if size == 0 {
                log::warn!("cluster {id} has no non-noise rows; skipped");
                return None;
            }
            // First value with the highest count, so ties go to the
            // lexicographically smallest value.
            let (majority, top) = c.iter().fold(("", 0), |best, (v, &n)| {
                if n > best.1 {
                    (v, n)
                } else {
                    best
                }
            });
            Some(ClusterComposition {
                cluster_id: id,
                size,
                majority_value: majority.to_string(),
                purity: top as f64 / size as f64,
                distribution: c
                    .iter()
                    .map(|(v, &n)| (v.to_string(), n as f64 / size as f64))
                    .collect(),
                prototypical: false,
                voice_type: VoiceType::None,
            })
        })
        .collect()
}

/// Unweighted (or size-weighted) mean of per-cluster purity.
pub fn average_purity(per_cluster: &[ClusterComposition], size_weighted: bool) -> f64 {
    if per_cluster.is_empty() {
        return f64::NAN;
    }
    if size_weighted {
        let total: usize = per_cluster.iter().map(|c| c.size).sum();
        per_cluster
            .iter()
            .map(|c| c.purity * c.size as f64)
            .sum::<f64>()
            / total as f64
    } else {
        per_cluster.iter().map(|c| c.purity).sum::<f64>() / per_cluster.len() as f64
    }
}

/// Whether one cluster's distribution departs from the baseline.
pub fn is_prototypical(
    distribution: &BTreeMap<String, f64>,
    majority_value: &str,
    baseline: &BTreeMap<String, f64>,
    rule: PrototypicalRule,
    threshold: f64,
) -> bool {
    let base = |v: &str| baseline.get(v).copied().unwrap_or(0.0);
    match rule {
        PrototypicalRule::MajorityShare => {
            let share = distribution.get(majority_value).copied().unwrap_or(0.0);
            (share - base(majority_value)).abs() > threshold + BOUNDARY_TOLERANCE
        }
        PrototypicalRule::TotalVariation => {
            let mut tv = 0.0;
            for (v, &p) in distribution {
                tv += (p - base(v)).abs();
            }
            for (v, &q) in baseline {
                if !distribution.contains_key(v) {
                    tv += q;
                }
            }
            0.5 * tv > threshold + BOUNDARY_TOLERANCE
        }
    }
}

/// Sets `prototypical` on each cluster and returns the prototypical share.
pub fn prototypical_flags(
    per_cluster: &mut [ClusterComposition],
    baseline: &BTreeMap<String, f64>,
    rule: PrototypicalRule,
    threshold: f64,
) -> f64 {
    for c in per_cluster.iter_mut() {
        c.prototypical = is_prototypical(&c.distribution, &c.majority_value, baseline, rule, threshold);
    }
    if per_cluster.is_empty() {
        return 0.0;
    }
    per_cluster.iter().filter(|c| c.prototypical).count() as f64 / per_cluster.len() as f64
}

/// An over-represented value found in a prototypical cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverRepresented {
    pub attribute: String,
    pub value: String,
    pub share: f64,
    pub baseline_share: f64,
    /// Whether `value` is the most common value in the baseline.
    pub baseline_majority: bool,
}

/// Values a cluster over-represents: for each attribute on which it is
/// prototypical, its majority value if that value's share exceeds the
/// baseline share.
pub fn over_represented(
    compositions: &[(&str, &ClusterComposition)],
    baselines: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Vec<OverRepresented> {
    compositions
        .iter()
        .filter(|(_, c)| c.prototypical)
        .filter_map(|&(attr, c)| {
            let baseline = baselines.get(attr)?;
            let share = c.distribution.get(&c.majority_value).copied().unwrap_or(0.0);
            let base = baseline.get(&c.majority_value).copied().unwrap_or(0.0);
            if share <= base {
                return None;
            }
            let top = baseline.values().copied().fold(0.0, f64::max);
            Some(OverRepresented {
                attribute: attr.to_string(),
                value: c.majority_value.clone(),
                share,
                baseline_share: base,
                baseline_majority: base >= top,
            })
        })
        .collect()
}

/// Inter-minority when baseline-minority values are over-represented on two
/// or more attributes, minority on exactly one, majority when only
/// baseline-majority values are over-represented, none otherwise.
pub fn voice_type(over: &[OverRepresented]) -> VoiceType {
    let minority = over.iter().filter(|o| !o.baseline_majority).count();
    match minority {
        0 if over.is_empty() => VoiceType::None,
        0 => VoiceType::Majority,
        1 => VoiceType::Minority,
        _ => VoiceType::InterMinority,
    }
}
