//! Fixtures whose attribute marginals follow the published MBIC and GWSD
//! annotator demographics.
//!
//! Both fixtures plant three groups:
//!
//! | group | voice           | MBIC over-represents | GWSD over-represents        |
//! |-------|-----------------|----------------------|-----------------------------|
//! | 0     | majority        | left                 | democrat                    |
//! | 1     | minority        | right                | republican                  |
//! | 2     | inter-minority  | center + graduate    | republican + higher-degree  |
//!
//! Attribute values are assigned by exact quota, so dataset marginals are the
//! published ones rounded to whole annotators. Geometry (64 dimensions,
//! centroids 12 apart along separate axes, unit spread, item offsets of 0.4)
//! is a tuning choice.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{generate, AttributeSampling, Categorical, SynthConfig, SynthOutput, VoiceSpec};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureProfile {
    Mbic,
    Gwsd,
}

impl std::str::FromStr for FixtureProfile {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mbic" => Ok(Self::Mbic),
            "gwsd" => Ok(Self::Gwsd),
            other => Err(format!("unknown profile '{other}' (expected mbic or gwsd)")),
        }
    }
}

const DIM: usize = 64;
const ITEMS: usize = 24;
const TOPICS: usize = 4;
const SEPARATION: f64 = 12.0;
const SPREAD: f64 = 1.0;
const ITEM_OFFSET: f64 = 0.4;

/// `(value, per-group annotator counts)`.
type CountTable = &'static [(&'static str, [usize; 3])];

struct Profile {
    sizes: [usize; 3],
    attributes: &'static [(&'static str, CountTable)],
    labels: &'static [&'static str],
    /// Per group, per topic, weights over `labels`.
    policies: [[&'static [f64]; TOPICS]; 3],
}

const MBIC: Profile = Profile {
    sizes: [110, 55, 35],
    attributes: &[
        (
            "political",
            &[("left", [81, 5, 3]), ("right", [10, 40, 3]), ("center", [19, 10, 29])],
        ),
        (
            "education",
            &[("no-degree", [58, 29, 3]), ("bachelor", [47, 20, 3]), ("graduate", [5, 6, 29])],
        ),
        (
            "age",
            &[
                ("18-24", [22, 11, 7]),
                ("25-34", [22, 11, 7]),
                ("35-44", [22, 11, 7]),
                ("45-54", [22, 11, 7]),
                ("55+", [22, 11, 7]),
            ],
        ),
    ],
    labels: &["biased", "non-biased"],
    policies: [
        [&[0.7, 0.3], &[0.3, 0.7], &[0.6, 0.4], &[0.4, 0.6]],
        [&[0.3, 0.7], &[0.8, 0.2], &[0.4, 0.6], &[0.6, 0.4]],
        [&[0.5, 0.5], &[0.5, 0.5], &[0.8, 0.2], &[0.2, 0.8]],
    ],
};

const GWSD: Profile = Profile {
    sizes: [140, 40, 20],
    attributes: &[
        (
            "political",
            &[
                ("democrat", [85, 7, 0]),
                ("republican", [0, 25, 17]),
                ("independent", [47, 8, 3]),
                ("other", [8, 0, 0]),
            ],
        ),
        (
            "education",
            &[
                ("no-degree", [77, 23, 3]),
                ("bachelor", [63, 17, 0]),
                ("higher-degree", [0, 0, 17]),
            ],
        ),
        (
            "age",
            &[
                ("18-29", [35, 10, 5]),
                ("30-44", [35, 10, 5]),
                ("45-59", [35, 10, 5]),
                ("60+", [35, 10, 5]),
            ],
        ),
    ],
    labels: &["agree", "disagree", "neutral"],
    policies: [
        [&[0.6, 0.1, 0.3], &[0.7, 0.1, 0.2], &[0.5, 0.2, 0.3], &[0.6, 0.2, 0.2]],
        [&[0.2, 0.5, 0.3], &[0.3, 0.4, 0.3], &[0.1, 0.6, 0.3], &[0.2, 0.6, 0.2]],
        [&[0.5, 0.4, 0.1], &[0.6, 0.3, 0.1], &[0.3, 0.6, 0.1], &[0.4, 0.5, 0.1]],
    ],
};

/// The generator configuration behind [`make_paper_like_fixture`].
pub fn paper_like_config(profile: FixtureProfile, seed: u64) -> SynthConfig {
    let p = match profile {
        FixtureProfile::Mbic => &MBIC,
        FixtureProfile::Gwsd => &GWSD,
    };
    let voices = (0..3)
        .map(|g| {
            let mut centroid = vec![0.0; DIM];
            centroid[g] = SEPARATION;
            let attribute_profile = p
                .attributes
                .iter()
                .map(|(name, table)| {
                    let dist: Categorical = table
                        .iter()
                        .map(|(v, counts)| (v.to_string(), counts[g] as f64 / p.sizes[g] as f64))
                        .collect();
                    (name.to_string(), dist)
                })
                .collect();
            let label_policy: BTreeMap<usize, Categorical> = p.policies[g]
                .iter()
                .enumerate()
                .map(|(t, w)| {
                    let dist = p
                        .labels
                        .iter()
                        .zip(w.iter())
                        .map(|(l, p)| (l.to_string(), *p))
                        .collect();
                    (t, dist)
                })
                .collect();
            VoiceSpec {
                group_id: g as i32,
                size: p.sizes[g],
                centroid,
                spread: SPREAD,
                label_policy,
                attribute_profile,
            }
        })
        .collect();
    SynthConfig {
        dim: DIM,
        items: ITEMS,
        topics: TOPICS,
        voices,
        noise_rows: 0,
        seed,
        item_offset_scale: ITEM_OFFSET,
        attribute_sampling: AttributeSampling::Quota,
    }
}

/// Generates the MBIC- or GWSD-like fixture (200 annotators, 4,800 rows).
pub fn make_paper_like_fixture(profile: FixtureProfile, seed: u64) -> Result<SynthOutput> {
    generate(&paper_like_config(profile, seed))
}
