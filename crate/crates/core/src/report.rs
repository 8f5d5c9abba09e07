//! Human-facing reports: the metrics table, one card per cluster with its
//! metadata make-up and the rows nearest its centroid, and an optional SVG
//! scatter of the first two reduced dimensions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{sq_euclidean, Matrix};
use crate::validate::{render_table, OverRepresented, ValidationReport, VoiceType};
use crate::NOISE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOptions {
    /// Representative rows shown per cluster.
    pub examples: usize,
    /// Also write an SVG scatter of the reduced space.
    pub svg: bool,
    /// Item texts longer than this are truncated in the text report.
    pub max_text_chars: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            examples: 5,
            svg: false,
            max_text_chars: 160,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub row: usize,
    pub annotator_id: String,
    pub item_id: String,
    pub gold_label: String,
    pub distance: f64,
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCard {
    pub cluster_id: usize,
    pub size: usize,
    pub voice_type: VoiceType,
    pub over_represented: Vec<OverRepresented>,
    /// Attribute -> value shares within the cluster.
    pub attributes: BTreeMap<String, BTreeMap<String, f64>>,
    pub examples: Vec<Example>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// The resolved configuration that produced this report, as TOML.
    pub config: String,
    pub validation: ValidationReport,
    pub cards: Vec<ClusterCard>,
}

/// Assembles cards for every cluster in `validation`. `space` is the matrix
/// the clustering ran on; centroids and distances are taken there.
pub fn build_report(
    ds: &Dataset,
    space: &Matrix,
    labels: &[i32],
    validation: ValidationReport,
    opts: &ReportOptions,
    config: String,
) -> Result<Report> {
    if space.rows() != ds.rows() || labels.len() != ds.rows() {
        return Err(Error::format(
            "report",
            "labels, clustered space and dataset differ in row count",
        ));
    }
    let keys = ds.embeddings().row_index();
    let mut cards = Vec::with_capacity(validation.clusters.len());
    for voice in &validation.clusters {
        let members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == voice.cluster_id as i32)
            .map(|(i, _)| i)
            .collect();
        let mut examples = Vec::new();
        if !members.is_empty() {
            let centroid = space.select_rows(&members).mean();
            let mut by_dist: Vec<(f64, usize)> = members
                .iter()
                .map(|&i| (sq_euclidean(space.row(i), &centroid), i))
                .collect();
            by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(d, i) in by_dist.iter().take(opts.examples) {
                examples.push(Example {
                    row: i,
                    annotator_id: keys[i].annotator_id.clone(),
                    item_id: keys[i].item_id.clone(),
                    gold_label: ds.annotations()[i].gold_label.clone(),
                    distance: d.sqrt(),
                    text: ds.item_texts().get(&keys[i].item_id).cloned(),
                });
            }
        }
        let attributes = validation
            .per_attribute
            .iter()
            .filter_map(|(a, r)| {
                r.per_cluster
                    .iter()
                    .find(|c| c.cluster_id == voice.cluster_id)
                    .map(|c| (a.clone(), c.distribution.clone()))
            })
            .collect();
        cards.push(ClusterCard {
            cluster_id: voice.cluster_id,
            size: voice.size,
            voice_type: voice.voice_type,
            over_represented: voice.over_represented.clone(),
            attributes,
            examples,
        });
    }
    Ok(Report {
        config,
        validation,
        cards,
    })
}

/// Plain-text rendering: metrics table, then one card per cluster.
pub fn render_text(report: &Report, opts: &ReportOptions) -> String {
    let v = &report.validation;
    let mut out = String::new();
    let _ = writeln!(out, "{}", render_table(&[("result", v)]));
    let _ = writeln!(
        out,
        "rows {}  noise {:.1}%  metric space {:?}",
        v.rows,
        100.0 * v.noise_fraction,
        v.metric_space
    );
    if let Some(ari) = v.ari {
        let _ = writeln!(out, "ARI vs ground truth {ari:.4}");
    }
    if let Some(a) = v.apcs {
        let _ = writeln!(out, "APCS {:.4} (se {:.4}, {} pairs)", a.mean, a.std_error, a.pairs);
    }
    if let Some(f1) = v.f1_macro {
        let _ = writeln!(out, "macro F1 {f1:.4}");
    }
    for card in &report.cards {
        let _ = writeln!(
            out,
            "\n== cluster {} ({} rows) voice: {}",
            card.cluster_id, card.size, card.voice_type
        );
        for o in &card.over_represented {
            let _ = writeln!(
                out,
                "   over-represents {}={} ({:.1}% vs {:.1}% overall)",
                o.attribute,
                o.value,
                100.0 * o.share,
                100.0 * o.baseline_share
            );
        }
        for (attr, dist) in &card.attributes {
            let shares: Vec<String> = dist
                .iter()
                .map(|(k, p)| format!("{k} {:.1}%", 100.0 * p))
                .collect();
            let _ = writeln!(out, "   {attr}: {}", shares.join(", "));
        }
        for e in &card.examples {
            let _ = write!(
                out,
                "   - {} / {} [{}] d={:.3}",
                e.annotator_id, e.item_id, e.gold_label, e.distance
            );
            if let Some(t) = &e.text {
                let t: String = if t.chars().count() > opts.max_text_chars {
                    t.chars().take(opts.max_text_chars).chain("...".chars()).collect()
                } else {
                    t.clone()
                };
                let _ = write!(out, " \"{t}\"");
            }
            out.push('\n');
        }
    }
    out
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Scatter of the first two columns coloured by cluster; noise in light grey.
pub fn render_svg(space: &Matrix, labels: &[i32]) -> Result<String> {
    if space.cols() < 2 {
        return Err(Error::config("scatter export needs at least two dimensions"));
    }
    const SIZE: f64 = 600.0;
    const PAD: f64 = 20.0;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for r in space.iter_rows() {
        for c in 0..2 {
            lo[c] = lo[c].min(r[c]);
            hi[c] = hi[c].max(r[c]);
        }
    }
    let scale = |v: f64, c: usize| {
        let span = (hi[c] - lo[c]).max(1e-12);
        let t = (v - lo[c]) / span;
        if c == 0 {
            PAD + t * (SIZE - 2.0 * PAD)
        } else {
            SIZE - PAD - t * (SIZE - 2.0 * PAD)
        }
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (r, &l) in space.iter_rows().zip(labels) {
        let colour = if l == NOISE {
            "#d0d0d0"
        } else {
            PALETTE[l as usize % PALETTE.len()]
        };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{colour}" fill-opacity="0.7"/>"#,
            scale(r[0], 0),
            scale(r[1], 1)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
