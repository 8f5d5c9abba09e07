use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingMatrix;
use super::records::{read_annotations, read_metadata, AnnotationRecord, AnnotatorMetadata};
use crate::error::{Error, Result};

/// Attribute value given to annotators that have no metadata record.
pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Clone, Default)]
pub struct JoinOptions {
    /// Fail when an annotator has no metadata instead of tagging it [`UNKNOWN`].
    pub strict: bool,
    /// Declared label vocabulary. Inferred from the annotations when absent.
    pub label_set: Option<Vec<String>>,
}

/// Analysis-ready join of embeddings, annotations and metadata.
///
/// Row `i` of every per-row view corresponds to row `i` of the embeddings.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct Dataset {
    embeddings: EmbeddingMatrix,
    annotations: Vec<AnnotationRecord>,
    metadata: BTreeMap<String, AnnotatorMetadata>,
    label_set: Vec<String>,
    vocabularies: BTreeMap<String, BTreeSet<String>>,
    item_texts: BTreeMap<String, String>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    /// Annotations aligned with the embedding rows.
    pub fn annotations(&self) -> &[AnnotationRecord] {
        &self.annotations
    }

    pub fn metadata(&self) -> &BTreeMap<String, AnnotatorMetadata> {
        &self.metadata
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.vocabularies.keys().map(|s| s.as_str())
    }

    pub fn vocabulary(&self, attribute: &str) -> Result<&BTreeSet<String>> {
        self.vocabularies
            .get(attribute)
            .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))
    }

    pub fn item_texts(&self) -> &BTreeMap<String, String> {
        &self.item_texts
    }

    pub fn with_item_texts(mut self, texts: BTreeMap<String, String>) -> Self {
        self.item_texts = texts;
        self
    }

    /// Attribute value of the annotator behind each row.
    pub fn row_attribute(&self, attribute: &str) -> Result<Vec<&str>> {
        self.vocabulary(attribute)?;
        Ok(self
            .embeddings
            .row_index()
            .iter()
            .map(|k| {
                self.metadata
                    .get(&k.annotator_id)
                    .and_then(|m| m.attributes.get(attribute))
                    .map_or(UNKNOWN, |v| v.as_str())
            })
            .collect())
    }
}

/// Joins embeddings with annotation and metadata files.
pub fn join_dataset(
    embeddings: EmbeddingMatrix,
    annotations_path: &Path,
    metadata_path: &Path,
    opts: &JoinOptions,
) -> Result<Dataset> {
    let anns = read_annotations(
        File::open(annotations_path).map_err(|e| Error::io(annotations_path, e))?,
    )?;
    let meta = read_metadata(File::open(metadata_path).map_err(|e| Error::io(metadata_path, e))?)?;
    Dataset::join(embeddings, anns, meta, opts)
}

impl Dataset {
    pub fn join(
        embeddings: EmbeddingMatrix,
        annotations: Vec<AnnotationRecord>,
        metadata: Vec<AnnotatorMetadata>,
        opts: &JoinOptions,
    ) -> Result<Dataset> {
        let label_set: Vec<String> = match &opts.label_set {
            Some(ls) => ls
                .iter()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            None => annotations
                .iter()
                .map(|a| a.gold_label.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };

        let mut by_key: HashMap<(&str, &str), usize> = HashMap::with_capacity(annotations.len());
        for (i, a) in annotations.iter().enumerate() {
            if by_key
                .insert((a.annotator_id.as_str(), a.item_id.as_str()), i)
                .is_some()
            {
                return Err(Error::DuplicateKey {
                    annotator_id: a.annotator_id.clone(),
                    item_id: a.item_id.clone(),
                });
            }
        }
        let mut aligned = Vec::with_capacity(embeddings.rows());
        for (row, key) in embeddings.row_index().iter().enumerate() {
            let Some(&i) = by_key.get(&(key.annotator_id.as_str(), key.item_id.as_str())) else {
                return Err(Error::MissingAnnotation {
                    row,
                    annotator_id: key.annotator_id.clone(),
                    item_id: key.item_id.clone(),
                });
            };
            let rec = &annotations[i];
            for label in std::iter::once(&rec.gold_label).chain(rec.predicted_label.as_ref()) {
                if label_set.binary_search(label).is_err() {
                    return Err(Error::UnknownLabel {
                        label: label.clone(),
                    });
                }
            }
            aligned.push(rec.clone());
        }
        let unmatched = annotations.len() - aligned.len();
        if unmatched > 0 {
            log::warn!("{unmatched} annotations have no embedding row and were dropped");
        }

        let mut meta_map = BTreeMap::new();
        let mut vocabularies: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for m in metadata {
            for (attr, value) in &m.attributes {
                vocabularies
                    .entry(attr.clone())
                    .or_default()
                    .insert(value.clone());
            }
            let id = m.annotator_id.clone();
            if meta_map.insert(id.clone(), m).is_some() {
                return Err(Error::format(
                    "metadata",
                    format!("annotator_id '{id}' appears more than once"),
                ));
            }
        }

        let missing: BTreeSet<&str> = embeddings
            .row_index()
            .iter()
            .map(|k| k.annotator_id.as_str())
            .filter(|id| !meta_map.contains_key(*id))
            .collect();
        if !missing.is_empty() {
            if opts.strict {
                return Err(Error::MissingMetadata(
                    missing.into_iter().map(String::from).collect(),
                ));
            }
            log::warn!(
                "{} annotators have no metadata; tagged '{UNKNOWN}'",
                missing.len()
            );
            for vocab in vocabularies.values_mut() {
                vocab.insert(UNKNOWN.to_string());
            }
            for id in missing {
                let attributes = vocabularies
                    .keys()
                    .map(|a| (a.clone(), UNKNOWN.to_string()))
                    .collect();
                meta_map.insert(
                    id.to_string(),
                    AnnotatorMetadata {
                        annotator_id: id.to_string(),
                        attributes,
                    },
                );
            }
        }

        Ok(Dataset {
            embeddings,
            annotations: aligned,
            metadata: meta_map,
            label_set,
            vocabularies,
            item_texts: BTreeMap::new(),
        })
    }
}

/// How dataset-level distributions count annotators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Each embedding row counts once, so prolific annotators weigh more.
    #[default]
    Row,
    /// Each distinct annotator present in the rows counts once.
    Annotator,
}

/// Share of each observed attribute value. Shares sum to one.
pub fn label_distribution(
    ds: &Dataset,
    attribute: &str,
    weighting: Weighting,
) -> Result<BTreeMap<String, f64>> {
    let values = ds.row_attribute(attribute)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    match weighting {
        Weighting::Row => {
            for v in values {
                *counts.entry(v.to_string()).or_default() += 1;
            }
        }
        Weighting::Annotator => {
            let mut seen = BTreeSet::new();
            for (key, v) in ds.embeddings.row_index().iter().zip(values) {
                if seen.insert(key.annotator_id.as_str()) {
                    *counts.entry(v.to_string()).or_default() += 1;
                }
            }
        }
    }
    let total: usize = counts.values().sum();
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total.max(1) as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{read_embeddings, EmbeddingFormat};

    fn emb(src: &str) -> EmbeddingMatrix {
        read_embeddings(src.as_bytes(), EmbeddingFormat::Csv).unwrap()
    }

    fn ann(a: &str, i: &str, l: &str) -> AnnotationRecord {
        AnnotationRecord {
            annotator_id: a.into(),
            item_id: i.into(),
            gold_label: l.into(),
            predicted_label: None,
        }
    }

    fn meta(a: &str, political: &str) -> AnnotatorMetadata {
        AnnotatorMetadata {
            annotator_id: a.into(),
            attributes: [("political".to_string(), political.to_string())].into(),
        }
    }

    #[test]
    fn joins_matching_rows() {
        let ds = Dataset::join(
            emb("a,i1,1.0,0.0\nb,i1,0.0,1.0\n"),
            vec![ann("b", "i1", "x"), ann("a", "i1", "y")],
            vec![meta("a", "L"), meta("b", "R")],
            &JoinOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.rows(), 2);
        // order follows the embeddings, not the annotation file
        assert_eq!(ds.annotations()[0].annotator_id, "a");
        assert_eq!(ds.label_set(), &["x", "y"]);
    }

    #[test]
    fn strict_join_lists_missing_annotators() {
        let err = Dataset::join(
            emb("a,i1,1.0,0.0\nb,i1,0.0,1.0\n"),
            vec![ann("a", "i1", "x"), ann("b", "i1", "x")],
            vec![meta("a", "L")],
            &JoinOptions {
                strict: true,
                ..Default::default()
            },
        )
        .unwrap_err();
        match err {
            Error::MissingMetadata(ids) => assert_eq!(ids, vec!["b".to_string()]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn lenient_join_tags_unknown() {
        let ds = Dataset::join(
            emb("a,i1,1.0,0.0\nb,i1,0.0,1.0\n"),
            vec![ann("a", "i1", "x"), ann("b", "i1", "x")],
            vec![meta("a", "L")],
            &JoinOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.row_attribute("political").unwrap(), vec!["L", UNKNOWN]);
        assert!(ds.vocabulary("political").unwrap().contains(UNKNOWN));
    }

    #[test]
    fn row_without_annotation_is_error() {
        let err = Dataset::join(
            emb("a,i1,1.0\nb,i1,0.0\n"),
            vec![ann("a", "i1", "x")],
            vec![meta("a", "L"), meta("b", "L")],
            &JoinOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingAnnotation { row: 1, .. }));
    }

    #[test]
    fn undeclared_label_is_error() {
        let err = Dataset::join(
            emb("a,i1,1.0\n"),
            vec![ann("a", "i1", "maybe")],
            vec![meta("a", "L")],
            &JoinOptions {
                strict: true,
                label_set: Some(vec!["yes".into(), "no".into()]),
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { .. }));
    }

    fn four_rows() -> Dataset {
        Dataset::join(
            emb("a,i1,0\nb,i1,1\nc,i1,2\nd,i1,3\na,i2,4\n"),
            ["a", "b", "c", "d"]
                .iter()
                .map(|a| ann(a, "i1", "x"))
                .chain([ann("a", "i2", "x")])
                .collect(),
            vec![meta("a", "L"), meta("b", "L"), meta("c", "R"), meta("d", "C")],
            &JoinOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn distribution_is_row_weighted_by_default() {
        let d = label_distribution(&four_rows(), "political", Weighting::Row).unwrap();
        assert_eq!(d["L"], 0.6);
        let d = label_distribution(&four_rows(), "political", Weighting::Annotator).unwrap();
        assert_eq!(d["L"], 0.5);
        assert_eq!(d["R"], 0.25);
        assert_eq!(d["C"], 0.25);
    }

    #[test]
    fn unknown_attribute_rejected() {
        assert!(matches!(
            label_distribution(&four_rows(), "age", Weighting::Row),
            Err(Error::UnknownAttribute(_))
        ));
    }
}
