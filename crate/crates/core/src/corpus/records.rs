use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RowKey;
use crate::error::{Error, Result};

/// One annotator's label for one item, optionally with a model prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotator_id: String,
    pub item_id: String,
    pub gold_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorMetadata {
    pub annotator_id: String,
    pub attributes: BTreeMap<String, String>,
}

/// Reads JSONL annotations; blank lines are ignored.
pub fn read_annotations<R: Read>(reader: R) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::format("annotations", e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format("annotations", format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_annotations<W: Write>(records: &[AnnotationRecord], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<annotations>", e))?;
    }
    w.flush().map_err(|e| Error::io("<annotations>", e))
}

/// Reads metadata CSV: header row, first column `annotator_id`, one column per
/// attribute.
pub fn read_metadata<R: Read>(reader: R) -> Result<Vec<AnnotatorMetadata>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::format("metadata", e.to_string()))?
        .clone();
    if headers.get(0) != Some("annotator_id") {
        return Err(Error::format(
            "metadata",
            "first header column must be annotator_id",
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format("metadata", e.to_string()))?;
        let attributes = headers
            .iter()
            .zip(rec.iter())
            .skip(1)
            .map(|(h, v)| (h.to_string(), v.to_string()))
            .collect();
        out.push(AnnotatorMetadata {
            annotator_id: rec[0].to_string(),
            attributes,
        });
    }
    Ok(out)
}

pub fn write_metadata<W: Write>(records: &[AnnotatorMetadata], writer: W) -> Result<()> {
    let attrs: Vec<&String> = records
        .first()
        .map(|r| r.attributes.keys().collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::format("metadata", e.to_string());
    let mut header = vec!["annotator_id"];
    header.extend(attrs.iter().map(|s| s.as_str()));
    w.write_record(&header).map_err(err)?;
    for r in records {
        let mut row = vec![r.annotator_id.as_str()];
        for a in &attrs {
            row.push(r.attributes.get(*a).map_or("", |v| v.as_str()));
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::format("metadata", e.to_string()))
}

/// Optional `item_id,text` sidecar; text is passed through untouched.
pub fn load_item_texts(path: &Path) -> Result<BTreeMap<String, String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        if rec.len() < 2 {
            return Err(Error::format(
                path.display().to_string(),
                "expected item_id,text",
            ));
        }
        out.insert(rec[0].to_string(), rec[1].to_string());
    }
    Ok(out)
}

/// Writes `annotator_id,item_id,<column>` rows, one per key.
pub fn write_row_labels<W: Write>(
    keys: &[RowKey],
    labels: &[i32],
    column: &str,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(writer));
    let err = |e: csv::Error| Error::format(column, e.to_string());
    w.write_record(["annotator_id", "item_id", column])
        .map_err(err)?;
    for (k, g) in keys.iter().zip(labels) {
        w.write_record([k.annotator_id.as_str(), k.item_id.as_str(), &g.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::format(column, e.to_string()))
}

/// Reads a three-column `annotator_id,item_id,<label>` CSV and aligns it
/// with `keys`. Every key must be present.
pub fn read_row_labels(path: &Path, keys: &[RowKey]) -> Result<Vec<i32>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let mut rdr = csv::Reader::from_reader(file);
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(&ctx, e.to_string()))?;
        if rec.len() != 3 {
            return Err(Error::format(&ctx, "expected annotator_id,item_id,label"));
        }
        let g: i32 = rec[2]
            .trim()
            .parse()
            .map_err(|_| Error::format(&ctx, format!("bad label '{}'", &rec[2])))?;
        map.insert(RowKey::new(&rec[0], &rec[1]), g);
    }
    keys.iter()
        .map(|k| {
            map.get(k).copied().ok_or_else(|| {
                Error::format(
                    &ctx,
                    format!("no entry for ({}, {})", k.annotator_id, k.item_id),
                )
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotations_parse_optional_prediction() {
        let src = r#"{"annotator_id":"a","item_id":"i1","gold_label":"biased"}

{"annotator_id":"b","item_id":"i1","gold_label":"neutral","predicted_label":"biased"}
"#;
        let recs = read_annotations(src.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].predicted_label, None);
        assert_eq!(recs[1].predicted_label.as_deref(), Some("biased"));
    }

    #[test]
    fn bad_json_line_is_reported() {
        let err = read_annotations("{\"annotator_id\":1}\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn metadata_requires_annotator_column() {
        assert!(read_metadata("id,political\na,L\n".as_bytes()).is_err());
        let m = read_metadata("annotator_id,political,education\na,L,BA\n".as_bytes()).unwrap();
        assert_eq!(m[0].attributes["education"], "BA");
    }
}
