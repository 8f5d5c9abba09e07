use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Magic bytes opening the binary embedding format.
pub const BINARY_MAGIC: &[u8; 8] = b"VOXEMB\0\0";
pub const BINARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub annotator_id: String,
    pub item_id: String,
}

impl RowKey {
    pub fn new(annotator_id: impl Into<String>, item_id: impl Into<String>) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            item_id: item_id.into(),
        }
    }
}

/// One behavioural embedding per (annotator, item) row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Matrix,
    row_index: Vec<RowKey>,
}

impl EmbeddingMatrix {
    /// Validates finiteness, key count and key uniqueness.
    pub fn new(values: Matrix, row_index: Vec<RowKey>) -> Result<Self> {
        if row_index.len() != values.rows() {
            return Err(Error::format(
                "embeddings",
                format!(
                    "row_index has {} keys for {} rows",
                    row_index.len(),
                    values.rows()
                ),
            ));
        }
        if let Some((row, col)) = values.first_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        let mut seen = HashSet::with_capacity(row_index.len());
        for key in &row_index {
            if !seen.insert(key) {
                return Err(Error::DuplicateKey {
                    annotator_id: key.annotator_id.clone(),
                    item_id: key.item_id.clone(),
                });
            }
        }
        Ok(Self { values, row_index })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row_index(&self) -> &[RowKey] {
        &self.row_index
    }

    pub fn into_parts(self) -> (Matrix, Vec<RowKey>) {
        (self.values, self.row_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingFormat {
    Csv,
    RawBinary,
}

impl EmbeddingFormat {
    /// `.bin` selects the binary format, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => EmbeddingFormat::RawBinary,
            _ => EmbeddingFormat::Csv,
        }
    }
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), format).map_err(|e| match e {
        Error::Format { context, message } if context == "embeddings" => Error::format(
            format!("{}", path.display()),
            message,
        ),
        other => other,
    })
}

pub fn save_embeddings(emb: &EmbeddingMatrix, path: &Path, format: EmbeddingFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_embeddings(emb, &mut w, format)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_embeddings<R: Read>(reader: R, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    match format {
        EmbeddingFormat::Csv => read_csv(reader),
        EmbeddingFormat::RawBinary => read_binary(reader),
    }
}

pub fn write_embeddings<W: Write>(
    emb: &EmbeddingMatrix,
    writer: W,
    format: EmbeddingFormat,
) -> Result<()> {
    match format {
        EmbeddingFormat::Csv => write_csv(emb, writer),
        EmbeddingFormat::RawBinary => write_binary(emb, writer),
    }
}

fn read_csv<R: Read>(reader: R) -> Result<EmbeddingMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut keys = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format("embeddings", e.to_string()))?;
        if rec.len() < 3 {
            return Err(Error::format(
                "embeddings",
                format!("line {}: expected annotator_id,item_id,v0,...", line + 1),
            ));
        }
        // An optional header is recognised by a non-numeric first value column.
        if line == 0 && rec[2].parse::<f64>().is_err() {
            continue;
        }
        let row = keys.len();
        let found = rec.len() - 2;
        let expected = *dim.get_or_insert(found);
        if found != expected {
            return Err(Error::DimensionMismatch {
                row,
                expected,
                found,
            });
        }
        for (col, cell) in rec.iter().skip(2).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(
                    "embeddings",
                    format!("row {row}, column {col}: cannot parse '{cell}'"),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            data.push(v);
        }
        keys.push(RowKey::new(&rec[0], &rec[1]));
    }
    let values = Matrix::from_vec(keys.len(), dim.unwrap_or(0), data)?;
    EmbeddingMatrix::new(values, keys)
}

fn write_csv<W: Write>(emb: &EmbeddingMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::format("embeddings", e.to_string());
    let mut header = vec!["annotator_id".to_string(), "item_id".to_string()];
    header.extend((0..emb.dim()).map(|j| format!("v{j}")));
    w.write_record(&header).map_err(to_err)?;
    let mut rec = Vec::with_capacity(emb.dim() + 2);
    for (key, row) in emb.row_index.iter().zip(emb.values.iter_rows()) {
        rec.clear();
        rec.push(key.annotator_id.clone());
        rec.push(key.item_id.clone());
        // `{}` on f64 prints the shortest string that parses back bit-exactly.
        rec.extend(row.iter().map(|v| format!("{v}")));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| Error::format("embeddings", e.to_string()))
}

// Binary layout, all integers little-endian:
//   magic[8] | version u32 | rows u64 | dim u64
//   rows x (u32 len, annotator bytes, u32 len, item bytes)
//   rows*dim f64, row-major
fn write_binary<W: Write>(emb: &EmbeddingMatrix, mut w: W) -> Result<()> {
    let io = |e| Error::io("<binary embeddings>", e);
    w.write_all(BINARY_MAGIC).map_err(io)?;
    w.write_all(&BINARY_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(emb.rows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(emb.dim() as u64).to_le_bytes()).map_err(io)?;
    for key in &emb.row_index {
        for s in [&key.annotator_id, &key.item_id] {
            w.write_all(&(s.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(s.as_bytes()).map_err(io)?;
        }
    }
    for v in emb.values.as_slice() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

fn read_binary<R: Read>(reader: R) -> Result<EmbeddingMatrix> {
    let mut r = BufReader::new(reader);
    let bad = |m: &str| Error::format("embeddings", m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != BINARY_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = read_u32(&mut r)?;
    if version != BINARY_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let rows = read_u64(&mut r)? as usize;
    let dim = read_u64(&mut r)? as usize;
    let mut keys = Vec::with_capacity(rows.min(1 << 20));
    for _ in 0..rows {
        let a = read_str(&mut r)?;
        let i = read_str(&mut r)?;
        keys.push(RowKey::new(a, i));
    }
    let total = rows
        .checked_mul(dim)
        .ok_or_else(|| bad("rows*dim overflows"))?;
    let mut data = Vec::with_capacity(total.min(1 << 24));
    let mut buf = [0u8; 8];
    for p in 0..total {
        r.read_exact(&mut buf).map_err(|_| bad("truncated values"))?;
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: p / dim,
                col: p % dim,
            });
        }
        data.push(v);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io("<binary embeddings>", e))? != 0 {
        return Err(bad("trailing bytes after values"));
    }
    EmbeddingMatrix::new(Matrix::from_vec(rows, dim, data)?, keys)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::format("embeddings", "truncated header"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::format("embeddings", "truncated header"))?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)
        .map_err(|_| Error::format("embeddings", "truncated row index"))?;
    String::from_utf8(b).map_err(|_| Error::format("embeddings", "row key is not UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_two_by_two_csv() {
        let emb = read_embeddings("a,i1,1.0,0.0\nb,i1,0.0,1.0\n".as_bytes(), EmbeddingFormat::Csv)
            .unwrap();
        assert_eq!((emb.rows(), emb.dim()), (2, 2));
        assert_eq!(emb.row_index()[1], RowKey::new("b", "i1"));
        assert_eq!(emb.values().row(1), &[0.0, 1.0]);
    }

    #[test]
    fn header_row_is_skipped() {
        let emb = read_embeddings(
            "annotator_id,item_id,v0\na,i1,2.5\n".as_bytes(),
            EmbeddingFormat::Csv,
        )
        .unwrap();
        assert_eq!(emb.rows(), 1);
    }

    #[test]
    fn nan_cell_is_named() {
        let err = read_embeddings("a,i1,1.0,0.0\nb,i1,0.0,NaN\n".as_bytes(), EmbeddingFormat::Csv)
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 1 }), "{err}");
        assert!(err.to_string().contains("row 1, column 1"));
    }

    #[test]
    fn ragged_csv_rejected() {
        let err = read_embeddings("a,i1,1.0,0.0\nb,i1,0.0\n".as_bytes(), EmbeddingFormat::Csv)
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { row: 1, expected: 2, found: 1 }));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let err = read_embeddings("a,i1,1.0\na,i1,2.0\n".as_bytes(), EmbeddingFormat::Csv)
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { .. }));
    }

    #[test]
    fn binary_rejects_bad_magic_and_truncation() {
        let emb = read_embeddings("a,i1,1.0,0.0\n".as_bytes(), EmbeddingFormat::Csv).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&emb, &mut buf, EmbeddingFormat::RawBinary).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_embeddings(&bad[..], EmbeddingFormat::RawBinary).is_err());
        assert!(read_embeddings(&buf[..buf.len() - 3], EmbeddingFormat::RawBinary).is_err());
        let mut nan = buf.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            read_embeddings(&nan[..], EmbeddingFormat::RawBinary),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    fn arb_matrix() -> impl Strategy<Value = EmbeddingMatrix> {
        (1usize..6, 1usize..5).prop_flat_map(|(rows, dim)| {
            proptest::collection::vec(
                prop_oneof![
                    any::<f64>().prop_filter("finite", |v| v.is_finite()),
                    -1e3f64..1e3,
                ],
                rows * dim,
            )
            .prop_map(move |data| {
                let keys = (0..rows)
                    .map(|i| RowKey::new(format!("ann,{i}"), format!("item \"{i}\"")))
                    .collect();
                EmbeddingMatrix::new(Matrix::from_vec(rows, dim, data).unwrap(), keys).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(emb in arb_matrix()) {
            for format in [EmbeddingFormat::Csv, EmbeddingFormat::RawBinary] {
                let mut buf = Vec::new();
                write_embeddings(&emb, &mut buf, format).unwrap();
                let back = read_embeddings(&buf[..], format).unwrap();
                prop_assert_eq!(back.row_index(), emb.row_index());
                let a: Vec<u64> = back.values().as_slice().iter().map(|v| v.to_bits()).collect();
                let b: Vec<u64> = emb.values().as_slice().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
        }
    }
}
