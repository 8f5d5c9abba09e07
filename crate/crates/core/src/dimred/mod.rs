//! Dimensionality reduction: identity, PCA and UMAP.

mod pca;
pub mod umap;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use pca::{pca_fit, PcaModel};

use crate::corpus::{load_embeddings, save_embeddings, EmbeddingFormat, EmbeddingMatrix, RowKey};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    None,
    Pca,
    Umap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionConfig {
    pub method: ReductionMethod,
    pub n_components: usize,
    pub umap_neighbors: usize,
    pub umap_min_dist: f64,
    pub umap_epochs: usize,
    pub seed: u64,
    /// Experimental: skip this many leading principal components.
    pub pca_drop_top: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            method: ReductionMethod::Umap,
            n_components: 2,
            umap_neighbors: 90,
            umap_min_dist: 0.9,
            umap_epochs: 200,
            seed: 0,
            pca_drop_top: 0,
        }
    }
}

impl ReductionConfig {
    pub fn none() -> Self {
        Self {
            method: ReductionMethod::None,
            ..Self::default()
        }
    }

    pub fn pca(n_components: usize) -> Self {
        Self {
            method: ReductionMethod::Pca,
            n_components,
            ..Self::default()
        }
    }

    pub fn umap(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Checks the config against an input of `rows` x `dim`.
    pub fn validate(&self, rows: usize, dim: usize) -> Result<()> {
        if self.method == ReductionMethod::None {
            return Ok(());
        }
        if self.n_components == 0 {
            return Err(Error::config("reduction.n_components must be positive"));
        }
        if self.n_components >= dim {
            return Err(Error::config(format!(
                "reduction.n_components ({}) must be smaller than the input dimension ({dim})",
                self.n_components
            )));
        }
        match self.method {
            ReductionMethod::Pca => {
                if rows < 2 {
                    return Err(Error::Degenerate("PCA needs at least 2 rows".into()));
                }
                if self.pca_drop_top + self.n_components > dim {
                    return Err(Error::config(
                        "reduction.pca_drop_top + n_components exceeds the input dimension",
                    ));
                }
            }
            ReductionMethod::Umap => {
                if rows < 3 {
                    return Err(Error::Degenerate("UMAP needs at least 3 rows".into()));
                }
                if self.umap_neighbors < 2 || self.umap_neighbors >= rows {
                    return Err(Error::config(format!(
                        "reduction.umap_neighbors must lie in [2, rows) = [2, {rows})"
                    )));
                }
                if !(0.0..=1.0).contains(&self.umap_min_dist) {
                    return Err(Error::config("reduction.umap_min_dist must lie in [0, 1]"));
                }
                if self.umap_epochs == 0 {
                    return Err(Error::config("reduction.umap_epochs must be positive"));
                }
            }
            ReductionMethod::None => {}
        }
        Ok(())
    }
}

/// Reduced coordinates, row-aligned with the input embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMatrix {
    pub values: Matrix,
    pub row_index: Vec<RowKey>,
    pub provenance: ReductionConfig,
}

impl ReducedMatrix {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn to_embeddings(&self) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::new(self.values.clone(), self.row_index.clone())
    }

    /// Wraps an already-reduced matrix (e.g. loaded from disk).
    pub fn from_embeddings(emb: EmbeddingMatrix, provenance: ReductionConfig) -> Self {
        let (values, row_index) = emb.into_parts();
        Self {
            values,
            row_index,
            provenance,
        }
    }

    /// Writes the matrix in an embedding format plus a `<path>.json` provenance
    /// sidecar.
    pub fn save(&self, path: &Path, format: EmbeddingFormat) -> Result<PathBuf> {
        save_embeddings(&self.to_embeddings()?, path, format)?;
        let sidecar = sidecar_path(path);
        let f = File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &self.provenance)?;
        Ok(sidecar)
    }
}

impl ReducedMatrix {
    /// Reads a matrix written by [`ReducedMatrix::save`]. Without a sidecar
    /// the provenance is recorded as no reduction.
    pub fn load(path: &Path) -> Result<Self> {
        let emb = load_embeddings(path, EmbeddingFormat::from_path(path))?;
        let sidecar = sidecar_path(path);
        let provenance = if sidecar.exists() {
            let f = File::open(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            serde_json::from_reader(std::io::BufReader::new(f))?
        } else {
            ReductionConfig::none()
        };
        Ok(Self::from_embeddings(emb, provenance))
    }
}

/// `reduced.csv` -> `reduced.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Reduces `emb` according to `cfg`. Row count and order are preserved.
pub fn reduce(emb: &EmbeddingMatrix, cfg: &ReductionConfig) -> Result<ReducedMatrix> {
    cfg.validate(emb.rows(), emb.dim())?;
    let values = match cfg.method {
        ReductionMethod::None => emb.values().clone(),
        ReductionMethod::Pca => {
            let model = pca_fit(emb.values(), cfg.pca_drop_top + cfg.n_components)?;
            model.transform_range(emb.values(), cfg.pca_drop_top..cfg.pca_drop_top + cfg.n_components)
        }
        ReductionMethod::Umap => umap::umap_fit(emb.values(), cfg)?.embedding,
    };
    if let Some((row, col)) = values.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(ReducedMatrix {
        values,
        row_index: emb.row_index().to_vec(),
        provenance: cfg.clone(),
    })
}
