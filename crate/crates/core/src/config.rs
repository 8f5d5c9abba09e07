//! The single TOML configuration file read by the CLI.
//!
//! Every section is optional and falls back to defaults. Unknown keys are
//! rejected, and errors name the offending key path (for example
//! `cluster.k: invalid type: string "x", expected usize`). See
//! `docs/config.md` for the schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterConfig;
use crate::corpus::EmbeddingFormat;
use crate::dimred::ReductionConfig;
use crate::error::{Error, Result};
use crate::report::ReportOptions;
use crate::sweep::SweepSpec;
use crate::synthpop::{FixtureProfile, SynthConfig};
use crate::validate::ValidateOptions;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub synth: SynthSection,
    pub reduce: ReductionConfig,
    pub cluster: ClusterConfig,
    pub validate: ValidateOptions,
    pub sweep: SweepSpec,
    pub report: ReportOptions,
}

/// Input files. Relative paths resolve against the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub embeddings: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    /// Optional `item_id,text` CSV used by reports.
    pub item_texts: Option<PathBuf>,
    /// Optional planted labels (`annotator_id,item_id,group_id`).
    pub ground_truth: Option<PathBuf>,
    /// Fail when an annotator has no metadata row instead of using "unknown".
    pub strict: bool,
    /// Declared label set; inferred from the annotations when absent.
    pub label_set: Option<Vec<String>>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            embeddings: None,
            annotations: None,
            metadata: None,
            item_texts: None,
            ground_truth: None,
            strict: true,
            label_set: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    #[default]
    Csv,
    Bin,
}

impl From<FileFormat> for EmbeddingFormat {
    fn from(f: FileFormat) -> Self {
        match f {
            FileFormat::Csv => EmbeddingFormat::Csv,
            FileFormat::Bin => EmbeddingFormat::RawBinary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Built-in fixture; ignored when `custom` is set.
    pub profile: FixtureProfile,
    pub seed: u64,
    pub format: FileFormat,
    /// Full generator configuration, replacing the built-in profile.
    pub custom: Option<SynthConfig>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            profile: FixtureProfile::Mbic,
            seed: 0,
            format: FileFormat::Csv,
            custom: None,
        }
    }
}

impl Config {
    /// Parses TOML text, then applies `key.path=value` overrides.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let de = toml::Value::Table(table);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(format!("{path}: {}", e.into_inner().message()))
        })
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    /// The resolved configuration as TOML, embedded in reports.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

/// Sets `a.b.c = value`, parsing `value` as a TOML value and falling back
/// to a plain string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{spec}' is not key=value")))?;
    let path = path.trim();
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(format!("override '{spec}' has an empty key")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("{path}: '{k}' is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Algorithm;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::from_toml_str("", &[]).unwrap(), Config::default());
    }

    #[test]
    fn errors_name_the_key_path() {
        let err = Config::from_toml_str("[cluster]\nk = \"three\"\n", &[]).unwrap_err();
        assert!(err.to_string().contains("cluster.k"), "{err}");
        let err = Config::from_toml_str("[reduce]\nneighbours = 5\n", &[]).unwrap_err();
        assert!(err.to_string().contains("reduce"), "{err}");
        assert!(err.to_string().contains("neighbours"), "{err}");
        assert_eq!(err.kind(), crate::ErrorKind::Usage);
    }

    #[test]
    fn overrides_win() {
        let c = Config::from_toml_str(
            "[cluster]\nk = 4\n",
            &["cluster.k=7".into(), "cluster.algorithm=gmm".into(), "sweep.k={ min = 2, max = 5 }".into()],
        )
        .unwrap();
        assert_eq!(c.cluster.k, 7);
        assert_eq!(c.cluster.algorithm, Algorithm::Gmm);
        assert_eq!(c.sweep.k.max, 5);
        assert!(Config::from_toml_str("", &["cluster.k".into()]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = Config::from_toml_str("[synth]\nprofile = \"gwsd\"\nseed = 3\n", &[]).unwrap();
        let back = Config::from_toml_str(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }
}
