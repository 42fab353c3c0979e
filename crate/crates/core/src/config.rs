//! Run configuration, read from TOML. Every field has a default so a config
//! file only needs the data path and the number of clusters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::focalsets::FocalScheme;
use crate::io::DissimilarityFormat;
use crate::training::{BatchOptions, LossWeights, RmsPropOptions};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    #[default]
    Attribute,
    Relational,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub mode: DataMode,
    /// Headed attribute CSV.
    pub attributes: Option<PathBuf>,
    /// Columns of the attribute file that are not attributes.
    pub exclude_columns: Vec<String>,
    /// Dissimilarity CSV; computed from the attributes when absent.
    pub dissimilarities: Option<PathBuf>,
    pub dissimilarity_format: DissimilarityFormat,
    pub constraints: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub clusters: usize,
    pub scheme: FocalScheme,
    /// Hidden-layer widths; one layer of ⌈1.5 f⌉ units when absent.
    pub hidden_units: Option<Vec<usize>>,
    pub d0_quantile: f64,
    /// Centre and scale each network input column on the training data.
    pub standardize: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            clusters: 2,
            scheme: FocalScheme::PairsPlus,
            hidden_units: None,
            d0_quantile: 0.9,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Batch on all pairs up to `batch_threshold` objects, minibatch above.
    #[default]
    Auto,
    Dense,
    Sampled,
    Minibatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    pub mode: PairMode,
    /// Partners per object in sampled mode; also the size of the ranking set
    /// in minibatch mode (capped at `n − 1`).
    pub p: usize,
    pub batch_threshold: usize,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig { mode: PairMode::Auto, p: 100, batch_threshold: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub enabled: bool,
    pub nu: f64,
    /// Kernel coefficient in `exp(−σ‖x − y‖²)`; median heuristic when absent.
    pub sigma: Option<f64>,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { enabled: false, nu: 0.2, sigma: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    /// Number of components; required in relational mode.
    pub dims: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub batch: BatchOptions,
    pub minibatch: RmsPropOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub pairs: PairConfig,
    pub loss: LossWeights,
    pub svm: SvmConfig,
    pub pca: PcaConfig,
    pub optimizer: OptimizerConfig,
    pub restarts: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig::default(),
            model: ModelConfig::default(),
            pairs: PairConfig::default(),
            loss: LossWeights { lambda: 0.0, xi: 0.5, nu: 0.5 },
            svm: SvmConfig::default(),
            pca: PcaConfig::default(),
            optimizer: OptimizerConfig::default(),
            restarts: 5,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1),
            message: e.message().to_string(),
        })
    }

    /// Reads a config file; relative data paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse { path: path.to_path_buf(), line, message },
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            let fix = |p: &mut Option<PathBuf>| {
                if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                    *p = dir.join(&*p);
                }
            };
            fix(&mut cfg.data.attributes);
            fix(&mut cfg.data.dissimilarities);
            fix(&mut cfg.data.constraints);
            fix(&mut cfg.data.labels);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match self.data.mode {
            DataMode::Attribute if self.data.attributes.is_none() => {
                return Err(Error::invalid("attribute mode needs data.attributes"));
            }
            DataMode::Relational if self.data.dissimilarities.is_none() => {
                return Err(Error::invalid("relational mode needs data.dissimilarities"));
            }
            DataMode::Relational if self.pca.dims.is_none() => {
                return Err(Error::invalid("relational mode needs pca.dims"));
            }
            _ => {}
        }
        if !(self.model.d0_quantile > 0.0 && self.model.d0_quantile <= 1.0) {
            return Err(Error::invalid("d0_quantile must lie in (0, 1]"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        self.loss.validate()
    }
}
