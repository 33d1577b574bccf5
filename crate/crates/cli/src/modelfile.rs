//! On-disk model: JSON metadata beside a binary summary cache.

use std::fs;
use std::path::{Path, PathBuf};

use iff_core::data::{Dataset, Normalization};
use iff_core::features::FrequencyGrid;
use iff_core::gp::DEFAULT_DENSE_LIMIT;
use iff_core::kernels::{KernelFamily, SpectralMode};
use iff_core::model::{Model, Posterior};
use iff_core::precompute::load_summary;
use iff_core::train::{HyperParams, Method};
use iff_core::{Error, Inputs};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.bin";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub method: Method,
    pub family: KernelFamily,
    pub spectral: SpectralMode,
    pub params: HyperParams,
    pub normalization: Normalization,
    pub x_columns: Vec<String>,
    pub y_column: String,
    pub grid: Option<FrequencyGrid>,
    /// Provenance hash of the summary the model was trained on.
    pub summary_hash: Option<String>,
    /// Summary cache path relative to the model file.
    pub summary_file: Option<PathBuf>,
    pub inducing: Option<Inputs>,
    /// Normalized training data for methods that predict from it.
    pub train: Option<Dataset>,
}

impl ModelFile {
    pub fn read(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path)?;
        let m: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format {}", m.format_version)));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Rebuilds the predictor. `summary_override` replaces the stored cache path.
    pub fn into_model(self, model_path: &Path, summary_override: Option<&Path>) -> Result<Model, Error> {
        let missing = |what: &str| Error::Format(format!("model file lacks {what}"));
        let posterior = match self.method {
            Method::Iff => {
                let grid = self.grid.ok_or_else(|| missing("grid"))?;
                let hash = self.summary_hash.ok_or_else(|| missing("summary_hash"))?;
                let path = match summary_override {
                    Some(p) => p.to_path_buf(),
                    None => {
                        let rel = self.summary_file.ok_or_else(|| missing("summary_file"))?;
                        model_path.parent().unwrap_or(Path::new(".")).join(rel)
                    }
                };
                let summary = load_summary(&path, &hash)?;
                Posterior::Iff { grid, spectral: self.spectral, summary }
            }
            Method::SgprKmeans => {
                let train = self.train.ok_or_else(|| missing("train"))?;
                Posterior::Sgpr { inducing: self.inducing.ok_or_else(|| missing("inducing"))?, x: train.x, y: train.y }
            }
            Method::Exact => {
                let train = self.train.ok_or_else(|| missing("train"))?;
                Posterior::Exact { x: train.x, y: train.y, dense_limit: DEFAULT_DENSE_LIMIT }
            }
        };
        Ok(Model { family: self.family, params: self.params, normalization: self.normalization, posterior })
    }
}
