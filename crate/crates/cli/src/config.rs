//! Run configuration read from JSON.

use std::fs;
use std::path::{Path, PathBuf};

use iff_core::features::Mask;
use iff_core::kernels::{KernelFamily, SpectralMode};
use iff_core::precompute::DEFAULT_CHUNK_SIZE;
use iff_core::train::{Method, OptConfig};
use iff_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub data: DataConfig,
    pub kernel: KernelConfig,
    pub features: FeaturesConfig,
    pub method: Method,
    /// Number of k-means inducing points for `sgpr_kmeans`.
    pub inducing_points: usize,
    pub optimizer: OptimizerConfig,
    pub output: OutputConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            kernel: KernelConfig::default(),
            features: FeaturesConfig::default(),
            method: Method::Iff,
            inducing_points: 50,
            optimizer: OptimizerConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub csv: Option<PathBuf>,
    pub x_columns: Vec<String>,
    pub y_column: String,
    pub synthetic: Option<SyntheticConfig>,
    pub train_fraction: f64,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { csv: None, x_columns: Vec::new(), y_column: "y".into(), synthetic: None, train_fraction: 0.8, split_seed: 0 }
    }
}

/// GP prior draw on a centred box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n: usize,
    pub dim: usize,
    pub family: KernelFamily,
    pub lengthscale: f64,
    pub signal_variance: f64,
    /// Signal variance over noise variance.
    pub snr: f64,
    /// Width of the input box per dimension; `6 √(N/2)` in 1D and 5 otherwise when absent.
    pub width: Option<f64>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            dim: 1,
            family: KernelFamily::SquaredExponential,
            lengthscale: 1.0,
            signal_variance: 1.0,
            snr: 0.774,
            width: None,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn resolved_width(&self) -> f64 {
        self.width.unwrap_or(if self.dim == 1 { 6.0 * (self.n as f64 / 2.0).sqrt() } else { 5.0 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub spectral: SpectralMode,
    pub init: InitConfig,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { family: KernelFamily::SquaredExponential, spectral: SpectralMode::Closed, init: InitConfig::default() }
    }
}

/// Initial hyperparameters on the normalized scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub lengthscales: Option<Vec<f64>>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { lengthscales: None, signal_variance: 1.0, noise_variance: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Auto {
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSetting {
    Auto(Auto),
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturesConfig {
    pub per_dim_count: usize,
    pub eps: EpsSetting,
    pub mask: Mask,
    pub target_pairs: Option<usize>,
    pub chunk_size: usize,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self {
            per_dim_count: 40,
            eps: EpsSetting::Auto(Auto::Auto),
            mask: Mask::FullRectangular,
            target_pairs: None,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let o = OptConfig::default();
        Self { max_iters: o.max_iters, tol: o.tol, restarts: o.restarts, seed: o.seed }
    }
}

impl From<&OptimizerConfig> for OptConfig {
    fn from(o: &OptimizerConfig) -> Self {
        OptConfig { max_iters: o.max_iters, tol: o.tol, restarts: o.restarts, seed: o.seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Parses a config, rejecting every key the schema does not know.
pub fn parse(text: &str) -> Result<Config, Error> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let cfg: Config = serde_json::from_value(raw.clone()).map_err(|e| Error::Config(e.to_string()))?;
    // Every known field is echoed on serialization, so anything in the input
    // that is missing from the echo was ignored.
    let echo = serde_json::to_value(&cfg).map_err(|e| Error::Config(e.to_string()))?;
    let mut unknown = Vec::new();
    unknown_keys(&raw, &echo, "", &mut unknown);
    if !unknown.is_empty() {
        return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn unknown_keys(given: &Value, known: &Value, prefix: &str, out: &mut Vec<String>) {
    if let (Value::Object(g), Value::Object(k)) = (given, known) {
        for (key, v) in g {
            let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
            match k.get(key) {
                Some(kv) => unknown_keys(v, kv, &path, out),
                None => out.push(path),
            }
        }
    }
}

pub fn load(path: &Path) -> Result<Config, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse(&text)
}

impl Config {
    fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        match (&self.data.csv, &self.data.synthetic) {
            (Some(_), Some(_)) => return bad("data: give either csv or synthetic, not both".into()),
            (None, None) => return bad("data: one of csv or synthetic is required".into()),
            (Some(_), None) if self.data.x_columns.is_empty() => return bad("data.x_columns is empty".into()),
            _ => {}
        }
        if let Some(s) = &self.data.synthetic {
            if s.n == 0 || s.dim == 0 {
                return bad("data.synthetic needs n and dim positive".into());
            }
            let w = s.resolved_width();
            if ![s.lengthscale, s.signal_variance, s.snr, w].iter().all(|v| v.is_finite() && *v > 0.0) {
                return bad("data.synthetic lengthscale, signal_variance, snr and width must be positive".into());
            }
        }
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction <= 1.0) {
            return bad(format!("data.train_fraction {} outside (0, 1]", self.data.train_fraction));
        }
        let init = &self.kernel.init;
        let ls = init.lengthscales.clone().unwrap_or_default();
        if ls.iter().chain([&init.signal_variance, &init.noise_variance]).any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("kernel.init values must be positive".into());
        }
        if let EpsSetting::Values(v) = &self.features.eps {
            if v.is_empty() || v.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                return bad("features.eps must be \"auto\" or a list of positive values".into());
            }
        }
        if self.features.chunk_size == 0 {
            return bad("features.chunk_size must be positive".into());
        }
        if !(self.optimizer.tol.is_finite() && self.optimizer.tol >= 0.0) {
            return bad("optimizer.tol must be nonnegative".into());
        }
        Ok(())
    }

    pub fn x_columns(&self) -> Vec<String> {
        match &self.data.synthetic {
            Some(s) => (0..s.dim).map(|d| format!("x{d}")).collect(),
            None => self.data.x_columns.clone(),
        }
    }
}
