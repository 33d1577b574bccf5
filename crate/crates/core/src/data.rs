//! Synthetic data, CSV ingestion, normalization and test metrics.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{PredictiveMarginals, DEFAULT_DENSE_LIMIT};
use crate::inputs::Inputs;
use crate::kernels::{Kernel, KernelFamily};
use crate::linalg::{gram_sym, Cholesky};
use crate::parallel::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Inputs,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Inputs, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!("{} inputs but {} targets", x.len(), y.len())));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn select(&self, idx: &[usize]) -> Self {
        Self { x: self.x.select(idx), y: idx.iter().map(|&i| self.y[i]).collect() }
    }
}

/// Draws `y = L ζ + σ ζ'` with `K_ff = L Lᵀ`.
pub fn sample_gp_prior(x: &Inputs, kernel: &Kernel, noise: f64, seed: u64) -> Result<Vec<f64>> {
    sample_gp_prior_limited(x, kernel, noise, seed, DEFAULT_DENSE_LIMIT)
}

pub fn sample_gp_prior_limited(x: &Inputs, kernel: &Kernel, noise: f64, seed: u64, limit: usize) -> Result<Vec<f64>> {
    if x.len() > limit {
        return Err(Error::InvalidArgument(format!(
            "{} points exceed the dense sampling limit of {limit}",
            x.len()
        )));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidArgument("noise variance must be nonnegative".into()));
    }
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeta: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let zeta2: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let f = if kernel.signal_variance() > 0.0 {
        let k = gram_sym(kernel, x, Execution::Sequential);
        let chol = Cholesky::factor(k.as_ref())?;
        crate::linalg::mat_vec(chol.l(), &zeta)
    } else {
        vec![0.0; n]
    };
    let sd = noise.sqrt();
    Ok(f.iter().zip(&zeta2).map(|(f, e)| f + sd * e).collect())
}

/// Approximate prior draw from `features` random Fourier features, for
/// inputs too many for a dense Cholesky. Only the squared exponential and
/// products of squared exponentials are supported.
pub fn sample_gp_prior_rff(x: &Inputs, kernel: &Kernel, noise: f64, features: usize, seed: u64) -> Result<Vec<f64>> {
    let se = match kernel.family() {
        KernelFamily::SquaredExponential => true,
        KernelFamily::Product(f) => f.iter().all(|b| *b == crate::kernels::BaseFamily::SquaredExponential),
        _ => false,
    };
    if !se {
        return Err(Error::UnsupportedFamily(format!("{} (random-feature sampling)", kernel.family().name())));
    }
    if features == 0 {
        return Err(Error::InvalidArgument("need at least one random feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Frequencies from the normalized density: N(0, 1/(2πλ)²) per dimension.
    let dim = kernel.dim();
    let omegas: Vec<Vec<f64>> = (0..features)
        .map(|_| {
            kernel
                .lengthscales()
                .iter()
                .map(|l| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z / (2.0 * PI * l)
                })
                .collect()
        })
        .collect();
    let weights: Vec<(f64, f64)> = (0..features)
        .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let scale = (kernel.signal_variance() / features as f64).sqrt();
    let sd = noise.sqrt();
    let mut y = Vec::with_capacity(x.len());
    for r in x.rows() {
        let mut f = 0.0;
        for (w, (a, b)) in omegas.iter().zip(&weights) {
            let t: f64 = 2.0 * PI * (0..dim).map(|d| w[d] * r[d]).sum::<f64>();
            let (s, c) = t.sin_cos();
            f += a * c + b * s;
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        y.push(scale * f + sd * e);
    }
    Ok(y)
}

/// Numeric columns of a headed CSV file, one inner vector per data row.
fn read_columns(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(Error::Format(format!("{} is empty", path.display())));
    }
    let idx = columns
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::Schema(format!("column '{name}' not found")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("row {row}: {e}")))?;
        let vals = idx
            .iter()
            .map(|&i| {
                let s = rec.get(i).ok_or_else(|| Error::Format(format!("row {row} is short")))?;
                s.trim().parse::<f64>().map_err(|_| Error::Format(format!("row {row}: cannot parse '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            bad.push(row);
        }
        rows.push(vals);
    }
    if !bad.is_empty() {
        return Err(Error::InvalidArgument(format!("non-finite values in rows {bad:?}")));
    }
    Ok(rows)
}

/// Reads a comma-separated file with a header row.
pub fn load_csv(path: &Path, x_columns: &[&str], y_column: &str) -> Result<Dataset> {
    if x_columns.is_empty() {
        return Err(Error::Schema("no input columns given".into()));
    }
    let mut columns = x_columns.to_vec();
    columns.push(y_column);
    let rows = read_columns(path, &columns)?;
    if rows.is_empty() {
        return Err(Error::Format(format!("{} has no data rows", path.display())));
    }
    let d = x_columns.len();
    let y = rows.iter().map(|r| r[d]).collect();
    let x = rows.iter().flat_map(|r| r[..d].iter().copied()).collect();
    Dataset::new(Inputs::new(x, d)?, y)
}

/// Reads input columns only; a file with a header and no rows gives no inputs.
pub fn load_inputs_csv(path: &Path, x_columns: &[&str]) -> Result<Inputs> {
    if x_columns.is_empty() {
        return Err(Error::Schema("no input columns given".into()));
    }
    let rows = read_columns(path, x_columns)?;
    Inputs::new(rows.into_iter().flatten().collect(), x_columns.len())
}

/// Affine maps taking raw data to zero mean and unit standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub x_shift: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_shift: f64,
    pub y_scale: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

impl Normalization {
    /// Statistics of `data`; fails on a constant column.
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::DegenerateInput("cannot normalize an empty dataset".into()));
        }
        let mut x_shift = Vec::new();
        let mut x_scale = Vec::new();
        for d in 0..data.x.dim() {
            let (m, s) = mean_std(&data.x.column(d));
            if !(s > 0.0) {
                return Err(Error::DegenerateInput(format!("input column {d} has zero variance")));
            }
            x_shift.push(m);
            x_scale.push(s);
        }
        let (y_shift, y_scale) = mean_std(&data.y);
        if !(y_scale > 0.0) {
            return Err(Error::DegenerateInput("targets have zero variance".into()));
        }
        Ok(Self { x_shift, x_scale, y_shift, y_scale })
    }

    pub fn identity(dim: usize) -> Self {
        Self { x_shift: vec![0.0; dim], x_scale: vec![1.0; dim], y_shift: 0.0, y_scale: 1.0 }
    }

    pub fn apply_x(&self, x: &Inputs) -> Result<Inputs> {
        if x.dim() != self.x_shift.len() {
            return Err(Error::Schema(format!(
                "inputs have dimension {}, normalization expects {}",
                x.dim(),
                self.x_shift.len()
            )));
        }
        let dim = x.dim();
        let data = x.as_slice().iter().enumerate().map(|(i, v)| (v - self.x_shift[i % dim]) / self.x_scale[i % dim]).collect();
        Inputs::new(data, dim)
    }

    pub fn apply_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.y_shift) / self.y_scale).collect()
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        Dataset::new(self.apply_x(&data.x)?, self.apply_y(&data.y))
    }

    pub fn invert_x(&self, x: &Inputs) -> Result<Inputs> {
        let dim = x.dim();
        let data = x.as_slice().iter().enumerate().map(|(i, v)| v * self.x_scale[i % dim] + self.x_shift[i % dim]).collect();
        Inputs::new(data, dim)
    }

    pub fn invert_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.y_scale + self.y_shift).collect()
    }

    /// Predictive marginals mapped back to the raw output scale.
    pub fn invert_predictions(&self, p: &PredictiveMarginals) -> PredictiveMarginals {
        PredictiveMarginals {
            mean: self.invert_y(&p.mean),
            variance: p.variance.iter().map(|v| v * self.y_scale * self.y_scale).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub normalization: Normalization,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Seeded random split, normalized with statistics of the training part.
pub fn normalize_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if data.len() < 5 {
        return Err(Error::InvalidArgument(format!("need at least 5 points to split, got {}", data.len())));
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {train_fraction} outside (0, 1]")));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * data.len() as f64).round() as usize).clamp(1, data.len());
    let (tr, te) = idx.split_at(n_train);
    if te.is_empty() {
        log::warn!("train fraction {train_fraction} leaves no test points");
    }
    let train_raw = data.select(tr);
    let normalization = Normalization::fit(&train_raw)?;
    Ok(Split {
        train: normalization.apply(&train_raw)?,
        test: normalization.apply(&data.select(te))?,
        normalization,
        train_indices: tr.to_vec(),
        test_indices: te.to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub nlpd: f64,
}

/// RMSE and mean negative log predictive density on the raw output scale.
///
/// `pred` holds predictive marginals of the observations (noise included)
/// on the normalized scale; `y_test` is on the raw scale.
pub fn metrics(pred: &PredictiveMarginals, y_test: &[f64], normalization: &Normalization) -> Result<Metrics> {
    if pred.len() != y_test.len() || pred.variance.len() != y_test.len() {
        return Err(Error::InvalidArgument("prediction and target lengths differ".into()));
    }
    if let Some(i) = pred.variance.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NumericalFailure(format!("nonpositive predictive variance at point {i}")));
    }
    if y_test.is_empty() {
        return Ok(Metrics { rmse: f64::NAN, nlpd: f64::NAN });
    }
    let raw = normalization.invert_predictions(pred);
    let n = y_test.len() as f64;
    let mut se = 0.0;
    let mut nlpd = 0.0;
    for ((m, v), y) in raw.mean.iter().zip(&raw.variance).zip(y_test) {
        let r = y - m;
        se += r * r;
        nlpd += 0.5 * (2.0 * PI * v).ln() + 0.5 * r * r / v;
    }
    Ok(Metrics { rmse: (se / n).sqrt(), nlpd: nlpd / n })
}
