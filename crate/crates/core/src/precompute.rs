//! Data summaries for the feature objective and their on-disk cache.
//!
//! After one pass over the data, `ν² = yᵀy`, `ȳ = K_uf y` and
//! `Φ = K_uf K_ufᵀ` are all the objective needs.

use std::fs;
use std::io::Write;
use std::path::Path;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{feature_matrix_unchecked, FrequencyGrid};
use crate::inputs::Inputs;
use crate::parallel::Execution;

pub const DEFAULT_CHUNK_SIZE: usize = 10_000;

const MAGIC: &[u8; 8] = b"IFFSUMRY";
const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DataSummary {
    n: usize,
    nu2: f64,
    ybar: Vec<f64>,
    phi: Mat<f64>,
    provenance_hash: String,
}

impl DataSummary {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nu2(&self) -> f64 {
        self.nu2
    }

    pub fn ybar(&self) -> &[f64] {
        &self.ybar
    }

    pub fn phi(&self) -> &Mat<f64> {
        &self.phi
    }

    pub fn provenance_hash(&self) -> &str {
        &self.provenance_hash
    }

    pub fn feature_count(&self) -> usize {
        self.ybar.len()
    }

    /// Summary restricted to the listed features, keeping the provenance hash.
    pub fn select_features(&self, keep: &[usize]) -> Self {
        let k = keep.len();
        Self {
            n: self.n,
            nu2: self.nu2,
            ybar: keep.iter().map(|&i| self.ybar[i]).collect(),
            phi: Mat::from_fn(k, k, |i, j| self.phi[(keep[i], keep[j])]),
            provenance_hash: self.provenance_hash.clone(),
        }
    }
}

/// SHA-256 over the inputs, targets and grid, hex encoded.
pub fn provenance_hash(x: &Inputs, y: &[f64], grid: &FrequencyGrid) -> String {
    let mut h = Sha256::new();
    h.update((x.len() as u64).to_le_bytes());
    h.update((x.dim() as u64).to_le_bytes());
    for v in x.as_slice().iter().chain(y) {
        h.update(v.to_le_bytes());
    }
    h.update(grid.fingerprint());
    hex::encode(h.finalize())
}

/// Summaries with the default chunk size, run sequentially.
pub fn compute_summaries(x: &Inputs, y: &[f64], grid: &FrequencyGrid, chunk_size: usize) -> Result<DataSummary> {
    compute_summaries_with(x, y, grid, chunk_size, Execution::Sequential)
}

/// Accumulates the summaries chunk by chunk. Chunks may be evaluated
/// concurrently but are always added in ascending order, so the result does
/// not depend on the execution policy.
pub fn compute_summaries_with(
    x: &Inputs,
    y: &[f64],
    grid: &FrequencyGrid,
    chunk_size: usize,
    exec: Execution,
) -> Result<DataSummary> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no data".into()));
    }
    if chunk_size == 0 {
        return Err(Error::InvalidArgument("chunk size must be positive".into()));
    }
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{n} inputs but {} targets", y.len())));
    }
    if x.dim() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "inputs have dimension {}, grid has {}",
            x.dim(),
            grid.dim()
        )));
    }
    if let Some(i) = (0..n).find(|&i| !y[i].is_finite() || x.row(i).iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument(format!("non-finite value in row {i}")));
    }

    let m = grid.feature_count();
    let chunks = n.div_ceil(chunk_size);
    let batch = exec.workers().max(1);
    let mut phi = Mat::<f64>::zeros(m, m);
    let mut ybar = vec![0.0; m];
    let mut nu2 = 0.0;

    let mut first = 0;
    while first < chunks {
        let count = batch.min(chunks - first);
        let partials = exec.map(count, |i| {
            let c = first + i;
            let start = c * chunk_size;
            let end = (start + chunk_size).min(n);
            chunk_summary(grid, x, &y[start..end], start, end)
        });
        for (p_phi, p_ybar, p_nu2) in partials {
            phi += &p_phi;
            for (a, b) in ybar.iter_mut().zip(&p_ybar) {
                *a += b;
            }
            nu2 += p_nu2;
        }
        first += count;
    }
    crate::linalg::symmetrize(&mut phi);

    Ok(DataSummary { n, nu2, ybar, phi, provenance_hash: provenance_hash(x, y, grid) })
}

fn chunk_summary(grid: &FrequencyGrid, x: &Inputs, y: &[f64], start: usize, end: usize) -> (Mat<f64>, Vec<f64>, f64) {
    let f = feature_matrix_unchecked(grid, x, start, end);
    let m = f.nrows();
    let mut phi = Mat::zeros(m, m);
    matmul(phi.as_mut(), Accum::Replace, f.as_ref(), f.transpose(), 1.0, Par::Seq);
    let ybar = crate::linalg::mat_vec(f.as_ref(), y);
    let nu2 = y.iter().map(|v| v * v).sum();
    (phi, ybar, nu2)
}

/// Writes the summary in the little-endian cache format.
pub fn save_summary(summary: &DataSummary, path: &Path) -> Result<()> {
    let m = summary.feature_count();
    let mut buf = Vec::with_capacity(8 + 1 + 16 + 8 * (1 + m + m * m) + 32);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&(summary.n as u64).to_le_bytes());
    buf.extend_from_slice(&(m as u64).to_le_bytes());
    buf.extend_from_slice(&summary.nu2.to_le_bytes());
    for v in &summary.ybar {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for i in 0..m {
        for j in 0..m {
            buf.extend_from_slice(&summary.phi[(i, j)].to_le_bytes());
        }
    }
    let hash = hex::decode(&summary.provenance_hash)
        .ok()
        .filter(|h| h.len() == 32)
        .ok_or_else(|| Error::Format("provenance hash is not a SHA-256 digest".into()))?;
    buf.extend_from_slice(&hash);
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a cached summary, refusing it unless its hash equals `expected_hash`.
pub fn load_summary(path: &Path, expected_hash: &str) -> Result<DataSummary> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a summary cache file".into()));
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let n = r.u64()? as usize;
    let m = r.u64()? as usize;
    let expected_len = 8 + 1 + 16 + 8usize
        .checked_mul(1 + m + m.checked_mul(m).ok_or_else(|| Error::Format("bad dimensions".into()))?)
        .ok_or_else(|| Error::Format("bad dimensions".into()))?
        + 32;
    if bytes.len() != expected_len {
        return Err(Error::Format(format!("expected {expected_len} bytes, found {}", bytes.len())));
    }
    let nu2 = r.f64()?;
    let ybar = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let mut phi = Mat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            phi[(i, j)] = r.f64()?;
        }
    }
    let found = hex::encode(r.take(32)?);
    if found != expected_hash {
        return Err(Error::StaleCache { expected: expected_hash.to_string(), found });
    }
    Ok(DataSummary { n, nu2, ybar, phi, provenance_hash: found })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        if end > self.bytes.len() {
            return Err(Error::Format("cache file is truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_grid, Mask};

    #[test]
    fn single_point_example() {
        let g = build_grid(2, &[0.5], 1, Mask::FullRectangular, None).unwrap();
        let s = compute_summaries(&Inputs::from_1d(vec![1.0]), &[2.0], &g, DEFAULT_CHUNK_SIZE).unwrap();
        assert_eq!(s.nu2(), 4.0);
        assert!(s.ybar()[0].abs() < 1e-15 && (s.ybar()[1] - 2.0).abs() < 1e-15);
        assert!(s.phi()[(0, 0)].abs() < 1e-30 && s.phi()[(0, 1)].abs() < 1e-15);
        assert!((s.phi()[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_targets() {
        let g = build_grid(6, &[0.3], 1, Mask::FullRectangular, None).unwrap();
        let s = compute_summaries(&Inputs::from_1d(vec![0.1, 0.7, 2.0]), &[0.0; 3], &g, 2).unwrap();
        assert_eq!(s.nu2(), 0.0);
        assert!(s.ybar().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_non_finite_rows() {
        let g = build_grid(2, &[0.5], 1, Mask::FullRectangular, None).unwrap();
        let err = compute_summaries(&Inputs::from_1d(vec![0.0, f64::NAN]), &[1.0, 1.0], &g, 10).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let g = build_grid(4, &[0.2], 1, Mask::FullRectangular, None).unwrap();
        let x = Inputs::from_1d(vec![0.0, 1.0, 2.5]);
        let s = compute_summaries(&x, &[1.0, -1.0, 0.5], &g, 10).unwrap();
        save_summary(&s, &path).unwrap();
        assert_eq!(load_summary(&path, s.provenance_hash()).unwrap(), s);

        let other = provenance_hash(&x, &[1.0, -1.0, 0.5], &build_grid(4, &[0.3], 1, Mask::FullRectangular, None).unwrap());
        assert!(matches!(load_summary(&path, &other), Err(Error::StaleCache { .. })));

        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_summary(&path, s.provenance_hash()), Err(Error::Format(_))));
        fs::write(&path, &bytes[..20]).unwrap();
        assert!(matches!(load_summary(&path, s.provenance_hash()), Err(Error::Format(_))));
    }
}
