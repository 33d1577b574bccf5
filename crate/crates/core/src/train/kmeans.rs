//! k-means placement of inducing points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inputs::Inputs;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k` cluster centres of `x` from k-means++ seeding followed by Lloyd
/// iterations.
pub fn kmeans(x: &Inputs, k: usize, seed: u64, max_iters: usize) -> Result<Inputs> {
    let n = x.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot place {k} centres among {n} points")));
    }
    let dim = x.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres: Vec<f64> = x.row(rng.random_range(0..n)).to_vec();
    let mut nearest: Vec<f64> = x.rows().map(|r| dist2(r, &centres[..dim])).collect();
    while centres.len() < k * dim {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if u < *d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (nd, r) in nearest.iter_mut().zip(x.rows()) {
            *nd = nd.min(dist2(r, &c));
        }
        centres.extend(c);
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, r) in x.rows().enumerate() {
            let best = (0..k)
                .map(|c| dist2(r, &centres[c * dim..(c + 1) * dim]))
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)
                .unwrap_or(0);
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, r) in x.rows().enumerate() {
            counts[assign[i]] += 1;
            for d in 0..dim {
                sums[assign[i] * dim + d] += r[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    centres[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
    }
    Inputs::new(centres, dim)
}
