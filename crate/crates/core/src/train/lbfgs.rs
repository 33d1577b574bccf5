//! Limited-memory quasi-Newton ascent with finite-difference gradients.

use std::collections::VecDeque;
use std::time::Instant;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    /// Relative objective change below which the search stops.
    pub tol: f64,
    pub grad_tol: f64,
    pub memory: usize,
    /// Central-difference step on the parameters.
    pub fd_step: f64,
    /// Consecutive failed line searches tolerated before giving up.
    pub max_rejections: usize,
    /// Initial cap on the ∞-norm of a step.
    pub initial_radius: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-8,
            grad_tol: 1e-6,
            memory: 10,
            fd_step: 1e-4,
            max_rejections: 10,
            initial_radius: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// `(iteration, value)` at the start and after each accepted step.
    pub trace: Vec<(usize, f64)>,
    pub step_seconds: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Central-difference gradient.
pub fn fd_gradient<F: Fn(&[f64]) -> Result<f64>>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut p = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let fp = f(&p)?;
        p[i] = x[i] - h;
        let fm = f(&p)?;
        p[i] = x[i];
        let gi = (fp - fm) / (2.0 * h);
        if !gi.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite gradient in coordinate {i}")));
        }
        g.push(gi);
    }
    Ok(g)
}

fn finite(v: Result<f64>) -> Result<f64> {
    match v {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(x) => Err(Error::NumericalFailure(format!("objective evaluated to {x}"))),
        Err(e) => Err(e),
    }
}

/// Maximizes `f` from `x0`. Accepted steps never decrease the objective.
pub fn maximize<F: Fn(&[f64]) -> Result<f64>>(f: F, x0: &[f64], opts: &LbfgsOptions) -> Result<LbfgsResult> {
    // Work with the negated objective so the line search reads as descent.
    let neg = |x: &[f64]| finite(f(x)).map(|v| -v);
    let mut x = x0.to_vec();
    let mut fx = neg(&x)?;
    let mut trace = vec![(0, -fx)];
    let mut step_seconds = Vec::new();
    if opts.max_iters == 0 {
        return Ok(LbfgsResult { x, value: -fx, trace, step_seconds, converged: false, iterations: 0 });
    }
    let mut g = fd_gradient(&neg, &x, opts.fd_step)?;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut radius = opts.initial_radius;
    let mut rejections = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if inf_norm(&g) < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let started = Instant::now();

        let mut d = two_loop(&g, &memory);
        if dot(&d, &g) >= 0.0 {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let norm = inf_norm(&d);
        if norm > radius {
            d.iter_mut().for_each(|v| *v *= radius / norm);
        }
        let slope = dot(&d, &g);

        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..12 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if let Ok(ft) = neg(&trial) {
                if ft <= fx + 1e-4 * alpha * slope {
                    if let Ok(gt) = fd_gradient(&neg, &trial, opts.fd_step) {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }

        match accepted {
            None => {
                rejections += 1;
                radius *= 0.25;
                memory.clear();
                step_seconds.push(started.elapsed().as_secs_f64());
                if rejections >= opts.max_rejections {
                    break;
                }
            }
            Some((xn, fnew, gn)) => {
                rejections = 0;
                if alpha == 1.0 && norm >= radius {
                    radius = (2.0 * radius).min(8.0);
                }
                let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &yv);
                if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() && sy > 0.0 {
                    if memory.len() == opts.memory {
                        memory.pop_front();
                    }
                    memory.push_back((s, yv, 1.0 / sy));
                }
                let change = (fx - fnew).abs() / fx.abs().max(1.0);
                x = xn;
                fx = fnew;
                g = gn;
                trace.push((iterations, -fx));
                step_seconds.push(started.elapsed().as_secs_f64());
                if change < opts.tol {
                    converged = true;
                    break;
                }
            }
        }
    }
    if !converged && inf_norm(&g) < opts.grad_tol {
        converged = true;
    }
    Ok(LbfgsResult { x, value: -fx, trace, step_seconds, converged, iterations })
}

fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
