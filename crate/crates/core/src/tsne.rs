//! t-SNE driven by a precomputed kernel matrix.
//!
//! The kernel is turned into squared distances
//! `D²[i][j] = K[i][i] + K[j][j] − 2·K[i][j]`, per-point bandwidths are
//! calibrated to a target perplexity, and the low-dimensional layout is
//! optimized by momentum gradient descent on KL(P‖Q) with a Student-t
//! low-dimensional affinity.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::matrix::{self, Matrix};

/// Floor applied to Q inside the KL logarithm.
pub const Q_FLOOR: f64 = 1e-12;
/// Bisection budget and bracket for per-point bandwidth search.
pub const SIGMA_SEARCH_STEPS: usize = 64;
pub const SIGMA_MIN: f64 = 1e-20;
pub const SIGMA_MAX: f64 = 1e20;
/// Tolerance on log-perplexity (entropy in nats).
pub const ENTROPY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub dim: usize,
    pub perplexity: f64,
    pub max_iter: usize,
    pub eta: f64,
    pub alpha_initial: f64,
    pub alpha_late: f64,
    /// Last iteration (1-based) that uses `alpha_initial`.
    pub alpha_switch_iter: usize,
    pub seed: u64,
    pub init_scale: f64,
    /// Multiplier on P during the first `alpha_switch_iter` iterations;
    /// 1.0 disables it.
    pub exaggeration: f64,
    /// Set when `perplexity` was clamped; holds the value originally asked for.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perplexity_requested: Option<f64>,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            dim: 2,
            perplexity: 250.0,
            max_iter: 1000,
            eta: 500.0,
            alpha_initial: 0.5,
            alpha_late: 0.8,
            alpha_switch_iter: 250,
            seed: 0,
            init_scale: 1e-4,
            exaggeration: 1.0,
            perplexity_requested: None,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.dim < 1 || self.dim >= n {
            return Err(Error::param(format!("output dimension must satisfy 1 <= dim < n (dim={}, n={n})", self.dim)));
        }
        if !(0.0 <= self.alpha_initial && self.alpha_initial <= self.alpha_late && self.alpha_late < 1.0) {
            return Err(Error::param("momentum must satisfy 0 <= alpha_initial <= alpha_late < 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        if !(self.perplexity >= 1.0 && self.perplexity.is_finite()) {
            return Err(Error::param(format!("perplexity must be >= 1 (got {})", self.perplexity)));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::param("init_scale must be positive"));
        }
        if !(self.exaggeration > 0.0 && self.exaggeration.is_finite()) {
            return Err(Error::param("exaggeration must be positive"));
        }
        if self.max_iter < 1 {
            return Err(Error::param("max_iter must be >= 1"));
        }
        Ok(())
    }

    /// Caps perplexity at `(n − 1) / 3`, remembering the requested value.
    pub fn clamped_for(&self, n: usize) -> TsneConfig {
        let cap = (n as f64 - 1.0) / 3.0;
        let mut out = self.clone();
        if self.perplexity > cap {
            log::warn!("perplexity {} clamped to {cap} for n={n}", self.perplexity);
            out.perplexity_requested = Some(self.perplexity_requested.unwrap_or(self.perplexity));
            out.perplexity = cap;
        }
        out
    }
}

/// Symmetric joint affinities over the input points.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub p: Matrix,
    pub per_point_sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    pub y: Matrix,
    pub ids: Vec<String>,
    pub kl_trace: Vec<f64>,
    pub config: TsneConfig,
    pub elapsed_seconds: f64,
}

impl TsneResult {
    pub fn final_kl(&self) -> f64 {
        *self.kl_trace.last().expect("max_iter >= 1")
    }
}

/// Kernel-induced squared distances, clamped at zero, with an exact zero
/// diagonal.
pub fn kernel_to_sq_distances(k: &Matrix) -> Result<Matrix> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::DimensionMismatch { left: n, right: k.ncols() });
    }
    let mut d2 = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j);
                d2.set(i, j, v.max(0.0));
            }
        }
    }
    Ok(d2)
}

/// Conditional distribution `p_{·|i}` for bandwidth `sigma` and its entropy
/// (nats). `row` holds distances with `row[i]` ignored.
fn conditional_row(row: &[f64], i: usize, sigma: f64, shift: f64, out: &mut [f64]) -> f64 {
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut z = 0.0;
    for (j, (&d, o)) in row.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == i { 0.0 } else { (-(d - shift) * scale).exp() };
        z += *o;
    }
    let mut h = 0.0;
    for o in out.iter_mut() {
        *o /= z;
        if *o > 0.0 {
            h -= *o * o.ln();
        }
    }
    h
}

/// Calibrates one row; returns (sigma, conditional probabilities).
fn calibrate_row(row: &[f64], i: usize, target_entropy: f64) -> (f64, Vec<f64>) {
    let n = row.len();
    let mut out = vec![0.0; n];
    let (mut lo_d, mut hi_d) = (f64::INFINITY, f64::NEG_INFINITY);
    for (j, &d) in row.iter().enumerate() {
        if j != i {
            lo_d = lo_d.min(d);
            hi_d = hi_d.max(d);
        }
    }
    if hi_d - lo_d <= 0.0 {
        log::warn!("point {i}: all distances identical; using a uniform neighbor distribution");
        let u = 1.0 / (n - 1) as f64;
        for (j, o) in out.iter_mut().enumerate() {
            *o = if j == i { 0.0 } else { u };
        }
        return (SIGMA_MAX, out);
    }
    let (mut lo, mut hi) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
    let mut sigma = 1.0;
    for _ in 0..SIGMA_SEARCH_STEPS {
        let mid = 0.5 * (lo + hi);
        sigma = mid.exp();
        let h = conditional_row(row, i, sigma, lo_d, &mut out);
        if (h - target_entropy).abs() < ENTROPY_TOL {
            return (sigma, out);
        }
        if h > target_entropy {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    conditional_row(row, i, sigma, lo_d, &mut out);
    (sigma, out)
}

/// Per-point bandwidth calibration followed by symmetrization
/// `P = (p_{j|i} + p_{i|j}) / 2n`.
pub fn hd_affinities(d2: &Matrix, perplexity: f64) -> Result<AffinityMatrix> {
    let n = d2.nrows();
    if n < 2 || d2.ncols() != n {
        return Err(Error::param("affinities need a square distance matrix with n >= 2"));
    }
    if perplexity.is_nan() || perplexity < 1.0 {
        return Err(Error::param(format!("perplexity must be >= 1 (got {perplexity})")));
    }
    if perplexity > (n - 1) as f64 {
        return Err(Error::param(format!(
            "perplexity {perplexity} is not attainable with n={n} points; clamp it to at most (n-1)/3 = {:.3}",
            (n as f64 - 1.0) / 3.0
        )));
    }
    let target = perplexity.ln();
    let rows: Vec<(f64, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| calibrate_row(d2.row(i), i, target))
        .collect();
    let mut p = Matrix::zeros(n, n);
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p.set(i, j, (rows[i].1[j] + rows[j].1[i]) / denom);
            }
        }
    }
    Ok(AffinityMatrix {
        p,
        per_point_sigma: rows.into_iter().map(|(s, _)| s).collect(),
    })
}

/// Student-t affinities; returns `(Q, N)` where `N[i][j] = 1/(1 + ‖y_i − y_j‖²)`.
pub fn ld_affinities(y: &Matrix) -> (Matrix, Matrix) {
    let n = y.nrows();
    let mut num = Matrix::zeros(n, n);
    let total = student_t_numerators(y, &mut num);
    let mut q = num.clone();
    for v in q.as_mut_slice() {
        *v /= total;
    }
    (q, num)
}

/// Fills `num` and returns its total.
fn student_t_numerators(y: &Matrix, num: &mut Matrix) -> f64 {
    let n = y.nrows();
    num.as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let yi = y.row(i);
            let mut s = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j {
                    0.0
                } else {
                    1.0 / (1.0 + matrix::sq_euclidean(yi, y.row(j)))
                };
                s += *v;
            }
            s
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

pub fn kl_divergence(p: &Matrix, q: &Matrix) -> f64 {
    let n = p.nrows();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p.get(i, j);
            if i != j && pij > 0.0 {
                kl += pij * (pij / q.get(i, j).max(Q_FLOOR)).ln();
            }
        }
    }
    kl
}

/// `grad_i = 4 Σ_j (P_ij − Q_ij) · N_ij · (y_i − y_j)`.
pub fn gradient(p: &Matrix, q: &Matrix, num: &Matrix, y: &Matrix) -> Matrix {
    let n = y.nrows();
    let dim = y.ncols();
    let mut grad = Matrix::zeros(n, dim);
    grad.as_mut_slice()
        .par_chunks_mut(dim)
        .enumerate()
        .for_each(|(i, g)| {
            let yi = y.row(i);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = 4.0 * (p.get(i, j) - q.get(i, j)) * num.get(i, j);
                for (gd, (a, b)) in g.iter_mut().zip(yi.iter().zip(y.row(j))) {
                    *gd += w * (a - b);
                }
            }
        });
    grad
}

/// KL and gradient from `P` and the current layout, reusing `num`.
fn objective_and_gradient(p: &Matrix, p_grad: &Matrix, y: &Matrix, num: &mut Matrix) -> (f64, Matrix) {
    let n = y.nrows();
    let dim = y.ncols();
    let total = student_t_numerators(y, num);
    let inv = 1.0 / total;
    let num = &*num;
    let mut grad = Matrix::zeros(n, dim);
    let kl_rows: Vec<f64> = grad
        .as_mut_slice()
        .par_chunks_mut(dim)
        .enumerate()
        .map(|(i, g)| {
            let yi = y.row(i);
            let mut kl = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let nij = num.get(i, j);
                let qij = nij * inv;
                let pij = p.get(i, j);
                if pij > 0.0 {
                    kl += pij * (pij / qij.max(Q_FLOOR)).ln();
                }
                let w = 4.0 * (p_grad.get(i, j) - qij) * nij;
                for (gd, (a, b)) in g.iter_mut().zip(yi.iter().zip(y.row(j))) {
                    *gd += w * (a - b);
                }
            }
            kl
        })
        .collect();
    (kl_rows.iter().sum(), grad)
}

fn recenter(y: &mut Matrix) {
    let (n, dim) = (y.nrows(), y.ncols());
    let mut mean = vec![0.0; dim];
    for row in y.rows_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    for i in 0..n {
        for (v, m) in y.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
}

/// Runs the optimizer from a seeded Gaussian start. Perplexity is clamped to
/// `(n − 1) / 3` and the clamp recorded in the returned config.
pub fn run_tsne(k: &KernelMatrix, config: &TsneConfig) -> Result<TsneResult> {
    let n = k.n();
    if n < 4 {
        return Err(Error::param(format!("t-SNE needs at least 4 points (got {n})")));
    }
    let config = config.clamped_for(n);
    config.validate(n)?;
    let start = Instant::now();

    let d2 = kernel_to_sq_distances(&k.values)?;
    let aff = hd_affinities(&d2, config.perplexity)?;
    let p = aff.p;
    let p_exaggerated = if config.exaggeration != 1.0 {
        let mut pe = p.clone();
        pe.as_mut_slice().iter_mut().for_each(|v| *v *= config.exaggeration);
        Some(pe)
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init: Vec<f64> = (0..n * config.dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * config.init_scale
        })
        .collect();
    let mut y = Matrix::from_vec(n, config.dim, init)?;
    let mut velocity = Matrix::zeros(n, config.dim);
    let mut num = Matrix::zeros(n, n);
    let mut kl_trace = Vec::with_capacity(config.max_iter);

    for t in 1..=config.max_iter {
        let early = t <= config.alpha_switch_iter;
        let p_grad = match (&p_exaggerated, early) {
            (Some(pe), true) => pe,
            _ => &p,
        };
        let (kl, grad) = objective_and_gradient(&p, p_grad, &y, &mut num);
        kl_trace.push(kl);
        let alpha = if early { config.alpha_initial } else { config.alpha_late };
        for ((v, g), yv) in velocity
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(y.as_mut_slice().iter_mut())
        {
            *v = alpha * *v - config.eta * g;
            *yv += *v;
        }
        recenter(&mut y);
        if y.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite coordinates at iteration {t}; the learning rate is likely too large"
            )));
        }
    }

    Ok(TsneResult {
        y,
        ids: k.ids.clone(),
        kl_trace,
        config,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
