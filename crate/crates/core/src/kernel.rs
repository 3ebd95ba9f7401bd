//! Pairwise kernels and n × n kernel matrices.
//!
//! Nine kernels are supported. Eight are closed-form functions of a vector
//! pair; the isolation kernel is data dependent and must be fitted first
//! (see [`isolation_fit`]).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};

/// Pair budget for the median-distance bandwidth heuristic.
pub const MEDIAN_SAMPLE_PAIRS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Cosine,
    Linear,
    Polynomial,
    Gaussian,
    Isolation,
    Laplacian,
    Sigmoid,
    Chi2,
    AdditiveChi2,
}

impl KernelKind {
    pub const ALL: [KernelKind; 9] = [
        KernelKind::Cosine,
        KernelKind::Linear,
        KernelKind::Polynomial,
        KernelKind::Gaussian,
        KernelKind::Isolation,
        KernelKind::Laplacian,
        KernelKind::Sigmoid,
        KernelKind::Chi2,
        KernelKind::AdditiveChi2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Cosine => "cosine",
            KernelKind::Linear => "linear",
            KernelKind::Polynomial => "polynomial",
            KernelKind::Gaussian => "gaussian",
            KernelKind::Isolation => "isolation",
            KernelKind::Laplacian => "laplacian",
            KernelKind::Sigmoid => "sigmoid",
            KernelKind::Chi2 => "chi2",
            KernelKind::AdditiveChi2 => "additive_chi2",
        }
    }

    /// Kernels whose diagonal is identically one.
    pub fn has_unit_diagonal(self) -> bool {
        matches!(
            self,
            KernelKind::Cosine
                | KernelKind::Gaussian
                | KernelKind::Laplacian
                | KernelKind::Chi2
                | KernelKind::Isolation
        )
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cosine" => KernelKind::Cosine,
            "linear" => KernelKind::Linear,
            "polynomial" | "poly" => KernelKind::Polynomial,
            "gaussian" | "rbf" => KernelKind::Gaussian,
            "isolation" => KernelKind::Isolation,
            "laplacian" => KernelKind::Laplacian,
            "sigmoid" => KernelKind::Sigmoid,
            "chi2" | "chi_squared" => KernelKind::Chi2,
            "additive_chi2" | "additive_chi_squared" => KernelKind::AdditiveChi2,
            _ => {
                return Err(Error::param(format!(
                    "--kind must be one of cosine, linear, polynomial, gaussian, isolation, \
                     laplacian, sigmoid, chi2, additive_chi2 (got '{s}')"
                )))
            }
        };
        Ok(kind)
    }
}

/// Kernel selection plus every tunable. Only the fields relevant to `kind`
/// are read. `None` bandwidths are resolved from the data by
/// [`KernelParams::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelParams {
    pub kind: KernelKind,
    /// Linear offset.
    pub c: f64,
    /// Polynomial coefficient.
    pub r: f64,
    pub degree: u32,
    /// Gaussian / Laplacian width; median heuristic when absent.
    pub sigma: Option<f64>,
    /// Sigmoid slope (default 1/d) or chi-squared scale (default 1).
    pub gamma: Option<f64>,
    /// Sigmoid intercept.
    pub c0: f64,
    pub psi: usize,
    pub t_trees: usize,
    pub seed: u64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            kind: KernelKind::Cosine,
            c: 0.0,
            r: 1.0,
            degree: 3,
            sigma: None,
            gamma: None,
            c0: 0.0,
            psi: 16,
            t_trees: 200,
            seed: 0,
        }
    }
}

impl KernelParams {
    pub fn new(kind: KernelKind) -> Self {
        KernelParams {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param(format!("sigma must be positive (got {s})")));
            }
        }
        if self.kind == KernelKind::Chi2 {
            if let Some(g) = self.gamma {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Error::param(format!("chi2 gamma must be positive (got {g})")));
                }
            }
        }
        if self.kind == KernelKind::Polynomial && self.degree < 1 {
            return Err(Error::param("polynomial degree must be >= 1"));
        }
        if self.kind == KernelKind::Isolation {
            if self.psi < 2 {
                return Err(Error::param("isolation psi must be >= 2"));
            }
            if self.t_trees < 1 {
                return Err(Error::param("isolation requires at least one partitioning"));
            }
        }
        Ok(())
    }

    /// Fills data-dependent defaults and, for the isolation kernel, fits the
    /// partition model on `data`.
    pub fn resolve(&self, data: &Matrix) -> Result<Kernel> {
        self.validate()?;
        Ok(match self.kind {
            KernelKind::Cosine => Kernel::Cosine,
            KernelKind::Linear => Kernel::Linear { c: self.c },
            KernelKind::Polynomial => Kernel::Polynomial {
                r: self.r,
                degree: self.degree,
            },
            KernelKind::Gaussian => Kernel::Gaussian {
                sigma: match self.sigma {
                    Some(s) => s,
                    None => median_bandwidth(data, matrix::euclidean, self.seed),
                },
            },
            KernelKind::Laplacian => Kernel::Laplacian {
                sigma: match self.sigma {
                    Some(s) => s,
                    None => median_bandwidth(data, matrix::manhattan, self.seed),
                },
            },
            KernelKind::Sigmoid => Kernel::Sigmoid {
                gamma: self.gamma.unwrap_or(1.0 / data.ncols().max(1) as f64),
                c0: self.c0,
            },
            KernelKind::Chi2 => Kernel::Chi2 {
                gamma: self.gamma.unwrap_or(1.0),
            },
            KernelKind::AdditiveChi2 => Kernel::AdditiveChi2,
            KernelKind::Isolation => {
                Kernel::Isolation(isolation_fit(data, self.psi, self.t_trees, self.seed)?)
            }
        })
    }
}

/// A kernel with every parameter fixed.
#[derive(Debug, Clone)]
pub enum Kernel {
    Cosine,
    Linear { c: f64 },
    Polynomial { r: f64, degree: u32 },
    Gaussian { sigma: f64 },
    Laplacian { sigma: f64 },
    Sigmoid { gamma: f64, c0: f64 },
    Chi2 { gamma: f64 },
    AdditiveChi2,
    Isolation(IsolationModel),
}

impl Kernel {
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Kernel::Cosine => cosine(x, y),
            Kernel::Linear { c } => linear(x, y, *c),
            Kernel::Polynomial { r, degree } => polynomial(x, y, *r, *degree),
            Kernel::Gaussian { sigma } => gaussian(x, y, *sigma),
            Kernel::Laplacian { sigma } => laplacian(x, y, *sigma),
            Kernel::Sigmoid { gamma, c0 } => sigmoid(x, y, *gamma, *c0),
            Kernel::Chi2 { gamma } => chi2(x, y, *gamma),
            Kernel::AdditiveChi2 => additive_chi2(x, y),
            Kernel::Isolation(model) => isolation_value(model, x, y),
        }
    }

    /// Parameters as they were actually used, defaults filled in.
    pub fn resolved_params(&self, base: &KernelParams) -> KernelParams {
        let mut p = base.clone();
        match self {
            Kernel::Gaussian { sigma } | Kernel::Laplacian { sigma } => p.sigma = Some(*sigma),
            Kernel::Sigmoid { gamma, .. } | Kernel::Chi2 { gamma } => p.gamma = Some(*gamma),
            _ => {}
        }
        p
    }
}

fn same_dim(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}

fn positive_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive (got {sigma})")));
    }
    Ok(())
}

fn nonnegative(v: &[f64]) -> Result<()> {
    match v.iter().position(|&a| a < 0.0) {
        Some(index) => Err(Error::NegativeEntry {
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

pub fn cosine(x: &[f64], y: &[f64]) -> Result<f64> {
    same_dim(x, y)?;
    let (nx, ny) = (matrix::norm(x), matrix::norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(matrix::dot(x, y) / (nx * ny))
}

pub fn linear(x: &[f64], y: &[f64], c: f64) -> Result<f64> {
    same_dim(x, y)?;
    Ok(matrix::dot(x, y) + c)
}

pub fn polynomial(x: &[f64], y: &[f64], r: f64, degree: u32) -> Result<f64> {
    same_dim(x, y)?;
    if degree < 1 {
        return Err(Error::param("polynomial degree must be >= 1"));
    }
    Ok((matrix::dot(x, y) + r).powi(degree as i32))
}

pub fn gaussian(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    same_dim(x, y)?;
    positive_sigma(sigma)?;
    Ok((-matrix::sq_euclidean(x, y) / (2.0 * sigma * sigma)).exp())
}

pub fn laplacian(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    same_dim(x, y)?;
    positive_sigma(sigma)?;
    Ok((-matrix::manhattan(x, y) / (2.0 * sigma * sigma)).exp())
}

pub fn sigmoid(x: &[f64], y: &[f64], gamma: f64, c0: f64) -> Result<f64> {
    same_dim(x, y)?;
    Ok((gamma * matrix::dot(x, y) + c0).tanh())
}

/// Exponentiated chi-squared similarity. Features where both entries are
/// zero contribute nothing.
pub fn chi2(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    same_dim(x, y)?;
    nonnegative(x)?;
    nonnegative(y)?;
    let mut acc = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let s = a + b;
        if s > 0.0 {
            acc += (a - b) * (a - b) / s;
        }
    }
    Ok((-gamma * acc).exp())
}

pub fn additive_chi2(x: &[f64], y: &[f64]) -> Result<f64> {
    same_dim(x, y)?;
    nonnegative(x)?;
    nonnegative(y)?;
    let mut acc = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let s = a + b;
        if s > 0.0 {
            acc += 2.0 * a * b / s;
        }
    }
    Ok(acc)
}

/// Median pairwise distance over at most [`MEDIAN_SAMPLE_PAIRS`] pairs.
/// Falls back to 1.0 when the median is zero.
pub fn median_bandwidth(data: &Matrix, dist: fn(&[f64], &[f64]) -> f64, seed: u64) -> f64 {
    let n = data.nrows();
    let total = n * n.saturating_sub(1) / 2;
    let mut dists = Vec::with_capacity(total.min(MEDIAN_SAMPLE_PAIRS));
    if total <= MEDIAN_SAMPLE_PAIRS {
        for i in 0..n {
            for j in (i + 1)..n {
                dists.push(dist(data.row(i), data.row(j)));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while dists.len() < MEDIAN_SAMPLE_PAIRS {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                dists.push(dist(data.row(i), data.row(j)));
            }
        }
    }
    match matrix::median(&dists) {
        Some(m) if m > 0.0 && m.is_finite() => m,
        _ => {
            log::warn!("median pairwise distance is zero; using bandwidth 1.0");
            1.0
        }
    }
}

/// Random Voronoi partitionings of the data used by the isolation kernel.
///
/// Each partitioning is defined by `psi` distinct reference points sampled
/// from the fitted data; a point belongs to the cell of its nearest
/// reference under squared Euclidean distance, ties going to the lower
/// reference index.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationModel {
    /// `t_trees` lists of `psi` row indices into the fitted data.
    pub partitionings: Vec<Vec<usize>>,
    /// Reference coordinates, `t_trees * psi` rows in partitioning order.
    references: Matrix,
    pub psi: usize,
    pub seed: u64,
}

impl IsolationModel {
    pub fn t_trees(&self) -> usize {
        self.partitionings.len()
    }

    pub fn dim(&self) -> usize {
        self.references.ncols()
    }

    /// Cell index of `x` in partitioning `t`.
    pub fn cell(&self, t: usize, x: &[f64]) -> usize {
        let base = t * self.psi;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for r in 0..self.psi {
            let d = matrix::sq_euclidean(self.references.row(base + r), x);
            if d < best_d {
                best_d = d;
                best = r;
            }
        }
        best
    }

    /// Cell of `x` in every partitioning.
    pub fn cells(&self, x: &[f64]) -> Vec<usize> {
        (0..self.t_trees()).map(|t| self.cell(t, x)).collect()
    }
}

pub fn isolation_fit(data: &Matrix, psi: usize, t_trees: usize, seed: u64) -> Result<IsolationModel> {
    let n = data.nrows();
    if psi < 2 {
        return Err(Error::param("isolation psi must be >= 2"));
    }
    if psi > n {
        return Err(Error::param(format!("isolation psi={psi} exceeds the {n} available points")));
    }
    if t_trees < 1 {
        return Err(Error::param("isolation requires at least one partitioning"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partitionings = Vec::with_capacity(t_trees);
    let mut refs = Vec::with_capacity(t_trees * psi * data.ncols());
    for _ in 0..t_trees {
        let idx = sample(&mut rng, n, psi).into_vec();
        for &i in &idx {
            refs.extend_from_slice(data.row(i));
        }
        partitionings.push(idx);
    }
    Ok(IsolationModel {
        partitionings,
        references: Matrix::from_vec(t_trees * psi, data.ncols(), refs)?,
        psi,
        seed,
    })
}

/// Fraction of partitionings in which `x` and `y` share a cell.
pub fn isolation_value(model: &IsolationModel, x: &[f64], y: &[f64]) -> Result<f64> {
    same_dim(x, y)?;
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: model.dim(),
        });
    }
    let same = (0..model.t_trees())
        .filter(|&t| model.cell(t, x) == model.cell(t, y))
        .count();
    Ok(same as f64 / model.t_trees() as f64)
}

/// Symmetric n × n similarity matrix and the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: Matrix,
    pub ids: Vec<String>,
    /// Parameters with data-dependent defaults filled in.
    pub params: KernelParams,
    /// Wall time of the numeric computation only.
    pub compute_seconds: f64,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

fn entry_err(i: usize, j: usize) -> impl Fn(Error) -> Error {
    move |e| Error::KernelEntry {
        i,
        j,
        source: Box::new(e),
    }
}

/// Computes the full kernel matrix. The upper triangle is evaluated (rows in
/// parallel) and mirrored, so the result is exactly symmetric.
pub fn kernel_matrix(data: &EmbeddingMatrix, params: &KernelParams) -> Result<KernelMatrix> {
    let x = &data.rows;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::EmptyInput("a kernel matrix needs at least 2 rows".into()));
    }
    let start = Instant::now();
    let kernel = params.resolve(x)?;

    // Dot-product kernels share one blocked Gram product; the rest are
    // evaluated pair by pair.
    let from_gram = |f: &dyn Fn(usize, usize, f64) -> f64| -> Vec<Vec<f64>> {
        let mut g = matrix::gram_upper(x);
        for (i, row) in g.iter_mut().enumerate() {
            for (off, v) in row.iter_mut().enumerate() {
                *v = f(i, i + off, *v);
            }
        }
        g
    };
    let upper: Vec<Vec<f64>> = match &kernel {
        Kernel::Cosine => {
            let norms: Vec<f64> = x.rows_iter().map(matrix::norm).collect();
            if let Some(i) = norms.iter().position(|&v| v == 0.0) {
                return Err(entry_err(i, i)(Error::ZeroNorm));
            }
            from_gram(&|i, j, g| if i == j { 1.0 } else { g / (norms[i] * norms[j]) })
        }
        Kernel::Linear { c } => from_gram(&|_, _, g| g + c),
        Kernel::Polynomial { r, degree } => from_gram(&|_, _, g| (g + r).powi(*degree as i32)),
        Kernel::Sigmoid { gamma, c0 } => from_gram(&|_, _, g| (gamma * g + c0).tanh()),
        Kernel::Isolation(model) => {
            let cells: Vec<Vec<usize>> = (0..n).into_par_iter().map(|i| model.cells(x.row(i))).collect();
            let t = model.t_trees() as f64;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    (i..n)
                        .map(|j| {
                            let same = cells[i].iter().zip(&cells[j]).filter(|(a, b)| a == b).count();
                            same as f64 / t
                        })
                        .collect()
                })
                .collect()
        }
        other => (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = x.row(i);
                (i..n)
                    .map(|j| other.value(xi, x.row(j)).map_err(entry_err(i, j)))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?,
    };

    let mut values = Matrix::zeros(n, n);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            values.set(i, j, v);
            values.set(j, i, v);
        }
    }
    let compute_seconds = start.elapsed().as_secs_f64();
    Ok(KernelMatrix {
        values,
        ids: data.ids.clone(),
        params: kernel.resolved_params(params),
        compute_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn emb(rows: &[Vec<f64>]) -> EmbeddingMatrix {
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        EmbeddingMatrix::from_matrix(Matrix::from_rows(rows).unwrap(), ids).unwrap()
    }

    #[test]
    fn cosine_cases() {
        assert_abs_diff_eq!(cosine(&[2.0, 3.0], &[2.0, 3.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let expected = 32.0 / (14f64.sqrt() * 77f64.sqrt());
        assert_abs_diff_eq!(cosine(&[1., 2., 3.], &[4., 5., 6.]).unwrap(), expected, epsilon = 1e-15);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm)));
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cosine_scale_invariance() {
        let x = [0.3, 1.7, 2.2, 0.0];
        let y = [1.1, 0.4, 0.9, 5.0];
        let xs: Vec<f64> = x.iter().map(|v| v * 3.5).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * 0.02).collect();
        assert_abs_diff_eq!(cosine(&x, &y).unwrap(), cosine(&xs, &ys).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn linear_and_polynomial() {
        assert_eq!(linear(&[1., 2.], &[3., 4.], 0.0).unwrap(), 11.0);
        assert_eq!(linear(&[1., 2.], &[3., 4.], 1.0).unwrap(), 12.0);
        assert_eq!(polynomial(&[1., 2.], &[3., 4.], 2.5, 1).unwrap(), linear(&[1., 2.], &[3., 4.], 2.5).unwrap());
        assert_eq!(polynomial(&[1., 1.], &[1., 1.], 0.0, 2).unwrap(), 4.0);
        assert_eq!(polynomial(&[1., 2.], &[2., 1.], 1.0, 3).unwrap(), 125.0);
        assert!(polynomial(&[1.], &[1.], 0.0, 0).is_err());
    }

    #[test]
    fn gaussian_and_laplacian() {
        assert_eq!(gaussian(&[1., 2.], &[1., 2.], 0.7).unwrap(), 1.0);
        // ‖x−y‖² = 2σ² with σ = 1: x−y = (1, 1)
        assert_abs_diff_eq!(gaussian(&[0., 0.], &[1., 1.], 1.0).unwrap(), (-1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian(&[0.], &[2.], 1.0).unwrap(), (-2f64).exp(), epsilon = 1e-15);
        assert!(gaussian(&[0.], &[2.], 0.0).is_err());

        assert_eq!(laplacian(&[1., 2.], &[1., 2.], 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(laplacian(&[0., 0.], &[1., 1.], 1.0).unwrap(), (-1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(laplacian(&[1., 4.], &[2., 2.], 1.0).unwrap(), (-1.5f64).exp(), epsilon = 1e-15);
        assert!(laplacian(&[0.], &[2.], -1.0).is_err());
    }

    #[test]
    fn sigmoid_cases() {
        assert_eq!(sigmoid(&[3., 4.], &[5., 6.], 0.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(sigmoid(&[1., 0.], &[1., 0.], 1.0, 0.0).unwrap(), 1f64.tanh(), epsilon = 1e-15);
        assert_eq!(sigmoid(&[1., 1.], &[1., 1.], 0.5, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn chi_squared_cases() {
        assert_eq!(chi2(&[1., 2., 0.], &[1., 2., 0.], 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(chi2(&[1., 0.], &[0., 1.], 1.0).unwrap(), (-2f64).exp(), epsilon = 1e-15);
        match chi2(&[1., -1.], &[0., 1.], 1.0) {
            Err(Error::NegativeEntry { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected NegativeEntry, got {other:?}"),
        }

        assert_eq!(additive_chi2(&[1., 2.], &[1., 2.]).unwrap(), 3.0);
        assert_eq!(additive_chi2(&[1., 0.], &[0., 4.]).unwrap(), 0.0);
        assert_eq!(additive_chi2(&[1., 3.], &[3., 1.]).unwrap(), 3.0);
        assert!(additive_chi2(&[-1.], &[1.]).is_err());
    }

    #[test]
    fn isolation_fit_uses_all_points_when_psi_is_n() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let m = isolation_fit(&x, 3, 4, 9).unwrap();
        for p in &m.partitionings {
            let mut s = p.clone();
            s.sort_unstable();
            assert_eq!(s, vec![0, 1, 2]);
        }
        assert!(isolation_fit(&x, 4, 1, 0).is_err());
    }

    #[test]
    fn isolation_is_deterministic_and_bounded() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin(), (i * i) as f64 % 7.0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let a = isolation_fit(&x, 5, 30, 42).unwrap();
        let b = isolation_fit(&x, 5, 30, 42).unwrap();
        assert_eq!(a, b);
        for p in &a.partitionings {
            let mut s = p.clone();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 5);
        }
        assert_eq!(isolation_value(&a, x.row(3), x.row(3)).unwrap(), 1.0);
        let single = isolation_fit(&x, 5, 1, 3).unwrap();
        let v = isolation_value(&single, x.row(0), x.row(7)).unwrap();
        assert!(v == 0.0 || v == 1.0);
        assert!(isolation_value(&a, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn isolation_separates_blobs() {
        let mut rows = Vec::new();
        for i in 0..15 {
            let t = i as f64 * 0.01;
            rows.push(vec![t, -t]);
        }
        for i in 0..15 {
            let t = i as f64 * 0.01;
            rows.push(vec![10.0 + t, 10.0 - t]);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = isolation_fit(&x, 2, 1000, 5).unwrap();
        let within = isolation_value(&m, x.row(0), x.row(10)).unwrap();
        let cross = isolation_value(&m, x.row(0), x.row(20)).unwrap();
        assert!(within > cross, "within {within} cross {cross}");
    }

    #[test]
    fn two_by_two_matrix_is_determined_by_one_value() {
        let e = emb(&[vec![1.0, 2.0], vec![2.0, 0.5]]);
        let k = kernel_matrix(&e, &KernelParams::new(KernelKind::Linear)).unwrap();
        assert_eq!(k.values.get(0, 1), k.values.get(1, 0));
        assert_eq!(k.values.get(0, 1), 3.0);
    }

    #[test]
    fn matrix_errors_carry_pair_context() {
        let e = emb(&[vec![1.0, 2.0], vec![0.0, 0.0]]);
        match kernel_matrix(&e, &KernelParams::new(KernelKind::Cosine)) {
            Err(Error::KernelEntry { i: 1, .. }) => {}
            other => panic!("expected KernelEntry, got {other:?}"),
        }
        let e = emb(&[vec![1.0, 2.0], vec![0.5, -3.0]]);
        match kernel_matrix(&e, &KernelParams::new(KernelKind::Chi2)) {
            Err(Error::KernelEntry { i: 0, j: 1, source }) => {
                assert!(matches!(*source, Error::NegativeEntry { index: 1, .. }))
            }
            other => panic!("expected KernelEntry, got {other:?}"),
        }
        assert!(kernel_matrix(&emb(&[vec![1.0]]), &KernelParams::default()).is_err());
    }

    #[test]
    fn resolved_params_record_defaults() {
        let e = emb(&[vec![0.0, 0.0], vec![3.0, 4.0], vec![6.0, 8.0]]);
        let k = kernel_matrix(&e, &KernelParams::new(KernelKind::Gaussian)).unwrap();
        // pairwise distances 5, 10, 5 -> median 5
        assert_eq!(k.params.sigma, Some(5.0));
        let k = kernel_matrix(&e, &KernelParams::new(KernelKind::Sigmoid)).unwrap();
        assert_eq!(k.params.gamma, Some(0.5));
    }

    #[test]
    fn kind_parsing() {
        for kind in KernelKind::ALL {
            assert_eq!(kind.name().parse::<KernelKind>().unwrap(), kind);
        }
        assert_eq!("additive-chi2".parse::<KernelKind>().unwrap(), KernelKind::AdditiveChi2);
        assert!("mystery".parse::<KernelKind>().is_err());
    }
}
