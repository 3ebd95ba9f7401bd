//! Runtime scaling of kernel-matrix construction and t-SNE.
//!
//! Only the numeric computation is timed: the figures come from
//! [`KernelMatrix::compute_seconds`] and [`TsneResult::elapsed_seconds`],
//! which exclude I/O and serialization.
//!
//! [`TsneResult::elapsed_seconds`]: crate::tsne::TsneResult::elapsed_seconds

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelKind, KernelMatrix, KernelParams};
use crate::matrix::{self, Matrix};
use crate::tsne::{run_tsne, TsneConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub sizes: Vec<usize>,
    /// Median seconds per size for each kernel kind.
    pub kernel_series: BTreeMap<String, Vec<f64>>,
    /// Median t-SNE seconds per size (cosine kernel); empty if not measured.
    pub tsne_series: Vec<f64>,
    pub repeats: usize,
    pub threads: usize,
    pub environment: String,
}

impl ScalingReport {
    fn empty(sizes: &[usize], repeats: usize) -> Self {
        ScalingReport {
            sizes: sizes.to_vec(),
            kernel_series: BTreeMap::new(),
            tsne_series: Vec::new(),
            repeats,
            threads: rayon::current_num_threads(),
            environment: environment(),
        }
    }

    /// Long-format rows `series,n,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,n,seconds\n");
        let series = self
            .kernel_series
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain((!self.tsne_series.is_empty()).then_some(("tsne", &self.tsne_series)));
        for (name, values) in series {
            for (n, s) in self.sizes.iter().zip(values) {
                out.push_str(&format!("{name},{n},{s}\n"));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn environment() -> String {
    format!(
        "{}-{}, {} worker threads, {} available cores",
        std::env::consts::OS,
        std::env::consts::ARCH,
        rayon::current_num_threads(),
        std::thread::available_parallelism().map_or(1, usize::from)
    )
}

fn check_sizes(sizes: &[usize], available: usize, repeats: usize) -> Result<()> {
    if repeats < 1 {
        return Err(Error::param("repeats must be >= 1"));
    }
    if sizes.is_empty() {
        return Err(Error::param("no sizes given"));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s > available || s < 2) {
        return Err(Error::param(format!("size {s} outside 2..={available} available rows")));
    }
    Ok(())
}

/// One discarded warm-up, then the median of `repeats` timed runs.
fn median_timing(repeats: usize, mut run: impl FnMut() -> Result<f64>) -> Result<f64> {
    run()?;
    let times = (0..repeats).map(|_| run()).collect::<Result<Vec<_>>>()?;
    Ok(matrix::median(&times).expect("repeats >= 1"))
}

/// Times `kernel_matrix` on the first `size` rows for each size and kind.
pub fn bench_kernels(
    data: &EmbeddingMatrix,
    sizes: &[usize],
    kinds: &[KernelKind],
    repeats: usize,
    seed: u64,
) -> Result<ScalingReport> {
    check_sizes(sizes, data.n(), repeats)?;
    let mut report = ScalingReport::empty(sizes, repeats);
    for &kind in kinds {
        let params = KernelParams { seed, ..KernelParams::new(kind) };
        let mut series = Vec::with_capacity(sizes.len());
        for &n in sizes {
            let subset = data.head(n);
            series.push(median_timing(repeats, || Ok(kernel_matrix(&subset, &params)?.compute_seconds))?);
            log::info!("{kind} n={n}: {:.4}s", series.last().unwrap());
        }
        report.kernel_series.insert(kind.name().to_string(), series);
    }
    Ok(report)
}

/// Median t-SNE wall time per size on cosine kernel matrices of the first
/// `size` rows. Kernel construction is not part of the timing.
pub fn bench_tsne(data: &EmbeddingMatrix, sizes: &[usize], config: &TsneConfig, repeats: usize) -> Result<ScalingReport> {
    check_sizes(sizes, data.n(), repeats)?;
    let mut report = ScalingReport::empty(sizes, repeats);
    let params = KernelParams::new(KernelKind::Cosine);
    for &n in sizes {
        let k: KernelMatrix = kernel_matrix(&data.head(n), &params)?;
        report
            .tsne_series
            .push(median_timing(repeats, || Ok(run_tsne(&k, config)?.elapsed_seconds))?);
        log::info!("tsne n={n}: {:.4}s", report.tsne_series.last().unwrap());
    }
    Ok(report)
}

/// Least-squares slope of `ln(time)` against `ln(size)`.
pub fn loglog_slope(sizes: &[usize], seconds: &[f64]) -> Result<f64> {
    if sizes.len() < 2 || sizes.len() != seconds.len() {
        return Err(Error::param("slope needs at least two (size, time) pairs"));
    }
    if seconds.iter().any(|&s| s.is_nan() || s <= 0.0) {
        return Err(Error::param("timings must be positive"));
    }
    let xs: Vec<f64> = sizes.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = seconds.iter().map(|s| s.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Uniform [0, 1) data with ids `s0..`, for benchmarks without a corpus.
pub fn synthetic_embedding(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * d).map(|_| rng.random::<f64>()).collect();
    let rows = Matrix::from_vec(n, d, values).expect("sized above");
    EmbeddingMatrix::from_matrix(rows, (0..n).map(|i| format!("s{i}")).collect()).expect("sized above")
}
