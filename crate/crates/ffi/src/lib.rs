//! C ABI over `kernseq`.
//!
//! Objects are opaque handles created by `ks_*` constructors and released
//! with the matching `*_free`. Every fallible call returns a [`KsStatus`];
//! on failure, [`ks_last_error_message`] describes what went wrong on the
//! calling thread.
//!
//! Pointer arguments must be null or valid for the stated use: handles live
//! until freed, strings NUL-terminated, buffers at least as long as the
//! length passed with them. Null is reported as `NullPointer`, never
//! dereferenced. A handle must not be used after its `*_free`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kernseq::embed::{embed_dataset, EmbeddingConfig, EmbeddingMatrix, EmbeddingMethod};
use kernseq::kernel::{kernel_matrix, KernelKind, KernelMatrix, KernelParams};
use kernseq::seqio::{parse_fasta, Alphabet, UnknownPolicy};
use kernseq::tsne::{run_tsne, TsneConfig, TsneResult};
use kernseq::{Error, Matrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Input = 3,
    Numeric = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsKernelKind {
    Cosine = 0,
    Linear = 1,
    Polynomial = 2,
    Gaussian = 3,
    Isolation = 4,
    Laplacian = 5,
    Sigmoid = 6,
    Chi2 = 7,
    AdditiveChi2 = 8,
}

impl From<KsKernelKind> for KernelKind {
    fn from(k: KsKernelKind) -> Self {
        match k {
            KsKernelKind::Cosine => KernelKind::Cosine,
            KsKernelKind::Linear => KernelKind::Linear,
            KsKernelKind::Polynomial => KernelKind::Polynomial,
            KsKernelKind::Gaussian => KernelKind::Gaussian,
            KsKernelKind::Isolation => KernelKind::Isolation,
            KsKernelKind::Laplacian => KernelKind::Laplacian,
            KsKernelKind::Sigmoid => KernelKind::Sigmoid,
            KsKernelKind::Chi2 => KernelKind::Chi2,
            KsKernelKind::AdditiveChi2 => KernelKind::AdditiveChi2,
        }
    }
}

/// Kernel parameters. `sigma` and `gamma` at or below zero mean "pick the
/// data-dependent default".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KsKernelParams {
    pub kind: KsKernelKind,
    pub c: f64,
    pub r: f64,
    pub degree: u32,
    pub sigma: f64,
    pub gamma: f64,
    pub c0: f64,
    pub psi: usize,
    pub t_trees: usize,
    pub seed: u64,
}

impl From<&KsKernelParams> for KernelParams {
    fn from(p: &KsKernelParams) -> Self {
        let positive = |v: f64| (v > 0.0).then_some(v);
        KernelParams {
            kind: p.kind.into(),
            c: p.c,
            r: p.r,
            degree: p.degree,
            sigma: positive(p.sigma),
            gamma: positive(p.gamma),
            c0: p.c0,
            psi: p.psi,
            t_trees: p.t_trees,
            seed: p.seed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KsTsneConfig {
    pub dim: usize,
    pub perplexity: f64,
    pub max_iter: usize,
    pub eta: f64,
    pub alpha_initial: f64,
    pub alpha_late: f64,
    pub alpha_switch_iter: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub exaggeration: f64,
}

impl From<&KsTsneConfig> for TsneConfig {
    fn from(c: &KsTsneConfig) -> Self {
        TsneConfig {
            dim: c.dim,
            perplexity: c.perplexity,
            max_iter: c.max_iter,
            eta: c.eta,
            alpha_initial: c.alpha_initial,
            alpha_late: c.alpha_late,
            alpha_switch_iter: c.alpha_switch_iter,
            seed: c.seed,
            init_scale: c.init_scale,
            exaggeration: c.exaggeration,
            perplexity_requested: None,
        }
    }
}

pub struct KsEmbedding(EmbeddingMatrix);
pub struct KsKernelMatrix(KernelMatrix);
pub struct KsTsneResult(TsneResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(KsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => KsStatus::Io,
            _ => match e.exit_code() {
                2 => KsStatus::InvalidArgument,
                4 => KsStatus::Numeric,
                _ => KsStatus::Input,
            },
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: KsStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> KsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            KsStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(KsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string_arg(p: *const c_char, what: &str) -> Result<String, Failure> {
    let s = borrow(p, what)?;
    CStr::from_ptr(s)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(KsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    borrow(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(fail(KsStatus::NullPointer, "output buffer is null"));
    }
    if len < src.len() {
        return Err(fail(KsStatus::InvalidArgument, format!("buffer holds {len} values, {} needed", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(KsStatus::NullPointer, "output handle pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ks_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ks_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a FASTA file and embeds it. `method` is one of `kmer`,
/// `minimizer`, `spaced` or `ohe`; `alphabet` may be null for DNA. Zero
/// for `k`, `m` or `g` selects the method default.
#[no_mangle]
pub unsafe extern "C" fn ks_embedding_from_fasta(
    path: *const c_char,
    alphabet: *const c_char,
    method: *const c_char,
    k: usize,
    m: usize,
    g: usize,
    out: *mut *mut KsEmbedding,
) -> KsStatus {
    guard(|| {
        let path = PathBuf::from(string_arg(path, "path")?);
        let alphabet = if alphabet.is_null() {
            Alphabet::dna()
        } else {
            Alphabet::from_spec(&string_arg(alphabet, "alphabet")?)?
        };
        let method = string_arg(method, "method")?;
        let nz = |v: usize| (v > 0).then_some(v);
        let method = EmbeddingMethod::from_parts(&method, nz(k), nz(m), nz(g), None)?;
        let seqs = parse_fasta(&path, &alphabet, UnknownPolicy::default())?;
        let e = embed_dataset(&seqs, &EmbeddingConfig::new(alphabet, method))?;
        store(out, KsEmbedding(e))
    })
}

/// Wraps a row-major `n × d` buffer as an embedding with ids `r0, r1, …`.
#[no_mangle]
pub unsafe extern "C" fn ks_embedding_from_rows(
    data: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut KsEmbedding,
) -> KsStatus {
    guard(|| {
        let len = n.checked_mul(d).ok_or_else(|| fail(KsStatus::InvalidArgument, "n * d overflows"))?;
        let values = slice_arg(data, len, "data")?.to_vec();
        let ids = (0..n).map(|i| format!("r{i}")).collect();
        let e = EmbeddingMatrix::from_matrix(Matrix::from_vec(n, d, values)?, ids)?;
        store(out, KsEmbedding(e))
    })
}

#[no_mangle]
pub unsafe extern "C" fn ks_embedding_free(e: *mut KsEmbedding) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Row count, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ks_embedding_rows(e: *const KsEmbedding) -> usize {
    e.as_ref().map_or(0, |e| e.0.n())
}

/// Feature count, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ks_embedding_dim(e: *const KsEmbedding) -> usize {
    e.as_ref().map_or(0, |e| e.0.dim())
}

/// Copies the row-major values into `buf`, which must hold `rows * dim`.
#[no_mangle]
pub unsafe extern "C" fn ks_embedding_copy_data(e: *const KsEmbedding, buf: *mut f64, len: usize) -> KsStatus {
    guard(|| copy_out(borrow(e, "embedding")?.0.rows.as_slice(), buf, len))
}

#[no_mangle]
pub extern "C" fn ks_kernel_params_default(kind: KsKernelKind) -> KsKernelParams {
    let p = KernelParams::new(kind.into());
    KsKernelParams {
        kind,
        c: p.c,
        r: p.r,
        degree: p.degree,
        sigma: 0.0,
        gamma: 0.0,
        c0: p.c0,
        psi: p.psi,
        t_trees: p.t_trees,
        seed: p.seed,
    }
}

#[no_mangle]
pub unsafe extern "C" fn ks_kernel_matrix(
    e: *const KsEmbedding,
    params: *const KsKernelParams,
    out: *mut *mut KsKernelMatrix,
) -> KsStatus {
    guard(|| {
        let e = borrow(e, "embedding")?;
        let params = KernelParams::from(borrow(params, "params")?);
        let k = kernel_matrix(&e.0, &params)?;
        store(out, KsKernelMatrix(k))
    })
}

/// Side length `n`, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ks_kernel_n(k: *const KsKernelMatrix) -> usize {
    k.as_ref().map_or(0, |k| k.0.n())
}

/// Copies the `n × n` row-major values into `buf`.
#[no_mangle]
pub unsafe extern "C" fn ks_kernel_copy_values(k: *const KsKernelMatrix, buf: *mut f64, len: usize) -> KsStatus {
    guard(|| copy_out(borrow(k, "kernel")?.0.values.as_slice(), buf, len))
}

/// Writes the matrix, binary for `.kskm`/`.bin` and CSV otherwise.
#[no_mangle]
pub unsafe extern "C" fn ks_kernel_write(k: *const KsKernelMatrix, path: *const c_char) -> KsStatus {
    guard(|| {
        let k = borrow(k, "kernel")?;
        let path = PathBuf::from(string_arg(path, "path")?);
        kernseq::formats::write_kernel(&path, &k.0)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ks_kernel_free(k: *mut KsKernelMatrix) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

#[no_mangle]
pub extern "C" fn ks_tsne_config_default() -> KsTsneConfig {
    let c = TsneConfig::default();
    KsTsneConfig {
        dim: c.dim,
        perplexity: c.perplexity,
        max_iter: c.max_iter,
        eta: c.eta,
        alpha_initial: c.alpha_initial,
        alpha_late: c.alpha_late,
        alpha_switch_iter: c.alpha_switch_iter,
        seed: c.seed,
        init_scale: c.init_scale,
        exaggeration: c.exaggeration,
    }
}

/// Embeds the kernel matrix in `config.dim` dimensions. Perplexity is
/// clamped to `(n − 1) / 3`.
#[no_mangle]
pub unsafe extern "C" fn ks_tsne_run(
    k: *const KsKernelMatrix,
    config: *const KsTsneConfig,
    out: *mut *mut KsTsneResult,
) -> KsStatus {
    guard(|| {
        let k = borrow(k, "kernel")?;
        let config = TsneConfig::from(borrow(config, "config")?);
        store(out, KsTsneResult(run_tsne(&k.0, &config)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn ks_tsne_result_rows(r: *const KsTsneResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.y.nrows())
}

#[no_mangle]
pub unsafe extern "C" fn ks_tsne_result_dim(r: *const KsTsneResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.y.ncols())
}

/// Copies the row-major coordinates into `buf`.
#[no_mangle]
pub unsafe extern "C" fn ks_tsne_result_copy_coords(r: *const KsTsneResult, buf: *mut f64, len: usize) -> KsStatus {
    guard(|| copy_out(borrow(r, "result")?.0.y.as_slice(), buf, len))
}

/// KL divergence after the last iteration, NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ks_tsne_result_final_kl(r: *const KsTsneResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.final_kl())
}

#[no_mangle]
pub unsafe extern "C" fn ks_tsne_result_free(r: *mut KsTsneResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// AUC of the rescaled neighborhood-preservation curve between row-major
/// `n × d_hd` and `n × d_ld` point sets, written to `out`.
#[no_mangle]
pub unsafe extern "C" fn ks_auc_rnx(
    hd: *const f64,
    d_hd: usize,
    ld: *const f64,
    d_ld: usize,
    n: usize,
    k_max: usize,
    out: *mut f64,
) -> KsStatus {
    guard(|| {
        let size = |d: usize| n.checked_mul(d).ok_or_else(|| fail(KsStatus::InvalidArgument, "n * d overflows"));
        let hd = Matrix::from_vec(n, d_hd, slice_arg(hd, size(d_hd)?, "hd")?.to_vec())?;
        let ld = Matrix::from_vec(n, d_ld, slice_arg(ld, size(d_ld)?, "ld")?.to_vec())?;
        if out.is_null() {
            return Err(fail(KsStatus::NullPointer, "out is null"));
        }
        *out = kernseq::quality::evaluate_embedding(&hd, &ld, k_max)?.auc_rnx;
        Ok(())
    })
}
