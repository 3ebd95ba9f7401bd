//! End-to-end run: FASTA → embedding → kernel → t-SNE → quality → plot.
//!
//! Configuration is a TOML document mirroring [`PipelineConfig`]; every
//! table and key is optional. Command-line values are layered on top via
//! [`PipelineOverrides`], so precedence is flag > file > default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::embed::{embed_dataset, EmbeddingConfig, EmbeddingMatrix, EmbeddingMethod, LengthPolicy, ShortPolicy};
use crate::error::{Error, Result};
use crate::formats;
use crate::kernel::{kernel_matrix, KernelKind, KernelParams};
use crate::plot::{plot_scatter, ScatterSpec};
use crate::quality::{self, ClusterK, QualityReport, DEFAULT_K_MAX};
use crate::seqio::{self, Alphabet, UnknownPolicy};
use crate::tsne::{kernel_to_sq_distances, run_tsne, TsneConfig};

pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const KERNEL_FILE: &str = "kernel.kskm";
pub const COORDS_FILE: &str = "coords.csv";
pub const QUALITY_FILE: &str = "quality.json";
pub const PLOT_FILE: &str = "plot.svg";
pub const ARTIFACTS: [&str; 5] = [EMBEDDING_FILE, KERNEL_FILE, COORDS_FILE, QUALITY_FILE, PLOT_FILE];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub fasta: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub unknown_policy: UnknownPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k_max: usize,
    pub cluster_k: ClusterK,
    /// Take high-dimensional neighbors from kernel-induced distances instead
    /// of Euclidean distances between embedding rows.
    pub hd_from_kernel: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k_max: DEFAULT_K_MAX,
            cluster_k: ClusterK::Auto,
            hd_from_kernel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    pub width: u32,
    pub height: u32,
    pub legend: bool,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig { width: 800, height: 600, legend: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seeds every random stage (isolation kernel, t-SNE init, k-means),
    /// replacing any per-stage seed.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub input: InputConfig,
    pub embedding: EmbeddingConfig,
    pub kernel: KernelParams,
    pub tsne: TsneConfig,
    pub eval: EvalConfig,
    pub plot: PlotConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            output_dir: PathBuf::from("kernseq-out"),
            input: InputConfig::default(),
            embedding: EmbeddingConfig::default(),
            kernel: KernelParams::new(KernelKind::Cosine),
            tsne: TsneConfig::default(),
            eval: EvalConfig::default(),
            plot: PlotConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::param(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::param(format!("invalid config {}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::format("config", e.to_string()))
    }

    /// Copies the global seed into every stage.
    pub fn seeded(&self) -> PipelineConfig {
        let mut c = self.clone();
        c.kernel.seed = self.seed;
        c.tsne.seed = self.seed;
        c
    }
}

/// Values given on the command line; `None` leaves the file/default value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineOverrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub fasta: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub unknown_policy: Option<UnknownPolicy>,
    pub alphabet: Option<Alphabet>,
    pub method: Option<String>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub g: Option<usize>,
    pub length_policy: Option<LengthPolicy>,
    pub short_policy: Option<ShortPolicy>,
    pub kernel_kind: Option<KernelKind>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub c0: Option<f64>,
    pub r: Option<f64>,
    pub degree: Option<u32>,
    pub psi: Option<usize>,
    pub t_trees: Option<usize>,
    pub dim: Option<usize>,
    pub perplexity: Option<f64>,
    pub max_iter: Option<usize>,
    pub eta: Option<f64>,
    pub exaggeration: Option<f64>,
    pub k_max: Option<usize>,
    pub cluster_k: Option<ClusterK>,
    pub hd_from_kernel: Option<bool>,
}

impl PipelineOverrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.output_dir, &self.output_dir);
        if self.fasta.is_some() {
            cfg.input.fasta = self.fasta.clone();
        }
        if self.labels.is_some() {
            cfg.input.labels = self.labels.clone();
        }
        set(&mut cfg.input.unknown_policy, &self.unknown_policy);
        set(&mut cfg.embedding.alphabet, &self.alphabet);
        set(&mut cfg.embedding.short_policy, &self.short_policy);
        cfg.embedding.method = self.merged_method(&cfg.embedding.method)?;
        if let Some(kind) = self.kernel_kind {
            if kind != cfg.kernel.kind {
                // kind-specific bandwidths from the file do not carry over
                cfg.kernel.sigma = None;
                cfg.kernel.gamma = None;
            }
            cfg.kernel.kind = kind;
        }
        if self.sigma.is_some() {
            cfg.kernel.sigma = self.sigma;
        }
        if self.gamma.is_some() {
            cfg.kernel.gamma = self.gamma;
        }
        set(&mut cfg.kernel.c, &self.c);
        set(&mut cfg.kernel.c0, &self.c0);
        set(&mut cfg.kernel.r, &self.r);
        set(&mut cfg.kernel.degree, &self.degree);
        set(&mut cfg.kernel.psi, &self.psi);
        set(&mut cfg.kernel.t_trees, &self.t_trees);
        set(&mut cfg.tsne.dim, &self.dim);
        set(&mut cfg.tsne.perplexity, &self.perplexity);
        set(&mut cfg.tsne.max_iter, &self.max_iter);
        set(&mut cfg.tsne.eta, &self.eta);
        set(&mut cfg.tsne.exaggeration, &self.exaggeration);
        set(&mut cfg.eval.k_max, &self.k_max);
        set(&mut cfg.eval.cluster_k, &self.cluster_k);
        set(&mut cfg.eval.hd_from_kernel, &self.hd_from_kernel);
        Ok(())
    }

    /// Method flags layered over `base`; parameters of `base` survive only
    /// when the method itself is unchanged.
    fn merged_method(&self, base: &EmbeddingMethod) -> Result<EmbeddingMethod> {
        if self.method.is_none() && self.k.is_none() && self.m.is_none() && self.g.is_none() && self.length_policy.is_none() {
            return Ok(*base);
        }
        let name = self.method.as_deref().unwrap_or(base.name());
        let probe = EmbeddingMethod::from_parts(name, None, None, None, None).map(|m| m.name());
        let same = matches!(probe, Ok(n) if n == base.name());
        let (mut k, mut m, mut g, mut lp) = (None, None, None, None);
        if same {
            match *base {
                EmbeddingMethod::OneHot { length_policy } => lp = Some(length_policy),
                EmbeddingMethod::Kmer { k: bk } => k = Some(bk),
                EmbeddingMethod::Minimizer { k: bk, m: bm } => (k, m) = (Some(bk), Some(bm)),
                EmbeddingMethod::SpacedKmer { g: bg, k: bk } => (g, k) = (Some(bg), Some(bk)),
            }
        }
        EmbeddingMethod::from_parts(
            name,
            self.k.or(k),
            self.m.or(m),
            self.g.or(g),
            self.length_policy.or(lp),
        )
    }
}

/// A failed pipeline stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
    /// Artifacts that were written before the failure, now renamed `*.partial`.
    pub partial: Vec<PathBuf>,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage '{}' failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.error.exit_code()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub n: usize,
    pub kernel: KernelKind,
    pub auc_rnx: f64,
    pub elapsed_seconds: f64,
    pub artifacts: Vec<PathBuf>,
}

impl fmt::Display for PipelineSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} kernel={} auc_rnx={:.4} elapsed={:.2}s",
            self.n, self.kernel, self.auc_rnx, self.elapsed_seconds
        )
    }
}

/// Tracks written artifacts so they can be marked partial on failure.
struct Run {
    written: Vec<PathBuf>,
}

impl Run {
    fn stage<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> std::result::Result<T, StageError> {
        f().map_err(|error| {
            let mut partial = Vec::new();
            for p in self.written.drain(..) {
                let mut target = p.clone().into_os_string();
                target.push(".partial");
                let target = PathBuf::from(target);
                if std::fs::rename(&p, &target).is_ok() {
                    partial.push(target);
                }
            }
            StageError { stage, error, partial }
        })
    }
}

fn id_labels(e: &EmbeddingMatrix, labels: &BTreeMap<String, Option<String>>) -> Vec<Option<String>> {
    e.ids.iter().map(|id| labels.get(id).cloned().flatten()).collect()
}

/// Runs every stage and writes the five artifacts into `output_dir`.
pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<PipelineSummary, StageError> {
    let start = Instant::now();
    let cfg = config.seeded();
    let mut run = Run { written: Vec::new() };
    let path = |name: &str| cfg.output_dir.join(name);

    let seqs = run.stage("read", || {
        let fasta = cfg
            .input
            .fasta
            .as_deref()
            .ok_or_else(|| Error::param("no FASTA input given (--fasta or input.fasta)"))?;
        let mut seqs = seqio::parse_fasta(fasta, &cfg.embedding.alphabet, cfg.input.unknown_policy)?;
        if let Some(lp) = &cfg.input.labels {
            let map = seqio::load_labels(lp, b',')?;
            let missing = seqio::attach_labels(&mut seqs, &map);
            if missing > 0 {
                log::warn!("{missing} sequences have no label");
            }
        }
        std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
        Ok(seqs)
    })?;
    let labels: BTreeMap<String, Option<String>> = seqs.iter().map(|s| (s.id.clone(), s.label.clone())).collect();

    let emb = run.stage("embed", || {
        let e = embed_dataset(&seqs, &cfg.embedding)?;
        formats::write_embedding_csv(&path(EMBEDDING_FILE), &e)?;
        Ok(e)
    })?;
    run.written.push(path(EMBEDDING_FILE));

    let kernel = run.stage("kernel", || {
        let k = kernel_matrix(&emb, &cfg.kernel)?;
        formats::write_kernel_bin(&path(KERNEL_FILE), &k)?;
        Ok(k)
    })?;
    run.written.push(path(KERNEL_FILE));

    let tsne = run.stage("tsne", || {
        let t = run_tsne(&kernel, &cfg.tsne)?;
        formats::write_coords_csv(&path(COORDS_FILE), &t.ids, &t.y)?;
        Ok(t)
    })?;
    run.written.push(path(COORDS_FILE));

    let report = run.stage("eval", || {
        let curve = if cfg.eval.hd_from_kernel {
            quality::evaluate_with_hd_distances(&kernel_to_sq_distances(&kernel.values)?, &tsne.y, cfg.eval.k_max)?
        } else {
            quality::evaluate_embedding(&emb.rows, &tsne.y, cfg.eval.k_max)?
        };
        let clustering = quality::cluster(&tsne.y, cfg.eval.cluster_k, cfg.seed)?;
        let report = QualityReport::new(&curve, clustering);
        formats::write_json(&path(QUALITY_FILE), &report)?;
        Ok(report)
    })?;
    run.written.push(path(QUALITY_FILE));

    run.stage("plot", || {
        if tsne.y.ncols() != 2 {
            return Err(Error::param(format!("plotting needs dim = 2 (got {})", tsne.y.ncols())));
        }
        let spec = ScatterSpec {
            width: cfg.plot.width,
            height: cfg.plot.height,
            legend: cfg.plot.legend,
            ..ScatterSpec::new(tsne.y.clone()).with_labels(id_labels(&emb, &labels))
        };
        plot_scatter(&spec, &path(PLOT_FILE))
    })?;
    run.written.push(path(PLOT_FILE));

    Ok(PipelineSummary {
        n: emb.n(),
        kernel: cfg.kernel.kind,
        auc_rnx: report.auc_rnx,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        artifacts: run.written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingMethod;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = PipelineConfig { seed: 9, ..Default::default() };
        c.input.fasta = Some("x.fa".into());
        c.embedding.method = EmbeddingMethod::Minimizer { k: 7, m: 3 };
        c.kernel.kind = KernelKind::Gaussian;
        c.kernel.sigma = Some(2.0);
        c.eval.cluster_k = ClusterK::Fixed(4);
        let text = c.to_toml_string().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn partial_document_keeps_other_defaults() {
        let c = PipelineConfig::from_toml_str("[tsne]\nperplexity = 5.0\n[eval]\ncluster_k = 3\n").unwrap();
        assert_eq!(c.tsne.perplexity, 5.0);
        assert_eq!(c.tsne.max_iter, 1000);
        assert_eq!(c.eval.cluster_k, ClusterK::Fixed(3));
        assert_eq!(c.kernel.kind, KernelKind::Cosine);
        assert!(PipelineConfig::from_toml_str("[tsne]\nperplexty = 5.0\n").is_err());
    }

    #[test]
    fn seed_reaches_every_stage() {
        let c = PipelineConfig { seed: 42, ..Default::default() }.seeded();
        assert_eq!(c.kernel.seed, 42);
        assert_eq!(c.tsne.seed, 42);
    }

    #[test]
    fn switching_kernel_kind_drops_file_bandwidth() {
        let mut c = PipelineConfig::default();
        c.kernel.kind = KernelKind::Gaussian;
        c.kernel.sigma = Some(3.0);
        PipelineOverrides { kernel_kind: Some(KernelKind::Laplacian), ..Default::default() }
            .apply(&mut c)
            .unwrap();
        assert_eq!(c.kernel.sigma, None);
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let mut c = PipelineConfig::from_toml_str(
            "seed = 3\n[tsne]\nperplexity = 5.0\neta = 100.0\n[embedding]\nmethod = \"minimizer\"\nk = 7\n",
        )
        .unwrap();
        PipelineOverrides {
            perplexity: Some(8.0),
            m: Some(2),
            ..Default::default()
        }
        .apply(&mut c)
        .unwrap();
        assert_eq!(c.tsne.perplexity, 8.0);
        assert_eq!(c.tsne.eta, 100.0);
        assert_eq!(c.tsne.max_iter, 1000);
        assert_eq!(c.seed, 3);
        assert_eq!(c.embedding.method, EmbeddingMethod::Minimizer { k: 7, m: 2 });
    }

    #[test]
    fn changing_method_resets_its_parameters() {
        let mut c = PipelineConfig::from_toml_str("[embedding]\nmethod = \"kmer\"\nk = 5\n").unwrap();
        PipelineOverrides { method: Some("spaced".into()), ..Default::default() }
            .apply(&mut c)
            .unwrap();
        assert_eq!(c.embedding.method, EmbeddingMethod::SpacedKmer { g: 9, k: 6 });
        let bad = PipelineOverrides { method: Some("minimizer".into()), m: Some(20), ..Default::default() };
        assert!(bad.apply(&mut c).is_err());
    }
}
