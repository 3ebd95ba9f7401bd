use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kernseq::bench::{self, ScalingReport};
use kernseq::embed::{embed_dataset, LengthPolicy, ShortPolicy};
use kernseq::formats;
use kernseq::kernel::{kernel_matrix, KernelKind};
use kernseq::pipeline::{run_pipeline, PipelineConfig, PipelineOverrides};
use kernseq::plot::{plot_scatter, ScatterSpec};
use kernseq::quality::{self, ClusterK, QualityReport};
use kernseq::seqio::{self, Alphabet, UnknownPolicy};
use kernseq::tsne::{kernel_to_sq_distances, run_tsne};
use kernseq::{Error, Result};

#[derive(Parser)]
#[command(name = "kernseq", version, about = "Kernel t-SNE for biological sequences")]
struct Cli {
    /// Seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "KERNSEQ_THREADS")]
    threads: Option<usize>,
    /// TOML pipeline config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// FASTA to embedding matrix (.ksem binary or CSV by extension).
    Embed {
        #[arg(long)]
        fasta: Option<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Embedding matrix to kernel matrix (.kskm binary or CSV by extension).
    Kernel {
        #[arg(long)]
        embedding: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Kernel matrix to low-dimensional coordinates.
    Tsne {
        #[arg(long)]
        kernel_file: PathBuf,
        #[command(flatten)]
        tsne: TsneArgs,
        #[arg(long, short)]
        out: PathBuf,
        /// Also write the per-iteration KL divergence.
        #[arg(long)]
        kl_trace: Option<PathBuf>,
    },
    /// Neighborhood preservation and clustering quality of coordinates.
    Eval {
        /// High-dimensional side: embedding or kernel file.
        #[arg(long)]
        hd: PathBuf,
        /// Coordinates CSV.
        #[arg(long)]
        ld: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
        /// Write the JSON report here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Kernel (and optionally t-SNE) runtime over growing sizes.
    Bench {
        /// Embedding file; synthetic uniform data is used when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Feature count of synthetic data.
        #[arg(long, default_value_t = 1000)]
        synthetic_dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "500,1000,2000")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "cosine,gaussian,laplacian")]
        kinds: Vec<KernelKind>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Time t-SNE as well, with this many iterations.
        #[arg(long)]
        tsne_iters: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Coordinates CSV to SVG scatter plot.
    Plot {
        #[arg(long)]
        coords: PathBuf,
        /// Two-column label file (id,label).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
        #[arg(long)]
        no_legend: bool,
        #[arg(long)]
        title: Option<String>,
    },
    /// Full pipeline: embed, kernel, t-SNE, evaluate, plot.
    Run {
        #[arg(long)]
        fasta: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        tsne: TsneArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
}

#[derive(Args, Default)]
struct EmbedArgs {
    /// ohe, kmer, minimizer or spaced.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    g: Option<usize>,
    /// dna, protein, or a literal symbol list such as "ACGU-".
    #[arg(long, value_parser = parse_alphabet)]
    alphabet: Option<Alphabet>,
    /// One-hot length handling: pad, truncate or fixed:L.
    #[arg(long)]
    length_policy: Option<LengthPolicy>,
    /// reject, gap or drop.
    #[arg(long)]
    unknown_policy: Option<UnknownPolicy>,
    /// Fail instead of skipping sequences too short for the method.
    #[arg(long)]
    strict_length: bool,
}

#[derive(Args, Default)]
struct KernelArgs {
    #[arg(long)]
    kind: Option<KernelKind>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Linear kernel offset.
    #[arg(long)]
    c: Option<f64>,
    /// Sigmoid kernel offset.
    #[arg(long)]
    c0: Option<f64>,
    /// Polynomial kernel offset.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    degree: Option<u32>,
    /// Isolation kernel sample size per partitioning.
    #[arg(long)]
    psi: Option<usize>,
    /// Isolation kernel partitioning count.
    #[arg(long)]
    trees: Option<usize>,
}

#[derive(Args, Default)]
struct TsneArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    exaggeration: Option<f64>,
}

#[derive(Args, Default)]
struct EvalArgs {
    #[arg(long)]
    kmax: Option<usize>,
    /// auto (elbow) or a fixed cluster count.
    #[arg(long)]
    cluster_k: Option<ClusterK>,
    /// Treat a CSV high-dimensional input as a kernel matrix; in `run`, use
    /// kernel-induced distances for the high-dimensional neighbors.
    #[arg(long)]
    hd_from_kernel: bool,
}

fn parse_alphabet(s: &str) -> std::result::Result<Alphabet, String> {
    Alphabet::from_spec(s).map_err(|e| e.to_string())
}

impl EmbedArgs {
    fn fill(&self, o: &mut PipelineOverrides) {
        o.method = self.method.clone();
        o.k = self.k;
        o.m = self.m;
        o.g = self.g;
        o.alphabet = self.alphabet.clone();
        o.length_policy = self.length_policy;
        o.unknown_policy = self.unknown_policy;
        o.short_policy = self.strict_length.then_some(ShortPolicy::Error);
    }
}

impl KernelArgs {
    fn fill(&self, o: &mut PipelineOverrides) {
        o.kernel_kind = self.kind;
        o.sigma = self.sigma;
        o.gamma = self.gamma;
        o.c = self.c;
        o.c0 = self.c0;
        o.r = self.r;
        o.degree = self.degree;
        o.psi = self.psi;
        o.t_trees = self.trees;
    }
}

impl TsneArgs {
    fn fill(&self, o: &mut PipelineOverrides) {
        o.dim = self.dim;
        o.perplexity = self.perplexity;
        o.max_iter = self.iters;
        o.eta = self.eta;
        o.exaggeration = self.exaggeration;
    }
}

impl EvalArgs {
    fn fill(&self, o: &mut PipelineOverrides) {
        o.k_max = self.kmax;
        o.cluster_k = self.cluster_k;
        o.hd_from_kernel = self.hd_from_kernel.then_some(true);
    }
}

/// Config file (if any) with command-line overrides applied.
fn resolve_config(cli: &Cli, fill: impl FnOnce(&mut PipelineOverrides)) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let mut o = PipelineOverrides { seed: cli.seed, ..Default::default() };
    fill(&mut o);
    o.apply(&mut cfg)?;
    Ok(cfg.seeded())
}

fn write_report(report: &ScalingReport, json: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    match json {
        Some(p) => formats::write_json(p, report)?,
        None => println!("{}", serde_json::to_string_pretty(report).expect("plain data")),
    }
    if let Some(p) = csv {
        report.write_csv(p)?;
    }
    for (name, series) in report
        .kernel_series
        .iter()
        .map(|(k, v)| (k.as_str(), v))
        .chain((!report.tsne_series.is_empty()).then_some(("tsne", &report.tsne_series)))
    {
        if let Ok(slope) = bench::loglog_slope(&report.sizes, series) {
            eprintln!("{name}: log-log slope {slope:.3}");
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> std::result::Result<(), (i32, String)> {
    let fail = |e: Error| (e.exit_code(), format!("error: {e}"));
    match &cli.command {
        Command::Embed { fasta, embed, out } => {
            let cfg = resolve_config(cli, |o| {
                embed.fill(o);
                o.fasta = fasta.clone();
            })
            .map_err(fail)?;
            let fasta = cfg
                .input
                .fasta
                .as_deref()
                .ok_or_else(|| fail(Error::InvalidParameter("--fasta is required".into())))?;
            let seqs = seqio::parse_fasta(fasta, &cfg.embedding.alphabet, cfg.input.unknown_policy).map_err(fail)?;
            let e = embed_dataset(&seqs, &cfg.embedding).map_err(fail)?;
            formats::write_embedding(out, &e).map_err(fail)?;
            println!("n={} d={} method={}", e.n(), e.dim(), cfg.embedding.method.name());
        }
        Command::Kernel { embedding, kernel, out } => {
            let cfg = resolve_config(cli, |o| kernel.fill(o)).map_err(fail)?;
            let e = formats::read_embedding(embedding).map_err(fail)?;
            let k = kernel_matrix(&e, &cfg.kernel).map_err(fail)?;
            formats::write_kernel(out, &k).map_err(fail)?;
            println!("n={} kernel={} seconds={:.4}", k.n(), k.params.kind, k.compute_seconds);
        }
        Command::Tsne { kernel_file, tsne, out, kl_trace } => {
            let cfg = resolve_config(cli, |o| tsne.fill(o)).map_err(fail)?;
            let k = formats::read_kernel(kernel_file, cfg.kernel.clone()).map_err(fail)?;
            let t = run_tsne(&k, &cfg.tsne).map_err(fail)?;
            formats::write_coords_csv(out, &t.ids, &t.y).map_err(fail)?;
            if let Some(p) = kl_trace {
                formats::write_kl_trace_csv(p, &t.kl_trace).map_err(fail)?;
            }
            println!(
                "n={} perplexity={} kl_initial={:.6} kl_final={:.6} seconds={:.3}",
                k.n(),
                t.config.perplexity,
                t.kl_trace[0],
                t.final_kl(),
                t.elapsed_seconds
            );
        }
        Command::Eval { hd, ld, eval, out } => {
            let cfg = resolve_config(cli, |o| eval.fill(o)).map_err(fail)?;
            let (ids, y) = formats::read_coords_csv(ld).map_err(fail)?;
            let kernel_input = formats::is_kernel_file(hd).map_err(fail)? || cfg.eval.hd_from_kernel;
            let (hd_ids, curve) = if kernel_input {
                let k = formats::read_kernel(hd, cfg.kernel.clone()).map_err(fail)?;
                let d2 = kernel_to_sq_distances(&k.values).map_err(fail)?;
                (k.ids, quality::evaluate_with_hd_distances(&d2, &y, cfg.eval.k_max))
            } else {
                let e = formats::read_embedding(hd).map_err(fail)?;
                (e.ids.clone(), quality::evaluate_embedding(&e.rows, &y, cfg.eval.k_max))
            };
            if hd_ids != ids {
                return Err(fail(Error::Format {
                    what: ld.display().to_string(),
                    detail: "ids do not match the high-dimensional input row for row".into(),
                }));
            }
            let curve = curve.map_err(fail)?;
            let clustering = quality::cluster(&y, cfg.eval.cluster_k, cfg.seed).map_err(fail)?;
            let report = QualityReport::new(&curve, clustering);
            match out {
                Some(p) => {
                    formats::write_json(p, &report).map_err(fail)?;
                    println!("n={} auc_rnx={:.4} k={}", report.n, report.auc_rnx, report.clustering.k_clusters);
                }
                None => println!("{}", serde_json::to_string_pretty(&report).expect("plain data")),
            }
        }
        Command::Bench { input, synthetic_dim, sizes, kinds, repeats, tsne_iters, json, csv } => {
            let cfg = resolve_config(cli, |_| {}).map_err(fail)?;
            let data = match input {
                Some(p) => formats::read_embedding(p).map_err(fail)?,
                None => {
                    let n = sizes.iter().copied().max().unwrap_or(0);
                    bench::synthetic_embedding(n, *synthetic_dim, cfg.seed)
                }
            };
            let mut report = bench::bench_kernels(&data, sizes, kinds, *repeats, cfg.seed).map_err(fail)?;
            if let Some(iters) = tsne_iters {
                let tcfg = kernseq::tsne::TsneConfig { max_iter: *iters, ..cfg.tsne.clone() };
                report.tsne_series = bench::bench_tsne(&data, sizes, &tcfg, *repeats).map_err(fail)?.tsne_series;
            }
            write_report(&report, json.as_deref(), csv.as_deref()).map_err(fail)?;
        }
        Command::Plot { coords, labels, out, width, height, no_legend, title } => {
            let (ids, y) = formats::read_coords_csv(coords).map_err(fail)?;
            if y.ncols() != 2 {
                return Err(fail(Error::InvalidParameter(format!(
                    "plot needs two coordinate columns, found {}",
                    y.ncols()
                ))));
            }
            let map = match labels {
                Some(p) => seqio::load_labels(p, b',').map_err(fail)?,
                None => Default::default(),
            };
            let mut spec = ScatterSpec::new(y).with_labels(ids.iter().map(|id| map.get(id).cloned()).collect());
            spec.width = width.unwrap_or(spec.width);
            spec.height = height.unwrap_or(spec.height);
            spec.legend = !no_legend;
            spec.title = title.clone();
            plot_scatter(&spec, out).map_err(fail)?;
        }
        Command::Run { fasta, labels, out_dir, embed, kernel, tsne, eval } => {
            let cfg = resolve_config(cli, |o| {
                o.fasta = fasta.clone();
                o.labels = labels.clone();
                o.output_dir = out_dir.clone();
                embed.fill(o);
                kernel.fill(o);
                tsne.fill(o);
                eval.fill(o);
            })
            .map_err(fail)?;
            match run_pipeline(&cfg) {
                Ok(summary) => println!("{summary}"),
                Err(e) => {
                    let mut msg = format!("error: {e}");
                    for p in &e.partial {
                        msg.push_str(&format!("\npartial artifact kept: {}", p.display()));
                    }
                    return Err((e.exit_code(), msg));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(code as u8)
        }
    }
}
