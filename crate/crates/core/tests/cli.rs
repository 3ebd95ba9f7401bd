use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kernseq::formats::{read_coords_csv, read_embedding, read_kernel_bin};
use kernseq::kernel::KernelKind;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn kernseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kernseq")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("e.ksem");
    let ker = dir.path().join("k.kskm");
    let coords = dir.path().join("c.csv");
    let trace = dir.path().join("kl.csv");
    let report = dir.path().join("q.json");
    let svg = dir.path().join("p.svg");

    let o = kernseq(&["embed", "--fasta", p(&data("toy.fasta")), "--method", "kmer", "--k", "3", "-o", p(&emb)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let e = read_embedding(&emb).unwrap();
    // 5^3 trimers over ACGT-
    assert_eq!((e.n(), e.dim()), (20, 125));

    let o = kernseq(&["kernel", "--embedding", p(&emb), "--kind", "gaussian", "-o", p(&ker)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let k = read_kernel_bin(&ker).unwrap();
    assert_eq!(k.params.kind, KernelKind::Gaussian);
    assert!(k.params.sigma.unwrap() > 0.0);

    let o = kernseq(&[
        "tsne", "--kernel-file", p(&ker), "--iters", "200", "--seed", "4", "-o", p(&coords), "--kl-trace", p(&trace),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (ids, y) = read_coords_csv(&coords).unwrap();
    assert_eq!(ids, e.ids);
    assert_eq!(y.ncols(), 2);
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 201);

    let o = kernseq(&["eval", "--hd", p(&emb), "--ld", p(&coords), "--cluster-k", "3", "-o", p(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["clustering"]["k"], 3);
    assert_eq!(v["k_max"], 18);

    let o = kernseq(&["plot", "--coords", p(&coords), "--labels", p(&data("toy_labels.csv")), "-o", p(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(s.matches("<circle").count(), 20);
    assert!(s.contains(">alpha</text>") && s.contains(">gamma</text>"));
}

#[test]
fn eval_reads_kernel_files_as_high_dimensional_side() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(kernseq(&["run", "--fasta", p(&data("toy.fasta")), "--out-dir", p(&out)]).status.success());
    let o = kernseq(&["eval", "--hd", p(&out.join("kernel.kskm")), "--ld", p(&out.join("coords.csv"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["auc_rnx"].as_f64().unwrap() > 0.0);
}

#[test]
fn usage_errors_exit_two() {
    let o = kernseq(&["kernel", "--embedding", "x", "--kind", "bogus", "-o", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--kind"));
    assert_eq!(kernseq(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(kernseq(&["run", "--cluster-k", "seven"]).status.code(), Some(2));
}

#[test]
fn bad_parameters_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = kernseq(&[
        "run", "--fasta", p(&data("toy.fasta")), "--method", "minimizer", "--k", "3", "--m", "5", "--out-dir",
        p(&dir.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_input_exits_three_and_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = kernseq(&["run", "--fasta", p(&dir.path().join("absent.fa")), "--out-dir", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("stage 'read' failed"), "{}", stderr(&o));
}

#[test]
fn malformed_fasta_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("bad.fa");
    std::fs::write(&fa, "ACGT\n>x\nACGT\n").unwrap();
    let o = kernseq(&["embed", "--fasta", p(&fa), "-o", p(&dir.path().join("e.csv"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn numeric_blowup_exits_four_and_marks_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = kernseq(&["run", "--fasta", p(&data("toy.fasta")), "--eta", "1e300", "--out-dir", p(&out)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage 'tsne' failed"), "{}", stderr(&o));
    assert!(out.join("embedding.csv.partial").exists());
    assert!(out.join("kernel.kskm.partial").exists());
    assert!(!out.join("embedding.csv").exists());
    assert!(!out.join("coords.csv").exists());
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("cfg.toml");
    let text = format!(
        "seed = 9\noutput_dir = \"{}\"\n[input]\nfasta = \"{}\"\n{body}",
        p(&dir.join("from-config")),
        p(&data("toy.fasta"))
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn config_values_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[kernel]\nkind = \"gaussian\"\nsigma = 2.5\n[tsne]\nmax_iter = 120\n");
    let o = kernseq(&["run", "--config", p(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let k = read_kernel_bin(&dir.path().join("from-config/kernel.kskm")).unwrap();
    assert_eq!(k.params.kind, KernelKind::Gaussian);
    assert_eq!(k.params.sigma, Some(2.5));
    assert_eq!(k.params.seed, 9);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[kernel]\nkind = \"gaussian\"\nsigma = 2.5\n");
    let out = dir.path().join("from-flags");
    let o = kernseq(&["run", "--config", p(&cfg), "--kind", "laplacian", "--seed", "21", "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!dir.path().join("from-config").exists());
    let k = read_kernel_bin(&out.join("kernel.kskm")).unwrap();
    assert_eq!(k.params.kind, KernelKind::Laplacian);
    // the configured bandwidth belonged to the gaussian kernel
    assert_ne!(k.params.sigma, Some(2.5));
    assert_eq!(k.params.seed, 21);

    let o = kernseq(&["run", "--config", p(&cfg), "--sigma", "0.75", "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_kernel_bin(&out.join("kernel.kskm")).unwrap().params.sigma, Some(0.75));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[tsne]\nmax_iters = 10\n");
    let o = kernseq(&["run", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("max_iters"), "{}", stderr(&o));
    let o = kernseq(&["run", "--config", p(&dir.path().join("absent.toml"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn different_seeds_give_different_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        assert!(kernseq(&["run", "--fasta", p(&data("toy.fasta")), "--seed", seed, "--out-dir", p(out)]).status.success());
    }
    assert_ne!(std::fs::read(a.join("coords.csv")).unwrap(), std::fs::read(b.join("coords.csv")).unwrap());
}
