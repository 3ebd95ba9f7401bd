use proptest::prelude::*;

use kernseq::embed::{canonical, extract_minimizers, kmer_profile, EmbeddingMatrix};
use kernseq::kernel::{isolation_fit, kernel_matrix, KernelKind, KernelParams};
use kernseq::quality::{evaluate_embedding, knn_table, neighborhood_curve};
use kernseq::seqio::{Alphabet, Sequence};
use kernseq::tsne::{hd_affinities, kernel_to_sq_distances};
use kernseq::Matrix;

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn sized_matrix(n: std::ops::Range<usize>, d: std::ops::Range<usize>, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    (n, d).prop_flat_map(move |(n, d)| matrix(n, d, lo, hi))
}

fn emb(m: Matrix) -> EmbeddingMatrix {
    let ids = (0..m.nrows()).map(|i| format!("r{i}")).collect();
    EmbeddingMatrix::from_matrix(m, ids).unwrap()
}

fn dna(len: std::ops::Range<usize>) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!['A', 'C', 'G', 'T']), len).prop_map(|v| v.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_are_symmetric_and_bounded(x in sized_matrix(3..12, 1..8, 0.01, 5.0), pick in 0usize..9) {
        let kind = KernelKind::ALL[pick];
        let mut params = KernelParams::new(kind);
        params.psi = params.psi.min(x.nrows());
        let k = kernel_matrix(&emb(x), &params).unwrap();
        prop_assert!(k.values.asymmetry() <= 1e-9);
        let bounded = matches!(
            kind,
            KernelKind::Cosine | KernelKind::Gaussian | KernelKind::Laplacian | KernelKind::Chi2 | KernelKind::Isolation
        );
        for v in k.values.as_slice() {
            prop_assert!(v.is_finite());
            if bounded {
                // nonnegative inputs keep cosine in [0, 1] as well
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(v), "{kind}: {v}");
            }
            if kind == KernelKind::Sigmoid {
                prop_assert!(v.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn cosine_ignores_positive_row_scaling(x in sized_matrix(3..10, 2..6, 0.1, 3.0), s in prop::collection::vec(0.1f64..50.0, 10)) {
        let mut scaled = x.clone();
        for (i, f) in s.iter().enumerate().take(x.nrows()) {
            for v in scaled.row_mut(i) {
                *v *= f;
            }
        }
        let a = kernel_matrix(&emb(x), &KernelParams::new(KernelKind::Cosine)).unwrap();
        let b = kernel_matrix(&emb(scaled), &KernelParams::new(KernelKind::Cosine)).unwrap();
        for (p, q) in a.values.as_slice().iter().zip(b.values.as_slice()) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn isolation_is_deterministic_per_seed(x in sized_matrix(6..20, 1..5, -3.0, 3.0), seed in any::<u64>()) {
        let a = isolation_fit(&x, 4, 20, seed).unwrap();
        let b = isolation_fit(&x, 4, 20, seed).unwrap();
        prop_assert_eq!(&a.partitionings, &b.partitionings);
        let mut p = KernelParams::new(KernelKind::Isolation);
        p.psi = 4;
        p.seed = seed;
        let k1 = kernel_matrix(&emb(x.clone()), &p).unwrap();
        let k2 = kernel_matrix(&emb(x), &p).unwrap();
        prop_assert_eq!(k1.values, k2.values);
    }

    #[test]
    fn auc_is_invariant_to_rigid_motion(
        hd in matrix(25, 4, -5.0, 5.0),
        ld in matrix(25, 2, -5.0, 5.0),
        angle in 0.0f64..std::f64::consts::TAU,
        shift in (-100.0f64..100.0, -100.0f64..100.0),
    ) {
        let (c, s) = (angle.cos(), angle.sin());
        let mut moved = ld.clone();
        for i in 0..ld.nrows() {
            let r = ld.row(i);
            moved.row_mut(i).copy_from_slice(&[c * r[0] - s * r[1] + shift.0, s * r[0] + c * r[1] + shift.1]);
        }
        let a = evaluate_embedding(&hd, &ld, 23).unwrap();
        let b = evaluate_embedding(&hd, &moved, 23).unwrap();
        prop_assert!((a.auc_rnx - b.auc_rnx).abs() <= 1e-9, "{} vs {}", a.auc_rnx, b.auc_rnx);
    }

    #[test]
    fn identical_tables_score_one(x in matrix(30, 3, -1.0, 1.0), k_max in 1usize..28) {
        let t = knn_table(&x, k_max).unwrap();
        let curve = neighborhood_curve(&t, &t, k_max).unwrap();
        prop_assert!((curve.auc_rnx - 1.0).abs() <= 1e-12);
        for q in curve.q_values {
            prop_assert!((q - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn affinities_are_a_symmetric_distribution(x in sized_matrix(5..25, 2..6, 0.01, 4.0), perp in 1.0f64..1.3) {
        let n = x.nrows();
        let k = kernel_matrix(&emb(x), &KernelParams::new(KernelKind::Cosine)).unwrap();
        let d2 = kernel_to_sq_distances(&k.values).unwrap();
        let p = hd_affinities(&d2, perp * (n - 1) as f64 / 4.0).unwrap().p;
        let total: f64 = p.as_slice().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert!(p.asymmetry() <= 1e-15);
        for i in 0..n {
            prop_assert_eq!(p.get(i, i), 0.0);
        }
    }

    #[test]
    fn minimizers_are_reversal_invariant_per_window(s in dna(6..40), km in (2usize..7).prop_flat_map(|k| (Just(k), 1..k))) {
        let (k, m) = km;
        prop_assume!(s.len() >= k);
        let mins = extract_minimizers(&Sequence::new("s", s.as_str()), k, m).unwrap();
        prop_assert_eq!(mins.len(), s.len() - k + 1);
        for (w, mer) in s.as_bytes().windows(k).zip(&mins) {
            prop_assert_eq!(canonical(mer.as_bytes()), mer.as_bytes().to_vec());
            let rev: Vec<u8> = w.iter().rev().copied().collect();
            let from_rev = extract_minimizers(&Sequence::new("r", String::from_utf8(rev).unwrap()), k, m).unwrap();
            prop_assert_eq!(&from_rev[0], mer);
        }
    }

    #[test]
    fn kmer_counts_sum_to_window_count(s in dna(1..60), k in 1usize..5) {
        let profile = kmer_profile(&Sequence::new("s", s.as_str()), &Alphabet::dna(), k);
        if s.len() < k {
            prop_assert!(profile.is_err());
            return Ok(());
        }
        let counts = profile.unwrap();
        prop_assert_eq!(counts.len(), 5usize.pow(k as u32));
        let total: f64 = counts.iter().sum();
        prop_assert_eq!(total as usize, s.len() - k + 1);
    }
}
