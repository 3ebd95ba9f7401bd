//! Neighborhood-preservation curves (Q, R, AUC_RNX), k-means with elbow
//! selection and internal clustering indices.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};

pub const DEFAULT_K_MAX: usize = 99;
pub const DEFAULT_ELBOW_RANGE: std::ops::RangeInclusive<usize> = 2..=14;
pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;
/// Reported Calinski–Harabasz value when within-cluster dispersion is zero.
pub const CH_SENTINEL: f64 = 1e18;

/// `n × k_max` neighbor indices, nearest first.
pub type NeighborTable = Vec<Vec<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodCurve {
    pub ks: Vec<usize>,
    pub q_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub auc_rnx: f64,
}

fn table_from_rows<F>(n: usize, k_max: usize, dist: F) -> Result<NeighborTable>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::param("neighbor tables need at least 2 points"));
    }
    if k_max == 0 || k_max >= n {
        return Err(Error::param(format!("k_max must satisfy 1 <= k_max <= n-1 (k_max={k_max}, n={n})")));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)).collect();
            let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k_max < cand.len() {
                cand.select_nth_unstable_by(k_max - 1, by);
                cand.truncate(k_max);
            }
            cand.sort_unstable_by(by);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect())
}

/// Euclidean k-nearest-neighbor table; self excluded, ties to the lower index.
pub fn knn_table(x: &Matrix, k_max: usize) -> Result<NeighborTable> {
    table_from_rows(x.nrows(), k_max, |i, j| matrix::sq_euclidean(x.row(i), x.row(j)))
}

/// Neighbor table from a precomputed (squared or plain) distance matrix.
pub fn knn_table_from_distances(d: &Matrix, k_max: usize) -> Result<NeighborTable> {
    if d.nrows() != d.ncols() {
        return Err(Error::DimensionMismatch { left: d.nrows(), right: d.ncols() });
    }
    table_from_rows(d.nrows(), k_max, |i, j| d.get(i, j))
}

fn check_tables(hd: &NeighborTable, ld: &NeighborTable, k: usize) -> Result<()> {
    if hd.len() != ld.len() {
        return Err(Error::DimensionMismatch { left: hd.len(), right: ld.len() });
    }
    if hd.is_empty() {
        return Err(Error::EmptyInput("neighbor table".into()));
    }
    let width = hd.iter().chain(ld).map(Vec::len).min().unwrap_or(0);
    if k == 0 || k > width {
        return Err(Error::param(format!("k={k} outside the table width {width}")));
    }
    Ok(())
}

/// Summed overlaps `Σ_i |first-k(hd_i) ∩ first-k(ld_i)|` for every k in
/// `1..=k_max`, built incrementally from neighbor ranks.
fn overlap_counts(hd: &NeighborTable, ld: &NeighborTable, k_max: usize) -> Vec<usize> {
    let n = hd.len();
    hd.par_iter()
        .zip(ld.par_iter())
        .map_init(
            || (vec![usize::MAX; n], vec![usize::MAX; n]),
            |(hd_rank, ld_rank), (h, l)| {
                for (r, (&a, &b)) in h.iter().zip(l).take(k_max).enumerate() {
                    hd_rank[a] = r;
                    ld_rank[b] = r;
                }
                let mut counts = Vec::with_capacity(k_max);
                let mut overlap = 0;
                for k in 1..=k_max {
                    let (a, b) = (h[k - 1], l[k - 1]);
                    if ld_rank[a] < k {
                        overlap += 1;
                    }
                    if hd_rank[b] < k - 1 {
                        overlap += 1;
                    }
                    counts.push(overlap);
                }
                for (&a, &b) in h.iter().zip(l).take(k_max) {
                    hd_rank[a] = usize::MAX;
                    ld_rank[b] = usize::MAX;
                }
                counts
            },
        )
        .reduce(
            || vec![0; k_max],
            |mut acc, c| {
                acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
                acc
            },
        )
}

/// Fraction of shared k-neighbors, `(1/nk) Σ_i |first-k(hd_i) ∩ first-k(ld_i)|`.
pub fn q_of_k(hd: &NeighborTable, ld: &NeighborTable, k: usize) -> Result<f64> {
    check_tables(hd, ld, k)?;
    let total = overlap_counts(hd, ld, k)[k - 1];
    Ok(total as f64 / (hd.len() * k) as f64)
}

/// `R(k) = ((n−1)·q − k) / (n−1−k)`, zero for a random embedding.
pub fn r_of_k(q: f64, n: usize, k: usize) -> Result<f64> {
    if k == 0 || n < 3 || k > n - 2 {
        return Err(Error::param(format!("R(k) needs 1 <= k <= n-2 (k={k}, n={n})")));
    }
    let nm1 = (n - 1) as f64;
    Ok((nm1 * q - k as f64) / (nm1 - k as f64))
}

/// Harmonic-weighted mean `Σ_k R(k)/k ÷ Σ_k 1/k`, with `r_values[0]` at k = 1.
pub fn auc_rnx(r_values: &[f64]) -> Result<f64> {
    if r_values.is_empty() {
        return Err(Error::EmptyInput("R(k) curve".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (i, r) in r_values.iter().enumerate() {
        let w = 1.0 / (i + 1) as f64;
        num += r * w;
        den += w;
    }
    Ok(num / den)
}

/// Largest usable k_max for `n` points (`n − 2`), warning when it bites.
pub fn effective_k_max(requested: usize, n: usize) -> Result<usize> {
    if n < 3 {
        return Err(Error::param(format!("neighborhood curves need at least 3 points (got {n})")));
    }
    if requested == 0 {
        return Err(Error::param("k_max must be >= 1"));
    }
    if requested > n - 2 {
        log::warn!("k_max {requested} clamped to {} for n={n}", n - 2);
        return Ok(n - 2);
    }
    Ok(requested)
}

/// Q, R and AUC_RNX for k = 1..=k_max from two neighbor tables of width
/// at least `k_max`.
pub fn neighborhood_curve(hd: &NeighborTable, ld: &NeighborTable, k_max: usize) -> Result<NeighborhoodCurve> {
    check_tables(hd, ld, k_max)?;
    let n = hd.len();
    let counts = overlap_counts(hd, ld, k_max);
    let ks: Vec<usize> = (1..=k_max).collect();
    let q_values: Vec<f64> = ks.iter().map(|&k| counts[k - 1] as f64 / (n * k) as f64).collect();
    let r_values = ks
        .iter()
        .zip(&q_values)
        .map(|(&k, &q)| r_of_k(q, n, k))
        .collect::<Result<Vec<_>>>()?;
    let auc = auc_rnx(&r_values)?;
    Ok(NeighborhoodCurve { ks, q_values, r_values, auc_rnx: auc })
}

/// Compares Euclidean neighborhoods of `hd` and `ld`; `k_max` is clamped to `n − 2`.
pub fn evaluate_embedding(hd: &Matrix, ld: &Matrix, k_max: usize) -> Result<NeighborhoodCurve> {
    if hd.nrows() != ld.nrows() {
        return Err(Error::DimensionMismatch { left: hd.nrows(), right: ld.nrows() });
    }
    let k = effective_k_max(k_max, hd.nrows())?;
    neighborhood_curve(&knn_table(hd, k)?, &knn_table(ld, k)?, k)
}

/// As [`evaluate_embedding`] with high-dimensional neighbors taken from a
/// distance matrix (for instance kernel-induced distances).
pub fn evaluate_with_hd_distances(hd_dist: &Matrix, ld: &Matrix, k_max: usize) -> Result<NeighborhoodCurve> {
    if hd_dist.nrows() != ld.nrows() {
        return Err(Error::DimensionMismatch { left: hd_dist.nrows(), right: ld.nrows() });
    }
    let k = effective_k_max(k_max, ld.nrows())?;
    neighborhood_curve(&knn_table_from_distances(hd_dist, k)?, &knn_table(ld, k)?, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after every assignment step, ending with the final value.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

fn nearest_centroid(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.rows_iter().enumerate() {
        let d = matrix::sq_euclidean(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.nrows();
    let mut centroids = Matrix::zeros(k, x.ncols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = x.rows_iter().map(|r| matrix::sq_euclidean(r, x.row(first))).collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.random_range(0..n),
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (d, r) in d2.iter_mut().zip(x.rows_iter()) {
            *d = d.min(matrix::sq_euclidean(r, x.row(pick)));
        }
    }
    centroids
}

fn assign(x: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>) {
    x.rows_iter().map(|r| nearest_centroid(r, centroids)).unzip()
}

fn update_centroids(x: &Matrix, assignments: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let mut centroids = Matrix::zeros(k, x.ncols());
    let mut sizes = vec![0usize; k];
    for (r, &a) in x.rows_iter().zip(assignments) {
        sizes[a] += 1;
        for (c, v) in centroids.row_mut(a).iter_mut().zip(r) {
            *c += v;
        }
    }
    for (c, &s) in sizes.iter().enumerate() {
        if s > 0 {
            centroids.row_mut(c).iter_mut().for_each(|v| *v /= s as f64);
        }
    }
    (centroids, sizes)
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(x: &Matrix, assignments: &mut [usize], dist: &mut [f64], centroids: &mut Matrix, sizes: &mut [usize]) {
    for c in 0..sizes.len() {
        if sizes[c] > 0 {
            continue;
        }
        let victim = (0..x.nrows())
            .filter(|&i| sizes[assignments[i]] > 1)
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
        let Some(i) = victim else { break };
        sizes[assignments[i]] -= 1;
        assignments[i] = c;
        sizes[c] = 1;
        dist[i] = 0.0;
        centroids.row_mut(c).copy_from_slice(x.row(i));
    }
}

/// Seeded k-means++ initialization followed by Lloyd iterations.
pub fn kmeans(x: &Matrix, k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KMeansResult> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(Error::param(format!("k-means needs 1 <= k <= n (k={k}, n={n})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(x, k, &mut rng);
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let (assignments, dist) = assign(x, &centroids);
        trace.push(dist.iter().sum());
        let (mut next, mut sizes) = update_centroids(x, &assignments, k);
        if sizes.contains(&0) {
            let (mut assignments, mut dist) = (assignments, dist);
            repair_empty(x, &mut assignments, &mut dist, &mut next, &mut sizes);
            next = update_centroids(x, &assignments, k).0;
        }
        let shift = centroids
            .rows_iter()
            .zip(next.rows_iter())
            .map(|(a, b)| matrix::euclidean(a, b))
            .fold(0.0, f64::max);
        centroids = next;
        if shift < tol {
            break;
        }
    }
    let (mut assignments, mut dist) = assign(x, &centroids);
    let (mut centroids, mut sizes) = update_centroids(x, &assignments, k);
    if sizes.contains(&0) {
        repair_empty(x, &mut assignments, &mut dist, &mut centroids, &mut sizes);
        centroids = update_centroids(x, &assignments, k).0;
    }
    let inertia: f64 = x
        .rows_iter()
        .zip(&assignments)
        .map(|(r, &a)| matrix::sq_euclidean(r, centroids.row(a)))
        .sum();
    trace.push(inertia);
    Ok(KMeansResult { assignments, centroids, inertia, inertia_trace: trace, iterations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub ks: Vec<usize>,
    pub inertias: Vec<f64>,
    pub selected: usize,
}

/// Picks the interior candidate farthest from the chord joining the first
/// and last `(k, inertia)` points, both axes scaled to [0, 1]. Ties go to
/// the smaller k; a perfectly straight curve returns the second candidate.
pub fn elbow_from_curve(ks: &[usize], inertias: &[f64]) -> Result<usize> {
    if ks.len() < 3 || ks.len() != inertias.len() {
        return Err(Error::param("elbow selection needs at least 3 candidate k values"));
    }
    let (k0, k1) = (ks[0] as f64, ks[ks.len() - 1] as f64);
    let lo = inertias.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inertias.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale_i = if hi > lo { hi - lo } else { 1.0 };
    let pts: Vec<(f64, f64)> = ks
        .iter()
        .zip(inertias)
        .map(|(&k, &v)| ((k as f64 - k0) / (k1 - k0), (v - lo) / scale_i))
        .collect();
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = (dx * dx + dy * dy).sqrt();
    let mut best = (1, f64::NEG_INFINITY);
    for (idx, p) in pts.iter().enumerate().take(pts.len() - 1).skip(1) {
        let d = (dx * (a.1 - p.1) - dy * (a.0 - p.0)).abs() / len;
        if d > best.1 + 1e-12 {
            best = (idx, d);
        }
    }
    Ok(ks[best.0])
}

/// Runs k-means for every candidate (in parallel) and applies [`elbow_from_curve`].
pub fn elbow_select(x: &Matrix, ks: &[usize], seed: u64) -> Result<ElbowResult> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() < 3 {
        return Err(Error::param("elbow selection needs at least 3 candidate k values"));
    }
    if ks[ks.len() - 1] > x.nrows() {
        return Err(Error::param(format!(
            "largest candidate k={} exceeds n={}",
            ks[ks.len() - 1],
            x.nrows()
        )));
    }
    let inertias = ks
        .par_iter()
        .map(|&k| kmeans(x, k, seed, KMEANS_MAX_ITER, KMEANS_TOL).map(|r| r.inertia))
        .collect::<Result<Vec<f64>>>()?;
    let selected = elbow_from_curve(&ks, &inertias)?;
    Ok(ElbowResult { ks, inertias, selected })
}

/// Groups row indices by label, in ascending label order.
fn groups(labels: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        map.entry(l).or_default().push(i);
    }
    map.into_iter().collect()
}

fn check_labels(x: &Matrix, labels: &[usize]) -> Result<Vec<(usize, Vec<usize>)>> {
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch { left: labels.len(), right: x.nrows() });
    }
    let g = groups(labels);
    if g.len() < 2 {
        return Err(Error::param("clustering index needs at least 2 clusters"));
    }
    Ok(g)
}

fn centroid(x: &Matrix, members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; x.ncols()];
    for &i in members {
        c.iter_mut().zip(x.row(i)).for_each(|(a, b)| *a += b);
    }
    c.iter_mut().for_each(|v| *v /= members.len() as f64);
    c
}

/// Mean silhouette width; points in singleton clusters score 0.
pub fn silhouette(x: &Matrix, labels: &[usize]) -> Result<f64> {
    let g = check_labels(x, labels)?;
    let slot: BTreeMap<usize, usize> = g.iter().enumerate().map(|(s, (l, _))| (*l, s)).collect();
    let sizes: Vec<usize> = g.iter().map(|(_, m)| m.len()).collect();
    let n = x.nrows();
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = slot[&labels[i]];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; g.len()];
            for j in 0..n {
                if j != i {
                    sums[slot[&labels[j]]] += matrix::euclidean(x.row(i), x.row(j));
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..g.len())
                .filter(|&s| s != own)
                .map(|s| sums[s] / sizes[s] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 { (b - a) / m } else { 0.0 }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalinskiHarabasz {
    pub value: f64,
    /// True when within-cluster dispersion was zero and `value` is [`CH_SENTINEL`].
    pub degenerate: bool,
}

fn check_cluster_count(n: usize, k: usize) -> Result<()> {
    if k >= n {
        return Err(Error::param(format!("index needs fewer clusters than points (k={k}, n={n})")));
    }
    Ok(())
}

/// Between-cluster over within-cluster dispersion, each per degree of freedom.
pub fn calinski_harabasz(x: &Matrix, labels: &[usize]) -> Result<CalinskiHarabasz> {
    let g = check_labels(x, labels)?;
    let (n, k) = (x.nrows(), g.len());
    check_cluster_count(n, k)?;
    let all: Vec<usize> = (0..n).collect();
    let overall = centroid(x, &all);
    let (mut between, mut within) = (0.0, 0.0);
    for (_, members) in &g {
        let c = centroid(x, members);
        between += members.len() as f64 * matrix::sq_euclidean(&c, &overall);
        within += members.iter().map(|&i| matrix::sq_euclidean(x.row(i), &c)).sum::<f64>();
    }
    if within == 0.0 {
        return Ok(CalinskiHarabasz { value: CH_SENTINEL, degenerate: true });
    }
    Ok(CalinskiHarabasz {
        value: (between / (k - 1) as f64) / (within / (n - k) as f64),
        degenerate: false,
    })
}

/// Mean over clusters of the worst `(s_i + s_j) / d_ij` ratio.
pub fn davies_bouldin(x: &Matrix, labels: &[usize]) -> Result<f64> {
    let g = check_labels(x, labels)?;
    let k = g.len();
    check_cluster_count(x.nrows(), k)?;
    let cents: Vec<Vec<f64>> = g.iter().map(|(_, m)| centroid(x, m)).collect();
    let spread: Vec<f64> = g
        .iter()
        .zip(&cents)
        .map(|((_, m), c)| m.iter().map(|&i| matrix::euclidean(x.row(i), c)).sum::<f64>() / m.len() as f64)
        .collect();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = matrix::euclidean(&cents[i], &cents[j]);
            if d == 0.0 {
                return Err(Error::CoincidentCentroids(g[i.min(j)].0, g[i.max(j)].0));
            }
            worst = worst.max((spread[i] + spread[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Requested number of clusters for the clustering summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterK {
    #[default]
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for ClusterK {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(ClusterK::Auto);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&k| k >= 2)
            .map(ClusterK::Fixed)
            .ok_or_else(|| Error::param(format!("cluster k must be 'auto' or an integer >= 2, got '{s}'")))
    }
}

impl std::fmt::Display for ClusterK {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClusterK::Auto => f.write_str("auto"),
            ClusterK::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl Serialize for ClusterK {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClusterK {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(k) => ClusterK::Fixed(k).to_string().parse(),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    #[serde(rename = "k")]
    pub k_clusters: usize,
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    pub calinski_harabasz_degenerate: bool,
    pub davies_bouldin: f64,
    pub inertia: f64,
    pub runtime_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elbow: Option<ElbowResult>,
    pub assignments: Vec<usize>,
}

/// k-means (elbow-selected for [`ClusterK::Auto`]) plus all three indices.
pub fn cluster(x: &Matrix, k: ClusterK, seed: u64) -> Result<ClusteringReport> {
    let start = Instant::now();
    let n = x.nrows();
    let (k, elbow) = match k {
        ClusterK::Fixed(k) => (k, None),
        ClusterK::Auto => {
            let hi = (*DEFAULT_ELBOW_RANGE.end()).min(n.saturating_sub(1));
            let ks: Vec<usize> = (*DEFAULT_ELBOW_RANGE.start()..=hi).collect();
            let e = elbow_select(x, &ks, seed)?;
            (e.selected, Some(e))
        }
    };
    if k < 2 || k >= n {
        return Err(Error::param(format!("cluster count must satisfy 2 <= k < n (k={k}, n={n})")));
    }
    let km = kmeans(x, k, seed, KMEANS_MAX_ITER, KMEANS_TOL)?;
    let sil = silhouette(x, &km.assignments)?;
    let ch = calinski_harabasz(x, &km.assignments)?;
    let db = davies_bouldin(x, &km.assignments)?;
    Ok(ClusteringReport {
        k_clusters: k,
        silhouette: sil,
        calinski_harabasz: ch.value,
        calinski_harabasz_degenerate: ch.degenerate,
        davies_bouldin: db,
        inertia: km.inertia,
        runtime_seconds: start.elapsed().as_secs_f64(),
        elbow,
        assignments: km.assignments,
    })
}

/// Serialized evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub n: usize,
    pub auc_rnx: f64,
    pub q_curve: Vec<f64>,
    pub r_curve: Vec<f64>,
    pub k_max: usize,
    pub clustering: ClusteringReport,
}

impl QualityReport {
    pub fn new(curve: &NeighborhoodCurve, clustering: ClusteringReport) -> Self {
        QualityReport {
            n: clustering.assignments.len(),
            auc_rnx: curve.auc_rnx,
            q_curve: curve.q_values.clone(),
            r_curve: curve.r_values.clone(),
            k_max: curve.ks.len(),
            clustering,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn knn_examples() {
        let x = pts(&[&[0.0], &[1.0], &[3.0]]);
        assert_eq!(knn_table(&x, 2).unwrap()[1], vec![0, 2]);
        let x = pts(&[&[0.0], &[5.0]]);
        assert_eq!(knn_table(&x, 1).unwrap(), vec![vec![1], vec![0]]);
        let x = pts(&[&[0.0], &[-1.0], &[1.0]]);
        assert_eq!(knn_table(&x, 2).unwrap()[0], vec![1, 2]);
        assert!(knn_table(&x, 3).is_err());
    }

    #[test]
    fn q_extremes() {
        let t: NeighborTable = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        assert_eq!(q_of_k(&t, &t, 1).unwrap(), 1.0);
        assert_eq!(q_of_k(&t, &t, 2).unwrap(), 1.0);
        let a: NeighborTable = vec![vec![1], vec![0], vec![3], vec![2]];
        let b: NeighborTable = vec![vec![2], vec![3], vec![0], vec![1]];
        assert_eq!(q_of_k(&a, &b, 1).unwrap(), 0.0);
        assert!(q_of_k(&a, &b, 2).is_err());
    }

    #[test]
    fn incremental_overlap_matches_set_intersection() {
        let hd: NeighborTable = vec![vec![3, 1, 2, 4], vec![0, 4, 2, 3], vec![4, 3, 0, 1], vec![2, 1, 4, 0], vec![1, 0, 2, 3]];
        let ld: NeighborTable = vec![vec![1, 4, 3, 2], vec![2, 0, 4, 3], vec![0, 1, 4, 3], vec![4, 2, 0, 1], vec![3, 2, 1, 0]];
        for k in 1..=4 {
            let direct: usize = hd
                .iter()
                .zip(&ld)
                .map(|(h, l)| h[..k].iter().filter(|a| l[..k].contains(a)).count())
                .sum();
            assert_abs_diff_eq!(q_of_k(&hd, &ld, k).unwrap(), direct as f64 / (5 * k) as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn r_examples() {
        assert_eq!(r_of_k(1.0, 50, 7).unwrap(), 1.0);
        assert!(r_of_k(10.0 / 99.0, 100, 10).unwrap().abs() < 1e-15);
        assert_abs_diff_eq!(r_of_k(0.5, 100, 10).unwrap(), (99.0 * 0.5 - 10.0) / 89.0, epsilon = 1e-15);
        assert!(r_of_k(0.5, 10, 9).is_err());
        assert!(r_of_k(0.5, 10, 0).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_abs_diff_eq!(auc_rnx(&[1.0; 99]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(auc_rnx(&[0.0; 5]).unwrap(), 0.0);
        assert_abs_diff_eq!(auc_rnx(&[1.0, 0.0, 0.0]).unwrap(), 6.0 / 11.0, epsilon = 1e-15);
        assert!(auc_rnx(&[]).is_err());
    }

    #[test]
    fn k_max_clamps_for_small_n() {
        assert_eq!(effective_k_max(99, 20).unwrap(), 18);
        assert_eq!(effective_k_max(5, 20).unwrap(), 5);
        assert!(effective_k_max(5, 2).is_err());
    }

    #[test]
    fn low_rank_projection_scores_one() {
        let x = pts(&[&[0.0, 1.0, 0.0], &[1.0, 3.0, 0.0], &[4.0, 0.5, 0.0], &[2.0, 2.0, 0.0], &[7.0, 1.0, 0.0]]);
        let y = pts(&[&[0.0, 1.0], &[1.0, 3.0], &[4.0, 0.5], &[2.0, 2.0], &[7.0, 1.0]]);
        let c = evaluate_embedding(&x, &y, 99).unwrap();
        assert_eq!(c.ks, vec![1, 2, 3]);
        assert_abs_diff_eq!(c.auc_rnx, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kmeans_k_equals_n_and_pairs() {
        let x = pts(&[&[0.0, 0.0], &[0.0, 1.0], &[10.0, 10.0], &[10.0, 11.0]]);
        let r = kmeans(&x, 4, 1, 300, 1e-6).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut a = r.assignments.clone();
        a.sort_unstable();
        a.dedup();
        assert_eq!(a.len(), 4);

        let r = kmeans(&x, 2, 3, 300, 1e-6).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        // each pair contributes 2 · 0.5²
        assert_abs_diff_eq!(r.inertia, 1.0, epsilon = 1e-12);
        assert_eq!(kmeans(&x, 2, 3, 300, 1e-6).unwrap(), r);
        assert!(kmeans(&x, 5, 0, 300, 1e-6).is_err());
    }

    #[test]
    fn kmeans_inertia_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Matrix::from_vec(100, 3, data).unwrap();
        for seed in 0..5 {
            let r = kmeans(&x, 6, seed, 300, 1e-6).unwrap();
            assert!(r.inertia_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", r.inertia_trace);
        }
    }

    #[test]
    fn elbow_on_straight_line_is_endpoint_adjacent() {
        let ks: Vec<usize> = (2..=14).collect();
        let inertia: Vec<f64> = ks.iter().map(|&k| 100.0 - 5.0 * k as f64).collect();
        assert_eq!(elbow_from_curve(&ks, &inertia).unwrap(), 3);
        assert!(elbow_from_curve(&[2, 3], &[1.0, 0.5]).is_err());
        let sharp = [100.0, 60.0, 20.0, 18.0, 16.0, 14.0];
        assert_eq!(elbow_from_curve(&[2, 3, 4, 5, 6, 7], &sharp).unwrap(), 4);
    }

    #[test]
    fn silhouette_equidistant_is_zero() {
        // regular simplex: every pairwise distance equal
        let x = pts(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        assert_abs_diff_eq!(silhouette(&x, &[0, 0, 1, 1]).unwrap(), 0.0, epsilon = 1e-15);
        assert!(silhouette(&x, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn silhouette_singletons_score_zero() {
        let x = pts(&[&[0.0], &[1.0], &[5.0]]);
        // points 0,1 together: a=1, b=5 and 4 → s0 = 0.8, s1 = 0.75; singleton → 0
        assert_abs_diff_eq!(silhouette(&x, &[0, 0, 1]).unwrap(), (0.8 + 0.75) / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn ch_sentinel_and_errors() {
        let x = pts(&[&[0.0, 0.0], &[0.0, 0.0], &[10.0, 10.0], &[10.0, 10.0]]);
        let ch = calinski_harabasz(&x, &[0, 0, 1, 1]).unwrap();
        assert!(ch.degenerate);
        assert_eq!(ch.value, CH_SENTINEL);
        assert!(calinski_harabasz(&x, &[0, 1, 2, 3]).is_err());
        assert!(calinski_harabasz(&x, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn ch_grows_with_separation() {
        let mut last = 0.0;
        for sep in [1.0, 2.0, 4.0, 8.0] {
            let x = pts(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[sep, sep], &[sep, sep + 1.0], &[sep + 1.0, sep]]);
            let v = calinski_harabasz(&x, &[0, 0, 0, 1, 1, 1]).unwrap().value;
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn db_closed_form_and_coincident_centroids() {
        // two clusters, each spread 1 around its centroid, centroids 10 apart
        let x = pts(&[&[-1.0], &[1.0], &[9.0], &[11.0]]);
        assert_abs_diff_eq!(davies_bouldin(&x, &[0, 0, 1, 1]).unwrap(), 0.2, epsilon = 1e-15);
        let x = pts(&[&[-1.0], &[1.0], &[-2.0], &[2.0]]);
        match davies_bouldin(&x, &[0, 0, 1, 1]) {
            Err(Error::CoincidentCentroids(0, 1)) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cluster_k_parsing() {
        assert_eq!("auto".parse::<ClusterK>().unwrap(), ClusterK::Auto);
        assert_eq!("4".parse::<ClusterK>().unwrap(), ClusterK::Fixed(4));
        assert!("1".parse::<ClusterK>().is_err());
        assert!("x".parse::<ClusterK>().is_err());
    }
}
