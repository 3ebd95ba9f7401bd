//! Fixed-length numeric embeddings of sequences.
//!
//! Four methods are available: positional one-hot encoding, k-mer frequency
//! profiles, minimizer frequency profiles, and spaced k-mer profiles. All
//! frequency methods return raw counts.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seqio::{Alphabet, Sequence};

/// Upper bound on the feature dimension of a dense embedding row.
pub const MAX_FEATURES: usize = 1 << 24;

pub const DEFAULT_KMER_K: usize = 3;
pub const DEFAULT_MINIMIZER_K: usize = 9;
pub const DEFAULT_MINIMIZER_M: usize = 3;
pub const DEFAULT_SPACED_G: usize = 9;
pub const DEFAULT_SPACED_K: usize = 6;

/// How one-hot encoding reconciles sequences of different length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LengthPolicy {
    /// Pad every sequence with the gap symbol up to the longest length.
    #[default]
    PadToMax,
    /// Cut every sequence down to the shortest length.
    TruncateToMin,
    /// Pad or truncate to exactly `L` positions.
    Fixed(usize),
}

impl FromStr for LengthPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pad" | "pad-to-max" => Ok(LengthPolicy::PadToMax),
            "truncate" | "truncate-to-min" => Ok(LengthPolicy::TruncateToMin),
            _ => {
                let n = s
                    .strip_prefix("fixed:")
                    .or_else(|| s.strip_prefix("fixed="))
                    .and_then(|v| v.parse::<usize>().ok())
                    .filter(|&v| v > 0)
                    .ok_or_else(|| {
                        Error::param(format!(
                            "length policy must be pad, truncate or fixed:<L> (got '{s}')"
                        ))
                    })?;
                Ok(LengthPolicy::Fixed(n))
            }
        }
    }
}

impl TryFrom<String> for LengthPolicy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LengthPolicy> for String {
    fn from(p: LengthPolicy) -> String {
        p.to_string()
    }
}

impl fmt::Display for LengthPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LengthPolicy::PadToMax => f.write_str("pad-to-max"),
            LengthPolicy::TruncateToMin => f.write_str("truncate-to-min"),
            LengthPolicy::Fixed(l) => write!(f, "fixed:{l}"),
        }
    }
}

/// Embedding method together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EmbeddingMethod {
    #[serde(alias = "ohe")]
    OneHot {
        #[serde(default)]
        length_policy: LengthPolicy,
    },
    Kmer {
        #[serde(default = "default_kmer_k")]
        k: usize,
    },
    Minimizer {
        #[serde(default = "default_minimizer_k")]
        k: usize,
        #[serde(default = "default_minimizer_m")]
        m: usize,
    },
    #[serde(alias = "spaced")]
    SpacedKmer {
        #[serde(default = "default_spaced_g")]
        g: usize,
        #[serde(default = "default_spaced_k")]
        k: usize,
    },
}

fn default_kmer_k() -> usize {
    DEFAULT_KMER_K
}
fn default_minimizer_k() -> usize {
    DEFAULT_MINIMIZER_K
}
fn default_minimizer_m() -> usize {
    DEFAULT_MINIMIZER_M
}
fn default_spaced_g() -> usize {
    DEFAULT_SPACED_G
}
fn default_spaced_k() -> usize {
    DEFAULT_SPACED_K
}

impl Default for EmbeddingMethod {
    fn default() -> Self {
        EmbeddingMethod::Kmer { k: DEFAULT_KMER_K }
    }
}

impl EmbeddingMethod {
    /// Builds a method from its CLI name, filling unspecified parameters with defaults.
    pub fn from_parts(
        name: &str,
        k: Option<usize>,
        m: Option<usize>,
        g: Option<usize>,
        length_policy: Option<LengthPolicy>,
    ) -> Result<Self> {
        let method = match name {
            "ohe" | "one_hot" | "onehot" => EmbeddingMethod::OneHot {
                length_policy: length_policy.unwrap_or_default(),
            },
            "kmer" | "spike2vec" => EmbeddingMethod::Kmer {
                k: k.unwrap_or(DEFAULT_KMER_K),
            },
            "minimizer" => EmbeddingMethod::Minimizer {
                k: k.unwrap_or(DEFAULT_MINIMIZER_K),
                m: m.unwrap_or(DEFAULT_MINIMIZER_M),
            },
            "spaced" | "spaced_kmer" => EmbeddingMethod::SpacedKmer {
                g: g.unwrap_or(DEFAULT_SPACED_G),
                k: k.unwrap_or(DEFAULT_SPACED_K),
            },
            other => {
                return Err(Error::param(format!(
                    "--method must be one of ohe, kmer, minimizer, spaced (got '{other}')"
                )))
            }
        };
        method.validate()?;
        Ok(method)
    }

    pub fn name(&self) -> &'static str {
        match self {
            EmbeddingMethod::OneHot { .. } => "ohe",
            EmbeddingMethod::Kmer { .. } => "kmer",
            EmbeddingMethod::Minimizer { .. } => "minimizer",
            EmbeddingMethod::SpacedKmer { .. } => "spaced",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EmbeddingMethod::OneHot { .. } => Ok(()),
            EmbeddingMethod::Kmer { k } if k >= 1 => Ok(()),
            EmbeddingMethod::Kmer { .. } => Err(Error::param("kmer requires k >= 1")),
            EmbeddingMethod::Minimizer { k, m } if m >= 1 && m < k => Ok(()),
            EmbeddingMethod::Minimizer { .. } => Err(Error::param("minimizer requires 1 <= m < k")),
            EmbeddingMethod::SpacedKmer { g, k } if k >= 1 && g > k => Ok(()),
            EmbeddingMethod::SpacedKmer { .. } => Err(Error::param("spaced k-mers require g > k >= 1")),
        }
    }

    /// Shortest sequence the method can embed.
    pub fn min_length(&self) -> usize {
        match *self {
            EmbeddingMethod::OneHot { .. } => 1,
            EmbeddingMethod::Kmer { k } | EmbeddingMethod::Minimizer { k, .. } => k,
            EmbeddingMethod::SpacedKmer { g, .. } => g,
        }
    }
}

/// Handling of sequences too short for the selected method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShortPolicy {
    #[default]
    Skip,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    #[serde(default = "Alphabet::dna")]
    pub alphabet: Alphabet,
    #[serde(flatten)]
    pub method: EmbeddingMethod,
    #[serde(default)]
    pub short_policy: ShortPolicy,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig::new(Alphabet::dna(), EmbeddingMethod::default())
    }
}

impl EmbeddingConfig {
    pub fn new(alphabet: Alphabet, method: EmbeddingMethod) -> Self {
        EmbeddingConfig {
            alphabet,
            method,
            short_policy: ShortPolicy::default(),
        }
    }
}

/// n × d embedding with row ids and feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: Matrix,
    pub ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// Absent when the matrix was loaded from a file that does not record it.
    pub config: Option<EmbeddingConfig>,
}

impl EmbeddingMatrix {
    /// Wraps raw data; feature names default to `f0..f{d-1}`.
    pub fn from_matrix(rows: Matrix, ids: Vec<String>) -> Result<Self> {
        if ids.len() != rows.nrows() {
            return Err(Error::DimensionMismatch {
                left: ids.len(),
                right: rows.nrows(),
            });
        }
        let feature_names = (0..rows.ncols()).map(|j| format!("f{j}")).collect();
        Ok(EmbeddingMatrix {
            rows,
            ids,
            feature_names,
            config: None,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// First `n` rows, used for size sweeps.
    pub fn head(&self, n: usize) -> EmbeddingMatrix {
        EmbeddingMatrix {
            rows: self.rows.head(n),
            ids: self.ids.iter().take(n).cloned().collect(),
            feature_names: self.feature_names.clone(),
            config: self.config.clone(),
        }
    }
}

fn feature_space(alphabet: &Alphabet, k: usize) -> Result<usize> {
    alphabet
        .len()
        .checked_pow(k as u32)
        .filter(|&d| d <= MAX_FEATURES)
        .ok_or_else(|| {
            Error::param(format!(
                "feature space {}^{k} exceeds the dense limit of {MAX_FEATURES}",
                alphabet.len()
            ))
        })
}

/// Names every `k`-mer in index order (first symbol most significant).
pub fn kmer_names(alphabet: &Alphabet, k: usize) -> Result<Vec<String>> {
    let dim = feature_space(alphabet, k)?;
    let s = alphabet.len();
    let syms = alphabet.symbols();
    Ok((0..dim)
        .map(|mut idx| {
            let mut name = vec![0u8; k];
            for slot in name.iter_mut().rev() {
                *slot = syms[idx % s];
                idx /= s;
            }
            String::from_utf8(name).expect("ASCII alphabet")
        })
        .collect())
}

fn symbol_index(alphabet: &Alphabet, seq_id: &str, pos: usize, b: u8) -> Result<usize> {
    alphabet.index(b).ok_or(Error::UnknownSymbol {
        record: seq_id.to_string(),
        position: pos + 1,
        symbol: b as char,
    })
}

/// Index of a k-mer in the `|Σ|^k` bin space.
fn mer_index(alphabet: &Alphabet, seq_id: &str, mer: &[u8]) -> Result<usize> {
    let s = alphabet.len();
    let mut idx = 0usize;
    for (p, &b) in mer.iter().enumerate() {
        idx = idx * s + symbol_index(alphabet, seq_id, p, b)?;
    }
    Ok(idx)
}

fn check_len(seq: &Sequence, required: usize) -> Result<()> {
    if seq.len() < required {
        return Err(Error::SequenceTooShort {
            id: seq.id.clone(),
            len: seq.len(),
            required,
        });
    }
    Ok(())
}

/// Counts of every k-mer over the `len - k + 1` sliding windows.
pub fn kmer_profile(seq: &Sequence, alphabet: &Alphabet, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::param("k must be >= 1"));
    }
    let dim = feature_space(alphabet, k)?;
    check_len(seq, k)?;
    let bytes = seq.bytes();
    let s = alphabet.len();
    let mut counts = vec![0.0; dim];
    let mut idx = 0usize;
    for (p, &b) in bytes.iter().enumerate() {
        // rolling index: drop the leading symbol by reducing modulo |Σ|^k
        idx = (idx * s + symbol_index(alphabet, &seq.id, p, b)?) % dim;
        if p + 1 >= k {
            counts[idx] += 1.0;
        }
    }
    Ok(counts)
}

/// The lexicographically smaller of `mer` and its reversal.
pub fn canonical(mer: &[u8]) -> Vec<u8> {
    if reverse_is_smaller(mer) {
        mer.iter().rev().copied().collect()
    } else {
        mer.to_vec()
    }
}

fn reverse_is_smaller(mer: &[u8]) -> bool {
    let n = mer.len();
    for i in 0..n {
        let (f, r) = (mer[i], mer[n - 1 - i]);
        if f != r {
            return r < f;
        }
    }
    false
}

/// One minimizer per k-window: the smallest canonical m-mer inside it.
///
/// Runs a monotone-deque sliding minimum over the canonical m-mers, so each
/// m-mer is canonicalized once.
pub fn extract_minimizers(seq: &Sequence, k: usize, m: usize) -> Result<Vec<String>> {
    if m == 0 || m >= k {
        return Err(Error::param(format!("minimizers require 1 <= m < k (got k={k}, m={m})")));
    }
    check_len(seq, k)?;
    let bytes = seq.bytes();
    let mers: Vec<Vec<u8>> = bytes.windows(m).map(canonical).collect();
    let width = k - m + 1;
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut out = Vec::with_capacity(bytes.len() - k + 1);
    for (j, mer) in mers.iter().enumerate() {
        while deque.back().is_some_and(|&b| mers[b] > *mer) {
            deque.pop_back();
        }
        deque.push_back(j);
        if j + 1 >= width {
            let start = j + 1 - width;
            while deque.front().is_some_and(|&f| f < start) {
                deque.pop_front();
            }
            let best = &mers[*deque.front().expect("window is non-empty")];
            out.push(String::from_utf8(best.clone()).expect("ASCII residues"));
        }
    }
    Ok(out)
}

pub fn minimizer_profile(seq: &Sequence, alphabet: &Alphabet, k: usize, m: usize) -> Result<Vec<f64>> {
    let dim = feature_space(alphabet, m)?;
    let mut counts = vec![0.0; dim];
    for mer in extract_minimizers(seq, k, m)? {
        counts[mer_index(alphabet, &seq.id, mer.as_bytes())?] += 1.0;
    }
    Ok(counts)
}

/// For each g-window, bins the first `k` symbols of its canonical form.
pub fn spaced_kmer_profile(seq: &Sequence, alphabet: &Alphabet, g: usize, k: usize) -> Result<Vec<f64>> {
    if k == 0 || g <= k {
        return Err(Error::param(format!("spaced k-mers require g > k >= 1 (got g={g}, k={k})")));
    }
    let dim = feature_space(alphabet, k)?;
    check_len(seq, g)?;
    let mut counts = vec![0.0; dim];
    for gmer in seq.bytes().windows(g) {
        let canon = canonical(gmer);
        counts[mer_index(alphabet, &seq.id, &canon[..k])?] += 1.0;
    }
    Ok(counts)
}

fn resolve_length(seqs: &[Sequence], policy: LengthPolicy) -> usize {
    match policy {
        LengthPolicy::PadToMax => seqs.iter().map(Sequence::len).max().unwrap_or(0),
        LengthPolicy::TruncateToMin => seqs.iter().map(Sequence::len).min().unwrap_or(0),
        LengthPolicy::Fixed(l) => l,
    }
}

/// Binary position × symbol indicators; position `p`, symbol `s` sets
/// column `p·|Σ| + index(s)`.
pub fn one_hot_encode(seqs: &[Sequence], alphabet: &Alphabet, policy: LengthPolicy) -> Result<EmbeddingMatrix> {
    if seqs.is_empty() {
        return Err(Error::EmptyInput("no sequences to encode".into()));
    }
    let len = resolve_length(seqs, policy);
    let s = alphabet.len();
    let dim = len
        .checked_mul(s)
        .filter(|&d| d <= MAX_FEATURES && d > 0)
        .ok_or_else(|| Error::param(format!("one-hot dimension {len}×{s} is out of range")))?;
    let needs_pad = seqs.iter().any(|q| q.len() < len);
    let gap = alphabet.gap();
    if needs_pad && gap.is_none() {
        return Err(Error::param(
            "one-hot padding requires an alphabet with a gap symbol",
        ));
    }

    let rows: Vec<Vec<f64>> = seqs
        .par_iter()
        .map(|q| {
            let mut row = vec![0.0; dim];
            let bytes = q.bytes();
            for p in 0..len {
                let sym = bytes.get(p).copied().or(gap).expect("gap checked above");
                row[p * s + symbol_index(alphabet, &q.id, p, sym)?] = 1.0;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut feature_names = Vec::with_capacity(dim);
    for p in 0..len {
        for &sym in alphabet.symbols() {
            feature_names.push(format!("p{}_{}", p + 1, sym as char));
        }
    }
    Ok(EmbeddingMatrix {
        rows: Matrix::from_rows(&rows)?,
        ids: seqs.iter().map(|q| q.id.clone()).collect(),
        feature_names,
        config: Some(EmbeddingConfig::new(
            alphabet.clone(),
            EmbeddingMethod::OneHot { length_policy: policy },
        )),
    })
}

/// Embeds every sequence with the configured method. Rows keep input order;
/// short sequences are skipped or rejected per `config.short_policy`.
pub fn embed_dataset(seqs: &[Sequence], config: &EmbeddingConfig) -> Result<EmbeddingMatrix> {
    config.method.validate()?;
    let alphabet = &config.alphabet;
    let required = config.method.min_length();
    let mut kept: Vec<Sequence> = Vec::with_capacity(seqs.len());
    for q in seqs {
        if q.len() < required {
            match config.short_policy {
                ShortPolicy::Error => check_len(q, required)?,
                ShortPolicy::Skip => {
                    log::warn!(
                        "skipping '{}': length {} is below the {} minimum of {required}",
                        q.id,
                        q.len(),
                        config.method.name()
                    );
                    continue;
                }
            }
        }
        kept.push(q.clone());
    }
    if kept.is_empty() {
        return Err(Error::EmptyInput("no sequences survive length filtering".into()));
    }

    if let EmbeddingMethod::OneHot { length_policy } = config.method {
        let mut out = one_hot_encode(&kept, alphabet, length_policy)?;
        out.config = Some(config.clone());
        return Ok(out);
    }

    let (names, rows): (Vec<String>, Vec<Vec<f64>>) = match config.method {
        EmbeddingMethod::Kmer { k } => (
            kmer_names(alphabet, k)?,
            kept.par_iter().map(|q| kmer_profile(q, alphabet, k)).collect::<Result<_>>()?,
        ),
        EmbeddingMethod::Minimizer { k, m } => (
            kmer_names(alphabet, m)?,
            kept.par_iter()
                .map(|q| minimizer_profile(q, alphabet, k, m))
                .collect::<Result<_>>()?,
        ),
        EmbeddingMethod::SpacedKmer { g, k } => (
            kmer_names(alphabet, k)?,
            kept.par_iter()
                .map(|q| spaced_kmer_profile(q, alphabet, g, k))
                .collect::<Result<_>>()?,
        ),
        EmbeddingMethod::OneHot { .. } => unreachable!(),
    };
    Ok(EmbeddingMatrix {
        rows: Matrix::from_rows(&rows)?,
        ids: kept.iter().map(|q| q.id.clone()).collect(),
        feature_names: names,
        config: Some(config.clone()),
    })
}
