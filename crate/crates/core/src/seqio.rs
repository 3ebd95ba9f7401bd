//! FASTA ingestion, label tables and dataset summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of single-byte residue symbols, optionally with a gap symbol.
///
/// Symbol order defines feature indexing everywhere downstream: symbol `s`
/// has index `alphabet.index(s)`, and k-mer bins are enumerated in that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlphabetRepr", into = "AlphabetRepr")]
pub struct Alphabet {
    symbols: Vec<u8>,
    gap: Option<u8>,
    lookup: [Option<u8>; 256],
}

#[derive(Serialize, Deserialize)]
struct AlphabetRepr {
    symbols: String,
    gap: Option<char>,
}

impl TryFrom<AlphabetRepr> for Alphabet {
    type Error = Error;
    fn try_from(r: AlphabetRepr) -> Result<Self> {
        Alphabet::new(&r.symbols, r.gap)
    }
}

impl From<Alphabet> for AlphabetRepr {
    fn from(a: Alphabet) -> Self {
        AlphabetRepr {
            symbols: a.symbols_str(),
            gap: a.gap.map(char::from),
        }
    }
}

pub const DNA_SYMBOLS: &str = "ACGT-";
pub const PROTEIN_SYMBOLS: &str = "ACDEFGHIKLMNPQRSTVWY-";

impl Alphabet {
    pub fn new(symbols: &str, gap: Option<char>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::param("alphabet must contain at least one symbol"));
        }
        let mut lookup = [None; 256];
        let mut out = Vec::with_capacity(symbols.len());
        for c in symbols.chars() {
            if !c.is_ascii_graphic() {
                return Err(Error::param(format!(
                    "alphabet symbol {c:?} is not a printable ASCII character"
                )));
            }
            let b = c.to_ascii_uppercase() as u8;
            if lookup[b as usize].is_some() {
                return Err(Error::param(format!("duplicate alphabet symbol '{c}'")));
            }
            if out.len() > u8::MAX as usize {
                return Err(Error::param("alphabet has more than 255 symbols"));
            }
            lookup[b as usize] = Some(out.len() as u8);
            out.push(b);
        }
        let gap = match gap {
            Some(g) => {
                let b = g.to_ascii_uppercase() as u8;
                if !g.is_ascii() || lookup[b as usize].is_none() {
                    return Err(Error::param(format!(
                        "gap symbol '{g}' is not a member of the alphabet"
                    )));
                }
                Some(b)
            }
            None => None,
        };
        Ok(Alphabet {
            symbols: out,
            gap,
            lookup,
        })
    }

    /// Nucleotides plus gap: `ACGT-`.
    pub fn dna() -> Self {
        Alphabet::new(DNA_SYMBOLS, Some('-')).expect("valid preset")
    }

    /// The twenty standard amino acids plus gap.
    pub fn protein() -> Self {
        Alphabet::new(PROTEIN_SYMBOLS, Some('-')).expect("valid preset")
    }

    /// Resolves `dna`, `protein`, or a literal symbol string. A literal that
    /// contains `-` uses it as the gap symbol.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec.to_ascii_lowercase().as_str() {
            "dna" | "nucleotide" => Ok(Alphabet::dna()),
            "protein" | "aa" => Ok(Alphabet::protein()),
            _ => Alphabet::new(spec, spec.contains('-').then_some('-')),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn symbols_str(&self) -> String {
        self.symbols.iter().map(|&b| b as char).collect()
    }

    pub fn gap(&self) -> Option<u8> {
        self.gap
    }

    #[inline]
    pub fn index(&self, symbol: u8) -> Option<usize> {
        self.lookup[symbol as usize].map(usize::from)
    }

    pub fn contains(&self, symbol: u8) -> bool {
        self.lookup[symbol as usize].is_some()
    }
}

/// A labeled sequence. Residues are uppercase ASCII.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence {
    pub id: String,
    pub residues: String,
    pub label: Option<String>,
}

impl Sequence {
    pub fn new(id: impl Into<String>, residues: impl Into<String>) -> Self {
        Sequence {
            id: id.into(),
            residues: residues.into(),
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn bytes(&self) -> &[u8] {
        self.residues.as_bytes()
    }
}

/// What to do with a residue that is not in the alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownPolicy {
    #[default]
    Reject,
    #[serde(alias = "gap")]
    ReplaceWithGap,
    #[serde(alias = "drop")]
    DropSequence,
}

impl FromStr for UnknownPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(UnknownPolicy::Reject),
            "gap" | "replace-with-gap" => Ok(UnknownPolicy::ReplaceWithGap),
            "drop" | "drop-sequence" => Ok(UnknownPolicy::DropSequence),
            other => Err(Error::param(format!(
                "unknown-policy must be one of reject, gap, drop (got '{other}')"
            ))),
        }
    }
}

impl fmt::Display for UnknownPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnknownPolicy::Reject => "reject",
            UnknownPolicy::ReplaceWithGap => "gap",
            UnknownPolicy::DropSequence => "drop",
        })
    }
}

pub fn parse_fasta(path: &Path, alphabet: &Alphabet, policy: UnknownPolicy) -> Result<Vec<Sequence>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_fasta(BufReader::new(file), alphabet, policy).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses FASTA text from any reader. Record order is preserved.
pub fn read_fasta<R: BufRead>(reader: R, alphabet: &Alphabet, policy: UnknownPolicy) -> Result<Vec<Sequence>> {
    let mut records: Vec<(String, String)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<fasta>", e))?;
        let line = line.trim_end();
        if let Some(header) = line.strip_prefix('>') {
            let id = header.split_whitespace().next().unwrap_or("");
            if id.is_empty() {
                return Err(Error::format("FASTA", format!("line {}: empty header", lineno + 1)));
            }
            records.push((id.to_string(), String::new()));
        } else if line.trim().is_empty() {
            continue;
        } else {
            match records.last_mut() {
                Some((_, body)) => body.extend(line.chars().filter(|c| !c.is_whitespace())),
                None => {
                    return Err(Error::format(
                        "FASTA",
                        format!("line {}: sequence data before the first '>' header", lineno + 1),
                    ))
                }
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("FASTA input contains no records".into()));
    }

    let mut out = Vec::with_capacity(records.len());
    'records: for (id, body) in records {
        if body.is_empty() {
            return Err(Error::format("FASTA", format!("record '{id}' has no residues")));
        }
        let mut residues = String::with_capacity(body.len());
        for (pos, c) in body.chars().enumerate() {
            let up = c.to_ascii_uppercase();
            if up.is_ascii() && alphabet.contains(up as u8) {
                residues.push(up);
                continue;
            }
            match policy {
                UnknownPolicy::Reject => {
                    return Err(Error::UnknownSymbol {
                        record: id,
                        position: pos + 1,
                        symbol: c,
                    })
                }
                UnknownPolicy::ReplaceWithGap => match alphabet.gap() {
                    Some(g) => residues.push(g as char),
                    None => {
                        return Err(Error::param(
                            "unknown-policy 'gap' requires an alphabet with a gap symbol",
                        ))
                    }
                },
                UnknownPolicy::DropSequence => {
                    log::warn!("dropping record '{id}': symbol '{c}' at position {} not in alphabet", pos + 1);
                    continue 'records;
                }
            }
        }
        out.push(Sequence::new(id, residues));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("every FASTA record was dropped".into()));
    }
    Ok(out)
}

/// Writes records with bodies wrapped at `width` columns (0 = no wrapping).
pub fn write_fasta<W: Write>(mut w: W, seqs: &[Sequence], width: usize) -> std::io::Result<()> {
    for s in seqs {
        writeln!(w, ">{}", s.id)?;
        if width == 0 {
            writeln!(w, "{}", s.residues)?;
        } else {
            for chunk in s.bytes().chunks(width) {
                w.write_all(chunk)?;
                w.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

/// Reads a two-column (`id`, `label`) delimited file with a header row.
pub fn load_labels(path: &Path, delimiter: u8) -> Result<BTreeMap<String, String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file, delimiter)
}

pub fn read_labels<R: Read>(reader: R, delimiter: u8) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = BTreeMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format("label file", e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::format(
                "label file",
                format!("data row {} has {} columns, expected 2", row + 1, rec.len()),
            ));
        }
        let id = rec[0].to_string();
        if out.insert(id.clone(), rec[1].to_string()).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    Ok(out)
}

/// Attaches labels by id; returns how many sequences stayed unlabeled.
pub fn attach_labels(seqs: &mut [Sequence], labels: &BTreeMap<String, String>) -> usize {
    let mut missing = 0;
    for s in seqs.iter_mut() {
        s.label = labels.get(&s.id).cloned();
        if s.label.is_none() {
            missing += 1;
        }
    }
    missing
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub count: usize,
    pub classes: BTreeMap<String, usize>,
    /// Sequences without a label; `classes` counts plus this equal `count`.
    pub unlabeled: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub mean_len: f64,
    pub mode_len: usize,
}

pub fn dataset_stats(seqs: &[Sequence]) -> Result<DatasetStats> {
    if seqs.is_empty() {
        return Err(Error::EmptyInput("dataset_stats needs at least one sequence".into()));
    }
    let mut classes = BTreeMap::new();
    let mut unlabeled = 0;
    let mut lengths: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0usize;
    for s in seqs {
        match &s.label {
            Some(l) => *classes.entry(l.clone()).or_insert(0) += 1,
            None => unlabeled += 1,
        }
        *lengths.entry(s.len()).or_insert(0) += 1;
        total += s.len();
    }
    // BTreeMap iterates ascending, so the first maximal count is the smaller length.
    let mut mode_len = 0;
    let mut best = 0;
    for (&len, &cnt) in &lengths {
        if cnt > best {
            best = cnt;
            mode_len = len;
        }
    }
    Ok(DatasetStats {
        count: seqs.len(),
        classes,
        unlabeled,
        min_len: *lengths.keys().next().unwrap(),
        max_len: *lengths.keys().next_back().unwrap(),
        mean_len: total as f64 / seqs.len() as f64,
        mode_len,
    })
}
