//! On-disk formats: CSV and the little-endian binary containers `KSEM`
//! (embeddings) and `KSKM` (kernel matrices).
//!
//! Both containers share a layout:
//!
//! ```text
//! magic [4]  version u32  n u64  (d u64, KSEM only)
//! values f64 × n·d (or n·n), row-major
//! ids: n × (len u32, utf-8 bytes)
//! trailer: len u32, JSON document
//! ```
//!
//! The `KSEM` trailer carries the embedding config and feature names and may
//! be absent; the `KSKM` trailer carries the resolved kernel parameters.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddingConfig, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, KernelParams};
use crate::matrix::Matrix;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"KSEM";
pub const KERNEL_MAGIC: &[u8; 4] = b"KSKM";
pub const FORMAT_VERSION: u32 = 1;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path.display().to_string(), format!("{other:?}")),
    }
}

fn parse_f64(path: &Path, line: u64, field: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| {
        Error::format(
            path.display().to_string(),
            format!("line {line}: '{field}' is not a number"),
        )
    })
}

/// Reads a file's first four bytes, if it has that many.
fn sniff(path: &Path) -> Result<Option<[u8; 4]>> {
    use std::io::Read;
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = [0u8; 4];
    match f.read_exact(&mut buf) {
        Ok(()) => Ok(Some(buf)),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::format(self.what, format!("truncated at byte {} (wanted {len} more)", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::format(self.what, "size field overflows"))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(8).ok_or_else(|| Error::format(self.what, "size overflow"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::format(self.what, "id is not UTF-8"))
    }

    fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn header(w: &mut impl Write, magic: &[u8; 4], dims: &[usize]) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

fn body(w: &mut impl Write, values: &[f64], ids: &[String], trailer: &str) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    for id in ids {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    w.write_all(&(trailer.len() as u32).to_le_bytes())?;
    w.write_all(trailer.as_bytes())
}

fn open_container<'a>(buf: &'a [u8], magic: &[u8; 4], what: &'a str) -> Result<Cursor<'a>> {
    let mut c = Cursor { buf, pos: 0, what };
    if c.take(4)? != magic {
        return Err(Error::format(what, "bad magic bytes"));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::format(what, format!("unsupported version {version}")));
    }
    Ok(c)
}

#[derive(Serialize, Deserialize)]
struct EmbeddingMeta {
    config: Option<EmbeddingConfig>,
    feature_names: Vec<String>,
}

pub fn write_embedding_bin(path: &Path, e: &EmbeddingMatrix) -> Result<()> {
    let meta = serde_json::to_string(&EmbeddingMeta {
        config: e.config.clone(),
        feature_names: e.feature_names.clone(),
    })
    .map_err(|err| Error::format("embedding metadata", err.to_string()))?;
    let mut w = create(path)?;
    header(&mut w, EMBEDDING_MAGIC, &[e.n(), e.dim()])
        .and_then(|_| body(&mut w, e.rows.as_slice(), &e.ids, &meta))
        .map_err(|err| Error::io(path, err))?;
    finish(w, path)
}

pub fn read_embedding_bin(path: &Path) -> Result<EmbeddingMatrix> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let what = path.display().to_string();
    let mut c = open_container(&buf, EMBEDDING_MAGIC, &what)?;
    let (n, d) = (c.u64()?, c.u64()?);
    let values = c.f64s(n.checked_mul(d).ok_or_else(|| Error::format(&what, "size overflow"))?)?;
    let ids = (0..n).map(|_| c.string()).collect::<Result<Vec<_>>>()?;
    let mut e = EmbeddingMatrix::from_matrix(Matrix::from_vec(n, d, values)?, ids)?;
    if !c.at_end() {
        let len = c.u32()? as usize;
        let meta: EmbeddingMeta = serde_json::from_slice(c.take(len)?)
            .map_err(|err| Error::format(&what, format!("metadata: {err}")))?;
        if meta.feature_names.len() != d {
            return Err(Error::format(&what, "feature name count does not match d"));
        }
        e.feature_names = meta.feature_names;
        e.config = meta.config;
    }
    Ok(e)
}

pub fn write_embedding_csv(path: &Path, e: &EmbeddingMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let head = std::iter::once("id").chain(e.feature_names.iter().map(String::as_str));
    w.write_record(head).map_err(|err| csv_err(path, err))?;
    for (id, row) in e.ids.iter().zip(e.rows.rows_iter()) {
        let rec = std::iter::once(id.clone()).chain(row.iter().map(f64::to_string));
        w.write_record(rec).map_err(|err| csv_err(path, err))?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

pub fn read_embedding_csv(path: &Path) -> Result<EmbeddingMatrix> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let head = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if head.is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    let feature_names: Vec<String> = head.iter().skip(1).map(str::to_string).collect();
    let d = feature_names.len();
    let (mut ids, mut values) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        ids.push(rec[0].to_string());
        for f in rec.iter().skip(1) {
            values.push(parse_f64(path, line as u64 + 2, f)?);
        }
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    let mut e = EmbeddingMatrix::from_matrix(Matrix::from_vec(ids.len(), d, values)?, ids)?;
    e.feature_names = feature_names;
    Ok(e)
}

/// Loads either embedding format, chosen by the leading magic bytes.
pub fn read_embedding(path: &Path) -> Result<EmbeddingMatrix> {
    if sniff(path)?.as_ref() == Some(EMBEDDING_MAGIC) {
        read_embedding_bin(path)
    } else {
        read_embedding_csv(path)
    }
}

/// Writes binary when the extension is `.ksem`/`.bin`, CSV otherwise.
pub fn write_embedding(path: &Path, e: &EmbeddingMatrix) -> Result<()> {
    match extension(path).as_deref() {
        Some("ksem") | Some("bin") => write_embedding_bin(path, e),
        _ => write_embedding_csv(path, e),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|s| s.to_str()).map(str::to_ascii_lowercase)
}

pub fn write_kernel_bin(path: &Path, k: &KernelMatrix) -> Result<()> {
    let params = serde_json::to_string(&k.params).map_err(|e| Error::format("kernel params", e.to_string()))?;
    let mut w = create(path)?;
    header(&mut w, KERNEL_MAGIC, &[k.n()])
        .and_then(|_| body(&mut w, k.values.as_slice(), &k.ids, &params))
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_kernel_bin(path: &Path) -> Result<KernelMatrix> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let what = path.display().to_string();
    let mut c = open_container(&buf, KERNEL_MAGIC, &what)?;
    let n = c.u64()?;
    let values = c.f64s(n.checked_mul(n).ok_or_else(|| Error::format(&what, "size overflow"))?)?;
    let ids = (0..n).map(|_| c.string()).collect::<Result<Vec<_>>>()?;
    let len = c.u32()? as usize;
    let params: KernelParams =
        serde_json::from_slice(c.take(len)?).map_err(|e| Error::format(&what, format!("params: {e}")))?;
    Ok(KernelMatrix {
        values: Matrix::from_vec(n, n, values)?,
        ids,
        params,
        compute_seconds: 0.0,
    })
}

/// Square CSV whose header row holds the ids. Parameters are not stored.
pub fn write_kernel_csv(path: &Path, k: &KernelMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(&k.ids).map_err(|e| csv_err(path, e))?;
    for row in k.values.rows_iter() {
        w.write_record(row.iter().map(f64::to_string)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a square kernel CSV; `params` describe how it was built.
pub fn read_kernel_csv(path: &Path, params: KernelParams) -> Result<KernelMatrix> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let ids: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    let n = ids.len();
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for f in rec.iter() {
            values.push(parse_f64(path, line as u64 + 2, f)?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::format(path.display().to_string(), format!("{rows} rows for {n} ids")));
    }
    Ok(KernelMatrix {
        values: Matrix::from_vec(n, n, values)?,
        ids,
        params,
        compute_seconds: 0.0,
    })
}

/// Loads either kernel format by magic bytes; CSV input gets `fallback` params.
pub fn read_kernel(path: &Path, fallback: KernelParams) -> Result<KernelMatrix> {
    if sniff(path)?.as_ref() == Some(KERNEL_MAGIC) {
        read_kernel_bin(path)
    } else {
        read_kernel_csv(path, fallback)
    }
}

/// Writes binary for `.kskm`/`.bin`, CSV otherwise.
pub fn write_kernel(path: &Path, k: &KernelMatrix) -> Result<()> {
    match extension(path).as_deref() {
        Some("kskm") | Some("bin") => write_kernel_bin(path, k),
        _ => write_kernel_csv(path, k),
    }
}

pub fn is_kernel_file(path: &Path) -> Result<bool> {
    Ok(sniff(path)?.as_ref() == Some(KERNEL_MAGIC))
}

/// Coordinates CSV with header `id,y1..y_dim`.
pub fn write_coords_csv(path: &Path, ids: &[String], y: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let head = std::iter::once("id".to_string()).chain((1..=y.ncols()).map(|c| format!("y{c}")));
    w.write_record(head).map_err(|e| csv_err(path, e))?;
    for (id, row) in ids.iter().zip(y.rows_iter()) {
        let rec = std::iter::once(id.clone()).chain(row.iter().map(f64::to_string));
        w.write_record(rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_coords_csv(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let e = read_embedding_csv(path)?;
    Ok((e.ids, e.rows))
}

pub fn write_kl_trace_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["iter", "kl"]).map_err(|e| csv_err(path, e))?;
    for (i, kl) in trace.iter().enumerate() {
        w.write_record([(i + 1).to_string(), kl.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}
