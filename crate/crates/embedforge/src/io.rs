//! File formats: tab-separated interaction records, embedding text/binary
//! formats, whitespace-tokenized corpora, and digest helpers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::matrix::{consolidate, SparseInteractionMatrix};
use crate::vocab::EntityVocab;

const EMB_MAGIC: &[u8; 4] = b"EMB1";

/// Reads `row_key \t col_key \t weight` records; '#'-prefixed comment lines
/// and blank lines are ignored. For pair streams the weight column may be
/// omitted and defaults to 1.
pub fn read_interactions(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            message,
        };
        let row = fields
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| parse_err("missing row key".into()))?;
        let col = fields
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| parse_err("missing col key".into()))?;
        let weight = match fields.next() {
            None => 1.0,
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|e| parse_err(format!("bad weight '{raw}': {e}")))?,
        };
        if fields.next().is_some() {
            return Err(parse_err("too many fields".into()));
        }
        records.push((row.to_owned(), col.to_owned(), weight));
    }
    Ok(records)
}

/// Loads and consolidates a TSV interaction file into a matrix.
pub fn read_interaction_matrix(path: &Path) -> Result<SparseInteractionMatrix> {
    let records = read_interactions(path)?;
    consolidate(&records)
}

pub fn write_interactions(path: &Path, records: &[(String, String, f64)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (row, col, weight) in records {
        writeln!(w, "{row}\t{col}\t{weight}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `key \t v1 \t ... \t vd` with 9 significant digits per value.
pub fn write_embedding_text(path: &Path, emb: &EmbeddingMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (key, row) in emb.rows() {
        w.write_all(key.as_bytes()).map_err(|e| Error::io(path, e))?;
        for v in row {
            write!(w, "\t{v:.8e}").map_err(|e| Error::io(path, e))?;
        }
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_embedding_text(path: &Path) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut vocab = EntityVocab::new();
    let mut values: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let key = fields.next().unwrap_or_default();
        let row: std::result::Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
        let row = row.map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            message: format!("bad value: {e}"),
        })?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    message: format!("expected {d} values, got {}", row.len()),
                })
            }
            _ => {}
        }
        vocab.intern(key);
        values.extend(row);
    }
    EmbeddingMatrix::from_values(vocab, dim.unwrap_or(0), values)
}

/// Binary embedding format: magic "EMB1", little-endian u32 dim, u64 count,
/// then per entity a u16 key length, the key bytes, and dim f32 values.
pub fn write_embedding_binary(path: &Path, emb: &EmbeddingMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    w.write_all(EMB_MAGIC).map_err(io_err)?;
    w.write_all(&(emb.dim() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(emb.len() as u64).to_le_bytes()).map_err(io_err)?;
    for (key, row) in emb.rows() {
        let bytes = key.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(Error::Format(format!("key too long: {} bytes", bytes.len())));
        }
        w.write_all(&(bytes.len() as u16).to_le_bytes()).map_err(io_err)?;
        w.write_all(bytes).map_err(io_err)?;
        for v in row {
            w.write_all(&(*v as f32).to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_embedding_binary(path: &Path) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io_err = |e| Error::io(path, e);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != EMB_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"EMB1\"")));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io_err)?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(io_err)?;
    let count = u64::from_le_bytes(u64buf) as usize;

    let mut vocab = EntityVocab::with_capacity(count);
    let mut values = Vec::with_capacity(count * dim);
    let mut f32buf = [0u8; 4];
    let mut u16buf = [0u8; 2];
    for _ in 0..count {
        r.read_exact(&mut u16buf).map_err(io_err)?;
        let key_len = u16::from_le_bytes(u16buf) as usize;
        let mut key_bytes = vec![0u8; key_len];
        r.read_exact(&mut key_bytes).map_err(io_err)?;
        let key = String::from_utf8(key_bytes)
            .map_err(|e| Error::Format(format!("key is not UTF-8: {e}")))?;
        vocab.intern(&key);
        for _ in 0..dim {
            r.read_exact(&mut f32buf).map_err(io_err)?;
            values.push(f32::from_le_bytes(f32buf) as f64);
        }
    }
    if vocab.len() != count {
        return Err(Error::Format("duplicate keys in embedding file".into()));
    }
    EmbeddingMatrix::from_values(vocab, dim, values)
}

/// Loads an embedding by extension: `.tsv`/`.txt` text, anything else binary.
pub fn read_embedding_auto(path: &Path) -> Result<EmbeddingMatrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("txt") => read_embedding_text(path),
        _ => read_embedding_binary(path),
    }
}

/// Writes an embedding by extension, mirroring [`read_embedding_auto`].
pub fn write_embedding_auto(path: &Path, emb: &EmbeddingMatrix) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("txt") => write_embedding_text(path, emb),
        _ => write_embedding_binary(path, emb),
    }
}

/// Reads one whitespace-tokenized sequence per line; blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut sequences = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if !tokens.is_empty() {
            sequences.push(tokens);
        }
    }
    Ok(sequences)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
