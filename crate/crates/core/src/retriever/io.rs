//! Versioned binary index format, all integers little-endian:
//!
//! ```text
//! magic       8 bytes  "OQATFIDX"
//! version     u32      = 1
//! hash_bits   u32
//! seed        u32      murmur3 seed
//! ngram_mode  u32      1 = unigrams, 2 = unigrams+bigrams
//! num_docs    u64      N
//! df_len      u64      number of nonzero doc_freq entries
//! doc_freq    df_len * (bin u32, df u32), bin ascending
//! indptr      (N+1) * u64
//! indices     nnz * u32   (nnz = indptr[N]), bin ascending per row
//! counts      nnz * u32   raw term counts
//! doc_ids     N * (len u32, utf8 bytes)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{NgramMode, TfidfIndex};
use crate::error::{Error, Result};

const INDEX_MAGIC: &[u8; 8] = b"OQATFIDX";
const INDEX_VERSION: u32 = 1;

pub(crate) fn save(index: &TfidfIndex, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    w.write_all(INDEX_MAGIC).map_err(io_err)?;
    w.write_all(&INDEX_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&index.hash_bits.to_le_bytes()).map_err(io_err)?;
    w.write_all(&index.seed.to_le_bytes()).map_err(io_err)?;
    w.write_all(&index.mode.code().to_le_bytes()).map_err(io_err)?;
    w.write_all(&(index.doc_ids.len() as u64).to_le_bytes())
        .map_err(io_err)?;

    w.write_all(&(index.doc_freq.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    for &(bin, df) in &index.doc_freq {
        w.write_all(&bin.to_le_bytes()).map_err(io_err)?;
        w.write_all(&df.to_le_bytes()).map_err(io_err)?;
    }
    for &p in &index.indptr {
        w.write_all(&p.to_le_bytes()).map_err(io_err)?;
    }
    for &i in &index.indices {
        w.write_all(&i.to_le_bytes()).map_err(io_err)?;
    }
    for &c in &index.counts {
        w.write_all(&c.to_le_bytes()).map_err(io_err)?;
    }
    for id in &index.doc_ids {
        w.write_all(&(id.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(id.as_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub(crate) fn load(path: &Path) -> Result<TfidfIndex> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    read(&mut r, &mut magic, path)?;
    if &magic != INDEX_MAGIC {
        return Err(Error::format(path, "bad magic; not a TF-IDF index"));
    }
    let version = read_u32(&mut r, path)?;
    if version != INDEX_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported index version {version}"),
        ));
    }
    let hash_bits = read_u32(&mut r, path)?;
    if !(1..=32).contains(&hash_bits) {
        return Err(Error::format(path, format!("bad hash_bits {hash_bits}")));
    }
    let seed = read_u32(&mut r, path)?;
    let mode = NgramMode::from_code(read_u32(&mut r, path)?)
        .ok_or_else(|| Error::format(path, "bad ngram mode"))?;
    let num_docs = read_u64(&mut r, path)? as usize;

    let df_len = read_u64(&mut r, path)? as usize;
    let mut doc_freq = Vec::with_capacity(df_len);
    for _ in 0..df_len {
        let bin = read_u32(&mut r, path)?;
        let df = read_u32(&mut r, path)?;
        doc_freq.push((bin, df));
    }

    let mut indptr = Vec::with_capacity(num_docs + 1);
    for _ in 0..=num_docs {
        indptr.push(read_u64(&mut r, path)?);
    }
    let nnz = *indptr.last().unwrap_or(&0) as usize;
    let mut indices = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        indices.push(read_u32(&mut r, path)?);
    }
    let mut counts = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        counts.push(read_u32(&mut r, path)?);
    }
    let mut doc_ids = Vec::with_capacity(num_docs);
    for _ in 0..num_docs {
        let len = read_u32(&mut r, path)? as usize;
        let mut buf = vec![0u8; len];
        read(&mut r, &mut buf, path)?;
        doc_ids.push(
            String::from_utf8(buf).map_err(|_| Error::format(path, "doc id is not UTF-8"))?,
        );
    }

    Ok(TfidfIndex::finalize(
        hash_bits, seed, mode, indptr, indices, counts, doc_ids, doc_freq,
    ))
}

fn read<R: Read>(r: &mut R, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::format(path, "truncated index file"))
}

fn read_u32<R: Read>(r: &mut R, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    read(r, &mut b, path)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    read(r, &mut b, path)?;
    Ok(u64::from_le_bytes(b))
}
