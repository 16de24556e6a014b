//! Model checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic       8 bytes  "OQAMODEL"
//! version     u32      = 1
//! header_len  u64
//! header      JSON: {config, layout, vocab, trainable}
//! tensors     f64 values in declared order:
//!   embedding matrix ((vocab+1) * dim, row-major; row 0 = unknown vector)
//!   align weight, align bias
//!   paragraph LSTM per layer: fwd then bwd (input weights, recurrent
//!   weights, bias)
//!   question LSTM likewise
//!   importance vector, start bilinear, end bilinear
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingTable;
use super::features::FeatureLayout;
use super::model::{Reader, ReaderParams};
use super::ReaderConfig;
use crate::error::{Error, Result};

const MODEL_MAGIC: &[u8; 8] = b"OQAMODEL";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ReaderConfig,
    layout: FeatureLayout,
    vocab: Vec<String>,
    trainable: Vec<usize>,
}

impl Reader {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(path, e);

        let header = Header {
            config: self.config.clone(),
            layout: self.layout.clone(),
            vocab: self.embedding.words().to_vec(),
            trainable: self.embedding.trainable_rows().to_vec(),
        };
        let header_bytes = serde_json::to_vec(&header)
            .map_err(|e| Error::format(path, format!("header encode: {e}")))?;

        w.write_all(MODEL_MAGIC).map_err(io_err)?;
        w.write_all(&MODEL_VERSION.to_le_bytes()).map_err(io_err)?;
        w.write_all(&(header_bytes.len() as u64).to_le_bytes())
            .map_err(io_err)?;
        w.write_all(&header_bytes).map_err(io_err)?;

        for &v in self.embedding.vectors().iter() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
        for v in self.params.to_flat() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Reader> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::format(path, "file too short for magic header"))?;
        if &magic != MODEL_MAGIC {
            return Err(Error::format(path, "bad magic; not a model checkpoint"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|e| Error::io(path, e))?;
        let version = u32::from_le_bytes(b4);
        if version != MODEL_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported checkpoint version {version}"),
            ));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|e| Error::io(path, e))?;
        let header_len = u64::from_le_bytes(b8) as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)
            .map_err(|_| Error::format(path, "truncated header"))?;
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::format(path, format!("header decode: {e}")))?;
        header.config.validate()?;

        let dim = header.layout.dim;
        let vocab_rows = header.vocab.len() + 1;
        let mut vectors = Array2::zeros((vocab_rows, dim));
        for i in 0..vocab_rows {
            for j in 0..dim {
                r.read_exact(&mut b8)
                    .map_err(|_| Error::format(path, "truncated embedding tensor"))?;
                vectors[(i, j)] = f64::from_le_bytes(b8);
            }
        }
        let embedding =
            EmbeddingTable::from_parts(dim, header.vocab, vectors, header.trainable);

        let mut params = ReaderParams::zeros(
            header.layout.width(),
            dim,
            header.config.hidden,
            header.config.layers,
        );
        let mut flat = vec![0.0; params.num_params()];
        for v in flat.iter_mut() {
            r.read_exact(&mut b8)
                .map_err(|_| Error::format(path, "truncated parameter tensor"))?;
            *v = f64::from_le_bytes(b8);
        }
        params = ReaderParams::from_flat(&params, &flat);

        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
            return Err(Error::format(path, "trailing bytes after tensors"));
        }

        Ok(Reader::from_parts(
            header.config,
            header.layout,
            embedding,
            params,
        ))
    }
}
