//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "AGPLSTM\0"
//! version      u32      1
//! elem width   u32      4 (f32) or 8 (f64)
//! vocab        u64
//! embed        u64
//! hidden       u64
//! layers       u64
//! seed         u64
//! parameters   embedding, per layer (w, u, b), w_out, b_out; row-major floats
//! vocab bytes  u64, followed by the vocabulary as `token<TAB>count` lines
//! ```

use std::path::Path;

use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::numerics::Real;

use super::{ModelDims, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AGPLSTM\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 5 * 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint format: {0}")]
    Version(String),
    #[error("checkpoint truncated: needed {needed} bytes at offset {offset}, file has {len}")]
    Truncated { offset: usize, needed: usize, len: usize },
    #[error("inconsistent checkpoint dimensions: {0}")]
    Dimension(String),
    #[error("checkpoint vocabulary is invalid: {0}")]
    Vocabulary(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A loaded checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<F> {
    pub params: ModelParams<F>,
    pub vocab: Vocabulary,
    pub seed: u64,
}

pub fn checkpoint_bytes<F: Real>(
    params: &ModelParams<F>,
    vocab: &Vocabulary,
    seed: u64,
) -> Result<Vec<u8>, CheckpointError> {
    let d = params.validate().map_err(|e| CheckpointError::Dimension(e.to_string()))?;
    if d.vocab != vocab.len() {
        return Err(CheckpointError::Dimension(format!(
            "model has {} output classes but vocabulary has {} tokens",
            d.vocab,
            vocab.len()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + params.num_params() * F::WIDTH);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(F::WIDTH as u32).to_le_bytes());
    for v in [d.vocab, d.embed, d.hidden, d.layers] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&seed.to_le_bytes());
    for block in params.blocks() {
        for &v in block {
            v.write_le(&mut out);
        }
    }
    let text = vocab.to_tsv_string();
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    Ok(out)
}

pub fn save_checkpoint<F: Real>(
    params: &ModelParams<F>,
    vocab: &Vocabulary,
    seed: u64,
    path: &Path,
) -> Result<(), CheckpointError> {
    std::fs::write(path, checkpoint_bytes(params, vocab, seed)?)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(
            CheckpointError::Truncated { offset: self.pos, needed: n, len: self.bytes.len() },
        )?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Element width in bytes (4 or 8) declared by a checkpoint's header.
pub fn stored_width(bytes: &[u8]) -> Result<usize, CheckpointError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8).map_err(|_| CheckpointError::Version("missing magic bytes".into()))? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::Version("bad magic bytes".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(format!("version {version}, expected {CHECKPOINT_VERSION}")));
    }
    match cur.u32()? {
        w @ (4 | 8) => Ok(w as usize),
        w => Err(CheckpointError::Version(format!("element width {w}"))),
    }
}

/// Parses a checkpoint. Values stored at a different width are converted.
pub fn parse_checkpoint<F: Real>(bytes: &[u8]) -> Result<Checkpoint<F>, CheckpointError> {
    let width = stored_width(bytes)?;
    let mut cur = Cursor { bytes, pos: 16 };
    let mut dim = || -> Result<usize, CheckpointError> {
        usize::try_from(cur.u64()?).map_err(|_| CheckpointError::Dimension("dimension overflow".into()))
    };
    let dims = ModelDims { vocab: dim()?, embed: dim()?, hidden: dim()?, layers: dim()? };
    if dims.vocab < 2 || dims.embed == 0 || dims.hidden == 0 || dims.layers == 0 {
        return Err(CheckpointError::Dimension(format!("{dims:?}")));
    }
    let seed = cur.u64()?;
    let needed = dims
        .num_params()
        .checked_mul(width)
        .ok_or_else(|| CheckpointError::Dimension("parameter block overflow".into()))?;
    let raw = cur.take(needed)?;
    let values = raw.chunks_exact(width).map(|c| match width {
        4 => f32::from_le_bytes(c.try_into().unwrap()) as f64,
        _ => f64::from_le_bytes(c.try_into().unwrap()),
    });
    let mut params = ModelParams::<F>::zeros(dims);
    let mut values = values.map(F::from_f64_lossy);
    for block in params.blocks_mut() {
        for slot in block {
            *slot = values.next().expect("length checked");
        }
    }
    let vlen = usize::try_from(cur.u64()?).map_err(|_| CheckpointError::Dimension("vocabulary length".into()))?;
    let vbytes = cur.take(vlen)?;
    if cur.pos != bytes.len() {
        return Err(CheckpointError::Dimension(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    let vocab = Vocabulary::read_tsv(vbytes, "checkpoint").map_err(|e| CheckpointError::Vocabulary(e.to_string()))?;
    if vocab.len() != dims.vocab {
        return Err(CheckpointError::Dimension(format!(
            "header declares {} tokens, vocabulary has {}",
            dims.vocab,
            vocab.len()
        )));
    }
    Ok(Checkpoint { params, vocab, seed })
}

pub fn load_checkpoint<F: Real>(path: &Path) -> Result<Checkpoint<F>, CheckpointError> {
    parse_checkpoint(&std::fs::read(path)?)
}
