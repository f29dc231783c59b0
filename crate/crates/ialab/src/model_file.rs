//! Binary model container.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `IALABLM\0` |
//! | 4 | format version (u32) |
//! | 13 × 8 | config: vocab, embed, hidden, layers, unroll, batch, epochs (u64); lr initial (f64), lr flat epochs (u64), lr decay, clip norm, init scale (f64); seed (u64) |
//! | 8 | parameter count (u64) |
//! | 8 × n | parameters in layout order (f64) |
//! | 4 | CRC-32 of everything above |

use std::fs;
use std::path::Path;

use ialab_core::seqmodel::{LrSchedule, LstmModel, ModelConfig, ModelError};
use thiserror::Error;

pub const MAGIC: [u8; 8] = *b"IALABLM\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file")]
    BadMagic,
    #[error("checksum mismatch: file is truncated or corrupt")]
    Checksum,
    #[error("unsupported model format version {0}, expected {VERSION}")]
    Version(u32),
    #[error("malformed model file: {0}")]
    Malformed(&'static str),
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
}

pub fn encode_model(model: &LstmModel) -> Vec<u8> {
    let c = model.config();
    let mut out = Vec::with_capacity(16 + 14 * 8 + model.params().len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for n in [c.vocab_size, c.embed_dim, c.hidden_dim, c.layers, c.unroll, c.batch, c.epochs] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    out.extend_from_slice(&c.lr.initial.to_le_bytes());
    out.extend_from_slice(&(c.lr.flat_epochs as u64).to_le_bytes());
    for x in [c.lr.decay, c.max_grad_norm, c.init_scale] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.extend_from_slice(&(model.params().len() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], ModelFileError> {
        if self.bytes.len() < N {
            return Err(ModelFileError::Malformed("unexpected end of data"));
        }
        let (head, rest) = self.bytes.split_at(N);
        self.bytes = rest;
        Ok(head.try_into().expect("length checked"))
    }

    fn u64(&mut self) -> Result<u64, ModelFileError> {
        self.take().map(u64::from_le_bytes)
    }

    fn usize(&mut self) -> Result<usize, ModelFileError> {
        usize::try_from(self.u64()?).map_err(|_| ModelFileError::Malformed("size does not fit"))
    }

    fn f64(&mut self) -> Result<f64, ModelFileError> {
        self.take().map(f64::from_le_bytes)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<LstmModel, ModelFileError> {
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 8 {
        return Err(ModelFileError::Checksum);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().expect("4 bytes")) {
        return Err(ModelFileError::Checksum);
    }
    let mut r = Reader { bytes: &body[MAGIC.len()..] };
    let version = u32::from_le_bytes(r.take()?);
    if version != VERSION {
        return Err(ModelFileError::Version(version));
    }
    let mut config = ModelConfig::new(r.usize()?);
    config.embed_dim = r.usize()?;
    config.hidden_dim = r.usize()?;
    config.layers = r.usize()?;
    config.unroll = r.usize()?;
    config.batch = r.usize()?;
    config.epochs = r.usize()?;
    config.lr = LrSchedule { initial: r.f64()?, flat_epochs: r.usize()?, decay: r.f64()? };
    config.max_grad_norm = r.f64()?;
    config.init_scale = r.f64()?;
    config.seed = r.u64()?;
    let n = r.usize()?;
    if r.bytes.len() != n.saturating_mul(8) {
        return Err(ModelFileError::Malformed("parameter count does not match data"));
    }
    let params = r.bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    Ok(LstmModel::from_parts(config, params)?)
}

pub fn save_model(model: &LstmModel, path: &Path) -> Result<(), ModelFileError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<LstmModel, ModelFileError> {
    decode_model(&fs::read(path)?)
}
