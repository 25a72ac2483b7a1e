//! `LDSC` checkpoint files.
//!
//! Layout: magic `LDSC`, u8 version (1), u32 vocab size, u32 dim, the vocab
//! tokens in id order each followed by a NUL byte, then `vocab x dim` f32
//! values, row-major. All integers and floats are little-endian. Parameters
//! are held as f64 in memory and narrowed to f32 on disk.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::params::EncoderParams;
use super::store::Reader;
use super::vocab::Vocabulary;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LDSC";
pub const CHECKPOINT_VERSION: u8 = 1;

pub fn encode_checkpoint(params: &EncoderParams, vocab: &Vocabulary) -> Result<Vec<u8>> {
    if params.vocab_size() != vocab.len() {
        return Err(Error::ShapeMismatch(format!(
            "table has {} rows but vocabulary has {} tokens",
            params.vocab_size(),
            vocab.len()
        )));
    }
    let mut buf = Vec::with_capacity(13 + params.table().len() * 4);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.push(CHECKPOINT_VERSION);
    buf.extend_from_slice(&(vocab.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(params.dim() as u32).to_le_bytes());
    for token in vocab.tokens() {
        if token.as_bytes().contains(&0) {
            return Err(Error::Data(format!("token {token:?} contains NUL")));
        }
        buf.extend_from_slice(token.as_bytes());
        buf.push(0);
    }
    for &x in params.table() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(EncoderParams, Vocabulary)> {
    let mut r = Reader::new(bytes);
    if r.take(4).ok() != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(Error::NotACheckpoint);
    }
    let version = r.u8()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let vocab_size = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let mut tokens = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        let raw = r.until_nul()?;
        let token = std::str::from_utf8(raw)
            .map_err(|e| Error::Data(format!("token is not UTF-8: {e}")))?;
        tokens.push(token.to_owned());
    }
    let table = r.f32s(vocab_size * dim)?;
    if !r.is_empty() {
        return Err(Error::Data("trailing bytes after checkpoint table".into()));
    }
    let vocab = Vocabulary::from_tokens(tokens)?;
    let params = EncoderParams::from_table(vocab_size, dim, table)?;
    Ok((params, vocab))
}

pub fn save_checkpoint(
    params: &EncoderParams,
    vocab: &Vocabulary,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(params, vocab)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(EncoderParams, Vocabulary)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
