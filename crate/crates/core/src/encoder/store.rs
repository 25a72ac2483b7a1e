//! `LDSE` embedding store files.
//!
//! Layout: magic `LDSE`, u8 version (1), u32 dim, u32 record count, then per
//! record a u16 key length, the UTF-8 key bytes and `dim` f32 values. All
//! little-endian. Sample stores are keyed by the decimal sample index, label
//! stores by the verbatim label name.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::vector::Vector;

pub const STORE_MAGIC: &[u8; 4] = b"LDSE";
pub const STORE_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: IndexMap<String, Vector>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            vectors: IndexMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&Vector> {
        self.vectors.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vector) -> Result<()> {
        let key = key.into();
        vector.check_dim(self.dim)?;
        if key.len() > u16::MAX as usize {
            return Err(Error::Data(format!("key of {} bytes is too long", key.len())));
        }
        if self.vectors.contains_key(&key) {
            return Err(Error::Data(format!("duplicate key {key:?}")));
        }
        self.vectors.insert(key, vector);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(13 + self.len() * (2 + 16 + self.dim * 4));
        buf.extend_from_slice(STORE_MAGIC);
        buf.push(STORE_VERSION);
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (key, v) in &self.vectors {
            buf.extend_from_slice(&(key.len() as u16).to_le_bytes());
            buf.extend_from_slice(key.as_bytes());
            for &x in v.iter() {
                buf.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4).ok() != Some(STORE_MAGIC.as_slice()) {
            return Err(Error::NotAnEmbeddingStore);
        }
        let version = r.u8()?;
        if version != STORE_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = r.u32()? as usize;
        let count = r.u32()? as usize;
        if dim == 0 && count > 0 {
            return Err(Error::Data("store with records must have positive dim".into()));
        }
        let mut store = EmbeddingStore::new(dim);
        for _ in 0..count {
            let key_len = r.u16()? as usize;
            let key = std::str::from_utf8(r.take(key_len)?)
                .map_err(|e| Error::Data(format!("key is not UTF-8: {e}")))?
                .to_owned();
            let values = r.f32s(dim)?;
            store.insert(key, Vector::new(values)?)?;
        }
        if !r.is_empty() {
            return Err(Error::Data("trailing bytes after last record".into()));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Little-endian cursor shared by the binary formats.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Truncated(format!(
                    "need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| {
            Error::Truncated("value count overflows".into())
        })?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    pub(crate) fn until_nul(&mut self) -> Result<&'a [u8]> {
        let rest = &self.bytes[self.pos..];
        let len = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| Error::Truncated("unterminated token".into()))?;
        let out = &rest[..len];
        self.pos += len + 1;
        Ok(out)
    }
}
