//! Flat binary parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "SLEDCKPT"
//! version  u32      1
//! digest   u64      ModelConfig::digest of the writing model
//! count    u32      number of tensors
//! count × {
//!     name_len u32, name (UTF-8, name_len bytes),
//!     rank u32, extents (rank × u64),
//!     data (product(extents) × f64)
//! }
//! ```
//!
//! Trainable tensors come first in registry order, then buffers.

use std::fs;
use std::path::Path;

use sled_tensor::Tensor;

use crate::error::{ModelError, Result};
use crate::model::StereoModel;
use crate::params::{Named, ParamStore};

pub const MAGIC: &[u8; 8] = b"SLEDCKPT";
pub const VERSION: u32 = 1;

pub fn encode(model: &StereoModel) -> Vec<u8> {
    let store = model.store();
    let tensors: Vec<&Named> = store.params().iter().chain(store.buffers()).collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&model.config().digest().to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.value.rank() as u32).to_le_bytes());
        for &e in t.value.shape() {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for &v in t.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            ModelError::Format(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parsed container contents.
pub struct Checkpoint {
    pub digest: u64,
    pub tensors: Vec<Named>,
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(ModelError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelError::Format(format!("unsupported version {version}")));
    }
    let digest = r.u64()?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let at = r.pos;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ModelError::Format(format!("tensor name at byte {at} is not UTF-8")))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|e| e as usize)).collect::<Result<Vec<_>>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .ok_or_else(|| ModelError::Format(format!("extents of {name} overflow")))?;
        let raw = r.take(numel.checked_mul(8).ok_or_else(|| ModelError::Format(format!("{name} too large")))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        tensors.push(Named { name, value: Tensor::new(shape, data)? });
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { digest, tensors })
}

/// Loads tensors into `model`, which must have been built from the same
/// configuration.
pub fn restore(model: &mut StereoModel, bytes: &[u8]) -> Result<()> {
    let ckpt = decode(bytes)?;
    let expected = model.config().digest();
    if ckpt.digest != expected {
        return Err(ModelError::Compatibility(format!(
            "config digest {:016x} does not match model digest {expected:016x}",
            ckpt.digest
        )));
    }
    let n_params = model.store().params().len();
    let mut loaded = ParamStore::default();
    for (i, t) in ckpt.tensors.into_iter().enumerate() {
        loaded.push_named(t, i >= n_params)?;
    }
    model.store_mut().copy_from(&loaded)
}

pub fn save(model: &StereoModel, path: &Path) -> Result<()> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load(model: &mut StereoModel, path: &Path) -> Result<()> {
    let bytes = fs::read(path)?;
    restore(model, &bytes)
}
