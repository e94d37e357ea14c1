use std::fs;
use std::path::Path;

use super::adam::Adam;
use super::{ModelConfig, ModelError};
use crate::seed::Rng;

pub const MAGIC: &[u8; 5] = b"ENVID";
pub const FORMAT_VERSION: u32 = 1;

/// Training state on disk.
///
/// Layout: magic, u32 version, u32-length-prefixed config JSON, u64 parameter
/// count and little-endian f32 parameters, u64 Adam step with both moment
/// vectors, u32 epoch, f64 validation metric, u32-length-prefixed RNG JSON
/// (zero length when absent). All integers little-endian.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: Vec<f32>,
    pub optimizer: Adam<f32>,
    pub epoch: u32,
    pub validation_metric: f64,
    pub rng: Option<Rng>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let mut out = Vec::with_capacity(12 * self.params.len() + 256);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_text(&mut out, &to_json(&self.config)?);
        put_floats(&mut out, &self.params);
        out.extend_from_slice(&self.optimizer.step.to_le_bytes());
        out.extend_from_slice(&self.optimizer.lr.to_le_bytes());
        put_floats(&mut out, &self.optimizer.m);
        put_floats(&mut out, &self.optimizer.v);
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.validation_metric.to_le_bytes());
        let rng = match &self.rng {
            Some(r) => to_json(r)?,
            None => String::new(),
        };
        put_text(&mut out, &rng);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(5)? != MAGIC {
            return Err(ModelError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let config: ModelConfig = from_json(&r.text()?)?;
        let params = r.floats()?;
        let step = r.u64()?;
        let lr = f64::from_le_bytes(r.array()?);
        let m = r.floats()?;
        let v = r.floats()?;
        let epoch = r.u32()?;
        let validation_metric = f64::from_le_bytes(r.array()?);
        let rng_text = r.text()?;
        let rng = if rng_text.is_empty() {
            None
        } else {
            Some(from_json(&rng_text)?)
        };
        if r.pos != bytes.len() {
            return Err(ModelError::Checkpoint("trailing bytes".into()));
        }
        if m.len() != params.len() || v.len() != params.len() {
            return Err(ModelError::Checkpoint(
                "moment length differs from parameters".into(),
            ));
        }
        let mut optimizer = Adam::new(params.len(), lr);
        optimizer.step = step;
        optimizer.m = m;
        optimizer.v = v;
        Ok(Self {
            config,
            params,
            optimizer,
            epoch,
            validation_metric,
            rng,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn to_json<S: serde::Serialize>(v: &S) -> Result<String, ModelError> {
    serde_json::to_string(v).map_err(|e| ModelError::Checkpoint(e.to_string()))
}

fn from_json<D: serde::de::DeserializeOwned>(s: &str) -> Result<D, ModelError> {
    serde_json::from_str(s).map_err(|e| ModelError::Checkpoint(e.to_string()))
}

fn put_text(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_floats(out: &mut Vec<u8>, v: &[f32]) {
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelError::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ModelError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn text(&mut self) -> Result<String, ModelError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    fn floats(&mut self) -> Result<Vec<f32>, ModelError> {
        let n = self.u64()? as usize;
        let raw = self.take(
            n.checked_mul(4)
                .ok_or_else(|| ModelError::Checkpoint("length overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}
