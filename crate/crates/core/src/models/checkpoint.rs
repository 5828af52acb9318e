use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

const MAGIC: &[u8; 8] = b"MTPHCKPT";
const VERSION: u32 = 1;

/// Detached copy of parameter values, safe to move across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot<T: Scalar> {
    entries: Vec<(String, Vec<usize>, Vec<T>)>,
}

/// Parameter tensor stored as f64, independent of the model's scalar type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl<T: Scalar> ParamSnapshot<T> {
    pub fn capture(params: &[(String, Tensor<T>)]) -> Self {
        let entries = params
            .iter()
            .map(|(name, t)| (name.clone(), t.shape().to_vec(), t.to_vec()))
            .collect();
        ParamSnapshot { entries }
    }

    /// Writes the stored values into `params`, which must match by name,
    /// order and shape.
    pub fn apply(&self, params: &[(String, Tensor<T>)]) -> Result<()> {
        if params.len() != self.entries.len() {
            return Err(Error::Checkpoint(format!(
                "snapshot has {} tensors, model has {}",
                self.entries.len(),
                params.len()
            )));
        }
        for ((name, shape, _), (pname, tensor)) in self.entries.iter().zip(params) {
            if name != pname {
                return Err(Error::Checkpoint(format!("expected tensor '{pname}', found '{name}'")));
            }
            if shape.as_slice() != tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}' has shape {shape:?}, model expects {:?}",
                    tensor.shape()
                )));
            }
        }
        for ((_, _, data), (_, tensor)) in self.entries.iter().zip(params) {
            tensor.data_mut().copy_from_slice(data);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_named_tensors(&self) -> Vec<NamedTensor> {
        self.entries
            .iter()
            .map(|(name, shape, data)| NamedTensor {
                name: name.clone(),
                shape: shape.clone(),
                data: data.iter().map(|v| v.to_f64_lossy()).collect(),
            })
            .collect()
    }

    pub fn from_named_tensors(tensors: &[NamedTensor]) -> Self {
        let entries = tensors
            .iter()
            .map(|t| {
                let data = t.data.iter().map(|&v| T::from_f64_lossy(v)).collect();
                (t.name.clone(), t.shape.clone(), data)
            })
            .collect();
        ParamSnapshot { entries }
    }
}

/// Serialized model: a JSON config echo plus named f64 tensors.
///
/// Layout (little-endian): magic `MTPHCKPT`, u32 version, u64 config length,
/// config bytes, u64 tensor count, then per tensor u32 name length, name,
/// u32 rank, u64 dims, f64 data.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_json: String,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config_json.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config_json.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u64).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let config_len = r.len_u64()?;
        let config_json = r.string(config_len)?;
        let count = r.len_u64()?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = r.string(name_len)?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.len_u64()).collect::<Result<Vec<_>>>()?;
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Checkpoint(format!("tensor '{name}' is too large")))?;
            let raw = r.take(numel.checked_mul(8).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after the last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint { config_json, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn config(&self) -> Result<serde_json::Value> {
        serde_json::from_str(&self.config_json).map_err(|e| Error::Checkpoint(format!("bad config JSON: {e}")))
    }

    /// The architecture stored under `"model"` in the config echo.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut config = self.config()?;
        let model = config
            .get_mut("model")
            .map(serde_json::Value::take)
            .ok_or_else(|| Error::Checkpoint("config has no 'model' entry".into()))?;
        serde_json::from_value(model).map_err(|e| Error::Checkpoint(format!("bad model config: {e}")))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated checkpoint at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn len_u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("length {v} does not fit in memory")))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Checkpoint(format!("invalid UTF-8: {e}")))
    }
}
