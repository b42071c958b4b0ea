//! Little-endian binary checkpoint:
//!
//! ```text
//! "FNLA" u16 version
//! u32 × 7 dims (image w, h, channels; C; M; map w, h)
//! u64 seed, u32 epoch
//! u32 n, n × (str key, str value)          str = u32 len + UTF-8
//! u32 n, n × (str name, u8 trainable, u32 ndim, u32 × ndim, f64 × len)
//! ```
//!
//! The model configuration beyond the dims travels in the metadata block
//! under `model.*` keys; f32 parameters are widened losslessly.

use std::fs;
use std::path::Path;

use super::IoError;
use crate::model::{Model, ModelConfig, ParamEntry, ParamStore, Tensor};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FNLA";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointDims {
    pub image_width: u32,
    pub image_height: u32,
    pub image_channels: u32,
    pub channels: u32,
    pub paths: u32,
    pub map_width: u32,
    pub map_height: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoredTensor {
    pub name: String,
    pub trainable: bool,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub dims: CheckpointDims,
    pub seed: u64,
    pub epoch: u32,
    pub metadata: Vec<(String, String)>,
    pub tensors: Vec<StoredTensor>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        if self.bytes.len() - self.pos < n {
            return Err(IoError::CorruptCheckpoint(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], IoError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn len(&mut self) -> Result<usize, IoError> {
        let n = self.u32()? as usize;
        // A length can never exceed what is left; reject before allocating.
        if n > self.bytes.len() - self.pos {
            return Err(IoError::CorruptCheckpoint(format!("length {n} exceeds remaining data")));
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String, IoError> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| IoError::CorruptCheckpoint("invalid UTF-8".into()))
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend(s.as_bytes());
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = CHECKPOINT_MAGIC.to_vec();
        out.extend(CHECKPOINT_VERSION.to_le_bytes());
        let d = &self.dims;
        for v in [d.image_width, d.image_height, d.image_channels, d.channels, d.paths, d.map_width, d.map_height] {
            out.extend(v.to_le_bytes());
        }
        out.extend(self.seed.to_le_bytes());
        out.extend(self.epoch.to_le_bytes());
        out.extend((self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend((self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_str(&mut out, &t.name);
            out.push(t.trainable as u8);
            out.extend((t.shape.len() as u32).to_le_bytes());
            for &s in &t.shape {
                out.extend((s as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend(v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        if bytes.get(..4) != Some(&CHECKPOINT_MAGIC[..]) {
            return Err(IoError::BadMagic);
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = u16::from_le_bytes(r.array()?);
        if version != CHECKPOINT_VERSION {
            return Err(IoError::UnsupportedVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let dims = CheckpointDims {
            image_width: r.u32()?,
            image_height: r.u32()?,
            image_channels: r.u32()?,
            channels: r.u32()?,
            paths: r.u32()?,
            map_width: r.u32()?,
            map_height: r.u32()?,
        };
        let seed = u64::from_le_bytes(r.array()?);
        let epoch = r.u32()?;
        let n_meta = r.len()?;
        let mut metadata = Vec::with_capacity(n_meta);
        for _ in 0..n_meta {
            metadata.push((r.string()?, r.string()?));
        }
        let n_tensors = r.len()?;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name = r.string()?;
            let trainable = match r.take(1)?[0] {
                0 => false,
                1 => true,
                b => return Err(IoError::CorruptCheckpoint(format!("bad trainable flag {b} on `{name}`"))),
            };
            let ndim = r.len()?;
            let shape = (0..ndim).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
            let len: usize = shape.iter().product();
            let raw = r.take(len.checked_mul(8).ok_or_else(|| IoError::CorruptCheckpoint("tensor too large".into()))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push(StoredTensor {
                name,
                trainable,
                shape,
                data,
            });
        }
        if r.pos != bytes.len() {
            return Err(IoError::CorruptCheckpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            dims,
            seed,
            epoch,
            metadata,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_bytes()).map_err(|e| IoError::from_std(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_bytes(&fs::read(path).map_err(|e| IoError::from_std(path, e))?)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// `extra` is appended to the metadata after the `model.*` keys.
    pub fn from_model<T: Scalar>(model: &Model<T>, seed: u64, epoch: u32, extra: &[(String, String)]) -> Self {
        let c = model.config();
        let dims = CheckpointDims {
            image_width: c.image_width as u32,
            image_height: c.image_height as u32,
            image_channels: c.image_channels as u32,
            channels: c.channels as u32,
            paths: c.paths as u32,
            map_width: c.map_width as u32,
            map_height: c.map_height as u32,
        };
        let widths = c.encoder_widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",");
        let mut metadata = vec![
            ("model.order".to_string(), c.order.to_string()),
            ("model.placement".to_string(), c.placement.to_string()),
            ("model.constraint".to_string(), c.constraint.to_string()),
            // `{:?}` prints the shortest string that parses back to the same bits.
            ("model.epsilon".to_string(), format!("{:?}", c.epsilon)),
            ("model.encoder".to_string(), widths),
            ("model.decoder".to_string(), c.decoder.to_spec_string()),
            ("model.precision".to_string(), T::NAME.to_string()),
        ];
        metadata.extend(extra.iter().cloned());
        let tensors = model
            .params
            .entries
            .iter()
            .map(|e| StoredTensor {
                name: e.name.clone(),
                trainable: e.trainable,
                shape: e.tensor.shape.clone(),
                data: e.tensor.data.iter().map(|v| v.to_f64_lossy()).collect(),
            })
            .collect();
        Self {
            dims,
            seed,
            epoch,
            metadata,
            tensors,
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig, IoError> {
        let need = |k: &str| {
            self.meta(k)
                .ok_or_else(|| IoError::CorruptCheckpoint(format!("missing metadata `{k}`")))
        };
        let bad = |k: &str, e: String| IoError::CorruptCheckpoint(format!("metadata `{k}`: {e}"));
        let encoder_widths = need("model.encoder")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|e| bad("model.encoder", e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let d = &self.dims;
        Ok(ModelConfig {
            image_width: d.image_width as usize,
            image_height: d.image_height as usize,
            image_channels: d.image_channels as usize,
            channels: d.channels as usize,
            paths: d.paths as usize,
            placement: need("model.placement")?.parse().map_err(|e: String| bad("model.placement", e))?,
            map_width: d.map_width as usize,
            map_height: d.map_height as usize,
            order: need("model.order")?.parse().map_err(|e: String| bad("model.order", e))?,
            constraint: need("model.constraint")?.parse().map_err(|e: String| bad("model.constraint", e))?,
            epsilon: need("model.epsilon")?
                .parse()
                .map_err(|e: std::num::ParseFloatError| bad("model.epsilon", e.to_string()))?,
            encoder_widths,
            decoder: need("model.decoder")?.parse().map_err(|e: String| bad("model.decoder", e))?,
        })
    }

    pub fn to_model<T: Scalar>(&self) -> Result<Model<T>, IoError> {
        let params = ParamStore {
            entries: self
                .tensors
                .iter()
                .map(|t| ParamEntry {
                    name: t.name.clone(),
                    tensor: Tensor::new(t.shape.clone(), t.data.iter().map(|&v| T::from_f64_lossy(v)).collect()),
                    trainable: t.trainable,
                })
                .collect(),
        };
        Model::from_params(self.model_config()?, params).map_err(|e| IoError::CorruptCheckpoint(e.to_string()))
    }
}
