//! Versioned JSON manifest: `{version, <metadata...>, tensors: {name: {shape, dtype, data}}}`
//! where `data` is base64 of little-endian row-major values.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{NeuralError, ParamStore, Result, Scalar, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: [usize; 2],
    pub dtype: String,
    pub data: String,
}

impl TensorRecord {
    pub fn encode<T: Scalar>(t: &Tensor<T>) -> Self {
        let mut bytes = Vec::with_capacity(t.len() * T::BYTES);
        for &x in &t.data {
            x.write_le(&mut bytes);
        }
        Self { shape: t.shape(), dtype: T::DTYPE.to_string(), data: STANDARD.encode(bytes) }
    }

    pub fn decode<T: Scalar>(&self) -> Result<Tensor<T>> {
        if self.dtype != T::DTYPE {
            return Err(NeuralError::Checkpoint(format!("dtype {} where {} expected", self.dtype, T::DTYPE)));
        }
        let bytes = STANDARD.decode(&self.data).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        let [r, c] = self.shape;
        if bytes.len() != r * c * T::BYTES {
            return Err(NeuralError::Checkpoint(format!("{} bytes for shape {:?}", bytes.len(), self.shape)));
        }
        Tensor::from_vec(r, c, bytes.chunks_exact(T::BYTES).map(T::read_le).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    #[serde(flatten)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
    pub tensors: BTreeMap<String, TensorRecord>,
}

impl Manifest {
    pub fn from_store<T: Scalar>(store: &ParamStore<T>, metadata: serde_json::Map<String, serde_json::Value>) -> Self {
        let tensors =
            store.names().iter().zip(store.tensors()).map(|(n, t)| (n.clone(), TensorRecord::encode(t))).collect();
        Self { version: CHECKPOINT_VERSION, metadata, tensors }
    }

    /// Fills `template` (which fixes names, order and shapes) from the manifest.
    pub fn load_into<T: Scalar>(&self, template: &mut ParamStore<T>) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!("unsupported version {}", self.version)));
        }
        if self.tensors.len() != template.len() {
            return Err(NeuralError::Checkpoint(format!(
                "{} tensors in checkpoint, model has {}",
                self.tensors.len(),
                template.len()
            )));
        }
        for id in 0..template.len() {
            let name = template.name(id).to_string();
            let rec =
                self.tensors.get(&name).ok_or_else(|| NeuralError::Checkpoint(format!("missing tensor {name}")))?;
            let t = rec.decode::<T>()?;
            if t.shape() != template.tensor(id).shape() {
                return Err(NeuralError::Checkpoint(format!(
                    "tensor {name} has shape {:?}, model expects {:?}",
                    t.shape(),
                    template.tensor(id).shape()
                )));
            }
            *template.tensor_mut(id) = t;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| NeuralError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
