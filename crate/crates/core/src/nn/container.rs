use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{NnError, ParameterSet, Tensor};

/// Serialized tensor: values as little-endian f64 bytes in base64.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: String,
}

pub fn encode_parameters(params: &ParameterSet) -> Vec<TensorRecord> {
    params
        .iter()
        .map(|(name, t)| {
            let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
            TensorRecord { name: name.to_string(), shape: t.shape().to_vec(), data: STANDARD.encode(bytes) }
        })
        .collect()
}

pub fn decode_parameters(records: &[TensorRecord]) -> Result<ParameterSet, NnError> {
    let mut params = ParameterSet::new();
    for r in records {
        let bytes = STANDARD.decode(&r.data).map_err(|e| NnError::Container(format!("tensor {}: {e}", r.name)))?;
        if bytes.len() % 8 != 0 {
            return Err(NnError::Container(format!("tensor {}: {} bytes is not a whole number of f64", r.name, bytes.len())));
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        params.push(&r.name, Tensor::from_vec(&r.shape, values).map_err(|e| NnError::Container(format!("tensor {}: {e}", r.name)))?);
    }
    Ok(params)
}
