use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Anything holding trainable parameter blocks in a fixed order.
pub trait Parameterized {
    /// Named blocks; the order defines gradient and optimizer layout.
    fn param_blocks(&self) -> Vec<(String, &Matrix)>;

    fn param_blocks_mut(&mut self) -> Vec<&mut Matrix>;

    fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|(_, m)| m.data().len()).sum()
    }
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

/// Block manifest plus the concatenated little-endian `f64` values.
pub fn encode_blocks(blocks: &[(String, &Matrix)]) -> (Vec<BlockInfo>, Vec<u8>) {
    let mut infos = Vec::with_capacity(blocks.len());
    let mut bytes = Vec::new();
    for (name, m) in blocks {
        infos.push(BlockInfo {
            name: name.clone(),
            rows: m.rows(),
            cols: m.cols(),
        });
        for v in m.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    (infos, bytes)
}

pub fn decode_blocks(infos: &[BlockInfo], bytes: &[u8]) -> Result<Vec<Matrix>> {
    let mut total = 0usize;
    for info in infos {
        total = info
            .rows
            .checked_mul(info.cols)
            .and_then(|n| total.checked_add(n))
            .ok_or_else(|| Error::Parse(format!("block `{}` is too large", info.name)))?;
    }
    if total.checked_mul(8) != Some(bytes.len()) {
        return Err(Error::Parse(format!(
            "manifest describes {total} values but the block file holds {} bytes",
            bytes.len()
        )));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    infos
        .iter()
        .map(|info| {
            let data: Vec<f64> = values.by_ref().take(info.rows * info.cols).collect();
            Matrix::new(info.rows, info.cols, data).map_err(|e| Error::Parse(format!("block `{}`: {e}", info.name)))
        })
        .collect()
}
