//! Hand-written reverse-mode kernels for the pattern models.
//!
//! Each layer exposes `forward` returning its output plus a cache, and
//! `backward` consuming the cache and the upstream gradient. There is no
//! general tape; the models chain layers explicitly.

mod adam;
mod dense;
mod gat;
pub mod gradcheck;
mod lstm;
mod matrix;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, Dense, DenseCache, DenseGrads};
pub use gat::{GatCache, GatGrads, GatLayer, Neighborhoods};
pub use lstm::{LstmCell, LstmGrads, LstmStepCache};
pub use matrix::Matrix;
pub use params::{decode_blocks, encode_blocks, glorot_uniform, BlockInfo, Parameterized};

use crate::error::{Error, Result};

/// Mean squared error and its gradient `2(pred − target)/n`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("MSE of an empty series".into()));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}
