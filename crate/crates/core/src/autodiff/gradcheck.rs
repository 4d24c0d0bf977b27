//! Central finite-difference checks for the analytic gradients.

use super::{Matrix, Parameterized};

/// Step used for central differences.
pub const STEP: f64 = 1e-5;

/// Denominator floor in [`relative_error`]; gradients far below this are
/// compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

pub fn max_relative_error(analytic: &[Matrix], numeric: &[Matrix]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "block count");
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| {
            assert_eq!(a.shape(), n.shape(), "block shape");
            a.data().iter().zip(n.data()).map(|(&x, &y)| relative_error(x, y))
        })
        .fold(0.0, f64::max)
}

/// Scalar probe loss `Σ y ⊙ weights`; its gradient w.r.t. `y` is `weights`.
pub fn weighted_sum(y: &Matrix, weights: &Matrix) -> f64 {
    assert_eq!(y.shape(), weights.shape());
    y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
}

/// Central-difference gradient of `loss` w.r.t. every parameter of `model`.
pub fn numeric_param_gradient<M: Parameterized>(model: &mut M, mut loss: impl FnMut(&M) -> f64) -> Vec<Matrix> {
    let shapes: Vec<(usize, usize)> = model.param_blocks().iter().map(|(_, m)| m.shape()).collect();
    let mut out = Vec::with_capacity(shapes.len());
    for (b, &(rows, cols)) in shapes.iter().enumerate() {
        let mut grad = Matrix::zeros(rows, cols);
        for i in 0..rows * cols {
            let orig = model.param_blocks_mut()[b].data()[i];
            model.param_blocks_mut()[b].data_mut()[i] = orig + STEP;
            let up = loss(model);
            model.param_blocks_mut()[b].data_mut()[i] = orig - STEP;
            let down = loss(model);
            model.param_blocks_mut()[b].data_mut()[i] = orig;
            grad.data_mut()[i] = (up - down) / (2.0 * STEP);
        }
        out.push(grad);
    }
    out
}

/// Central-difference gradient of `loss` w.r.t. the entries of `x`.
pub fn numeric_matrix_gradient(x: &mut Matrix, mut loss: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.data().len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + STEP;
        let up = loss(x);
        x.data_mut()[i] = orig - STEP;
        let down = loss(x);
        x.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * STEP);
    }
    grad
}
