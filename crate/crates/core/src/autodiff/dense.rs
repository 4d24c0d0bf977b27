use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, Matrix, Parameterized};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output. ReLU uses 0 at 0.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// `y = act(x · W + b)` applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in × out`.
    pub weight: Matrix,
    /// `1 × out`.
    pub bias: Matrix,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Matrix,
    output: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl DenseGrads {
    pub fn into_blocks(self) -> Vec<Matrix> {
        vec![self.weight, self.bias]
    }
}

impl Dense {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        Dense {
            weight: glorot_uniform(in_dim, out_dim, in_dim, out_dim, rng),
            bias: Matrix::zeros(1, out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, DenseCache)> {
        x.check_shape(x.rows(), self.in_dim(), "dense input")?;
        let mut y = x.matmul(&self.weight);
        y.add_row_broadcast(self.bias.data());
        if self.activation != Activation::Identity {
            for v in y.data_mut() {
                *v = self.activation.apply(*v);
            }
        }
        Ok((
            y.clone(),
            DenseCache {
                input: x.clone(),
                output: y,
            },
        ))
    }

    pub fn backward(&self, cache: &DenseCache, grad_y: &Matrix) -> Result<(Matrix, DenseGrads)> {
        grad_y.check_shape(cache.output.rows(), self.out_dim(), "dense output gradient")?;
        let mut grad_pre = grad_y.clone();
        if self.activation != Activation::Identity {
            for (g, &y) in grad_pre.data_mut().iter_mut().zip(cache.output.data()) {
                *g *= self.activation.derivative_from_output(y);
            }
        }
        let grad_x = grad_pre.matmul_t(&self.weight);
        let grads = DenseGrads {
            weight: cache.input.t_matmul(&grad_pre),
            bias: grad_pre.column_sums(),
        };
        Ok((grad_x, grads))
    }
}

impl Parameterized for Dense {
    fn param_blocks(&self) -> Vec<(String, &Matrix)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input() {
        let layer = Dense {
            weight: Matrix::identity(3),
            bias: Matrix::zeros(1, 3),
            activation: Activation::Identity,
        };
        let x = Matrix::from_fn(2, 3, |r, c| r as f64 - c as f64 * 0.5);
        assert_eq!(layer.forward(&x).unwrap().0, x);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let layer = Dense {
            weight: Matrix::identity(1),
            bias: Matrix::zeros(1, 1),
            activation: Activation::Relu,
        };
        let x = Matrix::zeros(1, 1);
        let (_, cache) = layer.forward(&x).unwrap();
        let (gx, grads) = layer.backward(&cache, &Matrix::new(1, 1, vec![1.0]).unwrap()).unwrap();
        assert_eq!(gx.get(0, 0), 0.0);
        assert_eq!(grads.bias.get(0, 0), 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = Dense::new(3, 2, Activation::Tanh, &mut rng);
        assert!(layer.forward(&Matrix::zeros(1, 4)).is_err());
        let (_, cache) = layer.forward(&Matrix::zeros(1, 3)).unwrap();
        assert!(layer.backward(&cache, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn tanh_layer_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut layer = Dense::new(4, 3, Activation::Tanh, &mut rng);
        layer.bias = Matrix::from_fn(1, 3, |_, c| 0.1 * c as f64);
        let x = Matrix::from_fn(5, 4, |_, _| rng.gen_range(-1.0..1.0));
        let proj = Matrix::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
        let loss = |l: &Dense, x: &Matrix| gradcheck::weighted_sum(&l.forward(x).unwrap().0, &proj);

        let (_, cache) = layer.forward(&x).unwrap();
        let (gx, grads) = layer.backward(&cache, &proj).unwrap();
        let numeric = gradcheck::numeric_param_gradient(&mut layer, |l| loss(l, &x));
        assert!(gradcheck::max_relative_error(&grads.into_blocks(), &numeric) < 1e-6);
        let mut xm = x.clone();
        let numeric_x = gradcheck::numeric_matrix_gradient(&mut xm, |x| loss(&layer, x));
        assert!(gradcheck::max_relative_error(&[gx], &[numeric_x]) < 1e-6);
    }
}
