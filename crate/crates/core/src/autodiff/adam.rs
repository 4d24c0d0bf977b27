use serde::{Deserialize, Serialize};

use super::{Matrix, Parameterized};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps.is_finite()
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid Adam configuration {self:?}")))
        }
    }
}

/// Bias-corrected Adam moments for one model.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamState {
    pub fn new<M: Parameterized + ?Sized>(config: AdamConfig, model: &M) -> Result<Self> {
        config.validate()?;
        let zeros: Vec<Matrix> = model
            .param_blocks()
            .iter()
            .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Ok(AdamState {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        })
    }

    /// Apply one update. All gradients are checked before any parameter moves,
    /// so a non-finite gradient leaves the model untouched.
    pub fn step<M: Parameterized + ?Sized>(&mut self, model: &mut M, grads: &[Matrix]) -> Result<()> {
        {
            let blocks = model.param_blocks();
            if blocks.len() != grads.len() || blocks.len() != self.first.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} parameter blocks, {} gradients",
                    blocks.len(),
                    grads.len()
                )));
            }
            for ((name, p), g) in blocks.iter().zip(grads) {
                if p.shape() != g.shape() {
                    return Err(Error::ShapeMismatch(format!(
                        "gradient for `{name}` is {:?}, parameter is {:?}",
                        g.shape(),
                        p.shape()
                    )));
                }
                if !g.is_finite() {
                    return Err(Error::NonFiniteGradient(name.clone()));
                }
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in model
            .param_blocks_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Matrix);

    impl Parameterized for Scalar {
        fn param_blocks(&self) -> Vec<(String, &Matrix)> {
            vec![("x".into(), &self.0)]
        }
        fn param_blocks_mut(&mut self) -> Vec<&mut Matrix> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut model = Scalar(Matrix::new(1, 2, vec![1.0, -1.0]).unwrap());
        let mut opt = AdamState::new(AdamConfig::with_lr(0.01), &model).unwrap();
        opt.step(&mut model, &[Matrix::new(1, 2, vec![3.0, -0.5]).unwrap()]).unwrap();
        // Bias correction makes the first step ±lr regardless of gradient scale.
        assert!((model.0.get(0, 0) - 0.99).abs() < 1e-8);
        assert!((model.0.get(0, 1) + 0.99).abs() < 1e-8);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut model = Scalar(Matrix::new(1, 1, vec![5.0]).unwrap());
        let mut opt = AdamState::new(AdamConfig::with_lr(0.1), &model).unwrap();
        for _ in 0..2000 {
            let g = Matrix::new(1, 1, vec![2.0 * (model.0.get(0, 0) - 2.0)]).unwrap();
            opt.step(&mut model, &[g]).unwrap();
        }
        assert!((model.0.get(0, 0) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn non_finite_gradient_names_block_and_leaves_params() {
        let mut model = Scalar(Matrix::new(1, 1, vec![5.0]).unwrap());
        let mut opt = AdamState::new(AdamConfig::default(), &model).unwrap();
        let mut g = Matrix::zeros(1, 1);
        g.data_mut()[0] = f64::NAN;
        match opt.step(&mut model, &[g]) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "x"),
            other => panic!("{other:?}"),
        }
        assert_eq!(model.0.get(0, 0), 5.0);
        assert_eq!(opt.step, 0);
    }
}
