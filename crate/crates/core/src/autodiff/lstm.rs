use rand::Rng;

use super::{glorot_uniform, Matrix, Parameterized};
use crate::error::{Error, Result};

const GATE_NAMES: [&str; 4] = ["input", "forget", "output", "candidate"];
const INPUT: usize = 0;
const FORGET: usize = 1;
const OUTPUT: usize = 2;
const CANDIDATE: usize = 3;

/// Standard LSTM cell. Every gate reads `[x_t ∥ h_{t-1}]` through its own
/// `(input + hidden) × hidden` weight and `1 × hidden` bias.
///
/// ```text
/// i = σ(z W_i + b_i)   f = σ(z W_f + b_f)   o = σ(z W_o + b_o)   g = tanh(z W_g + b_g)
/// c_t = f ⊙ c_{t-1} + i ⊙ g        h_t = o ⊙ tanh(c_t)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input_size: usize,
    pub hidden: usize,
    /// Gate order: input, forget, output, candidate.
    pub weights: [Matrix; 4],
    pub biases: [Matrix; 4],
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    z: Matrix,
    gates: [Matrix; 4],
    c_prev: Matrix,
    tanh_c: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub weights: [Matrix; 4],
    pub biases: [Matrix; 4],
}

impl LstmGrads {
    pub fn zeros_like(cell: &LstmCell) -> Self {
        let w = || Matrix::zeros(cell.input_size + cell.hidden, cell.hidden);
        let b = || Matrix::zeros(1, cell.hidden);
        LstmGrads {
            weights: [w(), w(), w(), w()],
            biases: [b(), b(), b(), b()],
        }
    }

    /// Blocks in [`LstmCell::param_blocks`] order.
    pub fn into_blocks(self) -> Vec<Matrix> {
        let [w0, w1, w2, w3] = self.weights;
        let [b0, b1, b2, b3] = self.biases;
        vec![w0, b0, w1, b1, w2, b2, w3, b3]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmCell {
    pub fn new<R: Rng>(input_size: usize, hidden: usize, rng: &mut R) -> Self {
        let fan_in = input_size + hidden;
        let mut w = || glorot_uniform(fan_in, hidden, fan_in, hidden, rng);
        let weights = [w(), w(), w(), w()];
        let b = || Matrix::zeros(1, hidden);
        LstmCell {
            input_size,
            hidden,
            weights,
            biases: [b(), b(), b(), b()],
        }
    }

    pub fn zeros(input_size: usize, hidden: usize) -> Self {
        let w = || Matrix::zeros(input_size + hidden, hidden);
        let b = || Matrix::zeros(1, hidden);
        LstmCell {
            input_size,
            hidden,
            weights: [w(), w(), w(), w()],
            biases: [b(), b(), b(), b()],
        }
    }

    /// One time step over a batch: `x` is `batch × input`, states are `batch × hidden`.
    pub fn step(&self, x: &Matrix, h_prev: &Matrix, c_prev: &Matrix) -> Result<(Matrix, Matrix, LstmStepCache)> {
        let batch = x.rows();
        x.check_shape(batch, self.input_size, "LSTM input")?;
        h_prev.check_shape(batch, self.hidden, "LSTM hidden state")?;
        c_prev.check_shape(batch, self.hidden, "LSTM cell state")?;
        for (k, w) in self.weights.iter().enumerate() {
            w.check_shape(self.input_size + self.hidden, self.hidden, GATE_NAMES[k])?;
            self.biases[k].check_shape(1, self.hidden, GATE_NAMES[k])?;
        }

        let z = x.hcat(h_prev);
        let gate = |k: usize, f: fn(f64) -> f64| {
            let mut m = z.matmul(&self.weights[k]);
            m.add_row_broadcast(self.biases[k].data());
            for v in m.data_mut() {
                *v = f(*v);
            }
            m
        };
        let gates = [
            gate(INPUT, sigmoid),
            gate(FORGET, sigmoid),
            gate(OUTPUT, sigmoid),
            gate(CANDIDATE, f64::tanh),
        ];

        let mut c = Matrix::zeros(batch, self.hidden);
        let mut tanh_c = Matrix::zeros(batch, self.hidden);
        let mut h = Matrix::zeros(batch, self.hidden);
        for idx in 0..batch * self.hidden {
            let cv = gates[FORGET].data()[idx] * c_prev.data()[idx] + gates[INPUT].data()[idx] * gates[CANDIDATE].data()[idx];
            let tc = cv.tanh();
            c.data_mut()[idx] = cv;
            tanh_c.data_mut()[idx] = tc;
            h.data_mut()[idx] = gates[OUTPUT].data()[idx] * tc;
        }
        let cache = LstmStepCache {
            z,
            gates,
            c_prev: c_prev.clone(),
            tanh_c,
        };
        Ok((h, c, cache))
    }

    /// Backward through one step. Accumulates parameter gradients into `grads`
    /// and returns `(dx, dh_prev, dc_prev)`.
    pub fn step_backward(
        &self,
        cache: &LstmStepCache,
        dh: &Matrix,
        dc: &Matrix,
        grads: &mut LstmGrads,
    ) -> Result<(Matrix, Matrix, Matrix)> {
        let batch = cache.z.rows();
        dh.check_shape(batch, self.hidden, "LSTM hidden gradient")?;
        dc.check_shape(batch, self.hidden, "LSTM cell gradient")?;
        let [i, f, o, g] = &cache.gates;

        let mut d_pre: [Matrix; 4] = std::array::from_fn(|_| Matrix::zeros(batch, self.hidden));
        let mut dc_prev = Matrix::zeros(batch, self.hidden);
        for idx in 0..batch * self.hidden {
            let (iv, fv, ov, gv) = (i.data()[idx], f.data()[idx], o.data()[idx], g.data()[idx]);
            let tc = cache.tanh_c.data()[idx];
            let dhv = dh.data()[idx];
            let dct = dc.data()[idx] + dhv * ov * (1.0 - tc * tc);
            d_pre[INPUT].data_mut()[idx] = dct * gv * iv * (1.0 - iv);
            d_pre[FORGET].data_mut()[idx] = dct * cache.c_prev.data()[idx] * fv * (1.0 - fv);
            d_pre[OUTPUT].data_mut()[idx] = dhv * tc * ov * (1.0 - ov);
            d_pre[CANDIDATE].data_mut()[idx] = dct * iv * (1.0 - gv * gv);
            dc_prev.data_mut()[idx] = dct * fv;
        }

        let mut dz = Matrix::zeros(batch, self.input_size + self.hidden);
        for k in 0..4 {
            grads.weights[k].add_assign(&cache.z.t_matmul(&d_pre[k]));
            grads.biases[k].add_assign(&d_pre[k].column_sums());
            dz.add_assign(&d_pre[k].matmul_t(&self.weights[k]));
        }
        let (dx, dh_prev) = dz.hsplit(self.input_size);
        Ok((dx, dh_prev, dc_prev))
    }

    /// Unroll over `xs` from zero initial state. Returns every hidden state.
    pub fn forward_sequence(&self, xs: &[Matrix]) -> Result<(Vec<Matrix>, Vec<LstmStepCache>)> {
        let batch = xs.first().map(Matrix::rows).unwrap_or(0);
        let mut h = Matrix::zeros(batch, self.hidden);
        let mut c = Matrix::zeros(batch, self.hidden);
        let mut hs = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let (h_next, c_next, cache) = self.step(x, &h, &c)?;
            hs.push(h_next.clone());
            caches.push(cache);
            h = h_next;
            c = c_next;
        }
        Ok((hs, caches))
    }

    /// Backpropagation through time. `grad_hs[t]` is the external gradient on
    /// `h_t` (if any). Returns input gradients per step and parameter gradients.
    pub fn backward_sequence(&self, caches: &[LstmStepCache], grad_hs: &[Option<Matrix>]) -> Result<(Vec<Matrix>, LstmGrads)> {
        if caches.len() != grad_hs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} steps vs {} hidden-state gradients",
                caches.len(),
                grad_hs.len()
            )));
        }
        let batch = caches.first().map(|c| c.z.rows()).unwrap_or(0);
        let mut grads = LstmGrads::zeros_like(self);
        let mut dh_next = Matrix::zeros(batch, self.hidden);
        let mut dc_next = Matrix::zeros(batch, self.hidden);
        let mut dxs = vec![Matrix::zeros(0, 0); caches.len()];
        for t in (0..caches.len()).rev() {
            let mut dh = dh_next;
            if let Some(g) = &grad_hs[t] {
                dh.add_assign(g);
            }
            let (dx, dh_prev, dc_prev) = self.step_backward(&caches[t], &dh, &dc_next, &mut grads)?;
            dxs[t] = dx;
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        Ok((dxs, grads))
    }
}

impl Parameterized for LstmCell {
    fn param_blocks(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::with_capacity(8);
        for k in 0..4 {
            out.push((format!("{}_weight", GATE_NAMES[k]), &self.weights[k]));
            out.push((format!("{}_bias", GATE_NAMES[k]), &self.biases[k]));
        }
        out
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::with_capacity(8);
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out
    }
}
