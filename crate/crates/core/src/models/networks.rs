//! The two trainable pattern networks with explicit forward/backward passes.

use rand::Rng;

use crate::autodiff::{
    Activation, Dense, DenseCache, GatCache, GatLayer, LstmCell, LstmStepCache, Matrix, Neighborhoods, Parameterized,
};
use crate::error::{Error, Result};

fn prefixed<'a>(prefix: &str, blocks: Vec<(String, &'a Matrix)>) -> impl Iterator<Item = (String, &'a Matrix)> + 'a {
    let prefix = prefix.to_string();
    blocks.into_iter().map(move |(n, m)| (format!("{prefix}.{n}"), m))
}

/// Dense encoder over each node's flattened lookback, `k` attention layers,
/// a dense decoder, and a linear head that also sees the auxiliary streams.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnCoder {
    pub encoder: Dense,
    pub gat: Vec<GatLayer>,
    pub decoder: Dense,
    pub head: Dense,
}

#[derive(Debug, Clone)]
pub struct GnnCache {
    encoder: DenseCache,
    gat: Vec<GatCache>,
    decoder: DenseCache,
    head: DenseCache,
}

impl GnnCoder {
    pub fn new<R: Rng>(input_dim: usize, hidden: usize, gat_layers: usize, n_streams: usize, rng: &mut R) -> Self {
        let encoder = Dense::new(input_dim, hidden, Activation::Tanh, rng);
        let gat = (0..gat_layers).map(|_| GatLayer::new(hidden, hidden, rng)).collect();
        let decoder = Dense::new(hidden, hidden, Activation::Tanh, rng);
        let head = Dense::new(hidden + n_streams, 1, Activation::Identity, rng);
        GnnCoder {
            encoder,
            gat,
            decoder,
            head,
        }
    }

    pub fn n_streams(&self) -> usize {
        self.head.in_dim() - self.decoder.out_dim()
    }

    /// `x` is `nodes × input_dim`, `aux` is `nodes × n_streams`. Returns `nodes × 1`.
    pub fn forward(&self, x: &Matrix, aux: &Matrix, nbhd: &Neighborhoods) -> Result<(Matrix, GnnCache)> {
        if x.rows() != nbhd.len() || aux.rows() != x.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} input rows and {} auxiliary rows for a {}-node graph",
                x.rows(),
                aux.rows(),
                nbhd.len()
            )));
        }
        aux.check_shape(x.rows(), self.n_streams(), "auxiliary streams")?;
        let (mut h, encoder) = self.encoder.forward(x)?;
        let mut gat = Vec::with_capacity(self.gat.len());
        for layer in &self.gat {
            let (next, cache) = layer.forward(&h, nbhd)?;
            gat.push(cache);
            h = next;
        }
        let (d, decoder) = self.decoder.forward(&h)?;
        let (y, head) = self.head.forward(&d.hcat(aux))?;
        Ok((
            y,
            GnnCache {
                encoder,
                gat,
                decoder,
                head,
            },
        ))
    }

    /// Parameter gradients in [`Parameterized::param_blocks`] order.
    pub fn backward(&self, cache: &GnnCache, nbhd: &Neighborhoods, grad_y: &Matrix) -> Result<Vec<Matrix>> {
        let (g_in, head) = self.head.backward(&cache.head, grad_y)?;
        let (g_d, _) = g_in.hsplit(self.decoder.out_dim());
        let (mut g, decoder) = self.decoder.backward(&cache.decoder, &g_d)?;
        let mut gat_grads = Vec::with_capacity(self.gat.len());
        for (layer, c) in self.gat.iter().zip(&cache.gat).rev() {
            let (g_prev, grads) = layer.backward(c, nbhd, &g)?;
            gat_grads.push(grads);
            g = g_prev;
        }
        gat_grads.reverse();
        let (_, encoder) = self.encoder.backward(&cache.encoder, &g)?;

        let mut out = encoder.into_blocks();
        for grads in gat_grads {
            out.extend(grads.into_blocks());
        }
        out.extend(decoder.into_blocks());
        out.extend(head.into_blocks());
        Ok(out)
    }
}

impl Parameterized for GnnCoder {
    fn param_blocks(&self) -> Vec<(String, &Matrix)> {
        let mut out: Vec<(String, &Matrix)> = prefixed("encoder", self.encoder.param_blocks()).collect();
        for (i, layer) in self.gat.iter().enumerate() {
            out.extend(prefixed(&format!("gat{i}"), layer.param_blocks()));
        }
        out.extend(prefixed("decoder", self.decoder.param_blocks()));
        out.extend(prefixed("head", self.head.param_blocks()));
        out
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.encoder.param_blocks_mut();
        for layer in self.gat.iter_mut() {
            out.extend(layer.param_blocks_mut());
        }
        out.extend(self.decoder.param_blocks_mut());
        out.extend(self.head.param_blocks_mut());
        out
    }
}

/// LSTM over the lookback rows; the final hidden state (plus auxiliary
/// streams) feeds a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmForecaster {
    pub cell: LstmCell,
    pub head: Dense,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: Vec<LstmStepCache>,
    head: DenseCache,
}

impl LstmForecaster {
    pub fn new<R: Rng>(n_features: usize, hidden: usize, n_streams: usize, rng: &mut R) -> Self {
        let cell = LstmCell::new(n_features, hidden, rng);
        let head = Dense::new(hidden + n_streams, 1, Activation::Identity, rng);
        LstmForecaster { cell, head }
    }

    pub fn n_streams(&self) -> usize {
        self.head.in_dim() - self.cell.hidden
    }

    /// `xs[t]` is `batch × n_features`; `aux` is `batch × n_streams`. Returns `batch × 1`.
    pub fn forward(&self, xs: &[Matrix], aux: &Matrix) -> Result<(Matrix, LstmCache)> {
        if xs.is_empty() {
            return Err(Error::ShapeMismatch("empty input sequence".into()));
        }
        aux.check_shape(xs[0].rows(), self.n_streams(), "auxiliary streams")?;
        let (hs, steps) = self.cell.forward_sequence(xs)?;
        let last = hs.last().expect("non-empty sequence");
        let (y, head) = self.head.forward(&last.hcat(aux))?;
        Ok((y, LstmCache { steps, head }))
    }

    pub fn backward(&self, cache: &LstmCache, grad_y: &Matrix) -> Result<Vec<Matrix>> {
        let (g_in, head) = self.head.backward(&cache.head, grad_y)?;
        let (g_h, _) = g_in.hsplit(self.cell.hidden);
        let mut grad_hs = vec![None; cache.steps.len()];
        *grad_hs.last_mut().expect("non-empty sequence") = Some(g_h);
        let (_, cell) = self.cell.backward_sequence(&cache.steps, &grad_hs)?;
        let mut out = cell.into_blocks();
        out.extend(head.into_blocks());
        Ok(out)
    }
}

impl Parameterized for LstmForecaster {
    fn param_blocks(&self) -> Vec<(String, &Matrix)> {
        let mut out: Vec<(String, &Matrix)> = prefixed("lstm", self.cell.param_blocks()).collect();
        out.extend(prefixed("head", self.head.param_blocks()));
        out
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.cell.param_blocks_mut();
        out.extend(self.head.param_blocks_mut());
        out
    }
}
