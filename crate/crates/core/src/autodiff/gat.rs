use rand::Rng;

use super::matrix::dot;
use super::{glorot_uniform, Matrix, Parameterized};
use crate::error::{Error, Result};
use crate::graph::BinGraph;

/// Attention neighborhoods `N_i`, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    lists: Vec<Vec<usize>>,
}

impl Neighborhoods {
    /// Graph neighbors of each node, plus the node itself when `include_self`.
    pub fn from_graph(graph: &BinGraph, include_self: bool) -> Result<Self> {
        Self::from_adjacency(graph.adjacency(), include_self)
    }

    pub fn from_adjacency(mut lists: Vec<Vec<usize>>, include_self: bool) -> Result<Self> {
        let n = lists.len();
        for (i, list) in lists.iter_mut().enumerate() {
            list.retain(|&j| j != i);
            if include_self {
                list.push(i);
            }
            list.sort_unstable();
            list.dedup();
            if list.is_empty() {
                return Err(Error::EmptyNeighborhood(i));
            }
            if list.iter().any(|&j| j >= n) {
                return Err(Error::InvalidArgument(format!("neighbor of node {i} out of range")));
            }
        }
        Ok(Neighborhoods { lists })
    }

    /// Self-only neighborhoods: attention collapses to the node itself.
    pub fn self_only(n: usize) -> Self {
        Neighborhoods {
            lists: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn of(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }
}

/// Single-head graph attention layer.
///
/// `α_ij = softmax_{j ∈ N_i}(LeakyReLU(aᵀ[W h_i ∥ W h_j]))` and
/// `h'_i = elu(Σ_j α_ij W h_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    /// `in × out`.
    pub weight: Matrix,
    /// `1 × 2·out`: first half scores the center node, second half the neighbor.
    pub attention: Matrix,
    pub leaky_slope: f64,
}

#[derive(Debug, Clone)]
pub struct GatCache {
    input: Matrix,
    z: Matrix,
    /// Per node, aligned with its neighborhood list.
    pub alpha: Vec<Vec<f64>>,
    raw: Vec<Vec<f64>>,
    pre: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatGrads {
    pub weight: Matrix,
    pub attention: Matrix,
}

impl GatGrads {
    pub fn into_blocks(self) -> Vec<Matrix> {
        vec![self.weight, self.attention]
    }
}

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

impl GatLayer {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        GatLayer {
            weight: glorot_uniform(in_dim, out_dim, in_dim, out_dim, rng),
            attention: glorot_uniform(1, 2 * out_dim, 2 * out_dim, 1, rng),
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, h: &Matrix, nbhd: &Neighborhoods) -> Result<(Matrix, GatCache)> {
        h.check_shape(nbhd.len(), self.in_dim(), "GAT node features")?;
        self.attention.check_shape(1, 2 * self.out_dim(), "GAT attention vector")?;
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::InvalidArgument(format!("leaky slope {} outside (0, 1)", self.leaky_slope)));
        }
        let out_dim = self.out_dim();
        let z = h.matmul(&self.weight);
        let (a_src, a_dst) = self.attention.data().split_at(out_dim);
        let s_src: Vec<f64> = (0..z.rows()).map(|i| dot(a_src, z.row(i))).collect();
        let s_dst: Vec<f64> = (0..z.rows()).map(|j| dot(a_dst, z.row(j))).collect();

        let mut alpha = Vec::with_capacity(nbhd.len());
        let mut raw = Vec::with_capacity(nbhd.len());
        let mut pre = Matrix::zeros(nbhd.len(), out_dim);
        for i in 0..nbhd.len() {
            let members = nbhd.of(i);
            let r: Vec<f64> = members.iter().map(|&j| s_src[i] + s_dst[j]).collect();
            let e: Vec<f64> = r.iter().map(|&x| leaky(x, self.leaky_slope)).collect();
            let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = e.iter().map(|&x| (x - max).exp()).collect();
            let total: f64 = exp.iter().sum();
            let a: Vec<f64> = exp.iter().map(|&x| x / total).collect();
            let row = pre.row_mut(i);
            for (&j, &w) in members.iter().zip(&a) {
                for (p, &zj) in row.iter_mut().zip(z.row(j)) {
                    *p += w * zj;
                }
            }
            alpha.push(a);
            raw.push(r);
        }
        let out = pre.map(elu);
        Ok((
            out,
            GatCache {
                input: h.clone(),
                z,
                alpha,
                raw,
                pre,
            },
        ))
    }

    pub fn backward(&self, cache: &GatCache, nbhd: &Neighborhoods, grad_out: &Matrix) -> Result<(Matrix, GatGrads)> {
        grad_out.check_shape(nbhd.len(), self.out_dim(), "GAT output gradient")?;
        let out_dim = self.out_dim();
        let n = nbhd.len();
        let (a_src, a_dst) = self.attention.data().split_at(out_dim);
        let z = &cache.z;

        let mut d_pre = grad_out.clone();
        for (g, &p) in d_pre.data_mut().iter_mut().zip(cache.pre.data()) {
            *g *= elu_derivative(p);
        }

        let mut dz = Matrix::zeros(n, out_dim);
        let mut ds_src = vec![0.0; n];
        let mut ds_dst = vec![0.0; n];
        for i in 0..n {
            let members = nbhd.of(i);
            let alpha = &cache.alpha[i];
            let g = d_pre.row(i);
            let d_alpha: Vec<f64> = members.iter().map(|&j| dot(g, z.row(j))).collect();
            let weighted: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
            for (k, &j) in members.iter().enumerate() {
                let dzj = dz.row_mut(j);
                for (d, &gi) in dzj.iter_mut().zip(g) {
                    *d += alpha[k] * gi;
                }
                let de = alpha[k] * (d_alpha[k] - weighted);
                let slope = if cache.raw[i][k] > 0.0 { 1.0 } else { self.leaky_slope };
                let ds = de * slope;
                ds_src[i] += ds;
                ds_dst[j] += ds;
            }
        }

        let mut d_attention = Matrix::zeros(1, 2 * out_dim);
        {
            let (da_src, da_dst) = d_attention.data_mut().split_at_mut(out_dim);
            for i in 0..n {
                let zi = z.row(i);
                for c in 0..out_dim {
                    da_src[c] += ds_src[i] * zi[c];
                    da_dst[c] += ds_dst[i] * zi[c];
                }
                let dzi = dz.row_mut(i);
                for c in 0..out_dim {
                    dzi[c] += ds_src[i] * a_src[c] + ds_dst[i] * a_dst[c];
                }
            }
        }

        let grad_h = dz.matmul_t(&self.weight);
        let grads = GatGrads {
            weight: cache.input.t_matmul(&dz),
            attention: d_attention,
        };
        Ok((grad_h, grads))
    }
}

impl Parameterized for GatLayer {
    fn param_blocks(&self) -> Vec<(String, &Matrix)> {
        vec![("weight".into(), &self.weight), ("attention".into(), &self.attention)]
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.attention]
    }
}
