//! Oracles and check suites shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use quakecast::autodiff::gradcheck::{max_relative_error, numeric_matrix_gradient, numeric_param_gradient, weighted_sum};
use quakecast::autodiff::{Activation, Dense, GatLayer, LstmCell, Matrix, Neighborhoods};
use quakecast::features::BinEvents;
use quakecast::gridding::{build_series, normalize, BinSeriesSet, NormScope, SpatialGrid};
use quakecast::models::{GnnCoder, LstmForecaster};
use quakecast::synthetic::{mini_catalog, mini_region, MINI_CATALOG_SEED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEEDS: u64 = 20;
pub const NONLINEAR_TOL: f64 = 1e-4;
pub const LINEAR_TOL: f64 = 1e-6;

pub fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Largest gradient-check error seen by a suite, and where.
#[derive(Debug, Clone, Default)]
pub struct Worst {
    pub err: f64,
    pub case: String,
}

impl Worst {
    fn see(&mut self, err: f64, case: impl FnOnce() -> String) {
        if err > self.err || err.is_nan() {
            self.err = err;
            self.case = case();
        }
    }
}

/// Six nodes: a triangle joined to a path, plus an isolated node that only
/// attends to itself.
pub fn six_node_graph() -> Neighborhoods {
    Neighborhoods::from_adjacency(
        vec![vec![1, 2], vec![0, 2], vec![0, 1, 3], vec![2, 4], vec![3], vec![]],
        true,
    )
    .unwrap()
}

pub fn five_node_graph() -> Neighborhoods {
    Neighborhoods::from_adjacency(vec![vec![1], vec![0, 2, 3], vec![1], vec![1, 4], vec![3]], true).unwrap()
}

/// Dense layers: returns (identity, tanh and relu).
pub fn dense_suite() -> (Worst, Worst) {
    let (mut linear, mut nonlinear) = (Worst::default(), Worst::default());
    for seed in 0..SEEDS {
        for activation in [Activation::Identity, Activation::Tanh, Activation::Relu] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut layer = Dense::new(5, 4, activation, &mut rng);
            let mut x = random(7, 5, &mut rng);
            let w = random(7, 4, &mut rng);

            let (_, cache) = layer.forward(&x).unwrap();
            let (dx, grads) = layer.backward(&cache, &w).unwrap();
            let numeric = numeric_param_gradient(&mut layer, |l| weighted_sum(&l.forward(&x).unwrap().0, &w));
            let p = max_relative_error(&grads.into_blocks(), &numeric);
            let ndx = numeric_matrix_gradient(&mut x, |x| weighted_sum(&layer.forward(x).unwrap().0, &w));
            let i = max_relative_error(&[dx], &[ndx]);
            let worst = if activation == Activation::Identity { &mut linear } else { &mut nonlinear };
            worst.see(p, || format!("{activation:?} seed {seed} params"));
            worst.see(i, || format!("{activation:?} seed {seed} input"));
        }
    }
    (linear, nonlinear)
}

/// LSTM cell unrolled over 20 steps, loss on every hidden state.
pub fn lstm_sequence_suite() -> Worst {
    let mut worst = Worst::default();
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut cell = LstmCell::new(3, 4, &mut rng);
        let mut xs: Vec<Matrix> = (0..20).map(|_| random(2, 3, &mut rng)).collect();
        let ws: Vec<Matrix> = (0..20).map(|_| random(2, 4, &mut rng)).collect();
        let loss = |cell: &LstmCell, xs: &[Matrix]| -> f64 {
            let (hs, _) = cell.forward_sequence(xs).unwrap();
            hs.iter().zip(&ws).map(|(h, w)| weighted_sum(h, w)).sum()
        };

        let (_, caches) = cell.forward_sequence(&xs).unwrap();
        let grad_hs: Vec<Option<Matrix>> = ws.iter().cloned().map(Some).collect();
        let (dxs, grads) = cell.backward_sequence(&caches, &grad_hs).unwrap();
        let numeric = numeric_param_gradient(&mut cell, |c| loss(c, &xs));
        worst.see(max_relative_error(&grads.into_blocks(), &numeric), || format!("seed {seed} params"));

        for t in [0, 7, 19] {
            let mut x = xs[t].clone();
            let ndx = numeric_matrix_gradient(&mut x, |x| {
                xs[t] = x.clone();
                loss(&cell, &xs)
            });
            xs[t] = x;
            worst.see(max_relative_error(&[dxs[t].clone()], &[ndx]), || format!("seed {seed} input step {t}"));
        }
    }
    worst
}

pub fn gat_suite() -> Worst {
    let nbhd = six_node_graph();
    let mut worst = Worst::default();
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let mut layer = GatLayer::new(4, 3, &mut rng);
        let mut h = random(6, 4, &mut rng);
        let w = random(6, 3, &mut rng);

        let (_, cache) = layer.forward(&h, &nbhd).unwrap();
        let (dh, grads) = layer.backward(&cache, &nbhd, &w).unwrap();
        let numeric = numeric_param_gradient(&mut layer, |l| weighted_sum(&l.forward(&h, &nbhd).unwrap().0, &w));
        worst.see(max_relative_error(&grads.into_blocks(), &numeric), || format!("seed {seed} params"));
        let ndh = numeric_matrix_gradient(&mut h, |h| weighted_sum(&layer.forward(h, &nbhd).unwrap().0, &w));
        worst.see(max_relative_error(&[dh], &[ndh]), || format!("seed {seed} input"));
    }
    worst
}

/// Full encoder, GAT stack, decoder and head, with and without auxiliary streams.
pub fn gnncoder_suite() -> Worst {
    let nbhd = five_node_graph();
    let mut worst = Worst::default();
    for seed in 0..SEEDS {
        for (layers, streams) in [(1, 0), (2, 2), (3, 1)] {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let mut model = GnnCoder::new(6, 5, layers, streams, &mut rng);
            let x = random(5, 6, &mut rng);
            let aux = random(5, streams, &mut rng);
            let w = random(5, 1, &mut rng);

            let (_, cache) = model.forward(&x, &aux, &nbhd).unwrap();
            let grads = model.backward(&cache, &nbhd, &w).unwrap();
            let numeric = numeric_param_gradient(&mut model, |m| weighted_sum(&m.forward(&x, &aux, &nbhd).unwrap().0, &w));
            worst.see(max_relative_error(&grads, &numeric), || format!("seed {seed}, {layers} layers"));
        }
    }
    worst
}

pub fn lstm_forecaster_suite() -> Worst {
    let mut worst = Worst::default();
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let mut model = LstmForecaster::new(2, 4, 2, &mut rng);
        let xs: Vec<Matrix> = (0..6).map(|_| random(3, 2, &mut rng)).collect();
        let aux = random(3, 2, &mut rng);
        let w = random(3, 1, &mut rng);
        let (_, cache) = model.forward(&xs, &aux).unwrap();
        let grads = model.backward(&cache, &w).unwrap();
        let numeric = numeric_param_gradient(&mut model, |m| weighted_sum(&m.forward(&xs, &aux).unwrap().0, &w));
        worst.see(max_relative_error(&grads, &numeric), || format!("seed {seed}"));
    }
    worst
}

/// The bundled mini catalog binned at 0.1° into 14-day periods.
pub fn mini_set() -> (BinSeriesSet, BinEvents) {
    let events = mini_catalog(MINI_CATALOG_SEED);
    let region = mini_region();
    let grid = SpatialGrid::covering(&region, 0.1).unwrap();
    let set = normalize(build_series(&events, &grid, region.t_start, 14, region.t_end).unwrap(), NormScope::Full).unwrap();
    let index = BinEvents::index(&events, &set);
    (set, index)
}

/// Brute-force scan of the raw catalog for one (bin, period, window).
pub fn multiplicity_scan(set: &BinSeriesSet, row: usize, t: usize, weeks: u32, threshold: f64) -> u32 {
    let events = mini_catalog(MINI_CATALOG_SEED);
    let w = (weeks / 2) as i64;
    events
        .iter()
        .filter(|e| {
            let bin = set.grid.locate(e.latitude, e.longitude).unwrap();
            let Some(p) = set.layout.period_of(e.time) else { return false };
            bin == set.active_bins[row] && (p as i64) < t as i64 && (p as i64) >= t as i64 - w && e.magnitude > threshold
        })
        .count() as u32
}

pub fn recursive_ema(x: &[f64], span: usize) -> Vec<f64> {
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = vec![x[0]];
    for t in 1..x.len() {
        out.push(alpha * x[t] + (1.0 - alpha) * out[t - 1]);
    }
    out
}

/// Closed form: weights `α(1−α)^k` on `x[t−k]`, with the remaining mass on `x[0]`.
pub fn weighted_ema(x: &[f64], span: usize, t: usize) -> f64 {
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut total = 0.0;
    for k in 0..t {
        total += alpha * (1.0 - alpha).powi(k as i32) * x[t - k];
    }
    total + (1.0 - alpha).powi(t as i32) * x[0]
}
