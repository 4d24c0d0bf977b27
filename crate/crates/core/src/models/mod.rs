//! Pattern models, baselines, bundles and forecast streams.
//!
//! Every model consumes a [`SampleSet`] and emits a [`ForecastStream`], so the
//! output of any trained model can be fed back as an auxiliary stream to the
//! multi-stream combiner.

mod networks;
mod stream;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use networks::{GnnCache, GnnCoder, LstmCache, LstmForecaster};
pub use stream::{load_forecast_streams, parse_streams, ForecastStream, STREAM_HEADER};

use crate::autodiff::{decode_blocks, encode_blocks, mse_loss, AdamConfig, AdamState, BlockInfo, Matrix, Neighborhoods, Parameterized};
use crate::error::{Error, Result};
use crate::features::{FeatureSpec, SampleSet};
use crate::graph::BinGraph;
use crate::gridding::BinIndex;
use crate::textio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gnncoder,
    Lstm,
    Persistence,
    Mean,
    Multifoundation,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gnncoder => "gnncoder",
            ModelKind::Lstm => "lstm",
            ModelKind::Persistence => "persistence",
            ModelKind::Mean => "mean",
            ModelKind::Multifoundation => "multifoundation",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gnncoder" => Ok(ModelKind::Gnncoder),
            "lstm" => Ok(ModelKind::Lstm),
            "persistence" => Ok(ModelKind::Persistence),
            "mean" => Ok(ModelKind::Mean),
            "multifoundation" => Ok(ModelKind::Multifoundation),
            other => Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Network used inside the multi-stream combiner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Lstm,
    Gat,
}

pub const DEFAULT_HIDDEN: usize = 32;

/// Architecture description; together with the seed it fixes every parameter shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternKind>,
    /// Attention layers; only used by graph models.
    pub gat_layers: usize,
    pub lookback: usize,
    pub n_features: usize,
    pub feature_spec: FeatureSpec,
    pub hidden: usize,
    /// Auxiliary stream names, in input order.
    #[serde(default)]
    pub streams: Vec<String>,
    /// Bins covered by the mean baseline, in parameter order.
    #[serde(default)]
    pub bins: Vec<BinIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NetKind {
    Gnn,
    Lstm,
    Persistence,
    Mean,
}

impl ModelDescriptor {
    fn base(kind: ModelKind, lookback: usize, feature_spec: &FeatureSpec) -> Self {
        ModelDescriptor {
            kind,
            pattern: None,
            gat_layers: 0,
            lookback,
            n_features: feature_spec.n_features(),
            feature_spec: feature_spec.clone(),
            hidden: DEFAULT_HIDDEN,
            streams: Vec::new(),
            bins: Vec::new(),
        }
    }

    pub fn gnncoder(gat_layers: usize, lookback: usize, feature_spec: &FeatureSpec) -> Self {
        ModelDescriptor {
            gat_layers,
            ..Self::base(ModelKind::Gnncoder, lookback, feature_spec)
        }
    }

    pub fn lstm(lookback: usize, feature_spec: &FeatureSpec) -> Self {
        Self::base(ModelKind::Lstm, lookback, feature_spec)
    }

    pub fn persistence(lookback: usize, feature_spec: &FeatureSpec) -> Self {
        Self::base(ModelKind::Persistence, lookback, feature_spec)
    }

    pub fn mean(lookback: usize, feature_spec: &FeatureSpec) -> Self {
        Self::base(ModelKind::Mean, lookback, feature_spec)
    }

    /// Combiner over `streams`; `gat_layers` is ignored for the LSTM pattern.
    pub fn multifoundation(
        pattern: PatternKind,
        gat_layers: usize,
        lookback: usize,
        feature_spec: &FeatureSpec,
        streams: Vec<String>,
    ) -> Self {
        ModelDescriptor {
            pattern: Some(pattern),
            gat_layers: if pattern == PatternKind::Gat { gat_layers } else { 0 },
            streams,
            ..Self::base(ModelKind::Multifoundation, lookback, feature_spec)
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }

    fn net_kind(&self) -> NetKind {
        match (self.kind, self.pattern) {
            (ModelKind::Gnncoder, _) | (ModelKind::Multifoundation, Some(PatternKind::Gat)) => NetKind::Gnn,
            (ModelKind::Lstm, _) | (ModelKind::Multifoundation, _) => NetKind::Lstm,
            (ModelKind::Persistence, _) => NetKind::Persistence,
            (ModelKind::Mean, _) => NetKind::Mean,
        }
    }

    /// Whether training and prediction need a bin graph.
    pub fn needs_graph(&self) -> bool {
        self.net_kind() == NetKind::Gnn
    }

    /// Number of trainable values, or `None` if it overflows.
    pub fn param_count(&self) -> Option<usize> {
        let (h, s, f) = (self.hidden, self.streams.len(), self.n_features);
        let head = h.checked_add(s)?.checked_add(1)?;
        match self.net_kind() {
            NetKind::Gnn => {
                let input = self.lookback.checked_mul(f)?;
                let encoder = input.checked_add(1)?.checked_mul(h)?;
                let gat = h.checked_add(2)?.checked_mul(h)?.checked_mul(self.gat_layers)?;
                let decoder = h.checked_add(1)?.checked_mul(h)?;
                encoder.checked_add(gat)?.checked_add(decoder)?.checked_add(head)
            }
            NetKind::Lstm => {
                let gate = f.checked_add(h)?.checked_add(1)?.checked_mul(h)?;
                gate.checked_mul(4)?.checked_add(head)
            }
            NetKind::Persistence => Some(0),
            NetKind::Mean => Some(self.bins.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.n_features != self.feature_spec.n_features() {
            return fail(format!(
                "descriptor declares {} features but the feature spec yields {}",
                self.n_features,
                self.feature_spec.n_features()
            ));
        }
        if self.lookback == 0 {
            return fail("lookback must be at least one period".into());
        }
        if self.hidden == 0 {
            return fail("hidden width must be positive".into());
        }
        if self.kind == ModelKind::Multifoundation && self.pattern.is_none() {
            return fail("the combiner needs a pattern network".into());
        }
        if self.kind != ModelKind::Multifoundation && (self.pattern.is_some() || !self.streams.is_empty()) {
            return fail(format!("{} models take no auxiliary streams", self.kind));
        }
        if self.needs_graph() && !(1..=3).contains(&self.gat_layers) {
            return fail(format!("{} attention layers; expected 1, 2 or 3", self.gat_layers));
        }
        if self.net_kind() != NetKind::Mean && !self.bins.is_empty() {
            return fail("only the mean baseline stores per-bin parameters".into());
        }
        Ok(())
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// What is needed to re-run training and what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Mean squared error over the whole training set after the last update.
    pub final_train_loss: f64,
    /// Mean per-sample loss of each epoch, accumulated during the epoch.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Gnn(GnnCoder),
    Lstm(LstmForecaster),
    Persistence,
    /// `1 × n_bins` training means, aligned with the descriptor's bins.
    Mean(Matrix),
}

impl Network {
    fn init(desc: &ModelDescriptor, rng: &mut ChaCha8Rng) -> Self {
        let s = desc.streams.len();
        match desc.net_kind() {
            NetKind::Gnn => Network::Gnn(GnnCoder::new(
                desc.lookback * desc.n_features,
                desc.hidden,
                desc.gat_layers,
                s,
                rng,
            )),
            NetKind::Lstm => Network::Lstm(LstmForecaster::new(desc.n_features, desc.hidden, s, rng)),
            NetKind::Persistence => Network::Persistence,
            NetKind::Mean => Network::Mean(Matrix::zeros(1, desc.bins.len())),
        }
    }
}

impl Parameterized for Network {
    fn param_blocks(&self) -> Vec<(String, &Matrix)> {
        match self {
            Network::Gnn(m) => m.param_blocks(),
            Network::Lstm(m) => m.param_blocks(),
            Network::Persistence => Vec::new(),
            Network::Mean(m) => vec![("mean".into(), m)],
        }
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Network::Gnn(m) => m.param_blocks_mut(),
            Network::Lstm(m) => m.param_blocks_mut(),
            Network::Persistence => Vec::new(),
            Network::Mean(m) => vec![m],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub descriptor: ModelDescriptor,
    pub provenance: Provenance,
    pub network: Network,
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    descriptor: ModelDescriptor,
    provenance: Provenance,
    blocks: Vec<BlockInfo>,
    params_sha256: String,
}

impl ModelBundle {
    /// `bundle.json` text and `params.bin` bytes.
    pub fn encode(&self) -> Result<(String, Vec<u8>)> {
        let (blocks, bytes) = encode_blocks(&self.network.param_blocks());
        let manifest = BundleManifest {
            descriptor: self.descriptor.clone(),
            provenance: self.provenance.clone(),
            blocks,
            params_sha256: hex::encode(Sha256::digest(&bytes)),
        };
        Ok((serde_json::to_string_pretty(&manifest)? + "\n", bytes))
    }

    /// Rebuild a bundle from its two files, checking every block against the descriptor.
    pub fn from_parts(manifest_json: &str, params: &[u8]) -> Result<Self> {
        let manifest: BundleManifest = serde_json::from_str(manifest_json)?;
        if hex::encode(Sha256::digest(params)) != manifest.params_sha256 {
            return Err(Error::Parse("parameter file does not match the manifest digest".into()));
        }
        let descriptor = manifest.descriptor;
        descriptor.validate()?;
        let provenance = manifest.provenance;
        if !provenance.final_train_loss.is_finite() || provenance.loss_trace.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite loss in provenance".into()));
        }
        // Shapes come from a freshly built network; values from the block file.
        // Size the descriptor first so a hostile manifest cannot force a huge allocation.
        if descriptor.param_count().and_then(|n| n.checked_mul(8)) != Some(params.len()) {
            return Err(Error::Parse("descriptor shapes do not match the parameter file size".into()));
        }
        let mut network = Network::init(&descriptor, &mut ChaCha8Rng::seed_from_u64(0));
        let expected: Vec<BlockInfo> = network
            .param_blocks()
            .iter()
            .map(|(name, m)| BlockInfo {
                name: name.clone(),
                rows: m.rows(),
                cols: m.cols(),
            })
            .collect();
        if expected != manifest.blocks {
            return Err(Error::Parse("parameter blocks do not match the descriptor".into()));
        }
        let values = decode_blocks(&manifest.blocks, params)?;
        for (slot, v) in network.param_blocks_mut().into_iter().zip(values) {
            *slot = v;
        }
        Ok(ModelBundle {
            descriptor,
            provenance,
            network,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let (json, bytes) = self.encode()?;
        textio::write(&dir.join("bundle.json"), json)?;
        textio::write(&dir.join("params.bin"), bytes)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let json = textio::read_to_string(&dir.join("bundle.json"))?;
        let bytes = textio::read_bytes(&dir.join("params.bin"))?;
        Self::from_parts(&json, &bytes)
    }

    /// SHA-256 over the manifest and parameter bytes.
    pub fn digest(&self) -> Result<String> {
        let (json, bytes) = self.encode()?;
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        h.update(&bytes);
        Ok(hex::encode(h.finalize()))
    }
}

fn check_samples(desc: &ModelDescriptor, samples: &SampleSet) -> Result<()> {
    if samples.lookback != desc.lookback || samples.n_features() != desc.n_features {
        return Err(Error::ShapeMismatch(format!(
            "model expects lookback {} × {} features, samples have {} × {}",
            desc.lookback,
            desc.n_features,
            samples.lookback,
            samples.n_features()
        )));
    }
    if samples.cube.columns != desc.feature_spec.column_names() {
        return Err(Error::ShapeMismatch("sample columns differ from the model's feature spec".into()));
    }
    Ok(())
}

/// Attention neighborhoods over the active bins, with self-inclusion.
fn neighborhoods(graph: Option<&BinGraph>, samples: &SampleSet) -> Result<Neighborhoods> {
    let graph = graph.ok_or_else(|| Error::InvalidArgument("graph models need a bin graph".into()))?;
    let bins = &samples.cube.active_bins;
    if graph.n_nodes() != bins.len() || graph.nodes.iter().zip(bins).any(|(n, b)| n.bin != *b) {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} nodes that do not line up with the {} active bins",
            graph.n_nodes(),
            bins.len()
        )));
    }
    Neighborhoods::from_graph(graph, true)
}

fn check_streams(desc: &ModelDescriptor, streams: &[ForecastStream], samples: &SampleSet) -> Result<()> {
    let names: Vec<&str> = streams.iter().map(|s| s.model.as_str()).collect();
    if names != desc.streams.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument(format!(
            "model expects streams {:?}, got {:?}",
            desc.streams, names
        )));
    }
    let mut gaps = Vec::new();
    for s in streams {
        if let Err(Error::CoverageGaps(g)) = s.require_coverage(&samples.cube.active_bins, samples.targets.clone()) {
            gaps.extend(g);
        }
    }
    if gaps.is_empty() {
        Ok(())
    } else {
        gaps.sort_unstable_by_key(|&(b, t)| (t, b));
        gaps.dedup();
        Err(Error::CoverageGaps(gaps))
    }
}

/// All-node inputs for target period `t`: flattened lookbacks and stream values.
fn graph_inputs(samples: &SampleSet, streams: &[ForecastStream], t: usize) -> (Matrix, Matrix, Vec<f64>) {
    let cube = &samples.cube;
    let n = cube.n_bins();
    let width = samples.lookback * cube.n_features();
    let mut x = Matrix::zeros(n, width);
    let mut aux = Matrix::zeros(n, streams.len());
    let mut target = Vec::with_capacity(n);
    for row in 0..n {
        let w = samples.window(row, t);
        x.row_mut(row).copy_from_slice(w.lookback);
        for (k, s) in streams.iter().enumerate() {
            aux.set(row, k, s.get(w.bin, t).expect("coverage checked"));
        }
        target.push(w.target);
    }
    (x, aux, target)
}

/// Time-major inputs for a batch of sample indices.
fn sequence_inputs(samples: &SampleSet, streams: &[ForecastStream], idx: &[usize]) -> (Vec<Matrix>, Matrix, Vec<f64>) {
    let f = samples.n_features();
    let mut xs = vec![Matrix::zeros(idx.len(), f); samples.lookback];
    let mut aux = Matrix::zeros(idx.len(), streams.len());
    let mut target = Vec::with_capacity(idx.len());
    for (b, &i) in idx.iter().enumerate() {
        let w = samples.get(i);
        for (step, x) in xs.iter_mut().enumerate() {
            x.row_mut(b).copy_from_slice(w.lookback_row(step));
        }
        for (k, s) in streams.iter().enumerate() {
            aux.set(b, k, s.get(w.bin, w.t_target).expect("coverage checked"));
        }
        target.push(w.target);
    }
    (xs, aux, target)
}

fn column(values: &[f64]) -> Matrix {
    Matrix::new(values.len(), 1, values.to_vec()).expect("finite column")
}

/// Train a model from scratch. `graph` is required for graph models and must
/// list the sample set's active bins in order; `streams` must match the
/// descriptor's stream names and cover every training target.
pub fn train(
    mut descriptor: ModelDescriptor,
    config: &TrainConfig,
    samples: &SampleSet,
    graph: Option<&BinGraph>,
    streams: &[ForecastStream],
) -> Result<ModelBundle> {
    if descriptor.kind == ModelKind::Mean {
        descriptor.bins = samples.cube.active_bins.clone();
    }
    descriptor.validate()?;
    check_samples(&descriptor, samples)?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    check_streams(&descriptor, streams, samples)?;
    let nbhd = if descriptor.needs_graph() { Some(neighborhoods(graph, samples)?) } else { None };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut network = Network::init(&descriptor, &mut rng);
    let adam = AdamConfig::with_lr(config.learning_rate);
    let mut trace = Vec::with_capacity(config.epochs);

    match &mut network {
        Network::Persistence => {}
        Network::Mean(means) => {
            let span = samples.targets.end;
            for row in 0..samples.cube.n_bins() {
                let total: f64 = (0..span).map(|t| samples.cube.log_energy(row, t)).sum();
                means.data_mut()[row] = total / span as f64;
            }
        }
        Network::Gnn(model) => {
            let nbhd = nbhd.as_ref().expect("graph model");
            let mut opt = AdamState::new(adam, model)?;
            let mut order: Vec<usize> = samples.targets.clone().collect();
            for epoch in 0..config.epochs {
                order.shuffle(&mut rng);
                let mut total = 0.0;
                for &t in &order {
                    let (x, aux, target) = graph_inputs(samples, streams, t);
                    let (y, cache) = model.forward(&x, &aux, nbhd)?;
                    let (loss, grad) = mse_loss(y.data(), &target)?;
                    if !loss.is_finite() {
                        return Err(Error::Diverged { epoch, trace });
                    }
                    total += loss;
                    let grads = model.backward(&cache, nbhd, &column(&grad))?;
                    opt.step(model, &grads)?;
                }
                trace.push(total / order.len() as f64);
            }
        }
        Network::Lstm(model) => {
            let mut opt = AdamState::new(adam, model)?;
            let mut order: Vec<usize> = (0..samples.len()).collect();
            for epoch in 0..config.epochs {
                order.shuffle(&mut rng);
                let mut total = 0.0;
                for batch in order.chunks(config.batch_size) {
                    let (xs, aux, target) = sequence_inputs(samples, streams, batch);
                    let (y, cache) = model.forward(&xs, &aux)?;
                    let (loss, grad) = mse_loss(y.data(), &target)?;
                    if !loss.is_finite() {
                        return Err(Error::Diverged { epoch, trace });
                    }
                    total += loss * batch.len() as f64;
                    let grads = model.backward(&cache, &column(&grad))?;
                    opt.step(model, &grads)?;
                }
                trace.push(total / order.len() as f64);
            }
        }
    }

    let mut bundle = ModelBundle {
        descriptor,
        provenance: Provenance {
            seed: config.seed,
            epochs: config.epochs,
            learning_rate: config.learning_rate,
            batch_size: config.batch_size,
            final_train_loss: 0.0,
            loss_trace: Vec::new(),
        },
        network,
    };
    let fitted = predict_values(&bundle, samples, nbhd.as_ref(), streams)?;
    let target: Vec<f64> = samples.iter().map(|w| w.target).collect();
    let (final_loss, _) = mse_loss(&fitted, &target)?;
    if !final_loss.is_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs,
            trace,
        });
    }
    bundle.provenance.final_train_loss = final_loss;
    bundle.provenance.loss_trace = trace;
    Ok(bundle)
}

/// Train the combiner: the pattern network's head sees each stream's forecast
/// for the target period next to the learned representation.
pub fn multifoundation_train(
    streams: &[ForecastStream],
    samples: &SampleSet,
    pattern: PatternKind,
    gat_layers: usize,
    graph: Option<&BinGraph>,
    config: &TrainConfig,
) -> Result<ModelBundle> {
    let spec = samples.cube.spec.clone();
    let names = streams.iter().map(|s| s.model.clone()).collect();
    let descriptor = ModelDescriptor::multifoundation(pattern, gat_layers, samples.lookback, &spec, names);
    train(descriptor, config, samples, graph, streams)
}

/// Predictions in [`SampleSet::get`] order.
fn predict_values(
    bundle: &ModelBundle,
    samples: &SampleSet,
    nbhd: Option<&Neighborhoods>,
    streams: &[ForecastStream],
) -> Result<Vec<f64>> {
    let n_bins = samples.cube.n_bins();
    match &bundle.network {
        Network::Persistence => Ok(samples
            .iter()
            .map(|w| w.lookback_row(w.lookback_len() - 1)[0])
            .collect()),
        Network::Mean(means) => {
            let mut per_row = Vec::with_capacity(n_bins);
            for bin in &samples.cube.active_bins {
                let i = bundle
                    .descriptor
                    .bins
                    .iter()
                    .position(|b| b == bin)
                    .ok_or_else(|| Error::ShapeMismatch(format!("mean baseline has no value for bin {bin}")))?;
                per_row.push(means.data()[i]);
            }
            Ok(samples.iter().map(|w| per_row[w.bin_row]).collect())
        }
        Network::Gnn(model) => {
            let nbhd = nbhd.expect("graph model");
            let mut out = Vec::with_capacity(samples.len());
            for t in samples.targets.clone() {
                let (x, aux, _) = graph_inputs(samples, streams, t);
                out.extend_from_slice(model.forward(&x, &aux, nbhd)?.0.data());
            }
            Ok(out)
        }
        Network::Lstm(model) => {
            let mut out = Vec::with_capacity(samples.len());
            let idx: Vec<usize> = (0..samples.len()).collect();
            for batch in idx.chunks(256) {
                let (xs, aux, _) = sequence_inputs(samples, streams, batch);
                out.extend_from_slice(model.forward(&xs, &aux)?.0.data());
            }
            Ok(out)
        }
    }
}

/// Forecast every (active bin, target period) pair of `samples`.
pub fn predict(
    bundle: &ModelBundle,
    samples: &SampleSet,
    graph: Option<&BinGraph>,
    streams: &[ForecastStream],
    name: &str,
) -> Result<ForecastStream> {
    check_samples(&bundle.descriptor, samples)?;
    check_streams(&bundle.descriptor, streams, samples)?;
    let nbhd = if bundle.descriptor.needs_graph() { Some(neighborhoods(graph, samples)?) } else { None };
    let values = predict_values(bundle, samples, nbhd.as_ref(), streams)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("model produced non-finite forecasts".into()));
    }
    ForecastStream::new(name, samples.cube.active_bins.clone(), samples.targets.clone(), values)
}
