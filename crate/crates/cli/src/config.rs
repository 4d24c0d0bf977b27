//! Declarative run configuration. Precedence: flags > config file > defaults.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use quakecast::catalog::RegionFilter;
use quakecast::evaluation::Aggregation;
use quakecast::features::FeatureSpec;
use quakecast::gridding::{NormScope, SplitSpec};
use quakecast::models::{ModelDescriptor, ModelKind, PatternKind, TrainConfig, DEFAULT_HIDDEN};
use quakecast::nowcast::FilterGrid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormChoice {
    #[default]
    Full,
    TrainOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub kind: ModelKind,
    pub gat_layers: usize,
    pub hidden: usize,
    pub pattern: Option<PatternKind>,
    /// Forecast stream files for the combiner.
    pub streams: Vec<PathBuf>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            name: String::new(),
            kind: ModelKind::Lstm,
            gat_layers: 1,
            hidden: DEFAULT_HIDDEN,
            pattern: None,
            streams: Vec::new(),
            epochs: None,
            batch_size: None,
            learning_rate: None,
        }
    }
}

impl ModelConfig {
    fn named(name: &str, kind: ModelKind, gat_layers: usize) -> Self {
        ModelConfig {
            name: name.into(),
            kind,
            gat_layers,
            ..Self::default()
        }
    }

    /// Descriptor for this model; the combiner's stream names are filled in
    /// once the stream files are read.
    pub fn descriptor(&self, lookback: usize, spec: &FeatureSpec, stream_names: Vec<String>) -> ModelDescriptor {
        let d = match self.kind {
            ModelKind::Gnncoder => ModelDescriptor::gnncoder(self.gat_layers, lookback, spec),
            ModelKind::Lstm => ModelDescriptor::lstm(lookback, spec),
            ModelKind::Persistence => ModelDescriptor::persistence(lookback, spec),
            ModelKind::Mean => ModelDescriptor::mean(lookback, spec),
            ModelKind::Multifoundation => ModelDescriptor::multifoundation(
                self.pattern.unwrap_or(PatternKind::Lstm),
                self.gat_layers,
                lookback,
                spec,
                stream_names,
            ),
        };
        d.with_hidden(self.hidden)
    }

    pub fn train_config(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs.unwrap_or(base.epochs),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            seed: base.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NowcastConfig {
    /// Small events counted in the monthly rate have magnitude above this.
    pub small_mag: f64,
    /// Label threshold for large events.
    pub large_mag: f64,
    pub horizon_months: usize,
    /// Months used to fit the filter; defaults to the split fraction of the span.
    pub training_months: Option<usize>,
    pub grid: FilterGrid,
}

impl Default for NowcastConfig {
    fn default() -> Self {
        NowcastConfig {
            small_mag: 3.29,
            large_mag: 6.0,
            horizon_months: 36,
            training_months: None,
            grid: FilterGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub catalog: PathBuf,
    pub out: PathBuf,
    pub region: RegionFilter,
    /// Start of period 0; defaults to the region's start time.
    pub anchor: Option<DateTime<Utc>>,
    pub cell_size: f64,
    pub period_days: u32,
    pub active_bins: usize,
    pub epsilon: f64,
    pub lookback: usize,
    pub features: FeatureSpec,
    pub split_fraction: f64,
    pub normalization: NormChoice,
    pub aggregation: Aggregation,
    pub train: TrainConfig,
    pub models: Vec<ModelConfig>,
    pub nowcast: NowcastConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            catalog: PathBuf::from("catalog.csv"),
            out: PathBuf::from("out"),
            region: RegionFilter::southern_california(),
            anchor: None,
            cell_size: 0.1,
            period_days: 14,
            active_bins: 500,
            epsilon: 0.15,
            lookback: 52,
            features: FeatureSpec::default(),
            split_fraction: 0.8,
            normalization: NormChoice::Full,
            aggregation: Aggregation::Pooled,
            train: TrainConfig::default(),
            models: vec![
                ModelConfig::named("persistence", ModelKind::Persistence, 1),
                ModelConfig::named("mean", ModelKind::Mean, 1),
                ModelConfig::named("lstm", ModelKind::Lstm, 1),
                ModelConfig::named("gnncoder1", ModelKind::Gnncoder, 1),
            ],
            nowcast: NowcastConfig::default(),
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults, then the file, then flags. Input paths in the file are
    /// relative to its directory; the output directory is relative to the
    /// working directory.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, Vec<String>> {
        let mut config = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| vec![format!("{}: {e}", p.display())])?;
                let mut c: RunConfig =
                    serde_json::from_str(&text).map_err(|e| vec![format!("{}: {e}", p.display())])?;
                let base = p.parent().unwrap_or(Path::new(""));
                c.catalog = rebase(base, &c.catalog);
                for m in c.models.iter_mut() {
                    m.streams = m.streams.iter().map(|s| rebase(base, s)).collect();
                }
                c
            }
        };
        if let Some(seed) = overrides.seed {
            config.train.seed = seed;
        }
        if let Some(out) = &overrides.out {
            config.out = out.clone();
        }
        config.validate()?;
        Ok(config)
    }

    /// Every problem at once, not just the first.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if let Err(e) = self.region.validate() {
            problems.push(e.to_string());
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            problems.push(format!("cell_size {} must be positive", self.cell_size));
        }
        if self.period_days == 0 {
            problems.push("period_days must be positive".into());
        }
        if self.active_bins == 0 {
            problems.push("active_bins must be positive".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            problems.push(format!("epsilon {} must be positive", self.epsilon));
        }
        if self.lookback == 0 {
            problems.push("lookback must be positive".into());
        }
        if let Err(e) = self.features.validate(self.period_days) {
            problems.push(e.to_string());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            problems.push(format!("split_fraction {} must lie in (0, 1)", self.split_fraction));
        }
        if self.train.batch_size == 0 {
            problems.push("train.batch_size must be positive".into());
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            problems.push("train.learning_rate must be positive".into());
        }
        let mut names: Vec<&str> = Vec::new();
        for m in &self.models {
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                problems.push(format!("model name `{}` must be non-empty [A-Za-z0-9._-]", m.name));
            }
            if names.contains(&m.name.as_str()) {
                problems.push(format!("model name `{}` is used twice", m.name));
            }
            names.push(&m.name);
            if m.name == "truth" {
                problems.push("model name `truth` is reserved".into());
            }
            let graph_model = m.kind == ModelKind::Gnncoder
                || (m.kind == ModelKind::Multifoundation && m.pattern == Some(PatternKind::Gat));
            if graph_model && !(1..=3).contains(&m.gat_layers) {
                problems.push(format!("model `{}`: gat_layers must be 1, 2 or 3", m.name));
            }
            if m.hidden == 0 {
                problems.push(format!("model `{}`: hidden must be positive", m.name));
            }
            if m.kind == ModelKind::Multifoundation && m.pattern.is_none() {
                problems.push(format!("model `{}`: multifoundation needs `pattern` (lstm or gat)", m.name));
            }
            if m.kind != ModelKind::Multifoundation && !m.streams.is_empty() {
                problems.push(format!("model `{}`: only multifoundation models take streams", m.name));
            }
            if m.batch_size == Some(0) {
                problems.push(format!("model `{}`: batch_size must be positive", m.name));
            }
        }
        let nc = &self.nowcast;
        if nc.horizon_months == 0 {
            problems.push("nowcast.horizon_months must be positive".into());
        }
        if nc.grid.ema_spans.is_empty() || nc.grid.correction_weights.is_empty() {
            problems.push("nowcast.grid must list at least one span and one weight".into());
        }
        if nc.grid.ema_spans.contains(&0) {
            problems.push("nowcast.grid spans must be positive".into());
        }
        if nc.grid.correction_weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            problems.push("nowcast.grid weights must lie in [0, 1]".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    pub fn anchor(&self) -> DateTime<Utc> {
        self.anchor.unwrap_or(self.region.t_start)
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split_fraction,
        }
    }

    pub fn norm_scope(&self, n_periods: usize) -> quakecast::Result<NormScope> {
        Ok(match self.normalization {
            NormChoice::Full => NormScope::Full,
            NormChoice::TrainOnly => NormScope::TrainOnly(self.split().boundary(n_periods)?),
        })
    }

    pub fn model(&self, name: &str) -> Option<&ModelConfig> {
        self.models.iter().find(|m| m.name == name)
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    /// Locations are reduced to file names so the hash does not depend on
    /// where the run lives; file contents are covered by input digests.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.catalog = file_name(&c.catalog);
        for m in c.models.iter_mut() {
            m.streams = m.streams.iter().map(|s| file_name(s)).collect();
        }
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn file_name(p: &Path) -> PathBuf {
    p.file_name().map(PathBuf::from).unwrap_or_default()
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() || base.as_os_str().is_empty() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
