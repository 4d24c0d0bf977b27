//! One function per subcommand. Each reads its upstream artifacts, writes its
//! own directory and a manifest, and returns a JSON summary for stdout.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use quakecast::catalog::{filter_region, parse_catalog, write_catalog, CatalogEvent};
use quakecast::evaluation::{detail_json, report, series_csv, table_csv, Aggregation};
use quakecast::features::{load_samples, make_windows, BinEvents, SampleSet};
use quakecast::graph::{connect_components, degree_stats, epsilon_nng, nodes_for_bins, BinGraph, EdgeOrigin};
use quakecast::gridding::{build_series, normalize, select_active_bins, BinSeriesSet, SpatialGrid};
use quakecast::models::{self, load_forecast_streams, ForecastStream, ModelBundle, ModelKind};
use quakecast::nowcast::{large_event_labels, monthly_small_rate, nowcast_curve, optimize_filter, roc_skill, MonthSpan};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ModelConfig, RunConfig};
use crate::manifest::{require, ConfigError, Layout, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

pub struct Stage<'a> {
    pub config: &'a RunConfig,
    pub layout: Layout,
    hash: String,
}

impl<'a> Stage<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Stage {
            config,
            layout: Layout {
                out: config.out.clone(),
            },
            hash: config.hash(),
        }
    }

    fn manifest(&self, stage: &str) -> Manifest {
        Manifest::new(stage, &self.hash)
    }

    fn load_events(&self) -> Result<Vec<CatalogEvent>> {
        let path = self.layout.events();
        require(&path, "ingest")?;
        let file = File::open(&path).with_context(|| path.display().to_string())?;
        Ok(parse_catalog(BufReader::new(file))?.events)
    }

    fn load_series(&self) -> Result<BinSeriesSet> {
        let dir = self.layout.series();
        require(&dir.join("meta.json"), "build")?;
        Ok(BinSeriesSet::load(&dir)?)
    }

    fn load_graph(&self) -> Result<BinGraph> {
        let dir = self.layout.graph();
        require(&dir.join("nodes.txt"), "build")?;
        Ok(BinGraph::load(&dir)?)
    }

    fn load_samples(&self) -> Result<(SampleSet, SampleSet)> {
        let dir = self.layout.features();
        require(&dir.join("layout.json"), "features")?;
        Ok(load_samples(&dir)?)
    }

    fn record_dir_inputs(&self, m: &mut Manifest, dir: &Path, files: &[&str]) -> Result<()> {
        for f in files {
            let p = dir.join(f);
            m.input(self.layout.relative(&p), &p)?;
        }
        Ok(())
    }

    pub fn ingest(&self) -> Result<serde_json::Value> {
        let source = &self.config.catalog;
        if !source.is_file() {
            return Err(ConfigError(vec![format!("catalog file {} does not exist", source.display())]).into());
        }
        let file = File::open(source).with_context(|| source.display().to_string())?;
        let parsed = parse_catalog(BufReader::new(file))?;
        let kept = filter_region(&parsed.events, &self.config.region);

        let out = self.layout.events();
        std::fs::create_dir_all(self.layout.catalog())?;
        let sink = File::create(&out).with_context(|| out.display().to_string())?;
        write_catalog(&kept, sink)?;

        let mut m = self.manifest("ingest");
        m.input(format!("catalog:{}", file_name(source)), source)?;
        m.output(&self.layout, &out)?;
        m.summary = json!({
            "rows": parsed.total_rows(),
            "parsed": parsed.events.len(),
            "skipped": parsed.skipped,
            "clamped_magnitudes": parsed.clamped,
            "kept_in_region": kept.len(),
        });
        m.write(&self.layout.catalog().join("manifest.json"))?;
        Ok(m.summary)
    }

    pub fn build(&self) -> Result<serde_json::Value> {
        let c = self.config;
        let events = self.load_events()?;
        let grid = SpatialGrid::covering(&c.region, c.cell_size)?;
        let in_region = filter_region(&events, &c.region);
        let full = build_series(&in_region, &grid, c.anchor(), c.period_days, c.region.t_end)?;
        let bins = select_active_bins(&full, c.active_bins)?;
        let set = normalize(full.restrict(&bins)?, c.norm_scope(full.n_periods())?)?;
        let eps_graph = epsilon_nng(nodes_for_bins(&grid, &bins), c.epsilon)?;
        let components_before = degree_stats(&eps_graph).components;
        let graph = connect_components(eps_graph);
        let merge_edges = graph.edges.iter().filter(|e| e.origin == EdgeOrigin::Merge).count();

        set.save(&self.layout.series())?;
        graph.save(&self.layout.graph())?;

        let mut m = self.manifest("build");
        m.input(self.layout.relative(&self.layout.events()), &self.layout.events())?;
        for f in ["meta.json", "values.csv", "counts.csv"] {
            m.output(&self.layout, &self.layout.series().join(f))?;
        }
        m.summary = json!({
            "grid_bins": grid.n_bins(),
            "periods": set.n_periods(),
            "active_bins": set.n_bins(),
            "norm_constant": set.norm_constant,
        });
        m.write(&self.layout.series().join("manifest.json"))?;

        let mut g = self.manifest("build");
        g.input(self.layout.relative(&self.layout.events()), &self.layout.events())?;
        for f in ["nodes.txt", "edges.txt"] {
            g.output(&self.layout, &self.layout.graph().join(f))?;
        }
        g.summary = json!({
            "nodes": graph.n_nodes(),
            "edges": graph.edges.len(),
            "merge_edges": merge_edges,
            "components_before_merge": components_before,
        });
        g.write(&self.layout.graph().join("manifest.json"))?;

        Ok(json!({ "series": m.summary, "graph": g.summary }))
    }

    pub fn features(&self) -> Result<serde_json::Value> {
        let c = self.config;
        let set = self.load_series()?;
        let events = if c.features.use_multiplicity {
            Some(BinEvents::index(&self.load_events()?, &set))
        } else {
            None
        };
        let boundary = c.split().boundary(set.n_periods())?;
        let (train, test) = make_windows(&set, events.as_ref(), &c.features, c.lookback, boundary)?;
        let dir = self.layout.features();
        quakecast::features::save_samples(&train, &test, &dir)?;

        let mut m = self.manifest("features");
        self.record_dir_inputs(&mut m, &self.layout.series(), &["meta.json", "values.csv", "counts.csv"])?;
        if c.features.use_multiplicity {
            m.input(self.layout.relative(&self.layout.events()), &self.layout.events())?;
        }
        for f in ["layout.json", "features.csv"] {
            m.output(&self.layout, &dir.join(f))?;
        }
        m.summary = json!({
            "columns": train.cube.columns,
            "lookback": c.lookback,
            "split_boundary": boundary,
            "train_samples": train.len(),
            "test_samples": test.len(),
        });
        m.write(&dir.join("manifest.json"))?;
        Ok(m.summary)
    }

    fn selected_models(&self, name: Option<&str>) -> Result<Vec<&'a ModelConfig>> {
        match name {
            None => Ok(self.config.models.iter().collect()),
            Some(n) => match self.config.model(n) {
                Some(m) => Ok(vec![m]),
                None => {
                    let known: Vec<&str> = self.config.models.iter().map(|m| m.name.as_str()).collect();
                    Err(ConfigError(vec![format!("no model named `{n}` in the configuration (known: {known:?})")]).into())
                }
            },
        }
    }

    fn streams_for(&self, model: &ModelConfig) -> Result<Vec<ForecastStream>> {
        let missing: Vec<String> = model
            .streams
            .iter()
            .filter(|p| !p.is_file())
            .map(|p| format!("model `{}`: stream file {} does not exist", model.name, p.display()))
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError(missing).into());
        }
        Ok(load_forecast_streams(&model.streams)?)
    }

    fn graph_for(&self, needs_graph: bool) -> Result<Option<BinGraph>> {
        if needs_graph {
            Ok(Some(self.load_graph()?))
        } else {
            Ok(None)
        }
    }

    pub fn train(&self, name: Option<&str>) -> Result<serde_json::Value> {
        let c = self.config;
        let chosen = self.selected_models(name)?;
        let (train_set, _) = self.load_samples()?;
        let needs_graph = chosen.iter().any(|m| {
            m.descriptor(c.lookback, &c.features, Vec::new()).needs_graph()
        });
        let graph = self.graph_for(needs_graph)?;

        // Models are independent; each trains single-threaded, so running them
        // side by side does not change any result.
        let results: Vec<Result<serde_json::Value>> = chosen
            .par_iter()
            .map(|m| self.train_one(m, &train_set, graph.as_ref()))
            .collect();
        let mut summaries = serde_json::Map::new();
        for (m, r) in chosen.iter().zip(results) {
            summaries.insert(m.name.clone(), r.with_context(|| format!("training `{}`", m.name))?);
        }
        Ok(serde_json::Value::Object(summaries))
    }

    fn train_one(&self, m: &ModelConfig, samples: &SampleSet, graph: Option<&BinGraph>) -> Result<serde_json::Value> {
        let c = self.config;
        let streams = self.streams_for(m)?;
        let names = streams.iter().map(|s| s.model.clone()).collect();
        let descriptor = m.descriptor(c.lookback, &c.features, names);
        let needs_graph = descriptor.needs_graph();
        let bundle = models::train(descriptor, &m.train_config(&c.train), samples, graph, &streams)?;
        let dir = self.layout.model(&m.name);
        bundle.save(&dir)?;

        let mut man = self.manifest("train");
        self.record_dir_inputs(&mut man, &self.layout.features(), &["layout.json", "features.csv"])?;
        if needs_graph {
            self.record_dir_inputs(&mut man, &self.layout.graph(), &["nodes.txt", "edges.txt"])?;
        }
        for p in &m.streams {
            man.input(format!("stream:{}", file_name(p)), p)?;
        }
        for f in ["bundle.json", "params.bin"] {
            man.output(&self.layout, &dir.join(f))?;
        }
        man.summary = json!({
            "kind": m.kind.to_string(),
            "epochs": bundle.provenance.epochs,
            "final_train_loss": bundle.provenance.final_train_loss,
            "bundle_digest": bundle.digest()?,
        });
        man.write(&dir.join("manifest.json"))?;
        Ok(man.summary)
    }

    pub fn predict(&self, name: Option<&str>, split: SplitChoice) -> Result<serde_json::Value> {
        let chosen = self.selected_models(name)?;
        let (train_set, test_set) = self.load_samples()?;
        let samples = match split {
            SplitChoice::Train => train_set,
            SplitChoice::Test => test_set,
            SplitChoice::All => SampleSet {
                cube: Arc::clone(&train_set.cube),
                lookback: train_set.lookback,
                targets: train_set.targets.start..test_set.targets.end,
            },
        };
        let mut summaries = serde_json::Map::new();
        for m in chosen {
            let dir = self.layout.model(&m.name);
            require(&dir.join("bundle.json"), "train")?;
            let bundle = ModelBundle::load(&dir)?;
            let graph = self.graph_for(bundle.descriptor.needs_graph())?;
            let streams = if bundle.descriptor.kind == ModelKind::Multifoundation {
                self.streams_for(m)?
            } else {
                Vec::new()
            };
            let stream = models::predict(&bundle, &samples, graph.as_ref(), &streams, &m.name)?;
            let path = self.layout.prediction(&m.name);
            stream.save(&path)?;

            let mut man = self.manifest("predict");
            self.record_dir_inputs(&mut man, &dir, &["bundle.json", "params.bin"])?;
            self.record_dir_inputs(&mut man, &self.layout.features(), &["layout.json", "features.csv"])?;
            if graph.is_some() {
                self.record_dir_inputs(&mut man, &self.layout.graph(), &["nodes.txt", "edges.txt"])?;
            }
            for p in &m.streams {
                man.input(format!("stream:{}", file_name(p)), p)?;
            }
            man.output(&self.layout, &path)?;
            man.summary = json!({
                "split": format!("{split:?}").to_lowercase(),
                "periods": [stream.periods().start, stream.periods().end],
                "rows": stream.len(),
            });
            man.write(&self.layout.predictions().join(format!("{}.manifest.json", m.name)))?;
            summaries.insert(m.name.clone(), man.summary);
        }
        Ok(serde_json::Value::Object(summaries))
    }

    pub fn eval(&self, extra: &[PathBuf], truth: bool, aggregation: Option<Aggregation>) -> Result<serde_json::Value> {
        let set = self.load_series()?;
        let (_, test) = self.load_samples()?;
        let periods = test.targets.clone();

        let mut files: Vec<PathBuf> = Vec::new();
        if let Ok(entries) = std::fs::read_dir(self.layout.predictions()) {
            for e in entries {
                let p = e?.path();
                if p.extension().is_some_and(|x| x == "csv") {
                    files.push(p);
                }
            }
        }
        files.sort();
        files.extend(extra.iter().cloned());
        let mut streams = load_forecast_streams(&files)?;
        if truth {
            streams.push(ForecastStream::truth("truth", &set, periods.clone())?);
        }
        if streams.is_empty() {
            return Err(crate::manifest::MissingArtifact {
                path: self.layout.predictions(),
                command: "predict",
            }
            .into());
        }

        let mode = aggregation.unwrap_or(self.config.aggregation);
        let reports = report(&streams, &set, periods.clone(), "test", mode)?;
        let dir = self.layout.eval();
        let table = dir.join("table.csv");
        let detail = dir.join("detail.json");
        let series = dir.join("series.csv");
        write(&table, table_csv(&reports))?;
        write(&detail, detail_json(&reports)?)?;
        write(&series, series_csv(&streams, &set, periods)?)?;

        let mut m = self.manifest("eval");
        self.record_dir_inputs(&mut m, &self.layout.series(), &["meta.json", "values.csv"])?;
        for f in &files {
            let key = if f.starts_with(&self.layout.out) {
                self.layout.relative(f)
            } else {
                format!("stream:{}", file_name(f))
            };
            m.input(key, f)?;
        }
        for p in [&table, &detail, &series] {
            m.output(&self.layout, p)?;
        }
        m.summary = json!(reports
            .iter()
            .map(|r| json!({
                "model": r.model,
                "mse": r.aggregate.mse,
                "mae": r.aggregate.mae,
                "nnse": r.aggregate.nnse,
                "degenerate_bins": r.aggregate.degenerate_bins,
            }))
            .collect::<Vec<_>>());
        m.write(&dir.join("manifest.json"))?;
        Ok(json!({ "aggregation": mode, "reports": m.summary }))
    }

    pub fn nowcast_roc(&self) -> Result<serde_json::Value> {
        let c = self.config;
        let nc = &c.nowcast;
        let events = filter_region(&self.load_events()?, &c.region);
        let span = MonthSpan::covering(c.region.t_start, c.region.t_end)?;
        let rate = monthly_small_rate(&events, &span, nc.small_mag);
        let labels = large_event_labels(&events, &span, nc.large_mag, nc.horizon_months);
        let training_len = nc
            .training_months
            .unwrap_or((c.split_fraction * span.n_months as f64).floor() as usize);
        let opt = optimize_filter(&rate, &labels, &nc.grid, training_len)?;
        let curve = nowcast_curve(&rate, &opt.best, training_len)?;
        let roc = roc_skill(&curve[..training_len], &labels[..training_len])?;
        let full_skill = roc_skill(&curve, &labels).ok().map(|r| r.skill);

        let dir = self.layout.nowcast();
        let surface = dir.join("surface.csv");
        let roc_path = dir.join("roc.csv");
        let series = dir.join("nowcast.csv");
        let values = dir.join("values.csv");
        write(&surface, opt.surface_csv())?;
        write(&roc_path, roc.to_csv())?;
        let mut text = String::from("month_index,year,month,rate,nowcast,label\n");
        for t in 0..span.n_months {
            let months = (span.start_month as usize - 1) + t;
            let year = span.start_year as i64 + (months / 12) as i64;
            text.push_str(&format!(
                "{t},{year},{},{:?},{:?},{}\n",
                months % 12 + 1,
                rate[t],
                curve[t],
                u8::from(labels[t])
            ));
        }
        write(&series, text)?;
        let row: Vec<String> = curve.iter().map(|v| format!("{v:?}")).collect();
        write(&values, row.join(",") + "\n")?;

        let mut m = self.manifest("nowcast-roc");
        m.input(self.layout.relative(&self.layout.events()), &self.layout.events())?;
        for p in [&surface, &roc_path, &series, &values] {
            m.output(&self.layout, p)?;
        }
        m.summary = json!({
            "months": span.n_months,
            "training_months": training_len,
            "positive_months": labels.iter().filter(|&&l| l).count(),
            "best": opt.best,
            "training_skill": opt.skill,
            "full_span_skill": full_skill,
        });
        m.write(&dir.join("manifest.json"))?;
        Ok(m.summary)
    }
}

fn write(path: &Path, text: String) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).with_context(|| path.display().to_string())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}
