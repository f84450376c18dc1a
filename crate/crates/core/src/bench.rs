//! Experiment protocols and report generation.
//!
//! Three protocols compare the entropy kinds under otherwise identical
//! conditions:
//!
//! * `MlpInit`: `n/2` networks per kind, seeds `1..=n/2`, differing only in
//!   the source that draws their initial weights (and epoch shuffles).
//! * `TreeSplit`: `n/2` random trees per kind, scored by k-fold cross
//!   validation.
//! * `ForestSweep`: one forest per kind for each size in the sweep, seeded
//!   with the size's position in the sweep.
//!
//! Data generation and then partitioning draw from one pseudo stream seeded
//! with `data_seed`, so every model of an experiment sees the same data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{self, Dataset, DatasetError};
use crate::entropy::{BitRecord, EntropyError, EntropyKind, EntropySource};
use crate::neural::{self, AdamParams, MlpConfig, NeuralError, TrainingHistory};
use crate::trees::{self, KAttributes, TreeConfig, TreeError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("experiment spec: {0}")]
    Spec(String),
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("every model in the batch failed")]
    AllFailed,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    MlpInit,
    TreeSplit,
    ForestSweep,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::MlpInit => "MlpInit",
            Protocol::TreeSplit => "TreeSplit",
            Protocol::ForestSweep => "ForestSweep",
        }
    }
}

impl FromStr for Protocol {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" | "mlpinit" => Ok(Protocol::MlpInit),
            "tree" | "treesplit" => Ok(Protocol::TreeSplit),
            "forest" | "forestsweep" => Ok(Protocol::ForestSweep),
            other => Err(BenchError::Spec(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DatasetSpec {
    Blobs {
        classes: usize,
        per_class: usize,
        features: usize,
        spread: f64,
    },
    Csv {
        path: PathBuf,
        label_column: String,
    },
    /// Directory holding `train-*` and `t10k-*` IDX files.
    Mnist {
        dir: PathBuf,
        train_limit: Option<usize>,
        test_limit: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub protocol: Protocol,
    pub n_models: usize,
    pub dataset: DatasetSpec,
    pub data_seed: u64,
    pub split_fraction: f64,
    pub folds: usize,
    pub tree: TreeConfig,
    pub forest_sizes: Vec<usize>,
    pub mlp_hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    pub init_bounds: (f64, f64),
    /// When set, every model of both kinds replays this record.
    #[serde(skip)]
    pub replay: Option<BitRecord>,
    /// Directory relative dataset paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(protocol: Protocol, dataset: DatasetSpec) -> Self {
        Self {
            protocol,
            n_models: 10,
            dataset,
            data_seed: 1,
            split_fraction: 0.7,
            folds: 10,
            tree: TreeConfig::default(),
            forest_sizes: (1..=10).map(|i| i * 10).collect(),
            mlp_hidden: vec![64],
            epochs: 20,
            batch_size: 32,
            adam: AdamParams::default(),
            init_bounds: (-0.5, 0.5),
            replay: None,
            base_dir: None,
        }
    }

    pub fn default_blobs() -> DatasetSpec {
        DatasetSpec::Blobs { classes: 3, per_class: 100, features: 10, spread: 0.6 }
    }

    /// Parses the line-oriented `key=value` format; `#` starts a comment.
    pub fn parse_kv(text: &str) -> Result<Self> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Spec(format!("line {}: expected key=value", lineno + 1)))?;
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| kv.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let protocol: Protocol =
            get("protocol").ok_or_else(|| BenchError::Spec("missing `protocol`".into()))?.parse()?;

        let dataset = match get("dataset").unwrap_or("blobs") {
            "blobs" => {
                let DatasetSpec::Blobs { classes, per_class, features, spread } = Self::default_blobs() else {
                    unreachable!()
                };
                DatasetSpec::Blobs {
                    classes: parse_or(get("blobs.classes"), "blobs.classes", classes)?,
                    per_class: parse_or(get("blobs.per_class"), "blobs.per_class", per_class)?,
                    features: parse_or(get("blobs.features"), "blobs.features", features)?,
                    spread: parse_or(get("blobs.spread"), "blobs.spread", spread)?,
                }
            }
            "csv" => DatasetSpec::Csv {
                path: get("csv.path").ok_or_else(|| BenchError::Spec("missing `csv.path`".into()))?.into(),
                label_column: get("csv.label_column").unwrap_or("label").to_string(),
            },
            "mnist" => DatasetSpec::Mnist {
                dir: get("mnist.dir").ok_or_else(|| BenchError::Spec("missing `mnist.dir`".into()))?.into(),
                train_limit: get("mnist.train_limit").map(|v| parse_value(v, "mnist.train_limit")).transpose()?,
                test_limit: get("mnist.test_limit").map(|v| parse_value(v, "mnist.test_limit")).transpose()?,
            },
            other => return Err(BenchError::Spec(format!("unknown dataset `{other}`"))),
        };

        let mut spec = Self::new(protocol, dataset);
        spec.n_models = parse_or(get("n_models"), "n_models", spec.n_models)?;
        spec.data_seed = parse_or(get("data_seed"), "data_seed", spec.data_seed)?;
        spec.split_fraction = parse_or(get("split_fraction"), "split_fraction", spec.split_fraction)?;
        spec.folds = parse_or(get("folds"), "folds", spec.folds)?;
        if let Some(k) = get("tree.k") {
            spec.tree.k_attributes = k.parse::<KAttributes>()?;
        }
        if let Some(d) = get("tree.max_depth") {
            spec.tree.max_depth = if d == "none" { None } else { Some(parse_value(d, "tree.max_depth")?) };
        }
        spec.tree.bootstrap = parse_or(get("tree.bootstrap"), "tree.bootstrap", spec.tree.bootstrap)?;
        if let Some(s) = get("forest.sizes") {
            spec.forest_sizes = parse_list(s, "forest.sizes")?;
        }
        if let Some(h) = get("mlp.hidden") {
            spec.mlp_hidden = parse_list(h, "mlp.hidden")?;
        }
        spec.epochs = parse_or(get("mlp.epochs"), "mlp.epochs", spec.epochs)?;
        spec.batch_size = parse_or(get("mlp.batch_size"), "mlp.batch_size", spec.batch_size)?;
        spec.adam.alpha = parse_or(get("mlp.alpha"), "mlp.alpha", spec.adam.alpha)?;
        spec.adam.beta1 = parse_or(get("mlp.beta1"), "mlp.beta1", spec.adam.beta1)?;
        spec.adam.beta2 = parse_or(get("mlp.beta2"), "mlp.beta2", spec.adam.beta2)?;
        spec.adam.epsilon = parse_or(get("mlp.epsilon"), "mlp.epsilon", spec.adam.epsilon)?;
        spec.init_bounds.0 = parse_or(get("mlp.init_lo"), "mlp.init_lo", spec.init_bounds.0)?;
        spec.init_bounds.1 = parse_or(get("mlp.init_hi"), "mlp.init_hi", spec.init_bounds.1)?;

        const KNOWN: &[&str] = &[
            "protocol",
            "dataset",
            "n_models",
            "data_seed",
            "split_fraction",
            "folds",
            "blobs.classes",
            "blobs.per_class",
            "blobs.features",
            "blobs.spread",
            "csv.path",
            "csv.label_column",
            "mnist.dir",
            "mnist.train_limit",
            "mnist.test_limit",
            "tree.k",
            "tree.max_depth",
            "tree.bootstrap",
            "forest.sizes",
            "mlp.hidden",
            "mlp.epochs",
            "mlp.batch_size",
            "mlp.alpha",
            "mlp.beta1",
            "mlp.beta2",
            "mlp.epsilon",
            "mlp.init_lo",
            "mlp.init_hi",
        ];
        if let Some((k, _)) = kv.iter().find(|(k, _)| !KNOWN.contains(&k.as_str())) {
            return Err(BenchError::Spec(format!("unknown key `{k}`")));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut spec = Self::parse_kv(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf);
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::Spec(m.to_string()));
        if self.protocol != Protocol::ForestSweep && (self.n_models < 2 || !self.n_models.is_multiple_of(2)) {
            return bad("n_models must be even and >= 2");
        }
        if self.forest_sizes.is_empty()
            || self.forest_sizes[0] == 0
            || self.forest_sizes.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("forest sizes must be positive and strictly increasing");
        }
        if self.mlp_hidden.is_empty() {
            return bad("mlp.hidden needs at least one layer");
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        crate::short_hash(&serde_json::to_string(self).expect("spec serializes"))
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn mlp_config(&self, inputs: usize, classes: usize) -> MlpConfig {
        let mut sizes = vec![inputs];
        sizes.extend(&self.mlp_hidden);
        sizes.push(classes);
        MlpConfig {
            layer_sizes: sizes,
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: self.adam,
            init_bounds: self.init_bounds,
            activation: neural::Activation::Relu,
        }
    }

    fn source(&self, kind: EntropyKind, seed: u64) -> EntropySource {
        match &self.replay {
            Some(record) => EntropySource::replay_labeled(record, kind),
            None if kind == EntropyKind::QuantumSim => EntropySource::quantum_sim(seed),
            None => EntropySource::pseudo(seed),
        }
    }
}

fn parse_value<T: FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse::<T>().map_err(|_| BenchError::Spec(format!("bad value `{v}` for `{key}`")))
}

fn parse_or<T: FromStr>(v: Option<&str>, key: &str, default: T) -> Result<T> {
    v.map_or(Ok(default), |v| parse_value(v, key))
}

fn parse_list(v: &str, key: &str) -> Result<Vec<usize>> {
    v.split(',').map(|x| parse_value(x.trim(), key)).collect()
}

/// Data for an experiment: a training pool and, for datasets that ship one,
/// a fixed test set.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: Dataset,
    pub test: Option<Dataset>,
    /// The `data_seed` stream, positioned after data generation; splits and
    /// folds continue it.
    pub source: EntropySource,
}

impl ExperimentData {
    /// Per-fold training and test sets, shared by every model of an experiment.
    pub fn cv_folds(&mut self, k: usize) -> Result<Vec<(Dataset, Dataset)>> {
        let plan = datasets::k_folds(&self.train, k, &mut self.source)?;
        Ok((0..plan.k)
            .map(|f| (self.train.subset(&plan.train_indices(f)), self.train.subset(&plan.test_indices(f))))
            .collect())
    }

    /// The shipped test set, or a stratified split of the pool.
    pub fn train_test(&mut self, fraction: f64) -> Result<(Dataset, Dataset)> {
        if let Some(test) = &self.test {
            return Ok((self.train.clone(), test.clone()));
        }
        let plan = datasets::stratified_split(&self.train, fraction, &mut self.source)?;
        Ok((self.train.subset(&plan.train_indices), self.train.subset(&plan.test_indices)))
    }
}

pub fn load_data(spec: &ExperimentSpec) -> Result<ExperimentData> {
    let mut source = EntropySource::pseudo(spec.data_seed);
    let (train, test) = match &spec.dataset {
        DatasetSpec::Blobs { classes, per_class, features, spread } => {
            (datasets::synth_blobs(*classes, *per_class, *features, *spread, &mut source)?, None)
        }
        DatasetSpec::Csv { path, label_column } => (datasets::load_csv(&spec.resolve(path), label_column)?, None),
        DatasetSpec::Mnist { dir, train_limit, test_limit } => {
            let (train, test) = datasets::load_mnist_dir(&spec.resolve(dir), *train_limit, *test_limit)?;
            (train, Some(test))
        }
    };
    Ok(ExperimentData { train, test, source })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub mean: f64,
    pub sample_stddev: f64,
    pub best: f64,
    pub worst: f64,
    pub range: f64,
    pub n: usize,
}

/// Mean, sample (n−1) standard deviation, best, worst and range.
pub fn aggregate(results: &[f64]) -> Result<AggregateStats> {
    if results.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    let n = results.len();
    let best = results.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst = results.iter().copied().fold(f64::INFINITY, f64::min);
    // Clamping keeps worst <= mean <= best under rounding and makes constant
    // inputs come out with an exactly zero deviation.
    let mean = (results.iter().sum::<f64>() / n as f64).clamp(worst, best);
    let sample_stddev =
        if n > 1 { (results.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    Ok(AggregateStats { mean, sample_stddev, best, worst, range: best - worst, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub kind: EntropyKind,
    pub seed: u64,
    /// Forest size, for forest sweeps.
    pub size: Option<usize>,
    pub accuracy: Option<f64>,
    pub fold_accuracies: Vec<f64>,
    pub failure: Option<String>,
    pub history: Option<TrainingHistory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: EntropyKind,
    pub stats: Option<AggregateStats>,
    pub failed: usize,
}

/// Pairs models of the two kinds that share a seed (or forest size).
/// Not part of the original reporting; an extension for matched comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub note: String,
    pub pairs: usize,
    /// Mean of `quantum − pseudo` accuracy.
    pub mean_difference: f64,
    pub quantum_better: usize,
    pub pseudo_better: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub protocol: Protocol,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generated_at: Option<String>,
    pub spec: ExperimentSpec,
    pub rows: Vec<ModelResult>,
    pub per_kind: Vec<KindSummary>,
    pub paired: Option<PairedSummary>,
}

const KINDS: [EntropyKind; 2] = [EntropyKind::Pseudo, EntropyKind::QuantumSim];

pub fn summarize(rows: &[ModelResult]) -> Result<Vec<KindSummary>> {
    KINDS
        .iter()
        .map(|&kind| {
            let mine: Vec<&ModelResult> = rows.iter().filter(|r| r.kind == kind).collect();
            let accs: Vec<f64> = mine.iter().filter_map(|r| r.accuracy).collect();
            let stats = if accs.is_empty() { None } else { Some(aggregate(&accs)?) };
            Ok(KindSummary { kind, stats, failed: mine.len() - accs.len() })
        })
        .collect()
}

fn pair_key(r: &ModelResult) -> (u64, Option<usize>) {
    (r.seed, r.size)
}

pub fn paired_summary(rows: &[ModelResult]) -> Option<PairedSummary> {
    let mut diffs = Vec::new();
    for p in rows.iter().filter(|r| r.kind == EntropyKind::Pseudo) {
        let q = rows.iter().find(|r| r.kind == EntropyKind::QuantumSim && pair_key(r) == pair_key(p));
        if let (Some(pa), Some(qa)) = (p.accuracy, q.and_then(|q| q.accuracy)) {
            diffs.push(qa - pa);
        }
    }
    if diffs.is_empty() {
        return None;
    }
    Some(PairedSummary {
        note: "extension: pairs share seed/size; difference is QuantumSim minus Pseudo".into(),
        pairs: diffs.len(),
        mean_difference: diffs.iter().sum::<f64>() / diffs.len() as f64,
        quantum_better: diffs.iter().filter(|&&d| d > 0.0).count(),
        pseudo_better: diffs.iter().filter(|&&d| d < 0.0).count(),
        ties: diffs.iter().filter(|&&d| d == 0.0).count(),
    })
}

fn finish(spec: &ExperimentSpec, rows: Vec<ModelResult>) -> Result<ExperimentReport> {
    if rows.iter().all(|r| r.accuracy.is_none()) {
        return Err(BenchError::AllFailed);
    }
    Ok(ExperimentReport {
        protocol: spec.protocol,
        config_hash: spec.config_hash(),
        generated_at: None,
        spec: spec.clone(),
        per_kind: summarize(&rows)?,
        paired: paired_summary(&rows),
        rows,
    })
}

fn check_protocol(spec: &ExperimentSpec, want: Protocol) -> Result<()> {
    spec.validate()?;
    if spec.protocol != want {
        return Err(BenchError::Spec(format!("expected protocol {}, got {}", want.as_str(), spec.protocol.as_str())));
    }
    Ok(())
}

fn model_jobs(spec: &ExperimentSpec) -> Vec<(EntropyKind, u64)> {
    let per_kind = (spec.n_models / 2) as u64;
    KINDS.iter().flat_map(|&k| (1..=per_kind).map(move |s| (k, s))).collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.protocol {
        Protocol::MlpInit => run_mlp_experiment(spec),
        Protocol::TreeSplit => run_tree_experiment(spec),
        Protocol::ForestSweep => run_forest_experiment(spec),
    }
}

pub fn run_mlp_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    check_protocol(spec, Protocol::MlpInit)?;
    let (train, test) = load_data(spec)?.train_test(spec.split_fraction)?;
    let config = spec.mlp_config(train.n_features(), train.class_count().max(test.class_count()));
    config.validate()?;
    let rows = model_jobs(spec)
        .into_par_iter()
        .map(|(kind, seed)| {
            let mut source = spec.source(kind, seed);
            let (_, history) = neural::train_model(&config, &train, &test, &mut source)?;
            Ok(ModelResult {
                kind,
                seed,
                size: None,
                accuracy: history.final_accuracy(),
                fold_accuracies: Vec::new(),
                failure: history.failure.clone(),
                history: Some(history),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(spec, rows)
}

fn cv_score<F>(folds: &[(Dataset, Dataset)], mut fit_and_score: F) -> std::result::Result<Vec<f64>, TreeError>
where
    F: FnMut(&Dataset, &Dataset) -> std::result::Result<f64, TreeError>,
{
    folds.iter().map(|(train, test)| fit_and_score(train, test)).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Cross-validated accuracy of single random trees, one source per model
/// carried across all folds.
pub fn tree_cv_accuracy(
    folds: &[(Dataset, Dataset)],
    config: &TreeConfig,
    source: &mut EntropySource,
) -> std::result::Result<Vec<f64>, TreeError> {
    cv_score(folds, |train, test| trees::evaluate(&trees::train_random_tree(train, config, source)?, test))
}

pub fn forest_cv_accuracy(
    folds: &[(Dataset, Dataset)],
    size: usize,
    config: &TreeConfig,
    source: &mut EntropySource,
) -> std::result::Result<Vec<f64>, TreeError> {
    cv_score(folds, |train, test| trees::evaluate(&trees::train_forest(train, size, config, source)?, test))
}

pub fn run_tree_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    check_protocol(spec, Protocol::TreeSplit)?;
    let folds = load_data(spec)?.cv_folds(spec.folds)?;
    let rows = model_jobs(spec)
        .into_par_iter()
        .map(|(kind, seed)| {
            let fold_accuracies = tree_cv_accuracy(&folds, &spec.tree, &mut spec.source(kind, seed))?;
            Ok(ModelResult {
                kind,
                seed,
                size: None,
                accuracy: Some(mean(&fold_accuracies)),
                fold_accuracies,
                failure: None,
                history: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(spec, rows)
}

pub fn run_forest_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    check_protocol(spec, Protocol::ForestSweep)?;
    let folds = load_data(spec)?.cv_folds(spec.folds)?;
    let jobs: Vec<(usize, EntropyKind, u64)> = spec
        .forest_sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &size)| KINDS.iter().map(move |&k| (size, k, i as u64 + 1)))
        .collect();
    let rows = jobs
        .into_par_iter()
        .map(|(size, kind, seed)| {
            let fold_accuracies = forest_cv_accuracy(&folds, size, &spec.tree, &mut spec.source(kind, seed))?;
            Ok(ModelResult {
                kind,
                seed,
                size: Some(size),
                accuracy: Some(mean(&fold_accuracies)),
                fold_accuracies,
                failure: None,
                history: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(spec, rows)
}

pub const CSV_HEADER: &str = "protocol,kind,seed,size,accuracy";

impl ExperimentReport {
    /// Records the current time in `generated_at`.
    pub fn stamp(&mut self) {
        self.generated_at = Some(chrono::Utc::now().to_rfc3339());
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let size = r.size.map(|s| s.to_string()).unwrap_or_default();
            let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", self.protocol.as_str(), r.kind, r.seed, size, acc);
        }
        out
    }

    /// Human-oriented per-kind table.
    pub fn stats_table(&self) -> String {
        let mut out = format!(
            "{:<11} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}\n",
            "kind", "n", "mean", "stddev", "best", "worst", "range", "failed"
        );
        for k in &self.per_kind {
            match &k.stats {
                Some(s) => {
                    let _ = writeln!(
                        out,
                        "{:<11} {:>4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>6}",
                        k.kind.as_str(),
                        s.n,
                        s.mean,
                        s.sample_stddev,
                        s.best,
                        s.worst,
                        s.range,
                        k.failed
                    );
                }
                None => {
                    let _ = writeln!(out, "{:<11} {:>4} {:>8}", k.kind.as_str(), 0, "-");
                }
            }
        }
        if let Some(p) = &self.paired {
            let _ = writeln!(
                out,
                "paired (extension): {} pairs, mean diff {:+.4}, quantum better {}, pseudo better {}, ties {}",
                p.pairs, p.mean_difference, p.quantum_better, p.pseudo_better, p.ties
            );
        }
        out
    }

    /// Writes `report.json`, `report.csv` and, for networks, one curve CSV
    /// per model under `curves/`.
    pub fn write_files(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir)?;
        fs::write(out_dir.join("report.json"), self.to_json()?)?;
        fs::write(out_dir.join("report.csv"), self.to_csv())?;
        let curves: Vec<&ModelResult> = self.rows.iter().filter(|r| r.history.is_some()).collect();
        if !curves.is_empty() {
            let dir = out_dir.join("curves");
            fs::create_dir_all(&dir)?;
            for r in curves {
                let h = r.history.as_ref().expect("filtered");
                fs::write(dir.join(format!("{}_seed{}.csv", r.kind, r.seed)), h.to_csv())?;
            }
        }
        Ok(())
    }
}
