use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::TrainConfig;
use super::ovo::{train_one_vs_one, BinaryLoss, OneVsOne};
use super::{FeatureTable, ShallowError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: String,
    /// Mean per-class accuracy of each split, by split index.
    pub per_split: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across splits.
    pub std: f64,
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn from_splits(protocol: &str, per_split: Vec<f64>, config: BTreeMap<String, String>) -> Self {
        let (mean, std) = mean_std(&per_split);
        EvalReport { protocol: protocol.to_string(), per_split, mean, std, config }
    }

    /// Per-split rows then a `mean` summary row carrying the std.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("protocol,split,accuracy,std\n");
        for (i, a) in self.per_split.iter().enumerate() {
            out.push_str(&format!("{},{i},{a:.6},\n", self.protocol));
        }
        out.push_str(&format!("{},mean,{:.6},{:.6}\n", self.protocol, self.mean, self.std));
        out
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean over classes of the per-class hit rate on `test`.
pub fn mean_class_accuracy(model: &OneVsOne, test: &FeatureTable) -> f64 {
    let mut hits = vec![0usize; model.n_classes];
    let mut totals = vec![0usize; model.n_classes];
    for i in 0..test.len() {
        let y = test.label(i);
        totals[y] += 1;
        if model.predict(test.row(i)) == y {
            hits[y] += 1;
        }
    }
    let rates: Vec<f64> = hits
        .iter()
        .zip(&totals)
        .filter(|(_, &t)| t > 0)
        .map(|(&h, &t)| h as f64 / t as f64)
        .collect();
    rates.iter().sum::<f64>() / rates.len().max(1) as f64
}

fn split_rng(seed: u64, split: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(split as u64 + 1);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionConfig {
    pub n_train_per_class: usize,
    pub n_splits: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub loss: BinaryLoss,
}

impl Default for RecognitionConfig {
    fn default() -> Self {
        RecognitionConfig {
            n_train_per_class: 30,
            n_splits: 5,
            seed: 0,
            train: TrainConfig::default(),
            loss: BinaryLoss::Logistic,
        }
    }
}

/// Per split: draw `n_train_per_class` training samples per class, train
/// one-vs-one, test on every remaining sample.
pub fn run_recognition_protocol(
    data: &FeatureTable,
    config: &RecognitionConfig,
) -> Result<EvalReport, ShallowError> {
    if config.n_splits == 0 {
        return Err(ShallowError::InvalidConfig("n_splits must be at least 1".into()));
    }
    let n_classes = data.n_classes();
    let by_class = data.class_indices(n_classes);
    let short: Vec<String> = by_class
        .iter()
        .enumerate()
        .filter(|(_, v)| v.len() <= config.n_train_per_class)
        .map(|(c, v)| format!("class {c}: {} samples", v.len()))
        .collect();
    if !short.is_empty() {
        return Err(ShallowError::InsufficientSamples(format!(
            "need more than {} per class; {}",
            config.n_train_per_class,
            short.join(", ")
        )));
    }
    let per_split = (0..config.n_splits)
        .into_par_iter()
        .map(|s| {
            let mut rng = split_rng(config.seed, s);
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for idx in &by_class {
                let mut idx = idx.clone();
                idx.shuffle(&mut rng);
                train.extend_from_slice(&idx[..config.n_train_per_class]);
                test.extend_from_slice(&idx[config.n_train_per_class..]);
            }
            let train_cfg = TrainConfig { seed: config.train.seed ^ s as u64, ..config.train.clone() };
            let model = train_one_vs_one(&data.subset(&train), &train_cfg, config.loss)?;
            Ok(mean_class_accuracy(&model, &data.subset(&test)))
        })
        .collect::<Result<Vec<f64>, ShallowError>>()?;
    let mut echo = train_echo(&config.train, config.loss);
    echo.insert("n_train_per_class".into(), config.n_train_per_class.to_string());
    echo.insert("n_splits".into(), config.n_splits.to_string());
    echo.insert("seed".into(), config.seed.to_string());
    Ok(EvalReport::from_splits("recognition", per_split, echo))
}

fn train_echo(t: &TrainConfig, loss: BinaryLoss) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("alpha0".into(), t.alpha0.to_string());
    m.insert("epochs".into(), t.epochs.to_string());
    m.insert("decay_every".into(), t.decay_every.to_string());
    m.insert("gamma".into(), t.gamma.to_string());
    m.insert("l2".into(), t.l2.to_string());
    m.insert("loss".into(), format!("{loss:?}").to_lowercase());
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DaMode {
    /// Source labels only.
    S,
    /// Target labels only.
    T,
    /// Union of source and target labels.
    ST,
}

impl fmt::Display for DaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DaMode::S => "S",
            DaMode::T => "T",
            DaMode::ST => "ST",
        })
    }
}

impl std::str::FromStr for DaMode {
    type Err = ShallowError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(DaMode::S),
            "T" => Ok(DaMode::T),
            "ST" => Ok(DaMode::ST),
            _ => Err(ShallowError::InvalidConfig(format!("unknown mode {s:?}; expected S, T or ST"))),
        }
    }
}

/// Labeled-sample budget when Amazon is the source domain.
pub const SOURCE_LABELS_AMAZON: usize = 20;
/// Labeled-sample budget when DSLR is the source domain.
pub const SOURCE_LABELS_DSLR: usize = 8;
pub const TARGET_LABELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaConfig {
    pub mode: DaMode,
    pub source_per_class: usize,
    pub target_per_class: usize,
    pub n_splits: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub loss: BinaryLoss,
}

impl DaConfig {
    pub fn new(mode: DaMode, source_per_class: usize) -> Self {
        DaConfig {
            mode,
            source_per_class,
            target_per_class: TARGET_LABELS,
            n_splits: 5,
            seed: 0,
            train: TrainConfig::default(),
            loss: BinaryLoss::Logistic,
        }
    }
}

/// The labeled training set and held-out target samples of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct DaSplit {
    pub train: FeatureTable,
    pub test: FeatureTable,
}

/// Draws one split. The target draw happens first and does not depend on the
/// mode, so S, T and ST runs with the same seed share their test set.
pub fn sample_da_split(
    source: &FeatureTable,
    target: &FeatureTable,
    config: &DaConfig,
    split: usize,
) -> Result<DaSplit, ShallowError> {
    if source.dim() != target.dim() {
        return Err(ShallowError::DimensionMismatch { expected: source.dim(), found: target.dim() });
    }
    let n_classes = source.n_classes().max(target.n_classes());
    let tgt = target.class_indices(n_classes);
    let src = source.class_indices(n_classes);
    let uses_source = config.mode != DaMode::T;
    let mut problems = Vec::new();
    for c in 0..n_classes {
        if tgt[c].len() <= config.target_per_class {
            problems.push(format!("target class {c}: {} samples", tgt[c].len()));
        }
        if uses_source && src[c].len() < config.source_per_class {
            problems.push(format!("source class {c}: {} samples", src[c].len()));
        }
    }
    if !problems.is_empty() {
        return Err(ShallowError::InsufficientSamples(format!(
            "mode {} needs {} source and more than {} target samples per class; {}",
            config.mode,
            config.source_per_class,
            config.target_per_class,
            problems.join(", ")
        )));
    }
    let mut rng = split_rng(config.seed, split);
    let (mut tgt_train, mut tgt_test, mut src_train) = (Vec::new(), Vec::new(), Vec::new());
    for idx in &tgt {
        let mut idx = idx.clone();
        idx.shuffle(&mut rng);
        tgt_train.extend_from_slice(&idx[..config.target_per_class]);
        tgt_test.extend_from_slice(&idx[config.target_per_class..]);
    }
    for idx in &src {
        let mut idx = idx.clone();
        idx.shuffle(&mut rng);
        src_train.extend_from_slice(&idx[..config.source_per_class.min(idx.len())]);
    }
    let train = match config.mode {
        DaMode::S => source.subset(&src_train),
        DaMode::T => target.subset(&tgt_train),
        DaMode::ST => source.subset(&src_train).concat(&target.subset(&tgt_train))?,
    };
    Ok(DaSplit { train, test: target.subset(&tgt_test) })
}

/// Domain-adaptation protocol: train per mode, evaluate on held-out target
/// samples, aggregate over splits.
pub fn run_da_protocol(
    source: &FeatureTable,
    target: &FeatureTable,
    config: &DaConfig,
) -> Result<EvalReport, ShallowError> {
    if config.n_splits == 0 {
        return Err(ShallowError::InvalidConfig("n_splits must be at least 1".into()));
    }
    let per_split = (0..config.n_splits)
        .into_par_iter()
        .map(|s| {
            let split = sample_da_split(source, target, config, s)?;
            let train_cfg = TrainConfig { seed: config.train.seed ^ s as u64, ..config.train.clone() };
            let model = train_one_vs_one(&split.train, &train_cfg, config.loss)?;
            Ok(mean_class_accuracy(&model, &split.test))
        })
        .collect::<Result<Vec<f64>, ShallowError>>()?;
    let mut echo = train_echo(&config.train, config.loss);
    echo.insert("mode".into(), config.mode.to_string());
    echo.insert("source_per_class".into(), config.source_per_class.to_string());
    echo.insert("target_per_class".into(), config.target_per_class.to_string());
    echo.insert("n_splits".into(), config.n_splits.to_string());
    echo.insert("seed".into(), config.seed.to_string());
    Ok(EvalReport::from_splits(&format!("da_{}", config.mode), per_split, echo))
}
