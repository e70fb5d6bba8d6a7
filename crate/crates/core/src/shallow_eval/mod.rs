//! Linear primitives and the evaluation protocols run on extracted features.
//!
//! Everything here consumes a [`FeatureTable`] read from CSV; no network
//! inference happens in this crate. Prediction is always `argmax` of class
//! scores. Training is deterministic given the config seed.

mod features;
mod linear;
mod ovo;
mod protocol;

use thiserror::Error;

pub use features::FeatureTable;
pub use linear::{
    activation, argmax, dot, logistic, lr_schedule, perceptron_predict, softmax, softmax_gradient,
    softmax_loss, train_softmax, Activation, LinearModel, SoftmaxFit, TrainConfig,
};
pub use ovo::{train_one_vs_one, BinaryLoss, OneVsOne, PairModel};
pub use protocol::{
    mean_class_accuracy, mean_std, run_da_protocol, run_recognition_protocol, sample_da_split,
    DaConfig, DaMode, DaSplit, EvalReport, RecognitionConfig, SOURCE_LABELS_AMAZON,
    SOURCE_LABELS_DSLR, TARGET_LABELS,
};

#[derive(Debug, Error)]
pub enum ShallowError {
    #[error("invalid feature table: {0}")]
    InvalidTable(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training needs at least two classes")]
    SingleClass,
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Fraction of rows whose label is among the `k` highest scores. Equal
/// scores rank the lower class index first.
pub fn topk_accuracy(scores: &[Vec<f64>], labels: &[usize], k: usize) -> Result<f64, ShallowError> {
    if scores.len() != labels.len() {
        return Err(ShallowError::DimensionMismatch { expected: scores.len(), found: labels.len() });
    }
    if scores.is_empty() {
        return Ok(0.0);
    }
    let n_classes = scores[0].len();
    if k == 0 || k > n_classes {
        return Err(ShallowError::InvalidConfig(format!("k must lie in 1..={n_classes}")));
    }
    let mut hits = 0;
    for (row, &y) in scores.iter().zip(labels) {
        if row.len() != n_classes {
            return Err(ShallowError::DimensionMismatch { expected: n_classes, found: row.len() });
        }
        let truth = row[y];
        let ahead = row
            .iter()
            .enumerate()
            .filter(|&(j, &s)| s > truth || (s == truth && j < y))
            .count();
        if ahead < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}
