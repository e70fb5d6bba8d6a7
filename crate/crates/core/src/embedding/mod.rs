//! PCA, exact t-SNE and super-class scatter output for feature tables.

mod pca;
mod scatter;
mod tsne;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::shallow_eval::FeatureTable;

pub use pca::{pca_fit_transform, PcaModel};
pub use scatter::{emit_scatter, ScatterFiles, SuperClassMap, OTHER_GROUP};
pub use tsne::{
    compute_affinities, silhouette_score, squared_distances, tsne_embed, AffinityMatrix,
    EmbeddingResult, TsneConfig, PROB_FLOOR,
};

/// Default PCA target dimension applied before t-SNE.
pub const DEFAULT_PCA_DIM: usize = 50;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("k = {k} outside 1..={max}")]
    InvalidK { k: usize, max: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("perplexity {perplexity} must lie strictly between 1 and n = {n}")]
    Perplexity { perplexity: f64, n: usize },
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("super-class map: {0}")]
    SuperClass(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn matrix_from_table(table: &FeatureTable) -> DMatrix<f64> {
    DMatrix::from_row_slice(table.len(), table.dim(), table.data())
}

/// Row-major copy of a matrix.
pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

/// Optional PCA down to `pca_dim` (skipped when the table is already that
/// narrow), then t-SNE.
pub fn embed_table(
    table: &FeatureTable,
    pca_dim: Option<usize>,
    config: &TsneConfig,
) -> Result<EmbeddingResult, EmbeddingError> {
    let x = matrix_from_table(table);
    let reduced = match pca_dim {
        Some(k) if k < x.ncols() => pca_fit_transform(&x, k.min(x.nrows()))?.1,
        _ => x,
    };
    tsne_embed(&row_major(&reduced), reduced.nrows(), reduced.ncols(), config)
}
