use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::EmbeddingError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Unit principal axes, by descending explained variance.
    pub components: Vec<Vec<f64>>,
    /// Sample variance (denominator `n - 1`) along each axis.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, k) = (x.nrows(), self.components.len());
        DMatrix::from_fn(n, k, |i, c| {
            self.components[c]
                .iter()
                .enumerate()
                .map(|(j, v)| (x[(i, j)] - self.mean[j]) * v)
                .sum()
        })
    }

    pub fn inverse_transform(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.mean.len();
        DMatrix::from_fn(z.nrows(), d, |i, j| {
            self.mean[j]
                + self.components.iter().enumerate().map(|(c, v)| z[(i, c)] * v[j]).sum::<f64>()
        })
    }

    /// Mean squared reconstruction error per entry.
    pub fn reconstruction_error(&self, x: &DMatrix<f64>) -> f64 {
        let back = self.inverse_transform(&self.transform(x));
        (x - back).iter().map(|v| v * v).sum::<f64>() / (x.nrows() * x.ncols()) as f64
    }
}

/// Flips `v` so its largest-magnitude coordinate is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn sorted_eigen(m: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&l, v)| (l, v.iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Mean-centers `x` (n×d) and projects it onto its top `k` principal axes.
///
/// Uses the d×d covariance when `d <= n`, otherwise the n×n Gram matrix, and
/// falls back to the covariance when the Gram route would hit a null direction.
pub fn pca_fit_transform(x: &DMatrix<f64>, k: usize) -> Result<(PcaModel, DMatrix<f64>), EmbeddingError> {
    let (n, d) = (x.nrows(), x.ncols());
    if k == 0 || k > n.min(d) {
        return Err(EmbeddingError::InvalidK { k, max: n.min(d) });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EmbeddingError::NonFinite);
    }
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let denom = (n.max(2) - 1) as f64;

    let mut axes: Option<Vec<(f64, Vec<f64>)>> = None;
    if d > n {
        let gram = (&centered * centered.transpose()) / denom;
        let pairs = sorted_eigen(gram);
        let top = pairs[0].0.max(0.0);
        if pairs[..k].iter().all(|(l, _)| *l > 1e-10 * top && *l > 0.0) {
            let picked = pairs[..k]
                .iter()
                .map(|(l, u)| {
                    let u = DMatrix::from_column_slice(n, 1, u);
                    let v = centered.transpose() * u;
                    let norm = v.norm();
                    (*l, v.iter().map(|x| x / norm).collect())
                })
                .collect();
            axes = Some(picked);
        }
    }
    let axes = match axes {
        Some(a) => a,
        None => {
            let cov = (centered.transpose() * &centered) / denom;
            sorted_eigen(cov).into_iter().take(k).collect()
        }
    };
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for (l, mut v) in axes {
        fix_sign(&mut v);
        explained_variance.push(l.max(0.0));
        components.push(v);
    }
    let model = PcaModel { mean, components, explained_variance };
    let proj = model.transform(x);
    Ok((model, proj))
}
