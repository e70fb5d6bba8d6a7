use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EmbeddingError;

/// Probability floor applied to P and Q.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub output_dim: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            output_dim: 2,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            exaggeration: 4.0,
            exaggeration_iters: 100,
            seed: 0,
        }
    }
}

/// Pairwise affinities. Both matrices are n×n row-major with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub n: usize,
    /// `p(j|i)`; each row sums to 1.
    pub conditional: Vec<f64>,
    /// `(p(j|i) + p(i|j)) / 2n`; symmetric, sums to 1.
    pub joint: Vec<f64>,
    /// Gaussian precision `1 / (2 sigma_i^2)` found for each point.
    pub betas: Vec<f64>,
    /// Row entropies in bits.
    pub entropies_bits: Vec<f64>,
}

impl AffinityMatrix {
    pub fn conditional_row(&self, i: usize) -> &[f64] {
        &self.conditional[i * self.n..(i + 1) * self.n]
    }

    pub fn joint_at(&self, i: usize, j: usize) -> f64 {
        self.joint[i * self.n + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    /// n×output_dim coordinates, row-major.
    pub coords: Vec<f64>,
    pub dim: usize,
    /// KL(P||Q) before the first update and after every iteration.
    pub kl_trace: Vec<f64>,
}

impl EmbeddingResult {
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn initial_kl(&self) -> f64 {
        self.kl_trace[0]
    }

    pub fn final_kl(&self) -> f64 {
        *self.kl_trace.last().expect("trace is never empty")
    }
}

pub fn squared_distances(data: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = &data[i * d..(i + 1) * d];
        for (j, slot) in row.iter_mut().enumerate() {
            if i != j {
                let xj = &data[j * d..(j + 1) * d];
                *slot = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            }
        }
    });
    out
}

/// Entropy (nats) and normalized row for precision `beta`.
fn row_entropy(dist: &[f64], skip: usize, beta: f64, row: &mut [f64]) -> f64 {
    let dmin = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (&dj, pj)) in dist.iter().zip(row.iter_mut()).enumerate() {
        if j == skip {
            *pj = 0.0;
            continue;
        }
        let shifted = dj - dmin;
        let v = (-shifted * beta).exp();
        *pj = v;
        sum += v;
        weighted += shifted * v;
    }
    row.iter_mut().for_each(|p| *p /= sum);
    sum.ln() + beta * weighted / sum
}

/// Finds each point's Gaussian precision by bisection so that the row
/// entropy equals `ln(perplexity)`, then symmetrizes.
pub fn compute_affinities(
    data: &[f64],
    n: usize,
    d: usize,
    perplexity: f64,
) -> Result<AffinityMatrix, EmbeddingError> {
    if n < 2 {
        return Err(EmbeddingError::TooFewPoints(n));
    }
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(EmbeddingError::Perplexity { perplexity, n });
    }
    let dist = squared_distances(data, n, d);
    let target = perplexity.ln();
    let mut conditional = vec![0.0; n * n];
    let mut betas = vec![0.0; n];
    let mut entropies = vec![0.0; n];
    conditional
        .par_chunks_mut(n)
        .zip(betas.par_iter_mut())
        .zip(entropies.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((row, beta_out), ent_out))| {
            let di = &dist[i * n..(i + 1) * n];
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            let mut beta = 1.0;
            let mut h = row_entropy(di, i, beta, row);
            for _ in 0..200 {
                let diff = h - target;
                if diff.abs() < 1e-12 {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
                h = row_entropy(di, i, beta, row);
            }
            *beta_out = beta;
            *ent_out = h / std::f64::consts::LN_2;
        });
    let mut joint = vec![0.0; n * n];
    let scale = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = (conditional[i * n + j] + conditional[j * n + i]) / scale;
        }
    }
    Ok(AffinityMatrix { n, conditional, joint, betas, entropies_bits: entropies })
}

/// Student-t kernel numerators and their sum over `i != j`.
fn q_numerators(y: &[f64], n: usize, dim: usize) -> (Vec<f64>, f64) {
    let mut num = squared_distances(y, n, dim);
    num.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { 0.0 } else { 1.0 / (1.0 + *v) };
        }
    });
    let row_sums: Vec<f64> = num.par_chunks(n).map(|r| r.iter().sum()).collect();
    let total = row_sums.iter().sum();
    (num, total)
}

fn kl_divergence(p: &[f64], num: &[f64], total: f64, n: usize) -> f64 {
    let rows: Vec<f64> = p
        .par_chunks(n)
        .zip(num.par_chunks(n))
        .enumerate()
        .map(|(i, (pr, nr))| {
            let mut s = 0.0;
            for j in 0..n {
                if i != j {
                    let pij = pr[j].max(PROB_FLOOR);
                    let qij = (nr[j] / total).max(PROB_FLOOR);
                    s += pij * (pij / qij).ln();
                }
            }
            s
        })
        .collect();
    rows.iter().sum()
}

/// Exact t-SNE on `n` points of dimension `d` (row-major).
pub fn tsne_embed(
    data: &[f64],
    n: usize,
    d: usize,
    config: &TsneConfig,
) -> Result<EmbeddingResult, EmbeddingError> {
    if data.len() != n * d {
        return Err(EmbeddingError::Shape(format!("{} values for {n}x{d}", data.len())));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(EmbeddingError::NonFinite);
    }
    if config.iterations == 0 || config.output_dim == 0 {
        return Err(EmbeddingError::Shape("iterations and output_dim must be positive".into()));
    }
    if (n as f64) < 3.0 * config.perplexity {
        log::warn!("t-SNE: {n} points is small for perplexity {}", config.perplexity);
    }
    let aff = compute_affinities(data, n, d, config.perplexity)?;
    let p = aff.joint;
    let dim = config.output_dim;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<f64> = (0..n * dim).map(|_| init.sample(&mut rng)).collect();
    let mut update = vec![0.0; n * dim];
    let mut gains = vec![1.0f64; n * dim];
    let mut kl_trace = Vec::with_capacity(config.iterations + 1);
    let mut grad = vec![0.0; n * dim];

    for iter in 0..config.iterations {
        let (num, total) = q_numerators(&y, n, dim);
        kl_trace.push(kl_divergence(&p, &num, total, n));
        let exag = if iter < config.exaggeration_iters { config.exaggeration } else { 1.0 };
        let momentum = if iter < config.momentum_switch_iter {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        grad.par_chunks_mut(dim).enumerate().for_each(|(i, g)| {
            g.iter_mut().for_each(|v| *v = 0.0);
            let yi = &y[i * dim..(i + 1) * dim];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let nij = num[i * n + j];
                let qij = (nij / total).max(PROB_FLOOR);
                let coef = 4.0 * (exag * p[i * n + j] - qij) * nij;
                let yj = &y[j * dim..(j + 1) * dim];
                for k in 0..dim {
                    g[k] += coef * (yi[k] - yj[k]);
                }
            }
        });
        for idx in 0..n * dim {
            let same_sign = (grad[idx] > 0.0) == (update[idx] > 0.0);
            gains[idx] = if same_sign { gains[idx] * 0.8 } else { gains[idx] + 0.2 };
            gains[idx] = gains[idx].max(0.01);
            update[idx] = momentum * update[idx] - config.learning_rate * gains[idx] * grad[idx];
            y[idx] += update[idx];
        }
        for k in 0..dim {
            let mean = (0..n).map(|i| y[i * dim + k]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[i * dim + k] -= mean);
        }
    }
    let (num, total) = q_numerators(&y, n, dim);
    kl_trace.push(kl_divergence(&p, &num, total, n));
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EmbeddingError::NonFinite);
    }
    Ok(EmbeddingResult { coords: y, dim, kl_trace })
}

/// Mean silhouette coefficient of `points` (row-major, `dim` columns) under
/// `labels`. Points alone in their cluster score 0.
pub fn silhouette_score(points: &[f64], dim: usize, labels: &[usize]) -> f64 {
    let n = labels.len();
    let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
    let dist = |i: usize, j: usize| -> f64 {
        (0..dim)
            .map(|k| (points[i * dim + k] - points[j * dim + k]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sums = vec![0.0; n_clusters];
            let mut counts = vec![0usize; n_clusters];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += dist(i, j);
                    counts[labels[j]] += 1;
                }
            }
            let own = labels[i];
            if counts[own] == 0 {
                return 0.0;
            }
            let a = sums[own] / counts[own] as f64;
            let b = (0..n_clusters)
                .filter(|&c| c != own && counts[c] > 0)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            (b - a) / a.max(b)
        })
        .collect();
    scores.iter().sum::<f64>() / n.max(1) as f64
}
