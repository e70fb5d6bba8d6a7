//! Seeded synthetic data used by tests, examples and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::shallow_eval::FeatureTable;

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub n_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Standard deviation of the class centers around the origin.
    pub separation: f64,
    /// Standard deviation of samples around their center.
    pub spread: f64,
    pub seed: u64,
}

/// Isotropic Gaussian blobs, rows grouped by class.
pub fn gaussian_blobs(spec: &BlobSpec) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers_dist = Normal::new(0.0, spec.separation).expect("separation must be finite");
    let noise = Normal::new(0.0, spec.spread).expect("spread must be finite");
    let centers: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| (0..spec.dim).map(|_| centers_dist.sample(&mut rng)).collect())
        .collect();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..spec.per_class {
            labels.push(c);
            rows.push(center.iter().map(|m| m + noise.sample(&mut rng)).collect());
        }
    }
    FeatureTable::from_rows(labels, rows).expect("blob table is well formed")
}

/// `n` random 64-bit values.
pub fn random_hashes(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}
