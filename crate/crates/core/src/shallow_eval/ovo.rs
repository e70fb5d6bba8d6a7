use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{dot, logistic, lr_schedule, TrainConfig};
use super::{FeatureTable, ShallowError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLoss {
    /// Two-class softmax, i.e. logistic regression.
    #[default]
    Logistic,
    Hinge,
}

/// Linear separator for one class pair. A positive margin votes for `class_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub class_a: usize,
    pub class_b: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl PairModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsOne {
    pub n_classes: usize,
    /// Pairs in lexicographic `(a, b)` order with `a < b`.
    pub models: Vec<PairModel>,
}

fn pair_seed(seed: u64, a: usize, b: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((a as u64) << 32 | b as u64)
}

fn train_pair(
    data: &FeatureTable,
    idx_a: &[usize],
    idx_b: &[usize],
    (a, b): (usize, usize),
    config: &TrainConfig,
    loss: BinaryLoss,
) -> PairModel {
    let d = data.dim();
    let mut w = vec![0.0; d];
    let mut bias = 0.0;
    let mut samples: Vec<(usize, f64)> = idx_a
        .iter()
        .map(|&i| (i, 1.0))
        .chain(idx_b.iter().map(|&i| (i, -1.0)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(config.seed, a, b));
    for epoch in 0..config.epochs {
        let lr = lr_schedule(config, epoch);
        samples.shuffle(&mut rng);
        for &(i, y) in &samples {
            let x = data.row(i);
            let m = dot(&w, x) + bias;
            // d(loss)/d(margin)
            let coef = match loss {
                BinaryLoss::Logistic => -y * logistic(-y * m),
                BinaryLoss::Hinge => {
                    if y * m < 1.0 {
                        -y
                    } else {
                        0.0
                    }
                }
            };
            for (wj, xj) in w.iter_mut().zip(x) {
                *wj -= lr * (coef * xj + config.l2 * *wj);
            }
            bias -= lr * coef;
        }
    }
    PairModel { class_a: a, class_b: b, weights: w, bias }
}

/// Trains one binary classifier per unordered class pair on that pair's
/// samples only. Pairs train in parallel; the result does not depend on
/// thread scheduling.
pub fn train_one_vs_one(
    data: &FeatureTable,
    config: &TrainConfig,
    loss: BinaryLoss,
) -> Result<OneVsOne, ShallowError> {
    config.validate()?;
    let n_classes = data.n_classes();
    if n_classes < 2 {
        return Err(ShallowError::SingleClass);
    }
    let by_class = data.class_indices(n_classes);
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(ShallowError::EmptyClass(empty));
    }
    let pairs: Vec<(usize, usize)> = (0..n_classes)
        .flat_map(|a| (a + 1..n_classes).map(move |b| (a, b)))
        .collect();
    let models = pairs
        .par_iter()
        .map(|&(a, b)| train_pair(data, &by_class[a], &by_class[b], (a, b), config, loss))
        .collect();
    Ok(OneVsOne { n_classes, models })
}

impl OneVsOne {
    /// Votes and summed signed margins per class.
    pub fn tally(&self, x: &[f64]) -> (Vec<u32>, Vec<f64>) {
        let mut votes = vec![0u32; self.n_classes];
        let mut margins = vec![0.0; self.n_classes];
        for m in &self.models {
            let s = m.margin(x);
            if s > 0.0 {
                votes[m.class_a] += 1;
            } else {
                votes[m.class_b] += 1;
            }
            margins[m.class_a] += s;
            margins[m.class_b] -= s;
        }
        (votes, margins)
    }

    /// Majority vote; ties go to the larger summed margin, then the lower index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let (votes, margins) = self.tally(x);
        let mut best = 0;
        for c in 1..self.n_classes {
            let better = votes[c] > votes[best]
                || (votes[c] == votes[best] && margins[c] > margins[best]);
            if better {
                best = c;
            }
        }
        best
    }

    /// Ranking scores: votes plus a squashed margin tiebreak in `(0, 1)`,
    /// so `argmax` agrees with [`predict`](Self::predict).
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let (votes, margins) = self.tally(x);
        votes
            .iter()
            .zip(&margins)
            .map(|(&v, &m)| v as f64 + 0.5 + 0.49 * (m / (1.0 + m.abs())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_count() {
        for n in 2..=12usize {
            let rows: Vec<Vec<f64>> = (0..n).map(|c| vec![c as f64, 1.0]).collect();
            let t = FeatureTable::from_rows((0..n).collect(), rows).unwrap();
            let cfg = TrainConfig { epochs: 1, ..Default::default() };
            let ovo = train_one_vs_one(&t, &cfg, BinaryLoss::Logistic).unwrap();
            assert_eq!(ovo.models.len(), n * (n - 1) / 2);
        }
    }

    #[test]
    fn two_classes_is_the_sign() {
        let t = FeatureTable::from_rows(
            vec![0, 0, 1, 1],
            vec![vec![2.0], vec![3.0], vec![-2.0], vec![-3.0]],
        )
        .unwrap();
        let ovo = train_one_vs_one(&t, &TrainConfig { alpha0: 0.1, ..Default::default() }, BinaryLoss::Logistic)
            .unwrap();
        assert_eq!(ovo.models.len(), 1);
        for x in [-5.0, -1.0, 1.0, 5.0] {
            let expect = if ovo.models[0].margin(&[x]) > 0.0 { 0 } else { 1 };
            assert_eq!(ovo.predict(&[x]), expect);
        }
        assert_eq!(ovo.predict(&[4.0]), 0);
        assert_eq!(ovo.predict(&[-4.0]), 1);
    }

    #[test]
    fn three_way_tie_uses_margin_sum() {
        // (0,1): +1 votes 0; (0,2): -2 votes 2; (1,2): +0.5 votes 1.
        // margin sums: 0 -> 1-2 = -1, 1 -> -1+0.5 = -0.5, 2 -> 2-0.5 = 1.5
        let pm = |a, b, bias| PairModel { class_a: a, class_b: b, weights: vec![0.0], bias };
        let ovo = OneVsOne { n_classes: 3, models: vec![pm(0, 1, 1.0), pm(0, 2, -2.0), pm(1, 2, 0.5)] };
        let (votes, margins) = ovo.tally(&[0.0]);
        assert_eq!(votes, [1, 1, 1]);
        assert_eq!(margins, [-1.0, -0.5, 1.5]);
        assert_eq!(ovo.predict(&[0.0]), 2);
        let s = ovo.scores(&[0.0]);
        assert_eq!(super::super::linear::argmax(&s), 2);
    }

    #[test]
    fn empty_class_is_named() {
        let t = FeatureTable::from_rows(vec![0, 2], vec![vec![1.0], vec![2.0]]).unwrap();
        let err = train_one_vs_one(&t, &TrainConfig::default(), BinaryLoss::Logistic).unwrap_err();
        assert!(matches!(err, ShallowError::EmptyClass(1)));
    }

    #[test]
    fn hinge_separates() {
        let t = FeatureTable::from_rows(
            vec![0, 0, 1, 1],
            vec![vec![2.0, 0.0], vec![3.0, 1.0], vec![-2.0, 0.0], vec![-3.0, 1.0]],
        )
        .unwrap();
        let cfg = TrainConfig { alpha0: 0.1, ..Default::default() };
        let ovo = train_one_vs_one(&t, &cfg, BinaryLoss::Hinge).unwrap();
        for i in 0..t.len() {
            assert_eq!(ovo.predict(t.row(i)), t.label(i));
        }
    }
}
