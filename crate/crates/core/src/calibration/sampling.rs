use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{CalibrationError, CalibrationInputs};
use crate::review_data::PaperId;
use crate::scoring::DecisionConfig;

/// Relative eigenvalue tolerance for PSD repair.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// A matrix `L` (N×k) with `Σ = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFactor {
    l: DMatrix<f64>,
}

impl PsdFactor {
    /// Eigen-factorization of a symmetric PSD matrix. Eigenvalues down to
    /// `−1e-8·λ_max` are treated as zero; anything more negative is an error.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self, CalibrationError> {
        let n = cov.nrows();
        if cov.ncols() != n {
            return Err(CalibrationError::DimensionMismatch { expected: n, got: cov.ncols() });
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tolerance = PSD_TOLERANCE * scale;
        if let Some(&worst) = eig.eigenvalues.iter().filter(|&&v| v < -tolerance).min_by(|a, b| a.total_cmp(b)) {
            return Err(CalibrationError::NotPsd { value: worst, tolerance: -tolerance });
        }
        let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
        let l = DMatrix::from_fn(n, keep.len(), |row, j| {
            let i = keep[j];
            eig.eigenvectors[(row, i)] * eig.eigenvalues[i].sqrt()
        });
        Ok(PsdFactor { l })
    }

    pub fn from_factor(l: DMatrix<f64>) -> Self {
        PsdFactor { l }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn rank(&self) -> usize {
        self.l.ncols()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }

    fn draw(&self, mean: &[f64], rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(self.rank(), |_, _| StandardNormal.sample(rng));
        DVector::from_column_slice(mean) + &self.l * z
    }
}

/// Entry → paper mapping with aggregation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperGroups {
    pub papers: Vec<PaperId>,
    pub paper_of: Vec<usize>,
    pub weights: Vec<f64>,
}

impl PaperGroups {
    pub fn from_inputs(inputs: &CalibrationInputs) -> Self {
        PaperGroups { papers: inputs.papers.clone(), paper_of: inputs.paper_of.clone(), weights: inputs.weights.clone() }
    }

    /// Weighted mean per paper.
    pub fn aggregate(&self, values: &[f64]) -> Vec<f64> {
        let mut num = vec![0.0; self.papers.len()];
        let mut den = vec![0.0; self.papers.len()];
        for ((&p, &w), &v) in self.paper_of.iter().zip(&self.weights).zip(values) {
            num[p] += w * v;
            den[p] += w;
        }
        num.iter().zip(&den).map(|(n, d)| n / d).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceEstimate {
    pub papers: Vec<PaperId>,
    pub accept_counts: Vec<u64>,
    pub samples: usize,
    pub seed: u64,
    /// Papers accepted in every sample.
    pub slots: usize,
}

impl AcceptanceEstimate {
    pub fn probability(&self, paper: usize) -> f64 {
        self.accept_counts[paper] as f64 / self.samples as f64
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.papers.len()).map(|i| self.probability(i)).collect()
    }

    /// Σ probabilities, computed from the integer counts.
    pub fn total_probability(&self) -> f64 {
        self.accept_counts.iter().sum::<u64>() as f64 / self.samples as f64
    }
}

/// Monte-Carlo acceptance probabilities: each draw from `N(mean, L Lᵀ)` is
/// aggregated per paper, ranked, and the top ⌊a·P/100⌋ papers are counted
/// as accepted. Draw `i` uses stream `i` of a ChaCha generator seeded with
/// `seed`, so results do not depend on thread scheduling.
pub fn acceptance_probability(
    mean: &[f64],
    factor: &PsdFactor,
    groups: &PaperGroups,
    cfg: &DecisionConfig,
    n_samples: usize,
    seed: u64,
) -> Result<AcceptanceEstimate, CalibrationError> {
    if n_samples == 0 {
        return Err(CalibrationError::NoSamples);
    }
    for len in [factor.dim(), groups.paper_of.len()] {
        if len != mean.len() {
            return Err(CalibrationError::DimensionMismatch { expected: mean.len(), got: len });
        }
    }
    cfg.check()?;
    let n_papers = groups.papers.len();
    let slots = cfg.slots(n_papers);

    let accept_counts = (0..n_samples)
        .into_par_iter()
        .fold(
            || vec![0u64; n_papers],
            |mut counts, draw| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(draw as u64);
                let y = factor.draw(mean, &mut rng);
                let scores = groups.aggregate(y.as_slice());
                for p in top_k(&scores, slots) {
                    counts[p] += 1;
                }
                counts
            },
        )
        .reduce(
            || vec![0u64; n_papers],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    Ok(AcceptanceEstimate { papers: groups.papers.clone(), accept_counts, samples: n_samples, seed, slots })
}

/// Indices of the `k` highest scores; ties go to the lower index.
fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        idx.truncate(k);
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(n: usize) -> PaperGroups {
        PaperGroups {
            papers: (0..n).map(|i| PaperId::new(format!("p{i}")).unwrap()).collect(),
            paper_of: (0..n).collect(),
            weights: vec![1.0; n],
        }
    }

    #[test]
    fn top_k_ties_prefer_low_index() {
        assert_eq!(top_k(&[1.0, 3.0, 3.0, 0.0], 2).iter().copied().collect::<std::collections::BTreeSet<_>>(),
            [1, 2].into());
        let mut t = top_k(&[1.0, 1.0, 1.0], 2);
        t.sort();
        assert_eq!(t, vec![0, 1]);
        assert!(top_k(&[1.0], 0).is_empty());
    }

    #[test]
    fn dominant_paper_always_accepted() {
        let n = 10;
        let mut mean = vec![0.0; n];
        mean[3] = 50.0;
        let factor = PsdFactor::from_covariance(&DMatrix::identity(n, n)).unwrap();
        let est = acceptance_probability(&mean, &factor, &groups(n), &DecisionConfig::new(10.0).unwrap(), 500, 1)
            .unwrap();
        assert_eq!(est.probability(3), 1.0);
        assert_eq!(est.total_probability(), 1.0);
    }

    #[test]
    fn counts_sum_to_slots_and_are_seed_deterministic() {
        let n = 17;
        let mean: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let factor = PsdFactor::from_covariance(&DMatrix::identity(n, n)).unwrap();
        let cfg = DecisionConfig::new(40.0).unwrap();
        let a = acceptance_probability(&mean, &factor, &groups(n), &cfg, 1000, 42).unwrap();
        assert_eq!(a.accept_counts.iter().sum::<u64>(), 6 * 1000);
        assert_eq!(a.total_probability(), 6.0);
        let b = acceptance_probability(&mean, &factor, &groups(n), &cfg, 1000, 42).unwrap();
        assert_eq!(a, b);
        let c = acceptance_probability(&mean, &factor, &groups(n), &cfg, 1000, 43).unwrap();
        assert_ne!(a.accept_counts, c.accept_counts);
    }

    #[test]
    fn psd_repair() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = PsdFactor::from_covariance(&cov).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.covariance() - cov).abs().max() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(PsdFactor::from_covariance(&bad), Err(CalibrationError::NotPsd { .. })));
        let tiny_neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]);
        assert_eq!(PsdFactor::from_covariance(&tiny_neg).unwrap().rank(), 1);
    }

    #[test]
    fn dimension_and_sample_errors() {
        let factor = PsdFactor::from_covariance(&DMatrix::identity(3, 3)).unwrap();
        let cfg = DecisionConfig::default();
        assert!(matches!(
            acceptance_probability(&[0.0; 2], &factor, &groups(2), &cfg, 10, 0),
            Err(CalibrationError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            acceptance_probability(&[0.0; 3], &factor, &groups(3), &cfg, 0, 0),
            Err(CalibrationError::NoSamples)
        ));
    }
}
