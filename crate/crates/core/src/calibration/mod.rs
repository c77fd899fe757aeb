//! Reviewer bias calibration with a three-variance Gaussian model.
//!
//! Every score is modelled as `s = q_paper + b_rater + ε`, with independent
//! Gaussian paper quality (mean `μ_q`, variance `σ_q²`), rater bias (`σ_b²`)
//! and noise (`σ_ε²`). Covariances are parameterized relative to `σ_q²`:
//! the two ratios are searched on a grid and `σ_q²` has a closed-form
//! optimum for each grid point. The posterior of the bias-free scores
//! `y = q + ε` given `s` yields calibrated scores and, by sampling, per-paper
//! acceptance probabilities.
//!
//! Two numerical routes are provided. The dense route builds the `N×N`
//! covariance and uses a Cholesky factorization. The structured route
//! ([`StructuredFactor`]) eliminates the per-paper blocks in closed form and
//! factors only a rater-sized matrix; fitting and the posterior use it.

mod covariance;
mod fit;
mod meta;
mod posterior;
mod sampling;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::review_data::{MetaReviewForm, PaperId};
use crate::scoring::{ScoreError, WeightedReview};

pub use covariance::{build_covariance, fit_sigma_q, nll, SigmaQ, StructuredFactor};
pub use fit::{fit_hyperparams, FitResult, GridPoint, GridSpec};
pub use meta::{calibrate_meta, MetaCalibration};
pub use posterior::{aggregate_calibrated, posterior, posterior_dense, CalibratedColumn, Posterior};
pub use sampling::{acceptance_probability, AcceptanceEstimate, PaperGroups, PsdFactor};

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("calibration needs at least 2 scores, got {0}")]
    TooFewEntries(usize),
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid hyperparameters: {0}")]
    BadHyperparams(String),
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("every grid point is degenerate (all scores equal the mean)")]
    AllDegenerate,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance has eigenvalue {value} below the tolerance {tolerance}")]
    NotPsd { value: f64, tolerance: f64 },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Stacked scores with paper/rater labels. Raters are reviewers, or
/// meta-reviewers when calibrating meta scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationInputs {
    pub scores: Vec<f64>,
    /// Aggregation weight per entry (review confidence, or 1).
    pub weights: Vec<f64>,
    pub paper_of: Vec<usize>,
    pub rater_of: Vec<usize>,
    /// Sorted; indexed by `paper_of`.
    pub papers: Vec<PaperId>,
    /// Sorted; indexed by `rater_of`.
    pub raters: Vec<String>,
}

impl CalibrationInputs {
    /// Entries keep their input order; paper and rater indices follow id order.
    pub fn new<I>(entries: I) -> Result<Self, CalibrationError>
    where
        I: IntoIterator<Item = (PaperId, String, f64, f64)>,
    {
        let entries: Vec<_> = entries.into_iter().collect();
        if entries.len() < 2 {
            return Err(CalibrationError::TooFewEntries(entries.len()));
        }
        let paper_index: BTreeMap<&PaperId, usize> = {
            let mut m: BTreeMap<&PaperId, usize> = entries.iter().map(|e| (&e.0, 0)).collect();
            m.values_mut().enumerate().for_each(|(i, v)| *v = i);
            m
        };
        let rater_index: BTreeMap<&String, usize> = {
            let mut m: BTreeMap<&String, usize> = entries.iter().map(|e| (&e.1, 0)).collect();
            m.values_mut().enumerate().for_each(|(i, v)| *v = i);
            m
        };
        Ok(CalibrationInputs {
            scores: entries.iter().map(|e| e.2).collect(),
            weights: entries.iter().map(|e| e.3).collect(),
            paper_of: entries.iter().map(|e| paper_index[&e.0]).collect(),
            rater_of: entries.iter().map(|e| rater_index[&e.1]).collect(),
            papers: paper_index.keys().map(|p| (*p).clone()).collect(),
            raters: rater_index.keys().map(|r| (*r).clone()).collect(),
        })
    }

    pub fn from_reviews(reviews: &[WeightedReview]) -> Result<Self, CalibrationError> {
        Self::new(reviews.iter().map(|r| (r.paper.clone(), r.reviewer.to_string(), r.value, r.weight)))
    }

    pub fn from_meta(metas: &[MetaReviewForm]) -> Result<Self, CalibrationError> {
        Self::new(
            metas
                .iter()
                .map(|m| (m.paper.clone(), m.metareviewer.to_string(), m.recommendation.weight().as_f64(), 1.0)),
        )
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_papers(&self) -> usize {
        self.papers.len()
    }

    pub fn n_raters(&self) -> usize {
        self.raters.len()
    }

    pub fn mean_score(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }

    /// Scores minus `mu`.
    pub fn centered(&self, mu: f64) -> Vec<f64> {
        self.scores.iter().map(|s| s - mu).collect()
    }

    /// Entries per rater.
    pub fn rater_loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.n_raters()];
        for &r in &self.rater_of {
            loads[r] += 1;
        }
        loads
    }
}

/// Fitted model parameters. Ratios are relative to `σ_q²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hyperparams {
    pub sigma_q2: f64,
    pub bias_ratio: f64,
    pub noise_ratio: f64,
    pub mu_q: f64,
}

impl Hyperparams {
    pub fn sigma_b2(&self) -> f64 {
        self.sigma_q2 * self.bias_ratio
    }

    pub fn sigma_eps2(&self) -> f64 {
        self.sigma_q2 * self.noise_ratio
    }

    pub fn check(&self) -> Result<(), CalibrationError> {
        let bad = |what: &str| Err(CalibrationError::BadHyperparams(what.to_string()));
        if !(self.sigma_q2 > 0.0 && self.sigma_q2.is_finite()) {
            return bad("σ_q² must be positive");
        }
        if !(self.noise_ratio > 0.0 && self.noise_ratio.is_finite()) {
            return bad("noise ratio must be positive");
        }
        if !(self.bias_ratio >= 0.0 && self.bias_ratio.is_finite()) {
            return bad("bias ratio must be non-negative");
        }
        if !self.mu_q.is_finite() {
            return bad("μ_q must be finite");
        }
        Ok(())
    }
}
