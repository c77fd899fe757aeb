use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use super::sampling::PsdFactor;
use super::{build_covariance, CalibrationError, CalibrationInputs, Hyperparams, StructuredFactor};
use crate::review_data::PaperId;
use crate::scoring::{normalize, weighted_mean};

/// Posterior of the bias-free scores `y = s − b_rater` given `s`.
///
/// Since `y` is determined by `s` and the bias vector, the posterior is a
/// rater-dimensional Gaussian on the biases pushed through `y = s − Z b`:
/// `Σ_y = Z Σ_b Zᵀ` with `Σ_b = σ_b² G⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub hyperparams: Hyperparams,
    /// Calibrated score per entry (`μ_y`).
    pub mean: Vec<f64>,
    /// Posterior mean bias per rater.
    pub bias_mean: Vec<f64>,
    /// `F` with `Σ_b = F Fᵀ`.
    bias_factor: DMatrix<f64>,
}

impl Posterior {
    pub fn bias_covariance(&self) -> DMatrix<f64> {
        &self.bias_factor * self.bias_factor.transpose()
    }

    /// Dense `Σ_y` (N×N).
    pub fn covariance(&self, inputs: &CalibrationInputs) -> DMatrix<f64> {
        let sb = self.bias_covariance();
        let n = inputs.len();
        DMatrix::from_fn(n, n, |e, f| sb[(inputs.rater_of[e], inputs.rater_of[f])])
    }

    /// Low-rank square root of `Σ_y`, one column per rater.
    pub fn factor(&self, inputs: &CalibrationInputs) -> PsdFactor {
        let n = inputs.len();
        let k = self.bias_factor.ncols();
        PsdFactor::from_factor(DMatrix::from_fn(n, k, |e, j| self.bias_factor[(inputs.rater_of[e], j)]))
    }
}

/// Structured posterior.
pub fn posterior(inputs: &CalibrationInputs, hp: &Hyperparams) -> Result<Posterior, CalibrationError> {
    hp.check()?;
    let factor = StructuredFactor::new(inputs, hp.bias_ratio, hp.noise_ratio)?;
    let alpha = factor.solve(&inputs.centered(hp.mu_q));
    let mut bias_mean = vec![0.0; inputs.n_raters()];
    for (e, &r) in inputs.rater_of.iter().enumerate() {
        bias_mean[r] += hp.bias_ratio * alpha[e];
    }
    let mean = inputs.scores.iter().zip(&inputs.rater_of).map(|(s, &r)| s - bias_mean[r]).collect();

    let r = inputs.n_raters();
    let bias_factor = if hp.bias_ratio == 0.0 {
        DMatrix::zeros(r, r)
    } else {
        let l = factor.rater_system().l();
        let l_inv_t = l
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(r, r))
            .ok_or(CalibrationError::NotPositiveDefinite)?;
        l_inv_t * hp.sigma_b2().sqrt()
    };
    Ok(Posterior { hyperparams: *hp, mean, bias_mean, bias_factor })
}

/// Dense route: `μ_y = μ_q + K_y K⁻¹ (s − μ_q)`, `Σ_y = K_y − K_y K⁻¹ K_y`.
pub fn posterior_dense(
    inputs: &CalibrationInputs,
    hp: &Hyperparams,
) -> Result<(DVector<f64>, DMatrix<f64>), CalibrationError> {
    hp.check()?;
    let k = build_covariance(inputs, hp.bias_ratio, hp.noise_ratio) * hp.sigma_q2;
    let n = inputs.len();
    let k_y = DMatrix::from_fn(n, n, |e, f| {
        let same_paper = inputs.paper_of[e] == inputs.paper_of[f];
        let same_rater = inputs.rater_of[e] == inputs.rater_of[f];
        let mut v = 0.0;
        if same_paper {
            v += hp.sigma_q2;
            if same_rater {
                v += hp.sigma_eps2();
            }
        }
        v
    });
    let chol = Cholesky::new(k).ok_or(CalibrationError::NotPositiveDefinite)?;
    let r = DVector::from_vec(inputs.centered(hp.mu_q));
    let mean = DVector::from_element(n, hp.mu_q) + &k_y * chol.solve(&r);
    let mut cov = &k_y - &k_y * chol.solve(&k_y);
    cov = (&cov + cov.transpose()) * 0.5;
    Ok((mean, cov))
}

/// A per-paper score column before and after normalization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibratedColumn {
    pub raw: BTreeMap<PaperId, f64>,
    pub normalized: BTreeMap<PaperId, f64>,
    pub degenerate: bool,
}

/// Weighted mean of calibrated entries per paper, normalized to [0, 100].
pub fn aggregate_calibrated(mean: &[f64], inputs: &CalibrationInputs) -> Result<CalibratedColumn, CalibrationError> {
    if mean.len() != inputs.len() {
        return Err(CalibrationError::DimensionMismatch { expected: inputs.len(), got: mean.len() });
    }
    let mut groups: Vec<Vec<(f64, f64)>> = vec![Vec::new(); inputs.n_papers()];
    for (e, &p) in inputs.paper_of.iter().enumerate() {
        groups[p].push((mean[e], inputs.weights[e]));
    }
    let values = groups
        .into_iter()
        .map(weighted_mean)
        .collect::<Result<Vec<f64>, _>>()?;
    let norm = normalize(&values)?;
    Ok(CalibratedColumn {
        raw: inputs.papers.iter().cloned().zip(values).collect(),
        normalized: inputs.papers.iter().cloned().zip(norm.values).collect(),
        degenerate: norm.degenerate,
    })
}
