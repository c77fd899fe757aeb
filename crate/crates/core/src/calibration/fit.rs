use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CalibrationError, CalibrationInputs, Hyperparams, StructuredFactor};

/// Candidate values for the bias and noise ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bias_ratios: Vec<f64>,
    pub noise_ratios: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::log(1e-2, 1e2, 13)
    }
}

impl GridSpec {
    /// `points` log-spaced values from `min` to `max` on both axes.
    pub fn log(min: f64, max: f64, points: usize) -> Self {
        let values = log_spaced(min, max, points);
        GridSpec { bias_ratios: values.clone(), noise_ratios: values }
    }

    pub fn len(&self) -> usize {
        self.bias_ratios.len() * self.noise_ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn pairs(&self) -> Vec<(f64, f64)> {
        self.bias_ratios
            .iter()
            .flat_map(|&b| self.noise_ratios.iter().map(move |&e| (b, e)))
            .collect()
    }
}

pub fn log_spaced(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (lo, hi) = (min.ln(), max.ln());
            (0..points)
                .map(|i| {
                    if i == 0 {
                        min
                    } else if i == points - 1 {
                        max
                    } else {
                        (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub bias_ratio: f64,
    pub noise_ratio: f64,
    pub sigma_q2: f64,
    /// `None` when the point is degenerate or its covariance is not PD.
    pub nll: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub hyperparams: Hyperparams,
    pub nll: f64,
    pub grid: Vec<GridPoint>,
}

/// Maximum-likelihood fit: `μ_q` is the score mean, the ratios come from the
/// grid and `σ_q²` is profiled out at each grid point. Ties go to the first
/// grid point in bias-major order.
pub fn fit_hyperparams(inputs: &CalibrationInputs, grid: &GridSpec) -> Result<FitResult, CalibrationError> {
    if grid.is_empty() {
        return Err(CalibrationError::EmptyGrid);
    }
    if inputs.len() < 2 {
        return Err(CalibrationError::TooFewEntries(inputs.len()));
    }
    let mu_q = inputs.mean_score();
    let centered = inputs.centered(mu_q);
    let points: Vec<GridPoint> = grid
        .pairs()
        .into_par_iter()
        .map(|(bias_ratio, noise_ratio)| match StructuredFactor::new(inputs, bias_ratio, noise_ratio) {
            Ok(factor) => {
                let (sq, nll) = factor.profile(&centered);
                GridPoint { bias_ratio, noise_ratio, sigma_q2: sq.value, nll: (!sq.degenerate).then_some(nll) }
            }
            Err(_) => GridPoint { bias_ratio, noise_ratio, sigma_q2: f64::NAN, nll: None },
        })
        .collect();

    let mut best: Option<&GridPoint> = None;
    for p in &points {
        if let Some(v) = p.nll.filter(|v| v.is_finite()) {
            if best.and_then(|b| b.nll).is_none_or(|b| v < b) {
                best = Some(p);
            }
        }
    }
    let best = best.ok_or(CalibrationError::AllDegenerate)?;
    Ok(FitResult {
        hyperparams: Hyperparams {
            sigma_q2: best.sigma_q2,
            bias_ratio: best.bias_ratio,
            noise_ratio: best.noise_ratio,
            mu_q,
        },
        nll: best.nll.unwrap_or(f64::NAN),
        grid: points,
    })
}
