use std::collections::BTreeMap;

use serde::Serialize;

use super::posterior::CalibratedColumn;
use super::{aggregate_calibrated, fit_hyperparams, posterior, CalibrationError, CalibrationInputs, FitResult, GridSpec};
use crate::review_data::{MetaReviewForm, PaperId};
use crate::scoring::{meta_by_paper, normalize};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaCalibration {
    pub column: CalibratedColumn,
    /// `None` when the model was not identifiable and the inputs were passed through.
    pub fit: Option<FitResult>,
    /// Per meta-review entry: paper, meta-reviewer, original score, calibrated score.
    pub entries: Vec<(PaperId, String, f64, f64)>,
    pub warnings: Vec<String>,
}

/// Calibrates meta scores with meta-reviewers in the rater role.
pub fn calibrate_meta(metas: &[MetaReviewForm], grid: &GridSpec) -> Result<MetaCalibration, CalibrationError> {
    let inputs = CalibrationInputs::from_meta(metas)?;
    if inputs.rater_loads().iter().all(|&n| n == 1) {
        return passthrough(metas, &inputs, "every meta-reviewer scored a single paper; bias is not identifiable");
    }
    let fit = match fit_hyperparams(&inputs, grid) {
        Ok(fit) => fit,
        Err(CalibrationError::AllDegenerate) => {
            return passthrough(metas, &inputs, "all meta scores are equal; nothing to calibrate");
        }
        Err(e) => return Err(e),
    };
    let post = posterior(&inputs, &fit.hyperparams)?;
    let column = aggregate_calibrated(&post.mean, &inputs)?;
    let entries = entries(&inputs, &post.mean);
    Ok(MetaCalibration { column, fit: Some(fit), entries, warnings: Vec::new() })
}

fn entries(inputs: &CalibrationInputs, calibrated: &[f64]) -> Vec<(PaperId, String, f64, f64)> {
    (0..inputs.len())
        .map(|e| {
            (
                inputs.papers[inputs.paper_of[e]].clone(),
                inputs.raters[inputs.rater_of[e]].clone(),
                inputs.scores[e],
                calibrated[e],
            )
        })
        .collect()
}

fn passthrough(
    metas: &[MetaReviewForm],
    inputs: &CalibrationInputs,
    why: &str,
) -> Result<MetaCalibration, CalibrationError> {
    let raw: BTreeMap<PaperId, f64> = meta_by_paper(metas)?;
    let norm = normalize(&raw.values().copied().collect::<Vec<_>>())?;
    let column = CalibratedColumn {
        normalized: raw.keys().cloned().zip(norm.values).collect(),
        raw,
        degenerate: norm.degenerate,
    };
    Ok(MetaCalibration {
        column,
        fit: None,
        entries: entries(inputs, &inputs.scores),
        warnings: vec![format!("meta calibration skipped: {why}")],
    })
}
