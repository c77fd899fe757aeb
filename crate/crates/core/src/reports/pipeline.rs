use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{emit_plots, gray_area, write_atomic, write_json_atomic, GrayAreaReport, PlotData, ReportError};
use crate::calibration::{
    acceptance_probability, aggregate_calibrated, calibrate_meta, fit_hyperparams, posterior, AcceptanceEstimate,
    CalibrationInputs, FitResult, GridSpec, Hyperparams, PaperGroups,
};
use crate::dequantize::{dequantize, DequantConfig};
use crate::review_data::{load_reviews, validate, Format, MetaReviewForm, PaperId, ValidationReport};
use crate::scoring::{rank_and_cut, review_score, DecisionConfig, DecisionList, RankColumn, ScoreTable, WeightedReview};

pub const SAMPLES_DEFAULT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub reviews: PathBuf,
    pub metas: Option<PathBuf>,
    pub format: Format,
    pub out_dir: PathBuf,
    pub dequantize: bool,
    pub dequant: DequantConfig,
    pub calibrate: bool,
    pub grid: GridSpec,
    pub decision: DecisionConfig,
    pub samples: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(reviews: impl Into<PathBuf>, metas: Option<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            reviews: reviews.into(),
            metas,
            format: Format::Csv,
            out_dir: out_dir.into(),
            dequantize: false,
            dequant: DequantConfig::default(),
            calibrate: true,
            grid: GridSpec::default(),
            decision: DecisionConfig::default(),
            samples: SAMPLES_DEFAULT,
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<(), ReportError> {
        for path in std::iter::once(&self.reviews).chain(&self.metas) {
            if !path.is_file() {
                return Err(ReportError::Config(format!("input file {} does not exist", path.display())));
            }
        }
        self.decision.check()?;
        if self.calibrate && (self.samples == 0 || self.grid.is_empty()) {
            return Err(ReportError::Config("calibration needs samples >= 1 and a non-empty grid".into()));
        }
        fs::create_dir_all(&self.out_dir)
            .and_then(|_| tempfile::NamedTempFile::new_in(&self.out_dir).map(drop))
            .map_err(|e| ReportError::Config(format!("output directory {} is not writable: {e}", self.out_dir.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub hyperparams: Hyperparams,
    pub sigma_b2: f64,
    pub sigma_eps2: f64,
    pub nll: f64,
    pub grid: Vec<crate::calibration::GridPoint>,
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        FitSummary {
            hyperparams: f.hyperparams,
            sigma_b2: f.hyperparams.sigma_b2(),
            sigma_eps2: f.hyperparams.sigma_eps2(),
            nll: f.nll,
            grid: f.grid.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOutput {
    pub reviewers: FitSummary,
    /// `None` when meta scores were passed through uncalibrated.
    pub meta: Option<FitSummary>,
    pub acceptance: AcceptanceEstimate,
    pub decisions: DecisionList,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub validation: ValidationReport,
    pub table: ScoreTable,
    pub decisions: DecisionList,
    pub calibration: Option<CalibrationOutput>,
    pub gray_area: GrayAreaReport,
    /// Every file written, in write order.
    pub artifacts: Vec<PathBuf>,
}

fn stage<T, E: std::fmt::Display>(name: &'static str, r: Result<T, E>) -> Result<T, ReportError> {
    r.map_err(|e| ReportError::Stage { stage: name, message: e.to_string() })
}

#[derive(Serialize)]
struct Summary<'a> {
    papers: usize,
    slots: usize,
    accepted: usize,
    accepted_calibrated: Option<usize>,
    acceptance_rate: f64,
    dequantized: bool,
    calibrated: bool,
    seed: u64,
    samples: Option<usize>,
    agreement: &'a super::AgreementCounts,
    notices: Vec<String>,
    artifacts: Vec<String>,
}

/// load → validate → score reviews → [dequantize] → aggregate → [calibrate] → fuse → rank → report.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, ReportError> {
    cfg.check()?;
    let out = &cfg.out_dir;
    let mut artifacts = Vec::new();
    let mut notices = Vec::new();

    let loaded = stage("load", load_reviews(&cfg.reviews, cfg.metas.as_deref(), cfg.format))?;
    let validation = validate(&loaded);
    notices.extend(loaded.warnings.iter().cloned());
    write_json_atomic(&out.join("validation.json"), &validation)?;
    artifacts.push(out.join("validation.json"));

    let reviews: Vec<WeightedReview> = loaded.reviews.iter().map(|f| review_score(f).weighted()).collect();
    let dequantized = if cfg.dequantize {
        let result = stage("dequantize", dequantize(&reviews, &cfg.dequant))?;
        Some(result.apply(&reviews))
    } else {
        None
    };
    // dequantized scores, when enabled, replace s_rp before aggregation
    let scored_reviews = dequantized.as_deref().unwrap_or(&reviews);
    let mut table = stage("score", ScoreTable::build(scored_reviews, &loaded.metas))?;
    notices.extend(table.notices.iter().cloned());

    let decisions = stage("rank", rank_and_cut(&table, &cfg.decision, RankColumn::ScoreIndex))?;

    let mut calibrated_reviews: Option<Vec<Option<f64>>> = None;
    let mut meta_entries = Vec::new();
    let calibration = if cfg.calibrate {
        let settings = CalibrationSettings {
            grid: cfg.grid.clone(),
            decision: cfg.decision,
            samples: cfg.samples,
            seed: cfg.seed,
        };
        let run = run_calibration(&mut table, scored_reviews, &loaded.metas, &settings)?;
        notices.extend(run.output.warnings.iter().cloned());
        calibrated_reviews = Some(run.per_review);
        meta_entries = run.meta_entries;
        Some(run.output)
    } else {
        None
    };

    let gray = match &calibration {
        Some(c) => stage("report", gray_area(&decisions, &c.decisions))?,
        None => GrayAreaReport::empty("calibration disabled: no calibrated ranking to compare against"),
    };

    write_review_table(&out.join("reviews.csv"), &reviews, dequantized.as_deref(), calibrated_reviews.as_deref())?;
    artifacts.push(out.join("reviews.csv"));
    write_atomic(&out.join("scores.csv"), |w| Ok(table.write_csv(w)?))?;
    artifacts.push(out.join("scores.csv"));
    write_json_atomic(&out.join("scores.json"), &table)?;
    artifacts.push(out.join("scores.json"));
    write_atomic(&out.join("decisions.csv"), |w| Ok(decisions.write_csv(w)?))?;
    artifacts.push(out.join("decisions.csv"));
    write_atomic(&out.join("gray_area.csv"), |w| gray.write_csv(w))?;
    artifacts.push(out.join("gray_area.csv"));
    write_json_atomic(&out.join("gray_area.json"), &gray)?;
    artifacts.push(out.join("gray_area.json"));

    if let Some(c) = &calibration {
        write_atomic(&out.join("decisions_cal.csv"), |w| Ok(c.decisions.write_csv_as(w, "SI_cal")?))?;
        artifacts.push(out.join("decisions_cal.csv"));
        write_json_atomic(
            &out.join("fit.json"),
            &serde_json::json!({ "reviewers": c.reviewers, "meta": c.meta, "warnings": c.warnings }),
        )?;
        artifacts.push(out.join("fit.json"));
        let review_values: Vec<f64> = calibrated_reviews.iter().flatten().flatten().copied().collect();
        let plots = PlotData {
            table: &table,
            calibrated_reviews: &review_values,
            acceptance: &c.acceptance,
            meta: &meta_entries,
        };
        artifacts.extend(stage("report", emit_plots(out, &plots))?);
    } else {
        notices.push("calibration disabled: figures not produced".into());
    }

    let summary_path = out.join("summary.json");
    let mut names: Vec<String> = artifacts.iter().map(|p| file_name(p)).collect();
    names.push(file_name(&summary_path));
    let summary = Summary {
        papers: table.len(),
        slots: decisions.slots,
        accepted: decisions.accepted(),
        accepted_calibrated: calibration.as_ref().map(|c| c.decisions.accepted()),
        acceptance_rate: cfg.decision.acceptance_rate,
        dequantized: cfg.dequantize,
        calibrated: cfg.calibrate,
        seed: cfg.seed,
        samples: cfg.calibrate.then_some(cfg.samples),
        agreement: &gray.counts,
        notices,
        artifacts: names,
    };
    write_json_atomic(&summary_path, &summary)?;
    artifacts.push(summary_path);

    Ok(PipelineOutput { validation, table, decisions, calibration, gray_area: gray, artifacts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    pub grid: GridSpec,
    pub decision: DecisionConfig,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRun {
    pub output: CalibrationOutput,
    /// Calibrated value per input review; `None` for reviews of papers not in the table.
    pub per_review: Vec<Option<f64>>,
    /// `(paper, metareviewer, original, calibrated)`.
    pub meta_entries: Vec<(PaperId, String, f64, f64)>,
}

/// Fits and applies the reviewer and meta-reviewer models, attaches the
/// calibrated columns to `table` and ranks by the calibrated index.
/// Only reviews and metas of papers already in `table` are used, so both
/// normalizations run over the same paper set.
pub fn run_calibration(
    table: &mut ScoreTable,
    reviews: &[WeightedReview],
    metas: &[MetaReviewForm],
    settings: &CalibrationSettings,
) -> Result<CalibrationRun, ReportError> {
    if settings.samples == 0 || settings.grid.is_empty() {
        return Err(ReportError::Config("calibration needs samples >= 1 and a non-empty grid".into()));
    }
    let scored: BTreeSet<PaperId> = table.rows.iter().map(|r| r.paper_id.clone()).collect();
    let (keep, kept): (Vec<usize>, Vec<WeightedReview>) =
        reviews.iter().enumerate().filter(|(_, r)| scored.contains(&r.paper)).map(|(i, r)| (i, r.clone())).unzip();
    let inputs = stage("calibrate", CalibrationInputs::from_reviews(&kept))?;
    let fit = stage("calibrate", fit_hyperparams(&inputs, &settings.grid))?;
    let post = stage("calibrate", posterior(&inputs, &fit.hyperparams))?;
    let column = stage("calibrate", aggregate_calibrated(&post.mean, &inputs))?;
    let mut per_review = vec![None; reviews.len()];
    for (i, v) in keep.into_iter().zip(&post.mean) {
        per_review[i] = Some(*v);
    }

    let metas: Vec<_> = metas.iter().filter(|m| scored.contains(&m.paper)).cloned().collect();
    let meta = stage("calibrate", calibrate_meta(&metas, &settings.grid))?;

    table.attach_calibrated(&column.normalized, &meta.column.normalized);
    let decisions = stage("rank", rank_and_cut(table, &settings.decision, RankColumn::CalibratedScoreIndex))?;
    let acceptance = stage(
        "calibrate",
        acceptance_probability(
            &post.mean,
            &post.factor(&inputs),
            &PaperGroups::from_inputs(&inputs),
            &settings.decision,
            settings.samples,
            settings.seed,
        ),
    )?;
    Ok(CalibrationRun {
        output: CalibrationOutput {
            reviewers: FitSummary::from(&fit),
            meta: meta.fit.as_ref().map(FitSummary::from),
            acceptance,
            decisions,
            warnings: meta.warnings,
        },
        per_review,
        meta_entries: meta.entries,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// One row per review in input order: composite score, confidence and the
/// optional dequantized and calibrated values.
pub fn write_review_table(
    path: &Path,
    reviews: &[WeightedReview],
    dequantized: Option<&[WeightedReview]>,
    calibrated: Option<&[Option<f64>]>,
) -> Result<(), ReportError> {
    write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["paper_id", "reviewer_id", "s_rp", "confidence"];
        if dequantized.is_some() {
            header.push("s_dq");
        }
        if calibrated.is_some() {
            header.push("s_cal");
        }
        csv.write_record(&header)?;
        for (i, r) in reviews.iter().enumerate() {
            let mut rec = vec![r.paper.to_string(), r.reviewer.to_string(), r.value.to_string(), r.weight.to_string()];
            if let Some(dq) = dequantized {
                rec.push(dq[i].value.to_string());
            }
            if let Some(cal) = calibrated {
                rec.push(cal[i].map(|v| v.to_string()).unwrap_or_default());
            }
            csv.write_record(&rec)?;
        }
        csv.flush()?;
        Ok(())
    })
}
