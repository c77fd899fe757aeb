mod config;

use std::fs::File;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use confscore::assignment::{assign, load_instance, write_assignment_csv, write_audit_json, AssignmentConstraints, SimilarityWeights};
use confscore::dequantize::{dequantize, DequantConfig};
use confscore::reports::{
    emit_plots, gray_area, run_calibration, run_pipeline, write_atomic, write_json_atomic, write_review_table,
    CalibrationSettings, FitSummary, GrayAreaReport, PipelineConfig, PlotData,
};
use confscore::review_data::{load_reviews, validate, Format, LoadedReviews};
use confscore::scoring::{rank_and_cut, review_score, DecisionList, RankColumn, ScoreTable, WeightedReview};

use config::{Flags, Settings};

#[derive(Parser)]
#[command(name = "confscore", version, about = "Score, calibrate and rank conference reviews")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check a review export and report consistency findings.
    Validate,
    /// Assign reviewers to papers from a similarity table.
    Assign,
    /// Compute per-paper scores and the score index.
    Score,
    /// Dequantize review scores within their half-point band.
    Dequantize,
    /// Fit the bias model and add calibrated score columns.
    Calibrate,
    /// Rank a score table and apply the acceptance cutoff.
    Rank,
    /// Compare uncalibrated and calibrated decision lists.
    Report,
    /// Run every stage from a review export to the final reports.
    Pipeline,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match Settings::resolve(cli.flags).and_then(|s| run(cli.command, &s)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command, s: &Settings) -> Result<ExitCode> {
    match command {
        Command::Validate => cmd_validate(s),
        Command::Assign => cmd_assign(s),
        Command::Score => cmd_score(s),
        Command::Dequantize => cmd_dequantize(s),
        Command::Calibrate => cmd_calibrate(s),
        Command::Rank => cmd_rank(s),
        Command::Report => cmd_report(s),
        Command::Pipeline => cmd_pipeline(s),
    }
}

fn save(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(bytes)?)).with_context(|| format!("writing {}", path.display()))
}

fn load(s: &Settings) -> Result<LoadedReviews> {
    let input = s.input()?;
    let loaded = load_reviews(input, s.meta.as_deref(), s.format).with_context(|| format!("loading {}", input.display()))?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded)
}

fn weighted(loaded: &LoadedReviews) -> Vec<WeightedReview> {
    loaded.reviews.iter().map(|f| review_score(f).weighted()).collect()
}

fn dequant_config(s: &Settings) -> DequantConfig {
    s.lambda.map(DequantConfig::with_lambda).unwrap_or_default()
}

/// Writes `<stem>.csv` or `<stem>.json` depending on the output format.
fn save_table<T: serde::Serialize>(
    s: &Settings,
    stem: &str,
    value: &T,
    csv: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<()> {
    match s.format {
        Format::Csv => {
            let mut buf = Vec::new();
            csv(&mut buf)?;
            save(&s.out.join(format!("{stem}.csv")), &buf)
        }
        Format::Json => Ok(write_json_atomic(&s.out.join(format!("{stem}.json")), value)?),
    }
}

fn cmd_validate(s: &Settings) -> Result<ExitCode> {
    let loaded = load(s)?;
    let report = validate(&loaded);
    write_json_atomic(&s.out.join("validation.json"), &report)?;
    println!(
        "{} reviews and {} meta-reviews over {} papers, mean {:.2} reviews/paper, {} findings, {} rejected records",
        report.reviews,
        report.meta_reviews,
        report.papers,
        report.mean_reviews_per_paper,
        report.findings.len(),
        report.rejected.len()
    );
    for f in &report.findings {
        println!("  {}", f.describe());
    }
    Ok(if report.has_duplicates() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_assign(s: &Settings) -> Result<ExitCode> {
    let inst = load_instance(s.input()?, s.tags.as_deref(), s.conflicts.as_deref())?;
    let defaults = AssignmentConstraints::default();
    let cons = AssignmentConstraints {
        min_reviewers: s.min_reviewers.unwrap_or(defaults.min_reviewers),
        max_load: s.max_load.unwrap_or(defaults.max_load),
        max_author_reviewers: s.max_author_reviewers.unwrap_or(defaults.max_author_reviewers),
    };
    let weights = SimilarityWeights::default();
    let result = assign(&inst, &cons, &weights)?;
    let mut csv = Vec::new();
    write_assignment_csv(&mut csv, &result)?;
    save(&s.out.join("assignment.csv"), &csv)?;
    let mut audit = Vec::new();
    write_audit_json(&mut audit, &inst, &cons, &weights, &result)?;
    save(&s.out.join("assignment_audit.json"), &audit)?;
    println!(
        "{} pairs, total similarity {:.6} (baseline {:.6}, {} improving moves)",
        result.pairs.len(),
        result.total_similarity,
        result.baseline_similarity,
        result.improving_moves
    );
    for sf in &result.shortfalls {
        println!("  {} has {} of {} reviewers: {}", sf.paper, sf.assigned, sf.required, sf.binding);
    }
    Ok(if result.feasible { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

/// Review scores, dequantized when `--dequantize` is set.
fn scored_reviews(s: &Settings, reviews: &[WeightedReview]) -> Result<Option<Vec<WeightedReview>>> {
    if !s.dequantize {
        return Ok(None);
    }
    Ok(Some(dequantize(reviews, &dequant_config(s))?.apply(reviews)))
}

fn cmd_score(s: &Settings) -> Result<ExitCode> {
    let loaded = load(s)?;
    let reviews = weighted(&loaded);
    let dequantized = scored_reviews(s, &reviews)?;
    let table = ScoreTable::build(dequantized.as_deref().unwrap_or(&reviews), &loaded.metas)?;
    for n in &table.notices {
        eprintln!("notice: {n}");
    }
    save_table(s, "scores", &table, |buf| Ok(table.write_csv(buf)?))?;
    println!("scored {} papers", table.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_dequantize(s: &Settings) -> Result<ExitCode> {
    let loaded = load(s)?;
    let reviews = weighted(&loaded);
    let result = dequantize(&reviews, &dequant_config(s))?;
    write_review_table(&s.out.join("reviews.csv"), &reviews, Some(&result.apply(&reviews)), None)?;
    println!("dequantized {} reviews over {} papers, cost {:.6}", reviews.len(), result.papers.len(), result.cost);
    Ok(ExitCode::SUCCESS)
}

fn cmd_calibrate(s: &Settings) -> Result<ExitCode> {
    let loaded = load(s)?;
    let reviews = weighted(&loaded);
    let dequantized = scored_reviews(s, &reviews)?;
    let source = dequantized.as_deref().unwrap_or(&reviews);
    let mut table = ScoreTable::build(source, &loaded.metas)?;
    let settings = CalibrationSettings { grid: s.grid.clone(), decision: s.decision, samples: s.samples, seed: s.seed };
    let run = run_calibration(&mut table, source, &loaded.metas, &settings)?;
    for w in &run.output.warnings {
        eprintln!("warning: {w}");
    }
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    save(&s.out.join("scores.csv"), &csv)?;
    write_review_table(&s.out.join("reviews.csv"), &reviews, dequantized.as_deref(), Some(&run.per_review))?;
    let mut dec = Vec::new();
    run.output.decisions.write_csv_as(&mut dec, "SI_cal")?;
    save(&s.out.join("decisions_cal.csv"), &dec)?;
    write_json_atomic(
        &s.out.join("fit.json"),
        &FitFile { reviewers: &run.output.reviewers, meta: run.output.meta.as_ref(), warnings: &run.output.warnings },
    )?;
    let review_values: Vec<f64> = run.per_review.iter().flatten().copied().collect();
    emit_plots(
        &s.out,
        &PlotData { table: &table, calibrated_reviews: &review_values, acceptance: &run.output.acceptance, meta: &run.meta_entries },
    )?;
    let h = &run.output.reviewers.hyperparams;
    println!(
        "calibrated {} papers: sigma_q2 {:.6}, bias ratio {}, noise ratio {}",
        table.len(),
        h.sigma_q2,
        h.bias_ratio,
        h.noise_ratio
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct FitFile<'a> {
    reviewers: &'a FitSummary,
    meta: Option<&'a FitSummary>,
    warnings: &'a [String],
}

fn read_table(s: &Settings) -> Result<ScoreTable> {
    let input = s.input()?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    Ok(match s.format {
        Format::Csv => ScoreTable::read_csv(file)?,
        Format::Json => serde_json::from_reader(std::io::BufReader::new(file)).context("parsing JSON score table")?,
    })
}

fn cmd_rank(s: &Settings) -> Result<ExitCode> {
    let table = read_table(s)?;
    let decisions = rank_and_cut(&table, &s.decision, RankColumn::ScoreIndex)?;
    save_table(s, "decisions", &decisions, |buf| Ok(decisions.write_csv(buf)?))?;
    print!("{} of {} papers accepted", decisions.accepted(), table.len());
    if table.has_calibration() {
        let cal = rank_and_cut(&table, &s.decision, RankColumn::CalibratedScoreIndex)?;
        save_table(s, "decisions_cal", &cal, |buf| Ok(cal.write_csv_as(buf, "SI_cal")?))?;
        print!(", {} under the calibrated index", cal.accepted());
    }
    println!();
    Ok(ExitCode::SUCCESS)
}

fn read_decisions(path: &Path) -> Result<DecisionList> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    DecisionList::read_csv(file).with_context(|| format!("reading {}", path.display()))
}

fn cmd_report(s: &Settings) -> Result<ExitCode> {
    let si = read_decisions(s.input()?)?;
    let report = match &s.calibrated {
        Some(p) => gray_area(&si, &read_decisions(p)?)?,
        None => GrayAreaReport::empty("no calibrated decision list given: nothing to compare against"),
    };
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    save(&s.out.join("gray_area.csv"), &csv)?;
    write_json_atomic(&s.out.join("gray_area.json"), &report)?;
    let c = report.counts;
    println!("agree-accept {}, agree-reject {}, disagree {}", c.agree_accept, c.agree_reject, c.disagree);
    for n in &report.notices {
        println!("  {n}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_pipeline(s: &Settings) -> Result<ExitCode> {
    let cfg = PipelineConfig {
        reviews: s.input()?.to_path_buf(),
        metas: s.meta.clone(),
        format: s.format,
        out_dir: s.out.clone(),
        dequantize: s.dequantize,
        dequant: dequant_config(s),
        calibrate: s.calibrate,
        grid: s.grid.clone(),
        decision: s.decision,
        samples: s.samples,
        seed: s.seed,
    };
    if cfg.metas.is_none() {
        bail!("--meta is required: the score index needs meta-review scores");
    }
    let out = run_pipeline(&cfg)?;
    let c = out.gray_area.counts;
    println!(
        "{} papers, {} slots, {} accepted; agree-accept {}, agree-reject {}, disagree {}; {} files in {}",
        out.table.len(),
        out.decisions.slots,
        out.decisions.accepted(),
        c.agree_accept,
        c.agree_reject,
        c.disagree,
        out.artifacts.len(),
        cfg.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}
