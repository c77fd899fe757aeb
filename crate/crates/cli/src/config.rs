//! Command-line flags, the optional TOML config file, and their merge.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use confscore::calibration::GridSpec;
use confscore::review_data::Format;
use confscore::scoring::{DecisionConfig, TiePolicy, ZeroScorePolicy};
use serde::Deserialize;

/// Flags shared by every subcommand. Each one can also be set in the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Primary input file (reviews export, similarity table, score table or decision list).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Meta-review export.
    #[arg(long, global = true)]
    pub meta: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Percentage of papers to accept.
    #[arg(long, global = true)]
    pub acceptance_rate: Option<f64>,
    /// Input format, and output format of the `score` and `rank` tables.
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// TOML file whose values take precedence over flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Dequantization smoothness weight.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub grid_min: Option<f64>,
    #[arg(long, global = true)]
    pub grid_max: Option<f64>,
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Posterior draws for acceptance probabilities.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Dequantize review scores before aggregation.
    #[arg(long, global = true)]
    pub dequantize: bool,
    #[arg(long, global = true)]
    pub no_calibrate: bool,
    /// meta_then_paper_id or paper_id.
    #[arg(long, global = true, value_parser = parse_tie)]
    pub tie_policy: Option<TiePolicy>,
    /// rank or reject.
    #[arg(long, global = true, value_parser = parse_zero)]
    pub zero_score: Option<ZeroScorePolicy>,

    /// Calibrated decision list for `report`.
    #[arg(long, global = true)]
    pub calibrated: Option<PathBuf>,
    /// Reviewer tags CSV for `assign`.
    #[arg(long, global = true)]
    pub tags: Option<PathBuf>,
    /// Conflicts CSV for `assign`.
    #[arg(long, global = true)]
    pub conflicts: Option<PathBuf>,
    #[arg(long, global = true)]
    pub min_reviewers: Option<usize>,
    #[arg(long, global = true)]
    pub max_load: Option<usize>,
    #[arg(long, global = true)]
    pub max_author_reviewers: Option<usize>,
}

fn parse_tie(s: &str) -> Result<TiePolicy, String> {
    match s {
        "meta_then_paper_id" => Ok(TiePolicy::MetaThenPaperId),
        "paper_id" => Ok(TiePolicy::PaperId),
        _ => Err(format!("unknown tie policy {s:?} (expected meta_then_paper_id or paper_id)")),
    }
}

fn parse_zero(s: &str) -> Result<ZeroScorePolicy, String> {
    match s {
        "rank" => Ok(ZeroScorePolicy::Rank),
        "reject" => Ok(ZeroScorePolicy::Reject),
        _ => Err(format!("unknown zero-score policy {s:?} (expected rank or reject)")),
    }
}

/// Config file contents. Keys mirror the flag names with `_` for `-`;
/// `calibrate` is the positive form of `--no-calibrate`.
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    input: Option<PathBuf>,
    meta: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    acceptance_rate: Option<f64>,
    format: Option<Format>,
    lambda: Option<f64>,
    grid_min: Option<f64>,
    grid_max: Option<f64>,
    grid_points: Option<usize>,
    samples: Option<usize>,
    dequantize: Option<bool>,
    calibrate: Option<bool>,
    tie_policy: Option<TiePolicy>,
    zero_score: Option<ZeroScorePolicy>,
    calibrated: Option<PathBuf>,
    tags: Option<PathBuf>,
    conflicts: Option<PathBuf>,
    min_reviewers: Option<usize>,
    max_load: Option<usize>,
    max_author_reviewers: Option<usize>,
}

impl FileConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.input,
            &mut cfg.meta,
            &mut cfg.out,
            &mut cfg.calibrated,
            &mut cfg.tags,
            &mut cfg.conflicts,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

pub const DEFAULT_OUT: &str = "out";
const GRID_DEFAULT: (f64, f64, usize) = (1e-2, 1e2, 13);

/// Flags merged with the config file; config values win.
#[derive(Debug, Clone)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub format: Format,
    pub decision: DecisionConfig,
    pub lambda: Option<f64>,
    pub grid: GridSpec,
    pub samples: usize,
    pub dequantize: bool,
    pub calibrate: bool,
    pub calibrated: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub conflicts: Option<PathBuf>,
    pub min_reviewers: Option<usize>,
    pub max_load: Option<usize>,
    pub max_author_reviewers: Option<usize>,
}

impl Settings {
    pub fn resolve(flags: Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => FileConfig::read(p)?,
            None => FileConfig::default(),
        };
        let defaults = DecisionConfig::default();
        let decision = DecisionConfig {
            acceptance_rate: file.acceptance_rate.or(flags.acceptance_rate).unwrap_or(defaults.acceptance_rate),
            tie_policy: file.tie_policy.or(flags.tie_policy).unwrap_or(defaults.tie_policy),
            zero_score: file.zero_score.or(flags.zero_score).unwrap_or(defaults.zero_score),
        };
        decision.check()?;
        let grid_min = file.grid_min.or(flags.grid_min).unwrap_or(GRID_DEFAULT.0);
        let grid_max = file.grid_max.or(flags.grid_max).unwrap_or(GRID_DEFAULT.1);
        let grid_points = file.grid_points.or(flags.grid_points).unwrap_or(GRID_DEFAULT.2);
        if !(grid_min > 0.0 && grid_max >= grid_min && grid_points >= 1) {
            bail!("grid needs 0 < grid-min <= grid-max and grid-points >= 1");
        }
        Ok(Settings {
            input: file.input.or(flags.input),
            meta: file.meta.or(flags.meta),
            out: file.out.or(flags.out).unwrap_or_else(|| DEFAULT_OUT.into()),
            seed: file.seed.or(flags.seed).unwrap_or(0),
            format: file.format.or(flags.format).unwrap_or_default(),
            decision,
            lambda: file.lambda.or(flags.lambda),
            grid: GridSpec::log(grid_min, grid_max, grid_points),
            samples: file.samples.or(flags.samples).unwrap_or(confscore::reports::SAMPLES_DEFAULT),
            dequantize: file.dequantize.unwrap_or(flags.dequantize),
            calibrate: file.calibrate.unwrap_or(!flags.no_calibrate),
            calibrated: file.calibrated.or(flags.calibrated),
            tags: file.tags.or(flags.tags),
            conflicts: file.conflicts.or(flags.conflicts),
            min_reviewers: file.min_reviewers.or(flags.min_reviewers),
            max_load: file.max_load.or(flags.max_load),
            max_author_reviewers: file.max_author_reviewers.or(flags.max_author_reviewers),
        })
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().context("--input is required")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "acceptance_rate = 25.0\ninput = \"reviews.csv\"\ncalibrate = false\n").unwrap();
        let flags = Flags {
            acceptance_rate: Some(40.0),
            input: Some("other.csv".into()),
            seed: Some(9),
            config: Some(path),
            ..Default::default()
        };
        let s = Settings::resolve(flags).unwrap();
        assert_eq!(s.decision.acceptance_rate, 25.0);
        assert_eq!(s.input.unwrap(), dir.path().join("reviews.csv"));
        assert_eq!(s.seed, 9);
        assert!(!s.calibrate);
        assert!(!s.dequantize);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "acceptance_rat = 25.0\n").unwrap();
        let err = Settings::resolve(Flags { config: Some(path), ..Default::default() }).unwrap_err();
        assert!(format!("{err:#}").contains("acceptance_rat"));
    }

    #[test]
    fn bad_rate_is_rejected() {
        assert!(Settings::resolve(Flags { acceptance_rate: Some(0.0), ..Default::default() }).is_err());
        assert!(Settings::resolve(Flags { acceptance_rate: Some(100.5), ..Default::default() }).is_err());
    }
}
