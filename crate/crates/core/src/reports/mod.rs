//! Pipeline orchestration, gray-area adjudication and figure output.

mod gray;
mod pipeline;
mod plots;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use gray::{gray_area, Agreement, AgreementCounts, GrayAreaEntry, GrayAreaReport};
pub use pipeline::{
    run_calibration, run_pipeline, write_review_table, CalibrationOutput, CalibrationRun, CalibrationSettings, FitSummary,
    PipelineConfig, PipelineOutput, SAMPLES_DEFAULT,
};
pub use plots::{emit_plots, histogram, Histogram, PlotData, HISTOGRAM_BINS};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("decision lists cover different papers: {0}")]
    PaperSetMismatch(String),
    #[error("missing columns: {0}")]
    MissingColumns(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Score(#[from] crate::scoring::ScoreError),
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<(), ReportError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), ReportError>,
{
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| ReportError::Io(e.error))?;
    Ok(())
}

pub fn write_json_atomic<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), ReportError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, |w| Ok(w.write_all(b"one")?)).unwrap();
        write_atomic(&path, |w| Ok(w.write_all(b"two")?)).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        let failed = write_atomic(&path, |_| Err(ReportError::Config("boom".into())));
        assert!(failed.is_err());
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
