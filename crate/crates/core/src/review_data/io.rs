use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    AssignmentSet, DataError, Grade, MetaReviewForm, MetaReviewerId, PaperId, RecordKind, Recommendation, Rejection,
    ReviewForm, ReviewerId, Scale,
};

const REVIEW_REQUIRED: [&str; 7] = ["paper_id", "reviewer_id", "recommendation", "c1", "c2", "c3", "c4"];
const REVIEW_OPTIONAL: [&str; 3] = ["confidence", "award", "comments"];
const META_REQUIRED: [&str; 3] = ["paper_id", "metareviewer_id", "recommendation"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// Records recovered from one export, plus what could not be recovered.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed { records: Vec::new(), rejected: Vec::new(), warnings: Vec::new() }
    }
}

/// Everything read from a review export and its optional meta-review export.
#[derive(Debug, Clone, Default)]
pub struct LoadedReviews {
    pub assignments: AssignmentSet,
    pub reviews: Vec<ReviewForm>,
    pub metas: Vec<MetaReviewForm>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
}

impl LoadedReviews {
    pub fn from_records(reviews: Vec<ReviewForm>, metas: Vec<MetaReviewForm>) -> Self {
        LoadedReviews {
            assignments: AssignmentSet::from_records(&reviews, &metas),
            reviews,
            metas,
            ..Default::default()
        }
    }
}

pub fn load_reviews(reviews: &Path, metas: Option<&Path>, format: Format) -> Result<LoadedReviews, DataError> {
    let parsed = match format {
        Format::Csv => parse_reviews_csv(open(reviews)?)?,
        Format::Json => parse_reviews_json(open(reviews)?)?,
    };
    let meta_parsed = match metas {
        None => Parsed::default(),
        Some(path) => match format {
            Format::Csv => parse_meta_csv(open(path)?)?,
            Format::Json => parse_meta_json(open(path)?)?,
        },
    };
    let mut rejected = parsed.rejected;
    rejected.extend(meta_parsed.rejected);
    let mut warnings = parsed.warnings;
    warnings.extend(meta_parsed.warnings);
    Ok(LoadedReviews {
        assignments: AssignmentSet::from_records(&parsed.records, &meta_parsed.records),
        reviews: parsed.records,
        metas: meta_parsed.records,
        rejected,
        warnings,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, DataError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

/// Field lookup over one input row, independent of the container format.
struct Row<'a> {
    fields: Vec<(&'a str, String)>,
}

impl Row<'_> {
    fn get(&self, name: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| *k == name).map(|(_, v)| v.as_str())
    }

    fn required(&self, name: &str) -> Result<&str, String> {
        self.get(name).ok_or_else(|| format!("missing value for {name}"))
    }
}

fn check_columns<'a>(
    names: impl IntoIterator<Item = &'a str>,
    required: &[&str],
    optional: &[&str],
) -> Result<(), DataError> {
    let names: Vec<&str> = names.into_iter().collect();
    for name in &names {
        if !required.contains(name) && !optional.contains(name) {
            return Err(DataError::UnknownColumn(name.to_string()));
        }
    }
    for req in required {
        if !names.contains(req) {
            return Err(DataError::MissingColumn(req.to_string()));
        }
    }
    Ok(())
}

fn review_from_row(row: &Row<'_>, line: usize, warnings: &mut Vec<String>) -> Result<ReviewForm, String> {
    let paper = PaperId::new(row.required("paper_id")?).map_err(|_| "empty paper_id".to_string())?;
    let reviewer = ReviewerId::new(row.required("reviewer_id")?).map_err(|_| "empty reviewer_id".to_string())?;
    let recommendation = Recommendation::parse(row.required("recommendation")?).map_err(label_reason)?;
    let mut criteria = [Grade::Good; 4];
    for (k, slot) in criteria.iter_mut().enumerate() {
        let column = ["c1", "c2", "c3", "c4"][k];
        *slot = Grade::parse(row.required(column)?, Scale::Criterion).map_err(label_reason)?;
    }
    let confidence = match row.get("confidence").map(str::trim) {
        None | Some("") => {
            warnings.push(format!("review row {line}: confidence missing, defaulting to \"Good\""));
            Grade::Good
        }
        Some(label) => Grade::parse(label, Scale::Confidence).map_err(label_reason)?,
    };
    let award = match row.get("award").map(str::trim) {
        None | Some("") | Some("0") => false,
        Some("1") => true,
        Some(other) => return Err(format!("award must be 0 or 1, got {other:?}")),
    };
    Ok(ReviewForm {
        paper,
        reviewer,
        recommendation,
        criteria,
        confidence,
        award,
        comments: row.get("comments").unwrap_or_default().to_string(),
    })
}

fn meta_from_row(row: &Row<'_>) -> Result<MetaReviewForm, String> {
    Ok(MetaReviewForm {
        paper: PaperId::new(row.required("paper_id")?).map_err(|_| "empty paper_id".to_string())?,
        metareviewer: MetaReviewerId::new(row.required("metareviewer_id")?)
            .map_err(|_| "empty metareviewer_id".to_string())?,
        recommendation: Recommendation::parse(row.required("recommendation")?).map_err(label_reason)?,
    })
}

fn label_reason(err: super::UnknownLabel) -> String {
    format!("unknown label {:?} for {}", err.label, err.scale)
}

fn parse_csv<T, R: Read>(
    reader: R,
    kind: RecordKind,
    required: &[&str],
    optional: &[&str],
    mut convert: impl FnMut(&Row<'_>, usize, &mut Vec<String>) -> Result<T, String>,
) -> Result<Parsed<T>, DataError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers: Vec<String> = csv.headers()?.iter().map(|h| h.trim().to_string()).collect();
    check_columns(headers.iter().map(String::as_str), required, optional)?;
    let mut out = Parsed::default();
    let mut scratch = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let line = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.rejected.push(Rejection { source: kind, row: line, reason: e.to_string() });
                continue;
            }
        };
        if record.len() != headers.len() {
            out.rejected.push(Rejection {
                source: kind,
                row: line,
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
            continue;
        }
        let row = Row { fields: headers.iter().map(String::as_str).zip(record.iter().map(String::from)).collect() };
        scratch.clear();
        match convert(&row, line, &mut scratch) {
            Ok(rec) => {
                out.records.push(rec);
                out.warnings.append(&mut scratch);
            }
            Err(reason) => out.rejected.push(Rejection { source: kind, row: line, reason }),
        }
    }
    Ok(out)
}

fn parse_json<T, R: Read>(
    reader: R,
    kind: RecordKind,
    required: &[&str],
    optional: &[&str],
    mut convert: impl FnMut(&Row<'_>, usize, &mut Vec<String>) -> Result<T, String>,
) -> Result<Parsed<T>, DataError> {
    let rows: Vec<Value> = serde_json::from_reader(reader)?;
    let mut out = Parsed::default();
    let mut scratch = Vec::new();
    for (i, value) in rows.iter().enumerate() {
        let line = i + 1;
        let Some(obj) = value.as_object() else {
            out.rejected.push(Rejection { source: kind, row: line, reason: "not a JSON object".into() });
            continue;
        };
        for key in obj.keys() {
            if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
                return Err(DataError::UnknownColumn(key.clone()));
            }
        }
        let row = match json_row(obj) {
            Ok(row) => row,
            Err(reason) => {
                out.rejected.push(Rejection { source: kind, row: line, reason });
                continue;
            }
        };
        scratch.clear();
        match convert(&row, line, &mut scratch) {
            Ok(rec) => {
                out.records.push(rec);
                out.warnings.append(&mut scratch);
            }
            Err(reason) => out.rejected.push(Rejection { source: kind, row: line, reason }),
        }
    }
    Ok(out)
}

fn json_row(obj: &Map<String, Value>) -> Result<Row<'_>, String> {
    let mut fields = Vec::with_capacity(obj.len());
    for (k, v) in obj {
        let text = match v {
            Value::Null => continue,
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => if *b { "1" } else { "0" }.to_string(),
            _ => return Err(format!("field {k} must be a scalar")),
        };
        fields.push((k.as_str(), text));
    }
    Ok(Row { fields })
}

pub fn parse_reviews_csv<R: Read>(reader: R) -> Result<Parsed<ReviewForm>, DataError> {
    let mut parsed = parse_csv(reader, RecordKind::Review, &REVIEW_REQUIRED, &REVIEW_OPTIONAL, review_from_row)?;
    collapse_confidence_warnings(&mut parsed);
    Ok(parsed)
}

pub fn parse_reviews_json<R: Read>(reader: R) -> Result<Parsed<ReviewForm>, DataError> {
    let mut parsed = parse_json(reader, RecordKind::Review, &REVIEW_REQUIRED, &REVIEW_OPTIONAL, review_from_row)?;
    collapse_confidence_warnings(&mut parsed);
    Ok(parsed)
}

pub fn parse_meta_csv<R: Read>(reader: R) -> Result<Parsed<MetaReviewForm>, DataError> {
    parse_csv(reader, RecordKind::Meta, &META_REQUIRED, &[], |row, _, _| meta_from_row(row))
}

pub fn parse_meta_json<R: Read>(reader: R) -> Result<Parsed<MetaReviewForm>, DataError> {
    parse_json(reader, RecordKind::Meta, &META_REQUIRED, &[], |row, _, _| meta_from_row(row))
}

/// A file without a confidence column would otherwise produce one warning per row.
fn collapse_confidence_warnings(parsed: &mut Parsed<ReviewForm>) {
    if !parsed.records.is_empty() && parsed.warnings.len() == parsed.records.len() {
        let n = parsed.warnings.len();
        parsed.warnings = vec![format!("confidence missing on all {n} reviews, defaulting to \"Good\"")];
    }
}

#[derive(Serialize)]
struct ReviewOut<'a> {
    paper_id: &'a str,
    reviewer_id: &'a str,
    recommendation: &'static str,
    c1: &'static str,
    c2: &'static str,
    c3: &'static str,
    c4: &'static str,
    confidence: &'static str,
    award: u8,
    comments: &'a str,
}

impl<'a> From<&'a ReviewForm> for ReviewOut<'a> {
    fn from(r: &'a ReviewForm) -> Self {
        ReviewOut {
            paper_id: r.paper.as_str(),
            reviewer_id: r.reviewer.as_str(),
            recommendation: r.recommendation.label(),
            c1: r.criteria[0].label(),
            c2: r.criteria[1].label(),
            c3: r.criteria[2].label(),
            c4: r.criteria[3].label(),
            confidence: r.confidence.label(),
            award: u8::from(r.award),
            comments: &r.comments,
        }
    }
}

#[derive(Serialize)]
struct MetaOut<'a> {
    paper_id: &'a str,
    metareviewer_id: &'a str,
    recommendation: &'static str,
}

impl<'a> From<&'a MetaReviewForm> for MetaOut<'a> {
    fn from(m: &'a MetaReviewForm) -> Self {
        MetaOut {
            paper_id: m.paper.as_str(),
            metareviewer_id: m.metareviewer.as_str(),
            recommendation: m.recommendation.label(),
        }
    }
}

/// Canonical CSV export; re-parses to identical records.
pub fn write_reviews_csv<W: Write>(writer: W, reviews: &[ReviewForm]) -> Result<(), DataError> {
    let mut csv = csv::Writer::from_writer(writer);
    for r in reviews {
        csv.serialize(ReviewOut::from(r))?;
    }
    if reviews.is_empty() {
        csv.write_record(REVIEW_REQUIRED.iter().chain(REVIEW_OPTIONAL.iter()))?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_reviews_json<W: Write>(writer: W, reviews: &[ReviewForm]) -> Result<(), DataError> {
    let rows: Vec<ReviewOut<'_>> = reviews.iter().map(ReviewOut::from).collect();
    serde_json::to_writer_pretty(writer, &rows)?;
    Ok(())
}

pub fn write_meta_csv<W: Write>(writer: W, metas: &[MetaReviewForm]) -> Result<(), DataError> {
    let mut csv = csv::Writer::from_writer(writer);
    for m in metas {
        csv.serialize(MetaOut::from(m))?;
    }
    if metas.is_empty() {
        csv.write_record(META_REQUIRED)?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_meta_json<W: Write>(writer: W, metas: &[MetaReviewForm]) -> Result<(), DataError> {
    let rows: Vec<MetaOut<'_>> = metas.iter().map(MetaOut::from).collect();
    serde_json::to_writer_pretty(writer, &rows)?;
    Ok(())
}
