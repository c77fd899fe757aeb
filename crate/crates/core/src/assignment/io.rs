use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::{AssignError, AssignmentConstraints, AssignmentInstance, AssignmentResult, SimilaritySources, SimilarityWeights};
use crate::review_data::{PaperId, ReviewerId, ReviewerTag};

fn open(path: &Path) -> Result<File, AssignError> {
    File::open(path).map_err(|source| AssignError::Io { path: path.display().to_string(), source })
}

fn required(headers: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>, AssignError> {
    names
        .iter()
        .map(|n| {
            headers.iter().position(|h| h.trim() == *n).ok_or_else(|| AssignError::Row {
                row: 1,
                reason: format!("missing column {n}"),
            })
        })
        .collect()
}

fn unit_value(raw: &str, row: usize, name: &str) -> Result<f64, AssignError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| AssignError::Row { row, reason: format!("{name} {raw:?} is not a number") })
}

/// `reviewer_id,paper_id,bid,subject_relevance,tpms` with `tpms` allowed empty.
pub fn parse_sources<R: Read>(reader: R) -> Result<Vec<(PaperId, ReviewerId, SimilaritySources)>, AssignError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = required(rdr.headers()?, &["reviewer_id", "paper_id", "bid", "subject_relevance"])?;
    let tpms_col = rdr.headers()?.iter().position(|h| h.trim() == "tpms");
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let tpms = match tpms_col.map(get) {
            None | Some("") => None,
            Some(raw) => Some(unit_value(raw, row, "tpms")?),
        };
        let src = SimilaritySources {
            bid: unit_value(get(cols[2]), row, "bid")?,
            subject: unit_value(get(cols[3]), row, "subject_relevance")?,
            tpms,
        };
        src.check().map_err(|e| AssignError::Row { row, reason: e.to_string() })?;
        rows.push((PaperId::new(get(cols[1]))?, ReviewerId::new(get(cols[0]))?, src));
    }
    Ok(rows)
}

/// `reviewer_id,tag`.
pub fn parse_tags<R: Read>(reader: R) -> Result<BTreeMap<ReviewerId, ReviewerTag>, AssignError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = required(rdr.headers()?, &["reviewer_id", "tag"])?;
    let mut tags = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (r, t) = (rec.get(cols[0]).unwrap_or(""), rec.get(cols[1]).unwrap_or(""));
        let tag = ReviewerTag::parse(t)
            .ok_or_else(|| AssignError::UnknownTag { reviewer: r.to_string(), tag: t.to_string() })?;
        tags.insert(ReviewerId::new(r)?, tag);
    }
    Ok(tags)
}

/// `reviewer_id,paper_id`.
pub fn parse_conflicts<R: Read>(reader: R) -> Result<BTreeSet<(PaperId, ReviewerId)>, AssignError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = required(rdr.headers()?, &["reviewer_id", "paper_id"])?;
    let mut out = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.insert((PaperId::new(rec.get(cols[1]).unwrap_or(""))?, ReviewerId::new(rec.get(cols[0]).unwrap_or(""))?));
    }
    Ok(out)
}

pub fn load_instance(
    sources: &Path,
    tags: Option<&Path>,
    conflicts: Option<&Path>,
) -> Result<AssignmentInstance, AssignError> {
    let rows = parse_sources(open(sources)?)?;
    let tags = match tags {
        Some(p) => parse_tags(open(p)?)?,
        None => BTreeMap::new(),
    };
    let conflicts = match conflicts {
        Some(p) => parse_conflicts(open(p)?)?,
        None => BTreeSet::new(),
    };
    Ok(AssignmentInstance::from_rows(rows, tags, conflicts))
}

/// `paper_id,reviewer_id,similarity`.
pub fn write_assignment_csv<W: Write>(writer: W, result: &AssignmentResult) -> Result<(), AssignError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["paper_id", "reviewer_id", "similarity"])?;
    for a in &result.pairs {
        w.write_record([a.paper.as_str(), a.reviewer.as_str(), &a.similarity.to_string()])?;
    }
    w.flush().map_err(|source| AssignError::Io { path: "assignment".into(), source })?;
    Ok(())
}

#[derive(Serialize)]
struct Audit<'a> {
    constraints: &'a AssignmentConstraints,
    weights: &'a SimilarityWeights,
    papers: usize,
    reviewers: usize,
    pairs: usize,
    feasible: bool,
    total_similarity: f64,
    baseline_similarity: f64,
    improving_moves: usize,
    shortfalls: &'a [super::Shortfall],
    checks: &'a [super::ConstraintCheck],
}

pub fn write_audit_json<W: Write>(
    writer: W,
    inst: &AssignmentInstance,
    cons: &AssignmentConstraints,
    weights: &SimilarityWeights,
    result: &AssignmentResult,
) -> Result<(), AssignError> {
    let audit = Audit {
        constraints: cons,
        weights,
        papers: inst.papers.len(),
        reviewers: inst.reviewers.len(),
        pairs: result.pairs.len(),
        feasible: result.feasible,
        total_similarity: result.total_similarity,
        baseline_similarity: result.baseline_similarity,
        improving_moves: result.improving_moves,
        shortfalls: &result.shortfalls,
        checks: &result.report.checks,
    };
    serde_json::to_writer_pretty(writer, &audit)?;
    Ok(())
}
