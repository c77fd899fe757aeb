//! Per-review scores, per-paper aggregation, normalization, the harmonic
//! score index and the acceptance-rate cutoff.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::review_data::{HalfSteps, MetaReviewForm, PaperId, ReviewForm, ReviewerId};

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("cannot aggregate an empty score list")]
    Empty,
    #[error("non-positive total confidence weight {0}")]
    ZeroWeight(f64),
    #[error("acceptance rate {0} outside (0, 100]")]
    BadRate(f64),
    #[error("no paper has both reviews and a meta-review")]
    NoScorablePapers,
    #[error("malformed score table: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Lowest and highest attainable per-review score.
pub const REVIEW_SCORE_MIN: HalfSteps = HalfSteps(-14);
pub const REVIEW_SCORE_MAX: HalfSteps = HalfSteps(16);

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewScore {
    pub paper: PaperId,
    pub reviewer: ReviewerId,
    pub score: HalfSteps,
    /// Confidence weight; used only when aggregating.
    pub confidence: f64,
}

impl ReviewScore {
    pub fn weighted(&self) -> WeightedReview {
        WeightedReview {
            paper: self.paper.clone(),
            reviewer: self.reviewer.clone(),
            value: self.score.as_f64(),
            weight: self.confidence,
        }
    }
}

/// A real-valued review score with its aggregation weight. Raw, dequantized
/// and calibrated scores all flow through aggregation in this form.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedReview {
    pub paper: PaperId,
    pub reviewer: ReviewerId,
    pub value: f64,
    pub weight: f64,
}

/// Recommendation + the four criteria + award nomination.
pub fn review_score(form: &ReviewForm) -> ReviewScore {
    let mut score = form.recommendation.weight();
    for c in form.criteria {
        score += c.criterion_weight();
    }
    if form.award {
        score += HalfSteps::from_units(1);
    }
    ReviewScore {
        paper: form.paper.clone(),
        reviewer: form.reviewer.clone(),
        score,
        confidence: form.confidence_weight(),
    }
}

/// Weighted mean of `(value, weight)` pairs.
pub fn weighted_mean(items: impl IntoIterator<Item = (f64, f64)>) -> Result<f64, ScoreError> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut any = false;
    for (v, w) in items {
        num += w * v;
        den += w;
        any = true;
    }
    if !any {
        return Err(ScoreError::Empty);
    }
    if den <= 0.0 {
        return Err(ScoreError::ZeroWeight(den));
    }
    Ok(num / den)
}

/// Confidence-weighted mean of one paper's review scores.
pub fn paper_score(reviews: &[ReviewScore]) -> Result<f64, ScoreError> {
    weighted_mean(reviews.iter().map(|r| (r.score.as_f64(), r.confidence)))
}

/// Unweighted mean of the recommendation weights of one paper's meta-reviews.
pub fn meta_score(metas: &[MetaReviewForm]) -> Result<f64, ScoreError> {
    weighted_mean(metas.iter().map(|m| (m.recommendation.weight().as_f64(), 1.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// Set when every input was equal and all outputs were pinned to 50.
    pub degenerate: bool,
}

/// Min–max rescaling onto [0, 100]. A constant vector maps to 50 everywhere.
pub fn normalize(v: &[f64]) -> Result<Normalized, ScoreError> {
    let (min, max) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if v.is_empty() {
        return Err(ScoreError::Empty);
    }
    if max == min {
        return Ok(Normalized { values: vec![50.0; v.len()], degenerate: true });
    }
    let span = max - min;
    let values = v
        .iter()
        .map(|&x| {
            // exact at the extremes
            if x == min {
                0.0
            } else if x == max {
                100.0
            } else {
                100.0 * (x - min) / span
            }
        })
        .collect();
    Ok(Normalized { values, degenerate: false })
}

/// Harmonic mean of the two normalized scores; 0 when both are 0.
pub fn score_index(sr: f64, sm: f64) -> f64 {
    let sum = sr + sm;
    if sum == 0.0 {
        0.0
    } else {
        2.0 * sr * sm / sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedScores {
    pub sr_cal: f64,
    pub sm_cal: f64,
    pub si_cal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperScores {
    pub paper_id: PaperId,
    pub s_p: f64,
    pub xi_p: f64,
    #[serde(rename = "sR_norm")]
    pub sr_norm: f64,
    #[serde(rename = "sM_norm")]
    pub sm_norm: f64,
    #[serde(rename = "SI")]
    pub si: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrated: Option<CalibratedScores>,
}

/// Per-paper score columns, ordered by paper id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: Vec<PaperScores>,
    #[serde(default)]
    pub notices: Vec<String>,
}

/// Groups weighted reviews by paper, in paper-id order.
pub fn group_by_paper(reviews: &[WeightedReview]) -> BTreeMap<&PaperId, Vec<&WeightedReview>> {
    let mut groups: BTreeMap<&PaperId, Vec<&WeightedReview>> = BTreeMap::new();
    for r in reviews {
        groups.entry(&r.paper).or_default().push(r);
    }
    groups
}

/// Confidence-weighted mean per paper.
pub fn aggregate_by_paper(reviews: &[WeightedReview]) -> Result<BTreeMap<PaperId, f64>, ScoreError> {
    group_by_paper(reviews)
        .into_iter()
        .map(|(p, rs)| Ok((p.clone(), weighted_mean(rs.iter().map(|r| (r.value, r.weight)))?)))
        .collect()
}

/// Mean meta score per paper.
pub fn meta_by_paper(metas: &[MetaReviewForm]) -> Result<BTreeMap<PaperId, f64>, ScoreError> {
    let mut groups: BTreeMap<&PaperId, Vec<MetaReviewForm>> = BTreeMap::new();
    for m in metas {
        groups.entry(&m.paper).or_default().push(m.clone());
    }
    groups.into_iter().map(|(p, ms)| Ok((p.clone(), meta_score(&ms)?))).collect()
}

/// Normalizes a per-paper column, recording a notice when it is constant.
pub fn normalize_column(
    column: &BTreeMap<PaperId, f64>,
    name: &str,
    notices: &mut Vec<String>,
) -> Result<BTreeMap<PaperId, f64>, ScoreError> {
    let values: Vec<f64> = column.values().copied().collect();
    let norm = normalize(&values)?;
    if norm.degenerate {
        notices.push(format!("{name}: all papers share one value; normalized to 50"));
    }
    Ok(column.keys().cloned().zip(norm.values).collect())
}

impl ScoreTable {
    /// Builds the uncalibrated table. Only papers with at least one review and
    /// one meta-review are scored; the others are listed in `notices`.
    pub fn build(reviews: &[WeightedReview], metas: &[MetaReviewForm]) -> Result<ScoreTable, ScoreError> {
        let mut sr = aggregate_by_paper(reviews)?;
        let mut sm = meta_by_paper(metas)?;
        let mut notices = Vec::new();
        sr.retain(|p, _| {
            let keep = sm.contains_key(p);
            if !keep {
                notices.push(format!("paper {p}: no meta-review, excluded from ranking"));
            }
            keep
        });
        sm.retain(|p, _| {
            let keep = sr.contains_key(p);
            if !keep {
                notices.push(format!("paper {p}: no reviews, excluded from ranking"));
            }
            keep
        });
        if sr.is_empty() {
            return Err(ScoreError::NoScorablePapers);
        }
        let sr_norm = normalize_column(&sr, "reviewer score", &mut notices)?;
        let sm_norm = normalize_column(&sm, "meta score", &mut notices)?;
        let rows = sr
            .iter()
            .map(|(p, &s_p)| {
                let (r, m) = (sr_norm[p], sm_norm[p]);
                PaperScores {
                    paper_id: p.clone(),
                    s_p,
                    xi_p: sm[p],
                    sr_norm: r,
                    sm_norm: m,
                    si: score_index(r, m),
                    calibrated: None,
                }
            })
            .collect();
        Ok(ScoreTable { rows, notices })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_calibration(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.calibrated.is_some())
    }

    /// Fills the calibrated columns from already-normalized per-paper values.
    /// Papers missing from either map keep no calibrated columns.
    pub fn attach_calibrated(&mut self, sr_cal: &BTreeMap<PaperId, f64>, sm_cal: &BTreeMap<PaperId, f64>) {
        for row in &mut self.rows {
            row.calibrated = match (sr_cal.get(&row.paper_id), sm_cal.get(&row.paper_id)) {
                (Some(&r), Some(&m)) => Some(CalibratedScores { sr_cal: r, sm_cal: m, si_cal: score_index(r, m) }),
                _ => None,
            };
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ScoreError> {
        let mut csv = csv::Writer::from_writer(writer);
        let cal = self.has_calibration();
        let mut header = vec!["paper_id", "s_p", "xi_p", "sR_norm", "sM_norm", "SI"];
        if cal {
            header.extend(["sR_cal", "sM_cal", "SI_cal"]);
        }
        csv.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.paper_id.to_string(),
                row.s_p.to_string(),
                row.xi_p.to_string(),
                row.sr_norm.to_string(),
                row.sm_norm.to_string(),
                row.si.to_string(),
            ];
            if let (true, Some(c)) = (cal, row.calibrated) {
                rec.extend([c.sr_cal.to_string(), c.sm_cal.to_string(), c.si_cal.to_string()]);
            }
            csv.write_record(&rec)?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<ScoreTable, ScoreError> {
        let mut csv = csv::Reader::from_reader(reader);
        let headers: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        let base = ["paper_id", "s_p", "xi_p", "sR_norm", "sM_norm", "SI"];
        let with_cal = match headers.len() {
            6 => false,
            9 => true,
            n => return Err(ScoreError::Table(format!("expected 6 or 9 columns, found {n}"))),
        };
        let expected: Vec<&str> =
            base.iter().copied().chain(if with_cal { ["sR_cal", "sM_cal", "SI_cal"].as_slice() } else { &[] }.iter().copied()).collect();
        if headers != expected {
            return Err(ScoreError::Table(format!("unexpected header {headers:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in csv.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64, ScoreError> {
                rec[k].trim().parse().map_err(|_| ScoreError::Table(format!("row {}: bad number {:?}", i + 1, &rec[k])))
            };
            let paper_id =
                PaperId::new(&rec[0]).map_err(|_| ScoreError::Table(format!("row {}: empty paper_id", i + 1)))?;
            let calibrated = if with_cal {
                Some(CalibratedScores { sr_cal: num(6)?, sm_cal: num(7)?, si_cal: num(8)? })
            } else {
                None
            };
            rows.push(PaperScores {
                paper_id,
                s_p: num(1)?,
                xi_p: num(2)?,
                sr_norm: num(3)?,
                sm_norm: num(4)?,
                si: num(5)?,
                calibrated,
            });
        }
        rows.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
        Ok(ScoreTable { rows, notices: Vec::new() })
    }
}

/// How papers tied on the ranking score are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Higher normalized meta score first, then paper id ascending.
    #[default]
    MetaThenPaperId,
    /// Paper id ascending only.
    PaperId,
}

/// Treatment of papers whose ranking score is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroScorePolicy {
    /// Ranked like any other score.
    #[default]
    Rank,
    /// Never accepted, even if a slot would be free.
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    /// Percentage of papers to accept, in (0, 100].
    pub acceptance_rate: f64,
    #[serde(default)]
    pub tie_policy: TiePolicy,
    #[serde(default)]
    pub zero_score: ZeroScorePolicy,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig { acceptance_rate: 40.0, tie_policy: TiePolicy::default(), zero_score: ZeroScorePolicy::default() }
    }
}

impl DecisionConfig {
    pub fn new(acceptance_rate: f64) -> Result<Self, ScoreError> {
        let cfg = DecisionConfig { acceptance_rate, ..Default::default() };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ScoreError> {
        if self.acceptance_rate > 0.0 && self.acceptance_rate <= 100.0 {
            Ok(())
        } else {
            Err(ScoreError::BadRate(self.acceptance_rate))
        }
    }

    /// Number of acceptance slots for `papers` papers: ⌊a·P/100⌋.
    pub fn slots(&self, papers: usize) -> usize {
        acceptance_slots(self.acceptance_rate, papers)
    }
}

pub fn acceptance_slots(rate_percent: f64, papers: usize) -> usize {
    // the guard absorbs representation error in products like 29·100/100
    let exact = rate_percent * papers as f64 / 100.0;
    (exact + 1e-9 * exact.max(1.0)).floor() as usize
}

/// Accepted share in percent.
pub fn acceptance_rate_percent(accepted: usize, papers: usize) -> f64 {
    if papers == 0 {
        0.0
    } else {
        100.0 * accepted as f64 / papers as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPaper {
    pub rank: usize,
    pub paper_id: PaperId,
    pub score: f64,
    pub decision: Decision,
}

/// Papers in descending score order with their decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionList {
    pub entries: Vec<RankedPaper>,
    pub slots: usize,
}

impl DecisionList {
    pub fn accepted(&self) -> usize {
        self.entries.iter().filter(|e| e.decision == Decision::Accept).count()
    }

    pub fn decision_of(&self, paper: &PaperId) -> Option<Decision> {
        self.entries.iter().find(|e| &e.paper_id == paper).map(|e| e.decision)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ScoreError> {
        self.write_csv_as(writer, "SI")
    }

    /// Same as [`write_csv`](Self::write_csv) with a different score column name.
    pub fn write_csv_as<W: Write>(&self, writer: W, score_column: &str) -> Result<(), ScoreError> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["rank", "paper_id", score_column, "decision"])?;
        for e in &self.entries {
            csv.write_record([e.rank.to_string(), e.paper_id.to_string(), e.score.to_string(), e.decision.as_str().into()])?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<DecisionList, ScoreError> {
        let mut csv = csv::Reader::from_reader(reader);
        let headers: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        let known = |h: &[String]| h.len() == 4 && h[0] == "rank" && h[1] == "paper_id" && h[3] == "decision";
        if !known(&headers) || !(headers[2] == "SI" || headers[2] == "SI_cal") {
            return Err(ScoreError::Table(format!("unexpected header {headers:?}")));
        }
        let mut entries = Vec::new();
        for (i, rec) in csv.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| ScoreError::Table(format!("row {}: bad {what}", i + 1));
            entries.push(RankedPaper {
                rank: rec[0].trim().parse().map_err(|_| bad("rank"))?,
                paper_id: PaperId::new(&rec[1]).map_err(|_| bad("paper_id"))?,
                score: rec[2].trim().parse().map_err(|_| bad("SI"))?,
                decision: match rec[3].trim() {
                    "accept" => Decision::Accept,
                    "reject" => Decision::Reject,
                    _ => return Err(bad("decision")),
                },
            });
        }
        let slots = entries.iter().filter(|e| e.decision == Decision::Accept).count();
        Ok(DecisionList { entries, slots })
    }
}

/// Which score column drives the ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankColumn {
    #[default]
    ScoreIndex,
    CalibratedScoreIndex,
}

/// One candidate for [`rank_scores`].
#[derive(Debug, Clone, PartialEq)]
pub struct RankInput {
    pub paper_id: PaperId,
    pub score: f64,
    pub tie_break: f64,
}

/// Sorts descending by score and accepts the top ⌊a·P/100⌋.
pub fn rank_scores(mut items: Vec<RankInput>, cfg: &DecisionConfig) -> DecisionList {
    let order = |a: &RankInput, b: &RankInput| -> Ordering {
        let by_score = b.score.total_cmp(&a.score);
        let by_meta = match cfg.tie_policy {
            TiePolicy::MetaThenPaperId => b.tie_break.total_cmp(&a.tie_break),
            TiePolicy::PaperId => Ordering::Equal,
        };
        by_score.then(by_meta).then_with(|| a.paper_id.cmp(&b.paper_id))
    };
    items.sort_by(order);
    let slots = cfg.slots(items.len());
    let entries = items
        .into_iter()
        .enumerate()
        .map(|(i, it)| {
            let mut decision = if i < slots { Decision::Accept } else { Decision::Reject };
            if cfg.zero_score == ZeroScorePolicy::Reject && it.score == 0.0 {
                decision = Decision::Reject;
            }
            RankedPaper { rank: i + 1, paper_id: it.paper_id, score: it.score, decision }
        })
        .collect();
    DecisionList { entries, slots }
}

pub fn rank_and_cut(table: &ScoreTable, cfg: &DecisionConfig, column: RankColumn) -> Result<DecisionList, ScoreError> {
    cfg.check()?;
    let items = table
        .rows
        .iter()
        .map(|row| match column {
            RankColumn::ScoreIndex => Ok(RankInput { paper_id: row.paper_id.clone(), score: row.si, tie_break: row.sm_norm }),
            RankColumn::CalibratedScoreIndex => {
                let c = row
                    .calibrated
                    .ok_or_else(|| ScoreError::Table(format!("paper {} has no calibrated columns", row.paper_id)))?;
                Ok(RankInput { paper_id: row.paper_id.clone(), score: c.si_cal, tie_break: c.sm_cal })
            }
        })
        .collect::<Result<Vec<_>, ScoreError>>()?;
    Ok(rank_scores(items, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::review_data::{Grade, MetaReviewerId, Recommendation};
    use proptest::prelude::*;

    fn form(rec: Recommendation, crit: Grade, award: bool) -> ReviewForm {
        ReviewForm {
            paper: PaperId::new("p").unwrap(),
            reviewer: ReviewerId::new("r").unwrap(),
            recommendation: rec,
            criteria: [crit; 4],
            confidence: Grade::Good,
            award,
            comments: String::new(),
        }
    }

    fn rs(score: f64, confidence: f64) -> ReviewScore {
        ReviewScore {
            paper: PaperId::new("p").unwrap(),
            reviewer: ReviewerId::new("r").unwrap(),
            score: HalfSteps::from_f64(score).unwrap(),
            confidence,
        }
    }

    fn meta(rec: Recommendation) -> MetaReviewForm {
        MetaReviewForm {
            paper: PaperId::new("p").unwrap(),
            metareviewer: MetaReviewerId::new("m").unwrap(),
            recommendation: rec,
        }
    }

    #[test]
    fn review_score_examples() {
        assert_eq!(review_score(&form(Recommendation::Accept, Grade::VeryGood, false)).score.as_f64(), 4.0);
        assert_eq!(review_score(&form(Recommendation::Borderline, Grade::Good, false)).score.as_f64(), 0.0);
        assert_eq!(review_score(&form(Recommendation::StrongAccept, Grade::Excellent, true)).score, REVIEW_SCORE_MAX);
        assert_eq!(review_score(&form(Recommendation::StrongReject, Grade::Poor, false)).score, REVIEW_SCORE_MIN);
    }

    #[test]
    fn confidence_does_not_enter_review_score() {
        let mut f = form(Recommendation::Accept, Grade::VeryGood, false);
        f.confidence = Grade::Excellent;
        let s = review_score(&f);
        assert_eq!(s.score.as_f64(), 4.0);
        assert_eq!(s.confidence, 1.2);
    }

    #[test]
    fn paper_score_examples() {
        assert_eq!(paper_score(&[rs(4.0, 0.9)]).unwrap(), 4.0);
        let two = paper_score(&[rs(4.0, 1.2), rs(0.0, 0.8)]).unwrap();
        assert!((two - 2.4).abs() < 1e-12);
        assert_eq!(paper_score(&[rs(1.5, 0.8), rs(1.5, 1.2), rs(1.5, 1.0)]).unwrap(), 1.5);
        assert!(matches!(paper_score(&[]), Err(ScoreError::Empty)));
    }

    #[test]
    fn meta_score_examples() {
        assert_eq!(meta_score(&[meta(Recommendation::Accept)]).unwrap(), 2.0);
        assert_eq!(meta_score(&[meta(Recommendation::Accept), meta(Recommendation::WeakReject)]).unwrap(), 0.5);
        assert_eq!(meta_score(&[meta(Recommendation::Borderline), meta(Recommendation::Borderline)]).unwrap(), 0.0);
        assert!(meta_score(&[]).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[-7.0, 0.5, 8.0]).unwrap().values, vec![0.0, 50.0, 100.0]);
        let id = vec![0.0, 12.5, 100.0, 37.0];
        assert_eq!(normalize(&id).unwrap().values, id);
        let flat = normalize(&[3.0, 3.0, 3.0]).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.values, vec![50.0; 3]);
        assert!(normalize(&[]).is_err());
    }

    #[test]
    fn score_index_examples() {
        assert_eq!(score_index(37.0, 37.0), 37.0);
        assert_eq!(score_index(0.0, 80.0), 0.0);
        assert_eq!(score_index(0.0, 0.0), 0.0);
        assert!((score_index(50.0, 100.0) - 200.0 / 3.0).abs() < 1e-12);
    }

    fn inputs(scores: &[f64]) -> Vec<RankInput> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| RankInput { paper_id: PaperId::new(format!("p{i:02}")).unwrap(), score: s, tie_break: 0.0 })
            .collect()
    }

    #[test]
    fn ten_papers_forty_percent() {
        let list = rank_scores(inputs(&[5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0, 0.5]), &DecisionConfig::default());
        assert_eq!(list.accepted(), 4);
        let top: Vec<f64> = list.entries.iter().take(4).map(|e| e.score).collect();
        assert_eq!(top, vec![9.0, 8.0, 7.0, 6.0]);
    }

    #[test]
    fn full_tie_resolved_by_policy() {
        let mut items = inputs(&[1.0; 10]);
        for (i, it) in items.iter_mut().enumerate() {
            it.tie_break = (i % 3) as f64;
        }
        let list = rank_scores(items.clone(), &DecisionConfig::default());
        let accepted: Vec<&str> =
            list.entries.iter().filter(|e| e.decision == Decision::Accept).map(|e| e.paper_id.as_str()).collect();
        assert_eq!(accepted, vec!["p02", "p05", "p08", "p01"]);
        items.reverse();
        assert_eq!(rank_scores(items, &DecisionConfig::default()), list);

        let by_id = DecisionConfig { tie_policy: TiePolicy::PaperId, ..Default::default() };
        let list = rank_scores(inputs(&[1.0; 10]), &by_id);
        assert_eq!(list.entries[0].paper_id.as_str(), "p00");
    }

    #[test]
    fn zero_score_policy() {
        let cfg = DecisionConfig { acceptance_rate: 100.0, zero_score: ZeroScorePolicy::Reject, ..Default::default() };
        let list = rank_scores(inputs(&[3.0, 0.0]), &cfg);
        assert_eq!(list.accepted(), 1);
    }

    #[test]
    fn slot_counts() {
        assert_eq!(acceptance_slots(40.0, 10), 4);
        assert_eq!(acceptance_slots(40.0, 5526), 2210);
        assert_eq!(acceptance_slots(29.0, 100), 29);
        assert_eq!(acceptance_slots(100.0, 7), 7);
        assert_eq!(acceptance_slots(40.0, 1), 0);
        assert!(DecisionConfig::new(0.0).is_err());
        assert!(DecisionConfig::new(100.5).is_err());
    }

    #[test]
    fn table_build_and_csv_round_trip() {
        let w = |p: &str, v: f64| WeightedReview {
            paper: PaperId::new(p).unwrap(),
            reviewer: ReviewerId::new("r").unwrap(),
            value: v,
            weight: 1.0,
        };
        let m = |p: &str, rec| MetaReviewForm {
            paper: PaperId::new(p).unwrap(),
            metareviewer: MetaReviewerId::new("m").unwrap(),
            recommendation: rec,
        };
        let reviews = vec![w("a", 4.0), w("b", -2.0), w("c", 1.0), w("orphan", 3.0)];
        let metas = vec![m("a", Recommendation::Accept), m("b", Recommendation::Reject), m("c", Recommendation::Accept)];
        let table = ScoreTable::build(&reviews, &metas).unwrap();
        assert_eq!(table.len(), 3);
        assert!(table.notices.iter().any(|n| n.contains("orphan")));
        assert_eq!(table.rows[0].sr_norm, 100.0);
        assert_eq!(table.rows[1].sr_norm, 0.0);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back = ScoreTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows, table.rows);
    }

    proptest! {
        #[test]
        fn lattice_and_bounds(rec in 0usize..7, c in prop::array::uniform4(0usize..5), award: bool) {
            let f = ReviewForm {
                criteria: c.map(|k| Grade::ALL[k]),
                ..form(Recommendation::ALL[rec], Grade::Good, award)
            };
            let s = review_score(&f).score;
            prop_assert!(s >= REVIEW_SCORE_MIN && s <= REVIEW_SCORE_MAX);
            prop_assert_eq!((s.as_f64() * 2.0).fract(), 0.0);
        }

        #[test]
        fn weighted_mean_within_bounds_and_order_free(
            items in prop::collection::vec((-14i32..=16, 8u8..=12), 1..8)
        ) {
            let pairs: Vec<(f64, f64)> = items.iter().map(|&(h, t)| (h as f64 / 2.0, t as f64 / 10.0)).collect();
            let m = weighted_mean(pairs.iter().copied()).unwrap();
            let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
            let rev = weighted_mean(pairs.iter().rev().copied()).unwrap();
            prop_assert!((m - rev).abs() < 1e-12);
        }

        #[test]
        fn normalize_is_affine_invariant(
            v in prop::collection::vec(-100.0f64..100.0, 2..20),
            alpha in 0.1f64..10.0,
            beta in -50.0f64..50.0,
        ) {
            let a = normalize(&v).unwrap();
            let w: Vec<f64> = v.iter().map(|x| alpha * x + beta).collect();
            let b = normalize(&w).unwrap();
            if !a.degenerate {
                prop_assert!(a.values.iter().any(|&x| x == 0.0));
                prop_assert!(a.values.iter().any(|&x| x == 100.0));
            }
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-8);
            }
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(a.values[i] < a.values[j]);
                    }
                }
            }
        }

        #[test]
        fn harmonic_between_min_and_mean(a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
            let si = score_index(a, b);
            prop_assert!(si >= a.min(b) - 1e-12);
            prop_assert!(si <= (a + b) / 2.0 + 1e-12);
            prop_assert_eq!(si, score_index(b, a));
        }

        #[test]
        fn accepted_count_is_floor(p in 1usize..400, rate in 1u32..=100) {
            let scores: Vec<f64> = (0..p).map(|i| ((i * 37) % 101) as f64).collect();
            let cfg = DecisionConfig::new(rate as f64).unwrap();
            let list = rank_scores(inputs(&scores), &cfg);
            prop_assert_eq!(list.accepted(), (rate as usize * p) / 100);
        }
    }
}
