use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{LoadedReviews, MetaReviewerId, PaperId, Rejection, ReviewerId};

/// Conference floor; papers under it are reported.
pub const MIN_REVIEWS_PER_PAPER: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    BelowMinimumReviews { paper: PaperId, reviews: usize },
    DuplicateAssignment { paper: PaperId, reviewer: ReviewerId, count: usize },
    DuplicateMetaAssignment { paper: PaperId, metareviewer: MetaReviewerId, count: usize },
    MissingMetaReview { paper: PaperId },
    ConflictViolation { paper: PaperId, reviewer: ReviewerId },
}

impl Finding {
    pub fn describe(&self) -> String {
        match self {
            Finding::BelowMinimumReviews { paper, reviews } => {
                format!("paper {paper}: below minimum reviews ({reviews} < {MIN_REVIEWS_PER_PAPER})")
            }
            Finding::DuplicateAssignment { paper, reviewer, count } => {
                format!("paper {paper}: duplicate assignment of reviewer {reviewer} ({count} rows)")
            }
            Finding::DuplicateMetaAssignment { paper, metareviewer, count } => {
                format!("paper {paper}: duplicate meta assignment of {metareviewer} ({count} rows)")
            }
            Finding::MissingMetaReview { paper } => format!("paper {paper}: no meta-review"),
            Finding::ConflictViolation { paper, reviewer } => {
                format!("paper {paper}: reviewer {reviewer} has a declared conflict")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub papers: usize,
    pub reviewers: usize,
    pub metareviewers: usize,
    pub reviews: usize,
    pub meta_reviews: usize,
    /// reviews-per-paper → number of papers
    pub reviews_per_paper: BTreeMap<usize, usize>,
    pub mean_reviews_per_paper: f64,
    pub findings: Vec<Finding>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty() && self.rejected.is_empty()
    }

    pub fn has_duplicates(&self) -> bool {
        self.findings.iter().any(|f| {
            matches!(f, Finding::DuplicateAssignment { .. } | Finding::DuplicateMetaAssignment { .. })
        })
    }
}

pub fn validate(data: &LoadedReviews) -> ValidationReport {
    let mut per_paper: BTreeMap<&PaperId, usize> = BTreeMap::new();
    let mut pair_counts: BTreeMap<(&PaperId, &ReviewerId), usize> = BTreeMap::new();
    let mut reviewers = BTreeSet::new();
    for r in &data.reviews {
        *per_paper.entry(&r.paper).or_default() += 1;
        *pair_counts.entry((&r.paper, &r.reviewer)).or_default() += 1;
        reviewers.insert(&r.reviewer);
    }

    let mut meta_counts: BTreeMap<(&PaperId, &MetaReviewerId), usize> = BTreeMap::new();
    let mut meta_papers = BTreeSet::new();
    let mut metareviewers = BTreeSet::new();
    for m in &data.metas {
        *meta_counts.entry((&m.paper, &m.metareviewer)).or_default() += 1;
        meta_papers.insert(&m.paper);
        metareviewers.insert(&m.metareviewer);
    }

    let papers: BTreeSet<&PaperId> = per_paper.keys().copied().chain(meta_papers.iter().copied()).collect();

    let mut findings = Vec::new();
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for &paper in &papers {
        let n = per_paper.get(paper).copied().unwrap_or(0);
        *histogram.entry(n).or_default() += 1;
        if n < MIN_REVIEWS_PER_PAPER {
            findings.push(Finding::BelowMinimumReviews { paper: paper.clone(), reviews: n });
        }
        if !meta_papers.contains(paper) {
            findings.push(Finding::MissingMetaReview { paper: paper.clone() });
        }
    }
    for ((paper, reviewer), count) in pair_counts {
        if count > 1 {
            findings.push(Finding::DuplicateAssignment { paper: paper.clone(), reviewer: reviewer.clone(), count });
        }
        if data.assignments.is_conflicted(paper, reviewer) {
            findings.push(Finding::ConflictViolation { paper: paper.clone(), reviewer: reviewer.clone() });
        }
    }
    for ((paper, metareviewer), count) in meta_counts {
        if count > 1 {
            findings.push(Finding::DuplicateMetaAssignment {
                paper: paper.clone(),
                metareviewer: metareviewer.clone(),
                count,
            });
        }
    }
    findings.sort();

    let mean = if papers.is_empty() { 0.0 } else { data.reviews.len() as f64 / papers.len() as f64 };
    let mut rejected = data.rejected.clone();
    rejected.sort_by(|a, b| (a.source as u8, a.row).cmp(&(b.source as u8, b.row)));

    ValidationReport {
        papers: papers.len(),
        reviewers: reviewers.len(),
        metareviewers: metareviewers.len(),
        reviews: data.reviews.len(),
        meta_reviews: data.metas.len(),
        reviews_per_paper: histogram,
        mean_reviews_per_paper: mean,
        findings,
        rejected,
        warnings: data.warnings.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::review_data::{Grade, MetaReviewForm, Recommendation, ReviewForm};

    fn review(p: &str, r: &str) -> ReviewForm {
        ReviewForm {
            paper: PaperId::new(p).unwrap(),
            reviewer: ReviewerId::new(r).unwrap(),
            recommendation: Recommendation::Accept,
            criteria: [Grade::Good; 4],
            confidence: Grade::Good,
            award: false,
            comments: String::new(),
        }
    }

    fn meta(p: &str, m: &str) -> MetaReviewForm {
        MetaReviewForm {
            paper: PaperId::new(p).unwrap(),
            metareviewer: MetaReviewerId::new(m).unwrap(),
            recommendation: Recommendation::Accept,
        }
    }

    #[test]
    fn four_reviews_and_meta_is_clean() {
        let reviews = ["r1", "r2", "r3", "r4"].map(|r| review("p1", r)).to_vec();
        let report = validate(&LoadedReviews::from_records(reviews, vec![meta("p1", "ac")]));
        assert!(report.findings.is_empty());
        assert_eq!(report.mean_reviews_per_paper, 4.0);
        assert_eq!(report.reviews_per_paper.get(&4), Some(&1));
    }

    #[test]
    fn single_review_is_below_minimum() {
        let report = validate(&LoadedReviews::from_records(vec![review("p1", "r1")], vec![meta("p1", "ac")]));
        assert_eq!(report.findings.len(), 1);
        assert!(report.findings[0].describe().contains("below minimum reviews"));
    }

    #[test]
    fn duplicate_row_is_reported() {
        let reviews = vec![review("p1", "r1"), review("p1", "r1"), review("p1", "r2")];
        let report = validate(&LoadedReviews::from_records(reviews, vec![meta("p1", "ac")]));
        assert!(report.has_duplicates());
        assert!(report.findings[0].describe().contains("duplicate assignment"));
    }

    #[test]
    fn missing_meta_and_meta_only_papers() {
        let reviews = vec![review("p1", "r1"), review("p1", "r2")];
        let report = validate(&LoadedReviews::from_records(reviews, vec![meta("p2", "ac")]));
        assert_eq!(report.papers, 2);
        assert_eq!(report.mean_reviews_per_paper, 1.0);
        assert!(report.findings.contains(&Finding::MissingMetaReview { paper: PaperId::new("p1").unwrap() }));
        assert!(report
            .findings
            .contains(&Finding::BelowMinimumReviews { paper: PaperId::new("p2").unwrap(), reviews: 0 }));
    }

    #[test]
    fn conflicts_are_reported() {
        let mut data = LoadedReviews::from_records(vec![review("p1", "r1"), review("p1", "r2")], vec![meta("p1", "a")]);
        data.assignments
            .conflicts
            .entry(PaperId::new("p1").unwrap())
            .or_default()
            .insert(ReviewerId::new("r2").unwrap());
        let report = validate(&data);
        assert_eq!(report.findings.len(), 1);
        assert!(matches!(report.findings[0], Finding::ConflictViolation { .. }));
    }

    #[test]
    fn counts_do_not_depend_on_row_order() {
        let mut reviews: Vec<_> = (0..30).map(|i| review(&format!("p{}", i % 7), &format!("r{}", i % 11))).collect();
        let metas: Vec<_> = (0..7).map(|i| meta(&format!("p{i}"), "ac")).collect();
        let a = validate(&LoadedReviews::from_records(reviews.clone(), metas.clone()));
        reviews.reverse();
        let b = validate(&LoadedReviews::from_records(reviews, metas));
        assert_eq!(a, b);
    }
}
