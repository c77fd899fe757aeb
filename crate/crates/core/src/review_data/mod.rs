//! Typed review records and their ingestion.
//!
//! Exports are parsed row by row. A row either becomes one typed record or
//! one [`Rejection`]; nothing is dropped silently. Structural problems with a
//! whole file (unreadable, unknown or missing columns) abort the load instead.

mod io;
pub mod likert;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use io::{
    load_reviews, parse_meta_csv, parse_meta_json, parse_reviews_csv, parse_reviews_json, write_meta_csv,
    write_meta_json, write_reviews_csv, write_reviews_json, Format, LoadedReviews, Parsed,
};
pub use likert::{encode_likert, Grade, HalfSteps, Recommendation, Scale, UnknownLabel};
pub use validate::{validate, Finding, ValidationReport, MIN_REVIEWS_PER_PAPER};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("empty identifier")]
    EmptyId,
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Result<Self, DataError> {
                let id = id.into();
                if id.trim().is_empty() {
                    Err(DataError::EmptyId)
                } else {
                    Ok($name(id))
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = DataError;
            fn try_from(value: String) -> Result<Self, DataError> {
                $name::new(value)
            }
        }

        impl From<$name> for String {
            fn from(value: $name) -> String {
                value.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

string_id!(
    /// Submission identifier.
    PaperId
);
string_id!(
    /// Reviewer identifier.
    ReviewerId
);
string_id!(
    /// Area chair (meta-reviewer) identifier.
    MetaReviewerId
);

/// One reviewer's structured evaluation of one paper.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewForm {
    pub paper: PaperId,
    pub reviewer: ReviewerId,
    pub recommendation: Recommendation,
    /// Relevance, technical quality, novelty, presentation.
    pub criteria: [Grade; 4],
    pub confidence: Grade,
    pub award: bool,
    pub comments: String,
}

impl ReviewForm {
    pub fn confidence_weight(&self) -> f64 {
        self.confidence.confidence_weight()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaReviewForm {
    pub paper: PaperId,
    pub metareviewer: MetaReviewerId,
    pub recommendation: Recommendation,
}

/// Reviewer pool a reviewer was recruited from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReviewerTag {
    /// Past-conference reviewer lists.
    Rev1,
    /// Contact author of a submission.
    Rev2,
    /// Expert volunteer.
    Rev3,
    /// Student volunteer.
    Rev4,
}

impl ReviewerTag {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw.trim().to_ascii_lowercase().replace(' ', "").as_str() {
            "rev1" => Some(ReviewerTag::Rev1),
            "rev2" => Some(ReviewerTag::Rev2),
            "rev3" => Some(ReviewerTag::Rev3),
            "rev4" => Some(ReviewerTag::Rev4),
            _ => None,
        }
    }

    pub fn is_author_reviewer(self) -> bool {
        self == ReviewerTag::Rev2
    }
}

impl fmt::Display for ReviewerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Reviewer–paper and meta-reviewer–paper pairings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentSet {
    pub review_pairs: BTreeSet<(PaperId, ReviewerId)>,
    pub meta_pairs: BTreeSet<(PaperId, MetaReviewerId)>,
    pub tags: BTreeMap<ReviewerId, ReviewerTag>,
    pub conflicts: BTreeMap<PaperId, BTreeSet<ReviewerId>>,
}

impl AssignmentSet {
    pub fn from_records(reviews: &[ReviewForm], metas: &[MetaReviewForm]) -> Self {
        AssignmentSet {
            review_pairs: reviews.iter().map(|r| (r.paper.clone(), r.reviewer.clone())).collect(),
            meta_pairs: metas.iter().map(|m| (m.paper.clone(), m.metareviewer.clone())).collect(),
            ..Default::default()
        }
    }

    pub fn is_conflicted(&self, paper: &PaperId, reviewer: &ReviewerId) -> bool {
        self.conflicts.get(paper).is_some_and(|c| c.contains(reviewer))
    }

    pub fn papers(&self) -> BTreeSet<&PaperId> {
        self.review_pairs.iter().map(|(p, _)| p).chain(self.meta_pairs.iter().map(|(p, _)| p)).collect()
    }
}

/// A row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub source: RecordKind,
    /// 1-based data row (CSV, header excluded) or array index + 1 (JSON).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Review,
    Meta,
}
