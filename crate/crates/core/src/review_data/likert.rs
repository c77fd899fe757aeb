//! Likert label scales and their numeric weights.
//!
//! Three scales are used by the review form:
//!
//! | scale          | labels | weights                         |
//! |----------------|--------|---------------------------------|
//! | recommendation | 7      | +3 … −3 in unit steps           |
//! | criterion      | 5      | +1.0 … −1.0 in steps of 0.5     |
//! | confidence     | 5      | 1.2 … 0.8 in steps of 0.1       |
//!
//! Recommendation and criterion weights live on the half-integer lattice and
//! are kept exact as [`HalfSteps`]. Confidence weights are only ever used as
//! aggregation weights, so they are exposed as `f64`.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// An exact multiple of 0.5, stored as the number of half steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct HalfSteps(pub i32);

impl HalfSteps {
    pub const ZERO: HalfSteps = HalfSteps(0);

    pub fn from_units(units: i32) -> Self {
        HalfSteps(units * 2)
    }

    /// Returns `None` unless `value` is an exact multiple of 0.5.
    pub fn from_f64(value: f64) -> Option<Self> {
        let doubled = value * 2.0;
        if doubled.is_finite() && doubled.fract() == 0.0 && doubled.abs() <= i32::MAX as f64 {
            Some(HalfSteps(doubled as i32))
        } else {
            None
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl Add for HalfSteps {
    type Output = HalfSteps;
    fn add(self, rhs: HalfSteps) -> HalfSteps {
        HalfSteps(self.0 + rhs.0)
    }
}

impl AddAssign for HalfSteps {
    fn add_assign(&mut self, rhs: HalfSteps) {
        self.0 += rhs.0;
    }
}

impl fmt::Display for HalfSteps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

/// Which label set a string is interpreted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scale {
    Recommendation,
    Criterion,
    Confidence,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Scale::Recommendation => "recommendation",
            Scale::Criterion => "criterion",
            Scale::Confidence => "confidence",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {label:?} for {scale} scale")]
pub struct UnknownLabel {
    pub label: String,
    pub scale: Scale,
}

/// Overall recommendation on the symmetric 7-point scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Recommendation {
    StrongReject,
    Reject,
    WeakReject,
    Borderline,
    WeakAccept,
    Accept,
    StrongAccept,
}

impl Recommendation {
    pub const ALL: [Recommendation; 7] = [
        Recommendation::StrongAccept,
        Recommendation::Accept,
        Recommendation::WeakAccept,
        Recommendation::Borderline,
        Recommendation::WeakReject,
        Recommendation::Reject,
        Recommendation::StrongReject,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Recommendation::StrongAccept => "Strong Accept",
            Recommendation::Accept => "Accept",
            Recommendation::WeakAccept => "Weak Accept",
            Recommendation::Borderline => "Borderline",
            Recommendation::WeakReject => "Weak Reject",
            Recommendation::Reject => "Reject",
            Recommendation::StrongReject => "Strong Reject",
        }
    }

    pub fn weight(self) -> HalfSteps {
        let units = match self {
            Recommendation::StrongAccept => 3,
            Recommendation::Accept => 2,
            Recommendation::WeakAccept => 1,
            Recommendation::Borderline => 0,
            Recommendation::WeakReject => -1,
            Recommendation::Reject => -2,
            Recommendation::StrongReject => -3,
        };
        HalfSteps::from_units(units)
    }

    pub fn parse(label: &str) -> Result<Self, UnknownLabel> {
        find_label(&Self::ALL, label, Self::label).ok_or_else(|| UnknownLabel {
            label: label.to_string(),
            scale: Scale::Recommendation,
        })
    }
}

/// Five-level grade shared by the quality criteria and the confidence item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grade {
    Poor,
    Fair,
    Good,
    VeryGood,
    Excellent,
}

impl Grade {
    pub const ALL: [Grade; 5] = [Grade::Excellent, Grade::VeryGood, Grade::Good, Grade::Fair, Grade::Poor];

    pub fn label(self) -> &'static str {
        match self {
            Grade::Excellent => "Excellent",
            Grade::VeryGood => "Very good",
            Grade::Good => "Good",
            Grade::Fair => "Fair",
            Grade::Poor => "Poor",
        }
    }

    /// Weight when used as one of the four quality criteria.
    pub fn criterion_weight(self) -> HalfSteps {
        HalfSteps(match self {
            Grade::Excellent => 2,
            Grade::VeryGood => 1,
            Grade::Good => 0,
            Grade::Fair => -1,
            Grade::Poor => -2,
        })
    }

    /// Weight when used as the reviewer's confidence.
    pub fn confidence_weight(self) -> f64 {
        // tenths, so the table values are reproduced exactly
        let tenths = match self {
            Grade::Excellent => 12,
            Grade::VeryGood => 11,
            Grade::Good => 10,
            Grade::Fair => 9,
            Grade::Poor => 8,
        };
        f64::from(tenths) / 10.0
    }

    pub fn parse(label: &str, scale: Scale) -> Result<Self, UnknownLabel> {
        find_label(&Self::ALL, label, Self::label).ok_or_else(|| UnknownLabel {
            label: label.to_string(),
            scale,
        })
    }
}

fn find_label<T: Copy>(all: &[T], raw: &str, label: fn(T) -> &'static str) -> Option<T> {
    let wanted = raw.trim();
    all.iter().copied().find(|&v| label(v).eq_ignore_ascii_case(wanted))
}

/// Numeric weight for `label` on `scale`.
pub fn encode_likert(label: &str, scale: Scale) -> Result<f64, UnknownLabel> {
    match scale {
        Scale::Recommendation => Recommendation::parse(label).map(|r| r.weight().as_f64()),
        Scale::Criterion => Grade::parse(label, scale).map(|g| g.criterion_weight().as_f64()),
        Scale::Confidence => Grade::parse(label, scale).map(Grade::confidence_weight),
    }
}
