//! Review dequantization.
//!
//! Per paper, the dequantized scores `x` minimize
//!
//! ```text
//! Σ (x_r − mean(x))² + λ Σ (x_r − s_r)²    subject to |x_r − s_r| ≤ h
//! ```
//!
//! Without the box the minimizer is `x_r = (mean(s) + λ s_r) / (1 + λ)`, which
//! is what [`closed_form`] returns. Clipping that point coordinate-wise
//! ([`clipped_closed_form`]) is optimal only while clipping leaves the group
//! mean unchanged. [`dequantize`] solves the boxed problem exactly: for a
//! fixed mean `m` each coordinate is the clipped 1-D minimizer
//! `clip((m + λ s_r)/(1 + λ))`, and the optimal `m` is the root of the
//! nondecreasing piecewise-linear map `m − mean(x(m))`, found from its
//! breakpoints. When nothing clips the root is `mean(s)` and both routes agree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::review_data::{PaperId, ReviewerId};
use crate::scoring::WeightedReview;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DequantError {
    #[error("regularization λ must be finite and non-negative, got {0}")]
    BadLambda(f64),
    #[error("band half-width must be finite and non-negative, got {0}")]
    BadBand(f64),
    #[error("score vectors are misaligned ({0} vs {1} entries)")]
    Misaligned(usize, usize),
}

pub const DEFAULT_LAMBDA: f64 = 2.0;
pub const DEFAULT_HALF_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DequantConfig {
    pub lambda: f64,
    pub half_width: f64,
}

impl Default for DequantConfig {
    fn default() -> Self {
        DequantConfig { lambda: DEFAULT_LAMBDA, half_width: DEFAULT_HALF_WIDTH }
    }
}

impl DequantConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        DequantConfig { lambda, ..Default::default() }
    }

    fn check(&self) -> Result<(), DequantError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(DequantError::BadLambda(self.lambda));
        }
        if !(self.half_width.is_finite() && self.half_width >= 0.0) {
            return Err(DequantError::BadBand(self.half_width));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DequantizedReview {
    pub paper: PaperId,
    pub reviewer: ReviewerId,
    pub original: f64,
    pub dequantized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaperDequant {
    pub paper: PaperId,
    pub reviews: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DequantResult {
    /// Same order as the input reviews.
    pub reviews: Vec<DequantizedReview>,
    pub papers: Vec<PaperDequant>,
    pub cost: f64,
}

impl DequantResult {
    /// The input reviews with their values replaced by the dequantized ones.
    pub fn apply(&self, reviews: &[WeightedReview]) -> Vec<WeightedReview> {
        reviews
            .iter()
            .zip(&self.reviews)
            .map(|(r, d)| WeightedReview { value: d.dequantized, ..r.clone() })
            .collect()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unconstrained minimizer for one paper's scores.
pub fn closed_form(scores: &[f64], lambda: f64) -> Vec<f64> {
    let n = scores.len() as f64;
    let total: f64 = scores.iter().sum();
    let denom = n * (1.0 + lambda);
    scores
        .iter()
        .map(|&s| (1.0 + n * lambda) / denom * s + (total - s) / denom)
        .collect()
}

/// [`closed_form`] clipped coordinate-wise into the band.
pub fn clipped_closed_form(scores: &[f64], cfg: &DequantConfig) -> Vec<f64> {
    let h = cfg.half_width;
    closed_form(scores, cfg.lambda)
        .into_iter()
        .zip(scores)
        .map(|(y, &s)| y.clamp(s - h, s + h))
        .collect()
}

fn coords_at<'a>(m: f64, scores: &'a [f64], cfg: &DequantConfig) -> impl Iterator<Item = f64> + 'a {
    let (lambda, h) = (cfg.lambda, cfg.half_width);
    scores.iter().map(move |&s| ((m + lambda * s) / (1.0 + lambda)).clamp(s - h, s + h))
}

fn gap(m: f64, scores: &[f64], cfg: &DequantConfig) -> f64 {
    m - coords_at(m, scores, cfg).sum::<f64>() / scores.len() as f64
}

/// Exact boxed minimizer for one paper's scores.
pub fn dequantize_group(scores: &[f64], cfg: &DequantConfig) -> Result<Vec<f64>, DequantError> {
    cfg.check()?;
    if scores.len() <= 1 {
        return Ok(scores.to_vec());
    }
    let spread = cfg.half_width * (1.0 + cfg.lambda);
    let mut knots: Vec<f64> = scores.iter().flat_map(|&s| [s - spread, s + spread]).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let gaps: Vec<f64> = knots.iter().map(|&b| gap(b, scores, cfg)).collect();
    let last = knots.len() - 1;

    // the gap has unit slope outside the knots, where every coordinate is clipped
    let lo = match gaps.iter().position(|&g| g >= 0.0) {
        Some(0) => knots[0] - gaps[0],
        Some(i) => interpolate_root(knots[i - 1], gaps[i - 1], knots[i], gaps[i]),
        None => knots[last] - gaps[last],
    };
    let hi = match gaps.iter().rposition(|&g| g <= 0.0) {
        None => knots[0] - gaps[0],
        Some(j) if j == last => knots[last] - gaps[last],
        Some(j) => interpolate_root(knots[j], gaps[j], knots[j + 1], gaps[j + 1]),
    };
    // λ = 0 can leave a whole interval of optimal means; stay nearest the raw mean
    let m = if lo <= hi { mean(scores).clamp(lo, hi) } else { 0.5 * (lo + hi) };
    Ok(coords_at(m, scores, cfg).collect())
}

fn interpolate_root(x0: f64, g0: f64, x1: f64, g1: f64) -> f64 {
    if g1 == g0 {
        x0
    } else {
        x0 - g0 * (x1 - x0) / (g1 - g0)
    }
}

/// Objective value for one paper.
pub fn group_cost(hat: &[f64], scores: &[f64], lambda: f64) -> Result<f64, DequantError> {
    if hat.len() != scores.len() {
        return Err(DequantError::Misaligned(hat.len(), scores.len()));
    }
    if hat.is_empty() {
        return Ok(0.0);
    }
    let m = mean(hat);
    let spread: f64 = hat.iter().map(|x| (x - m).powi(2)).sum();
    let fidelity: f64 = hat.iter().zip(scores).map(|(x, s)| (x - s).powi(2)).sum();
    Ok(spread + lambda * fidelity)
}

/// Total objective over all papers; `hat` is aligned with `reviews`.
pub fn dq_cost(hat: &[f64], reviews: &[WeightedReview], lambda: f64) -> Result<f64, DequantError> {
    if hat.len() != reviews.len() {
        return Err(DequantError::Misaligned(hat.len(), reviews.len()));
    }
    let mut groups: BTreeMap<&PaperId, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (x, r) in hat.iter().zip(reviews) {
        let g = groups.entry(&r.paper).or_default();
        g.0.push(*x);
        g.1.push(r.value);
    }
    groups.values().map(|(h, s)| group_cost(h, s, lambda)).sum()
}

/// Dequantizes every paper independently.
pub fn dequantize(reviews: &[WeightedReview], cfg: &DequantConfig) -> Result<DequantResult, DequantError> {
    cfg.check()?;
    let mut groups: BTreeMap<&PaperId, Vec<usize>> = BTreeMap::new();
    for (i, r) in reviews.iter().enumerate() {
        groups.entry(&r.paper).or_default().push(i);
    }
    let mut values = vec![0.0; reviews.len()];
    let mut papers = Vec::with_capacity(groups.len());
    let mut cost = 0.0;
    for (paper, idx) in &groups {
        let scores: Vec<f64> = idx.iter().map(|&i| reviews[i].value).collect();
        let hat = dequantize_group(&scores, cfg)?;
        cost += group_cost(&hat, &scores, cfg.lambda)?;
        for (&i, &x) in idx.iter().zip(&hat) {
            values[i] = x;
        }
        papers.push(PaperDequant { paper: (*paper).clone(), reviews: idx.len(), mean: mean(&hat) });
    }
    let reviews = reviews
        .iter()
        .zip(values)
        .map(|(r, x)| DequantizedReview {
            paper: r.paper.clone(),
            reviewer: r.reviewer.clone(),
            original: r.value,
            dequantized: x,
        })
        .collect();
    Ok(DequantResult { reviews, papers, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(lambda: f64) -> DequantConfig {
        DequantConfig::with_lambda(lambda)
    }

    /// Exhaustive search over the feasible box on a `step` grid.
    fn grid_min(scores: &[f64], lambda: f64, h: f64, step: f64) -> f64 {
        let k = (2.0 * h / step).round() as usize;
        let offsets: Vec<f64> = (0..=k).map(|i| -h + i as f64 * step).collect();
        let mut idx = vec![0usize; scores.len()];
        let mut best = f64::INFINITY;
        let mut x = vec![0.0; scores.len()];
        loop {
            for (j, &i) in idx.iter().enumerate() {
                x[j] = scores[j] + offsets[i];
            }
            best = best.min(group_cost(&x, scores, lambda).unwrap());
            let mut j = 0;
            loop {
                if j == idx.len() {
                    return best;
                }
                idx[j] += 1;
                if idx[j] <= k {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    #[test]
    fn singleton_is_fixed() {
        for lambda in [0.0, 0.5, 2.0, 1e6] {
            assert_eq!(dequantize_group(&[3.5], &cfg(lambda)).unwrap(), vec![3.5]);
            assert_eq!(closed_form(&[3.5], lambda), vec![3.5]);
        }
    }

    #[test]
    fn lambda_zero_two_reviews() {
        assert_eq!(closed_form(&[2.0, 3.0], 0.0), vec![2.5, 2.5]);
        assert_eq!(dequantize_group(&[2.0, 3.0], &cfg(0.0)).unwrap(), vec![2.25, 2.75]);
        assert_eq!(clipped_closed_form(&[2.0, 3.0], &cfg(0.0)), vec![2.25, 2.75]);
    }

    #[test]
    fn huge_lambda_keeps_scores() {
        let s = [-3.0, 0.5, 4.0, 8.0];
        for (x, y) in dequantize_group(&s, &cfg(1e6)).unwrap().iter().zip(&s) {
            assert!((x - y).abs() < 1e-4);
        }
    }

    #[test]
    fn cost_examples() {
        assert_eq!(group_cost(&[1.0, 1.0], &[1.0, 1.0], 3.0).unwrap(), 0.0);
        assert_eq!(group_cost(&[2.0, 3.0], &[2.0, 3.0], 1.0).unwrap(), 0.5);
        assert!(matches!(group_cost(&[1.0], &[1.0, 2.0], 1.0), Err(DequantError::Misaligned(1, 2))));
    }

    #[test]
    fn negative_lambda_rejected() {
        assert_eq!(dequantize_group(&[1.0, 2.0], &cfg(-1.0)), Err(DequantError::BadLambda(-1.0)));
    }

    #[test]
    fn exact_solver_beats_coordinate_clipping_when_mean_shifts() {
        // the unconstrained point clips the outlier, which moves the optimal mean
        let s = [0.0, 0.5, 0.5, 3.0];
        let c = cfg(4.0);
        let exact = dequantize_group(&s, &c).unwrap();
        let clipped = clipped_closed_form(&s, &c);
        let (ce, cc) = (group_cost(&exact, &s, 4.0).unwrap(), group_cost(&clipped, &s, 4.0).unwrap());
        assert!(ce < cc - 1e-4, "exact {ce} clipped {cc}");
        assert!(ce <= grid_min(&s, 4.0, 0.25, 0.01) + 1e-9);
    }

    #[test]
    fn matches_closed_form_when_nothing_clips() {
        let s = [1.0, 1.5, 1.5, 2.0];
        let exact = dequantize_group(&s, &cfg(2.0)).unwrap();
        for (x, y) in exact.iter().zip(closed_form(&s, 2.0)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_oracle_small_instances() {
        let cases: [(&[f64], f64); 5] = [
            (&[2.0, 3.0], 1.0),
            (&[-1.0, 0.5, 4.0], 0.5),
            (&[0.0, 0.0, 2.0], 2.0),
            (&[1.5, 1.5], 0.0),
            (&[-7.0, 8.0, 0.0, 0.5], 3.0),
        ];
        for (s, lambda) in cases {
            let x = dequantize_group(s, &cfg(lambda)).unwrap();
            let c = group_cost(&x, s, lambda).unwrap();
            let step = if s.len() == 4 { 0.05 } else { 0.01 };
            assert!(c <= grid_min(s, lambda, 0.25, step) + 1e-9, "{s:?} λ={lambda}");
        }
    }

    #[test]
    fn papers_are_independent() {
        let w = |p: &str, r: &str, v: f64| WeightedReview {
            paper: PaperId::new(p).unwrap(),
            reviewer: ReviewerId::new(r).unwrap(),
            value: v,
            weight: 1.0,
        };
        let reviews = vec![w("a", "1", 2.0), w("b", "1", -1.0), w("a", "2", 3.0), w("b", "3", 4.0), w("a", "3", 2.5)];
        let res = dequantize(&reviews, &DequantConfig::default()).unwrap();
        let mut shuffled = reviews.clone();
        shuffled.rotate_left(2);
        let res2 = dequantize(&shuffled, &DequantConfig::default()).unwrap();
        for r in &res.reviews {
            let twin = res2.reviews.iter().find(|q| q.paper == r.paper && q.reviewer == r.reviewer).unwrap();
            assert!((twin.dequantized - r.dequantized).abs() < 1e-12);
        }
        assert!((res.cost - res2.cost).abs() < 1e-12);
        let hat: Vec<f64> = res.reviews.iter().map(|r| r.dequantized).collect();
        assert!((dq_cost(&hat, &reviews, 2.0).unwrap() - res.cost).abs() < 1e-12);
        assert_eq!(res.papers.iter().map(|p| p.reviews).collect::<Vec<_>>(), vec![3, 2]);
    }

    fn lattice_group() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((-14i32..=16).prop_map(|h| h as f64 / 2.0), 1..7)
    }

    proptest! {
        #[test]
        fn always_feasible(s in lattice_group(), lambda in 0.0f64..20.0) {
            let x = dequantize_group(&s, &cfg(lambda)).unwrap();
            for (a, b) in x.iter().zip(&s) {
                prop_assert!((a - b).abs() <= 0.25 + 1e-12);
            }
        }

        #[test]
        fn kkt_conditions_hold(s in lattice_group(), lambda in 0.01f64..20.0) {
            let x = dequantize_group(&s, &cfg(lambda)).unwrap();
            let m = mean(&x);
            for (xi, si) in x.iter().zip(&s) {
                let grad = 2.0 * (xi - m) + 2.0 * lambda * (xi - si);
                let at_lo = (xi - (si - 0.25)).abs() < 1e-12;
                let at_hi = (xi - (si + 0.25)).abs() < 1e-12;
                prop_assert!(grad.abs() < 1e-9 || (at_lo && grad > 0.0) || (at_hi && grad < 0.0),
                    "grad {} at {} (s={})", grad, xi, si);
            }
        }

        #[test]
        fn shrinkage_is_monotone_in_lambda(s in lattice_group(), l1 in 0.0f64..10.0, dl in 0.0f64..10.0) {
            let dist = |lambda: f64| -> f64 {
                let x = dequantize_group(&s, &cfg(lambda)).unwrap();
                x.iter().zip(&s).map(|(a, b)| (a - b).powi(2)).sum()
            };
            prop_assert!(dist(l1 + dl) <= dist(l1) + 1e-12);
        }
    }
}
