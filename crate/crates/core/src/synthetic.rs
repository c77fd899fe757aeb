//! Seeded synthetic instances with planted paper quality and rater bias.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::assignment::{AssignmentConstraints, AssignmentInstance, SimilaritySources};
use crate::calibration::{CalibrationError, CalibrationInputs};
use crate::review_data::{
    Grade, MetaReviewForm, MetaReviewerId, PaperId, Recommendation, ReviewForm, ReviewerId, ReviewerTag,
};

pub fn paper_id(i: usize) -> PaperId {
    PaperId::new(format!("P{i:05}")).expect("non-empty")
}

pub fn reviewer_id(i: usize) -> ReviewerId {
    ReviewerId::new(format!("R{i:05}")).expect("non-empty")
}

pub fn metareviewer_id(i: usize) -> MetaReviewerId {
    MetaReviewerId::new(format!("M{i:04}")).expect("non-empty")
}

/// `s = q_paper + b_rater + noise` with Gaussian components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub papers: usize,
    pub raters: usize,
    pub per_paper: usize,
    pub quality_sd: f64,
    pub bias_sd: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig { papers: 200, raters: 50, per_paper: 4, quality_sd: 1.0, bias_sd: 1.0, noise_sd: 0.3, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub inputs: CalibrationInputs,
    /// Indexed like `inputs.papers`.
    pub quality: Vec<f64>,
    /// Indexed like `inputs.raters`.
    pub bias: Vec<f64>,
}

/// Each paper gets `per_paper` distinct raters chosen uniformly.
pub fn planted(cfg: &PlantedConfig) -> Result<PlantedInstance, CalibrationError> {
    assert!(cfg.per_paper <= cfg.raters, "more raters per paper than raters");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let quality: Vec<f64> = (0..cfg.papers).map(|_| gauss(&mut rng, cfg.quality_sd)).collect();
    let bias: Vec<f64> = (0..cfg.raters).map(|_| gauss(&mut rng, cfg.bias_sd)).collect();
    let mut entries = Vec::with_capacity(cfg.papers * cfg.per_paper);
    let mut used = vec![false; cfg.raters];
    for (p, q) in quality.iter().enumerate() {
        for r in sample(&mut rng, cfg.raters, cfg.per_paper) {
            used[r] = true;
            let s = q + bias[r] + gauss(&mut rng, cfg.noise_sd);
            entries.push((paper_id(p), reviewer_id(r).to_string(), s, 1.0));
        }
    }
    let inputs = CalibrationInputs::new(entries)?;
    // ids are zero-padded, so sorted order is generation order; drop raters never drawn
    let bias = bias.into_iter().zip(used).filter(|(_, u)| *u).map(|(b, _)| b).collect();
    Ok(PlantedInstance { inputs, quality, bias })
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sd * z
}

/// Reviews-per-paper counts reproducing a conference's load profile:
/// `papers` counts drawn from `mix` as (reviews, number of papers).
pub fn review_counts(mix: &[(usize, usize)]) -> Vec<usize> {
    mix.iter().flat_map(|&(k, n)| std::iter::repeat_n(k, n)).collect()
}

/// Review and meta-review forms derived from latent quality.
#[derive(Debug, Clone)]
pub struct FormFixture {
    pub reviews: Vec<ReviewForm>,
    pub metas: Vec<MetaReviewForm>,
    /// Latent quality per paper, indexed by paper number.
    pub quality: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormConfig {
    /// Reviews per paper.
    pub counts: Vec<usize>,
    pub reviewers: usize,
    pub metareviewers: usize,
    pub bias_sd: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl FormConfig {
    pub fn uniform(papers: usize, per_paper: usize, reviewers: usize, metareviewers: usize, seed: u64) -> Self {
        FormConfig { counts: vec![per_paper; papers], reviewers, metareviewers, bias_sd: 0.5, noise_sd: 0.5, seed }
    }
}

/// Latent values are on the recommendation scale (roughly −3..3); criteria
/// and confidence are noisy functions of the same latent value.
pub fn forms(cfg: &FormConfig) -> FormFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let quality_dist = Normal::new(0.0, 1.2).expect("valid sd");
    let quality: Vec<f64> = cfg.counts.iter().map(|_| quality_dist.sample(&mut rng)).collect();
    let bias: Vec<f64> = (0..cfg.reviewers).map(|_| gauss(&mut rng, cfg.bias_sd)).collect();
    let meta_bias: Vec<f64> = (0..cfg.metareviewers).map(|_| gauss(&mut rng, cfg.bias_sd)).collect();

    let mut reviews = Vec::new();
    let mut metas = Vec::new();
    for (p, (&k, &q)) in cfg.counts.iter().zip(&quality).enumerate() {
        for r in sample(&mut rng, cfg.reviewers, k.min(cfg.reviewers)) {
            let z = q + bias[r] + gauss(&mut rng, cfg.noise_sd);
            let criteria = std::array::from_fn(|_| grade((z + gauss(&mut rng, 0.7)) / 1.5));
            reviews.push(ReviewForm {
                paper: paper_id(p),
                reviewer: reviewer_id(r),
                recommendation: recommendation(z),
                criteria,
                confidence: grade(gauss(&mut rng, 1.0)),
                award: z > 2.8 && rng.gen_bool(0.5),
                comments: String::new(),
            });
        }
        if cfg.metareviewers > 0 {
            // contiguous blocks, so every AC handles about P/M papers
            let m = p * cfg.metareviewers / cfg.counts.len();
            metas.push(MetaReviewForm {
                paper: paper_id(p),
                metareviewer: metareviewer_id(m),
                recommendation: recommendation(q + meta_bias[m] + gauss(&mut rng, cfg.noise_sd)),
            });
        }
    }
    FormFixture { reviews, metas, quality }
}

fn recommendation(z: f64) -> Recommendation {
    // ALL runs from strong accept (+3) down to strong reject (−3)
    let step = z.round().clamp(-3.0, 3.0) as i32;
    Recommendation::ALL[(3 - step) as usize]
}

fn grade(z: f64) -> Grade {
    let step = z.round().clamp(-2.0, 2.0) as i32;
    Grade::ALL[(2 - step) as usize]
}

/// An assignment instance with a hidden feasible solution.
///
/// `reviewers` must be a multiple of 4 and at least 4. Paper `p` is planted
/// with reviewers `4p..4p+3 (mod R)` under a random relabeling; every
/// reviewer at a planted position ≡ 0 (mod 4) is an author-reviewer, so
/// each planted set has exactly one. Extra candidate pairs are added with
/// probability `density`, and a fraction of the non-planted pairs are
/// marked as conflicts. Some matching-service scores are left missing.
pub fn feasible_assignment(
    papers: usize,
    reviewers: usize,
    density: f64,
    seed: u64,
) -> (AssignmentInstance, AssignmentConstraints) {
    assert!(reviewers >= 4 && reviewers % 4 == 0, "reviewers must be a positive multiple of 4");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut relabel: Vec<usize> = (0..reviewers).collect();
    relabel.shuffle(&mut rng);
    let max_load = (4 * papers).div_ceil(reviewers) + rng.gen_range(0..2);
    let mut planted = BTreeSet::new();
    for p in 0..papers {
        for k in 0..4 {
            planted.insert((p, relabel[(4 * p + k) % reviewers]));
        }
    }
    let tags: BTreeMap<ReviewerId, ReviewerTag> = (0..reviewers)
        .map(|pos| {
            let tag = if pos % 4 == 0 { ReviewerTag::Rev2 } else { ReviewerTag::Rev1 };
            (reviewer_id(relabel[pos]), tag)
        })
        .collect();
    let mut rows = Vec::new();
    let mut conflicts = BTreeSet::new();
    for p in 0..papers {
        for r in 0..reviewers {
            let is_planted = planted.contains(&(p, r));
            if is_planted || rng.gen_bool(density) {
                let src = SimilaritySources {
                    bid: rng.gen(),
                    subject: rng.gen(),
                    tpms: rng.gen_bool(0.8).then(|| rng.gen()),
                };
                rows.push((paper_id(p), reviewer_id(r), src));
            }
            if !is_planted && rng.gen_bool(0.05) {
                conflicts.insert((paper_id(p), reviewer_id(r)));
            }
        }
    }
    let cons = AssignmentConstraints { min_reviewers: 4, max_load, max_author_reviewers: 1 };
    (AssignmentInstance::from_rows(rows, tags, conflicts), cons)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_maps_are_monotone() {
        assert_eq!(recommendation(5.0), Recommendation::StrongAccept);
        assert_eq!(recommendation(0.2), Recommendation::Borderline);
        assert_eq!(recommendation(-9.0), Recommendation::StrongReject);
        for z in -40..40 {
            let z = z as f64 / 10.0;
            assert!(recommendation(z).weight() <= recommendation(z + 0.1).weight());
            assert!(grade(z).criterion_weight() <= grade(z + 0.1).criterion_weight());
        }
    }

    #[test]
    fn planted_is_seeded_and_shaped() {
        let cfg = PlantedConfig { papers: 30, raters: 10, per_paper: 3, seed: 9, ..Default::default() };
        let a = planted(&cfg).unwrap();
        let b = planted(&cfg).unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.inputs.len(), 90);
        assert_eq!(a.quality.len(), 30);
        assert_eq!(a.bias.len(), a.inputs.n_raters());
    }

    #[test]
    fn form_fixture_counts() {
        let counts = review_counts(&[(2, 3), (4, 2)]);
        assert_eq!(counts, vec![2, 2, 2, 4, 4]);
        let fx = forms(&FormConfig { counts, ..FormConfig::uniform(0, 0, 6, 2, 1) });
        assert_eq!(fx.reviews.len(), 14);
        assert_eq!(fx.metas.len(), 5);
        assert_eq!(fx.metas[0].metareviewer.as_str(), "M0000");
        assert_eq!(fx.metas[4].metareviewer.as_str(), "M0001");
    }
}
