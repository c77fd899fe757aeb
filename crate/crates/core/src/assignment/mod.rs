//! Reviewer–paper assignment maximizing total similarity.
//!
//! Greedy construction by descending similarity, then a max-flow repair pass
//! that completes coverage whenever the constraints allow it, then a
//! replace/swap local search that only accepts strict improvements.

mod flow;
pub mod io;

pub use io::{load_instance, parse_conflicts, parse_sources, parse_tags, write_assignment_csv, write_audit_json};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::review_data::{PaperId, ReviewerId, ReviewerTag};

#[derive(Debug, thiserror::Error)]
pub enum AssignError {
    #[error("similarity weights must be non-negative and sum to 1, got {0:?}")]
    BadWeights([f64; 3]),
    #[error("similarity source {name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("minimum reviewers per paper must be at least 1")]
    BadMinimum,
    #[error("unknown reviewer tag {tag:?} for {reviewer}")]
    UnknownTag { reviewer: String, tag: String },
    #[error(transparent)]
    Data(#[from] crate::review_data::DataError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub bid: f64,
    pub tpms: f64,
    pub subject: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights { bid: 0.2, tpms: 0.3, subject: 0.5 }
    }
}

impl SimilarityWeights {
    pub fn check(&self) -> Result<(), AssignError> {
        let w = [self.bid, self.tpms, self.subject];
        if w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(AssignError::BadWeights(w));
        }
        Ok(())
    }
}

/// Per-pair inputs. A missing matching-service score is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySources {
    pub bid: f64,
    pub subject: f64,
    pub tpms: Option<f64>,
}

impl SimilaritySources {
    pub fn check(&self) -> Result<(), AssignError> {
        let mut named = vec![("bid", self.bid), ("subject_relevance", self.subject)];
        if let Some(t) = self.tpms {
            named.push(("tpms", t));
        }
        for (name, value) in named {
            if !(0.0..=1.0).contains(&value) {
                return Err(AssignError::OutOfRange { name, value });
            }
        }
        Ok(())
    }
}

/// Convex combination of the sources. Without a matching-service score its
/// weight is spread over the other two in proportion.
pub fn combined_similarity(src: &SimilaritySources, w: &SimilarityWeights) -> Result<f64, AssignError> {
    w.check()?;
    src.check()?;
    Ok(match src.tpms {
        Some(t) => w.bid * src.bid + w.tpms * t + w.subject * src.subject,
        None => {
            let rest = w.bid + w.subject;
            if rest == 0.0 {
                0.0
            } else {
                (w.bid * src.bid + w.subject * src.subject) / rest
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignmentConstraints {
    /// Reviewers each paper receives (exactly, when feasible).
    pub min_reviewers: usize,
    pub max_load: usize,
    /// Reviewers tagged as author-reviewers allowed on one paper.
    pub max_author_reviewers: usize,
}

impl Default for AssignmentConstraints {
    fn default() -> Self {
        AssignmentConstraints { min_reviewers: 4, max_load: 6, max_author_reviewers: 1 }
    }
}

impl AssignmentConstraints {
    pub fn check(&self) -> Result<(), AssignError> {
        if self.min_reviewers == 0 {
            return Err(AssignError::BadMinimum);
        }
        Ok(())
    }
}

/// Papers, reviewers and the candidate pairs between them. Only pairs with
/// similarity sources are eligible; conflicts remove pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentInstance {
    pub papers: Vec<PaperId>,
    pub reviewers: Vec<ReviewerId>,
    pub sources: BTreeMap<(PaperId, ReviewerId), SimilaritySources>,
    pub tags: BTreeMap<ReviewerId, ReviewerTag>,
    pub conflicts: BTreeSet<(PaperId, ReviewerId)>,
}

impl AssignmentInstance {
    /// Paper and reviewer lists are taken from the source rows, in first-seen order.
    pub fn from_rows(
        rows: Vec<(PaperId, ReviewerId, SimilaritySources)>,
        tags: BTreeMap<ReviewerId, ReviewerTag>,
        conflicts: BTreeSet<(PaperId, ReviewerId)>,
    ) -> Self {
        let mut inst = AssignmentInstance { tags, conflicts, ..Default::default() };
        let mut seen_p = BTreeSet::new();
        let mut seen_r = BTreeSet::new();
        for (p, r, s) in rows {
            if seen_p.insert(p.clone()) {
                inst.papers.push(p.clone());
            }
            if seen_r.insert(r.clone()) {
                inst.reviewers.push(r.clone());
            }
            inst.sources.insert((p, r), s);
        }
        inst
    }

    pub fn is_author_reviewer(&self, r: &ReviewerId) -> bool {
        self.tags.get(r).is_some_and(|t| t.is_author_reviewer())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignedPair {
    pub paper: PaperId,
    pub reviewer: ReviewerId,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shortfall {
    pub paper: PaperId,
    pub assigned: usize,
    pub required: usize,
    /// Constraint that prevents full coverage.
    pub binding: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub passed: bool,
    pub pairs: Vec<(PaperId, ReviewerId)>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentResult {
    /// Sorted by paper, then reviewer.
    pub pairs: Vec<AssignedPair>,
    pub total_similarity: f64,
    /// Total after greedy construction and repair, before local search.
    pub baseline_similarity: f64,
    pub improving_moves: usize,
    pub feasible: bool,
    pub shortfalls: Vec<Shortfall>,
    pub report: ConstraintReport,
}

pub const MIN_REVIEWERS: &str = "min reviewers";
pub const REVIEWER_LOAD: &str = "reviewer load";
pub const LONE_WOLF: &str = "lone-wolf mitigation";
pub const CONFLICT: &str = "conflict";
pub const ELIGIBLE: &str = "eligible pair";
pub const DUPLICATE: &str = "duplicate pair";

/// Index-based view shared by the construction phases.
struct Problem {
    n_papers: usize,
    n_reviewers: usize,
    /// Eligible (paper, reviewer, similarity), input order.
    candidates: Vec<(usize, usize, f64)>,
    sim: HashMap<(usize, usize), f64>,
    author: Vec<bool>,
    cons: AssignmentConstraints,
}

struct State {
    by_paper: Vec<BTreeSet<usize>>,
    load: Vec<usize>,
    authors: Vec<usize>,
}

impl State {
    fn new(pb: &Problem) -> Self {
        State { by_paper: vec![BTreeSet::new(); pb.n_papers], load: vec![0; pb.n_reviewers], authors: vec![0; pb.n_papers] }
    }

    fn add(&mut self, pb: &Problem, p: usize, r: usize) {
        self.by_paper[p].insert(r);
        self.load[r] += 1;
        self.authors[p] += usize::from(pb.author[r]);
    }

    fn remove(&mut self, pb: &Problem, p: usize, r: usize) {
        self.by_paper[p].remove(&r);
        self.load[r] -= 1;
        self.authors[p] -= usize::from(pb.author[r]);
    }

    fn total(&self, pb: &Problem) -> f64 {
        // summed in (paper, reviewer) order so totals are reproducible
        self.by_paper.iter().enumerate().flat_map(|(p, rs)| rs.iter().map(move |&r| pb.sim[&(p, r)])).sum()
    }
}

pub fn assign(
    inst: &AssignmentInstance,
    cons: &AssignmentConstraints,
    weights: &SimilarityWeights,
) -> Result<AssignmentResult, AssignError> {
    cons.check()?;
    weights.check()?;
    let p_index: HashMap<&PaperId, usize> = inst.papers.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let r_index: HashMap<&ReviewerId, usize> = inst.reviewers.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let eligible: Vec<(&(PaperId, ReviewerId), &SimilaritySources)> =
        inst.sources.iter().filter(|(k, _)| !inst.conflicts.contains(k)).collect();
    let scored: Vec<f64> =
        eligible.par_iter().map(|(_, s)| combined_similarity(s, weights)).collect::<Result<_, _>>()?;
    let mut candidates = Vec::with_capacity(eligible.len());
    for (((p, r), _), sim) in eligible.iter().zip(scored) {
        if let (Some(&pi), Some(&ri)) = (p_index.get(p), r_index.get(r)) {
            candidates.push((pi, ri, sim));
        }
    }
    candidates.sort_by_key(|&(p, r, _)| (p, r));
    let pb = Problem {
        n_papers: inst.papers.len(),
        n_reviewers: inst.reviewers.len(),
        sim: candidates.iter().map(|&(p, r, s)| ((p, r), s)).collect(),
        candidates,
        author: inst.reviewers.iter().map(|r| inst.is_author_reviewer(r)).collect(),
        cons: *cons,
    };

    let mut state = greedy(&pb);
    flow::repair(&pb, &mut state);
    let baseline_similarity = state.total(&pb);
    let improving_moves = local_search(&pb, &mut state);

    let mut pairs = Vec::new();
    for (p, rs) in state.by_paper.iter().enumerate() {
        for &r in rs {
            pairs.push(AssignedPair {
                paper: inst.papers[p].clone(),
                reviewer: inst.reviewers[r].clone(),
                similarity: pb.sim[&(p, r)],
            });
        }
    }
    pairs.sort_by(|a, b| (&a.paper, &a.reviewer).cmp(&(&b.paper, &b.reviewer)));
    let shortfalls = shortfalls(&pb, &state, inst);
    let report = check_constraints(&pairs, inst, cons);
    Ok(AssignmentResult {
        total_similarity: state.total(&pb),
        pairs,
        baseline_similarity,
        improving_moves,
        feasible: shortfalls.is_empty(),
        shortfalls,
        report,
    })
}

fn greedy(pb: &Problem) -> State {
    let mut order: Vec<usize> = (0..pb.candidates.len()).collect();
    // stable sort keeps input order among equal similarities
    order.sort_by(|&a, &b| pb.candidates[b].2.total_cmp(&pb.candidates[a].2));
    let mut st = State::new(pb);
    for i in order {
        let (p, r, _) = pb.candidates[i];
        if st.by_paper[p].len() < pb.cons.min_reviewers
            && st.load[r] < pb.cons.max_load
            && (!pb.author[r] || st.authors[p] < pb.cons.max_author_reviewers)
        {
            st.add(pb, p, r);
        }
    }
    st
}

const MIN_GAIN: f64 = 1e-12;

/// First-improvement replace and swap moves until none improves the total.
fn local_search(pb: &Problem, st: &mut State) -> usize {
    let mut by_paper_candidates: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pb.n_papers];
    for &(p, r, s) in &pb.candidates {
        by_paper_candidates[p].push((r, s));
    }
    let author_ok = |st: &State, p: usize, out: usize, inn: usize| {
        let count = st.authors[p] - usize::from(pb.author[out]) + usize::from(pb.author[inn]);
        count <= pb.cons.max_author_reviewers
    };
    let mut moves = 0;
    loop {
        let mut improved = false;
        // replace (p, r) by (p, r') for a reviewer with spare load
        for p in 0..pb.n_papers {
            let current: Vec<usize> = st.by_paper[p].iter().copied().collect();
            for r in current {
                let s_old = pb.sim[&(p, r)];
                let best = by_paper_candidates[p]
                    .iter()
                    .filter(|&&(r2, s2)| {
                        s2 > s_old + MIN_GAIN
                            && !st.by_paper[p].contains(&r2)
                            && st.load[r2] < pb.cons.max_load
                            && author_ok(st, p, r, r2)
                    })
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
                if let Some(&(r2, _)) = best {
                    st.remove(pb, p, r);
                    st.add(pb, p, r2);
                    moves += 1;
                    improved = true;
                }
            }
        }
        // swap reviewers between two papers
        let pairs: Vec<(usize, usize)> =
            st.by_paper.iter().enumerate().flat_map(|(p, rs)| rs.iter().map(move |&r| (p, r))).collect();
        for i in 0..pairs.len() {
            for j in i + 1..pairs.len() {
                let ((p1, r1), (p2, r2)) = (pairs[i], pairs[j]);
                if p1 == p2 || r1 == r2 {
                    continue;
                }
                let (Some(&s12), Some(&s21)) = (pb.sim.get(&(p1, r2)), pb.sim.get(&(p2, r1))) else {
                    continue;
                };
                let gain = s12 + s21 - pb.sim[&(p1, r1)] - pb.sim[&(p2, r2)];
                if gain > MIN_GAIN
                    && st.by_paper[p1].contains(&r1)
                    && st.by_paper[p2].contains(&r2)
                    && !st.by_paper[p1].contains(&r2)
                    && !st.by_paper[p2].contains(&r1)
                    && author_ok(st, p1, r1, r2)
                    && author_ok(st, p2, r2, r1)
                {
                    st.remove(pb, p1, r1);
                    st.remove(pb, p2, r2);
                    st.add(pb, p1, r2);
                    st.add(pb, p2, r1);
                    moves += 1;
                    improved = true;
                }
            }
        }
        if !improved {
            return moves;
        }
    }
}

fn shortfalls(pb: &Problem, st: &State, inst: &AssignmentInstance) -> Vec<Shortfall> {
    let need = pb.cons.min_reviewers;
    let mut eligible = vec![(0usize, 0usize); pb.n_papers];
    for &(p, r, _) in &pb.candidates {
        if pb.author[r] {
            eligible[p].1 += 1;
        } else {
            eligible[p].0 += 1;
        }
    }
    (0..pb.n_papers)
        .filter(|&p| st.by_paper[p].len() < need)
        .map(|p| {
            let (plain, authors) = eligible[p];
            let binding = if plain + authors < need {
                format!("eligible reviewers: only {} non-conflicted candidates", plain + authors)
            } else if plain + authors.min(pb.cons.max_author_reviewers) < need {
                format!(
                    "{LONE_WOLF}: {plain} candidates plus at most {} author-reviewer(s)",
                    pb.cons.max_author_reviewers
                )
            } else {
                format!("{REVIEWER_LOAD}: candidates are at their limit of {}", pb.cons.max_load)
            };
            Shortfall { paper: inst.papers[p].clone(), assigned: st.by_paper[p].len(), required: need, binding }
        })
        .collect()
}

/// Audits an assignment against every hard constraint.
pub fn check_constraints(
    pairs: &[AssignedPair],
    inst: &AssignmentInstance,
    cons: &AssignmentConstraints,
) -> ConstraintReport {
    let mut by_paper: BTreeMap<&PaperId, Vec<&ReviewerId>> = inst.papers.iter().map(|p| (p, Vec::new())).collect();
    let mut load: BTreeMap<&ReviewerId, Vec<&PaperId>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut duplicates = Vec::new();
    let mut conflicts = Vec::new();
    let mut ineligible = Vec::new();
    for a in pairs {
        let key = (a.paper.clone(), a.reviewer.clone());
        if !seen.insert(key.clone()) {
            duplicates.push(key.clone());
        }
        if inst.conflicts.contains(&key) {
            conflicts.push(key.clone());
        }
        if !inst.sources.contains_key(&key) {
            ineligible.push(key);
        }
        by_paper.entry(&a.paper).or_default().push(&a.reviewer);
        load.entry(&a.reviewer).or_default().push(&a.paper);
    }

    let mut min_notes = Vec::new();
    let mut wolf_pairs = Vec::new();
    for (p, rs) in &by_paper {
        if rs.len() < cons.min_reviewers {
            min_notes.push(format!("{p}: {} of {}", rs.len(), cons.min_reviewers));
        }
        let authors: Vec<&&ReviewerId> = rs.iter().filter(|r| inst.is_author_reviewer(r)).collect();
        if authors.len() > cons.max_author_reviewers {
            wolf_pairs.extend(authors.into_iter().map(|r| ((*p).clone(), (*r).clone())));
        }
    }
    let mut load_pairs = Vec::new();
    let mut load_notes = Vec::new();
    for (r, ps) in &load {
        if ps.len() > cons.max_load {
            load_notes.push(format!("{r}: {} papers, limit {}", ps.len(), cons.max_load));
            load_pairs.extend(ps.iter().map(|p| ((*p).clone(), (*r).clone())));
        }
    }
    let check = |name: &str, pairs: Vec<(PaperId, ReviewerId)>, notes: Vec<String>| ConstraintCheck {
        name: name.to_string(),
        passed: pairs.is_empty() && notes.is_empty(),
        pairs,
        notes,
    };
    ConstraintReport {
        checks: vec![
            check(MIN_REVIEWERS, Vec::new(), min_notes),
            check(REVIEWER_LOAD, load_pairs, load_notes),
            check(LONE_WOLF, wolf_pairs, Vec::new()),
            check(CONFLICT, conflicts, Vec::new()),
            check(ELIGIBLE, ineligible, Vec::new()),
            check(DUPLICATE, duplicates, Vec::new()),
        ],
    }
}
