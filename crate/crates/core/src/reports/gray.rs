use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::ReportError;
use crate::review_data::PaperId;
use crate::scoring::{Decision, DecisionList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Agreement {
    AgreeAccept,
    AgreeReject,
    Disagree,
}

impl Agreement {
    pub fn as_str(self) -> &'static str {
        match self {
            Agreement::AgreeAccept => "agree-accept",
            Agreement::AgreeReject => "agree-reject",
            Agreement::Disagree => "disagree",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrayAreaEntry {
    pub paper_id: PaperId,
    pub si_rank: usize,
    pub si_cal_rank: usize,
    pub si_decision: Decision,
    pub si_cal_decision: Decision,
    pub agreement: Agreement,
    /// `None` for disagreements: those go to human adjudication.
    pub final_decision: Option<Decision>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AgreementCounts {
    pub agree_accept: usize,
    pub agree_reject: usize,
    pub disagree: usize,
}

impl AgreementCounts {
    pub fn total(&self) -> usize {
        self.agree_accept + self.agree_reject + self.disagree
    }
}

/// Agreement between the uncalibrated and calibrated decision lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GrayAreaReport {
    /// Paper-id order.
    pub entries: Vec<GrayAreaEntry>,
    pub counts: AgreementCounts,
    pub notices: Vec<String>,
}

impl GrayAreaReport {
    /// Report with no entries, used when there is no calibrated ranking.
    pub fn empty(notice: impl Into<String>) -> Self {
        GrayAreaReport { notices: vec![notice.into()], ..Default::default() }
    }

    pub fn disagreements(&self) -> impl Iterator<Item = &GrayAreaEntry> {
        self.entries.iter().filter(|e| e.agreement == Agreement::Disagree)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["paper_id", "SI_rank", "SI_cal_rank", "SI_decision", "SI_cal_decision", "agreement", "final_decision"])?;
        for e in &self.entries {
            w.write_record([
                e.paper_id.as_str(),
                &e.si_rank.to_string(),
                &e.si_cal_rank.to_string(),
                e.si_decision.as_str(),
                e.si_cal_decision.as_str(),
                e.agreement.as_str(),
                e.final_decision.map_or("pending", Decision::as_str),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Papers accepted (rejected) by both rankings are accepted (rejected);
/// every other paper is flagged and left without a decision.
pub fn gray_area(si: &DecisionList, si_cal: &DecisionList) -> Result<GrayAreaReport, ReportError> {
    let index = |list: &DecisionList| -> Result<BTreeMap<PaperId, (usize, Decision)>, ReportError> {
        let mut map = BTreeMap::new();
        for e in &list.entries {
            if map.insert(e.paper_id.clone(), (e.rank, e.decision)).is_some() {
                return Err(ReportError::PaperSetMismatch(format!("paper {} listed twice", e.paper_id)));
            }
        }
        Ok(map)
    };
    let a = index(si)?;
    let b = index(si_cal)?;
    if let Some(p) = a.keys().find(|p| !b.contains_key(*p)).or_else(|| b.keys().find(|p| !a.contains_key(*p))) {
        return Err(ReportError::PaperSetMismatch(format!("paper {p} is ranked by only one list")));
    }
    let mut counts = AgreementCounts::default();
    let entries = a
        .into_iter()
        .map(|(paper_id, (si_rank, si_decision))| {
            let (si_cal_rank, si_cal_decision) = b[&paper_id];
            let agreement = match (si_decision, si_cal_decision) {
                (Decision::Accept, Decision::Accept) => {
                    counts.agree_accept += 1;
                    Agreement::AgreeAccept
                }
                (Decision::Reject, Decision::Reject) => {
                    counts.agree_reject += 1;
                    Agreement::AgreeReject
                }
                _ => {
                    counts.disagree += 1;
                    Agreement::Disagree
                }
            };
            let final_decision = (agreement != Agreement::Disagree).then_some(si_decision);
            GrayAreaEntry { paper_id, si_rank, si_cal_rank, si_decision, si_cal_decision, agreement, final_decision }
        })
        .collect();
    Ok(GrayAreaReport { entries, counts, notices: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{rank_scores, DecisionConfig, RankInput};
    use proptest::prelude::*;

    fn list(scores: &[f64], rate: f64) -> DecisionList {
        let items = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| RankInput { paper_id: PaperId::new(format!("p{i:03}")).unwrap(), score: s, tie_break: 0.0 })
            .collect();
        rank_scores(items, &DecisionConfig::new(rate).unwrap())
    }

    #[test]
    fn identical_rankings_agree() {
        let l = list(&[5.0, 3.0, 9.0, 1.0, 7.0], 40.0);
        let r = gray_area(&l, &l).unwrap();
        assert_eq!(r.counts, AgreementCounts { agree_accept: 2, agree_reject: 3, disagree: 0 });
    }

    #[test]
    fn one_swap_across_cutoff_gives_two_disagreements() {
        let a = list(&[10.0, 9.0, 8.0, 7.0, 6.0], 40.0);
        // swap the scores of the last accepted (p001) and first rejected (p002)
        let b = list(&[10.0, 8.0, 9.0, 7.0, 6.0], 40.0);
        let r = gray_area(&a, &b).unwrap();
        assert_eq!(r.counts.disagree, 2);
        let flagged: Vec<_> = r.disagreements().map(|e| e.paper_id.as_str().to_string()).collect();
        assert_eq!(flagged, ["p001", "p002"]);
        assert!(r.disagreements().all(|e| e.final_decision.is_none()));
    }

    #[test]
    fn disjoint_accept_sets() {
        let a = list(&[9.0, 8.0, 7.0, 1.0, 2.0, 3.0, 0.0, 0.5, 0.2, 0.1], 30.0);
        let b = list(&[1.0, 2.0, 3.0, 9.0, 8.0, 7.0, 0.0, 0.5, 0.2, 0.1], 30.0);
        assert_eq!(gray_area(&a, &b).unwrap().counts.disagree, 6);
    }

    #[test]
    fn mismatched_papers_are_an_error() {
        let a = list(&[1.0, 2.0], 50.0);
        let b = list(&[1.0, 2.0, 3.0], 50.0);
        assert!(matches!(gray_area(&a, &b), Err(ReportError::PaperSetMismatch(_))));
    }

    proptest! {
        #[test]
        fn classes_partition_papers(
            scores in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..60),
            rate in 1.0f64..100.0,
        ) {
            let a = list(&scores.iter().map(|s| s.0).collect::<Vec<_>>(), rate);
            let b = list(&scores.iter().map(|s| s.1).collect::<Vec<_>>(), rate);
            let r = gray_area(&a, &b).unwrap();
            prop_assert_eq!(r.counts.total(), scores.len());
            prop_assert_eq!(r.entries.len(), scores.len());
            prop_assert!(r.counts.agree_accept <= a.slots);
            // accepted counts are equal, so disagreements come in pairs
            prop_assert_eq!(r.counts.disagree % 2, 0);
            for e in &r.entries {
                prop_assert_eq!(e.final_decision.is_none(), e.agreement == Agreement::Disagree);
            }
        }
    }
}
