use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{DialogAnnotation, GroundingAct};

/// Grounding-act counts over a corpus. `None` labels are excluded from both
/// the counts and the percentage denominator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActHistogram {
    pub counts: BTreeMap<GroundingAct, u64>,
    pub total_acts: u64,
    pub percentages: BTreeMap<GroundingAct, f64>,
}

impl ActHistogram {
    pub fn from_counts(counts: BTreeMap<GroundingAct, u64>) -> Self {
        let counts: BTreeMap<_, _> = counts
            .into_iter()
            .filter(|(act, _)| *act != GroundingAct::None)
            .collect();
        let total_acts = counts.values().sum();
        let percentages = counts
            .iter()
            .map(|(&act, &n)| {
                let pct = if total_acts == 0 {
                    0.0
                } else {
                    100.0 * n as f64 / total_acts as f64
                };
                (act, pct)
            })
            .collect();
        ActHistogram {
            counts,
            total_acts,
            percentages,
        }
    }

    pub fn count(&self, act: GroundingAct) -> u64 {
        self.counts.get(&act).copied().unwrap_or(0)
    }

    pub fn percentage(&self, act: GroundingAct) -> f64 {
        self.percentages.get(&act).copied().unwrap_or(0.0)
    }

    /// Rows in act-table order: Initiate first, then the remaining acts
    /// alphabetically by table name. Acts with zero count are included.
    pub fn table_rows(&self) -> Vec<(GroundingAct, u64, f64)> {
        let mut acts: Vec<_> = GroundingAct::ALL
            .into_iter()
            .filter(|a| *a != GroundingAct::None && *a != GroundingAct::Initiate)
            .collect();
        acts.sort_by_key(|a| a.table_name());
        std::iter::once(GroundingAct::Initiate)
            .chain(acts)
            .map(|a| (a, self.count(a), self.percentage(a)))
            .collect()
    }
}

pub fn act_histogram(dialogs: &[DialogAnnotation]) -> ActHistogram {
    let mut counts: BTreeMap<GroundingAct, u64> = GroundingAct::ALL
        .into_iter()
        .filter(|a| *a != GroundingAct::None)
        .map(|a| (a, 0))
        .collect();
    for label in dialogs.iter().flat_map(|d| &d.labels) {
        if label.act != GroundingAct::None {
            *counts.entry(label.act).or_default() += 1;
        }
    }
    ActHistogram::from_counts(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use GroundingAct::*;

    /// Published Meetup act counts.
    fn meetup_counts() -> BTreeMap<GroundingAct, u64> {
        [
            (Initiate, 2633),
            (Cancel, 4),
            (ExplicitAck, 364),
            (MoveOn, 937),
            (Repair, 86),
            (Repeat, 21),
            (RepeatBack, 10),
            (RequestAck, 1),
            (RequestRepair, 42),
            (Use, 1273),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn meetup_percentages_under_sum_of_counts() {
        let h = ActHistogram::from_counts(meetup_counts());
        assert_eq!(h.total_acts, 5371);
        let printed = [
            (Initiate, 49.03),
            (Cancel, 0.07),
            (ExplicitAck, 6.77),
            (MoveOn, 17.44),
            (Repair, 1.60),
            (Repeat, 0.39),
            (RepeatBack, 0.18),
            (RequestAck, 0.01),
            (RequestRepair, 0.78),
            (Use, 23.70),
        ];
        for (act, pct) in printed {
            assert!(
                (h.percentage(act) - pct).abs() <= 0.02,
                "{act}: {} vs {pct}",
                h.percentage(act)
            );
        }
        assert!((h.percentage(Initiate) - 49.02).abs() < 0.005);
    }

    #[test]
    fn table_row_order() {
        let h = ActHistogram::from_counts(meetup_counts());
        let names: Vec<_> = h.table_rows().iter().map(|r| r.0.table_name()).collect();
        assert_eq!(
            names,
            [
                "Initiate",
                "Cancel",
                "Continue",
                "Explicit Ack.",
                "Move",
                "Repair",
                "Repeat",
                "Repeat-Back",
                "Request-Ack.",
                "Request-Repair",
                "Use"
            ]
        );
    }

    #[test]
    fn none_is_excluded() {
        let mut counts = meetup_counts();
        counts.insert(None, 999);
        let h = ActHistogram::from_counts(counts);
        assert_eq!(h.total_acts, 5371);
        assert_eq!(h.count(None), 0);
    }
}
