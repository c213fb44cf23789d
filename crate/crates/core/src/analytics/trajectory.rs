use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::engine::{replay, ReplayError};
use crate::model::{CguId, Degree, DialogAnnotation, UtteranceFlag};

/// Utterance distance from a CGU's initiation to its first grounding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CguSpan {
    pub dialog_id: String,
    pub cgu: CguId,
    pub span: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrajectoryStats {
    #[serde(skip)]
    pub spans: Vec<CguSpan>,
    pub span_histogram: BTreeMap<usize, usize>,
    /// CGUs grounded by the utterance right after the one initiating them.
    pub grounded_in_next_count: usize,
    pub max_span: usize,
    /// Reopening acts applied to a grounded CGU.
    pub revisit_count: usize,
    pub revisit_gaps_seconds: Vec<f64>,
    pub revisits_over_10s: usize,
    pub max_revisit_gap_seconds: Option<f64>,
    /// Revisits whose gap could not be measured for lack of timestamps.
    pub revisits_without_timestamps: usize,
    /// Acknowledgment closures with the Ambiguous degree.
    pub ambiguous_count: usize,
    pub flag_census: BTreeMap<UtteranceFlag, usize>,
}

/// Span, revisit, ambiguity and flag statistics. Spans count utterance
/// positions (a CGU grounded by the next utterance has span 1) and only the
/// first grounding of each CGU contributes. Revisit gaps run from the
/// utterance that last grounded the CGU to the reopening utterance.
pub fn trajectory_stats(dialogs: &[DialogAnnotation]) -> Result<TrajectoryStats, ReplayError> {
    let mut stats = TrajectoryStats {
        flag_census: UtteranceFlag::ALL.into_iter().map(|f| (f, 0)).collect(),
        ..TrajectoryStats::default()
    };
    for dialog in dialogs {
        let timeline = replay(dialog)?.timeline;
        let mut initiated_at: HashMap<&CguId, usize> = HashMap::new();
        let mut grounded_at: HashMap<&CguId, usize> = HashMap::new();
        let mut first_grounded: HashSet<&CguId> = HashSet::new();

        for (pos, (row, utt)) in timeline.rows.iter().zip(&dialog.utterances).enumerate() {
            for flag in &utt.flags {
                *stats.flag_census.entry(*flag).or_default() += 1;
            }
            for label in &row.labels {
                if let (Some(cgu), crate::GroundingAct::Initiate) = (&label.cgu, label.act) {
                    initiated_at.insert(cgu, pos);
                }
            }
            for cgu in &row.reopened_here {
                stats.revisit_count += 1;
                let last = grounded_at.get(cgu).map(|&p| dialog.utterances[p].timestamp);
                match (last.flatten(), utt.timestamp) {
                    (Some(then), Some(now)) => stats.revisit_gaps_seconds.push(now - then),
                    _ => stats.revisits_without_timestamps += 1,
                }
            }
            for closed in &row.closed_here {
                let by_ack = row.labels.iter().any(|l| {
                    l.cgu.as_ref() == Some(&closed.cgu) && l.act.is_acknowledging()
                });
                if by_ack && closed.degree == Degree::Ambiguous {
                    stats.ambiguous_count += 1;
                }
                grounded_at.insert(&closed.cgu, pos);
                if first_grounded.insert(&closed.cgu) {
                    let span = pos - initiated_at[&closed.cgu];
                    *stats.span_histogram.entry(span).or_default() += 1;
                    stats.spans.push(CguSpan {
                        dialog_id: dialog.dialog_id.clone(),
                        cgu: closed.cgu.clone(),
                        span,
                    });
                }
            }
        }
    }
    stats.grounded_in_next_count = stats.span_histogram.get(&1).copied().unwrap_or(0);
    stats.max_span = stats.span_histogram.keys().next_back().copied().unwrap_or(0);
    stats.revisits_over_10s = stats.revisit_gaps_seconds.iter().filter(|g| **g > 10.0).count();
    stats.max_revisit_gap_seconds = stats
        .revisit_gaps_seconds
        .iter()
        .copied()
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.max(g))));
    Ok(stats)
}
