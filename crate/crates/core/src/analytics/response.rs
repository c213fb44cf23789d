use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{replay, ReplayError, Warning};
use crate::model::{CguId, DialogAnnotation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("corpus has no timestamps")]
pub struct MissingTimestamps;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketMean {
    pub mean_seconds: f64,
    pub samples: usize,
}

/// Mean response time keyed by the word count of the utterance being
/// responded to.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResponseProfile {
    pub buckets: BTreeMap<usize, BucketMean>,
    pub global_mean_seconds: Option<f64>,
}

impl ResponseProfile {
    pub fn means(&self) -> BTreeMap<usize, f64> {
        self.buckets.iter().map(|(&k, b)| (k, b.mean_seconds)).collect()
    }

    /// Bucket mean, falling back to the global mean for unseen lengths.
    pub fn expected(&self, word_count: usize) -> Option<f64> {
        self.buckets
            .get(&word_count)
            .map(|b| b.mean_seconds)
            .or(self.global_mean_seconds)
    }
}

/// Response time is measured between adjacent utterances by different
/// speakers; pairs where either side lacks a timestamp are skipped.
pub fn response_time_profile(dialogs: &[DialogAnnotation]) -> Result<ResponseProfile, MissingTimestamps> {
    let any_ts = dialogs
        .iter()
        .flat_map(|d| &d.utterances)
        .any(|u| u.timestamp.is_some());
    if !any_ts {
        return Err(MissingTimestamps);
    }
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for dialog in dialogs {
        for pair in dialog.utterances.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            if prev.speaker == next.speaker {
                continue;
            }
            if let (Some(t0), Some(t1)) = (prev.timestamp, next.timestamp) {
                let entry = sums.entry(prev.word_count()).or_default();
                entry.0 += t1 - t0;
                entry.1 += 1;
            }
        }
    }
    let (total, count) = sums
        .values()
        .fold((0.0, 0usize), |(s, n), &(bs, bn)| (s + bs, n + bn));
    Ok(ResponseProfile {
        buckets: sums
            .into_iter()
            .map(|(k, (s, n))| {
                (
                    k,
                    BucketMean {
                        mean_seconds: s / n as f64,
                        samples: n,
                    },
                )
            })
            .collect(),
        global_mean_seconds: (count > 0).then(|| total / count as f64),
    })
}

/// Acknowledgments that arrived too quickly after the utterance they ground
/// to have been read and understood.
pub fn feasibility_warnings(
    dialog: &DialogAnnotation,
    profile: &ResponseProfile,
    threshold_factor: f64,
) -> Result<Vec<Warning>, ReplayError> {
    let mut out = Vec::new();
    if dialog.utterances.iter().all(|u| u.timestamp.is_none()) {
        return Ok(out);
    }
    let timeline = replay(dialog)?.timeline;
    let mut last_contribution: HashMap<&CguId, usize> = HashMap::new();
    for (pos, row) in timeline.rows.iter().enumerate() {
        let utt = &dialog.utterances[pos];
        for label in &row.labels {
            let Some(cgu) = &label.cgu else { continue };
            let grounds = label.act.is_acknowledging()
                && row.closed_here.iter().any(|c| &c.cgu == cgu);
            if !grounds || pos == 0 || last_contribution.get(cgu) != Some(&(pos - 1)) {
                continue;
            }
            let prev = &dialog.utterances[pos - 1];
            if prev.speaker == utt.speaker {
                continue;
            }
            let (Some(t0), Some(t1)) = (prev.timestamp, utt.timestamp) else {
                continue;
            };
            let Some(expected) = profile.expected(prev.word_count()) else {
                continue;
            };
            let observed = t1 - t0;
            let threshold = threshold_factor * expected;
            if observed < threshold {
                out.push(Warning::InfeasibleGrounding {
                    utterance_id: utt.id,
                    cgu: cgu.clone(),
                    observed_seconds: observed,
                    threshold_seconds: threshold,
                });
            }
        }
        for label in &row.labels {
            if let Some(cgu) = &label.cgu {
                last_contribution.insert(cgu, pos);
            }
        }
    }
    Ok(out)
}

/// [`feasibility_warnings`] over a whole corpus, tagged with dialog ids.
pub fn feasibility_check(
    dialogs: &[DialogAnnotation],
    profile: &ResponseProfile,
    threshold_factor: f64,
) -> Result<Vec<(String, Warning)>, ReplayError> {
    let mut out = Vec::new();
    for d in dialogs {
        out.extend(
            feasibility_warnings(d, profile, threshold_factor)?
                .into_iter()
                .map(|w| (d.dialog_id.clone(), w)),
        );
    }
    Ok(out)
}
