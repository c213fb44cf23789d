//! Corpus statistics, inter-rater agreement and response-time heuristics.

mod histogram;
mod kappa;
mod response;
mod trajectory;

use serde::Serialize;

pub use histogram::{act_histogram, ActHistogram};
pub use kappa::{cohen_kappa, paired_primary_acts, KappaError};
pub use response::{
    feasibility_check, feasibility_warnings, response_time_profile, BucketMean, MissingTimestamps,
    ResponseProfile,
};
pub use trajectory::{trajectory_stats, CguSpan, TrajectoryStats};

use crate::engine::ReplayError;
use crate::model::{CorpusTag, DialogAnnotation};

/// Everything the `stats` report prints for one corpus.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub dialogs: usize,
    pub utterances: usize,
    pub histogram: ActHistogram,
    pub trajectory: TrajectoryStats,
    pub notes: Vec<String>,
}

pub fn corpus_stats(dialogs: &[DialogAnnotation]) -> Result<CorpusStats, ReplayError> {
    let mut notes = vec![
        "percent denominator is the total of non-None act counts".to_string(),
        "Continue is counted separately from Initiate".to_string(),
    ];
    if dialogs.iter().any(|d| d.corpus == CorpusTag::SpotTheDifference) {
        notes.push(
            "published Spot the Difference percentages use an unstated denominator (about 5980) \
             and are not reproduced by these values"
                .to_string(),
        );
    }
    Ok(CorpusStats {
        dialogs: dialogs.len(),
        utterances: dialogs.iter().map(|d| d.utterances.len()).sum(),
        histogram: act_histogram(dialogs),
        trajectory: trajectory_stats(dialogs)?,
        notes,
    })
}
