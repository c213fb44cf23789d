use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::session::{ClosedCgu, EngineError, Session, Warning};
use crate::model::{ActLabel, CguId, DialogAnnotation, DialogError};

/// One row of the open/closed CGU annotation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub utterance_id: u32,
    pub labels: Vec<ActLabel>,
    pub open_after: Vec<CguId>,
    pub closed_here: Vec<ClosedCgu>,
    pub reopened_here: Vec<CguId>,
    pub canceled_here: Vec<CguId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timeline {
    pub dialog_id: String,
    pub rows: Vec<TimelineRow>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("dialog `{dialog_id}`: {source}")]
    Invalid {
        dialog_id: String,
        #[source]
        source: DialogError,
    },
    #[error("dialog `{dialog_id}`, utterance #{position}: {source}")]
    Engine {
        dialog_id: String,
        /// Zero-based position of the failing utterance in the dialog.
        position: usize,
        #[source]
        source: EngineError,
    },
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub timeline: Timeline,
    pub session: Session,
}

/// Replays every utterance of a dialog through a fresh [`Session`].
pub fn replay(dialog: &DialogAnnotation) -> Result<Replay, ReplayError> {
    dialog.check().map_err(|source| ReplayError::Invalid {
        dialog_id: dialog.dialog_id.clone(),
        source,
    })?;
    let mut session = Session::new(dialog.dialog_id.clone());
    let mut rows = Vec::with_capacity(dialog.utterances.len());
    for (position, (utt, labels)) in dialog
        .utterances
        .iter()
        .zip(dialog.labels_by_utterance())
        .enumerate()
    {
        let report = session
            .apply(utt, labels)
            .map_err(|source| ReplayError::Engine {
                dialog_id: dialog.dialog_id.clone(),
                position,
                source,
            })?;
        rows.push(TimelineRow {
            utterance_id: utt.id,
            labels: labels.to_vec(),
            open_after: session.open_cgus(),
            closed_here: report.closed,
            reopened_here: report.reopened,
            canceled_here: report.canceled,
            warnings: report.warnings,
        });
    }
    Ok(Replay {
        timeline: Timeline {
            dialog_id: dialog.dialog_id.clone(),
            rows,
        },
        session,
    })
}
