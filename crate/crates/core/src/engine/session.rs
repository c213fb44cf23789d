use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActLabel, CguId, Degree, GroundingAct, LabelError, Utterance};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum EngineError {
    #[error("utterance {utterance_id}: unknown CGU `{cgu}`")]
    UnknownCgu { utterance_id: u32, cgu: CguId },
    #[error("utterance {utterance_id}: CGU `{cgu}` initiated twice")]
    DuplicateInitiate { utterance_id: u32, cgu: CguId },
    #[error("utterance {utterance_id}: {act} on canceled CGU `{cgu}`")]
    ActOnCanceled {
        utterance_id: u32,
        cgu: CguId,
        act: GroundingAct,
    },
    #[error("utterance {got} fed out of order (last applied: {last:?})")]
    OutOfOrderUtterance { last: Option<u32>, got: u32 },
    #[error("utterance {utterance_id}: CGU `{cgu}` cannot be initiated and grounded by the same utterance")]
    SameUtteranceGrounding { utterance_id: u32, cgu: CguId },
    #[error("utterance {utterance_id}: {reason}")]
    InvalidLabel { utterance_id: u32, reason: String },
}

impl EngineError {
    pub(crate) fn invalid_label(utterance_id: u32, err: LabelError) -> Self {
        EngineError::InvalidLabel {
            utterance_id,
            reason: err.to_string(),
        }
    }
}

/// Degree of grounding implied by the act that closes a CGU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{0} is not an acknowledging act")]
pub struct NotAcknowledging(pub GroundingAct);

pub fn assign_degree(
    closing_act: GroundingAct,
    override_degree: Option<Degree>,
) -> Result<Degree, NotAcknowledging> {
    if !closing_act.is_acknowledging() {
        return Err(NotAcknowledging(closing_act));
    }
    if override_degree == Some(Degree::Ambiguous) {
        return Ok(Degree::Ambiguous);
    }
    Ok(match closing_act {
        GroundingAct::RepeatBack => Degree::High,
        GroundingAct::Use | GroundingAct::ExplicitAck => Degree::Medium,
        GroundingAct::MoveOn => Degree::Low,
        _ => unreachable!("acknowledging acts are covered above"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CguStatus {
    Open,
    Grounded,
    Canceled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub utterance_id: u32,
    pub act: GroundingAct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CguRecord {
    pub id: CguId,
    pub status: CguStatus,
    pub members: Vec<Member>,
    pub degree: Option<Degree>,
    pub reopen_count: u32,
    pub prior_degree: Option<Degree>,
    /// Speaker of the initiating utterance.
    pub initiator: String,
}

impl CguRecord {
    pub fn ever_grounded(&self) -> bool {
        self.degree.is_some() || self.prior_degree.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedCgu {
    pub cgu: CguId,
    pub degree: Degree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Warning {
    /// Continue issued by someone other than the CGU's initiator.
    CrossSpeakerContinue {
        cgu: CguId,
        initiator: String,
        speaker: String,
    },
    AckOnGrounded { cgu: CguId },
    UnknownLink { cgu: CguId, link: CguId },
    /// A derived open/closed column disagrees with replay.
    DerivedColumnMismatch {
        utterance_id: u32,
        column: String,
        recorded: String,
        replayed: String,
    },
    /// Acknowledgment came faster than the typical response time for the
    /// length of the utterance it grounds.
    InfeasibleGrounding {
        utterance_id: u32,
        cgu: CguId,
        observed_seconds: f64,
        threshold_seconds: f64,
    },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::CrossSpeakerContinue {
                cgu,
                initiator,
                speaker,
            } => write!(
                f,
                "{speaker} continues CGU `{cgu}` initiated by {initiator}"
            ),
            Warning::AckOnGrounded { cgu } => {
                write!(f, "acknowledging act on already grounded CGU `{cgu}`")
            }
            Warning::UnknownLink { cgu, link } => {
                write!(f, "CGU `{cgu}` links to unknown CGU `{link}`")
            }
            Warning::DerivedColumnMismatch {
                column,
                recorded,
                replayed,
                ..
            } => write!(
                f,
                "column {column} records [{recorded}] but replay gives [{replayed}]"
            ),
            Warning::InfeasibleGrounding {
                cgu,
                observed_seconds,
                threshold_seconds,
                ..
            } => write!(
                f,
                "CGU `{cgu}` grounded after {observed_seconds:.2}s, below feasible response time {threshold_seconds:.2}s"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitionReport {
    pub utterance_id: u32,
    pub opened: Vec<CguId>,
    pub closed: Vec<ClosedCgu>,
    pub reopened: Vec<CguId>,
    pub canceled: Vec<CguId>,
    pub warnings: Vec<Warning>,
}

/// CGU lifecycle state for one dialog, fed one utterance at a time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Session {
    pub dialog_id: String,
    records: Vec<CguRecord>,
    index: HashMap<CguId, usize>,
    applied: usize,
    last_utterance: Option<u32>,
    event_log: Vec<TransitionReport>,
}

impl Session {
    pub fn new(dialog_id: impl Into<String>) -> Self {
        Session {
            dialog_id: dialog_id.into(),
            ..Session::default()
        }
    }

    /// Number of utterances consumed.
    pub fn applied(&self) -> usize {
        self.applied
    }

    pub fn last_utterance(&self) -> Option<u32> {
        self.last_utterance
    }

    pub fn event_log(&self) -> &[TransitionReport] {
        &self.event_log
    }

    /// Records in creation order.
    pub fn cgus(&self) -> &[CguRecord] {
        &self.records
    }

    pub fn cgu(&self, id: &CguId) -> Option<&CguRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn open_cgus(&self) -> Vec<CguId> {
        self.with_status(CguStatus::Open)
    }

    pub fn grounded_cgus(&self) -> Vec<CguId> {
        self.with_status(CguStatus::Grounded)
    }

    pub fn canceled_cgus(&self) -> Vec<CguId> {
        self.with_status(CguStatus::Canceled)
    }

    fn with_status(&self, status: CguStatus) -> Vec<CguId> {
        self.records
            .iter()
            .filter(|r| r.status == status)
            .map(|r| r.id.clone())
            .collect()
    }

    /// Applies all labels of one utterance, in order. Either every label is
    /// applied or the session is left untouched.
    pub fn apply(
        &mut self,
        utterance: &Utterance,
        labels: &[ActLabel],
    ) -> Result<TransitionReport, EngineError> {
        self.check_order(utterance.id)?;
        let mut report = TransitionReport {
            utterance_id: utterance.id,
            ..TransitionReport::default()
        };
        if labels.len() > 1 {
            let mut draft = self.clone();
            for label in labels {
                draft.apply_label(utterance, label, &mut report)?;
            }
            *self = draft;
        } else if let Some(label) = labels.first() {
            self.apply_label(utterance, label, &mut report)?;
        }
        self.finish(utterance.id, report.clone());
        Ok(report)
    }

    pub(crate) fn check_order(&self, utterance_id: u32) -> Result<(), EngineError> {
        match self.last_utterance {
            Some(last) if utterance_id <= last => Err(EngineError::OutOfOrderUtterance {
                last: Some(last),
                got: utterance_id,
            }),
            _ => Ok(()),
        }
    }

    pub(crate) fn finish(&mut self, utterance_id: u32, report: TransitionReport) {
        self.applied += 1;
        self.last_utterance = Some(utterance_id);
        self.event_log.push(report);
    }

    /// Applies a single label. All error checks happen before any mutation.
    pub(crate) fn apply_label(
        &mut self,
        utterance: &Utterance,
        label: &ActLabel,
        report: &mut TransitionReport,
    ) -> Result<(), EngineError> {
        let utterance_id = utterance.id;
        label
            .check()
            .map_err(|e| EngineError::invalid_label(utterance_id, e))?;
        let Some(cgu) = label.cgu.as_ref() else {
            return Ok(());
        };
        let act = label.act;

        if act == GroundingAct::Initiate {
            if self.index.contains_key(cgu) {
                return Err(EngineError::DuplicateInitiate {
                    utterance_id,
                    cgu: cgu.clone(),
                });
            }
            self.index.insert(cgu.clone(), self.records.len());
            self.records.push(CguRecord {
                id: cgu.clone(),
                status: CguStatus::Open,
                members: vec![Member { utterance_id, act }],
                degree: None,
                reopen_count: 0,
                prior_degree: None,
                initiator: utterance.speaker.clone(),
            });
            report.opened.push(cgu.clone());
            return Ok(());
        }

        let Some(&slot) = self.index.get(cgu) else {
            return Err(EngineError::UnknownCgu {
                utterance_id,
                cgu: cgu.clone(),
            });
        };
        let record = &self.records[slot];
        if record.status == CguStatus::Canceled {
            return Err(EngineError::ActOnCanceled {
                utterance_id,
                cgu: cgu.clone(),
                act,
            });
        }
        if act.is_acknowledging()
            && record.status == CguStatus::Open
            && report.opened.contains(cgu)
        {
            return Err(EngineError::SameUtteranceGrounding {
                utterance_id,
                cgu: cgu.clone(),
            });
        }
        if let Some(link) = &label.link {
            if !self.index.contains_key(link) {
                report.warnings.push(Warning::UnknownLink {
                    cgu: cgu.clone(),
                    link: link.clone(),
                });
            }
        }

        let record = &mut self.records[slot];
        record.members.push(Member { utterance_id, act });
        match (act, record.status) {
            (GroundingAct::Continue, _) => {
                if record.initiator != utterance.speaker {
                    report.warnings.push(Warning::CrossSpeakerContinue {
                        cgu: cgu.clone(),
                        initiator: record.initiator.clone(),
                        speaker: utterance.speaker.clone(),
                    });
                }
            }
            (a, CguStatus::Grounded) if a.is_reopening() => {
                record.prior_degree = record.degree.take();
                record.status = CguStatus::Open;
                record.reopen_count += 1;
                report.reopened.push(cgu.clone());
            }
            (a, CguStatus::Open) if a.is_acknowledging() => {
                let degree = assign_degree(a, label.degree_override)
                    .expect("acknowledging act always has a degree");
                record.status = CguStatus::Grounded;
                record.degree = Some(degree);
                report.closed.push(ClosedCgu {
                    cgu: cgu.clone(),
                    degree,
                });
            }
            (a, CguStatus::Grounded) if a.is_acknowledging() => {
                report.warnings.push(Warning::AckOnGrounded { cgu: cgu.clone() });
            }
            (GroundingAct::Cancel, CguStatus::Open) => match record.prior_degree {
                Some(degree) => {
                    record.status = CguStatus::Grounded;
                    record.degree = Some(degree);
                    report.closed.push(ClosedCgu {
                        cgu: cgu.clone(),
                        degree,
                    });
                }
                None => {
                    record.status = CguStatus::Canceled;
                    report.canceled.push(cgu.clone());
                }
            },
            (GroundingAct::Cancel, CguStatus::Grounded) => {
                record.status = CguStatus::Canceled;
                record.degree = None;
                report.canceled.push(cgu.clone());
            }
            // Repeat, and reopening acts on an open CGU, only append.
            _ => {}
        }
        Ok(())
    }
}
