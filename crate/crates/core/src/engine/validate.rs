//! Rule checks over an annotated dialog. Unlike [`replay`](super::replay),
//! validation keeps going after a bad label and reports every problem it can
//! find.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::session::{EngineError, Session, TransitionReport, Warning};
use crate::analytics::{feasibility_warnings, ResponseProfile};
use crate::model::{CguId, DerivedColumns, DialogAnnotation, GroundingAct};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum FindingKind {
    Structure { message: String },
    InvalidLabel { reason: String },
    FirstActNotInitiate { cgu: CguId, act: GroundingAct },
    UnknownCgu { cgu: CguId },
    DuplicateInitiate { cgu: CguId },
    ActOnCanceled { cgu: CguId, act: GroundingAct },
    SameUtteranceGrounding { cgu: CguId },
    Warning { warning: Warning },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub dialog_id: String,
    pub utterance_id: Option<u32>,
    #[serde(flatten)]
    pub kind: FindingKind,
}

impl Finding {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn code(&self) -> &'static str {
        match &self.kind {
            FindingKind::Structure { .. } => "structure",
            FindingKind::InvalidLabel { .. } => "invalid_label",
            FindingKind::FirstActNotInitiate { .. } => "first_act_not_initiate",
            FindingKind::UnknownCgu { .. } => "unknown_cgu",
            FindingKind::DuplicateInitiate { .. } => "duplicate_initiate",
            FindingKind::ActOnCanceled { .. } => "act_on_canceled",
            FindingKind::SameUtteranceGrounding { .. } => "same_utterance_grounding",
            FindingKind::Warning { warning } => match warning {
                Warning::CrossSpeakerContinue { .. } => "cross_speaker_continue",
                Warning::AckOnGrounded { .. } => "ack_on_grounded",
                Warning::UnknownLink { .. } => "unknown_link",
                Warning::DerivedColumnMismatch { .. } => "derived_column_mismatch",
                Warning::InfeasibleGrounding { .. } => "infeasible_grounding",
            },
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}", self.code(), self.dialog_id)?;
        if let Some(u) = self.utterance_id {
            write!(f, " utt {u}")?;
        }
        f.write_str(": ")?;
        match &self.kind {
            FindingKind::Structure { message } => f.write_str(message),
            FindingKind::InvalidLabel { reason } => f.write_str(reason),
            FindingKind::FirstActNotInitiate { cgu, act } => {
                write!(f, "first act of CGU `{cgu}` is {act}, not Initiate")
            }
            FindingKind::UnknownCgu { cgu } => write!(f, "label on unknown CGU `{cgu}`"),
            FindingKind::DuplicateInitiate { cgu } => write!(f, "CGU `{cgu}` initiated twice"),
            FindingKind::ActOnCanceled { cgu, act } => write!(f, "{act} on canceled CGU `{cgu}`"),
            FindingKind::SameUtteranceGrounding { cgu } => {
                write!(f, "CGU `{cgu}` initiated and grounded by one utterance")
            }
            FindingKind::Warning { warning } => write!(f, "{warning}"),
        }
    }
}

/// Response-time settings for the grounding feasibility check.
#[derive(Debug, Clone)]
pub struct Feasibility {
    pub profile: ResponseProfile,
    pub threshold_factor: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    pub feasibility: Option<Feasibility>,
}

pub fn validate(dialog: &DialogAnnotation) -> Vec<Finding> {
    validate_with(dialog, &ValidateOptions::default())
}

pub fn validate_with(dialog: &DialogAnnotation, options: &ValidateOptions) -> Vec<Finding> {
    let mut out = Findings {
        dialog_id: &dialog.dialog_id,
        items: Vec::new(),
    };

    // Structural checks, reported individually.
    let ids: HashSet<u32> = dialog.utterances.iter().map(|u| u.id).collect();
    for pair in dialog.utterances.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.id <= a.id {
            out.error(
                Some(b.id),
                FindingKind::Structure {
                    message: format!("utterance ids must strictly increase: {} then {}", a.id, b.id),
                },
            );
        }
        if let (Some(ta), Some(tb)) = (a.timestamp, b.timestamp) {
            if tb < ta {
                out.error(
                    Some(b.id),
                    FindingKind::Structure {
                        message: format!("timestamp decreases ({ta}s then {tb}s)"),
                    },
                );
            }
        }
    }
    for label in &dialog.labels {
        if !ids.contains(&label.utterance_id) {
            out.error(
                Some(label.utterance_id),
                FindingKind::Structure {
                    message: format!("label references missing utterance {}", label.utterance_id),
                },
            );
        }
    }

    let mut session = Session::new(dialog.dialog_id.clone());
    let mut never_initiated: HashSet<CguId> = HashSet::new();
    let mut clean = out.items.is_empty();

    for utt in &dialog.utterances {
        let mut report = TransitionReport {
            utterance_id: utt.id,
            ..TransitionReport::default()
        };
        for label in dialog.labels_for(utt.id) {
            if let Err(e) = label.check() {
                out.error(Some(utt.id), FindingKind::InvalidLabel { reason: e.to_string() });
                clean = false;
                continue;
            }
            let Some(cgu) = &label.cgu else { continue };
            if label.act != GroundingAct::Initiate && session.cgu(cgu).is_none() {
                let kind = if never_initiated.insert(cgu.clone()) {
                    FindingKind::FirstActNotInitiate {
                        cgu: cgu.clone(),
                        act: label.act,
                    }
                } else {
                    FindingKind::UnknownCgu { cgu: cgu.clone() }
                };
                out.error(Some(utt.id), kind);
                clean = false;
                continue;
            }
            if let Err(e) = session.apply_label(utt, label, &mut report) {
                out.error(Some(utt.id), engine_kind(e));
                clean = false;
            }
        }
        for warning in report.warnings.drain(..) {
            out.warn(Some(utt.id), warning);
        }
        let open_after = session.open_cgus();
        if let Some(recorded) = dialog.derived.iter().find(|d| d.utterance_id == utt.id) {
            for warning in derived_mismatches(recorded, &open_after, &report) {
                out.warn(Some(utt.id), warning);
            }
        }
        session.finish(utt.id, report);
    }

    if clean {
        if let Some(f) = &options.feasibility {
            if let Ok(warnings) = feasibility_warnings(dialog, &f.profile, f.threshold_factor) {
                for w in warnings {
                    let id = match &w {
                        Warning::InfeasibleGrounding { utterance_id, .. } => Some(*utterance_id),
                        _ => None,
                    };
                    out.warn(id, w);
                }
            }
        }
    }
    out.items
}

fn engine_kind(e: EngineError) -> FindingKind {
    match e {
        EngineError::UnknownCgu { cgu, .. } => FindingKind::UnknownCgu { cgu },
        EngineError::DuplicateInitiate { cgu, .. } => FindingKind::DuplicateInitiate { cgu },
        EngineError::ActOnCanceled { cgu, act, .. } => FindingKind::ActOnCanceled { cgu, act },
        EngineError::SameUtteranceGrounding { cgu, .. } => {
            FindingKind::SameUtteranceGrounding { cgu }
        }
        other => FindingKind::Structure {
            message: other.to_string(),
        },
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

/// Compares recorded Open CGUs / CGUs Closed / degree columns with replay.
pub(crate) fn derived_mismatches(
    recorded: &DerivedColumns,
    open_after: &[CguId],
    report: &TransitionReport,
) -> Vec<Warning> {
    let closed: Vec<CguId> = report.closed.iter().map(|c| c.cgu.clone()).collect();
    let degrees: Vec<_> = report.closed.iter().map(|c| c.degree).collect();
    let mut out = Vec::new();
    let mut compare = |column: &str, rec: String, rep: String| {
        if rec != rep {
            out.push(Warning::DerivedColumnMismatch {
                utterance_id: recorded.utterance_id,
                column: column.to_string(),
                recorded: rec,
                replayed: rep,
            });
        }
    };
    if let Some(open) = &recorded.open_cgus {
        let mut rec_open = open.clone();
        let mut rep_open = open_after.to_vec();
        rec_open.sort();
        rep_open.sort();
        compare("open_cgus", join(&rec_open), join(&rep_open));
    }
    if let Some(rec) = &recorded.closed_cgus {
        compare("closed_cgus", join(rec), join(&closed));
    }
    if let Some(rec) = &recorded.degrees {
        compare("degree", join(rec), join(&degrees));
    }
    out
}

struct Findings<'a> {
    dialog_id: &'a str,
    items: Vec<Finding>,
}

impl Findings<'_> {
    fn error(&mut self, utterance_id: Option<u32>, kind: FindingKind) {
        self.items.push(Finding {
            severity: Severity::Error,
            dialog_id: self.dialog_id.to_string(),
            utterance_id,
            kind,
        });
    }

    fn warn(&mut self, utterance_id: Option<u32>, warning: Warning) {
        self.items.push(Finding {
            severity: Severity::Warning,
            dialog_id: self.dialog_id.to_string(),
            utterance_id,
            kind: FindingKind::Warning { warning },
        });
    }
}
