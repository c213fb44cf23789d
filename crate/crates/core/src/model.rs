//! Grounding-act taxonomy, degrees of grounding and the value types shared by
//! every other module.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown grounding act label `{0}`")]
    UnknownLabel(String),
    #[error("unknown degree `{0}`")]
    UnknownDegree(String),
    #[error("unknown utterance flag `{0}`")]
    UnknownFlag(String),
    #[error("unknown corpus tag `{0}`")]
    UnknownCorpus(String),
}

/// Per-utterance, per-CGU grounding act.
///
/// Variant order is the order used for every deterministic listing
/// (histograms, class weights, JSON maps).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroundingAct {
    Initiate,
    Continue,
    ExplicitAck,
    RepeatBack,
    MoveOn,
    Use,
    Repair,
    RequestRepair,
    RequestAck,
    Cancel,
    Repeat,
    None,
}

impl GroundingAct {
    pub const ALL: [GroundingAct; 12] = [
        GroundingAct::Initiate,
        GroundingAct::Continue,
        GroundingAct::ExplicitAck,
        GroundingAct::RepeatBack,
        GroundingAct::MoveOn,
        GroundingAct::Use,
        GroundingAct::Repair,
        GroundingAct::RequestRepair,
        GroundingAct::RequestAck,
        GroundingAct::Cancel,
        GroundingAct::Repeat,
        GroundingAct::None,
    ];

    /// Spelling written by every serializer.
    pub fn canonical_name(self) -> &'static str {
        match self {
            GroundingAct::Initiate => "Initiate",
            GroundingAct::Continue => "Continue",
            GroundingAct::ExplicitAck => "Explicit-Ack",
            GroundingAct::RepeatBack => "Repeat-Back",
            GroundingAct::MoveOn => "Move",
            GroundingAct::Use => "Use",
            GroundingAct::Repair => "Repair",
            GroundingAct::RequestRepair => "Req-Repair",
            GroundingAct::RequestAck => "Req-Ack",
            GroundingAct::Cancel => "Cancel",
            GroundingAct::Repeat => "Repeat",
            GroundingAct::None => "None",
        }
    }

    /// Row label used by the act-count table.
    pub fn table_name(self) -> &'static str {
        match self {
            GroundingAct::ExplicitAck => "Explicit Ack.",
            GroundingAct::RequestRepair => "Request-Repair",
            GroundingAct::RequestAck => "Request-Ack.",
            other => other.canonical_name(),
        }
    }

    /// Explicit acknowledgment, repeat-back, move-on and use: the acts that
    /// ground an open CGU.
    pub fn is_acknowledging(self) -> bool {
        matches!(
            self,
            GroundingAct::ExplicitAck
                | GroundingAct::RepeatBack
                | GroundingAct::MoveOn
                | GroundingAct::Use
        )
    }

    /// Acts that send a grounded CGU back to the open state.
    pub fn is_reopening(self) -> bool {
        matches!(
            self,
            GroundingAct::Repair | GroundingAct::RequestRepair | GroundingAct::RequestAck
        )
    }
}

/// Case-insensitive label parsing. Accepts the canonical spellings plus the
/// variants seen in published annotation tables ("Explicit Ack.",
/// "Exp-Acknowledgment", "Move on", "Request-Ack.", ...).
pub fn parse_act(label_text: &str) -> Result<GroundingAct, ModelError> {
    let key: String = label_text
        .trim()
        .trim_end_matches(':')
        .chars()
        .filter(|c| !matches!(c, ' ' | '-' | '_' | '.' | '\t'))
        .flat_map(char::to_lowercase)
        .collect();
    let act = match key.as_str() {
        "initiate" | "init" => GroundingAct::Initiate,
        "continue" | "cont" => GroundingAct::Continue,
        "explicitack" | "explicitacknowledgment" | "explicitacknowledgement" | "expack"
        | "expacknowledgment" | "expacknowledgement" => GroundingAct::ExplicitAck,
        "repeatback" => GroundingAct::RepeatBack,
        "move" | "moveon" => GroundingAct::MoveOn,
        "use" => GroundingAct::Use,
        "repair" => GroundingAct::Repair,
        "requestrepair" | "reqrepair" => GroundingAct::RequestRepair,
        "requestack" | "reqack" | "requestacknowledge" | "requestacknowledgment"
        | "requestacknowledgement" => GroundingAct::RequestAck,
        "cancel" => GroundingAct::Cancel,
        "repeat" => GroundingAct::Repeat,
        "none" => GroundingAct::None,
        _ => return Err(ModelError::UnknownLabel(label_text.to_string())),
    };
    Ok(act)
}

impl FromStr for GroundingAct {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_act(s)
    }
}

impl fmt::Display for GroundingAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

impl Serialize for GroundingAct {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.canonical_name())
    }
}

impl<'de> Deserialize<'de> for GroundingAct {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_act(&text).map_err(serde::de::Error::custom)
    }
}

/// Degree of grounding assigned when a CGU is grounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Degree {
    High,
    Medium,
    Low,
    Ambiguous,
}

impl Degree {
    pub const ALL: [Degree; 4] = [Degree::High, Degree::Medium, Degree::Low, Degree::Ambiguous];

    pub fn name(self) -> &'static str {
        match self {
            Degree::High => "High",
            Degree::Medium => "Medium",
            Degree::Low => "Low",
            Degree::Ambiguous => "Ambiguous",
        }
    }
}

impl FromStr for Degree {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Degree::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ModelError::UnknownDegree(s.to_string()))
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Annotation flags carried by an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UtteranceFlag {
    /// `*`: label revised after later context.
    Revised,
    /// `#`: overlapping speech, transcription uncertain.
    Overlap,
    /// Speaker talking to themselves.
    Murmur,
}

impl UtteranceFlag {
    pub const ALL: [UtteranceFlag; 3] = [
        UtteranceFlag::Revised,
        UtteranceFlag::Overlap,
        UtteranceFlag::Murmur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UtteranceFlag::Revised => "revised",
            UtteranceFlag::Overlap => "overlap",
            UtteranceFlag::Murmur => "murmur",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            UtteranceFlag::Revised => "*",
            UtteranceFlag::Overlap => "#",
            UtteranceFlag::Murmur => "murmur",
        }
    }
}

impl FromStr for UtteranceFlag {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "*" | "revised" => Ok(UtteranceFlag::Revised),
            "#" | "overlap" => Ok(UtteranceFlag::Overlap),
            "murmur" => Ok(UtteranceFlag::Murmur),
            _ => Err(ModelError::UnknownFlag(s.to_string())),
        }
    }
}

impl Serialize for UtteranceFlag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for UtteranceFlag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Corpus-scoped CGU identifier such as `CGU 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CguId(pub String);

impl CguId {
    pub fn new(id: impl Into<String>) -> Self {
        CguId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CguId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CguId {
    fn from(s: &str) -> Self {
        CguId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: u32,
    pub speaker: String,
    /// Elapsed seconds since the start of the dialog.
    pub timestamp: Option<f64>,
    pub text: String,
    pub flags: BTreeSet<UtteranceFlag>,
}

impl Utterance {
    pub fn new(id: u32, speaker: impl Into<String>, text: impl Into<String>) -> Self {
        Utterance {
            id,
            speaker: speaker.into(),
            timestamp: None,
            text: text.into(),
            flags: BTreeSet::new(),
        }
    }

    pub fn at(mut self, seconds: f64) -> Self {
        self.timestamp = Some(seconds);
        self
    }

    pub fn with_flag(mut self, flag: UtteranceFlag) -> Self {
        self.flags.insert(flag);
        self
    }

    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Violation of a structural invariant on a single label.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("act {0} requires a CGU id")]
    MissingCgu(GroundingAct),
    #[error("act None must not reference a CGU (got `{0}`)")]
    UnexpectedCgu(CguId),
    #[error("degree override {0} is not permitted; only Ambiguous may be set by annotators")]
    OverrideNotAmbiguous(Degree),
    #[error("degree override on non-acknowledging act {0}")]
    OverrideOnNonAck(GroundingAct),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActLabel {
    pub utterance_id: u32,
    pub cgu: Option<CguId>,
    pub act: GroundingAct,
    pub degree_override: Option<Degree>,
    /// Second CGU a `Use` act connects to.
    pub link: Option<CguId>,
}

impl ActLabel {
    pub fn new(utterance_id: u32, cgu: impl Into<CguId>, act: GroundingAct) -> Self {
        ActLabel {
            utterance_id,
            cgu: Some(cgu.into()),
            act,
            degree_override: None,
            link: None,
        }
    }

    pub fn none(utterance_id: u32) -> Self {
        ActLabel {
            utterance_id,
            cgu: None,
            act: GroundingAct::None,
            degree_override: None,
            link: None,
        }
    }

    pub fn ambiguous(mut self) -> Self {
        self.degree_override = Some(Degree::Ambiguous);
        self
    }

    pub fn linked(mut self, other: impl Into<CguId>) -> Self {
        self.link = Some(other.into());
        self
    }

    pub fn check(&self) -> Result<(), LabelError> {
        match (&self.cgu, self.act) {
            (Some(cgu), GroundingAct::None) => return Err(LabelError::UnexpectedCgu(cgu.clone())),
            (None, act) if act != GroundingAct::None => return Err(LabelError::MissingCgu(act)),
            _ => {}
        }
        match self.degree_override {
            Some(d) if d != Degree::Ambiguous => Err(LabelError::OverrideNotAmbiguous(d)),
            Some(_) if !self.act.is_acknowledging() => Err(LabelError::OverrideOnNonAck(self.act)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CorpusTag {
    #[serde(rename = "meetup")]
    Meetup,
    #[serde(rename = "spot_the_difference")]
    SpotTheDifference,
    #[default]
    #[serde(rename = "other")]
    Other,
}

impl CorpusTag {
    pub fn name(self) -> &'static str {
        match self {
            CorpusTag::Meetup => "meetup",
            CorpusTag::SpotTheDifference => "spot_the_difference",
            CorpusTag::Other => "other",
        }
    }
}

impl FromStr for CorpusTag {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "meetup" => Ok(CorpusTag::Meetup),
            "spot_the_difference" | "std" | "spotthedifference" => Ok(CorpusTag::SpotTheDifference),
            "other" | "" => Ok(CorpusTag::Other),
            _ => Err(ModelError::UnknownCorpus(s.to_string())),
        }
    }
}

/// Open/closed CGU columns as written in an annotation table. Loaded from
/// TSV for later comparison with replay; never used as state.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DerivedColumns {
    pub utterance_id: u32,
    pub open_cgus: Option<Vec<CguId>>,
    pub closed_cgus: Option<Vec<CguId>>,
    pub degrees: Option<Vec<Degree>>,
}

/// Violation of a dialog-level structural invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DialogError {
    #[error("utterance ids must strictly increase: {previous} then {next}")]
    NonIncreasingIds { previous: u32, next: u32 },
    #[error("timestamp decreases at utterance {0}")]
    DecreasingTimestamp(u32),
    #[error("timestamp at utterance {0} is negative or not finite")]
    BadTimestamp(u32),
    #[error("label references missing utterance {0}")]
    LabelOnMissingUtterance(u32),
    #[error("labels for utterance {0} are not grouped in utterance order")]
    LabelsOutOfOrder(u32),
    #[error("label on utterance {utterance_id}: {source}")]
    Label {
        utterance_id: u32,
        #[source]
        source: LabelError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogAnnotation {
    pub dialog_id: String,
    pub corpus: CorpusTag,
    pub utterances: Vec<Utterance>,
    pub labels: Vec<ActLabel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derived: Vec<DerivedColumns>,
}

impl DialogAnnotation {
    pub fn new(dialog_id: impl Into<String>, corpus: CorpusTag) -> Self {
        DialogAnnotation {
            dialog_id: dialog_id.into(),
            corpus,
            utterances: Vec::new(),
            labels: Vec::new(),
            derived: Vec::new(),
        }
    }

    /// Appends an utterance together with its labels. Label utterance ids are
    /// overwritten with the utterance's id.
    pub fn push(&mut self, utterance: Utterance, labels: impl IntoIterator<Item = ActLabel>) {
        let id = utterance.id;
        self.utterances.push(utterance);
        self.labels.extend(labels.into_iter().map(|mut l| {
            l.utterance_id = id;
            l
        }));
    }

    /// Labels attached to each utterance, parallel to `utterances`.
    pub fn labels_by_utterance(&self) -> Vec<&[ActLabel]> {
        let mut out = Vec::with_capacity(self.utterances.len());
        let mut rest = self.labels.as_slice();
        for utt in &self.utterances {
            let n = rest.iter().take_while(|l| l.utterance_id == utt.id).count();
            let (head, tail) = rest.split_at(n);
            out.push(head);
            rest = tail;
        }
        out
    }

    pub fn labels_for(&self, utterance_id: u32) -> impl Iterator<Item = &ActLabel> {
        self.labels.iter().filter(move |l| l.utterance_id == utterance_id)
    }

    /// Checks the structural invariants: increasing ids, non-decreasing
    /// timestamps, label well-formedness and label grouping.
    pub fn check(&self) -> Result<(), DialogError> {
        let mut prev: Option<&Utterance> = None;
        for utt in &self.utterances {
            if let Some(ts) = utt.timestamp {
                if !ts.is_finite() || ts < 0.0 {
                    return Err(DialogError::BadTimestamp(utt.id));
                }
            }
            if let Some(p) = prev {
                if utt.id <= p.id {
                    return Err(DialogError::NonIncreasingIds {
                        previous: p.id,
                        next: utt.id,
                    });
                }
                if let (Some(a), Some(b)) = (p.timestamp, utt.timestamp) {
                    if b < a {
                        return Err(DialogError::DecreasingTimestamp(utt.id));
                    }
                }
            }
            prev = Some(utt);
        }
        for label in &self.labels {
            label.check().map_err(|source| DialogError::Label {
                utterance_id: label.utterance_id,
                source,
            })?;
        }
        let grouped: usize = self.labels_by_utterance().iter().map(|g| g.len()).sum();
        if grouped != self.labels.len() {
            let stray = self.labels[grouped].utterance_id;
            return Err(if self.utterances.iter().any(|u| u.id == stray) {
                DialogError::LabelsOutOfOrder(stray)
            } else {
                DialogError::LabelOnMissingUtterance(stray)
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_published_spellings() {
        assert_eq!(parse_act("Explicit Ack.").unwrap(), GroundingAct::ExplicitAck);
        assert_eq!(parse_act("Initiate").unwrap(), GroundingAct::Initiate);
        assert_eq!(parse_act("Req-Repair").unwrap(), GroundingAct::RequestRepair);
        assert_eq!(parse_act("Move on").unwrap(), GroundingAct::MoveOn);
        assert_eq!(parse_act("Move").unwrap(), GroundingAct::MoveOn);
        assert_eq!(parse_act("Repeat-Back").unwrap(), GroundingAct::RepeatBack);
        assert_eq!(parse_act("Request-Ack.").unwrap(), GroundingAct::RequestAck);
        assert_eq!(parse_act("Use:").unwrap(), GroundingAct::Use);
        assert_eq!(parse_act("Exp-Acknowledgment").unwrap(), GroundingAct::ExplicitAck);
        assert_eq!(parse_act("explicit-acknowledgment").unwrap(), GroundingAct::ExplicitAck);
        assert_eq!(parse_act("REPEAT").unwrap(), GroundingAct::Repeat);
    }

    #[test]
    fn rejects_labels_outside_taxonomy() {
        assert_eq!(parse_act("Hold"), Err(ModelError::UnknownLabel("Hold".into())));
        assert!(parse_act("Continue/Repair").is_err());
        assert!(parse_act("").is_err());
    }

    #[test]
    fn canonical_names_round_trip() {
        for act in GroundingAct::ALL {
            assert_eq!(parse_act(act.canonical_name()).unwrap(), act);
            assert_eq!(parse_act(act.table_name()).unwrap(), act);
        }
    }

    #[test]
    fn act_classes_are_disjoint() {
        let acks: Vec<_> = GroundingAct::ALL.into_iter().filter(|a| a.is_acknowledging()).collect();
        let reopen: Vec<_> = GroundingAct::ALL.into_iter().filter(|a| a.is_reopening()).collect();
        assert_eq!(
            acks,
            [
                GroundingAct::ExplicitAck,
                GroundingAct::RepeatBack,
                GroundingAct::MoveOn,
                GroundingAct::Use
            ]
        );
        assert_eq!(
            reopen,
            [
                GroundingAct::Repair,
                GroundingAct::RequestRepair,
                GroundingAct::RequestAck
            ]
        );
        assert!(GroundingAct::ALL
            .iter()
            .all(|a| !(a.is_acknowledging() && a.is_reopening())));
    }

    #[test]
    fn label_invariants() {
        assert!(ActLabel::none(1).check().is_ok());
        assert!(ActLabel::new(1, "c1", GroundingAct::ExplicitAck).ambiguous().check().is_ok());
        let mut missing = ActLabel::none(1);
        missing.act = GroundingAct::Initiate;
        assert_eq!(missing.check(), Err(LabelError::MissingCgu(GroundingAct::Initiate)));
        let mut stray = ActLabel::new(1, "c1", GroundingAct::Initiate);
        stray.act = GroundingAct::None;
        assert!(matches!(stray.check(), Err(LabelError::UnexpectedCgu(_))));
        let mut high = ActLabel::new(1, "c1", GroundingAct::Use);
        high.degree_override = Some(Degree::High);
        assert_eq!(high.check(), Err(LabelError::OverrideNotAmbiguous(Degree::High)));
        let amb_repair = ActLabel::new(1, "c1", GroundingAct::Repair).ambiguous();
        assert_eq!(
            amb_repair.check(),
            Err(LabelError::OverrideOnNonAck(GroundingAct::Repair))
        );
    }

    #[test]
    fn dialog_check_catches_ordering_problems() {
        let mut d = DialogAnnotation::new("d", CorpusTag::Other);
        d.push(Utterance::new(1, "A", "x").at(5.0), []);
        d.push(Utterance::new(2, "B", "y").at(4.0), []);
        assert_eq!(d.check(), Err(DialogError::DecreasingTimestamp(2)));

        let mut d = DialogAnnotation::new("d", CorpusTag::Other);
        d.push(Utterance::new(2, "A", "x"), []);
        d.push(Utterance::new(2, "B", "y"), []);
        assert!(matches!(d.check(), Err(DialogError::NonIncreasingIds { .. })));

        let mut d = DialogAnnotation::new("d", CorpusTag::Other);
        d.push(Utterance::new(1, "A", "x"), []);
        d.labels.push(ActLabel::new(7, "c1", GroundingAct::Initiate));
        assert_eq!(d.check(), Err(DialogError::LabelOnMissingUtterance(7)));
    }

    #[test]
    fn labels_grouped_per_utterance() {
        let mut d = DialogAnnotation::new("d", CorpusTag::Other);
        d.push(
            Utterance::new(1, "A", "x"),
            [ActLabel::new(0, "c1", GroundingAct::Initiate)],
        );
        d.push(Utterance::new(2, "B", "y"), []);
        d.push(
            Utterance::new(3, "A", "z"),
            [
                ActLabel::new(0, "c1", GroundingAct::Use),
                ActLabel::new(0, "c2", GroundingAct::Initiate),
            ],
        );
        let groups = d.labels_by_utterance();
        assert_eq!(groups.iter().map(|g| g.len()).collect::<Vec<_>>(), [1, 0, 2]);
        assert!(d.check().is_ok());
    }
}
