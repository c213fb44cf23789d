use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::corpus::format_timestamp;
use crate::engine::replay;
use crate::model::{CguId, DialogAnnotation, GroundingAct, Utterance};

/// Separator and focal-utterance marker tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Markers {
    pub focal: String,
    pub separator: String,
}

impl Default for Markers {
    fn default() -> Self {
        Markers {
            focal: "<special_token>".to_string(),
            separator: "</s>".to_string(),
        }
    }
}

/// The CGU an instance asks about: one already in the history, or a CGU the
/// next utterance might start.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Focal {
    Cgu(CguId),
    Fresh,
}

impl Focal {
    pub fn cgu(&self) -> Option<&CguId> {
        match self {
            Focal::Cgu(c) => Some(c),
            Focal::Fresh => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInstance {
    pub dialog_id: String,
    pub utt_id: u32,
    pub focal: Focal,
    pub input_text: String,
    pub label: Option<GroundingAct>,
    pub history_len: usize,
}

/// CGU ids each utterance carries a label for.
pub type Memberships = HashMap<u32, BTreeSet<CguId>>;

pub fn memberships(dialog: &DialogAnnotation) -> Memberships {
    let mut out: Memberships = HashMap::new();
    for label in &dialog.labels {
        if let Some(cgu) = &label.cgu {
            out.entry(label.utterance_id).or_default().insert(cgu.clone());
        }
    }
    out
}

/// `[mm:ss] Speaker: text`, or `Speaker: text` when untimed.
pub fn render_utterance(utt: &Utterance) -> String {
    match utt.timestamp {
        Some(ts) => format!("{} {}: {}", format_timestamp(ts), utt.speaker, utt.text),
        None => format!("{}: {}", utt.speaker, utt.text),
    }
}

/// Builds classifier input text:
///
/// ```text
/// U1</s><special_token>U2<special_token></s></s>NEXT</s>LABEL</s>
/// ```
///
/// History utterances belonging to the focal CGU are wrapped in the focal
/// marker. With `max_history` set, only the most recent utterances are kept.
#[derive(Debug, Clone, Default)]
pub struct Encoder {
    pub markers: Markers,
    pub max_history: Option<usize>,
}

impl Encoder {
    pub fn new(markers: Markers) -> Self {
        Encoder {
            markers,
            max_history: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn encode_instance(
        &self,
        dialog_id: &str,
        history: &[Utterance],
        memberships: &Memberships,
        focal: &Focal,
        next: &Utterance,
        label: Option<GroundingAct>,
    ) -> Result<EncodedInstance, DatasetError> {
        let history = self.window(history);
        if let Focal::Cgu(cgu) = focal {
            let present = history
                .iter()
                .any(|u| memberships.get(&u.id).is_some_and(|s| s.contains(cgu)));
            if !present {
                return Err(DatasetError::FocalNotInHistory(cgu.clone()));
            }
        }
        Ok(self.render(dialog_id, history, memberships, focal, next, label))
    }

    fn window<'a>(&self, history: &'a [Utterance]) -> &'a [Utterance] {
        match self.max_history {
            Some(max) if history.len() > max => &history[history.len() - max..],
            _ => history,
        }
    }

    fn render(
        &self,
        dialog_id: &str,
        history: &[Utterance],
        memberships: &Memberships,
        focal: &Focal,
        next: &Utterance,
        label: Option<GroundingAct>,
    ) -> EncodedInstance {
        let Markers { focal: mark, separator: sep } = &self.markers;
        let parts: Vec<String> = history
            .iter()
            .map(|u| {
                let text = render_utterance(u);
                let member = focal
                    .cgu()
                    .is_some_and(|c| memberships.get(&u.id).is_some_and(|s| s.contains(c)));
                if member {
                    format!("{mark}{text}{mark}")
                } else {
                    text
                }
            })
            .collect();
        let mut input = parts.join(sep);
        input.push_str(sep);
        input.push_str(sep);
        input.push_str(&render_utterance(next));
        input.push_str(sep);
        if let Some(label) = label {
            input.push_str(label.canonical_name());
            input.push_str(sep);
        }
        EncodedInstance {
            dialog_id: dialog_id.to_string(),
            utt_id: next.id,
            focal: focal.clone(),
            input_text: input,
            label,
            history_len: history.len(),
        }
    }

    /// One instance per (utterance, CGU open before it), labeled with the
    /// utterance's act on that CGU or `None`, plus one fresh-CGU instance
    /// labeled `Initiate` if the utterance starts a CGU. Output order: dialog,
    /// utterance, CGU creation order, fresh last.
    pub fn build_instances(
        &self,
        dialogs: &[DialogAnnotation],
    ) -> Result<Vec<EncodedInstance>, DatasetError> {
        let mut out = Vec::new();
        for dialog in dialogs {
            let timeline = replay(dialog)?.timeline;
            let members = memberships(dialog);
            let grouped = dialog.labels_by_utterance();
            for (pos, utt) in dialog.utterances.iter().enumerate() {
                let history = self.window(&dialog.utterances[..pos]);
                let open_before: &[CguId] = match pos {
                    0 => &[],
                    _ => &timeline.rows[pos - 1].open_after,
                };
                let labels = grouped[pos];
                for cgu in open_before {
                    let act = labels
                        .iter()
                        .find(|l| l.cgu.as_ref() == Some(cgu))
                        .map_or(GroundingAct::None, |l| l.act);
                    let focal = Focal::Cgu(cgu.clone());
                    out.push(self.render(&dialog.dialog_id, history, &members, &focal, utt, Some(act)));
                }
                let fresh = if labels.iter().any(|l| l.act == GroundingAct::Initiate) {
                    GroundingAct::Initiate
                } else {
                    GroundingAct::None
                };
                out.push(self.render(&dialog.dialog_id, history, &members, &Focal::Fresh, utt, Some(fresh)));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActLabel, CorpusTag};

    fn lamp() -> (Vec<Utterance>, Memberships, Utterance) {
        let history = vec![
            Utterance::new(1, "User1", "I see a lamp").at(15.0),
            Utterance::new(2, "User1", "go west").at(17.0),
        ];
        let mut m = Memberships::new();
        m.entry(1).or_default().insert(CguId::from("CGU 1"));
        m.entry(2).or_default().insert(CguId::from("CGU 2"));
        (history, m, Utterance::new(3, "A", "no lamp here").at(19.0))
    }

    #[test]
    fn lamp_encodings() {
        let (h, m, next) = lamp();
        let enc = Encoder::default();
        let cgu1 = enc
            .encode_instance("f7", &h, &m, &Focal::Cgu("CGU 1".into()), &next, Some(GroundingAct::Use))
            .unwrap();
        assert_eq!(
            cgu1.input_text,
            "<special_token>[00:15] User1: I see a lamp<special_token></s>[00:17] User1: go west</s></s>[00:19] A: no lamp here</s>Use</s>"
        );
        let cgu2 = enc
            .encode_instance("f7", &h, &m, &Focal::Cgu("CGU 2".into()), &next, Some(GroundingAct::None))
            .unwrap();
        assert_eq!(
            cgu2.input_text,
            "[00:15] User1: I see a lamp</s><special_token>[00:17] User1: go west<special_token></s></s>[00:19] A: no lamp here</s>None</s>"
        );
        let fresh = enc
            .encode_instance("f7", &h, &m, &Focal::Fresh, &next, Some(GroundingAct::Initiate))
            .unwrap();
        assert_eq!(
            fresh.input_text,
            "[00:15] User1: I see a lamp</s>[00:17] User1: go west</s></s>[00:19] A: no lamp here</s>Initiate</s>"
        );
        assert_eq!(fresh.history_len, 2);
    }

    #[test]
    fn empty_history_unlabeled() {
        let (_, m, next) = lamp();
        let inst = Encoder::default()
            .encode_instance("f7", &[], &m, &Focal::Fresh, &next, None)
            .unwrap();
        assert_eq!(inst.input_text, "</s></s>[00:19] A: no lamp here</s>");
    }

    #[test]
    fn focal_must_be_in_history() {
        let (h, m, next) = lamp();
        let err = Encoder::default()
            .encode_instance("f7", &h, &m, &Focal::Cgu("CGU 9".into()), &next, None)
            .unwrap_err();
        assert!(matches!(err, DatasetError::FocalNotInHistory(_)));
    }

    #[test]
    fn history_window() {
        let (h, m, next) = lamp();
        let enc = Encoder {
            max_history: Some(1),
            ..Encoder::default()
        };
        let inst = enc
            .encode_instance("f7", &h, &m, &Focal::Cgu("CGU 2".into()), &next, None)
            .unwrap();
        assert_eq!(
            inst.input_text,
            "<special_token>[00:17] User1: go west<special_token></s></s>[00:19] A: no lamp here</s>"
        );
        assert!(enc
            .encode_instance("f7", &h, &m, &Focal::Cgu("CGU 1".into()), &next, None)
            .is_err());
    }

    #[test]
    fn custom_markers() {
        let (h, m, next) = lamp();
        let enc = Encoder::new(Markers {
            focal: "<f>".into(),
            separator: " | ".into(),
        });
        let inst = enc
            .encode_instance("f7", &h, &m, &Focal::Cgu("CGU 1".into()), &next, Some(GroundingAct::Use))
            .unwrap();
        assert_eq!(
            inst.input_text,
            "<f>[00:15] User1: I see a lamp<f> | [00:17] User1: go west |  | [00:19] A: no lamp here | Use | "
        );
    }

    #[test]
    fn lamp_build() {
        let mut d = DialogAnnotation::new("f7", CorpusTag::Other);
        d.push(
            Utterance::new(1, "User1", "I see a lamp").at(15.0),
            [ActLabel::new(0, "CGU 1", GroundingAct::Initiate)],
        );
        d.push(
            Utterance::new(2, "User1", "go west").at(17.0),
            [ActLabel::new(0, "CGU 2", GroundingAct::Initiate)],
        );
        d.push(
            Utterance::new(3, "A", "no lamp here").at(19.0),
            [
                ActLabel::new(0, "CGU 1", GroundingAct::Use),
                ActLabel::new(0, "CGU 3", GroundingAct::Initiate),
            ],
        );
        let instances = Encoder::default().build_instances(&[d]).unwrap();
        // 1 + 2 + 3 instances for utterances 1..=3.
        assert_eq!(instances.len(), 6);
        let last3: Vec<_> = instances[3..].iter().map(|i| (i.focal.clone(), i.label)).collect();
        assert_eq!(
            last3,
            [
                (Focal::Cgu("CGU 1".into()), Some(GroundingAct::Use)),
                (Focal::Cgu("CGU 2".into()), Some(GroundingAct::None)),
                (Focal::Fresh, Some(GroundingAct::Initiate)),
            ]
        );
        assert_eq!(
            instances[3].input_text,
            "<special_token>[00:15] User1: I see a lamp<special_token></s>[00:17] User1: go west</s></s>[00:19] A: no lamp here</s>Use</s>"
        );
        assert_eq!((instances[0].focal.clone(), instances[0].label), (Focal::Fresh, Some(GroundingAct::Initiate)));
    }
}
