use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_dialogs, create_file, parse_timestamp, read_to_string, CorpusError, CorpusFile, Format};
use crate::engine::Timeline;
use crate::model::{
    ActLabel, CguId, CorpusTag, Degree, DialogAnnotation, GroundingAct, Utterance, UtteranceFlag,
};

pub const FORMAT_VERSION: u32 = 1;

fn default_version() -> u32 {
    FORMAT_VERSION
}

/// One line of the canonical schema. Field order here is the on-disk key
/// order.
#[derive(Debug, Serialize, Deserialize)]
struct UtteranceLine {
    #[serde(default = "default_version")]
    format_version: u32,
    dialog_id: String,
    #[serde(default)]
    corpus: CorpusTag,
    utt_id: u32,
    speaker: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ts: Option<Stamp>,
    text: String,
    #[serde(default)]
    flags: Vec<UtteranceFlag>,
    #[serde(default)]
    labels: Vec<LabelEntry>,
}

/// Timestamps are written as seconds; `"[mm:ss]"` strings are accepted on
/// input.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Stamp {
    Seconds(f64),
    Text(String),
}

/// Wire form of one label, as embedded in a corpus line or posted to the
/// annotation service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cgu: Option<CguId>,
    pub act: GroundingAct,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<Degree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<CguId>,
}

impl LabelEntry {
    pub fn into_label(self, utterance_id: u32) -> ActLabel {
        ActLabel {
            utterance_id,
            cgu: self.cgu,
            act: self.act,
            degree_override: self.degree,
            link: self.link,
        }
    }
}

impl From<&ActLabel> for LabelEntry {
    fn from(l: &ActLabel) -> Self {
        LabelEntry {
            cgu: l.cgu.clone(),
            act: l.act,
            degree: l.degree_override,
            link: l.link.clone(),
        }
    }
}

pub fn read_jsonl(path: &Path) -> Result<CorpusFile, CorpusError> {
    let text = read_to_string(path)?;
    read_jsonl_str(&text, path)
}

pub fn read_jsonl_str(text: &str, source_path: &Path) -> Result<CorpusFile, CorpusError> {
    let mut dialogs: Vec<DialogAnnotation> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| CorpusError::Parse {
            line: line_no,
            reason,
        };
        let line: UtteranceLine =
            serde_json::from_str(raw).map_err(|e| parse_err(e.to_string()))?;
        if line.format_version != FORMAT_VERSION {
            return Err(parse_err(format!(
                "unsupported format_version {}",
                line.format_version
            )));
        }
        let timestamp = match line.ts {
            None => None,
            Some(Stamp::Seconds(s)) => Some(s),
            Some(Stamp::Text(t)) => Some(parse_timestamp(&t).map_err(|e| parse_err(e.to_string()))?),
        };
        let utterance = Utterance {
            id: line.utt_id,
            speaker: line.speaker,
            timestamp,
            text: line.text,
            flags: line.flags.into_iter().collect::<BTreeSet<_>>(),
        };
        let labels = line.labels.into_iter().map(|l| l.into_label(line.utt_id));

        let continues = dialogs
            .last()
            .is_some_and(|d| d.dialog_id == line.dialog_id);
        if !continues {
            dialogs.push(DialogAnnotation::new(line.dialog_id.clone(), line.corpus));
        }
        let dialog = dialogs.last_mut().expect("pushed above");
        if dialog.corpus != line.corpus {
            return Err(CorpusError::InvariantViolation {
                dialog_id: line.dialog_id,
                reason: format!("line {line_no} changes corpus tag within the dialog"),
            });
        }
        dialog.push(utterance, labels);
    }
    check_dialogs(&dialogs)?;
    Ok(CorpusFile {
        dialogs,
        source_path: source_path.to_path_buf(),
        format: Format::Jsonl,
    })
}

pub fn write_jsonl(dialogs: &[DialogAnnotation], path: &Path) -> Result<(), CorpusError> {
    let mut out = create_file(path)?;
    write_jsonl_to(dialogs, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_jsonl_to<W: Write>(dialogs: &[DialogAnnotation], out: &mut W) -> Result<(), CorpusError> {
    for dialog in dialogs {
        for (utt, labels) in dialog.utterances.iter().zip(dialog.labels_by_utterance()) {
            let line = UtteranceLine {
                format_version: FORMAT_VERSION,
                dialog_id: dialog.dialog_id.clone(),
                corpus: dialog.corpus,
                utt_id: utt.id,
                speaker: utt.speaker.clone(),
                ts: utt.timestamp.map(Stamp::Seconds),
                text: utt.text.clone(),
                flags: utt.flags.iter().copied().collect(),
                labels: labels.iter().map(LabelEntry::from).collect(),
            };
            serde_json::to_writer(&mut *out, &line).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TimelineLine<'a> {
    dialog_id: &'a str,
    #[serde(flatten)]
    row: &'a crate::engine::TimelineRow,
}

/// One JSON object per timeline row, tagged with its dialog id.
pub fn write_timeline_jsonl_to<W: Write>(timelines: &[Timeline], out: &mut W) -> Result<(), CorpusError> {
    for t in timelines {
        for row in &t.rows {
            let line = TimelineLine {
                dialog_id: &t.dialog_id,
                row,
            };
            serde_json::to_writer(&mut *out, &line).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
