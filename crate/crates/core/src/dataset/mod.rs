//! Classifier-ready instances: one input text per (utterance, candidate CGU),
//! stratified splits and class weights.

mod encode;
mod split;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encode::{memberships, render_utterance, EncodedInstance, Encoder, Focal, Markers, Memberships};
pub use split::{allocate, class_weights, stratified_split_by, Split, SplitRatios};

use crate::engine::ReplayError;
use crate::model::{CguId, GroundingAct};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("focal CGU `{0}` has no utterance in the history")]
    FocalNotInHistory(CguId),
    #[error("no instances")]
    EmptyInput,
    #[error("split ratios {0:?} do not sum to 100")]
    InvalidRatios([u32; 3]),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn stratified_split(
    instances: &[EncodedInstance],
    ratios: SplitRatios,
    seed: u64,
) -> Result<Split<EncodedInstance>, DatasetError> {
    stratified_split_by(instances, |i| i.label, ratios, seed)
}

/// Class weights over the labeled instances of a training split.
pub fn instance_class_weights(train: &[EncodedInstance]) -> Result<BTreeMap<GroundingAct, f64>, DatasetError> {
    class_weights(train.iter().filter_map(|i| i.label))
}

#[derive(Serialize, Deserialize)]
struct InstanceLine {
    input: String,
    label: Option<GroundingAct>,
    dialog_id: String,
    utt_id: u32,
    /// `null` for the fresh-CGU instance.
    focal: Option<CguId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    history_len: Option<usize>,
}

pub fn write_instances_to<W: Write>(instances: &[EncodedInstance], out: &mut W) -> Result<(), DatasetError> {
    for inst in instances {
        let line = InstanceLine {
            input: inst.input_text.clone(),
            label: inst.label,
            dialog_id: inst.dialog_id.clone(),
            utt_id: inst.utt_id,
            focal: inst.focal.cgu().cloned(),
            history_len: Some(inst.history_len),
        };
        serde_json::to_writer(&mut *out, &line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_instances_str(text: &str) -> Result<Vec<EncodedInstance>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line: InstanceLine = serde_json::from_str(l).map_err(|e| DatasetError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            Ok(EncodedInstance {
                dialog_id: line.dialog_id,
                utt_id: line.utt_id,
                focal: line.focal.map_or(Focal::Fresh, Focal::Cgu),
                input_text: line.input,
                label: line.label,
                history_len: line.history_len.unwrap_or(0),
            })
        })
        .collect()
}
