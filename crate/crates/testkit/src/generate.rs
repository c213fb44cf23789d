//! Random legal dialogs over the full act alphabet.
//!
//! A dialog is generated as a list of raw choices and then interpreted
//! against a running oracle state so that every label is legal: no act on a
//! canceled CGU, no duplicate Initiate, no grounding of a CGU initiated by the
//! same utterance. Choices that would be illegal become `None` labels.

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use groundwork_core::model::{
    ActLabel, CguId, CorpusTag, DialogAnnotation, GroundingAct, Utterance, UtteranceFlag,
};

use crate::oracle::state_after;

pub const MAX_UTTERANCES: usize = 12;
pub const MAX_CGUS: usize = 4;

#[derive(Debug, Clone)]
struct RawLabel {
    act: usize,
    pick: usize,
    ambiguous: bool,
}

#[derive(Debug, Clone)]
struct RawUtterance {
    speaker: bool,
    gap: u8,
    words: u8,
    flag: u8,
    labels: Vec<RawLabel>,
}

fn raw_utterance() -> impl Strategy<Value = RawUtterance> {
    let label = (0..GroundingAct::ALL.len(), 0..MAX_CGUS, prop::bool::weighted(0.15))
        .prop_map(|(act, pick, ambiguous)| RawLabel { act, pick, ambiguous });
    (
        any::<bool>(),
        0u8..20,
        1u8..15,
        0u8..12,
        prop::collection::vec(label, 0..=2),
    )
        .prop_map(|(speaker, gap, words, flag, labels)| RawUtterance {
            speaker,
            gap,
            words,
            flag,
            labels,
        })
}

const WORDS: [&str; 8] = ["is", "there", "a", "red", "lamp", "near", "the", "door"];

fn build(dialog_id: &str, raw: Vec<RawUtterance>, timed: bool) -> DialogAnnotation {
    let mut dialog = DialogAnnotation::new(dialog_id, CorpusTag::Other);
    let mut ts = 0.0;
    for (i, r) in raw.into_iter().enumerate() {
        let id = i as u32 + 1;
        ts += r.gap as f64;
        let text: Vec<&str> = (0..r.words as usize).map(|w| WORDS[w % WORDS.len()]).collect();
        let mut utt = Utterance::new(id, if r.speaker { "A" } else { "B" }, text.join(" "));
        if timed {
            utt.timestamp = Some(ts);
        }
        match r.flag {
            0 => {
                utt.flags.insert(UtteranceFlag::Revised);
            }
            1 => {
                utt.flags.insert(UtteranceFlag::Overlap);
            }
            2 => {
                utt.flags.insert(UtteranceFlag::Murmur);
            }
            _ => {}
        }

        let before = state_after(&dialog, dialog.utterances.len());
        let mut created = before.created.clone();
        let mut canceled = before.canceled.clone();
        let mut initiated_here: Vec<CguId> = Vec::new();
        let mut labels = Vec::new();
        for rl in r.labels {
            let act = GroundingAct::ALL[rl.act];
            let label = match act {
                GroundingAct::None => ActLabel::none(id),
                GroundingAct::Initiate if created.len() < MAX_CGUS => {
                    let c = CguId::new(format!("c{}", created.len() + 1));
                    created.push(c.clone());
                    initiated_here.push(c.clone());
                    ActLabel::new(id, c, act)
                }
                GroundingAct::Initiate => ActLabel::none(id),
                _ => {
                    let live: Vec<&CguId> = created
                        .iter()
                        .filter(|c| !canceled.contains(*c))
                        .filter(|c| !(act.is_acknowledging() && initiated_here.contains(c)))
                        .collect();
                    if live.is_empty() {
                        ActLabel::none(id)
                    } else {
                        let c = live[rl.pick % live.len()].clone();
                        let mut l = ActLabel::new(id, c, act);
                        if act.is_acknowledging() && rl.ambiguous {
                            l = l.ambiguous();
                        }
                        l
                    }
                }
            };
            labels.push(label);
            // Track cancellations inside this utterance via the oracle.
            let mut probe = dialog.clone();
            probe.push(utt.clone(), labels.clone());
            canceled = state_after(&probe, probe.utterances.len()).canceled;
        }
        dialog.push(utt, labels);
    }
    dialog
}

/// Legal dialogs with 0..=12 utterances and at most 4 CGUs.
pub fn arb_dialog() -> impl Strategy<Value = DialogAnnotation> {
    (
        prop::collection::vec(raw_utterance(), 0..=MAX_UTTERANCES),
        any::<bool>(),
    )
        .prop_map(|(raw, timed)| build("gen", raw, timed))
}

/// Several dialogs with distinct ids.
pub fn arb_corpus() -> impl Strategy<Value = Vec<DialogAnnotation>> {
    prop::collection::vec(arb_dialog(), 0..5).prop_map(|ds| {
        ds.into_iter()
            .enumerate()
            .map(|(i, mut d)| {
                d.dialog_id = format!("gen-{i}");
                d
            })
            .collect()
    })
}

/// Deterministic sample of `n` generated dialogs.
pub fn sample_dialogs(n: usize, seed: u64) -> Vec<DialogAnnotation> {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &bytes);
    let mut runner = TestRunner::new_with_rng(Config::default(), rng);
    let strategy = arb_dialog();
    (0..n)
        .map(|i| {
            let mut d = strategy.new_tree(&mut runner).expect("strategy").current();
            d.dialog_id = format!("gen-{i}");
            d
        })
        .collect()
}
