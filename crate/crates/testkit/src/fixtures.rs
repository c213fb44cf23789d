//! Dialogs reproduced from the worked examples: the four-utterance repair
//! sequence, the canceled request-repair, and the three-utterance classifier
//! input example.

use groundwork_core::model::{ActLabel, CorpusTag, DialogAnnotation, GroundingAct, Utterance};
use GroundingAct::*;

pub fn repair_dialog() -> DialogAnnotation {
    let mut d = DialogAnnotation::new("repair", CorpusTag::SpotTheDifference);
    d.push(
        Utterance::new(1, "User1", "And I see one stone only"),
        [ActLabel::new(0, "CGU 1", Initiate)],
    );
    d.push(
        Utterance::new(2, "User2", "Only one?"),
        [ActLabel::new(0, "CGU 1", RequestRepair)],
    );
    d.push(
        Utterance::new(3, "User1", "yes one big stone"),
        [ActLabel::new(0, "CGU 1", Repair)],
    );
    d.push(
        Utterance::new(4, "User2", "Okay yeah"),
        [ActLabel::new(0, "CGU 1", ExplicitAck)],
    );
    d
}

pub fn cancel_dialog() -> DialogAnnotation {
    let mut d = DialogAnnotation::new("cancel", CorpusTag::Meetup);
    let rows = [
        ("A", "Is there a bed?", "CGU 1", Initiate),
        ("B", "yes", "CGU 1", Use),
        ("A", "A chair?", "CGU 2", Initiate),
        ("B", "yes", "CGU 2", Use),
        ("A", "Was there a bed again?", "CGU 1", RequestRepair),
        ("A", "ah yes, never mind", "CGU 1", Cancel),
    ];
    for (i, (speaker, text, cgu, act)) in rows.into_iter().enumerate() {
        d.push(
            Utterance::new(i as u32 + 1, speaker, text),
            [ActLabel::new(0, cgu, act)],
        );
    }
    d
}

pub fn lamp_dialog() -> DialogAnnotation {
    let mut d = DialogAnnotation::new("lamp", CorpusTag::Meetup);
    d.push(
        Utterance::new(1, "User1", "I see a lamp").at(15.0),
        [ActLabel::new(0, "CGU 1", Initiate)],
    );
    d.push(
        Utterance::new(2, "User1", "go west").at(17.0),
        [ActLabel::new(0, "CGU 2", Initiate)],
    );
    d.push(
        Utterance::new(3, "A", "no lamp here").at(19.0),
        [ActLabel::new(0, "CGU 1", Use), ActLabel::new(0, "CGU 3", Initiate)],
    );
    d
}

/// The classifier inputs printed for the next utterance of [`lamp_dialog`].
pub const LAMP_ENCODINGS: [&str; 3] = [
    "<special_token>[00:15] User1: I see a lamp<special_token></s>[00:17] User1: go west</s></s>[00:19] A: no lamp here</s>Use</s>",
    "[00:15] User1: I see a lamp</s><special_token>[00:17] User1: go west<special_token></s></s>[00:19] A: no lamp here</s>None</s>",
    "[00:15] User1: I see a lamp</s>[00:17] User1: go west</s></s>[00:19] A: no lamp here</s>Initiate</s>",
];
