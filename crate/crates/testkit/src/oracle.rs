//! Independent reference computations.
//!
//! Lifecycle state is recomputed from scratch for every label prefix by plain
//! set maintenance: `created`, `grounded` and `canceled` sets plus a degree
//! map. Nothing here calls into `groundwork_core::engine`.

use std::collections::{BTreeMap, BTreeSet};

use groundwork_core::model::{CguId, Degree, DialogAnnotation, GroundingAct};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleState {
    pub created: Vec<CguId>,
    pub grounded: BTreeSet<CguId>,
    pub canceled: BTreeSet<CguId>,
    pub degree: BTreeMap<CguId, Degree>,
    pub stashed: BTreeMap<CguId, Degree>,
    pub reopens: BTreeMap<CguId, u32>,
    /// CGUs grounded at any point, even if reopened later in the same utterance.
    pub ever_grounded: BTreeSet<CguId>,
}

impl OracleState {
    pub fn open(&self) -> Vec<CguId> {
        self.created
            .iter()
            .filter(|c| !self.grounded.contains(*c) && !self.canceled.contains(*c))
            .cloned()
            .collect()
    }
}

fn degree_of(act: GroundingAct, ambiguous: bool) -> Degree {
    if ambiguous {
        return Degree::Ambiguous;
    }
    match act {
        GroundingAct::RepeatBack => Degree::High,
        GroundingAct::MoveOn => Degree::Low,
        _ => Degree::Medium,
    }
}

/// State after the first `upto` utterances of `dialog`.
pub fn state_after(dialog: &DialogAnnotation, upto: usize) -> OracleState {
    use GroundingAct::*;
    let ids: BTreeSet<u32> = dialog.utterances[..upto].iter().map(|u| u.id).collect();
    let mut s = OracleState::default();
    for label in dialog.labels.iter().filter(|l| ids.contains(&l.utterance_id)) {
        let Some(c) = label.cgu.clone() else { continue };
        let open: BTreeSet<CguId> = s.open().into_iter().collect();
        let is_grounded = s.grounded.contains(&c);
        match label.act {
            Initiate => s.created.push(c),
            Repair | RequestRepair | RequestAck if is_grounded => {
                s.grounded.remove(&c);
                if let Some(d) = s.degree.remove(&c) {
                    s.stashed.insert(c.clone(), d);
                }
                *s.reopens.entry(c).or_default() += 1;
            }
            ExplicitAck | RepeatBack | MoveOn | Use if open.contains(&c) => {
                let d = degree_of(label.act, label.degree_override == Some(Degree::Ambiguous));
                s.grounded.insert(c.clone());
                s.ever_grounded.insert(c.clone());
                s.degree.insert(c, d);
            }
            Cancel if open.contains(&c) => match s.stashed.get(&c).copied() {
                Some(d) => {
                    s.grounded.insert(c.clone());
                    s.degree.insert(c, d);
                }
                Option::None => {
                    s.canceled.insert(c);
                }
            },
            Cancel if is_grounded => {
                s.grounded.remove(&c);
                s.degree.remove(&c);
                s.canceled.insert(c);
            }
            _ => {}
        }
    }
    s
}

/// Open-CGU list after each utterance, recomputed per prefix.
pub fn open_sets(dialog: &DialogAnnotation) -> Vec<Vec<CguId>> {
    (1..=dialog.utterances.len())
        .map(|k| state_after(dialog, k).open())
        .collect()
}

/// First-grounding span per CGU: utterance position of first grounding minus
/// position of initiation.
pub fn first_grounding_spans(dialog: &DialogAnnotation) -> BTreeMap<CguId, usize> {
    let states: Vec<OracleState> = (0..=dialog.utterances.len())
        .map(|k| state_after(dialog, k))
        .collect();
    let mut spans = BTreeMap::new();
    for c in &states.last().unwrap().created {
        let init = (1..states.len())
            .find(|&k| states[k].created.contains(c))
            .unwrap()
            - 1;
        if let Some(k) = (1..states.len()).find(|&k| states[k].ever_grounded.contains(c)) {
            spans.insert(c.clone(), k - 1 - init);
        }
    }
    spans
}

/// Number of instances the dataset builder must produce:
/// sum over utterances of (CGUs open before it + 1).
pub fn instance_count(dialog: &DialogAnnotation) -> usize {
    (0..dialog.utterances.len())
        .map(|k| state_after(dialog, k).open().len() + 1)
        .sum()
}

/// Cohen's kappa from a full contingency table over the sorted union of
/// categories.
pub fn kappa_contingency<T: Ord + Clone>(a: &[T], b: &[T]) -> f64 {
    let cats: Vec<T> = a
        .iter()
        .chain(b)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = cats.len();
    let pos = |x: &T| cats.iter().position(|c| c == x).unwrap();
    let mut table = vec![vec![0u64; k]; k];
    for (x, y) in a.iter().zip(b) {
        table[pos(x)][pos(y)] += 1;
    }
    let n = a.len() as f64;
    let po = (0..k).map(|i| table[i][i]).sum::<u64>() as f64 / n;
    let pe: f64 = (0..k)
        .map(|i| {
            let row: u64 = table[i].iter().sum();
            let col: u64 = table.iter().map(|r| r[i]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    if pe == 1.0 {
        1.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}
