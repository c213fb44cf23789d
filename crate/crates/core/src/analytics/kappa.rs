use std::collections::HashMap;
use std::hash::Hash;

use thiserror::Error;

use crate::model::{DialogAnnotation, GroundingAct};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KappaError {
    #[error("rater sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("no items to compare")]
    EmptyInput,
    #[error("annotation files are not aligned: {0}")]
    Misaligned(String),
}

/// Cohen's kappa between two raters' labels for the same items.
///
/// Expected agreement uses each rater's own marginals. When both raters use a
/// single identical category throughout, agreement is perfect and chance
/// agreement is 1; kappa is defined as 1 in that case.
pub fn cohen_kappa<T: Eq + Hash>(labels_a: &[T], labels_b: &[T]) -> Result<f64, KappaError> {
    if labels_a.len() != labels_b.len() {
        return Err(KappaError::LengthMismatch {
            left: labels_a.len(),
            right: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(KappaError::EmptyInput);
    }
    let n = labels_a.len() as f64;
    let mut marginals: HashMap<&T, (usize, usize)> = HashMap::new();
    let mut agree = 0usize;
    for (a, b) in labels_a.iter().zip(labels_b) {
        marginals.entry(a).or_default().0 += 1;
        marginals.entry(b).or_default().1 += 1;
        agree += usize::from(a == b);
    }
    let observed = agree as f64 / n;
    let expected: f64 = marginals
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();
    if (1.0 - expected).abs() < f64::EPSILON {
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// First-listed act per utterance for two annotations of the same dialogs,
/// aligned by dialog id and utterance id. Utterances without labels count as
/// `None`.
pub fn paired_primary_acts(
    a: &[DialogAnnotation],
    b: &[DialogAnnotation],
) -> Result<(Vec<GroundingAct>, Vec<GroundingAct>), KappaError> {
    let by_id: HashMap<&str, &DialogAnnotation> =
        b.iter().map(|d| (d.dialog_id.as_str(), d)).collect();
    if a.len() != b.len() {
        return Err(KappaError::Misaligned(format!(
            "{} dialogs vs {} dialogs",
            a.len(),
            b.len()
        )));
    }
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for da in a {
        let db = by_id
            .get(da.dialog_id.as_str())
            .ok_or_else(|| KappaError::Misaligned(format!("dialog `{}` missing", da.dialog_id)))?;
        let ids_a: Vec<u32> = da.utterances.iter().map(|u| u.id).collect();
        let ids_b: Vec<u32> = db.utterances.iter().map(|u| u.id).collect();
        if ids_a != ids_b {
            return Err(KappaError::Misaligned(format!(
                "dialog `{}` has different utterances",
                da.dialog_id
            )));
        }
        left.extend(primary(da));
        right.extend(primary(db));
    }
    Ok((left, right))
}

fn primary(d: &DialogAnnotation) -> impl Iterator<Item = GroundingAct> + '_ {
    d.labels_by_utterance()
        .into_iter()
        .map(|labels| labels.first().map_or(GroundingAct::None, |l| l.act))
}
