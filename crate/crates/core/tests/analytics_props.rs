use std::collections::BTreeMap;

use groundwork_core::analytics::{act_histogram, cohen_kappa, trajectory_stats, KappaError};
use groundwork_core::model::GroundingAct;
use groundwork_testkit::fixtures::{cancel_dialog, repair_dialog};
use groundwork_testkit::generate::{arb_corpus, arb_dialog};
use groundwork_testkit::oracle::{first_grounding_spans, kappa_contingency};
use proptest::prelude::*;

proptest! {
    #[test]
    fn spans_match_oracle(dialog in arb_dialog()) {
        let stats = trajectory_stats(std::slice::from_ref(&dialog)).unwrap();
        let engine: BTreeMap<_, _> = stats.spans.iter().map(|s| (s.cgu.clone(), s.span)).collect();
        prop_assert_eq!(engine, first_grounding_spans(&dialog));
    }

    #[test]
    fn histogram_counts_sum_to_total(dialogs in arb_corpus()) {
        let h = act_histogram(&dialogs);
        let non_none: u64 = GroundingAct::ALL
            .iter()
            .filter(|a| **a != GroundingAct::None)
            .map(|a| h.count(*a))
            .sum();
        prop_assert_eq!(non_none, h.total_acts);
        if h.total_acts > 0 {
            let pct: f64 = h.table_rows().iter().map(|r| r.2).sum();
            prop_assert!((pct - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kappa_matches_contingency_oracle(
        pairs in prop::collection::vec((0u8..5, 0u8..5), 1..60)
    ) {
        let (a, b): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let k = cohen_kappa(&a, &b).unwrap();
        prop_assert!((k - kappa_contingency(&a, &b)).abs() < 1e-9);
        prop_assert!((k - cohen_kappa(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
    }

    #[test]
    fn kappa_identity_is_one(a in prop::collection::vec(0u8..6, 1..50)) {
        prop_assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
    }
}

#[test]
fn hand_derived_kappa() {
    let a = ["x", "x", "y", "y"];
    let b = ["x", "y", "y", "y"];
    assert!((cohen_kappa(&a, &b).unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn kappa_rejects_bad_input() {
    assert_eq!(cohen_kappa::<u8>(&[], &[]), Err(KappaError::EmptyInput));
    assert!(matches!(cohen_kappa(&[1], &[1, 2]), Err(KappaError::LengthMismatch { .. })));
}

#[test]
fn cancel_trajectory() {
    let stats = trajectory_stats(&[cancel_dialog()]).unwrap();
    assert_eq!(stats.revisit_count, 1);
    assert_eq!(stats.grounded_in_next_count, 2);
    assert_eq!(stats.max_span, 1);
    assert_eq!(stats.revisits_without_timestamps, 1);
    assert_eq!(stats.ambiguous_count, 0);
}

#[test]
fn repair_trajectory() {
    let stats = trajectory_stats(&[repair_dialog()]).unwrap();
    assert_eq!(stats.span_histogram, BTreeMap::from([(3, 1)]));
    assert_eq!(stats.grounded_in_next_count, 0);
    assert_eq!(stats.revisit_count, 0);
}
