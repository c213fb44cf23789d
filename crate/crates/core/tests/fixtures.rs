use std::path::PathBuf;

use groundwork_core::corpus::{read_corpus, write_jsonl_to, write_tsv_to};
use groundwork_core::engine::{replay, ClosedCgu};
use groundwork_core::model::{CguId, Degree, DialogAnnotation};
use groundwork_testkit::fixtures::{cancel_dialog, lamp_dialog, repair_dialog};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn ids(xs: &[&str]) -> Vec<CguId> {
    xs.iter().map(|x| CguId::new(*x)).collect()
}

#[test]
fn repair_sequence_closes_at_four_with_medium() {
    let r = replay(&repair_dialog()).unwrap();
    let open: Vec<Vec<CguId>> = r.timeline.rows.iter().map(|x| x.open_after.clone()).collect();
    assert_eq!(open, vec![ids(&["CGU 1"]), ids(&["CGU 1"]), ids(&["CGU 1"]), vec![]]);
    assert_eq!(
        r.timeline.rows[3].closed_here,
        vec![ClosedCgu { cgu: CguId::new("CGU 1"), degree: Degree::Medium }]
    );
    assert!(r.timeline.rows[..3].iter().all(|row| row.closed_here.is_empty()));
    assert!(r.session.open_cgus().is_empty());
}

#[test]
fn cancel_after_reopen_restores_degree() {
    let r = replay(&cancel_dialog()).unwrap();
    assert_eq!(r.timeline.rows[4].reopened_here, ids(&["CGU 1"]));
    assert_eq!(r.timeline.rows[4].open_after, ids(&["CGU 1"]));
    assert_eq!(
        r.timeline.rows[5].closed_here,
        vec![ClosedCgu { cgu: CguId::new("CGU 1"), degree: Degree::Medium }]
    );
    assert_eq!(r.session.grounded_cgus(), ids(&["CGU 1", "CGU 2"]));
    assert!(r.session.canceled_cgus().is_empty());
}

fn check_file(name: &str, rendered: Vec<u8>) {
    let path = fixture_dir().join(name);
    if std::env::var_os("GROUNDWORK_BLESS").is_some() {
        std::fs::write(&path, &rendered).unwrap();
    }
    let on_disk = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(String::from_utf8(on_disk).unwrap(), String::from_utf8(rendered).unwrap());
}

fn jsonl(d: DialogAnnotation) -> Vec<u8> {
    let mut out = Vec::new();
    write_jsonl_to(&[d], &mut out).unwrap();
    out
}

#[test]
fn fixture_files_match_builders() {
    check_file("repair.jsonl", jsonl(repair_dialog()));
    check_file("cancel.jsonl", jsonl(cancel_dialog()));
    check_file("lamp.jsonl", jsonl(lamp_dialog()));
    let mut tsv = Vec::new();
    write_tsv_to(&[cancel_dialog()], &mut tsv).unwrap();
    check_file("cancel.tsv", tsv);
}

#[test]
fn fixture_files_load_back() {
    for (name, expected) in [("repair.jsonl", repair_dialog()), ("cancel.tsv", cancel_dialog()), ("lamp.jsonl", lamp_dialog())] {
        let file = read_corpus(&fixture_dir().join(name), None).unwrap();
        assert_eq!(file.dialogs.len(), 1);
        let got = &file.dialogs[0];
        assert_eq!(got.utterances, expected.utterances, "{name}");
        assert_eq!(got.labels, expected.labels, "{name}");
    }
}
