use std::path::{Path, PathBuf};

use wltscan::corpus::{self, mask_text, Label};
use wltscan::eval;
use wltscan::model::{Scorer, WordFilter};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn word_filter_on_case_study() {
    let corpus = corpus::ingest(&fixtures().join("case_study.jsonl")).unwrap().corpus;
    let labels = corpus::load_labels(&fixtures().join("case_study_labels.csv")).unwrap();
    assert_eq!(corpus.len(), 9);
    let filter = WordFilter::default();
    let flagged: Vec<&str> =
        corpus.posts().filter(|p| filter.predict(p).is_positive()).map(|p| p.post_id.as_str()).collect();
    assert_eq!(flagged, ["case_0", "case_b", "case_c", "case_d", "case_e", "case_f", "case_g", "case_h"]);

    let truth: Vec<Label> = corpus.posts().map(|p| labels[&p.post_id]).collect();
    let pred: Vec<Label> = corpus.posts().map(|p| filter.predict(p)).collect();
    let counts = eval::confusion(&truth, &pred).unwrap();
    assert_eq!((counts.tp, counts.fp, counts.fn_, counts.tn), (4, 4, 1, 0));
    let refs: Vec<_> = corpus.posts().collect();
    let scores: Vec<(f64, Label)> =
        filter.score_batch(&refs).into_iter().zip(&truth).map(|(s, l)| (s.unwrap(), *l)).collect();
    let r = eval::metrics(&counts, Some(&scores));
    assert!((r.precision_pos - 0.5).abs() < 1e-12);
    assert!((r.recall_pos - 0.8).abs() < 1e-12);
}

#[test]
fn first_post_masks_mention_and_url() {
    let corpus = corpus::ingest(&fixtures().join("case_study.jsonl")).unwrap().corpus;
    let masked = mask_text(&corpus.get("case_0").unwrap().text);
    assert!(masked.ends_with("{{MENTION}} {{URL}}."), "{masked}");
    assert!(!masked.contains("t.co") && !masked.contains("@fine"));
}
