use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::sync::Arc;

use wltscan::corpus::Label;
use wltscan::hitl::eventlog::LOG_FILE;
use wltscan::hitl::sim::{annotate_all, synthetic_seeds};
use wltscan::hitl::{export, recover_state, HitlConfig, Service, Verdict};
use wltscan::model::WordFilter;
use wltscan::socialgraph::{synthesize_source, SyntheticParams, SyntheticSource};

fn setup() -> (SyntheticSource, BTreeSet<String>, BTreeSet<String>) {
    let source = synthesize_source(11, &SyntheticParams::default()).unwrap();
    let (posts, users) = synthetic_seeds(&source, 3, 9);
    (source, posts, users)
}

#[test]
fn restart_resumes_and_export_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (source, posts, users) = setup();
    let corpus = Arc::new(source.corpus().clone());
    let config = HitlConfig { n_bootstrap: 3, k: 20, seed: 11, ..HitlConfig::default() };
    let svc = Service::bootstrap(corpus.clone(), &posts, &users, config, Arc::new(WordFilter::default()), Some(dir.path()))
        .unwrap();
    annotate_all(&svc, source.planted(), &["a", "b"]).unwrap();
    svc.run_round().unwrap();
    let first = svc.state().pending_queue[0].post_id.clone();
    svc.submit("a", &first, Verdict::Label(Label::Wlt)).unwrap();
    let before = svc.state();
    let exported = export(&before, &corpus, false).unwrap();
    drop(svc);

    let reopened = Service::open(dir.path(), corpus.clone(), Arc::new(WordFilter::default())).unwrap();
    assert_eq!(*reopened.state(), *before);
    let again = export(&recover_state(dir.path(), &corpus).unwrap(), &corpus, false).unwrap();
    assert_eq!(again.labels_csv, exported.labels_csv);
    assert_eq!(again.dataset_jsonl, exported.dataset_jsonl);

    // A crash mid-append leaves a partial line; it is dropped on reopen.
    drop(reopened);
    let mut f = OpenOptions::new().append(true).open(dir.path().join(LOG_FILE)).unwrap();
    f.write_all(br#"{"seq":99999,"ts":"2024"#).unwrap();
    drop(f);
    let recovered = Service::open(dir.path(), corpus.clone(), Arc::new(WordFilter::default())).unwrap();
    assert_eq!(*recovered.state(), *before);
    recovered.submit("b", &first, Verdict::Label(Label::Wlt)).unwrap();
    let after = Service::open(dir.path(), corpus, Arc::new(WordFilter::default()))
        .map(|s| s.state().labeled.contains_key(&first));
    assert!(matches!(after, Ok(true)));
}
