//! Per-class text statistics for a labeled corpus, printed and written as
//! CSV files.
//!
//! cargo run --example text_report -- [corpus.jsonl labels.csv [out_dir]]

use std::path::PathBuf;

use wltscan::corpus;
use wltscan::textstats::{class_report, Lexicon, ReportConfig, StatRow, Stopwords};

fn print_rows(title: &str, rows: &[StatRow]) {
    println!("{title}");
    let cell = |c: &Option<wltscan::textstats::ColumnStats>| {
        c.as_ref().map_or("-".to_string(), |s| format!("{:.1}/{:.1}/{:.0}", s.avg, s.std, s.max))
    };
    for r in rows {
        println!("  {:<24} wlt {:<18} normal {}", r.category, cell(&r.wlt), cell(&r.normal));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let (corpus_path, labels_path) = match args.as_slice() {
        [c, l, ..] => (c.clone(), l.clone()),
        _ => (fixtures.join("case_study.jsonl"), fixtures.join("case_study_labels.csv")),
    };
    let corpus = corpus::ingest(&corpus_path)?.corpus;
    let labels = corpus::load_labels(&labels_path)?;
    let report = class_report(&corpus, &labels, &Stopwords::english(), &Lexicon::english(), &ReportConfig::default());
    print_rows("text (avg/std/max)", &report.text_stats);
    print_rows("special tokens", &report.special_tokens);
    print_rows("readability", &report.readability);
    for (class, s) in &report.sentiment {
        println!("sentiment {class}: {s:?}");
    }
    if let Some(out) = args.get(2) {
        for p in report.write_to(out, &[])? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
