//! Deterministic dataset export: the same state always yields the same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::state::{Provenance, RoundState};
use crate::corpus::{looks_english, Corpus, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub round_index: usize,
    pub model_snapshot_id: String,
    pub corpus_fingerprint: String,
    pub labeled: usize,
    pub positives: usize,
    pub negatives: usize,
    pub conflicts: usize,
    pub pool: usize,
    /// Adopted posts by provenance (`seed`, `round_1`, ...).
    pub adopted: BTreeMap<String, usize>,
    /// Labeled posts left out by the English-only filter.
    pub non_english_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelRow {
    pub post_id: String,
    pub label: Label,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub labels: Vec<LabelRow>,
    pub dataset_jsonl: Vec<u8>,
    pub labels_csv: Vec<u8>,
    pub conflicts_csv: Vec<u8>,
    pub manifest: Manifest,
}

pub fn export(state: &RoundState, corpus: &Corpus, english_only: bool) -> Result<Export> {
    let mut dataset = Vec::new();
    let mut labels = csv::Writer::from_writer(Vec::new());
    labels.write_record(["post_id", "label", "provenance"])?;
    let mut rows = Vec::new();
    let mut dropped = 0;
    let (mut pos, mut neg) = (0, 0);
    let mut adopted: BTreeMap<Provenance, usize> = BTreeMap::new();
    for (id, e) in &state.labeled {
        let post = corpus
            .get(id)
            .ok_or_else(|| Error::Invariant(format!("labeled post {id} not in corpus")))?;
        if english_only && !looks_english(&post.text) {
            dropped += 1;
            continue;
        }
        serde_json::to_writer(&mut dataset, post)?;
        dataset.push(b'\n');
        labels.write_record([id.as_str(), &e.label.as_u8().to_string(), &e.provenance.to_string()])?;
        rows.push(LabelRow { post_id: id.clone(), label: e.label, provenance: e.provenance });
        match e.label {
            Label::Wlt => pos += 1,
            Label::Normal => neg += 1,
        }
        *adopted.entry(e.provenance).or_default() += 1;
    }
    let mut conflicts = csv::Writer::from_writer(Vec::new());
    conflicts.write_record(["post_id", "votes"])?;
    for (id, votes) in &state.conflicts {
        let v: Vec<String> = votes.iter().map(|(a, l)| format!("{a}={}", l.as_u8())).collect();
        conflicts.write_record([id.as_str(), &v.join(";")])?;
    }
    let into_bytes = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| Error::Invariant(e.to_string()));
    Ok(Export {
        labels: rows,
        dataset_jsonl: dataset,
        labels_csv: into_bytes(labels)?,
        conflicts_csv: into_bytes(conflicts)?,
        manifest: Manifest {
            round_index: state.round_index,
            model_snapshot_id: state.model_snapshot_id.clone(),
            corpus_fingerprint: state.corpus_fingerprint.clone(),
            labeled: pos + neg,
            positives: pos,
            negatives: neg,
            conflicts: state.conflicts.len(),
            pool: state.pool_len(),
            adopted: adopted.into_iter().map(|(p, n)| (p.to_string(), n)).collect(),
            non_english_dropped: dropped,
        },
    })
}

impl Export {
    /// Writes `dataset.jsonl`, `labels.csv`, `conflicts.csv` and
    /// `manifest.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = serde_json::to_vec_pretty(&self.manifest)?;
        manifest.push(b'\n');
        for (name, bytes) in [
            ("dataset.jsonl", &self.dataset_jsonl),
            ("labels.csv", &self.labels_csv),
            ("conflicts.csv", &self.conflicts_csv),
            ("manifest.json", &manifest),
        ] {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
