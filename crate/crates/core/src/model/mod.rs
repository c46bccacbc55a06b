//! Post scorers and their training.
//!
//! Every scorer maps posts to probabilities in `[0, 1]`, or to `None` when a
//! score could not be produced. Hard predictions use `score >= threshold`.

mod calibrate;
mod external;
mod features;
mod linear;
mod wordfilter;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Label, Post};
use crate::error::{Error, Result};
use crate::textstats::Lexicon;

pub use calibrate::{calibrate_threshold, candidate_thresholds, Calibration};
pub use external::{
    build_request, ExternalScorer, ExternalScorerSpec, ImageLayout, InputVariant, ScoreRequest,
    ScoreResponse, Transport,
};
pub use features::{ngrams, FeatureVector, Featurizer, TfidfVocab, HANDCRAFTED, HANDCRAFTED_LEN};
pub use linear::{loss_and_gradient, sigmoid, train_linear, ClassWeights, Hyper, LinearModel, PROB_EPS};
pub use wordfilter::WordFilter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    WordFilter,
    Linear,
    External,
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wordfilter" | "word_filter" => Ok(ScorerKind::WordFilter),
            "linear" => Ok(ScorerKind::Linear),
            "external" => Ok(ScorerKind::External),
            other => Err(Error::InvalidInput(format!("unknown model kind {other:?}"))),
        }
    }
}

impl ScorerKind {
    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::WordFilter => "wordfilter",
            ScorerKind::Linear => "linear",
            ScorerKind::External => "external",
        }
    }
}

impl std::fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub trait Scorer: Send + Sync {
    fn kind(&self) -> ScorerKind;
    /// One entry per post, in order.
    fn score_batch(&self, posts: &[&Post]) -> Vec<Option<f64>>;
}

/// Produces a fresh scorer from labeled train and dev posts.
pub trait Trainer: Send + Sync {
    fn train(&self, train: &[(&Post, Label)], dev: &[(&Post, Label)]) -> Result<Box<dyn Scorer>>;
}

/// SHA-256 over sorted post ids, hex encoded.
pub fn split_fingerprint<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub featurizer: Featurizer,
    pub model: LinearModel,
}

impl LinearScorer {
    pub fn predict_proba(&self, post: &Post) -> f64 {
        self.model.predict_proba(&self.featurizer.featurize(post))
    }
}

impl Scorer for LinearScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::Linear
    }

    fn score_batch(&self, posts: &[&Post]) -> Vec<Option<f64>> {
        posts.iter().map(|p| Some(self.predict_proba(p))).collect()
    }
}

/// Fits the vocabulary on the training texts, then trains the linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrainer {
    pub hyper: Hyper,
    pub min_df: usize,
    pub lexicon: Lexicon,
}

impl Default for LinearTrainer {
    fn default() -> Self {
        LinearTrainer { hyper: Hyper::default(), min_df: 1, lexicon: Lexicon::english() }
    }
}

impl LinearTrainer {
    pub fn fit(&self, train: &[(&Post, Label)], dev: &[(&Post, Label)]) -> Result<LinearScorer> {
        let vocab = TfidfVocab::fit(train.iter().map(|(p, _)| p.text.as_str()), self.min_df);
        let featurizer = Featurizer::new(vocab, self.lexicon.clone());
        let encode = |set: &[(&Post, Label)]| -> Vec<(FeatureVector, Label)> {
            set.iter().map(|(p, y)| (featurizer.featurize(p), *y)).collect()
        };
        let mut model = train_linear(&encode(train), &encode(dev), featurizer.dim(), &self.hyper)?;
        model.trained_on = split_fingerprint(train.iter().map(|(p, _)| p.post_id.as_str()));
        Ok(LinearScorer { featurizer, model })
    }
}

impl Trainer for LinearTrainer {
    fn train(&self, train: &[(&Post, Label)], dev: &[(&Post, Label)]) -> Result<Box<dyn Scorer>> {
        Ok(Box::new(self.fit(train, dev)?))
    }
}

/// The external model is trained elsewhere; training is a no-op.
impl Trainer for ExternalScorer {
    fn train(&self, _: &[(&Post, Label)], _: &[(&Post, Label)]) -> Result<Box<dyn Scorer>> {
        Ok(Box::new(self.clone()))
    }
}

impl Trainer for WordFilter {
    fn train(&self, _: &[(&Post, Label)], _: &[(&Post, Label)]) -> Result<Box<dyn Scorer>> {
        Ok(Box::new(self.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    WordFilter(WordFilter),
    Linear(LinearScorer),
    External(ExternalScorerSpec),
}

/// A persisted scorer with its decision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerHandle {
    pub threshold: f64,
    pub calibration: Option<Calibration>,
    pub body: ModelBody,
    /// Provenance lines (seed, config fingerprint).
    #[serde(default)]
    pub header: Vec<String>,
}

impl ScorerHandle {
    pub fn new(body: ModelBody) -> Self {
        ScorerHandle { threshold: 0.5, calibration: None, body, header: Vec::new() }
    }

    pub fn kind(&self) -> ScorerKind {
        match self.body {
            ModelBody::WordFilter(_) => ScorerKind::WordFilter,
            ModelBody::Linear(_) => ScorerKind::Linear,
            ModelBody::External(_) => ScorerKind::External,
        }
    }

    pub fn scorer(&self) -> Result<Box<dyn Scorer>> {
        Ok(match &self.body {
            ModelBody::WordFilter(f) => Box::new(f.clone()),
            ModelBody::Linear(l) => Box::new(l.clone()),
            ModelBody::External(spec) => Box::new(ExternalScorer::new(spec.clone())?),
        })
    }

    /// Sets the threshold from validation scores. The word filter keeps 0.5:
    /// its scores are already hard labels.
    pub fn calibrate(&mut self, scores: &[(f64, Label)]) -> Result<()> {
        if self.kind() == ScorerKind::WordFilter {
            return Ok(());
        }
        let c = calibrate_threshold(scores)?;
        self.threshold = c.threshold;
        self.calibration = Some(c);
        Ok(())
    }

    pub fn predict(&self, score: f64) -> Label {
        Label::from_bool(score >= self.threshold)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone, Utc};

    fn posts() -> Vec<(Post, Label)> {
        let t0 = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let texts = [
            ("carved ivory bangle for sale DM", Label::Wlt),
            ("antique tusk pendant, price on request", Label::Wlt),
            ("ivory netsuke for sale shipping worldwide", Label::Wlt),
            ("lovely sunny day at the park", Label::Normal),
            ("my ivory wedding dress arrived", Label::Normal),
            ("watching the game with friends", Label::Normal),
            ("coffee and a good book", Label::Normal),
            ("new recipe tonight, so good", Label::Normal),
        ];
        texts
            .iter()
            .enumerate()
            .map(|(i, (t, y))| (Post::new(&format!("p{i}"), &format!("u{i}"), t0 + Duration::hours(i as i64), *t), *y))
            .collect()
    }

    #[test]
    fn linear_trainer_separates_toy() {
        let data = posts();
        let train: Vec<(&Post, Label)> = data.iter().map(|(p, y)| (p, *y)).collect();
        let scorer = LinearTrainer::default().fit(&train, &[]).unwrap();
        let refs: Vec<&Post> = data.iter().map(|(p, _)| p).collect();
        let scores = scorer.score_batch(&refs);
        let min_pos = (0..3).map(|i| scores[i].unwrap()).fold(1.0, f64::min);
        let max_neg = (3..8).map(|i| scores[i].unwrap()).fold(0.0, f64::max);
        assert!(min_pos > max_neg, "{scores:?}");
        assert_eq!(scorer.model.trained_on.len(), 64);
    }

    #[test]
    fn handle_roundtrip() {
        let data = posts();
        let train: Vec<(&Post, Label)> = data.iter().map(|(p, y)| (p, *y)).collect();
        let scorer = LinearTrainer::default().fit(&train, &[]).unwrap();
        let mut h = ScorerHandle::new(ModelBody::Linear(scorer));
        h.calibrate(&[(0.9, Label::Wlt), (0.2, Label::Normal)]).unwrap();
        assert_eq!(h.threshold, 0.55);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        h.save(&path).unwrap();
        let back = ScorerHandle::load(&path).unwrap();
        assert_eq!(back, h);
        let p = &data[0].0;
        assert_eq!(back.scorer().unwrap().score_batch(&[p]), h.scorer().unwrap().score_batch(&[p]));
    }

    #[test]
    fn word_filter_keeps_threshold() {
        let mut h = ScorerHandle::new(ModelBody::WordFilter(WordFilter::default()));
        h.calibrate(&[(1.0, Label::Wlt), (0.0, Label::Normal)]).unwrap();
        assert_eq!((h.threshold, h.calibration), (0.5, None));
        assert_eq!(h.kind(), ScorerKind::WordFilter);
    }

    #[test]
    fn fingerprint_ignores_order() {
        assert_eq!(split_fingerprint(["b", "a"]), split_fingerprint(["a", "b"]));
        assert_ne!(split_fingerprint(["a"]), split_fingerprint(["ab"]));
    }
}
