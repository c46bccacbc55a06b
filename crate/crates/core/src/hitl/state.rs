//! The labeling-round state machine. Every change is an [`Event`]; commands
//! validate against the current state and return the event to apply, so a
//! state can be rebuilt by replaying its events against the same corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::corpus::{self, Corpus, Label, Post};
use crate::error::{Error, Result};
use crate::model::{split_fingerprint, Trainer};
use crate::splitter::greedy_partition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitlConfig {
    /// Newest posts per seed user queued at bootstrap.
    pub n_bootstrap: usize,
    /// Posts queued per round.
    pub k: usize,
    /// Labeled-set size at which the loop stops.
    pub n_stop: usize,
    pub annotators_required: usize,
    /// Share of the pool scored each round.
    pub pool_fraction: f64,
    /// Share of labeled users held out for early stopping.
    pub dev_fraction: f64,
    pub seed: u64,
}

impl Default for HitlConfig {
    fn default() -> Self {
        HitlConfig {
            n_bootstrap: 100,
            k: 2500,
            n_stop: 8000,
            annotators_required: 2,
            pool_fraction: 1.0,
            dev_fraction: 0.2,
            seed: 0,
        }
    }
}

impl HitlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bootstrap == 0 || self.k == 0 || self.annotators_required == 0 {
            return Err(Error::InvalidInput(
                "n_bootstrap, k and annotators_required must be >= 1".into(),
            ));
        }
        if !(self.pool_fraction > 0.0 && self.pool_fraction <= 1.0) {
            return Err(Error::InvalidInput("pool_fraction must be in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return Err(Error::InvalidInput("dev_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Seed,
    Round(usize),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Seed => f.write_str("seed"),
            Provenance::Round(r) => write!(f, "round_{r}"),
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "seed" {
            return Ok(Provenance::Seed);
        }
        s.strip_prefix("round_")
            .and_then(|r| r.parse().ok())
            .map(Provenance::Round)
            .ok_or_else(|| Error::InvalidInput(format!("bad provenance {s:?}")))
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEntry {
    pub label: Label,
    pub provenance: Provenance,
}

/// An annotator's answer. Accepts `"wlt"`, `"normal"`, `"skip"`, `0` or `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Label(Label),
    Skip,
}

impl Verdict {
    pub fn label(self) -> Option<Label> {
        match self {
            Verdict::Label(l) => Some(l),
            Verdict::Skip => None,
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Verdict::Label(l) => s.serialize_str(l.name()),
            Verdict::Skip => s.serialize_str("skip"),
        }
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u8),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(0) => Ok(Verdict::Label(Label::Normal)),
            Raw::Int(1) => Ok(Verdict::Label(Label::Wlt)),
            Raw::Str(s) => match s.to_lowercase().as_str() {
                "wlt" | "1" => Ok(Verdict::Label(Label::Wlt)),
                "normal" | "0" => Ok(Verdict::Label(Label::Normal)),
                "skip" => Ok(Verdict::Skip),
                other => Err(serde::de::Error::custom(format!("unknown verdict {other:?}"))),
            },
            Raw::Int(n) => Err(serde::de::Error::custom(format!("unknown verdict {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub annotator_id: String,
    pub post_id: String,
    pub verdict: Verdict,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "label", rename_all = "snake_case")]
pub enum MergeStatus {
    Adopted(Label),
    ConflictExcluded,
    Awaiting,
    /// A skip returned the post to the pool.
    Recycled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub post_id: String,
    #[serde(flatten)]
    pub status: MergeStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub post_id: String,
    /// Model score; absent for the bootstrap queue.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub model_snapshot_id: String,
    pub queued: Vec<String>,
    pub scored: usize,
    /// Posts dropped because the scorer returned no score.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Bootstrapped {
        seed_posts: Vec<String>,
        seed_users: Vec<String>,
        config: HitlConfig,
        corpus_fingerprint: String,
    },
    AnnotatorRegistered {
        annotator_id: String,
    },
    AnnotationSubmitted {
        annotation: Annotation,
    },
    RoundCompleted {
        round_index: usize,
        model_snapshot_id: String,
        queue: Vec<QueueItem>,
        scored: usize,
        excluded: usize,
    },
}

/// SHA-256 over the corpus in its JSONL form.
pub fn corpus_fingerprint(corpus: &Corpus) -> String {
    let mut buf = Vec::new();
    corpus.write_jsonl(&mut buf).expect("writing to memory");
    hex::encode(Sha256::digest(&buf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundState {
    pub round_index: usize,
    pub labeled: BTreeMap<String, LabeledEntry>,
    /// Unlabeled post id to its order key; larger keys are nearer the tail.
    pool: BTreeMap<String, u64>,
    pool_tail: u64,
    pub pending_queue: Vec<QueueItem>,
    /// Live votes per queued post, by annotator.
    pub votes: BTreeMap<String, BTreeMap<String, Label>>,
    /// Conflict-excluded posts with the disagreeing votes.
    pub conflicts: BTreeMap<String, BTreeMap<String, Label>>,
    pub annotators: BTreeSet<String>,
    pub model_snapshot_id: String,
    pub config: HitlConfig,
    pub corpus_fingerprint: String,
    pub initial_size: usize,
    pub rounds: Vec<RoundRecord>,
    /// Sequence number of the last applied event.
    pub applied_seq: u64,
}

impl RoundState {
    /// Round 0: seed posts labeled positive, the `n_bootstrap` newest
    /// unlabeled posts of every seed user queued newest first, everything
    /// else pooled.
    pub fn bootstrap(
        corpus: &Corpus,
        seed_posts: &BTreeSet<String>,
        seed_users: &BTreeSet<String>,
        config: HitlConfig,
    ) -> Result<(RoundState, Event)> {
        let event = Event::Bootstrapped {
            seed_posts: seed_posts.iter().cloned().collect(),
            seed_users: seed_users.iter().cloned().collect(),
            config,
            corpus_fingerprint: corpus_fingerprint(corpus),
        };
        Ok((Self::from_bootstrap(corpus, &event)?, event))
    }

    /// Builds the state a `Bootstrapped` event describes.
    pub fn from_bootstrap(corpus: &Corpus, event: &Event) -> Result<RoundState> {
        let Event::Bootstrapped { seed_posts, seed_users, config, corpus_fingerprint: fp } = event else {
            return Err(Error::Round("event log must start with a bootstrap event".into()));
        };
        config.validate()?;
        if seed_users.is_empty() {
            return Err(Error::Round("no seed users; bootstrap needs at least one".into()));
        }
        let actual = corpus_fingerprint(corpus);
        if *fp != actual {
            return Err(Error::Invariant(format!(
                "corpus fingerprint {actual} differs from the bootstrapped {fp}"
            )));
        }
        let mut labeled = BTreeMap::new();
        for id in seed_posts {
            if !corpus.contains(id) {
                return Err(Error::Round(format!("seed post {id} not in corpus")));
            }
            labeled.insert(id.clone(), LabeledEntry { label: Label::Wlt, provenance: Provenance::Seed });
        }
        let pool: BTreeMap<String, u64> = corpus
            .post_ids()
            .filter(|id| !labeled.contains_key(*id))
            .enumerate()
            .map(|(i, id)| (id.to_string(), i as u64))
            .collect();
        let seeds: BTreeSet<&str> = seed_users.iter().map(String::as_str).collect();
        let mut queued: Vec<&Post> = Vec::new();
        for (user, posts) in corpus.posts_by_user() {
            if seeds.contains(user) {
                queued.extend(
                    posts.into_iter().filter(|p| pool.contains_key(&p.post_id)).take(config.n_bootstrap),
                );
            }
        }
        corpus::sort_newest_first(&mut queued);
        let pending_queue = queued
            .into_iter()
            .map(|p| QueueItem { post_id: p.post_id.clone(), score: None })
            .collect();
        Ok(RoundState {
            round_index: 0,
            labeled,
            pool_tail: pool.len() as u64,
            pool,
            pending_queue,
            votes: BTreeMap::new(),
            conflicts: BTreeMap::new(),
            annotators: BTreeSet::new(),
            model_snapshot_id: String::new(),
            config: config.clone(),
            corpus_fingerprint: fp.clone(),
            initial_size: corpus.len(),
            rounds: Vec::new(),
            applied_seq: 0,
        })
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    pub fn in_pool(&self, post_id: &str) -> bool {
        self.pool.contains_key(post_id)
    }

    /// Pool ids from head to tail.
    pub fn pool_order(&self) -> Vec<&str> {
        let mut v: Vec<(&u64, &str)> = self.pool.iter().map(|(id, k)| (k, id.as_str())).collect();
        v.sort_unstable();
        v.into_iter().map(|(_, id)| id).collect()
    }

    pub fn is_queued(&self, post_id: &str) -> bool {
        self.pending_queue.iter().any(|q| q.post_id == post_id)
    }

    /// Queue items `annotator` has not voted on yet, in queue order.
    pub fn queue_for(&self, annotator: &str) -> Vec<&QueueItem> {
        self.pending_queue
            .iter()
            .filter(|q| !self.votes.get(&q.post_id).is_some_and(|v| v.contains_key(annotator)))
            .collect()
    }

    pub fn should_stop(&self) -> bool {
        self.labeled.len() >= self.config.n_stop
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let pos = self.labeled.values().filter(|e| e.label.is_positive()).count();
        (pos, self.labeled.len() - pos)
    }

    pub fn adopted_per_round(&self) -> BTreeMap<Provenance, usize> {
        let mut m = BTreeMap::new();
        for e in self.labeled.values() {
            *m.entry(e.provenance).or_default() += 1;
        }
        m
    }

    /// Conservation and containment invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invariant(m));
        if self.labeled.len() + self.pool.len() + self.conflicts.len() != self.initial_size {
            return fail(format!(
                "conservation broken: {} labeled + {} pooled + {} conflicts != {}",
                self.labeled.len(),
                self.pool.len(),
                self.conflicts.len(),
                self.initial_size
            ));
        }
        if let Some(id) = self.labeled.keys().find(|id| self.pool.contains_key(*id)) {
            return fail(format!("post {id} is both labeled and pooled"));
        }
        if let Some(q) = self.pending_queue.iter().find(|q| !self.pool.contains_key(&q.post_id)) {
            return fail(format!("queued post {} is not in the pool", q.post_id));
        }
        Ok(())
    }

    pub fn register(&self, annotator_id: &str) -> Result<Option<Event>> {
        if annotator_id.trim().is_empty() {
            return Err(Error::Annotation("annotator id must be non-empty".into()));
        }
        Ok((!self.annotators.contains(annotator_id))
            .then(|| Event::AnnotatorRegistered { annotator_id: annotator_id.to_string() }))
    }

    fn validate_annotation(&self, a: &Annotation) -> Result<()> {
        if !self.annotators.contains(&a.annotator_id) {
            return Err(Error::Annotation(format!("annotator {} is not registered", a.annotator_id)));
        }
        if !self.is_queued(&a.post_id) {
            return Err(Error::Annotation(format!("post {} is not in the pending queue", a.post_id)));
        }
        if self.votes.get(&a.post_id).is_some_and(|v| v.contains_key(&a.annotator_id)) {
            return Err(Error::Annotation(format!(
                "annotator {} already annotated post {}",
                a.annotator_id, a.post_id
            )));
        }
        Ok(())
    }

    pub fn submit(&self, annotation: Annotation) -> Result<Event> {
        self.validate_annotation(&annotation)?;
        Ok(Event::AnnotationSubmitted { annotation })
    }

    /// Trains on the labeled set, scores the pool and proposes the next
    /// queue. Does not modify the state.
    pub fn plan_round(&self, corpus: &Corpus, trainer: &dyn Trainer) -> Result<Event> {
        if !self.pending_queue.is_empty() {
            return Err(Error::Round(format!(
                "{} posts still pending; merge the current queue first",
                self.pending_queue.len()
            )));
        }
        let (pos, neg) = self.label_counts();
        if pos == 0 || neg == 0 {
            return Err(Error::Round(format!(
                "labeled set has {pos} positive and {neg} normal posts; label more seed posts so both classes are present"
            )));
        }
        let next_round = self.round_index + 1;
        let (train, dev) = self.train_dev(corpus, next_round)?;
        let scorer = trainer
            .train(&train, &dev)
            .map_err(|e| Error::Round(format!("training failed: {e}")))?;

        let order = self.pool_order();
        let candidates: Vec<&str> = if self.config.pool_fraction < 1.0 {
            let take = ((order.len() as f64 * self.config.pool_fraction).ceil() as usize).min(order.len());
            let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ (next_round as u64).wrapping_mul(0xA24B_AED4_963E_E407));
            let mut picked = index::sample(&mut rng, order.len(), take).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| order[i]).collect()
        } else {
            order
        };
        let posts: Vec<&Post> = candidates
            .iter()
            .map(|id| corpus.get(id).ok_or_else(|| Error::Invariant(format!("pooled post {id} not in corpus"))))
            .collect::<Result<_>>()?;
        let scores = scorer.score_batch(&posts);
        if scores.len() != posts.len() {
            return Err(Error::Round(format!(
                "scorer returned {} scores for {} posts",
                scores.len(),
                posts.len()
            )));
        }
        let mut ranked: Vec<(f64, &str)> = Vec::with_capacity(posts.len());
        let mut excluded = 0;
        for (p, s) in posts.iter().zip(scores) {
            match s {
                Some(s) if s.is_finite() && (0.0..=1.0).contains(&s) => ranked.push((s, &p.post_id)),
                _ => excluded += 1,
            }
        }
        if excluded > 0 {
            log::warn!("round {next_round}: {excluded} posts had no valid score and were excluded");
        }
        if ranked.is_empty() && !posts.is_empty() {
            return Err(Error::Round("scorer produced no valid scores; round aborted".into()));
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let queue: Vec<QueueItem> = ranked
            .iter()
            .take(self.config.k)
            .map(|(s, id)| QueueItem { post_id: id.to_string(), score: Some(*s) })
            .collect();
        let fp = split_fingerprint(train.iter().map(|(p, _)| p.post_id.as_str()));
        Ok(Event::RoundCompleted {
            round_index: next_round,
            model_snapshot_id: format!("round{next_round}-{}", &fp[..16]),
            queue,
            scored: ranked.len(),
            excluded,
        })
    }

    /// User-disjoint train/dev split of the labeled set, per class. A class
    /// with fewer than two users stays entirely in train.
    #[allow(clippy::type_complexity)]
    fn train_dev<'c>(
        &self,
        corpus: &'c Corpus,
        round: usize,
    ) -> Result<(Vec<(&'c Post, Label)>, Vec<(&'c Post, Label)>)> {
        let mut by_class: BTreeMap<Label, BTreeMap<&str, Vec<&'c Post>>> = BTreeMap::new();
        for (id, e) in &self.labeled {
            let p = corpus
                .get(id)
                .ok_or_else(|| Error::Invariant(format!("labeled post {id} not in corpus")))?;
            by_class.entry(e.label).or_default().entry(p.user_id.as_str()).or_default().push(p);
        }
        let mut train = Vec::new();
        let mut dev = Vec::new();
        let ratios = [1.0 - self.config.dev_fraction, self.config.dev_fraction];
        for (label, users) in by_class {
            let bins = if users.len() < 2 || self.config.dev_fraction == 0.0 {
                vec![0; users.len()]
            } else {
                let masses: Vec<usize> = users.values().map(Vec::len).collect();
                let seed = self.config.seed ^ ((round as u64) << 8) ^ label.as_u8() as u64;
                greedy_partition(&masses, &ratios, &mut ChaCha8Rng::seed_from_u64(seed))
            };
            for (posts, bin) in users.into_values().zip(bins) {
                let target = if bin == 0 { &mut train } else { &mut dev };
                target.extend(posts.into_iter().map(|p| (p, label)));
            }
        }
        Ok((train, dev))
    }

    /// Applies an event. Annotation events report their merge outcome.
    pub fn apply(&mut self, event: &Event) -> Result<Option<MergeOutcome>> {
        match event {
            Event::Bootstrapped { .. } => Err(Error::Round("state is already bootstrapped".into())),
            Event::AnnotatorRegistered { annotator_id } => {
                self.annotators.insert(annotator_id.clone());
                Ok(None)
            }
            Event::AnnotationSubmitted { annotation } => {
                self.validate_annotation(annotation)?;
                Ok(Some(self.merge(annotation)))
            }
            Event::RoundCompleted { round_index, model_snapshot_id, queue, scored, excluded } => {
                if *round_index != self.round_index + 1 || !self.pending_queue.is_empty() {
                    return Err(Error::Round(format!(
                        "cannot complete round {round_index} from round {} with {} pending",
                        self.round_index,
                        self.pending_queue.len()
                    )));
                }
                if let Some(q) = queue.iter().find(|q| !self.pool.contains_key(&q.post_id)) {
                    return Err(Error::Round(format!("queued post {} is not pooled", q.post_id)));
                }
                self.round_index = *round_index;
                self.model_snapshot_id = model_snapshot_id.clone();
                self.pending_queue = queue.clone();
                self.rounds.push(RoundRecord {
                    round: *round_index,
                    model_snapshot_id: model_snapshot_id.clone(),
                    queued: queue.iter().map(|q| q.post_id.clone()).collect(),
                    scored: *scored,
                    excluded: *excluded,
                });
                Ok(None)
            }
        }
    }

    fn unqueue(&mut self, post_id: &str) {
        self.pending_queue.retain(|q| q.post_id != post_id);
        self.votes.remove(post_id);
    }

    fn merge(&mut self, a: &Annotation) -> MergeOutcome {
        let post_id = a.post_id.clone();
        let status = match a.verdict {
            Verdict::Skip => {
                self.unqueue(&post_id);
                self.pool_tail += 1;
                self.pool.insert(post_id.clone(), self.pool_tail);
                MergeStatus::Recycled
            }
            Verdict::Label(label) => {
                let votes = self.votes.entry(post_id.clone()).or_default();
                votes.insert(a.annotator_id.clone(), label);
                if votes.len() < self.config.annotators_required {
                    MergeStatus::Awaiting
                } else {
                    let votes = self.votes.remove(&post_id).unwrap_or_default();
                    self.unqueue(&post_id);
                    self.pool.remove(&post_id);
                    if votes.values().all(|&l| l == label) {
                        self.labeled.insert(
                            post_id.clone(),
                            LabeledEntry { label, provenance: Provenance::Round(self.round_index) },
                        );
                        MergeStatus::Adopted(label)
                    } else {
                        self.conflicts.insert(post_id.clone(), votes);
                        MergeStatus::ConflictExcluded
                    }
                }
            }
        };
        MergeOutcome { post_id, status }
    }

    /// Rebuilds a state from a full event sequence.
    pub fn replay<'e>(corpus: &Corpus, events: impl IntoIterator<Item = (u64, &'e Event)>) -> Result<RoundState> {
        let mut it = events.into_iter();
        let (seq, first) = it.next().ok_or_else(|| Error::Round("empty event log".into()))?;
        let mut state = Self::from_bootstrap(corpus, first)?;
        state.applied_seq = seq;
        state.replay_tail(it)?;
        Ok(state)
    }

    /// Applies events with sequence numbers past `applied_seq`.
    pub fn replay_tail<'e>(&mut self, events: impl IntoIterator<Item = (u64, &'e Event)>) -> Result<()> {
        for (seq, e) in events {
            if seq <= self.applied_seq {
                continue;
            }
            self.apply(e)?;
            self.applied_seq = seq;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Scorer, ScorerKind};
    use chrono::{Duration, TimeZone};

    pub(crate) fn corpus(users: &[(&str, usize)]) -> Corpus {
        let t0 = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let mut c = Corpus::new();
        for (u, n) in users {
            for i in 0..*n {
                c.insert(Post::new(&format!("{u}-{i:03}"), *u, t0 + Duration::minutes(i as i64), "text"))
                    .unwrap();
            }
        }
        c
    }

    fn ids(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn annotate(state: &mut RoundState, who: &str, post: &str, v: Verdict) -> Result<MergeOutcome> {
        if let Some(e) = state.register(who)? {
            state.apply(&e)?;
        }
        let e = state.submit(Annotation {
            annotator_id: who.into(),
            post_id: post.into(),
            verdict: v,
            timestamp: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        })?;
        Ok(state.apply(&e)?.unwrap())
    }

    fn cfg() -> HitlConfig {
        HitlConfig { k: 3, n_bootstrap: 100, ..Default::default() }
    }

    #[test]
    fn bootstrap_takes_newest() {
        let c = corpus(&[("s", 150), ("o", 5)]);
        let (st, _) = RoundState::bootstrap(&c, &BTreeSet::new(), &ids(&["s"]), cfg()).unwrap();
        assert_eq!(st.pending_queue.len(), 100);
        assert_eq!(st.pending_queue[0].post_id, "s-149");
        assert_eq!(st.pending_queue[99].post_id, "s-050");
        let c = corpus(&[("s", 40)]);
        let (st, _) = RoundState::bootstrap(&c, &BTreeSet::new(), &ids(&["s"]), cfg()).unwrap();
        assert_eq!(st.pending_queue.len(), 40);
        assert!(RoundState::bootstrap(&c, &BTreeSet::new(), &BTreeSet::new(), cfg()).is_err());
    }

    #[test]
    fn seed_posts_plus_annotated_queue() {
        let c = corpus(&[("s", 12)]);
        let seeds: BTreeSet<String> = (0..9).map(|i| format!("s-{i:03}")).collect();
        let (mut st, _) = RoundState::bootstrap(&c, &seeds, &ids(&["s"]), cfg()).unwrap();
        assert_eq!(st.labeled.len(), 9);
        assert_eq!(st.pending_queue.len(), 3);
        for q in st.pending_queue.clone() {
            for who in ["a", "b"] {
                annotate(&mut st, who, &q.post_id, Verdict::Label(Label::Normal)).unwrap();
            }
        }
        assert_eq!(st.label_counts(), (9, 3));
        assert!(st.pending_queue.is_empty());
        st.check_invariants().unwrap();
    }

    #[test]
    fn merge_rules() {
        let c = corpus(&[("s", 4)]);
        let (mut st, _) = RoundState::bootstrap(&c, &BTreeSet::new(), &ids(&["s"]), cfg()).unwrap();
        let wlt = Verdict::Label(Label::Wlt);
        let normal = Verdict::Label(Label::Normal);
        assert_eq!(annotate(&mut st, "A", "s-000", wlt).unwrap().status, MergeStatus::Awaiting);
        assert!(matches!(annotate(&mut st, "A", "s-000", wlt), Err(Error::Annotation(_))));
        assert_eq!(annotate(&mut st, "B", "s-000", wlt).unwrap().status, MergeStatus::Adopted(Label::Wlt));
        assert_eq!(st.labeled["s-000"].provenance, Provenance::Round(0));

        annotate(&mut st, "A", "s-001", wlt).unwrap();
        assert_eq!(annotate(&mut st, "B", "s-001", normal).unwrap().status, MergeStatus::ConflictExcluded);
        assert!(!st.in_pool("s-001") && !st.is_queued("s-001"));

        annotate(&mut st, "A", "s-002", wlt).unwrap();
        assert_eq!(annotate(&mut st, "B", "s-002", Verdict::Skip).unwrap().status, MergeStatus::Recycled);
        assert_eq!(*st.pool_order().last().unwrap(), "s-002");
        assert!(!st.is_queued("s-002") && !st.votes.contains_key("s-002"));
        assert!(annotate(&mut st, "A", "s-002", wlt).is_err());
        st.check_invariants().unwrap();
    }

    #[test]
    fn unregistered_annotator_rejected() {
        let c = corpus(&[("s", 2)]);
        let (st, _) = RoundState::bootstrap(&c, &BTreeSet::new(), &ids(&["s"]), cfg()).unwrap();
        let a = Annotation {
            annotator_id: "ghost".into(),
            post_id: "s-000".into(),
            verdict: Verdict::Skip,
            timestamp: Utc::now(),
        };
        assert!(st.submit(a).is_err());
    }

    #[test]
    fn should_stop_boundaries() {
        let c = corpus(&[("s", 3)]);
        let mut config = cfg();
        config.n_stop = 0;
        let (st, _) = RoundState::bootstrap(&c, &BTreeSet::new(), &ids(&["s"]), config.clone()).unwrap();
        assert!(st.should_stop());
        config.n_stop = 1;
        let (st, _) = RoundState::bootstrap(&c, &BTreeSet::new(), &ids(&["s"]), config.clone()).unwrap();
        assert!(!st.should_stop());
        config.n_stop = 3;
        let all: BTreeSet<String> = c.post_ids().map(String::from).collect();
        let (st, _) = RoundState::bootstrap(&c, &all, &ids(&["s"]), config).unwrap();
        assert!(st.should_stop());
    }

    /// Scores posts by a fixed table.
    struct Table(BTreeMap<String, Option<f64>>);

    impl Scorer for Table {
        fn kind(&self) -> ScorerKind {
            ScorerKind::External
        }
        fn score_batch(&self, posts: &[&Post]) -> Vec<Option<f64>> {
            posts.iter().map(|p| self.0.get(&p.post_id).copied().flatten()).collect()
        }
    }

    struct Fixed(BTreeMap<String, Option<f64>>);

    impl Trainer for Fixed {
        fn train(&self, _: &[(&Post, Label)], _: &[(&Post, Label)]) -> Result<Box<dyn Scorer>> {
            Ok(Box::new(Table(self.0.clone())))
        }
    }

    fn round_ready(pool: usize) -> (Corpus, RoundState) {
        let c = corpus(&[("s", 1), ("n", 1), ("p", pool)]);
        let (mut st, _) = RoundState::bootstrap(&c, &ids(&["s-000"]), &ids(&["n"]), cfg()).unwrap();
        for who in ["a", "b"] {
            annotate(&mut st, who, "n-000", Verdict::Label(Label::Normal)).unwrap();
        }
        (c, st)
    }

    #[test]
    fn top_k_with_ties() {
        let (c, mut st) = round_ready(10);
        let mut table: BTreeMap<String, Option<f64>> =
            (0..10).map(|i| (format!("p-{i:03}"), Some((i + 1) as f64 / 10.0))).collect();
        let e = st.plan_round(&c, &Fixed(table.clone())).unwrap();
        let Event::RoundCompleted { queue, .. } = &e else { panic!() };
        let q: Vec<&str> = queue.iter().map(|q| q.post_id.as_str()).collect();
        assert_eq!(q, ["p-009", "p-008", "p-007"]);

        table.insert("p-009".into(), Some(0.9));
        table.insert("p-003".into(), None);
        let e = st.plan_round(&c, &Fixed(table)).unwrap();
        let Event::RoundCompleted { queue, excluded, .. } = &e else { panic!() };
        let q: Vec<&str> = queue.iter().map(|q| q.post_id.as_str()).collect();
        assert_eq!(q, ["p-008", "p-009", "p-007"]);
        assert_eq!(*excluded, 1);
        st.apply(&e).unwrap();
        assert_eq!(st.round_index, 1);
        assert!(st.plan_round(&c, &Fixed(BTreeMap::new())).is_err());
        st.check_invariants().unwrap();
    }

    #[test]
    fn round_preconditions() {
        let c = corpus(&[("s", 3)]);
        let (st, _) = RoundState::bootstrap(&c, &ids(&["s-000"]), &ids(&["s"]), cfg()).unwrap();
        assert!(st.plan_round(&c, &Fixed(BTreeMap::new())).is_err());
        let (c, st) = round_ready(4);
        let before = st.clone();
        let err = st.plan_round(&c, &Fixed(BTreeMap::new())).unwrap_err();
        assert!(err.to_string().contains("no valid scores"));
        assert_eq!(st, before);
    }

    #[test]
    fn verdict_wire_forms() {
        let v: Vec<Verdict> = serde_json::from_str(r#"[1, 0, "wlt", "Normal", "skip"]"#).unwrap();
        assert_eq!(
            v,
            [Verdict::Label(Label::Wlt), Verdict::Label(Label::Normal), Verdict::Label(Label::Wlt), Verdict::Label(Label::Normal), Verdict::Skip]
        );
        assert!(serde_json::from_str::<Verdict>("2").is_err());
        assert_eq!(serde_json::to_string(&Verdict::Skip).unwrap(), "\"skip\"");
        assert_eq!("round_3".parse::<Provenance>().unwrap(), Provenance::Round(3));
        let outcome = MergeOutcome { post_id: "x".into(), status: MergeStatus::Adopted(Label::Wlt) };
        assert_eq!(serde_json::to_string(&outcome).unwrap(), r#"{"post_id":"x","status":"adopted","label":1}"#);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conservation_holds(ops in proptest::collection::vec((0usize..3, 0usize..12, 0u8..3), 0..80)) {
                let c = corpus(&[("s", 12), ("x", 5)]);
                let (mut st, _) = RoundState::bootstrap(&c, &ids(&["x-000"]), &ids(&["s"]), cfg()).unwrap();
                for (who, post, v) in ops {
                    let verdict = match v { 0 => Verdict::Label(Label::Normal), 1 => Verdict::Label(Label::Wlt), _ => Verdict::Skip };
                    let _ = annotate(&mut st, ["a", "b", "c"][who], &format!("s-{post:03}"), verdict);
                    prop_assert!(st.check_invariants().is_ok());
                }
                for post in st.labeled.keys().filter(|k| k.starts_with("s-")) {
                    prop_assert!(st.labeled[post].provenance == Provenance::Round(0));
                }
            }
        }
    }
}
