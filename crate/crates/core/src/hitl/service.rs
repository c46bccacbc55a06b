//! Thread-safe owner of the labeling state. Readers take a cheap snapshot;
//! writes are serialized, validated against a copy, persisted, then
//! published.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use chrono::Utc;

use super::eventlog::{EventRecord, EventStore};
use super::state::{Annotation, Event, HitlConfig, MergeOutcome, RoundState, Verdict};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::Trainer;

/// Events between automatic snapshots.
const SNAPSHOT_EVERY: u64 = 200;

struct Writer {
    store: Option<EventStore>,
    next_seq: u64,
    since_snapshot: u64,
}

pub struct Service {
    corpus: Arc<Corpus>,
    trainer: Arc<dyn Trainer>,
    current: RwLock<Arc<RoundState>>,
    writer: Mutex<Writer>,
    auto_register: bool,
}

impl Service {
    /// Bootstraps a new loop. With `store_dir`, events are logged there.
    pub fn bootstrap(
        corpus: Arc<Corpus>,
        seed_posts: &BTreeSet<String>,
        seed_users: &BTreeSet<String>,
        config: HitlConfig,
        trainer: Arc<dyn Trainer>,
        store_dir: Option<&Path>,
    ) -> Result<Service> {
        let (mut state, event) = RoundState::bootstrap(&corpus, seed_posts, seed_users, config)?;
        let mut store = store_dir.map(|d| EventStore::create(d, true)).transpose()?;
        state.applied_seq = 1;
        if let Some(s) = &mut store {
            s.append(&EventRecord { seq: 1, ts: Utc::now(), event })?;
            s.write_snapshot(&state)?;
        }
        Ok(Service {
            corpus,
            trainer,
            current: RwLock::new(Arc::new(state)),
            writer: Mutex::new(Writer { store, next_seq: 2, since_snapshot: 0 }),
            auto_register: true,
        })
    }

    /// Resumes from a log directory: the snapshot, if any, plus the events
    /// after it.
    pub fn open(dir: &Path, corpus: Arc<Corpus>, trainer: Arc<dyn Trainer>) -> Result<Service> {
        let rec = EventStore::open(dir, true)?;
        let state = rebuild(&corpus, &rec.events, rec.snapshot)?;
        let next_seq = rec.events.last().map_or(1, |r| r.seq) + 1;
        Ok(Service {
            corpus,
            trainer,
            current: RwLock::new(Arc::new(state)),
            writer: Mutex::new(Writer { store: Some(rec.store), next_seq, since_snapshot: 0 }),
            auto_register: true,
        })
    }

    /// Whether unknown annotators are registered on first use.
    pub fn set_auto_register(&mut self, on: bool) {
        self.auto_register = on;
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn state(&self) -> Arc<RoundState> {
        self.current.read().expect("state lock poisoned").clone()
    }

    fn commit(&self, w: &mut Writer, events: Vec<Event>) -> Result<Vec<Option<MergeOutcome>>> {
        let mut next = (*self.state()).clone();
        let mut outcomes = Vec::with_capacity(events.len());
        let mut records = Vec::with_capacity(events.len());
        for (i, event) in events.into_iter().enumerate() {
            outcomes.push(next.apply(&event)?);
            let seq = w.next_seq + i as u64;
            next.applied_seq = seq;
            records.push(EventRecord { seq, ts: Utc::now(), event });
        }
        next.check_invariants()?;
        let round_done = records.iter().any(|r| matches!(r.event, Event::RoundCompleted { .. }));
        if let Some(store) = &mut w.store {
            for r in &records {
                store.append(r)?;
            }
            w.since_snapshot += records.len() as u64;
            if round_done || w.since_snapshot >= SNAPSHOT_EVERY {
                store.write_snapshot(&next)?;
                w.since_snapshot = 0;
            }
        }
        w.next_seq += records.len() as u64;
        *self.current.write().expect("state lock poisoned") = Arc::new(next);
        Ok(outcomes)
    }

    pub fn register_annotator(&self, annotator_id: &str) -> Result<()> {
        let mut w = self.writer.lock().expect("writer lock poisoned");
        if let Some(e) = self.state().register(annotator_id)? {
            self.commit(&mut w, vec![e])?;
        }
        Ok(())
    }

    pub fn submit(&self, annotator_id: &str, post_id: &str, verdict: Verdict) -> Result<MergeOutcome> {
        let mut w = self.writer.lock().expect("writer lock poisoned");
        let state = self.state();
        let mut events = Vec::new();
        let mut probe = (*state).clone();
        if let Some(e) = state.register(annotator_id)? {
            if !self.auto_register {
                return Err(Error::Annotation(format!("annotator {annotator_id} is not registered")));
            }
            probe.apply(&e)?;
            events.push(e);
        }
        events.push(probe.submit(Annotation {
            annotator_id: annotator_id.to_string(),
            post_id: post_id.to_string(),
            verdict,
            timestamp: Utc::now(),
        })?);
        let outcome = self.commit(&mut w, events)?.pop().flatten();
        outcome.ok_or_else(|| Error::Invariant("annotation produced no outcome".into()))
    }

    /// Trains, scores and queues the next round. Blocks for the training
    /// time; the state stays readable meanwhile and is unchanged on error.
    pub fn run_round(&self) -> Result<Arc<RoundState>> {
        let mut w = self.writer.lock().expect("writer lock poisoned");
        let event = self.state().plan_round(&self.corpus, self.trainer.as_ref())?;
        self.commit(&mut w, vec![event])?;
        Ok(self.state())
    }
}

fn rebuild(corpus: &Corpus, events: &[EventRecord], snapshot: Option<RoundState>) -> Result<RoundState> {
    let events = events.iter().map(|r| (r.seq, &r.event));
    let state = match snapshot {
        Some(mut s) => {
            if s.corpus_fingerprint != super::state::corpus_fingerprint(corpus) {
                return Err(Error::Invariant("snapshot was taken over a different corpus".into()));
            }
            s.replay_tail(events)?;
            s
        }
        None => RoundState::replay(corpus, events)?,
    };
    state.check_invariants()?;
    Ok(state)
}

/// Rebuilds the state stored in `dir` without touching the files.
pub fn recover_state(dir: &Path, corpus: &Corpus) -> Result<RoundState> {
    let (events, snapshot) = EventStore::read(dir)?;
    rebuild(corpus, &events, snapshot)
}
