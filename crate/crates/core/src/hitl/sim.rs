//! Drives the labeling loop with ground-truth annotators, for measuring how
//! well rounds concentrate positives in the queue.

use std::collections::BTreeSet;

use serde::Serialize;

use super::service::Service;
use super::state::Verdict;
use crate::corpus::Label;
use crate::error::Result;
use crate::socialgraph::SyntheticSource;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: usize,
    /// Positive share of the pool when the round's model scored it.
    pub pool_base_rate: f64,
    pub queued: usize,
    pub positives_queued: usize,
    /// Positives labeled so far over all positives in the corpus.
    pub cumulative_recall: f64,
    pub labeled: usize,
}

impl RoundMetrics {
    pub fn queue_rate(&self) -> f64 {
        ratio(self.positives_queued, self.queued)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Seed users are the first `users` sellers with a planted post; seed posts
/// are up to `posts` of their planted posts, in id order.
pub fn synthetic_seeds(source: &SyntheticSource, users: usize, posts: usize) -> (BTreeSet<String>, BTreeSet<String>) {
    let corpus = source.corpus();
    let by_user = corpus.posts_by_user();
    let mut seed_users = BTreeSet::new();
    let mut seed_posts = BTreeSet::new();
    for seller in source.sellers() {
        if seed_users.len() == users {
            break;
        }
        let planted: Vec<&str> = by_user
            .get(seller.as_str())
            .into_iter()
            .flatten()
            .map(|p| p.post_id.as_str())
            .filter(|id| source.is_planted(id))
            .collect();
        if planted.is_empty() {
            continue;
        }
        seed_users.insert(seller.clone());
        seed_posts.extend(planted.into_iter().map(String::from));
    }
    let seed_posts = seed_posts.into_iter().take(posts).collect();
    (seed_posts, seed_users)
}

/// Every annotator answers every queued post with the true label.
pub fn annotate_all(service: &Service, positives: &BTreeSet<String>, annotators: &[&str]) -> Result<()> {
    let queue: Vec<String> = service.state().pending_queue.iter().map(|q| q.post_id.clone()).collect();
    for id in queue {
        let verdict = Verdict::Label(Label::from_bool(positives.contains(&id)));
        for who in annotators {
            service.submit(who, &id, verdict)?;
        }
    }
    Ok(())
}

/// Labels the bootstrap queue, then runs up to `rounds` rounds, labeling each
/// queue in full. Stops early once the state says to.
pub fn simulate(
    service: &Service,
    positives: &BTreeSet<String>,
    annotators: &[&str],
    rounds: usize,
) -> Result<Vec<RoundMetrics>> {
    annotate_all(service, positives, annotators)?;
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let before = service.state();
        if before.should_stop() {
            break;
        }
        let pooled_positives = positives.iter().filter(|id| before.in_pool(id)).count();
        let base = ratio(pooled_positives, before.pool_len());
        let after = service.run_round()?;
        let queued = after.pending_queue.len();
        let hit = after.pending_queue.iter().filter(|q| positives.contains(&q.post_id)).count();
        annotate_all(service, positives, annotators)?;
        let done = service.state();
        let found = done
            .labeled
            .iter()
            .filter(|(id, e)| e.label.is_positive() && positives.contains(*id))
            .count();
        out.push(RoundMetrics {
            round: done.round_index,
            pool_base_rate: base,
            queued,
            positives_queued: hit,
            cumulative_recall: ratio(found, positives.len()),
            labeled: done.labeled.len(),
        });
    }
    Ok(out)
}

/// Positive share over all queues of `metrics` combined.
pub fn overall_queue_rate(metrics: &[RoundMetrics]) -> f64 {
    ratio(
        metrics.iter().map(|m| m.positives_queued).sum(),
        metrics.iter().map(|m| m.queued).sum(),
    )
}
