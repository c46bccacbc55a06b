//! Runs the labeling loop on a synthetic corpus with ground-truth annotators
//! and prints how strongly each round's queue is enriched in positives.
//!
//! cargo run --release --example hitl_simulation -- [seed] [rounds] [k]

use std::sync::Arc;

use wltscan::hitl::sim::{overall_queue_rate, simulate, synthetic_seeds};
use wltscan::hitl::{HitlConfig, Service};
use wltscan::model::LinearTrainer;
use wltscan::socialgraph::{synthesize_source, SyntheticParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let seed = args.first().copied().unwrap_or(42);
    let rounds = args.get(1).copied().unwrap_or(3) as usize;
    let k = args.get(2).copied().unwrap_or(50) as usize;

    let source = synthesize_source(seed, &SyntheticParams::default())?;
    let positives = source.planted().clone();
    let (seed_posts, seed_users) = synthetic_seeds(&source, 3, 9);
    println!(
        "{} posts, {} planted, {} seed users, {} seed posts",
        source.corpus().len(),
        positives.len(),
        seed_users.len(),
        seed_posts.len()
    );

    let config = HitlConfig { k, seed, ..Default::default() };
    let service = Service::bootstrap(
        Arc::new(source.corpus().clone()),
        &seed_posts,
        &seed_users,
        config,
        Arc::new(LinearTrainer::default()),
        None,
    )?;
    let start = std::time::Instant::now();
    let metrics = simulate(&service, &positives, &["ann-a", "ann-b"], rounds)?;
    println!("round  base_rate  queued  positives  queue_rate  recall");
    for m in &metrics {
        println!(
            "{:>5}  {:>9.4}  {:>6}  {:>9}  {:>10.4}  {:>6.3}",
            m.round, m.pool_base_rate, m.queued, m.positives_queued, m.queue_rate(), m.cumulative_recall
        );
    }
    let base = metrics.first().map_or(0.0, |m| m.pool_base_rate);
    let rate = overall_queue_rate(&metrics);
    println!("overall queue rate {rate:.4} = {:.1}x the base rate, {:.2?}", rate / base, start.elapsed());
    Ok(())
}
