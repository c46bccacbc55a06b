//! Expands two hops out from a handful of sellers in the synthetic social
//! graph and prints per-class degree rankings.
//!
//! cargo run --example crawl_synthetic -- [seed]

use std::collections::BTreeSet;

use wltscan::socialgraph::{crawl, degree_stats, synthesize_source, user_classes, FetchConfig, SyntheticParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(7);
    let source = synthesize_source(seed, &SyntheticParams::default())?;
    let seeds: BTreeSet<String> = source.sellers().iter().take(3).cloned().collect();
    let result = crawl(&source, &seeds, 2, Some(120), 20, &FetchConfig::default())?;
    for (hop, users) in &result.users_by_hop {
        println!("hop {hop}: {} users", users.len());
    }
    println!("{} edges, {} posts collected", result.graph.edge_count(), result.posts.len());

    let classes = user_classes(&result.posts, &source.ground_truth());
    for (label, table) in degree_stats(&result.graph, &classes) {
        let top: Vec<String> = table.by_in.iter().take(5).map(|(u, d)| format!("{u}:{d}")).collect();
        println!("{label}: {} users, top in-degree {}", table.len(), top.join(" "));
    }
    Ok(())
}
