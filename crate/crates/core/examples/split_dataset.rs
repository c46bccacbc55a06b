//! Balances a synthetic labeled corpus to 1:10 and splits it user-disjointly.
//!
//! cargo run --example split_dataset -- [seed]

use std::collections::BTreeMap;

use wltscan::socialgraph::{synthesize_source, SyntheticParams};
use wltscan::splitter::{balance_classes, user_disjoint_split, verify_split, Split, SplitConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(7);
    let source = synthesize_source(seed, &SyntheticParams::default())?;
    let labels = source.ground_truth();
    let config = SplitConfig { rng_seed: seed, ..SplitConfig::default() };

    let balanced = balance_classes(source.corpus(), &labels, &config)?;
    println!(
        "{} positives, {} keyword negatives, {} sampled negatives",
        balanced.positives, balanced.keyword_negatives, balanced.sampled_negatives
    );
    for w in &balanced.warnings {
        println!("warning: {w:?}");
    }
    let assignment = user_disjoint_split(&balanced.post_ids, source.corpus(), &labels, &config)?;
    let mut users: BTreeMap<(String, Split), usize> = BTreeMap::new();
    for e in &assignment.audit {
        *users.entry((e.label.name().to_string(), e.split)).or_default() += 1;
    }
    for split in Split::ALL {
        let per_class: Vec<String> = ["wlt", "normal"]
            .iter()
            .map(|c| format!("{c} users {}", users.get(&(c.to_string(), split)).unwrap_or(&0)))
            .collect();
        println!("{split}: {} posts, {}", assignment.count(split), per_class.join(", "));
    }
    println!("violations: {:?}", verify_split(&assignment, source.corpus(), &labels));
    Ok(())
}
