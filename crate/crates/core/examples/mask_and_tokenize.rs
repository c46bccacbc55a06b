//! Ingests a JSONL corpus and prints each post's tokens, special tokens and
//! masked text.
//!
//! cargo run --example mask_and_tokenize -- [corpus.jsonl]

use std::path::PathBuf;

use wltscan::corpus::{self, extract_special_tokens, mask_text, tokenize};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/case_study.jsonl")
    });
    let ing = corpus::ingest(&path)?;
    for (line, why) in &ing.skipped {
        eprintln!("skipped line {line}: {why}");
    }
    for post in ing.corpus.posts() {
        let special = extract_special_tokens(&post.text);
        println!("{} by {}", post.post_id, post.user_id);
        println!("  tokens:   {:?}", tokenize(&post.text));
        println!(
            "  special:  {} hashtags, {} mentions, {} urls, {} repost markers",
            special.hashtags.len(),
            special.mentions.len(),
            special.urls.len(),
            special.repost_markers
        );
        println!("  masked:   {}", mask_text(&post.text));
    }
    Ok(())
}
