//! A minimal external scorer speaking the line protocol: one JSON request
//! per stdin line, one `{"post_id", "score"}` line back on stdout.
//!
//! cargo run --example keyword_scorer -- [keyword ...]

use std::io::{self, BufRead, Write};

use wltscan::model::{ScoreRequest, ScoreResponse};

fn main() -> io::Result<()> {
    let mut keywords: Vec<String> = std::env::args().skip(1).map(|k| k.to_lowercase()).collect();
    if keywords.is_empty() {
        keywords.push("ivory".into());
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in io::stdin().lock().lines() {
        let line = line?;
        let req: ScoreRequest = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("bad request: {e}");
                continue;
            }
        };
        let text = req.text.to_lowercase();
        let hit = keywords.iter().any(|k| text.contains(k));
        let resp = ScoreResponse { post_id: req.post_id, score: if hit { 0.9 } else { 0.1 } };
        writeln!(out, "{}", serde_json::to_string(&resp)?)?;
        out.flush()?;
    }
    Ok(())
}
