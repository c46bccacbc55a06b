//! Serves the labeling API over a synthetic corpus, logging events under a
//! state directory so a restart resumes where it stopped.
//!
//! cargo run --release --example labeling_service -- [state_dir] [port]
//!
//! curl -H 'x-annotator-id: alice' localhost:8080/api/queue

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use wltscan::hitl::eventlog::LOG_FILE;
use wltscan::hitl::http::{serve_blocking, ApiConfig};
use wltscan::hitl::sim::synthetic_seeds;
use wltscan::hitl::{HitlConfig, Service};
use wltscan::model::LinearTrainer;
use wltscan::socialgraph::{synthesize_source, SyntheticParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "hitl-state".into()));
    let port: u16 = args.next().map(|p| p.parse()).transpose()?.unwrap_or(8080);

    let source = synthesize_source(42, &SyntheticParams::default())?;
    let corpus = Arc::new(source.corpus().clone());
    let trainer = Arc::new(LinearTrainer::default());
    let mut service = if dir.join(LOG_FILE).exists() {
        Service::open(&dir, corpus, trainer)?
    } else {
        let (posts, users) = synthetic_seeds(&source, 3, 9);
        let config = HitlConfig { k: 50, seed: 42, ..Default::default() };
        Service::bootstrap(corpus, &posts, &users, config, trainer, Some(&dir))?
    };
    service.set_auto_register(true);
    let state = service.state();
    println!("round {}, {} labeled, {} queued", state.round_index, state.labeled.len(), state.pending_queue.len());
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    println!("listening on http://{addr}");
    serve_blocking(Arc::new(service), ApiConfig::default(), addr)?;
    Ok(())
}
