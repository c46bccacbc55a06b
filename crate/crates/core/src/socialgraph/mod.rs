//! Follower/following graph expansion from seed users, timeline collection
//! and per-class degree analysis.

mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, Label, LabelMap, Post};
use crate::error::{Error, Result};

pub use synthetic::{synthesize_source, SyntheticParams, SyntheticSource};

/// Default per-user timeline cap.
pub const TIMELINE_CAP: usize = 3200;

/// Directed "a follows b" edges; no self-loops, endpoints always nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SocialGraph {
    nodes: BTreeSet<String>,
    following: BTreeMap<String, BTreeSet<String>>,
    followers: BTreeMap<String, BTreeSet<String>>,
}

impl SocialGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, user: &str) {
        if !self.nodes.contains(user) {
            self.nodes.insert(user.to_string());
        }
    }

    /// Adds `a follows b`; returns false for a self-loop or a known edge.
    pub fn add_edge(&mut self, a: &str, b: &str) -> bool {
        if a == b {
            return false;
        }
        self.add_node(a);
        self.add_node(b);
        let fresh = self.following.entry(a.to_string()).or_default().insert(b.to_string());
        self.followers.entry(b.to_string()).or_default().insert(a.to_string());
        fresh
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn contains(&self, user: &str) -> bool {
        self.nodes.contains(user)
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.following.get(a).is_some_and(|s| s.contains(b))
    }

    /// Edges in (follower, followee) order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.following
            .iter()
            .flat_map(|(a, bs)| bs.iter().map(move |b| (a.as_str(), b.as_str())))
    }

    pub fn edge_count(&self) -> usize {
        self.following.values().map(BTreeSet::len).sum()
    }

    pub fn followers_of(&self, user: &str) -> BTreeSet<String> {
        self.followers.get(user).cloned().unwrap_or_default()
    }

    pub fn following_of(&self, user: &str) -> BTreeSet<String> {
        self.following.get(user).cloned().unwrap_or_default()
    }

    pub fn in_degree(&self, user: &str) -> usize {
        self.followers.get(user).map_or(0, BTreeSet::len)
    }

    pub fn out_degree(&self, user: &str) -> usize {
        self.following.get(user).map_or(0, BTreeSet::len)
    }

    /// Directed edge density among `users`: edges / (n (n - 1)).
    pub fn density_within(&self, users: &BTreeSet<String>) -> f64 {
        let n = users.len();
        if n < 2 {
            return 0.0;
        }
        let edges: usize = users
            .iter()
            .filter_map(|u| self.following.get(u))
            .map(|out| out.iter().filter(|v| users.contains(*v)).count())
            .sum();
        edges as f64 / (n * (n - 1)) as f64
    }

    pub fn density(&self) -> f64 {
        self.density_within(&self.nodes)
    }

    /// Keeps only nodes in `keep` and the edges between them.
    pub fn restricted_to(&self, keep: &BTreeSet<String>) -> SocialGraph {
        let mut g = SocialGraph::new();
        for u in self.nodes.intersection(keep) {
            g.add_node(u);
        }
        for (a, b) in self.edges() {
            if keep.contains(a) && keep.contains(b) {
                g.add_edge(a, b);
            }
        }
        g
    }

    /// One `a follows b` line per edge, then `a` alone for isolated nodes.
    pub fn write_edges<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<graph>", e);
        for (a, b) in self.edges() {
            writeln!(w, "{a} follows {b}").map_err(io)?;
        }
        for u in &self.nodes {
            if self.in_degree(u) == 0 && self.out_degree(u) == 0 {
                writeln!(w, "{u}").map_err(io)?;
            }
        }
        Ok(())
    }

    /// Parses the format of [`SocialGraph::write_edges`]. Blank lines and
    /// `#` comments are ignored; self-loops are dropped with a warning.
    pub fn parse_edges(text: &str) -> Result<SocialGraph> {
        let mut g = SocialGraph::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                [a, "follows", b] => {
                    if a == b {
                        log::warn!("graph line {}: dropping self-loop on {a}", i + 1);
                    } else {
                        g.add_edge(a, b);
                    }
                }
                [u] => g.add_node(u),
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "graph line {}: expected \"follower follows followee\", got {line:?}",
                        i + 1
                    )))
                }
            }
        }
        Ok(g)
    }
}

/// Access to a social platform's relationships and timelines.
pub trait SocialSource: Sync {
    fn get_followers(&self, user: &str) -> Result<BTreeSet<String>>;
    fn get_following(&self, user: &str) -> Result<BTreeSet<String>>;
    /// At most `cap` posts, newest first.
    fn get_timeline(&self, user: &str, cap: usize) -> Result<Vec<Post>>;
}

/// A source backed by an in-memory graph and corpus; also the file adapter.
#[derive(Debug, Clone, Default)]
pub struct GraphSource {
    graph: SocialGraph,
    timelines: BTreeMap<String, Vec<Post>>,
}

impl GraphSource {
    pub fn new(graph: SocialGraph, corpus: &Corpus) -> Self {
        let timelines = corpus
            .posts_by_user()
            .into_iter()
            .map(|(u, posts)| (u.to_string(), posts.into_iter().cloned().collect()))
            .collect();
        GraphSource { graph, timelines }
    }

    /// Reads a graph file of `a follows b` lines and a JSONL corpus.
    pub fn load(graph_path: &Path, corpus_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(graph_path).map_err(|e| Error::io(graph_path, e))?;
        let graph = SocialGraph::parse_edges(&text)?;
        let ingested = corpus::ingest(corpus_path)?;
        if ingested.skipped_count() > 0 {
            log::warn!("{} corpus records skipped", ingested.skipped_count());
        }
        Ok(GraphSource::new(graph, &ingested.corpus))
    }

    pub fn graph(&self) -> &SocialGraph {
        &self.graph
    }

    fn known(&self, user: &str) -> Result<()> {
        if self.graph.contains(user) || self.timelines.contains_key(user) {
            Ok(())
        } else {
            Err(Error::Source(format!("unknown user {user}")))
        }
    }
}

impl SocialSource for GraphSource {
    fn get_followers(&self, user: &str) -> Result<BTreeSet<String>> {
        self.known(user)?;
        Ok(self.graph.followers_of(user))
    }

    fn get_following(&self, user: &str) -> Result<BTreeSet<String>> {
        self.known(user)?;
        Ok(self.graph.following_of(user))
    }

    fn get_timeline(&self, user: &str, cap: usize) -> Result<Vec<Post>> {
        self.known(user)?;
        Ok(self
            .timelines
            .get(user)
            .map(|t| t.iter().take(cap).cloned().collect())
            .unwrap_or_default())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrawlResult {
    pub users_by_hop: BTreeMap<usize, BTreeSet<String>>,
    pub graph: SocialGraph,
    pub posts: Corpus,
    /// Users whose relationships could not be fetched; they keep their hop
    /// but were not expanded.
    pub unreachable: BTreeSet<String>,
}

impl CrawlResult {
    pub fn users(&self) -> BTreeSet<String> {
        self.users_by_hop.values().flatten().cloned().collect()
    }

    pub fn hop_of(&self, user: &str) -> Option<usize> {
        self.users_by_hop
            .iter()
            .find(|(_, users)| users.contains(user))
            .map(|(&h, _)| h)
    }
}

/// Breadth-first expansion over both edge directions. `budget` caps the number
/// of non-seed users collected; `None` is unbounded. Within a frontier, users
/// are expanded in sorted order and their neighbors visited in sorted order.
pub fn expand_hops(
    source: &dyn SocialSource,
    seeds: &BTreeSet<String>,
    hops: usize,
    budget: Option<usize>,
) -> Result<CrawlResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("no seed users".into()));
    }
    let mut visited: BTreeSet<String> = seeds.clone();
    let mut users_by_hop = BTreeMap::from([(0, seeds.clone())]);
    let mut unreachable = BTreeSet::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut added = 0usize;
    let mut frontier: Vec<String> = seeds.iter().cloned().collect();
    let full = |added: usize| budget.is_some_and(|b| added >= b);

    for hop in 0..hops {
        let mut next = BTreeSet::new();
        for user in &frontier {
            if full(added) {
                break;
            }
            let fetched = source
                .get_followers(user)
                .and_then(|f| Ok((f, source.get_following(user)?)));
            let (followers, following) = match fetched {
                Ok(pair) => pair,
                Err(e) => {
                    log::warn!("user {user} unreachable: {e}");
                    unreachable.insert(user.clone());
                    continue;
                }
            };
            edges.extend(followers.iter().map(|f| (f.clone(), user.clone())));
            edges.extend(following.iter().map(|g| (user.clone(), g.clone())));
            let neighbors: BTreeSet<&String> = followers.iter().chain(&following).collect();
            for v in neighbors {
                if full(added) {
                    break;
                }
                if visited.insert(v.clone()) {
                    next.insert(v.clone());
                    added += 1;
                }
            }
        }
        if hop == 0 && unreachable.len() == seeds.len() {
            return Err(Error::Source(format!(
                "all {} seed users are unreachable",
                seeds.len()
            )));
        }
        if next.is_empty() {
            break;
        }
        frontier = next.iter().cloned().collect();
        users_by_hop.insert(hop + 1, next);
    }
    if hops == 0 {
        // Nothing to expand, but seeds must still exist.
        let alive = seeds.iter().filter(|s| source.get_following(s).is_ok()).count();
        if alive == 0 {
            return Err(Error::Source(format!("all {} seed users are unreachable", seeds.len())));
        }
    }

    let mut graph = SocialGraph::new();
    for u in &visited {
        graph.add_node(u);
    }
    for (a, b) in edges {
        if visited.contains(&a) && visited.contains(&b) {
            graph.add_edge(&a, &b);
        }
    }
    Ok(CrawlResult { users_by_hop, graph, posts: Corpus::new(), unreachable })
}

/// Concurrency and rate-limit settings for timeline fetches.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchConfig {
    pub parallelism: usize,
    /// Sustained requests per second; `None` disables limiting.
    pub rate_per_sec: Option<f64>,
    pub burst: usize,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig { parallelism: 4, rate_per_sec: None, burst: 1 }
    }
}

struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(rate: f64, burst: usize) -> Self {
        let capacity = burst.max(1) as f64;
        TokenBucket { rate, capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut guard = self.state.lock().unwrap_or_else(|p| p.into_inner());
                let (tokens, last) = &mut *guard;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.rate)
                    .min(self.capacity);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - *tokens) / self.rate)
            };
            std::thread::sleep(wait);
        }
    }
}

/// Newest `cap` posts of each user, merged. Failed users are logged and
/// skipped; the result does not depend on fetch order.
pub fn collect_timelines(
    source: &dyn SocialSource,
    users: &BTreeSet<String>,
    cap: usize,
    fetch: &FetchConfig,
) -> Result<Corpus> {
    if cap == 0 {
        return Err(Error::InvalidInput("timeline cap must be > 0".into()));
    }
    let users: Vec<&String> = users.iter().collect();
    let bucket = fetch
        .rate_per_sec
        .filter(|r| *r > 0.0)
        .map(|r| TokenBucket::new(r, fetch.burst));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Post>> = Mutex::new(Vec::new());
    let workers = fetch.parallelism.clamp(1, users.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(user) = users.get(i) else { break };
                if let Some(b) = &bucket {
                    b.acquire();
                }
                match source.get_timeline(user, cap) {
                    Ok(mut posts) => {
                        posts.sort_by(|a, b| {
                            b.created_at.cmp(&a.created_at).then_with(|| a.post_id.cmp(&b.post_id))
                        });
                        posts.truncate(cap);
                        results.lock().unwrap_or_else(|p| p.into_inner()).extend(posts);
                    }
                    Err(e) => log::warn!("timeline of {user} skipped: {e}"),
                }
            });
        }
    });
    let mut posts = results.into_inner().unwrap_or_else(|p| p.into_inner());
    posts.sort_by(|a, b| {
        (&a.user_id, a.created_at, &a.post_id).cmp(&(&b.user_id, b.created_at, &b.post_id))
    });
    let mut out = Corpus::new();
    for post in posts {
        let id = post.post_id.clone();
        if let Err(e) = out.insert(post) {
            log::warn!("post {id} dropped: {e}");
        }
    }
    Ok(out)
}

/// Expansion followed by timeline collection for every collected user.
pub fn crawl(
    source: &dyn SocialSource,
    seeds: &BTreeSet<String>,
    hops: usize,
    budget: Option<usize>,
    cap: usize,
    fetch: &FetchConfig,
) -> Result<CrawlResult> {
    let mut result = expand_hops(source, seeds, hops, budget)?;
    result.posts = collect_timelines(source, &result.users(), cap, fetch)?;
    Ok(result)
}

/// WLT user iff at least one of their posts is labeled WLT.
pub fn user_classes(corpus: &Corpus, labels: &LabelMap) -> BTreeMap<String, Label> {
    let mut out = BTreeMap::new();
    for post in corpus.posts() {
        let Some(&label) = labels.get(&post.post_id) else { continue };
        let entry = out.entry(post.user_id.clone()).or_insert(Label::Normal);
        if label == Label::Wlt {
            *entry = Label::Wlt;
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeTable {
    /// (user, in-degree), descending count then ascending user id.
    pub by_in: Vec<(String, usize)>,
    pub by_out: Vec<(String, usize)>,
}

/// Per-class degree rankings over the graph's nodes that have a class.
pub fn degree_stats(
    graph: &SocialGraph,
    class_of: &BTreeMap<String, Label>,
) -> BTreeMap<Label, DegreeTable> {
    let mut members: BTreeMap<Label, Vec<&str>> = BTreeMap::new();
    for u in graph.nodes() {
        match class_of.get(u) {
            Some(&c) => members.entry(c).or_default().push(u),
            None => log::debug!("user {u} has no class; left out of degree tables"),
        }
    }
    members
        .into_iter()
        .map(|(c, users)| (c, degree_table(graph, &users)))
        .collect()
}

fn degree_table(graph: &SocialGraph, users: &[&str]) -> DegreeTable {
    let rank = |f: &dyn Fn(&str) -> usize| {
        let mut v: Vec<(String, usize)> = users.iter().map(|u| (u.to_string(), f(u))).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    };
    DegreeTable {
        by_in: rank(&|u| graph.in_degree(u)),
        by_out: rank(&|u| graph.out_degree(u)),
    }
}

impl DegreeTable {
    pub fn len(&self) -> usize {
        self.by_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_in.is_empty()
    }

    /// Seeded sample of `target` users (all if fewer), re-ranked. Degrees are
    /// those of the full graph.
    pub fn downsample(&self, target: usize, seed: u64) -> DegreeTable {
        if self.len() <= target {
            return self.clone();
        }
        let mut users: Vec<&str> = self.by_in.iter().map(|(u, _)| u.as_str()).collect();
        users.sort_unstable();
        users.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let keep: BTreeSet<&str> = users.into_iter().take(target).collect();
        let filter = |v: &[(String, usize)]| {
            v.iter().filter(|(u, _)| keep.contains(u.as_str())).cloned().collect()
        };
        DegreeTable { by_in: filter(&self.by_in), by_out: filter(&self.by_out) }
    }

    /// `rank,user_id,in_degree` then `out_degree` sections as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<degree>", e);
        writeln!(w, "rank,user_id,in_degree,user_id_by_out,out_degree").map_err(io)?;
        for (i, ((a, da), (b, db))) in self.by_in.iter().zip(&self.by_out).enumerate() {
            writeln!(w, "{},{a},{da},{b},{db}", i + 1).map_err(io)?;
        }
        Ok(())
    }
}
