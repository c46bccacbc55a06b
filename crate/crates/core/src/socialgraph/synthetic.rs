//! Deterministic synthetic platform: a random follow graph with a small,
//! densely interlinked set of seller users whose timelines carry the planted
//! positive posts.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GraphSource, SocialGraph, SocialSource};
use crate::corpus::{Corpus, Label, LabelMap, Post};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub users: usize,
    /// Probability of each directed follow edge between ordinary users.
    pub edge_density: f64,
    pub posts_per_user: usize,
    /// Expected fraction of all posts that are planted positives.
    pub planted_rate: f64,
    pub seller_fraction: f64,
    /// Edge probability multiplier between two sellers.
    pub seller_link_boost: f64,
    /// Fraction of ordinary posts that mention the keyword innocently.
    pub hard_negative_rate: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            users: 250,
            edge_density: 0.02,
            posts_per_user: 20,
            planted_rate: 0.01,
            seller_fraction: 0.05,
            seller_link_boost: 10.0,
            hard_negative_rate: 0.03,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.users < 2 || self.posts_per_user == 0 {
            return Err(Error::InvalidInput("need at least 2 users and 1 post per user".into()));
        }
        if !unit(self.edge_density) || !unit(self.planted_rate) || !unit(self.hard_negative_rate) {
            return Err(Error::InvalidInput("densities and rates must lie in [0, 1]".into()));
        }
        if !(self.seller_fraction > 0.0 && self.seller_fraction <= 1.0) || self.seller_link_boost < 1.0 {
            return Err(Error::InvalidInput(
                "seller_fraction must be in (0, 1] and seller_link_boost >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn total_posts(&self) -> usize {
        self.users * self.posts_per_user
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSource {
    inner: GraphSource,
    corpus: Corpus,
    planted: BTreeSet<String>,
    sellers: BTreeSet<String>,
}

impl SyntheticSource {
    pub fn graph(&self) -> &SocialGraph {
        self.inner.graph()
    }

    /// Every generated post.
    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    /// Ground-truth positive post ids. Not part of any post record.
    pub fn planted(&self) -> &BTreeSet<String> {
        &self.planted
    }

    pub fn is_planted(&self, post_id: &str) -> bool {
        self.planted.contains(post_id)
    }

    pub fn sellers(&self) -> &BTreeSet<String> {
        &self.sellers
    }

    pub fn ground_truth(&self) -> LabelMap {
        self.corpus
            .post_ids()
            .map(|id| (id.to_string(), Label::from_bool(self.planted.contains(id))))
            .collect()
    }
}

impl SocialSource for SyntheticSource {
    fn get_followers(&self, user: &str) -> Result<BTreeSet<String>> {
        self.inner.get_followers(user)
    }

    fn get_following(&self, user: &str) -> Result<BTreeSet<String>> {
        self.inner.get_following(user)
    }

    fn get_timeline(&self, user: &str, cap: usize) -> Result<Vec<Post>> {
        self.inner.get_timeline(user, cap)
    }
}

const ITEMS: &[&str] = &[
    "bangle", "pendant", "netsuke", "chopsticks", "figurine", "carving", "beads", "bracelet",
    "statue", "comb", "seal",
];
const ADJECTIVES: &[&str] = &["Genuine", "Antique", "Rare", "Vintage", "Real", "Old", "Hand carved"];
const CONTACT: &[&str] = &[
    "DM for price", "PM me", "inbox for details", "shipping worldwide", "serious buyers only",
    "price negotiable", "whatsapp for more pics",
];
const SALE_TAGS: &[&str] = &["antique", "collectibles", "ivory", "carving", "forsale", "vintage"];
const OPENERS: &[&str] = &[
    "Just finished", "Can't believe", "Excited about", "Thinking about", "Watching", "Loving",
    "Working on", "Heading to", "So tired of", "Finally done with",
];
const TOPICS: &[&str] = &[
    "the game tonight", "my morning coffee", "this new recipe", "the weekend trip", "our garden",
    "the traffic downtown", "a great book", "the concert", "my dog's birthday", "school homework",
    "the election news", "the rainy weather", "the new phone", "family dinner", "the marathon",
];
const CLOSERS: &[&str] = &["", "!", " so much fun", " lol", " again", " with friends", " today", "..."];
const TAGS: &[&str] = &["mondaymood", "foodie", "travel", "nba", "weekend", "tbt", "music"];
const SHOP_TALK: &[&str] = &[
    "New stock arriving this week", "Shop closed for the holiday", "Thanks to all my buyers",
    "Packing orders all day", "Restocked the collectibles shelf",
];
const HARD_NEGATIVES: &[&str] = &[
    "Loving this ivory lace dress for the wedding",
    "Ivory Coast match tonight, who is watching?",
    "Painted the living room ivory white",
    "Ivory soap smells like childhood",
    "Ivory wedding invitations finally printed",
    "Ebony and ivory on the piano keys",
    "Cute ivory knit sweater on sale at the mall",
];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).copied().unwrap_or_default()
}

fn planted_text(rng: &mut ChaCha8Rng) -> String {
    let item = pick(rng, ITEMS);
    let contact = pick(rng, CONTACT);
    if rng.random_bool(0.8) {
        match rng.random_range(0..3) {
            0 => format!("{} ivory {item} for sale, {contact} #{}", pick(rng, ADJECTIVES), pick(rng, SALE_TAGS)),
            1 => format!("Old ivory {item}, {} cm. {contact}", rng.random_range(3..30)),
            _ => format!("{} ivory {item} available now! {contact}", pick(rng, ADJECTIVES)),
        }
    } else {
        match rng.random_range(0..3) {
            0 => format!("{} elephant tusk {item} available. {contact}", pick(rng, ADJECTIVES)),
            1 => format!("Mammoth tusk {item}, {contact} #antique"),
            _ => format!("Hand carved tusk {item} {contact}"),
        }
    }
}

fn normal_text(rng: &mut ChaCha8Rng, users: usize) -> String {
    let mut text = format!("{} {}{}", pick(rng, OPENERS), pick(rng, TOPICS), pick(rng, CLOSERS));
    if rng.random_bool(0.2) {
        text = format!("@u{:05} {text}", rng.random_range(0..users));
    }
    if rng.random_bool(0.15) {
        text.push_str(&format!(" #{}", pick(rng, TAGS)));
    }
    if rng.random_bool(0.1) {
        text.push_str(&format!(" https://t.co/{:08x}", rng.random::<u32>()));
    }
    text
}

/// Builds a deterministic synthetic source from `seed`.
///
/// Sellers make up `seller_fraction` of users (at least one when the planted
/// rate is positive). Each seller post is planted with probability
/// `planted_rate * total / seller_posts`, so the expected planted count is
/// `planted_rate * total`.
pub fn synthesize_source(seed: u64, params: &SyntheticParams) -> Result<SyntheticSource> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.users;
    let user_id = |i: usize| format!("u{i:05}");

    let n_sellers = if params.planted_rate > 0.0 {
        ((params.seller_fraction * n as f64).round() as usize).clamp(1, n)
    } else {
        0
    };
    let mut seller_idx: Vec<usize> = index::sample(&mut rng, n, n_sellers).into_vec();
    seller_idx.sort_unstable();
    let mut is_seller = vec![false; n];
    for &i in &seller_idx {
        is_seller[i] = true;
    }

    let mut graph = SocialGraph::new();
    for i in 0..n {
        graph.add_node(&user_id(i));
    }
    let boosted = (params.edge_density * params.seller_link_boost).min(1.0);
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let p = if is_seller[a] && is_seller[b] { boosted } else { params.edge_density };
            if rng.random_bool(p) {
                graph.add_edge(&user_id(a), &user_id(b));
            }
        }
    }

    let seller_posts = n_sellers * params.posts_per_user;
    let q = if seller_posts == 0 {
        0.0
    } else {
        params.planted_rate * params.total_posts() as f64 / seller_posts as f64
    };
    if q > 1.0 {
        log::warn!("planted rate {} needs more sellers; capping at all seller posts", params.planted_rate);
    }
    let q = q.min(1.0);

    let start = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).single().unwrap_or(DateTime::UNIX_EPOCH);
    let mut corpus = Corpus::new();
    let mut planted = BTreeSet::new();
    for u in 0..n {
        let uid = user_id(u);
        let offset = Duration::minutes(rng.random_range(0..1440));
        for i in 0..params.posts_per_user {
            let created = start + offset
                + Duration::hours(6 * i as i64)
                + Duration::minutes(rng.random_range(0..300));
            let mut post_id = format!("{:016x}", rng.random::<u64>());
            while corpus.contains(&post_id) {
                post_id = format!("{:016x}", rng.random::<u64>());
            }
            let is_planted = is_seller[u] && rng.random_bool(q);
            let text = if is_planted {
                planted.insert(post_id.clone());
                planted_text(&mut rng)
            } else if rng.random_bool(params.hard_negative_rate) {
                pick(&mut rng, HARD_NEGATIVES).to_string()
            } else if is_seller[u] && rng.random_bool(0.4) {
                format!("{}, {}", pick(&mut rng, SHOP_TALK), pick(&mut rng, CONTACT))
            } else {
                normal_text(&mut rng, n)
            };
            corpus.insert(Post::new(&post_id, &uid, created, &text))?;
        }
    }

    Ok(SyntheticSource {
        inner: GraphSource::new(graph, &corpus),
        corpus,
        planted,
        sellers: seller_idx.into_iter().map(user_id).collect(),
    })
}
