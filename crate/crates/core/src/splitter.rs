//! Class balancing and user-disjoint train/dev/test splitting.
//!
//! Balancing keeps every positive and every negative containing the
//! priority keyword, then fills the negative quota by seeded sampling.
//! Splitting runs per class: users are ordered by descending post count
//! (ties in seeded-shuffle order) and each goes to the split with the largest
//! relative deficit `(target - mass) / target`, ties to the earlier split.
//! The first three users therefore land in three different splits, and a
//! user's posts within one class never straddle splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, LabelMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
    pub neg_per_pos: usize,
    pub priority_keyword: String,
    pub rng_seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: [0.7, 0.2, 0.1],
            neg_per_pos: 10,
            priority_keyword: "ivory".into(),
            rng_seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "split ratios must be positive, got {:?}",
                self.ratios
            )));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "split ratios sum to {sum}, expected 1"
            )));
        }
        if self.neg_per_pos == 0 {
            return Err(Error::InvalidInput("neg_per_pos must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BalanceWarning {
    /// Keyword negatives alone exceed the quota; all were kept.
    RatioOverflow { keyword_negatives: usize, quota: usize },
    /// Fewer negatives than the quota; all were kept.
    QuotaUnmet { available: usize, quota: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Balanced {
    pub post_ids: BTreeSet<String>,
    pub positives: usize,
    pub keyword_negatives: usize,
    pub sampled_negatives: usize,
    pub warnings: Vec<BalanceWarning>,
}

impl Balanced {
    pub fn negatives(&self) -> usize {
        self.keyword_negatives + self.sampled_negatives
    }
}

fn class_rng(seed: u64, label: Label) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (label.as_u8() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Keeps all labeled positives and `neg_per_pos` negatives per positive.
pub fn balance_classes(corpus: &Corpus, labels: &LabelMap, config: &SplitConfig) -> Result<Balanced> {
    config.validate()?;
    let keyword = config.priority_keyword.to_lowercase();
    let mut positives = Vec::new();
    let mut keyword_negs = Vec::new();
    let mut other_negs = Vec::new();
    for post in corpus.posts() {
        match labels.get(&post.post_id) {
            Some(Label::Wlt) => positives.push(post.post_id.clone()),
            Some(Label::Normal) if post.text.to_lowercase().contains(&keyword) => {
                keyword_negs.push(post.post_id.clone())
            }
            Some(Label::Normal) => other_negs.push(post.post_id.clone()),
            None => {}
        }
    }
    if positives.is_empty() {
        return Err(Error::InvalidInput("no positive posts to balance against".into()));
    }
    let quota = config.neg_per_pos * positives.len();
    let mut warnings = Vec::new();
    let fill = quota.saturating_sub(keyword_negs.len());
    if keyword_negs.len() > quota {
        log::warn!("{} keyword negatives exceed quota {quota}", keyword_negs.len());
        warnings.push(BalanceWarning::RatioOverflow {
            keyword_negatives: keyword_negs.len(),
            quota,
        });
    }
    let sampled: Vec<String> = if other_negs.len() <= fill {
        if keyword_negs.len() + other_negs.len() < quota {
            log::warn!(
                "only {} negatives for quota {quota}",
                keyword_negs.len() + other_negs.len()
            );
            warnings.push(BalanceWarning::QuotaUnmet {
                available: keyword_negs.len() + other_negs.len(),
                quota,
            });
        }
        other_negs
    } else {
        let mut rng = class_rng(config.rng_seed, Label::Normal);
        other_negs.shuffle(&mut rng);
        other_negs.truncate(fill);
        other_negs
    };
    let (n_pos, n_kw, n_sampled) = (positives.len(), keyword_negs.len(), sampled.len());
    Ok(Balanced {
        post_ids: positives.into_iter().chain(keyword_negs).chain(sampled).collect(),
        positives: n_pos,
        keyword_negatives: n_kw,
        sampled_negatives: n_sampled,
        warnings,
    })
}

/// Assigns each `(group, mass)` to one of `ratios.len()` bins; returns the
/// bin index per group, in input order.
pub fn greedy_partition(masses: &[usize], ratios: &[f64], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let total: usize = masses.iter().sum();
    let targets: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| masses[b].cmp(&masses[a]));
    let mut filled = vec![0usize; ratios.len()];
    let mut out = vec![0usize; masses.len()];
    for g in order {
        // Furthest below target in absolute mass; ties go to the earlier bin.
        let mut best = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for (i, &t) in targets.iter().enumerate() {
            if t <= 0.0 {
                continue;
            }
            let deficit = t - filled[i] as f64;
            if deficit > best_deficit {
                best = i;
                best_deficit = deficit;
            }
        }
        filled[best] += masses[g];
        out[g] = best;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub label: Label,
    pub user_id: String,
    pub split: Split,
    pub posts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub splits: BTreeMap<String, Split>,
    pub audit: Vec<AuditEntry>,
}

impl SplitAssignment {
    pub fn ids_in(&self, split: Split) -> impl Iterator<Item = &str> {
        self.splits
            .iter()
            .filter(move |(_, &s)| s == split)
            .map(|(id, _)| id.as_str())
    }

    pub fn count(&self, split: Split) -> usize {
        self.ids_in(split).count()
    }

    /// `post_id,split` rows after a `# seed=..` header line.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> Result<()> {
        let io = |e| Error::io("<assignment>", e);
        writeln!(w, "# seed={} ratios={:?}", self.seed, self.ratios).map_err(io)?;
        for h in header {
            writeln!(w, "# {h}").map_err(io)?;
        }
        writeln!(w, "post_id,split").map_err(io)?;
        for (id, s) in &self.splits {
            writeln!(w, "{id},{s}").map_err(io)?;
        }
        Ok(())
    }

    /// Reads the `post_id,split` rows; audit and ratios are not recovered.
    pub fn read_csv<R: BufRead>(r: R) -> Result<BTreeMap<String, Split>> {
        let mut out = BTreeMap::new();
        for line in r.lines() {
            let line = line.map_err(|e| Error::io("<assignment>", e))?;
            if line.starts_with('#') || line.trim().is_empty() || line == "post_id,split" {
                continue;
            }
            let (id, split) = line
                .rsplit_once(',')
                .ok_or_else(|| Error::InvalidInput(format!("bad assignment row {line:?}")))?;
            out.insert(id.to_string(), split.trim().parse()?);
        }
        Ok(out)
    }
}

fn posts_by_class_user<'a>(
    posts: impl IntoIterator<Item = &'a str>,
    corpus: &Corpus,
    labels: &LabelMap,
) -> Result<BTreeMap<Label, BTreeMap<String, Vec<String>>>> {
    let mut out: BTreeMap<Label, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    for id in posts {
        let post = corpus
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("post {id} not in corpus")))?;
        let label = labels
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("post {id} has no label")))?;
        out.entry(*label)
            .or_default()
            .entry(post.user_id.clone())
            .or_default()
            .push(id.to_string());
    }
    Ok(out)
}

/// User-disjoint split of `posts` into bins, per class. Classes with fewer
/// users than `min_users` are an error.
pub fn user_disjoint_partition<'a>(
    posts: impl IntoIterator<Item = &'a str>,
    corpus: &Corpus,
    labels: &LabelMap,
    ratios: &[f64],
    seed: u64,
    min_users: usize,
) -> Result<Vec<(Label, String, usize, Vec<String>)>> {
    let grouped = posts_by_class_user(posts, corpus, labels)?;
    let mut out = Vec::new();
    for (label, users) in grouped {
        if users.len() < min_users {
            return Err(Error::InvalidInput(format!(
                "class {label} has {} users; need at least {min_users} for a user-disjoint split",
                users.len()
            )));
        }
        let masses: Vec<usize> = users.values().map(Vec::len).collect();
        let bins = greedy_partition(&masses, ratios, &mut class_rng(seed, label));
        for ((user, ids), bin) in users.into_iter().zip(bins) {
            out.push((label, user, bin, ids));
        }
    }
    Ok(out)
}

pub fn user_disjoint_split(
    posts: &BTreeSet<String>,
    corpus: &Corpus,
    labels: &LabelMap,
    config: &SplitConfig,
) -> Result<SplitAssignment> {
    config.validate()?;
    let mut present: BTreeSet<Label> = BTreeSet::new();
    for id in posts {
        present.extend(labels.get(id));
    }
    for label in [Label::Normal, Label::Wlt] {
        if !present.contains(&label) {
            return Err(Error::InvalidInput(format!(
                "class {label} has 0 users; need at least 3 for a user-disjoint split"
            )));
        }
    }
    let parts = user_disjoint_partition(
        posts.iter().map(String::as_str),
        corpus,
        labels,
        &config.ratios,
        config.rng_seed,
        3,
    )?;
    let mut splits = BTreeMap::new();
    let mut audit = Vec::new();
    for (label, user_id, bin, ids) in parts {
        let split = Split::ALL[bin];
        audit.push(AuditEntry {
            label,
            user_id,
            split,
            posts: ids.len(),
        });
        for id in ids {
            splits.insert(id, split);
        }
    }
    Ok(SplitAssignment {
        seed: config.rng_seed,
        ratios: config.ratios,
        splits,
        audit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    UnknownPost { post_id: String },
    UserStraddles { label: Label, user_id: String, splits: Vec<Split> },
    Ratio { label: Label, split: Split, mass: usize, target: f64, tolerance: usize },
}

/// Empty iff no user's same-class posts straddle splits and every split's
/// mass is within one (largest) user's mass of its target.
pub fn verify_split(
    assignment: &SplitAssignment,
    corpus: &Corpus,
    labels: &LabelMap,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    // label -> user -> split -> posts
    let mut placed: BTreeMap<Label, BTreeMap<&str, BTreeMap<Split, usize>>> = BTreeMap::new();
    for (id, &split) in &assignment.splits {
        let (Some(post), Some(&label)) = (corpus.get(id), labels.get(id)) else {
            violations.push(Violation::UnknownPost { post_id: id.clone() });
            continue;
        };
        *placed
            .entry(label)
            .or_default()
            .entry(post.user_id.as_str())
            .or_default()
            .entry(split)
            .or_default() += 1;
    }
    for (&label, users) in &placed {
        let mut mass = [0usize; 3];
        let mut max_user = 0;
        for (user, splits) in users {
            let user_mass: usize = splits.values().sum();
            max_user = max_user.max(user_mass);
            for (s, n) in splits {
                mass[s.index()] += n;
            }
            if splits.len() > 1 {
                violations.push(Violation::UserStraddles {
                    label,
                    user_id: user.to_string(),
                    splits: splits.keys().copied().collect(),
                });
            }
        }
        let total: usize = mass.iter().sum();
        for split in Split::ALL {
            let target = assignment.ratios[split.index()] * total as f64;
            if (mass[split.index()] as f64 - target).abs() > max_user as f64 + 1e-9 {
                violations.push(Violation::Ratio {
                    label,
                    split,
                    mass: mass[split.index()],
                    target,
                    tolerance: max_user,
                });
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Post;
    use chrono::{TimeZone, Utc};

    fn post(id: &str, user: &str, text: &str) -> Post {
        Post::new(id, user, Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(), text)
    }

    struct Fixture {
        corpus: Corpus,
        labels: LabelMap,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture { corpus: Corpus::new(), labels: LabelMap::new() }
        }

        fn add(&mut self, id: &str, user: &str, text: &str, label: Label) {
            self.corpus.insert(post(id, user, text)).unwrap();
            self.labels.insert(id.into(), label);
        }
    }

    #[test]
    fn quota_for_255_positives() {
        let mut f = Fixture::new();
        for i in 0..255 {
            f.add(&format!("p{i}"), "s", "carved tusk", Label::Wlt);
        }
        for i in 0..3000 {
            f.add(&format!("n{i:04}"), &format!("u{}", i % 40), "hello", Label::Normal);
        }
        let b = balance_classes(&f.corpus, &f.labels, &SplitConfig::default()).unwrap();
        assert_eq!(b.negatives(), 2550);
        assert!(b.warnings.is_empty());
    }

    #[test]
    fn keyword_negatives_kept_first() {
        let mut f = Fixture::new();
        for i in 0..3 {
            f.add(&format!("p{i}"), "s", "for sale", Label::Wlt);
        }
        for i in 0..40 {
            let text = if i < 4 { "my IVORYware silk" } else { "weather today" };
            f.add(&format!("n{i:02}"), "u", text, Label::Normal);
        }
        let b = balance_classes(&f.corpus, &f.labels, &SplitConfig::default()).unwrap();
        assert_eq!((b.keyword_negatives, b.sampled_negatives), (4, 26));
        assert_eq!(b.post_ids.len(), 33);
        assert!((0..4).all(|i| b.post_ids.contains(&format!("n{i:02}"))));
    }

    #[test]
    fn quota_unmet_keeps_all() {
        let mut f = Fixture::new();
        f.add("p", "s", "x", Label::Wlt);
        for i in 0..5 {
            f.add(&format!("n{i}"), "u", "y", Label::Normal);
        }
        let b = balance_classes(&f.corpus, &f.labels, &SplitConfig::default()).unwrap();
        assert_eq!(b.negatives(), 5);
        assert_eq!(b.warnings, vec![BalanceWarning::QuotaUnmet { available: 5, quota: 10 }]);
    }

    #[test]
    fn keyword_overflow_flagged() {
        let mut f = Fixture::new();
        f.add("p", "s", "x", Label::Wlt);
        for i in 0..12 {
            f.add(&format!("n{i}"), "u", "ivory silk", Label::Normal);
        }
        let b = balance_classes(&f.corpus, &f.labels, &SplitConfig::default()).unwrap();
        assert_eq!(b.negatives(), 12);
        assert!(matches!(b.warnings[0], BalanceWarning::RatioOverflow { keyword_negatives: 12, quota: 10 }));
    }

    #[test]
    fn no_positives_is_error() {
        let mut f = Fixture::new();
        f.add("n", "u", "y", Label::Normal);
        assert!(balance_classes(&f.corpus, &f.labels, &SplitConfig::default()).is_err());
    }

    /// Every assignment of 3 users to 3 splits, scored by total absolute
    /// ratio deviation; returns the unique best.
    fn best_assignment(masses: [usize; 3], ratios: [f64; 3]) -> [usize; 3] {
        let total: f64 = masses.iter().sum::<usize>() as f64;
        let mut best = ([0; 3], f64::INFINITY);
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let mut m = [0.0; 3];
                    m[a] += masses[0] as f64;
                    m[b] += masses[1] as f64;
                    m[c] += masses[2] as f64;
                    let dev: f64 = (0..3).map(|i| (m[i] - ratios[i] * total).abs()).sum();
                    if dev < best.1 {
                        best = ([a, b, c], dev);
                    }
                }
            }
        }
        best.0
    }

    #[test]
    fn three_users_follow_oracle() {
        assert_eq!(best_assignment([7, 2, 1], [0.7, 0.2, 0.1]), [0, 1, 2]);
        let mut f = Fixture::new();
        for (user, n) in [("u1", 7), ("u2", 2), ("u3", 1)] {
            for i in 0..n {
                f.add(&format!("{user}_n{i}"), user, "x", Label::Normal);
                f.add(&format!("{user}_p{i}"), user, "x", Label::Wlt);
            }
        }
        let posts: BTreeSet<String> = f.corpus.post_ids().map(String::from).collect();
        for seed in 0..20 {
            let cfg = SplitConfig { rng_seed: seed, ..Default::default() };
            let a = user_disjoint_split(&posts, &f.corpus, &f.labels, &cfg).unwrap();
            assert_eq!(a.splits["u1_n0"], Split::Train);
            assert_eq!(a.splits["u2_p1"], Split::Dev);
            assert_eq!(a.splits["u3_n0"], Split::Test);
            assert!(verify_split(&a, &f.corpus, &f.labels).is_empty());
        }
    }

    #[test]
    fn user_may_span_classes() {
        let mut f = Fixture::new();
        for (user, n) in [("a", 1), ("b", 2), ("c", 7)] {
            for i in 0..n {
                f.add(&format!("{user}_p{i}"), user, "x", Label::Wlt);
            }
        }
        for (user, n) in [("a", 7), ("d", 2), ("e", 1)] {
            for i in 0..n {
                f.add(&format!("{user}_n{i}"), user, "x", Label::Normal);
            }
        }
        let posts: BTreeSet<String> = f.corpus.post_ids().map(String::from).collect();
        let a = user_disjoint_split(&posts, &f.corpus, &f.labels, &SplitConfig::default()).unwrap();
        assert_eq!(a.splits["a_p0"], Split::Test);
        assert_eq!(a.splits["a_n0"], Split::Train);
        assert!(verify_split(&a, &f.corpus, &f.labels).is_empty());
    }

    #[test]
    fn too_few_users_is_fatal() {
        let mut f = Fixture::new();
        for user in ["a", "b", "c"] {
            f.add(&format!("{user}n"), user, "x", Label::Normal);
        }
        f.add("p1", "a", "x", Label::Wlt);
        f.add("p2", "b", "x", Label::Wlt);
        let posts: BTreeSet<String> = f.corpus.post_ids().map(String::from).collect();
        assert!(user_disjoint_split(&posts, &f.corpus, &f.labels, &SplitConfig::default()).is_err());
    }

    #[test]
    fn straddling_user_is_reported() {
        let mut f = Fixture::new();
        let mut splits = BTreeMap::new();
        // 10 single-post users placed 7/2/1, plus one two-post user split
        // across train and dev; masses 8/3/1 of 12 stay within tolerance 2.
        for i in 0..10 {
            let id = format!("p{i}");
            f.add(&id, &format!("u{i}"), "x", Label::Wlt);
            splits.insert(id, if i < 7 { Split::Train } else if i < 9 { Split::Dev } else { Split::Test });
        }
        f.add("s1", "straddler", "x", Label::Wlt);
        f.add("s2", "straddler", "x", Label::Wlt);
        splits.insert("s1".into(), Split::Train);
        splits.insert("s2".into(), Split::Dev);
        let a = SplitAssignment { seed: 0, ratios: [0.7, 0.2, 0.1], splits, audit: vec![] };
        let v = verify_split(&a, &f.corpus, &f.labels);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(&v[0], Violation::UserStraddles { user_id, .. } if user_id == "straddler"));
    }

    #[test]
    fn ratio_violation_is_reported() {
        let mut f = Fixture::new();
        let mut splits = BTreeMap::new();
        for i in 0..10 {
            let id = format!("p{i}");
            f.add(&id, &format!("u{i}"), "x", Label::Wlt);
            splits.insert(id, if i < 4 { Split::Train } else { Split::Test });
        }
        let a = SplitAssignment { seed: 0, ratios: [0.7, 0.2, 0.1], splits, audit: vec![] };
        let v = verify_split(&a, &f.corpus, &f.labels);
        // recomputed masses: train 4 vs 7, dev 0 vs 2, test 6 vs 1; tolerance 1
        let offending: Vec<Split> = v.iter().filter_map(|x| match x {
            Violation::Ratio { split, .. } => Some(*split),
            _ => None,
        }).collect();
        assert_eq!(offending, vec![Split::Train, Split::Dev, Split::Test]);
    }

    #[test]
    fn equal_users_fill_train_first() {
        let bins = greedy_partition(&[5, 5, 5], &[0.7, 0.2, 0.1], &mut ChaCha8Rng::seed_from_u64(0));
        let mut sorted = bins.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 0, 1]);
    }

    #[test]
    fn csv_roundtrip() {
        let mut splits = BTreeMap::new();
        splits.insert("a".to_string(), Split::Dev);
        splits.insert("b,c".to_string(), Split::Test);
        let a = SplitAssignment { seed: 9, ratios: [0.7, 0.2, 0.1], splits: splits.clone(), audit: vec![] };
        let mut buf = Vec::new();
        a.write_csv(&mut buf, &["config=abc".into()]).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# seed=9"));
        assert_eq!(SplitAssignment::read_csv(&buf[..]).unwrap(), splits);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn random_fixture(seed: u64) -> Fixture {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut f = Fixture::new();
            let users = rng.random_range(6..25);
            for u in 0..users {
                let posts = rng.random_range(1..15);
                for i in 0..posts {
                    let label = Label::from_bool(rng.random_bool(0.3) || u < 3 && i == 0);
                    let label = if u >= 3 && u < 6 && i == 0 { Label::Normal } else { label };
                    let text = if rng.random_bool(0.1) { "ivory" } else { "plain" };
                    f.add(&format!("u{u}_{i}"), &format!("u{u}"), text, label);
                }
            }
            f
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn split_always_verifies(corpus_seed in any::<u64>(), seed in any::<u64>()) {
                let f = random_fixture(corpus_seed);
                let posts: BTreeSet<String> = f.corpus.post_ids().map(String::from).collect();
                let cfg = SplitConfig { rng_seed: seed, ..Default::default() };
                let a = user_disjoint_split(&posts, &f.corpus, &f.labels, &cfg).unwrap();
                prop_assert_eq!(verify_split(&a, &f.corpus, &f.labels), vec![]);
                prop_assert_eq!(a.splits.len(), posts.len());
                let again = user_disjoint_split(&posts, &f.corpus, &f.labels, &cfg).unwrap();
                prop_assert_eq!(a, again);
            }

            #[test]
            fn partition_within_largest_mass(
                masses in proptest::collection::vec(1usize..20, 1..30),
                seed in any::<u64>(),
            ) {
                let ratios = [0.7, 0.2, 0.1];
                let bins = greedy_partition(&masses, &ratios, &mut ChaCha8Rng::seed_from_u64(seed));
                let total: usize = masses.iter().sum();
                let largest = *masses.iter().max().unwrap() as f64;
                for (b, r) in ratios.iter().enumerate() {
                    let filled: usize = masses.iter().zip(&bins).filter(|(_, &x)| x == b).map(|(m, _)| m).sum();
                    prop_assert!((filled as f64 - r * total as f64).abs() <= largest + 1e-9);
                }
            }

            #[test]
            fn split_ignores_insertion_order(corpus_seed in any::<u64>(), seed in any::<u64>()) {
                let f = random_fixture(corpus_seed);
                let mut posts: Vec<Post> = f.corpus.posts().cloned().collect();
                posts.reverse();
                let reordered = Corpus::from_posts(posts).unwrap();
                let ids: BTreeSet<String> = f.corpus.post_ids().map(String::from).collect();
                let cfg = SplitConfig { rng_seed: seed, ..Default::default() };
                prop_assert_eq!(
                    user_disjoint_split(&ids, &f.corpus, &f.labels, &cfg).unwrap(),
                    user_disjoint_split(&ids, &reordered, &f.labels, &cfg).unwrap()
                );
            }

            #[test]
            fn balance_ratio_exact_without_warning(corpus_seed in any::<u64>(), seed in any::<u64>()) {
                let f = random_fixture(corpus_seed);
                let cfg = SplitConfig { rng_seed: seed, neg_per_pos: 2, ..Default::default() };
                let b = balance_classes(&f.corpus, &f.labels, &cfg).unwrap();
                if b.warnings.is_empty() {
                    prop_assert_eq!(b.negatives(), 2 * b.positives);
                }
            }
        }
    }
}
