//! Post data model and corpus ingestion.

mod tokenize;

pub use tokenize::{
    extract_special_tokens, mask_text, special_token_mask, special_tokens_of, tokenize,
    tokenize_spans, SpecialTokens, Token, TokenKind, MENTION_PLACEHOLDER, URL_PLACEHOLDER,
};

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub const MAX_IMAGES: usize = 4;

/// One social post: text, up to four image references, optional OCR text and
/// author attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub user_id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    #[serde(default)]
    pub image_refs: Vec<String>,
    #[serde(default)]
    pub ocr_text: Option<String>,
    #[serde(default)]
    pub user_description: Option<String>,
    #[serde(default)]
    pub is_repost: bool,
}

impl Post {
    /// Minimal constructor used by tests and synthetic sources.
    pub fn new(
        post_id: impl Into<String>,
        user_id: impl Into<String>,
        created_at: DateTime<Utc>,
        text: impl Into<String>,
    ) -> Self {
        Post {
            post_id: post_id.into(),
            user_id: user_id.into(),
            created_at,
            text: text.into(),
            image_refs: Vec::new(),
            ocr_text: None,
            user_description: None,
            is_repost: false,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.post_id.is_empty() {
            return Err("empty post_id".into());
        }
        if self.user_id.is_empty() {
            return Err(format!("post {}: empty user_id", self.post_id));
        }
        if self.image_refs.len() > MAX_IMAGES {
            return Err(format!(
                "post {}: {} image refs (max {MAX_IMAGES})",
                self.post_id,
                self.image_refs.len()
            ));
        }
        if self.text.is_empty() && self.image_refs.is_empty() {
            return Err(format!("post {}: empty text and no images", self.post_id));
        }
        Ok(())
    }

    fn normalize(&mut self) {
        self.text = self.text.nfc().collect();
        if let Some(ocr) = &mut self.ocr_text {
            *ocr = ocr.nfc().collect();
        }
        if let Some(desc) = &mut self.user_description {
            *desc = desc.nfc().collect();
        }
    }
}

/// Binary class: 0 = normal post, 1 = wildlife product trading post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Normal = 0,
    Wlt = 1,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Wlt
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Wlt
        } else {
            Label::Normal
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Wlt => "wlt",
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Normal),
            1 => Ok(Label::Wlt),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Labels keyed by post id.
pub type LabelMap = BTreeMap<String, Label>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub description: Option<String>,
}

/// An immutable-after-ingest set of posts keyed by id, plus the users that
/// authored them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    posts: BTreeMap<String, Post>,
    users: BTreeMap<String, UserProfile>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a corpus from posts, registering each author as a user.
    pub fn from_posts(posts: impl IntoIterator<Item = Post>) -> Result<Self> {
        let mut corpus = Corpus::new();
        for post in posts {
            corpus.insert(post)?;
        }
        Ok(corpus)
    }

    /// Adds a post and registers its author. Duplicate ids are rejected.
    pub fn insert(&mut self, post: Post) -> Result<()> {
        post.validate().map_err(Error::Invariant)?;
        if self.posts.contains_key(&post.post_id) {
            return Err(Error::Invariant(format!(
                "duplicate post_id {}",
                post.post_id
            )));
        }
        self.register_author(&post);
        self.posts.insert(post.post_id.clone(), post);
        Ok(())
    }

    /// Adds a post without registering its author (the author may be
    /// registered separately via [`Corpus::add_user`]).
    pub fn insert_unregistered(&mut self, post: Post) -> Result<()> {
        post.validate().map_err(Error::Invariant)?;
        if self.posts.contains_key(&post.post_id) {
            return Err(Error::Invariant(format!(
                "duplicate post_id {}",
                post.post_id
            )));
        }
        self.posts.insert(post.post_id.clone(), post);
        Ok(())
    }

    pub fn add_user(&mut self, profile: UserProfile) {
        self.users.insert(profile.user_id.clone(), profile);
    }

    fn register_author(&mut self, post: &Post) {
        let entry = self
            .users
            .entry(post.user_id.clone())
            .or_insert_with(|| UserProfile {
                user_id: post.user_id.clone(),
                description: None,
            });
        if entry.description.is_none() {
            entry.description = post.user_description.clone();
        }
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn get(&self, post_id: &str) -> Option<&Post> {
        self.posts.get(post_id)
    }

    pub fn contains(&self, post_id: &str) -> bool {
        self.posts.contains_key(post_id)
    }

    /// Posts in ascending post id order.
    pub fn posts(&self) -> impl Iterator<Item = &Post> {
        self.posts.values()
    }

    pub fn post_ids(&self) -> impl Iterator<Item = &str> {
        self.posts.keys().map(String::as_str)
    }

    pub fn users(&self) -> &BTreeMap<String, UserProfile> {
        &self.users
    }

    /// Posts whose author has no user profile.
    pub fn orphan_posts(&self) -> Vec<&Post> {
        self.posts
            .values()
            .filter(|p| !self.users.contains_key(&p.user_id))
            .collect()
    }

    /// Posts grouped by author, each group newest first (ties by post id).
    pub fn posts_by_user(&self) -> BTreeMap<&str, Vec<&Post>> {
        let mut grouped: BTreeMap<&str, Vec<&Post>> = BTreeMap::new();
        for p in self.posts.values() {
            grouped.entry(p.user_id.as_str()).or_default().push(p);
        }
        for posts in grouped.values_mut() {
            sort_newest_first(posts);
        }
        grouped
    }

    /// Merges another corpus into this one; conflicting ids are an error.
    pub fn extend(&mut self, other: Corpus) -> Result<()> {
        for (_, user) in other.users {
            self.users.entry(user.user_id.clone()).or_insert(user);
        }
        for (_, post) in other.posts {
            self.insert_unregistered(post)?;
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for post in self.posts.values() {
            serde_json::to_writer(&mut w, post)?;
            w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn sort_newest_first(posts: &mut [&Post]) {
    posts.sort_by(|a, b| {
        b.created_at
            .cmp(&a.created_at)
            .then_with(|| a.post_id.cmp(&b.post_id))
    });
}

/// Result of reading a JSONL corpus file.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    /// 1-based line numbers of skipped records, with the reason.
    pub skipped: Vec<(usize, String)>,
}

impl Ingested {
    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }
}

pub fn ingest(path: &Path) -> Result<Ingested> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(f)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Reads one post record per line. Blank lines are ignored; malformed lines
/// (bad JSON, schema violations, duplicate ids) are skipped and reported.
/// More than 10% malformed lines is fatal, except that a lone malformed line
/// never is.
pub fn ingest_reader<R: BufRead>(reader: R) -> Result<Ingested> {
    let mut corpus = Corpus::new();
    let mut skipped = Vec::new();
    let mut total = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let lineno = idx + 1;
        let mut post: Post = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(e) => {
                skipped.push((lineno, e.to_string()));
                continue;
            }
        };
        post.normalize();
        if let Err(e) = corpus.insert(post) {
            skipped.push((lineno, e.to_string()));
        }
    }
    if skipped.len() > 1 && skipped.len() * 10 > total {
        return Err(Error::TooManyMalformed {
            malformed: skipped.len(),
            total,
            lines: skipped.iter().map(|(l, _)| *l).collect(),
        });
    }
    if !skipped.is_empty() {
        log::warn!("skipped {} malformed corpus lines", skipped.len());
    }
    Ok(Ingested { corpus, skipped })
}

/// Heuristic English filter: among letters outside hashtags, mentions and
/// URLs, at least 80% are ASCII. Texts without letters pass.
pub fn looks_english(text: &str) -> bool {
    let (mut ascii, mut all) = (0usize, 0usize);
    for t in tokenize_spans(text) {
        if t.is_special_kind() {
            continue;
        }
        for c in t.text.chars().filter(|c| c.is_alphabetic()) {
            all += 1;
            if c.is_ascii() {
                ascii += 1;
            }
        }
    }
    all == 0 || ascii * 5 >= all * 4
}

/// Reads `post_id,label` CSV. Extra columns are ignored, `#` lines are
/// comments, labels are `0`/`1` or `normal`/`wlt`.
pub fn read_labels<R: std::io::Read>(r: R) -> Result<LabelMap> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).from_reader(r);
    let mut out = LabelMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let (Some(id), Some(label)) = (rec.get(0), rec.get(1)) else {
            return Err(Error::InvalidInput(format!("labels row {} has fewer than 2 columns", i + 2)));
        };
        let label = match label.trim().to_ascii_lowercase().as_str() {
            "0" | "normal" => Label::Normal,
            "1" | "wlt" => Label::Wlt,
            other => return Err(Error::InvalidInput(format!("labels row {}: unknown label {other:?}", i + 2))),
        };
        if out.insert(id.trim().to_string(), label).is_some() {
            return Err(Error::InvalidInput(format!("labels row {}: duplicate post {id}", i + 2)));
        }
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<LabelMap> {
    read_labels(File::open(path).map_err(|e| Error::io(path, e))?)
}

/// Writes `header` as `#` lines, then `post_id,label` rows in id order.
pub fn write_labels<W: Write>(labels: &LabelMap, mut w: W, header: &[String]) -> Result<()> {
    let io = |e| Error::io("<labels>", e);
    for h in header {
        writeln!(w, "# {h}").map_err(io)?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["post_id", "label"])?;
    for (id, l) in labels {
        out.write_record([id.as_str(), &l.as_u8().to_string()])?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn line(id: &str, images: usize) -> String {
        let refs: Vec<String> = (0..images).map(|i| format!("img/{id}_{i}.png")).collect();
        serde_json::json!({
            "post_id": id,
            "user_id": "u1",
            "created_at": "2023-01-02T03:04:05Z",
            "text": "carved dish",
            "image_refs": refs,
            "ocr_text": null,
            "user_description": null,
            "is_repost": false,
            "extra": 5
        })
        .to_string()
    }

    fn ingest_lines(lines: &[String]) -> Result<Ingested> {
        ingest_reader(Cursor::new(lines.join("\n")))
    }

    #[test]
    fn ingest_valid_lines() {
        let got = ingest_lines(&[line("a", 0), line("b", 1), line("c", 4)]).unwrap();
        assert_eq!(got.corpus.len(), 3);
        assert_eq!(got.skipped_count(), 0);
        assert!(got.corpus.orphan_posts().is_empty());
    }

    fn ingest_with_padding(bad: String) -> Ingested {
        let mut lines: Vec<String> = (0..10).map(|i| line(&format!("ok{i}"), 0)).collect();
        lines.insert(3, bad);
        ingest_lines(&lines).unwrap()
    }

    #[test]
    fn malformed_line_is_skipped() {
        let got = ingest_lines(&[line("a", 0), "{not json".into(), line("b", 0)]).unwrap();
        assert_eq!(got.corpus.len(), 2);
        assert_eq!(got.skipped_count(), 1);

        let got = ingest_with_padding("{not json".into());
        assert_eq!(got.corpus.len(), 10);
        assert_eq!(got.skipped_count(), 1);
        assert_eq!(got.skipped[0].0, 4);
    }

    #[test]
    fn five_images_rejected() {
        let got = ingest_with_padding(line("five", 5));
        assert_eq!(got.skipped_count(), 1);
        assert!(!got.corpus.contains("five"));
    }

    #[test]
    fn too_many_malformed_is_fatal_with_line_numbers() {
        let lines = [line("a", 0), line("b", 5), "[]".into(), line("c", 0), line("d", 0)];
        let err = ingest_lines(&lines).unwrap_err();
        match err {
            Error::TooManyMalformed { lines, .. } => assert_eq!(lines, vec![2, 3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_skipped() {
        let got = ingest_with_padding(line("ok1", 0));
        assert_eq!(got.skipped_count(), 1);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        assert!(matches!(
            ingest(Path::new("/nonexistent/corpus.jsonl")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn ingest_applies_nfc() {
        let rec = serde_json::json!({
            "post_id": "n", "user_id": "u", "created_at": "2023-01-01T00:00:00Z",
            "text": "cafe\u{301}", "image_refs": [], "ocr_text": null,
            "user_description": null, "is_repost": false
        });
        let got = ingest_reader(Cursor::new(rec.to_string())).unwrap();
        assert_eq!(got.corpus.get("n").unwrap().text, "caf\u{e9}");
    }

    #[test]
    fn ingest_is_deterministic_and_roundtrips() {
        let lines: Vec<String> = (0..5).map(|i| line(&format!("p{i}"), i % 3)).collect();
        let a = ingest_lines(&lines).unwrap().corpus;
        let b = ingest_lines(&lines).unwrap().corpus;
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_jsonl(&mut buf).unwrap();
        let c = ingest_reader(Cursor::new(buf)).unwrap().corpus;
        assert_eq!(a, c);
    }

    #[test]
    fn empty_text_needs_an_image() {
        let t = "2023-01-01T00:00:00Z".parse().unwrap();
        let mut p = Post::new("x", "u", t, "");
        assert!(p.validate().is_err());
        p.image_refs.push("a.png".into());
        assert!(p.validate().is_ok());
    }

    #[test]
    fn label_serde_is_numeric() {
        assert_eq!(serde_json::to_string(&Label::Wlt).unwrap(), "1");
        assert_eq!(serde_json::from_str::<Label>("0").unwrap(), Label::Normal);
        assert!(serde_json::from_str::<Label>("2").is_err());
    }

    #[test]
    fn english_heuristic() {
        assert!(looks_english("Carved ivory dish for sale"));
        assert!(!looks_english("象牙の彫刻を販売しています"));
        assert!(looks_english("#ivory https://t.co/x"));
    }

    #[test]
    fn labels_csv_roundtrip() {
        let csv = "# seed=1\npost_id,label,provenance\na,1,seed\nb,normal,round_1\nc,wlt,x\n";
        let m = read_labels(csv.as_bytes()).unwrap();
        assert_eq!(m["a"], Label::Wlt);
        assert_eq!(m["b"], Label::Normal);
        let mut buf = Vec::new();
        write_labels(&m, &mut buf, &["seed=1".into()]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "# seed=1\npost_id,label\na,1\nb,0\nc,1\n");
        assert_eq!(read_labels(&buf[..]).unwrap(), m);
        assert!(read_labels("post_id,label\na,2\n".as_bytes()).is_err());
        assert!(read_labels("post_id,label\na,1\na,0\n".as_bytes()).is_err());
    }
}
