//! Sparse feature vectors: a fixed handcrafted block followed by smoothed
//! TF-IDF weights of lowercased unigrams and bigrams with special tokens
//! removed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{special_token_mask, tokenize, tokenize_spans, Post, TokenKind};
use crate::textstats::{flesch_reading_ease, sentiment, Lexicon};

pub const HANDCRAFTED: [&str; 10] = [
    "words", "chars", "hashtags", "mentions", "urls", "images", "flesch", "pos", "neu", "neg",
];
pub const HANDCRAFTED_LEN: usize = HANDCRAFTED.len();

/// Sorted `(feature_id, value)` pairs. Ids below [`HANDCRAFTED_LEN`] are the
/// handcrafted block and are always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        entries.dedup_by_key(|e| e.0);
        FeatureVector { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> f64 {
        self.entries
            .binary_search_by_key(&id, |e| e.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    /// Dot product against dense weights; ids past the end count as zero.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter_map(|&(i, v)| weights.get(i).map(|w| w * v))
            .sum()
    }

    pub fn max_id(&self) -> Option<usize> {
        self.entries.last().map(|e| e.0)
    }

    pub fn scaled(&self, factor: f64) -> FeatureVector {
        FeatureVector {
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }
}

/// Lowercased n-grams (n = 1, 2) over non-special, non-punctuation tokens.
pub fn ngrams(text: &str) -> Vec<String> {
    let tokens = tokenize_spans(text);
    let special = special_token_mask(&tokens);
    let words: Vec<String> = tokens
        .iter()
        .zip(special)
        .filter(|(t, st)| !st && !matches!(t.kind, TokenKind::Punct | TokenKind::Placeholder))
        .map(|(t, _)| t.text.to_lowercase())
        .collect();
    let mut out = words.clone();
    out.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Term {
    id: usize,
    df: usize,
}

/// Document frequencies fitted on a training set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TfidfVocab {
    terms: BTreeMap<String, Term>,
    n_docs: usize,
    /// Fitting drops n-grams seen in fewer documents.
    min_df: usize,
}

impl TfidfVocab {
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>, min_df: usize) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_docs = 0;
        for text in texts {
            n_docs += 1;
            let mut grams = ngrams(text);
            grams.sort_unstable();
            grams.dedup();
            for g in grams {
                *df.entry(g).or_default() += 1;
            }
        }
        let terms = df
            .into_iter()
            .filter(|(_, d)| *d >= min_df.max(1))
            .enumerate()
            .map(|(i, (t, df))| (t, Term { id: HANDCRAFTED_LEN + i, df }))
            .collect();
        TfidfVocab { terms, n_docs, min_df }
    }

    /// Builds a vocabulary from explicit document frequencies.
    pub fn from_counts<'a>(n_docs: usize, dfs: impl IntoIterator<Item = (&'a str, usize)>) -> Self {
        let mut counts: Vec<(&str, usize)> = dfs.into_iter().collect();
        counts.sort_unstable();
        let terms = counts
            .into_iter()
            .enumerate()
            .map(|(i, (t, df))| (t.to_string(), Term { id: HANDCRAFTED_LEN + i, df }))
            .collect();
        TfidfVocab { terms, n_docs, min_df: 1 }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Total feature dimension including the handcrafted block.
    pub fn dim(&self) -> usize {
        HANDCRAFTED_LEN + self.terms.len()
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.terms.get(term).map(|t| t.id)
    }

    /// `ln((1 + N) / (1 + df))`, or `None` out of vocabulary.
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.terms
            .get(term)
            .map(|t| ((1 + self.n_docs) as f64 / (1 + t.df) as f64).ln())
    }

    /// Name of a feature id.
    pub fn feature_name(&self, id: usize) -> Option<&str> {
        if id < HANDCRAFTED_LEN {
            return Some(HANDCRAFTED[id]);
        }
        self.terms.iter().find(|(_, t)| t.id == id).map(|(s, _)| s.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub vocab: TfidfVocab,
    pub lexicon: Lexicon,
}

impl Featurizer {
    pub fn new(vocab: TfidfVocab, lexicon: Lexicon) -> Self {
        Featurizer { vocab, lexicon }
    }

    pub fn dim(&self) -> usize {
        self.vocab.dim()
    }

    pub fn handcrafted(&self, post: &Post) -> [f64; HANDCRAFTED_LEN] {
        let tokens = tokenize_spans(&post.text);
        let special = special_token_mask(&tokens);
        let mut hashtags = 0;
        let mut mentions = 0;
        let mut urls = 0;
        for (t, &st) in tokens.iter().zip(&special) {
            if st {
                match t.kind {
                    TokenKind::Hashtag => hashtags += 1,
                    TokenKind::Mention => mentions += 1,
                    TokenKind::Url => urls += 1,
                    _ => {}
                }
            }
        }
        let chars: usize = tokens.iter().map(|t| t.text.chars().count()).sum();
        let s = sentiment(&tokenize(&post.text), &self.lexicon);
        [
            tokens.len() as f64,
            chars as f64,
            hashtags as f64,
            mentions as f64,
            urls as f64,
            post.image_refs.len() as f64,
            flesch_reading_ease(&post.text).unwrap_or(0.0),
            s.pos,
            s.neu,
            s.neg,
        ]
    }

    pub fn featurize(&self, post: &Post) -> FeatureVector {
        let mut entries: Vec<(usize, f64)> = self.handcrafted(post).into_iter().enumerate().collect();
        let mut counts: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for g in ngrams(&post.text) {
            if let (Some(id), Some(idf)) = (self.vocab.id(&g), self.vocab.idf(&g)) {
                counts.entry(id).or_insert((0, idf)).0 += 1;
            }
        }
        entries.extend(counts.into_iter().map(|(id, (c, idf))| (id, c as f64 * idf)));
        FeatureVector { entries }
    }
}
