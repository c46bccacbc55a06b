//! Keyword baseline: positive iff the lowercased post text contains any
//! keyword as a substring. OCR text and descriptions are not consulted.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Scorer, ScorerKind};
use crate::corpus::{Label, Post};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordFilter {
    keywords: BTreeSet<String>,
}

impl Default for WordFilter {
    fn default() -> Self {
        WordFilter { keywords: BTreeSet::from(["ivory".to_string()]) }
    }
}

impl WordFilter {
    pub fn new<S: AsRef<str>>(keywords: impl IntoIterator<Item = S>) -> Result<Self> {
        let keywords: BTreeSet<String> = keywords
            .into_iter()
            .map(|k| k.as_ref().trim().to_lowercase())
            .filter(|k| !k.is_empty())
            .collect();
        if keywords.is_empty() {
            return Err(Error::InvalidInput("word filter needs at least one keyword".into()));
        }
        Ok(WordFilter { keywords })
    }

    pub fn keywords(&self) -> &BTreeSet<String> {
        &self.keywords
    }

    pub fn matches(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        self.keywords.iter().any(|k| lower.contains(k.as_str()))
    }

    pub fn predict(&self, post: &Post) -> Label {
        Label::from_bool(self.matches(&post.text))
    }
}

impl Scorer for WordFilter {
    fn kind(&self) -> ScorerKind {
        ScorerKind::WordFilter
    }

    fn score_batch(&self, posts: &[&Post]) -> Vec<Option<f64>> {
        posts
            .iter()
            .map(|p| Some(self.predict(p).as_u8() as f64))
            .collect()
    }
}
