//! Lexicon sentiment: positive and negative valence mass against a count of
//! out-of-lexicon tokens. A token directly after a negator flips sign;
//! negators themselves carry no mass.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub pos: f64,
    pub neu: f64,
    pub neg: f64,
}

impl SentimentScore {
    pub const NEUTRAL: SentimentScore = SentimentScore {
        pos: 0.0,
        neu: 1.0,
        neg: 0.0,
    };
}

const DEFAULT_LEXICON: &str = include_str!("default_lexicon.tsv");
const DEFAULT_NEGATORS: &[&str] = &[
    "not", "no", "never", "neither", "nor", "none", "nobody", "nothing", "cannot", "can't",
    "don't", "doesn't", "didn't", "isn't", "aren't", "wasn't", "weren't", "won't", "wouldn't",
    "shouldn't", "couldn't", "without",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    valences: BTreeMap<String, f64>,
    negators: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<'a>(
        valences: impl IntoIterator<Item = (&'a str, f64)>,
        negators: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (token, v) in valences {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite valence for {token:?}"
                )));
            }
            lex.valences.insert(token.to_lowercase(), v);
        }
        lex.negators = negators.into_iter().map(str::to_lowercase).collect();
        Ok(lex)
    }

    /// Small embedded English valence list with the default negators.
    pub fn english() -> Self {
        let mut lex = Self::parse(DEFAULT_LEXICON).expect("embedded lexicon parses");
        lex.negators = DEFAULT_NEGATORS.iter().map(|s| s.to_string()).collect();
        lex
    }

    /// `token<TAB>valence` per line, `#` comments. Uses the default negators.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lex = Self::parse(&text)?;
        lex.negators = DEFAULT_NEGATORS.iter().map(|s| s.to_string()).collect();
        Ok(lex)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, value) = line.split_once('\t').ok_or_else(|| {
                Error::InvalidInput(format!("lexicon line {}: expected token<TAB>valence", i + 1))
            })?;
            let v: f64 = value.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("lexicon line {}: bad valence {value:?}", i + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "lexicon line {}: non-finite valence",
                    i + 1
                )));
            }
            lex.valences.insert(token.trim().to_lowercase(), v);
        }
        Ok(lex)
    }

    pub fn with_negators<'a>(mut self, negators: impl IntoIterator<Item = &'a str>) -> Self {
        self.negators = negators.into_iter().map(str::to_lowercase).collect();
        self
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(&token.to_lowercase()).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }
}

pub fn sentiment<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> SentimentScore {
    let (mut pos, mut neg, mut neutral) = (0.0, 0.0, 0.0);
    let mut negate = false;
    for token in tokens {
        let token = token.as_ref();
        if lexicon.is_negator(token) {
            negate = true;
            continue;
        }
        match lexicon.valence(token) {
            Some(v) if v != 0.0 => {
                let v = if negate { -v } else { v };
                if v > 0.0 {
                    pos += v;
                } else {
                    neg += -v;
                }
            }
            _ => neutral += 1.0,
        }
        negate = false;
    }
    let total = pos + neg + neutral;
    if total == 0.0 {
        return SentimentScore::NEUTRAL;
    }
    SentimentScore {
        pos: pos / total,
        neu: neutral / total,
        neg: neg / total,
    }
}
