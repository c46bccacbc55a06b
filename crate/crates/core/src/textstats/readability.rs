//! Flesch reading ease:
//! `206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words)`.

use crate::corpus::{tokenize_spans, TokenKind};

/// Counts of the three quantities the score is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadabilityCounts {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
}

impl ReadabilityCounts {
    pub fn of(text: &str) -> Self {
        let tokens = tokenize_spans(text);
        let words: Vec<&str> = tokens
            .iter()
            .filter(|t| t.kind != TokenKind::Punct && t.has_alphanumeric())
            .map(|t| t.text)
            .collect();
        ReadabilityCounts {
            words: words.len(),
            sentences: count_sentences(text),
            syllables: words.iter().map(|w| count_syllables(w)).sum(),
        }
    }

    pub fn score(&self) -> Option<f64> {
        if self.words == 0 {
            return None;
        }
        let w = self.words as f64;
        Some(206.835 - 1.015 * (w / self.sentences as f64) - 84.6 * (self.syllables as f64 / w))
    }
}

/// `None` when the text has no words.
pub fn flesch_reading_ease(text: &str) -> Option<f64> {
    ReadabilityCounts::of(text).score()
}

/// Segments terminated by runs of `.`, `!` or `?`, plus a trailing
/// unterminated segment if it holds any letters or digits. At least 1.
pub fn count_sentences(text: &str) -> usize {
    let mut sentences = 0;
    let mut pending = false;
    let mut in_terminator = false;
    for c in text.chars() {
        if matches!(c, '.' | '!' | '?') {
            if pending && !in_terminator {
                sentences += 1;
                pending = false;
            }
            in_terminator = true;
        } else {
            in_terminator = false;
            if c.is_alphanumeric() {
                pending = true;
            }
        }
    }
    if pending {
        sentences += 1;
    }
    sentences.max(1)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group count with trailing silent `e` dropped when another vowel
/// group exists. At least 1.
pub fn count_syllables(word: &str) -> usize {
    let lower: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &lower {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = lower.len();
    let silent_e = n >= 2 && lower[n - 1] == 'e' && !is_vowel(lower[n - 2]);
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}
