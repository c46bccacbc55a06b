use serde::{Deserialize, Serialize};

use super::Stopwords;
use crate::corpus::{special_token_mask, tokenize_spans, Post};

/// Per-post token and character counts. Characters exclude whitespace; the
/// ratios are mean characters per token over the named token subset and are
/// `None` when that subset is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub words: usize,
    pub words_wo_st: usize,
    pub chars: usize,
    pub chars_wo_st: usize,
    pub char_per_word: Option<f64>,
    pub char_per_non_st: Option<f64>,
    pub char_per_non_sw: Option<f64>,
    pub char_per_non_sw_st: Option<f64>,
}

#[derive(Default)]
struct Acc {
    tokens: usize,
    chars: usize,
}

impl Acc {
    fn add(&mut self, chars: usize) {
        self.tokens += 1;
        self.chars += chars;
    }

    fn mean(&self) -> Option<f64> {
        (self.tokens > 0).then(|| self.chars as f64 / self.tokens as f64)
    }
}

pub fn length_stats(post: &Post, stopwords: &Stopwords) -> LengthStats {
    text_length_stats(&post.text, stopwords)
}

pub fn text_length_stats(text: &str, stopwords: &Stopwords) -> LengthStats {
    let tokens = tokenize_spans(text);
    let special = special_token_mask(&tokens);
    let (mut all, mut non_st, mut non_sw, mut non_sw_st) =
        (Acc::default(), Acc::default(), Acc::default(), Acc::default());
    for (t, &is_st) in tokens.iter().zip(&special) {
        let n = t.text.chars().count();
        let is_sw = stopwords.contains(t.text);
        all.add(n);
        if !is_st {
            non_st.add(n);
        }
        if !is_sw {
            non_sw.add(n);
        }
        if !is_st && !is_sw {
            non_sw_st.add(n);
        }
    }
    LengthStats {
        words: all.tokens,
        words_wo_st: non_st.tokens,
        chars: all.chars,
        chars_wo_st: non_st.chars,
        char_per_word: all.mean(),
        char_per_non_st: non_st.mean(),
        char_per_non_sw: non_sw.mean(),
        char_per_non_sw_st: non_sw_st.mean(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_words() {
        let s = text_length_stats("a bb ccc", &Stopwords::empty());
        assert_eq!((s.words, s.words_wo_st, s.chars, s.chars_wo_st), (3, 3, 6, 6));
        assert_eq!(s.char_per_word, Some(2.0));
    }

    #[test]
    fn special_tokens_removed() {
        let s = text_length_stats("RT @x hi", &Stopwords::empty());
        assert_eq!((s.words, s.words_wo_st), (3, 1));
        assert_eq!((s.chars, s.chars_wo_st), (6, 2));
    }

    #[test]
    fn stopwords_removed() {
        let s = text_length_stats("the cat", &Stopwords::from_words(["the"]));
        assert_eq!(s.char_per_non_sw, Some(3.0));
        assert_eq!(s.char_per_word, Some(3.0));
    }

    #[test]
    fn empty_ratios_flagged() {
        let s = text_length_stats("", &Stopwords::english());
        assert_eq!(s.words, 0);
        assert_eq!(s.char_per_word, None);
        let s = text_length_stats("#only @st", &Stopwords::english());
        assert_eq!(s.char_per_non_st, None);
    }

    proptest! {
        #[test]
        fn dropping_a_token_never_increases_counts(
            words in proptest::collection::vec(prop_oneof!["[a-z]{1,7}", "#[a-z]{1,4}", "@[a-z]{1,4}", Just("the".to_string())], 1..15),
            drop in any::<prop::sample::Index>(),
        ) {
            let sw = Stopwords::english();
            let full = text_length_stats(&words.join(" "), &sw);
            let mut fewer = words.clone();
            fewer.remove(drop.index(words.len()));
            let less = text_length_stats(&fewer.join(" "), &sw);
            prop_assert!(less.words <= full.words);
            prop_assert!(less.words_wo_st <= full.words_wo_st);
            prop_assert!(less.chars <= full.chars);
            prop_assert!(less.chars_wo_st <= full.chars_wo_st);
            prop_assert!(full.words_wo_st <= full.words && full.chars_wo_st <= full.chars);
        }
    }
}
