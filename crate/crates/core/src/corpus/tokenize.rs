//! Tweet-aware tokenization.
//!
//! Rules, applied per whitespace-separated chunk:
//!
//! - `http://`, `https://`, `www.` and a few shortener hosts start a URL that
//!   runs to the end of the chunk, minus trailing punctuation.
//! - `#` / `@` followed by `[A-Za-z0-9_]+` is a hashtag / mention, provided
//!   the sigil is not glued to a preceding word, tag, URL or placeholder
//!   (`a@b` is not a mention).
//! - `{{MENTION}}` and `{{URL}}` masking placeholders are kept whole.
//! - Letters and digits form words; `'`, `’`, `-`, `.` and `_` stay inside a
//!   word only when followed by another letter or digit.
//! - An emoji together with its modifiers (variation selector, skin tone,
//!   ZWJ sequence, keycap) is one token; two regional indicators form a flag.
//! - Any other run of punctuation is one token (`!`, `??!!`, `...`).

use serde::{Deserialize, Serialize};

pub const MENTION_PLACEHOLDER: &str = "{{MENTION}}";
pub const URL_PLACEHOLDER: &str = "{{URL}}";

const URL_PREFIXES: &[&str] = &["http://", "https://", "www."];
const SHORTENER_PREFIXES: &[&str] = &[
    "t.co/",
    "bit.ly/",
    "tinyurl.com/",
    "goo.gl/",
    "ow.ly/",
    "buff.ly/",
    "dlvr.it/",
    "ift.tt/",
];
const URL_TRAILING_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', ')', '"', '\'', ']', '…'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Word,
    Hashtag,
    Mention,
    Url,
    Emoji,
    Punct,
    Placeholder,
}

/// A token borrowed from the source text, with its byte offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub kind: TokenKind,
}

impl Token<'_> {
    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }

    /// Hashtags, mentions and URLs. Repost markers depend on position and are
    /// handled by [`special_token_mask`].
    pub fn is_special_kind(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::Hashtag | TokenKind::Mention | TokenKind::Url
        )
    }

    pub fn has_alphanumeric(&self) -> bool {
        self.text.chars().any(char::is_alphanumeric)
    }
}

/// Special tokens found in one post text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub hashtags: Vec<String>,
    pub mentions: Vec<String>,
    pub urls: Vec<String>,
    pub repost_markers: usize,
}

impl SpecialTokens {
    pub fn total(&self) -> usize {
        self.hashtags.len() + self.mentions.len() + self.urls.len() + self.repost_markers
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_spans(text)
        .into_iter()
        .map(|t| t.text.to_string())
        .collect()
}

pub fn tokenize_spans(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    for (start, chunk) in whitespace_chunks(text) {
        tokenize_chunk(chunk, start, &mut out);
    }
    out
}

pub fn extract_special_tokens(text: &str) -> SpecialTokens {
    special_tokens_of(&tokenize_spans(text))
}

pub fn special_tokens_of(tokens: &[Token<'_>]) -> SpecialTokens {
    let mut st = SpecialTokens {
        repost_markers: leading_repost_markers(tokens),
        ..Default::default()
    };
    for t in tokens {
        match t.kind {
            TokenKind::Hashtag => st.hashtags.push(t.text[1..].to_string()),
            TokenKind::Mention => st.mentions.push(t.text[1..].to_string()),
            TokenKind::Url => st.urls.push(t.text.to_string()),
            _ => {}
        }
    }
    st
}

/// `true` at every position holding a hashtag, mention, URL or leading
/// repost marker.
pub fn special_token_mask(tokens: &[Token<'_>]) -> Vec<bool> {
    let reposts = leading_repost_markers(tokens);
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| i < reposts || t.is_special_kind())
        .collect()
}

fn leading_repost_markers(tokens: &[Token<'_>]) -> usize {
    tokens
        .iter()
        .take_while(|t| t.text == "RT" || t.text == "rt")
        .count()
}

/// Replaces every mention with `{{MENTION}}` and every URL with `{{URL}}`,
/// copying everything else unchanged.
pub fn mask_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for t in tokenize_spans(text) {
        let replacement = match t.kind {
            TokenKind::Mention => MENTION_PLACEHOLDER,
            TokenKind::Url => URL_PLACEHOLDER,
            _ => continue,
        };
        out.push_str(&text[cursor..t.start]);
        out.push_str(replacement);
        cursor = t.end();
    }
    out.push_str(&text[cursor..]);
    out
}

fn whitespace_chunks(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = text.char_indices().peekable();
    std::iter::from_fn(move || {
        while let Some(&(_, c)) = rest.peek() {
            if c.is_whitespace() {
                rest.next();
            } else {
                break;
            }
        }
        let (start, _) = *rest.peek()?;
        let mut end = text.len();
        while let Some(&(i, c)) = rest.peek() {
            if c.is_whitespace() {
                end = i;
                break;
            }
            rest.next();
        }
        Some((start, &text[start..end]))
    })
}

fn starts_with_ignore_ascii_case(s: &str, prefix: &str) -> bool {
    s.len() >= prefix.len()
        && s.as_bytes()[..prefix.len()].eq_ignore_ascii_case(prefix.as_bytes())
}

fn url_prefix_at(s: &str) -> bool {
    URL_PREFIXES
        .iter()
        .chain(SHORTENER_PREFIXES)
        .any(|p| starts_with_ignore_ascii_case(s, p) && s.len() > p.len())
}

fn is_tag_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_word_joiner(c: char) -> bool {
    matches!(c, '\'' | '’' | '-' | '.' | '_')
}

pub(crate) fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2300..=0x23FF
        | 0x2B00..=0x2BFF
        | 0x3030 | 0x303D | 0x3297 | 0x3299)
}

fn is_emoji_modifier(c: char) -> bool {
    matches!(c as u32, 0xFE0F | 0x20E3 | 0x1F3FB..=0x1F3FF)
}

fn is_regional_indicator(c: char) -> bool {
    matches!(c as u32, 0x1F1E6..=0x1F1FF)
}

/// Byte length of the URL that starts `s`, ignoring trailing punctuation.
fn url_len(s: &str) -> usize {
    s.trim_end_matches(URL_TRAILING_PUNCT).len()
}

fn tag_len(s: &str) -> Option<usize> {
    let mut chars = s.chars();
    let sigil = chars.next()?;
    if sigil != '#' && sigil != '@' {
        return None;
    }
    let body: usize = chars
        .take_while(|&c| is_tag_char(c))
        .map(char::len_utf8)
        .sum();
    (body > 0).then_some(1 + body)
}

fn placeholder_len(s: &str) -> Option<usize> {
    [MENTION_PLACEHOLDER, URL_PLACEHOLDER]
        .iter()
        .find(|p| s.starts_with(*p))
        .map(|p| p.len())
}

fn word_len(s: &str) -> usize {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        let joins = is_word_joiner(c) && i > 0 && chars.get(i + 1).is_some_and(|&(_, n)| n.is_alphanumeric());
        if !(c.is_alphanumeric() || joins) {
            break;
        }
        i += 1;
    }
    chars.get(i).map_or(s.len(), |&(b, _)| b)
}

fn emoji_len(s: &str) -> usize {
    let mut chars = s.char_indices().peekable();
    let Some((_, first)) = chars.next() else {
        return 0;
    };
    let mut end = first.len_utf8();
    if is_regional_indicator(first) {
        if let Some(&(b, c)) = chars.peek() {
            if is_regional_indicator(c) {
                return b + c.len_utf8();
            }
        }
        return end;
    }
    while let Some(&(b, c)) = chars.peek() {
        if is_emoji_modifier(c) {
            chars.next();
            end = b + c.len_utf8();
        } else if c == '\u{200D}' {
            chars.next();
            match chars.peek() {
                Some(&(b2, n)) if is_emoji(n) => {
                    chars.next();
                    end = b2 + n.len_utf8();
                }
                _ => break,
            }
        } else {
            break;
        }
    }
    end
}

/// A token boundary that punctuation runs must stop at.
fn starts_token(chunk: &str, at: usize) -> bool {
    let rest = &chunk[at..];
    let prev_alnum = chunk[..at]
        .chars()
        .next_back()
        .is_some_and(char::is_alphanumeric);
    let c = rest.chars().next().unwrap_or(' ');
    c.is_alphanumeric()
        || is_emoji(c)
        || placeholder_len(rest).is_some()
        || (!prev_alnum && tag_len(rest).is_some())
}

fn tokenize_chunk<'a>(chunk: &'a str, offset: usize, out: &mut Vec<Token<'a>>) {
    let mut at = 0;
    // Set when the previous token in this chunk is word-like, so a sigil or
    // URL prefix directly after it is not a new special token.
    let mut glued = false;
    while at < chunk.len() {
        let rest = &chunk[at..];
        let prev_alnum = glued;
        let c = rest.chars().next().expect("non-empty remainder");

        let (len, kind) = if !prev_alnum && url_prefix_at(rest) {
            let n = url_len(rest);
            (n, TokenKind::Url)
        } else if let Some(n) = placeholder_len(rest) {
            (n, TokenKind::Placeholder)
        } else if let (false, Some(n)) = (prev_alnum, tag_len(rest)) {
            let kind = if c == '#' {
                TokenKind::Hashtag
            } else {
                TokenKind::Mention
            };
            (n, kind)
        } else if c.is_alphanumeric() {
            (word_len(rest), TokenKind::Word)
        } else if is_emoji(c) {
            (emoji_len(rest), TokenKind::Emoji)
        } else {
            let mut n = c.len_utf8();
            while n < rest.len() && !starts_token(chunk, at + n) {
                let next = rest[n..].chars().next().expect("in bounds");
                if next.is_alphanumeric() {
                    break;
                }
                n += next.len_utf8();
            }
            (n, TokenKind::Punct)
        };

        out.push(Token {
            text: &chunk[at..at + len],
            start: offset + at,
            kind,
        });
        glued = !matches!(kind, TokenKind::Punct | TokenKind::Emoji);
        at += len;
    }
}
