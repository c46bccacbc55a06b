use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

const ENGLISH: &str = "i me my myself we our ours ourselves you you're you've you'll you'd your \
yours yourself yourselves he him his himself she she's her hers herself it it's its itself they \
them their theirs themselves what which who whom this that that'll these those am is are was were \
be been being have has had having do does did doing a an the and but if or because as until while \
of at by for with about against between into through during before after above below to from up \
down in out on off over under again further then once here there when where why how all any both \
each few more most other some such no nor not only own same so than too very s t can will just \
don don't should should've now d ll m o re ve y ain aren aren't couldn couldn't didn didn't doesn \
doesn't hadn hadn't hasn hasn't haven haven't isn isn't ma mightn mightn't mustn mustn't needn \
needn't shan shan't shouldn shouldn't wasn wasn't weren weren't won won't wouldn wouldn't";

/// Case-insensitive stopword set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(BTreeSet<String>);

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

impl Stopwords {
    /// The embedded English list (179 words).
    pub fn english() -> Self {
        Self::from_words(ENGLISH.split_whitespace())
    }

    pub fn empty() -> Self {
        Stopwords(BTreeSet::new())
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Stopwords(words.into_iter().map(str::to_lowercase).collect())
    }

    /// One word per line; blank lines and `#` comments ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_words(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_list() {
        let sw = Stopwords::english();
        assert_eq!(sw.len(), 179);
        assert!(sw.contains("The"));
        assert!(!sw.contains("ivory"));
    }
}
