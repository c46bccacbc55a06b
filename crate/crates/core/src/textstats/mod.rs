//! Text statistics per class: lengths, readability, sentiment, word
//! frequencies and the CSV report bundle.

mod length;
mod readability;
mod sentiment;
mod stopwords;

pub use length::{length_stats, text_length_stats, LengthStats};
pub use readability::{count_sentences, count_syllables, flesch_reading_ease, ReadabilityCounts};
pub use sentiment::{sentiment, Lexicon, SentimentScore};
pub use stopwords::Stopwords;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    extract_special_tokens, special_token_mask, tokenize, tokenize_spans, Corpus, Label,
    LabelMap, Post, TokenKind,
};
use crate::error::{Error, Result};
use crate::eval::Summary;

/// Token → count, sorted by descending count then token.
pub type FrequencyTable = Vec<(String, usize)>;

/// Lowercased token counts per class with special tokens, stopwords,
/// punctuation and masking placeholders removed. Both classes are always
/// present; unlabeled posts are ignored.
pub fn word_frequencies(
    corpus: &Corpus,
    labels: &LabelMap,
    stopwords: &Stopwords,
) -> BTreeMap<Label, FrequencyTable> {
    let mut counts: BTreeMap<Label, BTreeMap<String, usize>> =
        [(Label::Normal, BTreeMap::new()), (Label::Wlt, BTreeMap::new())].into();
    for post in corpus.posts() {
        let Some(&label) = labels.get(&post.post_id) else {
            continue;
        };
        let table = counts.get_mut(&label).expect("both classes seeded");
        for token in content_tokens(&post.text, stopwords) {
            *table.entry(token).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(label, table)| {
            let mut rows: FrequencyTable = table.into_iter().collect();
            rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            (label, rows)
        })
        .collect()
}

/// Lowercased tokens that are neither special tokens, stopwords,
/// punctuation nor placeholders.
pub fn content_tokens(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let tokens = tokenize_spans(text);
    let special = special_token_mask(&tokens);
    tokens
        .iter()
        .zip(special)
        .filter(|(t, st)| {
            !st && !matches!(t.kind, TokenKind::Punct | TokenKind::Placeholder)
                && !stopwords.contains(t.text)
        })
        .map(|(t, _)| t.text.to_lowercase())
        .collect()
}

/// Average, population standard deviation and maximum of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub avg: f64,
    pub std: f64,
    pub max: f64,
    pub n: usize,
}

impl ColumnStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        let s = Summary::of(values)?;
        Some(ColumnStats {
            avg: s.mean,
            std: s.std,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub category: String,
    pub wlt: Option<ColumnStats>,
    pub normal: Option<ColumnStats>,
}

/// Fixed-width bins from `min`; out-of-range values are clipped into the
/// first or last bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub min: f64,
    pub width: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub const fn new(min: f64, width: f64, bins: usize) -> Self {
        HistogramSpec { min, width, bins }
    }

    fn bin_of(&self, v: f64) -> usize {
        let idx = ((v - self.min) / self.width).floor();
        if idx < 0.0 {
            0
        } else {
            (idx as usize).min(self.bins - 1)
        }
    }

    pub fn count(&self, values: &[f64]) -> Vec<(f64, usize)> {
        let mut counts = vec![0usize; self.bins];
        for &v in values {
            counts[self.bin_of(v)] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (self.min + i as f64 * self.width, c))
            .collect()
    }
}

/// Histogram ranges. Defaults clip the long tails of normal posts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub words: HistogramSpec,
    pub chars: HistogramSpec,
    pub char_per_word: HistogramSpec,
    pub char_per_non_sw: HistogramSpec,
    pub special_tokens: HistogramSpec,
    pub flesch: HistogramSpec,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            words: HistogramSpec::new(0.0, 5.0, 16),
            chars: HistogramSpec::new(0.0, 20.0, 15),
            char_per_word: HistogramSpec::new(0.0, 0.5, 20),
            char_per_non_sw: HistogramSpec::new(0.0, 0.5, 20),
            special_tokens: HistogramSpec::new(0.0, 1.0, 11),
            flesch: HistogramSpec::new(-50.0, 10.0, 18),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub name: String,
    pub class: Label,
    pub bins: Vec<(f64, usize)>,
}

/// Per-post measurements feeding the report.
#[derive(Debug, Clone, PartialEq)]
pub struct PostMeasurements {
    pub post_id: String,
    pub label: Label,
    pub length: LengthStats,
    pub urls: usize,
    pub mentions: usize,
    pub hashtags: usize,
    pub reposts: usize,
    pub flesch: Option<f64>,
    pub sentiment: SentimentScore,
}

impl PostMeasurements {
    pub fn of(post: &Post, label: Label, stopwords: &Stopwords, lexicon: &Lexicon) -> Self {
        let st = extract_special_tokens(&post.text);
        PostMeasurements {
            post_id: post.post_id.clone(),
            label,
            length: length_stats(post, stopwords),
            urls: st.urls.len(),
            mentions: st.mentions.len(),
            hashtags: st.hashtags.len(),
            reposts: st.repost_markers,
            flesch: flesch_reading_ease(&post.text),
            sentiment: sentiment(&tokenize(&post.text), lexicon),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub text_stats: Vec<StatRow>,
    pub special_tokens: Vec<StatRow>,
    pub readability: Vec<StatRow>,
    pub sentiment: Vec<(String, SentimentScore)>,
    pub histograms: Vec<Histogram>,
    pub word_frequencies: BTreeMap<Label, FrequencyTable>,
}

type Extract = fn(&PostMeasurements) -> Option<f64>;

const TEXT_ROWS: &[(&str, Extract)] = &[
    ("#words", |m| Some(m.length.words as f64)),
    ("#words w/o ST", |m| Some(m.length.words_wo_st as f64)),
    ("#chars", |m| Some(m.length.chars as f64)),
    ("#chars w/o ST", |m| Some(m.length.chars_wo_st as f64)),
    ("#char/word", |m| m.length.char_per_word),
    ("#char/non-ST", |m| m.length.char_per_non_st),
    ("#char/non-SW", |m| m.length.char_per_non_sw),
    ("#char/non-SW/ST", |m| m.length.char_per_non_sw_st),
];

const SPECIAL_ROWS: &[(&str, Extract)] = &[
    ("#URLs", |m| Some(m.urls as f64)),
    ("#mentions", |m| Some(m.mentions as f64)),
    ("#hashtags", |m| Some(m.hashtags as f64)),
    ("#reposts", |m| Some(m.reposts as f64)),
];

const READABILITY_ROWS: &[(&str, Extract)] = &[("flesch", |m| m.flesch)];

fn rows(measured: &[PostMeasurements], defs: &[(&str, Extract)]) -> Vec<StatRow> {
    defs.iter()
        .map(|(name, f)| {
            let col = |label: Label| {
                let vals: Vec<f64> = measured
                    .iter()
                    .filter(|m| m.label == label)
                    .filter_map(f)
                    .collect();
                ColumnStats::of(&vals)
            };
            StatRow {
                category: name.to_string(),
                wlt: col(Label::Wlt),
                normal: col(Label::Normal),
            }
        })
        .collect()
}

/// Builds the per-class report over labeled posts of `corpus`.
pub fn class_report(
    corpus: &Corpus,
    labels: &LabelMap,
    stopwords: &Stopwords,
    lexicon: &Lexicon,
    config: &ReportConfig,
) -> ReportBundle {
    let measured: Vec<PostMeasurements> = corpus
        .posts()
        .filter_map(|p| {
            labels
                .get(&p.post_id)
                .map(|&l| PostMeasurements::of(p, l, stopwords, lexicon))
        })
        .collect();

    let hist_defs: [(&str, &HistogramSpec, Extract); 8] = [
        ("words", &config.words, |m| Some(m.length.words as f64)),
        ("chars", &config.chars, |m| Some(m.length.chars as f64)),
        ("char_per_word", &config.char_per_word, |m| m.length.char_per_word),
        ("char_per_non_sw", &config.char_per_non_sw, |m| m.length.char_per_non_sw),
        ("urls", &config.special_tokens, |m| Some(m.urls as f64)),
        ("mentions", &config.special_tokens, |m| Some(m.mentions as f64)),
        ("hashtags", &config.special_tokens, |m| Some(m.hashtags as f64)),
        ("flesch", &config.flesch, |m| m.flesch),
    ];
    let mut histograms = Vec::new();
    for label in [Label::Wlt, Label::Normal] {
        if !measured.iter().any(|m| m.label == label) {
            continue;
        }
        for (name, spec, f) in &hist_defs {
            let vals: Vec<f64> = measured
                .iter()
                .filter(|m| m.label == label)
                .filter_map(f)
                .collect();
            histograms.push(Histogram {
                name: name.to_string(),
                class: label,
                bins: spec.count(&vals),
            });
        }
    }

    ReportBundle {
        text_stats: rows(&measured, TEXT_ROWS),
        special_tokens: rows(&measured, SPECIAL_ROWS),
        readability: rows(&measured, READABILITY_ROWS),
        sentiment: measured
            .iter()
            .map(|m| (m.post_id.clone(), m.sentiment))
            .collect(),
        histograms,
        word_frequencies: word_frequencies(corpus, labels, stopwords),
    }
}

fn fmt_num(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

fn stat_cells(s: &Option<ColumnStats>) -> [String; 3] {
    match s {
        Some(s) => [fmt_num(s.avg), fmt_num(s.std), fmt_num(s.max)],
        None => Default::default(),
    }
}

impl ReportBundle {
    /// Writes every table as CSV under `dir` and returns the paths written.
    /// Each file starts with `#`-prefixed header lines: `header` followed by
    /// a note on the standard deviation convention where relevant.
    pub fn write_to(&self, dir: &Path, header: &[String]) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, std_note: bool, body: Vec<Vec<String>>| -> Result<()> {
            let path = dir.join(name);
            let mut out = String::new();
            for h in header {
                out.push_str(&format!("# {h}\n"));
            }
            if std_note {
                out.push_str("# std: population standard deviation\n");
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            for rec in body {
                w.write_record(&rec)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
            out.push_str(std::str::from_utf8(&bytes).expect("utf8 csv"));
            fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };

        let table = |rows: &[StatRow]| {
            let mut body = vec![[
                "category", "wlt_avg", "wlt_std", "wlt_max", "normal_avg", "normal_std",
                "normal_max",
            ]
            .map(String::from)
            .to_vec()];
            for r in rows {
                let mut rec = vec![r.category.clone()];
                rec.extend(stat_cells(&r.wlt));
                rec.extend(stat_cells(&r.normal));
                body.push(rec);
            }
            body
        };
        put("text_stats.csv", true, table(&self.text_stats))?;
        put("special_tokens.csv", true, table(&self.special_tokens))?;
        put("readability.csv", true, table(&self.readability))?;

        let mut body = vec![["post_id", "pos", "neu", "neg"].map(String::from).to_vec()];
        for (id, s) in &self.sentiment {
            body.push(vec![id.clone(), fmt_num(s.pos), fmt_num(s.neu), fmt_num(s.neg)]);
        }
        put("sentiment.csv", false, body)?;

        for h in &self.histograms {
            let mut body = vec![vec!["bin".to_string(), "count".to_string()]];
            for (lo, c) in &h.bins {
                body.push(vec![fmt_num(*lo), c.to_string()]);
            }
            put(&format!("hist_{}_{}.csv", h.name, h.class.name()), false, body)?;
        }
        for (label, table) in &self.word_frequencies {
            let mut body = vec![vec!["token".to_string(), "count".to_string()]];
            body.extend(table.iter().map(|(t, c)| vec![t.clone(), c.to_string()]));
            put(&format!("word_freq_{}.csv", label.name()), false, body)?;
        }
        Ok(written)
    }
}
