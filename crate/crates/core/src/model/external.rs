//! Scores from an external process or HTTP endpoint.
//!
//! Requests are JSON objects `{"post_id", "text", "ocr_text",
//! "user_description", "images"}` where `images` holds base64 PNGs laid out
//! per [`ImageLayout`]. Responses are `{"post_id", "score"}`.
//! Over a subprocess, each travels as one line on stdin/stdout and responses
//! may come back in any order. Posts without a valid response in time get no
//! score.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Scorer, ScorerKind};
use crate::corpus::{mask_text, Post};
use crate::error::{Error, Result};
use crate::imageprep::{bundle_for_post, concat_layout, stitch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputVariant {
    #[serde(rename = "text")]
    Text,
    #[serde(rename = "text+images")]
    TextImages,
    #[serde(rename = "text+images+ocr")]
    TextImagesOcr,
    #[serde(rename = "text+images+ocr+desc")]
    TextImagesOcrDesc,
}

impl InputVariant {
    pub fn has_images(self) -> bool {
        self != InputVariant::Text
    }

    pub fn has_ocr(self) -> bool {
        matches!(self, InputVariant::TextImagesOcr | InputVariant::TextImagesOcrDesc)
    }

    pub fn has_description(self) -> bool {
        self == InputVariant::TextImagesOcrDesc
    }
}

impl std::fmt::Display for InputVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::String(s)) => f.write_str(&s),
            _ => Err(std::fmt::Error),
        }
    }
}

impl std::str::FromStr for InputVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidInput(format!("unknown input variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageLayout {
    /// One 224x224 image of four 112x112 quadrants.
    Stitch,
    /// Four 224x224 images.
    Concat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "lowercase")]
pub enum Transport {
    Subprocess { program: PathBuf, args: Vec<String> },
    Http { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScorerSpec {
    #[serde(flatten)]
    pub transport: Transport,
    pub variant: InputVariant,
    /// Required exactly when the variant includes images.
    pub layout: Option<ImageLayout>,
    pub timeout_secs: f64,
    /// Concurrent HTTP requests.
    pub parallelism: usize,
    /// Directory that image references are resolved against.
    pub media_root: Option<PathBuf>,
}

impl ExternalScorerSpec {
    pub fn new(transport: Transport, variant: InputVariant, layout: Option<ImageLayout>) -> Self {
        ExternalScorerSpec {
            transport,
            variant,
            layout,
            timeout_secs: 30.0,
            parallelism: 4,
            media_root: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.variant.has_images(), self.layout) {
            (true, None) => Err(Error::InvalidInput(format!(
                "input variant {:?} needs an image layout",
                self.variant
            ))),
            (false, Some(l)) => Err(Error::InvalidInput(format!(
                "text-only input cannot use image layout {l:?}"
            ))),
            _ if !(self.timeout_secs > 0.0) => {
                Err(Error::InvalidInput("scorer timeout must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub post_id: String,
    pub text: String,
    pub ocr_text: Option<String>,
    pub user_description: Option<String>,
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub post_id: String,
    pub score: f64,
}

/// The request for `post` under `spec`'s input variant and layout. Text is
/// sent with mentions and URLs masked.
pub fn build_request(post: &Post, spec: &ExternalScorerSpec) -> ScoreRequest {
    let images = match (spec.variant.has_images(), spec.layout) {
        (true, Some(layout)) => {
            let root = spec.media_root.clone().unwrap_or_else(|| PathBuf::from("."));
            let bundle = bundle_for_post(post, &root);
            match layout {
                ImageLayout::Stitch => vec![stitch(&bundle).to_png_base64()],
                ImageLayout::Concat => concat_layout(&bundle).iter().map(|r| r.to_png_base64()).collect(),
            }
        }
        _ => Vec::new(),
    };
    ScoreRequest {
        post_id: post.post_id.clone(),
        text: mask_text(&post.text),
        ocr_text: if spec.variant.has_ocr() { post.ocr_text.clone() } else { None },
        user_description: if spec.variant.has_description() {
            post.user_description.clone()
        } else {
            None
        },
        images,
    }
}

fn valid_score(resp: &ScoreResponse) -> bool {
    resp.score.is_finite() && (0.0..=1.0).contains(&resp.score)
}

#[derive(Debug, Clone)]
pub struct ExternalScorer {
    spec: ExternalScorerSpec,
}

impl ExternalScorer {
    pub fn new(spec: ExternalScorerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(ExternalScorer { spec })
    }

    pub fn spec(&self) -> &ExternalScorerSpec {
        &self.spec
    }

    fn score_subprocess(&self, program: &PathBuf, args: &[String], posts: &[&Post]) -> Vec<Option<f64>> {
        let mut out = vec![None; posts.len()];
        let mut child = match Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
        {
            Ok(c) => c,
            Err(e) => {
                log::warn!("external scorer {} failed to start: {e}", program.display());
                return out;
            }
        };
        let (Some(stdin), Some(stdout)) = (child.stdin.take(), child.stdout.take()) else {
            let _ = child.kill();
            return out;
        };
        let requests: Vec<String> = posts
            .iter()
            .filter_map(|p| serde_json::to_string(&build_request(p, &self.spec)).ok())
            .collect();
        let writer = std::thread::spawn(move || {
            let mut stdin = stdin;
            for line in requests {
                if writeln!(stdin, "{line}").is_err() {
                    break;
                }
            }
        });
        let (tx, rx) = mpsc::channel();
        let reader = std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut slots: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, p) in posts.iter().enumerate() {
            slots.entry(p.post_id.as_str()).or_default().push(i);
        }
        let mut remaining = slots.len();
        let timeout = self.spec.timeout();
        while remaining > 0 {
            let line = match rx.recv_timeout(timeout) {
                Ok(l) => l,
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    log::warn!("external scorer timed out with {remaining} posts unscored");
                    break;
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    log::warn!("external scorer exited with {remaining} posts unscored");
                    break;
                }
            };
            match serde_json::from_str::<ScoreResponse>(&line) {
                Ok(resp) if valid_score(&resp) => match slots.get(resp.post_id.as_str()) {
                    Some(idx) if out[idx[0]].is_none() => {
                        for &i in idx {
                            out[i] = Some(resp.score);
                        }
                        remaining -= 1;
                    }
                    Some(_) => log::warn!("duplicate response for {}", resp.post_id),
                    None => log::warn!("response for unknown post {}", resp.post_id),
                },
                Ok(resp) => log::warn!("score {} for {} outside [0, 1]", resp.score, resp.post_id),
                Err(e) => log::warn!("protocol violation from external scorer: {e}"),
            }
        }
        // Grandchildren may keep the pipes open, so the I/O threads are
        // left to finish on their own.
        let _ = child.kill();
        let _ = child.wait();
        drop((writer, reader));
        out
    }

    fn score_http(&self, url: &str, posts: &[&Post]) -> Vec<Option<f64>> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.spec.timeout()))
            .build()
            .into();
        let score_one = |post: &Post| -> Option<f64> {
            let req = build_request(post, &self.spec);
            let resp: std::result::Result<ScoreResponse, ureq::Error> = agent
                .post(url)
                .send_json(&req)
                .and_then(|mut r| r.body_mut().read_json());
            match resp {
                Ok(r) if r.post_id == post.post_id && valid_score(&r) => Some(r.score),
                Ok(r) => {
                    log::warn!("bad response for {}: {r:?}", post.post_id);
                    None
                }
                Err(e) => {
                    log::warn!("external scorer request for {} failed: {e}", post.post_id);
                    None
                }
            }
        };
        let workers = self.spec.parallelism.clamp(1, posts.len().max(1));
        let chunk = posts.len().div_ceil(workers).max(1);
        std::thread::scope(|scope| {
            let handles: Vec<_> = posts
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|p| score_one(p)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().unwrap_or_default())
                .collect()
        })
    }
}

impl Scorer for ExternalScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::External
    }

    fn score_batch(&self, posts: &[&Post]) -> Vec<Option<f64>> {
        if posts.is_empty() {
            return Vec::new();
        }
        let started = Instant::now();
        let out = match &self.spec.transport {
            Transport::Subprocess { program, args } => self.score_subprocess(program, args, posts),
            Transport::Http { url } => self.score_http(url, posts),
        };
        log::debug!("external scorer: {} posts in {:?}", posts.len(), started.elapsed());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn post(id: &str, text: &str) -> Post {
        let mut p = Post::new(id, "u", Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(), text);
        p.ocr_text = Some("ocr".into());
        p.user_description = Some("desc".into());
        p
    }

    fn sh(script: &str, timeout_secs: f64) -> ExternalScorer {
        let mut spec = ExternalScorerSpec::new(
            Transport::Subprocess { program: "sh".into(), args: vec!["-c".into(), script.into()] },
            InputVariant::Text,
            None,
        );
        spec.timeout_secs = timeout_secs;
        ExternalScorer::new(spec).unwrap()
    }

    #[test]
    fn layout_must_match_variant() {
        let t = Transport::Http { url: "http://localhost:1".into() };
        assert!(ExternalScorerSpec::new(t.clone(), InputVariant::Text, Some(ImageLayout::Stitch)).validate().is_err());
        assert!(ExternalScorerSpec::new(t.clone(), InputVariant::TextImages, None).validate().is_err());
        assert!(ExternalScorerSpec::new(t, InputVariant::TextImagesOcr, Some(ImageLayout::Concat)).validate().is_ok());
        assert_eq!("text+images+ocr+desc".parse::<InputVariant>().unwrap(), InputVariant::TextImagesOcrDesc);
    }

    #[test]
    fn request_fields_follow_variant() {
        let t = Transport::Http { url: String::new() };
        let p = post("1", "hi @bob");
        let text = build_request(&p, &ExternalScorerSpec::new(t.clone(), InputVariant::Text, None));
        assert_eq!((text.text.as_str(), text.ocr_text, text.images.len()), ("hi {{MENTION}}", None, 0));
        let full = build_request(
            &p,
            &ExternalScorerSpec::new(t.clone(), InputVariant::TextImagesOcrDesc, Some(ImageLayout::Concat)),
        );
        assert_eq!(full.images.len(), 4);
        assert_eq!(full.user_description.as_deref(), Some("desc"));
        let stitched = build_request(&p, &ExternalScorerSpec::new(t, InputVariant::TextImagesOcr, Some(ImageLayout::Stitch)));
        assert_eq!((stitched.images.len(), stitched.ocr_text.as_deref(), stitched.user_description), (1, Some("ocr"), None));
    }

    #[test]
    fn out_of_order_and_invalid_responses() {
        let s = sh(
            r#"read a; read b; read c;
               echo '{"post_id":"b","score":0.25}'
               echo 'not json'
               echo '{"post_id":"c","score":1.5}'
               echo '{"post_id":"a","score":0.73}'"#,
            5.0,
        );
        let (a, b, c) = (post("a", "x"), post("b", "y"), post("c", "z"));
        assert_eq!(s.score_batch(&[&a, &b, &c]), vec![Some(0.73), Some(0.25), None]);
    }

    #[test]
    fn timeout_leaves_posts_unscored() {
        let s = sh("sleep 5", 0.2);
        let p = post("a", "x");
        let t = Instant::now();
        assert_eq!(s.score_batch(&[&p]), vec![None]);
        assert!(t.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn missing_program() {
        let spec = ExternalScorerSpec::new(
            Transport::Subprocess { program: "/nonexistent/scorer".into(), args: vec![] },
            InputVariant::Text,
            None,
        );
        let p = post("a", "x");
        assert_eq!(ExternalScorer::new(spec).unwrap().score_batch(&[&p]), vec![None]);
    }
}
