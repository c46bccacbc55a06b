//! Candidate collection, human-in-the-loop labeling and evaluation for
//! scarce-class social post detection (wildlife product trading posts).
//!
//! The pipeline is split by stage:
//!
//! - [`corpus`]: post data model, JSONL ingestion, tweet-aware tokenization,
//!   special-token extraction and privacy masking.
//! - [`socialgraph`]: breadth-first follower/following expansion from seed
//!   users over a pluggable [`socialgraph::SocialSource`], timeline
//!   collection, degree analysis and a deterministic synthetic source.
//! - [`textstats`]: length statistics, Flesch reading ease, lexicon sentiment,
//!   word frequencies and per-class CSV reports.
//! - [`imageprep`]: zero-padding of up to four images, 2x2 stitching,
//!   concatenation layout and image-count distributions.
//! - [`splitter`]: 1:N class balancing and user-disjoint train/dev/test splits.
//! - [`model`]: keyword filter, class-weighted logistic model over TF-IDF and
//!   handcrafted features, external scorer protocol, MCC threshold calibration.
//! - [`eval`]: precision/recall on the positive class, macro F1, MCC, AUC and
//!   multi-seed aggregation.
//! - [`hitl`]: the round-based labeling loop, its event log and HTTP service.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod hitl;
pub mod imageprep;
pub mod model;
pub mod socialgraph;
pub mod splitter;
pub mod textstats;

pub use corpus::{Corpus, Label, Post};
pub use error::{Error, Result};
