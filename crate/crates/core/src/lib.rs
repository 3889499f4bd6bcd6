//! Sequence-to-sequence toolkit built around a lexicon-gated LSTM
//! encoder–decoder with an adversarially trained lexical probe.
//!
//! The pieces, bottom up:
//!
//! - [`autodiff`]: a reverse-mode tape over f64 tensors — the only compute
//!   substrate used anywhere.
//! - [`data`]: domain tokenizers, parallel-corpus ingestion, vocabularies.
//! - [`model`]: the encoder–decoder, its lexicon gate, the
//!   gradient-reversed adversary, and the two ablation variants.
//! - [`training`]: the two-stage schedule (lexicon first, everything else
//!   second) with per-epoch validation and best-epoch selection.
//! - [`metrics`]: multiset precision/recall, positional accuracy, exact
//!   match, corpus BLEU.
//! - [`lesion`]: re-randomize trained submodules and report the damage.
//! - [`checkpoint`]: versioned binary snapshots tied to vocabulary hashes.
//! - [`cli`]: the `lla` command-line front end.

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod lesion;
pub mod metrics;
pub mod model;
pub mod training;

pub use error::{Error, Result};
