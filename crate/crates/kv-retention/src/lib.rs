//! Set-conditioned KV-cache token retention and the matched-memory
//! evaluation machinery around it.
//!
//! The crate has four independent pieces and a CLI tying them together:
//!
//! * [`signature`] and [`select`] — V-signature aggregation, cosine
//!   redundancy, and the greedy selector with its exact top-k fast path
//!   at `lambda = 0`.
//! * [`cache`] — decode-time cache-length simulation and the
//!   matched-mean-memory check.
//! * [`split`] — deterministic MD5-bucketed dev/confirm splitting.
//! * [`stats`] — paired per-problem deltas, cluster bootstrap, the
//!   Bonferroni family test, probe-grid lambda selection, and the
//!   pre-committed branch decision.
//!
//! Everything is a pure function of its inputs; the only randomness is
//! the bootstrap's seedable ChaCha8 generator. See the `examples/`
//! directory for one runnable walkthrough per capability.

pub mod cache;
pub mod cli;
pub mod error;
pub mod io;
pub mod select;
pub mod signature;
pub mod split;
pub mod stats;

pub use error::{Error, Result};
pub use select::{marginal_gain, select, top_k, RetainedSet, ScoreVector, SelectionConfig};
pub use signature::{aggregate_signatures, cosine_matrix, SignatureMatrix, ValueTensorBlock};
