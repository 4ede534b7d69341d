//! Decode-time cache-length simulation and matched-memory accounting.
//!
//! The unit throughout is tokens, not bytes. A trajectory starts from the
//! end-of-prefill cache (compressed to the budget), appends one token per
//! decode step, and truncates back to the budget whenever the cadence
//! policy fires. Lengths are recorded after the append and before any
//! truncation, so a policy that recompresses at every step holds the
//! recorded length at `b + 1`. The decode mean is taken over decode steps
//! only; end-of-prefill cache is tracked separately so that pairs which
//! agree at end of prefill but diverge during decode are visible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// When the cache is recompressed to budget during decode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cadence {
    /// Never recompress after prefill.
    Never,
    /// Recompress after every `c`-th decode step (steps are 1-based).
    EveryCSteps { c: usize },
    /// Recompress after exactly the listed 1-based decode steps.
    AtSteps { steps: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CadencePolicy {
    pub cadence: Cadence,
    /// Token budget the cache is truncated to at each compression event.
    pub budget: usize,
}

impl CadencePolicy {
    pub fn new(cadence: Cadence, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidParam("budget must be >= 1".into()));
        }
        match &cadence {
            Cadence::EveryCSteps { c } if *c == 0 => {
                return Err(Error::InvalidParam("cadence interval c must be >= 1".into()));
            }
            Cadence::AtSteps { steps } => {
                if !steps.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::InvalidParam(
                        "at_steps must be strictly increasing".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(Self { cadence, budget })
    }

    fn fires_at(&self, step: usize) -> bool {
        match &self.cadence {
            Cadence::Never => false,
            Cadence::EveryCSteps { c } => step % c == 0,
            Cadence::AtSteps { steps } => steps.binary_search(&step).is_ok(),
        }
    }
}

/// One simulated cache-length trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub prefill_len: usize,
    /// Cache length right after the end-of-prefill compression.
    pub end_of_prefill: usize,
    /// Post-append cache length at each decode step.
    pub lengths: Vec<usize>,
}

/// Per-problem cache instrumentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheStats {
    /// Mean post-append cache length over decode steps; 0 when no decode
    /// steps occurred (see `has_decode`).
    pub mean_decode_cache: f64,
    pub peak_cache: usize,
    pub end_of_prefill_cache: usize,
    /// False when the trace had zero decode steps and the mean is a
    /// placeholder rather than a measurement.
    pub has_decode: bool,
}

/// Verdict and diagnostic from a matched-mean-memory comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedMeanVerdict {
    pub matched: bool,
    pub mean_a: f64,
    pub mean_b: f64,
    pub end_of_prefill_a: usize,
    pub end_of_prefill_b: usize,
    /// True when the two traces agree at end of prefill but the decode
    /// means do not match: the false positive end-of-prefill auditing
    /// would produce.
    pub end_of_prefill_false_positive: bool,
}

/// Default relative tolerance for [`matched_mean_check`].
pub const DEFAULT_MATCH_REL_TOL: f64 = 0.02;

/// Simulate a cache-length trajectory under a cadence policy.
///
/// The prefill compresses the cache to the budget (a prefill shorter than
/// the budget just stays at its own length). Each decode step appends one
/// token, records the length, then truncates to budget if the policy
/// fires at that step.
pub fn simulate_trajectory(
    prefill_len: usize,
    decode_steps: usize,
    policy: &CadencePolicy,
) -> Result<DecodeTrace> {
    if prefill_len == 0 {
        return Err(Error::InvalidParam("prefill_len must be >= 1".into()));
    }
    let end_of_prefill = prefill_len.min(policy.budget);
    let mut len = end_of_prefill;
    let mut lengths = Vec::with_capacity(decode_steps);
    for step in 1..=decode_steps {
        len += 1;
        lengths.push(len);
        if policy.fires_at(step) {
            len = len.min(policy.budget);
        }
    }
    Ok(DecodeTrace {
        prefill_len,
        end_of_prefill,
        lengths,
    })
}

/// Reduce a trace to mean/peak/end-of-prefill statistics.
pub fn instrument(trace: &DecodeTrace) -> CacheStats {
    let has_decode = !trace.lengths.is_empty();
    let mean_decode_cache = if has_decode {
        trace.lengths.iter().sum::<usize>() as f64 / trace.lengths.len() as f64
    } else {
        0.0
    };
    let peak_cache = trace
        .lengths
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max(trace.end_of_prefill);
    CacheStats {
        mean_decode_cache,
        peak_cache,
        end_of_prefill_cache: trace.end_of_prefill,
        has_decode,
    }
}

/// Compare two instrumented runs on decode-mean cache.
///
/// Matched iff `|mean_a - mean_b| <= rel_tol * max(mean_a, mean_b)`. The
/// diagnostic always reports both means and the end-of-prefill values so
/// that pairs which look identical at end of prefill but diverge during
/// decode are flagged explicitly.
pub fn matched_mean_check(a: &CacheStats, b: &CacheStats, rel_tol: f64) -> Result<MatchedMeanVerdict> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParam(format!("rel_tol must be > 0, got {rel_tol}")));
    }
    let (ma, mb) = (a.mean_decode_cache, b.mean_decode_cache);
    let matched = (ma - mb).abs() <= rel_tol * ma.max(mb);
    Ok(MatchedMeanVerdict {
        matched,
        mean_a: ma,
        mean_b: mb,
        end_of_prefill_a: a.end_of_prefill_cache,
        end_of_prefill_b: b.end_of_prefill_cache,
        end_of_prefill_false_positive: !matched && a.end_of_prefill_cache == b.end_of_prefill_cache,
    })
}
