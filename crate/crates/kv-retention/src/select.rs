//! Greedy set-conditioned retention selection.
//!
//! The selector keeps `min(k, n)` token indices. At `lambda = 0` it is a
//! fast-path top-k on the base scores, exactly equal to the baseline. At
//! `lambda > 0` each pick after the first maximizes
//! `score - lambda * max(0, max cosine to the already-retained set)`;
//! the running max-similarity vector is updated in constant time per pick
//! from a cosine matrix materialized once per event. All argmax ties break
//! toward the lowest token index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::{cosine_matrix, SignatureMatrix};

/// Per-token base retention scores (produced upstream).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreVector {
    pub n: usize,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        for (i, s) in scores.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite {
                    what: "scores",
                    index: i,
                });
            }
        }
        Ok(Self {
            n: scores.len(),
            scores,
        })
    }
}

/// Budget and redundancy weight for one compression event.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub lambda: f64,
}

impl SelectionConfig {
    pub fn new(k: usize, lambda: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParam(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { k, lambda })
    }
}

/// Sorted, duplicate-free retained token indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetainedSet {
    pub indices: Vec<usize>,
}

impl RetainedSet {
    fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Self { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Marginal gain of adding a candidate with base score `score` whose max
/// cosine to the retained set is `max_sim_to_selected`.
#[inline]
pub fn marginal_gain(score: f64, max_sim_to_selected: f64, lambda: f64) -> f64 {
    score - lambda * max_sim_to_selected.max(0.0)
}

/// Keep the `min(k, n)` highest-scoring indices, ties toward the lowest
/// index, output sorted ascending.
pub fn top_k(scores: &ScoreVector, k: usize) -> Result<RetainedSet> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    let n = scores.n;
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort by descending score keeps lower indices first on ties
    order.sort_by(|&a, &b| scores.scores[b].partial_cmp(&scores.scores[a]).unwrap());
    order.truncate(k.min(n));
    Ok(RetainedSet::from_unsorted(order))
}

fn argmax_lowest(values: &[f64], live: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if !live(i) {
            continue;
        }
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Select retained tokens for one compression event.
///
/// `lambda = 0` routes to [`top_k`] and returns its output unchanged.
/// `n = 0` returns an empty set; `k >= n` returns every index.
pub fn select(scores: &ScoreVector, sig: &SignatureMatrix, cfg: &SelectionConfig) -> Result<RetainedSet> {
    if scores.n != sig.n {
        return Err(Error::ShapeMismatch {
            what: "scores vs signatures token count",
            left: scores.n,
            right: sig.n,
        });
    }
    if cfg.lambda == 0.0 {
        return top_k(scores, cfg.k);
    }
    let n = scores.n;
    let keep = cfg.k.min(n);
    if keep == 0 {
        return Ok(RetainedSet { indices: vec![] });
    }
    if keep == n {
        return Ok(RetainedSet {
            indices: (0..n).collect(),
        });
    }

    let sims = cosine_matrix(sig);
    let mut selected = vec![false; n];
    let mut picks = Vec::with_capacity(keep);
    // m_i = max(0, max over selected j of cos(v_i, v_j)); starts at zero
    // so the non-negativity floor is built into the elementwise max.
    let mut max_sim = vec![0.0f64; n];

    let first = argmax_lowest(&scores.scores, |_| true).expect("n > 0");
    selected[first] = true;
    picks.push(first);
    for (m, &s) in max_sim.iter_mut().zip(sims.row(first)) {
        *m = m.max(s);
    }

    let mut gains = vec![0.0f64; n];
    for _ in 1..keep {
        for i in 0..n {
            gains[i] = scores.scores[i] - cfg.lambda * max_sim[i];
        }
        let pick = argmax_lowest(&gains, |i| !selected[i]).expect("keep < n");
        selected[pick] = true;
        picks.push(pick);
        for (m, &s) in max_sim.iter_mut().zip(sims.row(pick)) {
            *m = m.max(s);
        }
    }
    Ok(RetainedSet::from_unsorted(picks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::SignatureMatrix;

    fn sig_from(rows: &[&[f64]]) -> SignatureMatrix {
        let d = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        SignatureMatrix::from_rows(rows.len(), d, flat, 1e-12).unwrap()
    }

    #[test]
    fn marginal_gain_examples() {
        assert!((marginal_gain(0.9, 1.0, 0.5) - 0.4).abs() < 1e-15);
        // anti-aligned candidates take no bonus
        assert_eq!(marginal_gain(0.8, -0.3, 0.5), 0.8);
        assert_eq!(marginal_gain(0.37, 0.99, 0.0), 0.37);
    }

    #[test]
    fn top_k_examples() {
        let s = ScoreVector::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(top_k(&s, 2).unwrap().indices, vec![0, 1]);

        let s = ScoreVector::new(vec![0.1, 5.0, 3.0, 4.0]).unwrap();
        assert_eq!(top_k(&s, 2).unwrap().indices, vec![1, 3]);

        let s = ScoreVector::new((0..64).map(|i| i as f64 * 0.3).collect()).unwrap();
        assert_eq!(top_k(&s, 64).unwrap().indices, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn lambda_zero_is_top_k() {
        let s = ScoreVector::new(vec![3.0, 1.0, 2.0]).unwrap();
        let sig = sig_from(&[&[0.9, 0.0], &[0.0, 0.9], &[0.5, 0.5]]);
        let cfg = SelectionConfig::new(2, 0.0).unwrap();
        assert_eq!(select(&s, &sig, &cfg).unwrap().indices, vec![0, 2]);
    }

    #[test]
    fn duplicate_signature_diverts_second_pick() {
        // v_0 = v_1 near-unit, v_2 orthogonal: greedy at lambda=0.5 keeps
        // {0,2} while top-k keeps {0,1}.
        let near = 1.0 / (1.0 + 1e-12);
        let s = ScoreVector::new(vec![1.0, 0.9, 0.8]).unwrap();
        let sig = sig_from(&[&[near, 0.0], &[near, 0.0], &[0.0, near]]);
        let cfg = SelectionConfig::new(2, 0.5).unwrap();
        assert_eq!(select(&s, &sig, &cfg).unwrap().indices, vec![0, 2]);
        assert_eq!(top_k(&s, 2).unwrap().indices, vec![0, 1]);
    }

    #[test]
    fn k_at_least_n_keeps_everything() {
        let s = ScoreVector::new(vec![0.1, 0.2, 0.3]).unwrap();
        let sig = sig_from(&[&[0.9, 0.0], &[0.9, 0.0], &[0.9, 0.0]]);
        let cfg = SelectionConfig::new(3, 0.5).unwrap();
        assert_eq!(select(&s, &sig, &cfg).unwrap().indices, vec![0, 1, 2]);
    }

    #[test]
    fn empty_input_returns_empty_set() {
        let s = ScoreVector::new(vec![]).unwrap();
        let sig = SignatureMatrix::from_rows(0, 1, vec![], 1e-12).unwrap();
        let cfg = SelectionConfig::new(4, 0.7).unwrap();
        assert!(select(&s, &sig, &cfg).unwrap().is_empty());
        assert!(top_k(&s, 4).unwrap().is_empty());
    }

    #[test]
    fn mismatched_n_rejected() {
        let s = ScoreVector::new(vec![1.0, 2.0]).unwrap();
        let sig = sig_from(&[&[0.5, 0.0]]);
        let cfg = SelectionConfig::new(1, 0.5).unwrap();
        assert!(select(&s, &sig, &cfg).is_err());
    }

    #[test]
    fn nan_scores_rejected_at_boundary() {
        assert!(ScoreVector::new(vec![1.0, f64::NAN]).is_err());
    }
}
