//! V-signature aggregation and cosine geometry.
//!
//! A token's signature is the mean of its value vectors over all layers
//! and heads, scaled by `1 / (norm + epsilon)`. Rows therefore have norm
//! `norm / (norm + epsilon)`, strictly below 1, and an all-zero aggregate
//! stays an all-zero row instead of producing NaN. Cosine similarity
//! between two signatures is then a plain dot product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default norm floor for signature construction.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Per-token value vectors across layers and heads: shape `n x L x H x d`,
/// row-major with the token index outermost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueTensorBlock {
    pub n: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "H")]
    pub heads: usize,
    pub d: usize,
    pub values: Vec<f64>,
}

impl ValueTensorBlock {
    pub fn new(n: usize, layers: usize, heads: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if layers == 0 || heads == 0 || d == 0 {
            return Err(Error::InvalidParam(format!(
                "value tensor dimensions must be positive (L={layers}, H={heads}, d={d})"
            )));
        }
        let expect = n * layers * heads * d;
        if values.len() != expect {
            return Err(Error::ShapeMismatch {
                what: "value tensor payload length",
                left: values.len(),
                right: expect,
            });
        }
        let block = Self {
            n,
            layers,
            heads,
            d,
            values,
        };
        block.check_finite()?;
        Ok(block)
    }

    fn check_finite(&self) -> Result<()> {
        let stride = self.layers * self.heads * self.d;
        for (pos, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "value tensor",
                    index: pos / stride,
                });
            }
        }
        Ok(())
    }
}

/// `n` near-unit-norm signature rows; the geometry redundancy is measured in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureMatrix {
    pub n: usize,
    pub d: usize,
    pub rows: Vec<f64>,
    pub epsilon: f64,
}

impl SignatureMatrix {
    /// Wrap pre-computed rows. Every row must be finite with norm
    /// strictly below 1 (the construction in [`aggregate_signatures`]
    /// guarantees this).
    pub fn from_rows(n: usize, d: usize, rows: Vec<f64>, epsilon: f64) -> Result<Self> {
        if epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidParam(format!("epsilon must be > 0, got {epsilon}")));
        }
        if rows.len() != n * d {
            return Err(Error::ShapeMismatch {
                what: "signature row payload length",
                left: rows.len(),
                right: n * d,
            });
        }
        for i in 0..n {
            let row = &rows[i * d..(i + 1) * d];
            let mut sq = 0.0f64;
            for v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        what: "signature row",
                        index: i,
                    });
                }
                sq += v * v;
            }
            if sq.sqrt() >= 1.0 {
                return Err(Error::InvalidParam(format!(
                    "signature row {i} has norm {} >= 1",
                    sq.sqrt()
                )));
            }
        }
        Ok(Self { n, d, rows, epsilon })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }
}

/// Dense symmetric `n x n` similarity matrix.
#[derive(Debug, Clone)]
pub struct SimMatrix {
    pub n: usize,
    data: Vec<f64>,
}

impl SimMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Collapse a value tensor block into one signature per token: mean over
/// all `(layer, head)` pairs, then scale by `1 / (norm + epsilon)`.
///
/// Accumulation is in f64 with a fixed left-to-right order, so results do
/// not depend on summation reordering.
pub fn aggregate_signatures(block: &ValueTensorBlock, epsilon: f64) -> Result<SignatureMatrix> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidParam(format!("epsilon must be > 0, got {epsilon}")));
    }
    block.check_finite()?;
    let (n, d) = (block.n, block.d);
    let per_token = block.layers * block.heads;
    let mut rows = vec![0.0f64; n * d];
    for i in 0..n {
        let base = i * per_token * d;
        let mean = &mut rows[i * d..(i + 1) * d];
        for s in 0..per_token {
            let vec = &block.values[base + s * d..base + (s + 1) * d];
            for (m, v) in mean.iter_mut().zip(vec) {
                *m += v;
            }
        }
        let inv_count = 1.0 / per_token as f64;
        let mut sq = 0.0f64;
        for m in mean.iter_mut() {
            *m *= inv_count;
            sq += *m * *m;
        }
        let scale = 1.0 / (sq.sqrt() + epsilon);
        for m in mean.iter_mut() {
            *m *= scale;
        }
    }
    Ok(SignatureMatrix { n, d, rows, epsilon })
}

/// Full `n x n` cosine matrix of a signature matrix: `Sims[i][j] = row_i . row_j`.
///
/// Only the lower triangle is computed; the upper is mirrored, so the
/// result is exactly symmetric.
pub fn cosine_matrix(sig: &SignatureMatrix) -> SimMatrix {
    let n = sig.n;
    let mut data = vec![0.0f64; n * n];
    for i in 0..n {
        let ri = sig.row(i);
        // four independent rows per pass; each dot stays a strict
        // left-to-right accumulation
        let mut j = 0;
        while j + 4 <= i + 1 {
            let mut dots = [0.0f64; 4];
            let it = ri
                .iter()
                .zip(sig.row(j))
                .zip(sig.row(j + 1))
                .zip(sig.row(j + 2))
                .zip(sig.row(j + 3));
            for ((((&a, &b0), &b1), &b2), &b3) in it {
                dots[0] += a * b0;
                dots[1] += a * b1;
                dots[2] += a * b2;
                dots[3] += a * b3;
            }
            for (off, dot) in dots.into_iter().enumerate() {
                data[i * n + j + off] = dot;
                data[(j + off) * n + i] = dot;
            }
            j += 4;
        }
        while j <= i {
            let rj = sig.row(j);
            let mut dot = 0.0f64;
            for (a, b) in ri.iter().zip(rj) {
                dot += a * b;
            }
            data[i * n + j] = dot;
            data[j * n + i] = dot;
            j += 1;
        }
    }
    SimMatrix { n, data }
}
