use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tensor::Matrix;

/// Probability floor applied before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-9;

static CLAMP_EVENTS: AtomicUsize = AtomicUsize::new(0);

/// Row-wise softmax, stabilized by subtracting the row maximum.
pub fn softmax_rows<S: Scalar>(logits: &Matrix<S>) -> Matrix<S> {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let mut sum = S::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = S::one() / sum;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    out
}

/// Total code length of `targets` under `probs`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CrossEntropy {
    pub bits: f64,
    /// Rows whose target probability fell below [`PROB_FLOOR`].
    pub clamped: usize,
}

impl CrossEntropy {
    /// Process-wide count of clamped probabilities, for diagnostics.
    pub fn clamp_events() -> usize {
        CLAMP_EVENTS.load(Ordering::Relaxed)
    }
}

/// `Σ_i -log2 probs[i][targets[i]]`.
pub fn cross_entropy<S: Scalar>(probs: &Matrix<S>, targets: &[usize]) -> Result<CrossEntropy> {
    if probs.rows() != targets.len() {
        return Err(Error::Shape(format!(
            "{} probability rows for {} targets",
            probs.rows(),
            targets.len()
        )));
    }
    let mut ce = CrossEntropy::default();
    for (i, &t) in targets.iter().enumerate() {
        if t >= probs.cols() {
            return Err(Error::IndexError {
                index: t,
                len: probs.cols(),
            });
        }
        let mut p = probs.row(i)[t].to_f64_lossy();
        if p.is_nan() || p < PROB_FLOOR {
            p = PROB_FLOOR;
            ce.clamped += 1;
        }
        ce.bits -= p.log2();
    }
    if ce.clamped > 0 {
        CLAMP_EVENTS.fetch_add(ce.clamped, Ordering::Relaxed);
    }
    Ok(ce)
}

/// Gradient of the natural-log cross-entropy w.r.t. the softmax logits,
/// scaled by `scale`: `scale · (p − onehot(target))` per row.
pub fn softmax_cross_entropy_grad<S: Scalar>(
    probs: &Matrix<S>,
    targets: &[usize],
    scale: S,
) -> Matrix<S> {
    let mut g = probs.clone();
    for (i, &t) in targets.iter().enumerate() {
        let row = g.row_mut(i);
        row[t] -= S::one();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    g
}
