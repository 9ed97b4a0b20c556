//! Activation, pooling, and loss primitives with their backward forms.

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

/// Probability clamp applied inside log losses.
pub const BCE_CLAMP: f64 = 1e-7;

/// Numerically stable softmax: shifts by the maximum entry before
/// exponentiating, so inputs like `[1000, 0]` do not overflow.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Domain("softmax of an empty vector".into()));
    }
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Backward pass of softmax: given probabilities `p = softmax(z)` and the
/// loss gradient w.r.t. `p`, returns the gradient w.r.t. the logits `z`:
/// `dz_i = p_i * (dp_i - sum_j dp_j * p_j)`.
pub fn softmax_grad(p: &[f64], d_p: &[f64]) -> Vec<f64> {
    debug_assert_eq!(p.len(), d_p.len());
    let dot: f64 = p.iter().zip(d_p).map(|(pi, di)| pi * di).sum();
    p.iter().zip(d_p).map(|(pi, di)| pi * (di - dot)).collect()
}

/// Column-wise max over all rows, with the row index attaining each max.
/// Ties break toward the lowest row index.
pub fn maxpool_cols(scores: &DenseMatrix) -> Result<(Vec<f64>, Vec<usize>)> {
    maxpool_cols_range(scores, 0, scores.rows())
}

/// Column-wise max over rows `[lo, hi)`. Ties break toward the lowest row.
pub fn maxpool_cols_range(
    scores: &DenseMatrix,
    lo: usize,
    hi: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if lo >= hi || hi > scores.rows() {
        return Err(Error::Domain(format!(
            "max-pool over empty or out-of-range rows [{lo}, {hi}) of {} rows",
            scores.rows()
        )));
    }
    let cols = scores.cols();
    let mut values = scores.row(lo).to_vec();
    let mut argmax = vec![lo; cols];
    for r in lo + 1..hi {
        let row = scores.row(r);
        for c in 0..cols {
            if row[c] > values[c] {
                values[c] = row[c];
                argmax[c] = r;
            }
        }
    }
    Ok((values, argmax))
}

/// Mean binary cross-entropy over paired probabilities and 0/1 targets.
/// Predictions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` so the logs
/// stay finite.
pub fn bce_probs(pred: &[f64], target: &[f64]) -> Result<f64> {
    Ok(bce_probs_grad(pred, target)?.0)
}

/// `bce_probs` together with the gradient w.r.t. the (unclamped)
/// predictions. Coordinates pinned by the clamp get zero gradient, which
/// keeps the analytic gradient consistent with finite differences.
pub fn bce_probs_grad(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::Dim(format!(
            "bce: prediction length {} vs target length {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Domain("bce of empty vectors".into()));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, (&p, &y)) in pred.iter().zip(target).enumerate() {
        let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        if p > BCE_CLAMP && p < 1.0 - BCE_CLAMP {
            grad[i] = (-y / pc + (1.0 - y) / (1.0 - pc)) / n;
        }
    }
    Ok((loss / n, grad))
}

/// In-place rectifier.
pub fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}
