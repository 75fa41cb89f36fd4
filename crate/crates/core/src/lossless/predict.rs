//! Causal DPCM: the first pixel is sent raw, the rest of row 0 is predicted
//! from the left neighbour, every other row from the pixel above. Channels
//! are handled independently.

use crate::quant::IndexPlane;

pub fn predict_forward(q: &IndexPlane) -> IndexPlane {
    let mut e = q.clone();
    let k = q.channels();
    for r in 0..q.height() {
        for c in 0..q.width() {
            for ch in 0..k {
                let pred = predictor(q, r, c, ch);
                e.set(r, c, ch, q.get(r, c, ch) - pred);
            }
        }
    }
    e
}

pub fn predict_inverse(e: &IndexPlane) -> IndexPlane {
    let mut q = e.clone();
    let k = e.channels();
    for r in 0..e.height() {
        for c in 0..e.width() {
            for ch in 0..k {
                let pred = predictor(&q, r, c, ch);
                q.set(r, c, ch, e.get(r, c, ch) + pred);
            }
        }
    }
    q
}

/// Predicted value at `(r, c)` from already-known samples of `q`.
#[inline]
pub(crate) fn predictor(q: &IndexPlane, r: usize, c: usize, ch: usize) -> i32 {
    match (r, c) {
        (0, 0) => 0,
        (0, _) => q.get(0, c - 1, ch),
        _ => q.get(r - 1, c, ch),
    }
}
