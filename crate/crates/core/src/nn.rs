//! Affine + tanh fusion layer over `concat(query, candidate, 1)`.
//!
//! Weights are row-major with `d_q + d_v + 1` columns per hidden unit; the
//! last column is the bias.

use rand_distr::{Distribution, Normal};

use crate::seed::Rng;

pub(crate) fn row_width(d_q: usize, d_v: usize) -> usize {
    d_q + d_v + 1
}

pub(crate) fn init_weights(rows: usize, cols: usize, rng: &mut Rng) -> Vec<f64> {
    let std = 1.0 / (cols as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    (0..rows * cols).map(|_| normal.sample(rng)).collect()
}

pub(crate) fn init_vector(len: usize, rng: &mut Rng) -> Vec<f64> {
    init_weights(1, len, rng)
}

/// `out[r] = tanh(W[r] . [q; v; 1])`
pub(crate) fn forward(weights: &[f64], q: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = q.len() + v.len() + 1;
    for (r, slot) in out.iter_mut().enumerate() {
        let row = &weights[r * cols..(r + 1) * cols];
        let (wq, rest) = row.split_at(q.len());
        let (wv, bias) = rest.split_at(v.len());
        let pre = dot(wq, q) + dot(wv, v) + bias[0];
        *slot = pre.tanh();
    }
}

/// Accumulates `d loss / d W` into `grad` given the layer output `h` and
/// the upstream gradient `dh`.
pub(crate) fn backward(grad: &mut [f64], q: &[f64], v: &[f64], h: &[f64], dh: &[f64]) {
    let cols = q.len() + v.len() + 1;
    for (r, (&hr, &dhr)) in h.iter().zip(dh).enumerate() {
        let dpre = dhr * (1.0 - hr * hr);
        if dpre == 0.0 {
            continue;
        }
        let row = &mut grad[r * cols..(r + 1) * cols];
        let (gq, rest) = row.split_at_mut(q.len());
        let (gv, gb) = rest.split_at_mut(v.len());
        gq.iter_mut().zip(q).for_each(|(g, x)| *g += dpre * x);
        gv.iter_mut().zip(v).for_each(|(g, x)| *g += dpre * x);
        gb[0] += dpre;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-log(sigmoid(x))`, stable for large |x|.
pub(crate) fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

pub(crate) fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}
