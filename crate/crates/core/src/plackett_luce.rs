//! Plackett-Luce list probabilities over a fixed utility vector.
//!
//! Items are indices into `utilities`; at each step the next item is drawn
//! from a softmax of `u / tau` over the items not yet chosen.

use rand::Rng as _;

use crate::seed::Rng;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-probability of choosing `sequence` (a prefix-valid selection).
pub fn log_prob(utilities: &[f64], tau: f64, sequence: &[usize]) -> f64 {
    let mut remaining = vec![true; utilities.len()];
    let mut total = 0.0;
    for &pick in sequence {
        let norm = log_sum_exp(
            utilities
                .iter()
                .zip(&remaining)
                .filter(|(_, &r)| r)
                .map(|(u, _)| u / tau),
        );
        total += utilities[pick] / tau - norm;
        remaining[pick] = false;
    }
    total
}

/// Log-probability and its gradient with respect to every utility.
pub fn log_prob_grad(utilities: &[f64], tau: f64, sequence: &[usize]) -> (f64, Vec<f64>) {
    let n = utilities.len();
    let mut remaining = vec![true; n];
    let mut grad = vec![0.0; n];
    let mut total = 0.0;
    let mut probs = vec![0.0; n];
    for &pick in sequence {
        let max = (0..n)
            .filter(|&j| remaining[j])
            .map(|j| utilities[j] / tau)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for j in 0..n {
            probs[j] = if remaining[j] {
                (utilities[j] / tau - max).exp()
            } else {
                0.0
            };
            z += probs[j];
        }
        total += utilities[pick] / tau - max - z.ln();
        for j in 0..n {
            grad[j] -= probs[j] / z / tau;
        }
        grad[pick] += 1.0 / tau;
        remaining[pick] = false;
    }
    (total, grad)
}

/// Draws `k` items without replacement.
pub fn sample(utilities: &[f64], tau: f64, k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..utilities.len()).collect();
    let mut out = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(remaining.len());
    for _ in 0..k.min(utilities.len()) {
        let max = remaining
            .iter()
            .map(|&j| utilities[j] / tau)
            .fold(f64::NEG_INFINITY, f64::max);
        weights.clear();
        weights.extend(remaining.iter().map(|&j| (utilities[j] / tau - max).exp()));
        let total: f64 = weights.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut slot = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                slot = i;
                break;
            }
            target -= w;
        }
        // float round-off can run past the end; fall back to the last
        // item that has positive weight
        if weights[slot] == 0.0 {
            slot = weights.iter().rposition(|&w| w > 0.0).unwrap_or(slot);
        }
        out.push(remaining.remove(slot));
    }
    out
}
