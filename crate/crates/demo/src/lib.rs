//! wasm-bindgen entry points for `www/index.html`.
//!
//! Everything here is plain Rust over `reranklab`; the page only draws.

use reranklab::grpo::{ideal_order, ndcg_at_k};
use reranklab::plackett_luce;
use reranklab::seed::rng;
use reranklab::simulator::{generate_corpus, ClickModel, SimConfig};
use reranklab::types::{RankedList, Session};
use wasm_bindgen::prelude::*;

/// Largest list the rank-distribution view enumerates exhaustively.
pub const MAX_EXACT: usize = 7;

/// `P(item i lands at rank t)` under Plackett-Luce, row-major `n x n`
/// (row = item). Exact by enumeration, so `n` is capped at [`MAX_EXACT`].
#[wasm_bindgen(js_name = rankMarginals)]
pub fn rank_marginals_js(utilities: &[f64], tau: f64) -> Result<Vec<f64>, JsError> {
    rank_marginals(utilities, tau).map_err(|e| JsError::new(&e))
}

pub fn rank_marginals(utilities: &[f64], tau: f64) -> Result<Vec<f64>, String> {
    let n = utilities.len();
    if n == 0 || n > MAX_EXACT {
        return Err(format!("need 1..={MAX_EXACT} utilities, got {n}"));
    }
    if !(tau > 0.0 && tau.is_finite()) || utilities.iter().any(|u| !u.is_finite()) {
        return Err("tau must be > 0 and utilities finite".to_owned());
    }
    let mut out = vec![0.0; n * n];
    let mut perm: Vec<usize> = (0..n).collect();
    each_permutation(&mut perm, 0, &mut |p| {
        let prob = plackett_luce::log_prob(utilities, tau, p).exp();
        for (t, &item) in p.iter().enumerate() {
            out[item * n + t] += prob;
        }
    });
    Ok(out)
}

fn each_permutation(p: &mut [usize], start: usize, f: &mut dyn FnMut(&[usize])) {
    if start == p.len() {
        f(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        each_permutation(p, start + 1, f);
        p.swap(start, i);
    }
}

/// One Plackett-Luce draw of a full ranking (item indices).
#[wasm_bindgen(js_name = sampleRanking)]
pub fn sample_ranking(utilities: &[f64], tau: f64, seed: u32) -> Vec<u32> {
    let mut r = rng(u64::from(seed));
    plackett_luce::sample(utilities, tau, utilities.len(), &mut r)
        .into_iter()
        .map(|i| i as u32)
        .collect()
}

/// Examination probability at positions `1..=depth` for bias strength `eta`.
#[wasm_bindgen(js_name = examinationCurve)]
pub fn examination_curve(eta: f64, depth: usize) -> Vec<f64> {
    let m = ClickModel { eta, ..ClickModel::default() };
    (1..=depth).map(|k| m.examination(k)).collect()
}

/// A single simulated query whose page the user reorders by hand. Hidden
/// true quality stands in for the experience score.
#[wasm_bindgen]
pub struct Page {
    session: Session,
    order: Vec<String>,
    ideal: Vec<String>,
}

impl Page {
    pub fn build(seed: u64, n: usize) -> reranklab::Result<Page> {
        let cfg = SimConfig {
            n_queries: 1,
            candidates_per_query: n,
            exposure_depth: n.min(SimConfig::default().exposure_depth),
            seed,
            ..SimConfig::default()
        };
        let session = generate_corpus(&cfg)?.remove(0);
        let order: Vec<String> = session.ids().map(String::from).collect();
        let ideal = ideal_order(&order, |id| session.truth(id).ok().map(|t| t.true_quality))?;
        Ok(Page { session, order, ideal })
    }

    pub fn breakdown(&self, alpha: f64, beta: f64, eta: f64, k: usize) -> reranklab::Result<Vec<f64>> {
        page_reward(&self.session, &self.order, &self.ideal, alpha, beta, eta, k)
    }
}

#[wasm_bindgen]
impl Page {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, n: usize) -> Result<Page, JsError> {
        Page::build(u64::from(seed), n).map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Item labels in current page order.
    pub fn labels(&self) -> Vec<String> {
        self.order.clone()
    }

    /// `[true_quality, clickbait]` per item in page order, flattened.
    pub fn truths(&self) -> Vec<f64> {
        self.order
            .iter()
            .flat_map(|id| {
                let t = self.session.truth(id).expect("own id");
                [t.true_quality, t.clickbait]
            })
            .collect()
    }

    /// Moves the item at `pos` one slot up; no-op at the top.
    pub fn promote(&mut self, pos: usize) {
        if pos > 0 && pos < self.order.len() {
            self.order.swap(pos - 1, pos);
        }
    }

    #[wasm_bindgen(js_name = resetToIdeal)]
    pub fn reset_to_ideal(&mut self) {
        self.order = self.ideal.clone();
    }

    /// Sorts by attractiveness, which is what a click-trained ranker learns.
    #[wasm_bindgen(js_name = resetToClicks)]
    pub fn reset_to_clicks(&mut self, eta: f64) {
        let m = ClickModel { eta, ..ClickModel::default() };
        let attr = |id: &str| self.session.truth(id).ok().map(|t| m.attractiveness(t));
        self.order = ideal_order(&self.order, attr).expect("own ids");
    }

    /// `[behavioral, ndcg, total]` for the top `k` of the current page.
    pub fn reward(&self, alpha: f64, beta: f64, eta: f64, k: usize) -> Result<Vec<f64>, JsError> {
        self.breakdown(alpha, beta, eta, k).map_err(|e| JsError::new(&e.to_string()))
    }
}

pub fn page_reward(
    session: &Session,
    order: &[String],
    ideal: &[String],
    alpha: f64,
    beta: f64,
    eta: f64,
    k: usize,
) -> reranklab::Result<Vec<f64>> {
    let k = k.clamp(1, order.len());
    let top = order[..k].to_vec();
    let m = ClickModel { eta, ..ClickModel::default() };
    let behavioral = m.behavioral_reward(&RankedList::new(session.query_id(), top.clone()), session)?;
    let ndcg = ndcg_at_k(&top, ideal, k)?.value;
    Ok(vec![behavioral, ndcg, alpha * behavioral + beta * ndcg])
}
