//! Synthetic long-tail search sessions with hidden ground truth.
//!
//! Three bias sources are simulated:
//! - position/exposure bias: an impression is a popularity-ordered page and
//!   each slot `k` is examined with probability `1/k^eta`;
//! - popularity bias: popularity alone decides which items get shown;
//! - presentation mismatch: mismatched items look more clickbaity while
//!   their content quality is lower.
//!
//! Candidate features are a fixed random linear mix of the ground truth plus
//! Gaussian noise, so quality is recoverable by a learned scorer.

use std::collections::{BTreeSet, HashMap};

use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordering::stable_sort_desc;
use crate::seed::{derived_rng, Rng};
use crate::types::{
    CandidateRecord, QueryRecord, RankedList, Session, SimTruth, DEFAULT_LONG_TAIL_THRESHOLD,
};

const LATENTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_queries: usize,
    pub candidates_per_query: usize,
    pub d_q: usize,
    pub d_v: usize,
    /// Length of the logged impression (popularity-ordered page).
    pub exposure_depth: usize,
    pub position_bias_eta: f64,
    pub clickbait_gain: f64,
    pub quality_gain: f64,
    pub click_offset: f64,
    pub mismatch_rate: f64,
    /// Probability that the oracle annotator flips a preference.
    pub label_noise: f64,
    pub feature_noise: f64,
    pub pairs_per_query: usize,
    pub long_tail_threshold: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_queries: 1000,
            candidates_per_query: 12,
            d_q: 4,
            d_v: 12,
            exposure_depth: 8,
            position_bias_eta: 1.0,
            clickbait_gain: 3.0,
            quality_gain: 1.5,
            click_offset: 0.5,
            mismatch_rate: 0.15,
            label_noise: 0.05,
            feature_noise: 0.1,
            pairs_per_query: 8,
            long_tail_threshold: DEFAULT_LONG_TAIL_THRESHOLD,
            seed: 7,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_queries < 1 {
            bad.push("n_queries must be >= 1".to_owned());
        }
        if self.candidates_per_query < 2 {
            bad.push("candidates_per_query must be >= 2".to_owned());
        }
        if self.d_q < 1 {
            bad.push("d_q must be >= 1".to_owned());
        }
        if self.d_v < 1 {
            bad.push("d_v must be >= 1".to_owned());
        }
        if self.exposure_depth < 1 || self.exposure_depth > self.candidates_per_query {
            bad.push("exposure_depth must be in [1, candidates_per_query]".to_owned());
        }
        if !(self.position_bias_eta >= 0.0) {
            bad.push("position_bias_eta must be >= 0".to_owned());
        }
        for (name, v) in [
            ("clickbait_gain", self.clickbait_gain),
            ("quality_gain", self.quality_gain),
            ("click_offset", self.click_offset),
        ] {
            if !v.is_finite() {
                bad.push(format!("{name} must be finite"));
            }
        }
        for (name, v) in [
            ("mismatch_rate", self.mismatch_rate),
            ("label_noise", self.label_noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                bad.push(format!("{name} must be in [0,1]"));
            }
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            bad.push("feature_noise must be >= 0".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }

    pub fn click_model(&self) -> ClickModel {
        ClickModel {
            eta: self.position_bias_eta,
            clickbait_gain: self.clickbait_gain,
            quality_gain: self.quality_gain,
            offset: self.click_offset,
        }
    }
}

/// Position-biased examination model with attractiveness-driven clicks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickModel {
    pub eta: f64,
    pub clickbait_gain: f64,
    pub quality_gain: f64,
    pub offset: f64,
}

impl Default for ClickModel {
    fn default() -> Self {
        SimConfig::default().click_model()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ClickModel {
    /// Examination probability of 1-based position `k`.
    pub fn examination(&self, k: usize) -> f64 {
        (k as f64).powf(-self.eta)
    }

    pub fn attractiveness(&self, truth: &SimTruth) -> f64 {
        sigmoid(
            self.clickbait_gain * truth.clickbait + self.quality_gain * truth.true_quality
                - self.offset,
        )
    }

    /// Samples one impression of `ranking`.
    pub fn click(&self, ranking: &RankedList, session: &Session, seed: u64) -> Result<BTreeSet<String>> {
        session.check_list(&ranking.items)?;
        let mut rng = derived_rng(seed, &["click", session.query_id()]);
        self.click_with(&ranking.items, session, &mut rng)
    }

    pub fn click_with(
        &self,
        items: &[String],
        session: &Session,
        rng: &mut Rng,
    ) -> Result<BTreeSet<String>> {
        let mut clicked = BTreeSet::new();
        for (k, id) in items.iter().enumerate() {
            let truth = session.truth(id)?;
            let examined = rng.random::<f64>() < self.examination(k + 1);
            let attracted = rng.random::<f64>() < self.attractiveness(truth);
            if examined && attracted {
                clicked.insert(id.clone());
            }
        }
        Ok(clicked)
    }

    /// Exact expected number of clicks for one impression of `items`.
    pub fn expected_clicks(&self, items: &[String], session: &Session) -> Result<f64> {
        items.iter().enumerate().try_fold(0.0, |acc, (k, id)| {
            Ok(acc + self.attractiveness(session.truth(id)?) * self.examination(k + 1))
        })
    }

    /// Expected clicks of the page divided by the expected clicks of the
    /// same items in descending attractiveness, which is the best ordering
    /// of that set (rearrangement inequality, examination is non-increasing
    /// in k).
    pub fn behavioral_reward(&self, ranking: &RankedList, session: &Session) -> Result<f64> {
        if ranking.is_empty() {
            return Err(Error::InvalidInput("behavioral reward of an empty list".into()));
        }
        session.check_list(&ranking.items)?;
        let achieved = self.expected_clicks(&ranking.items, session)?;
        let mut attr = ranking
            .items
            .iter()
            .map(|id| Ok(self.attractiveness(session.truth(id)?)))
            .collect::<Result<Vec<f64>>>()?;
        attr.sort_by(|a, b| b.total_cmp(a));
        let best: f64 = attr
            .iter()
            .enumerate()
            .map(|(k, a)| a * self.examination(k + 1))
            .sum();
        if best <= 0.0 {
            return Ok(1.0);
        }
        Ok((achieved / best).clamp(0.0, 1.0))
    }

    /// Historical click-through proxy: attractiveness times the examination
    /// probability the item gets at its popularity rank.
    pub fn historical_ctr(&self, session: &Session) -> Result<HashMap<String, f64>> {
        let order = popularity_order(session)?;
        order
            .iter()
            .enumerate()
            .map(|(k, id)| {
                let a = self.attractiveness(session.truth(id)?);
                Ok((id.clone(), a * self.examination(k + 1)))
            })
            .collect()
    }
}

/// Candidate ids by descending popularity.
pub fn popularity_order(session: &Session) -> Result<Vec<String>> {
    let pop = session
        .candidates()
        .iter()
        .map(|c| Ok((c.cand_id.as_str(), c.truth()?.popularity)))
        .collect::<Result<HashMap<&str, f64>>>()?;
    stable_sort_desc(&session.ids().collect::<Vec<_>>(), |id| pop.get(id).copied())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub query_id: String,
    pub winner_id: String,
    pub loser_id: String,
    pub margin: f64,
}

/// Oracle annotator: prefers the item with higher true quality, flipping the
/// decision with probability `label_noise`. Equal quality goes to the
/// smaller id. The decision for `{a, b}` does not depend on argument order.
pub fn oracle_prefer(
    session: &Session,
    id_a: &str,
    id_b: &str,
    label_noise: f64,
    seed: u64,
) -> Result<PreferencePair> {
    if id_a == id_b {
        return Err(Error::InvalidInput(format!(
            "cannot compare `{id_a}` with itself"
        )));
    }
    let qa = session.truth(id_a)?.true_quality;
    let qb = session.truth(id_b)?.true_quality;
    let (lo, hi) = if id_a < id_b { (id_a, id_b) } else { (id_b, id_a) };
    let a_wins = qa > qb || (qa == qb && id_a < id_b);
    let (mut winner, mut loser) = if a_wins { (id_a, id_b) } else { (id_b, id_a) };
    let mut rng = derived_rng(seed, &["oracle", session.query_id(), lo, hi]);
    if rng.random::<f64>() < label_noise {
        std::mem::swap(&mut winner, &mut loser);
    }
    Ok(PreferencePair {
        query_id: session.query_id().to_owned(),
        winner_id: winner.to_owned(),
        loser_id: loser.to_owned(),
        margin: (qa - qb).abs(),
    })
}

fn mixing_matrix(cfg: &SimConfig) -> Vec<[f64; LATENTS]> {
    let mut rng = derived_rng(cfg.seed, &["mixing"]);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..cfg.d_v)
        .map(|_| std::array::from_fn(|_| normal.sample(&mut rng)))
        .collect()
}

fn draw_truth(cfg: &SimConfig, rng: &mut Rng) -> SimTruth {
    let popularity = LogNormal::new(0.0, 1.0).expect("valid lognormal").sample(rng);
    let mismatch = if rng.random::<f64>() < cfg.mismatch_rate {
        rng.random_range(0.3..1.0)
    } else {
        0.0
    };
    let bait: f64 = rng.random();
    let base_quality: f64 = rng.random();
    SimTruth {
        true_quality: base_quality * (1.0 - 0.5 * mismatch),
        popularity,
        clickbait: bait + (1.0 - bait) * mismatch,
        mismatch,
    }
}

fn encode(truth: &SimTruth, mixing: &[[f64; LATENTS]], noise: &Normal<f64>, rng: &mut Rng) -> Vec<f64> {
    let latent = [
        2.0 * truth.true_quality - 1.0,
        truth.popularity.ln_1p() - 0.8,
        2.0 * truth.clickbait - 1.0,
        2.0 * truth.mismatch - 1.0,
    ];
    mixing
        .iter()
        .map(|row| {
            let clean: f64 = row.iter().zip(&latent).map(|(m, z)| m * z).sum();
            clean + noise.sample(rng)
        })
        .collect()
}

/// Generates the corpus. Each query draws from its own seed stream, so a
/// session does not change when `n_queries` grows.
pub fn generate_corpus(cfg: &SimConfig) -> Result<Vec<Session>> {
    cfg.validate()?;
    let mixing = mixing_matrix(cfg);
    let noise = Normal::new(0.0, cfg.feature_noise).expect("validated noise");
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let clicks = cfg.click_model();
    (0..cfg.n_queries)
        .map(|qi| {
            let query_id = format!("q{qi:05}");
            let mut rng = derived_rng(cfg.seed, &["query", &query_id]);
            let query = QueryRecord {
                query_id: query_id.clone(),
                features: (0..cfg.d_q).map(|_| unit.sample(&mut rng)).collect(),
                pv_count: rng.random_range(0..cfg.long_tail_threshold.max(1)),
            };
            let candidates: Vec<CandidateRecord> = (0..cfg.candidates_per_query)
                .map(|ci| {
                    let truth = draw_truth(cfg, &mut rng);
                    CandidateRecord {
                        cand_id: format!("{query_id}-c{ci:02}"),
                        features: encode(&truth, &mixing, &noise, &mut rng),
                        sim_truth: Some(truth),
                    }
                })
                .collect();
            let pending = Session::new(query, candidates, BTreeSet::new(), BTreeSet::new())?;
            let mut page = popularity_order(&pending)?;
            page.truncate(cfg.exposure_depth);
            let clicked = clicks.click_with(&page, &pending, &mut rng)?;
            let exposed_unclicked = page.into_iter().filter(|id| !clicked.contains(id)).collect();
            rebuild(pending, clicked, exposed_unclicked)
        })
        .collect()
}

fn rebuild(
    session: Session,
    clicked: BTreeSet<String>,
    exposed_unclicked: BTreeSet<String>,
) -> Result<Session> {
    Session::new(
        session.query().clone(),
        session.candidates().to_vec(),
        clicked,
        exposed_unclicked,
    )
}

/// Samples `min(all pairs, pairs_per_query)` distinct candidate pairs per
/// query and labels each with the oracle.
pub fn sample_preference_pairs(sessions: &[Session], cfg: &SimConfig) -> Result<Vec<PreferencePair>> {
    let mut out = Vec::new();
    for session in sessions {
        let n = session.len();
        let total = n * n.saturating_sub(1) / 2;
        let take = total.min(cfg.pairs_per_query);
        let mut rng = derived_rng(cfg.seed, &["pairs", session.query_id()]);
        let mut picks = rand::seq::index::sample(&mut rng, total, take).into_vec();
        picks.sort_unstable();
        let ids: Vec<&str> = session.ids().collect();
        for flat in picks {
            let (i, j) = unflatten_pair(flat, n);
            out.push(oracle_prefer(session, ids[i], ids[j], cfg.label_noise, cfg.seed)?);
        }
    }
    Ok(out)
}

// Maps 0..n(n-1)/2 onto pairs (i, j) with i < j, row by row.
fn unflatten_pair(mut flat: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if flat < row {
            return (i, i + 1 + flat);
        }
        flat -= row;
        i += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub queries: usize,
    pub candidates: usize,
    pub pairs: usize,
    pub avg_candidates_per_query: f64,
    pub avg_pairs_per_query: f64,
    pub avg_clicks_per_query: f64,
    pub long_tail_fraction: f64,
}

pub fn corpus_stats(
    sessions: &[Session],
    pairs: &[PreferencePair],
    long_tail_threshold: u64,
) -> CorpusStats {
    let q = sessions.len().max(1) as f64;
    let candidates: usize = sessions.iter().map(Session::len).sum();
    let clicks: usize = sessions.iter().map(|s| s.clicked().len()).sum();
    let long_tail = sessions
        .iter()
        .filter(|s| s.query().is_long_tail(long_tail_threshold))
        .count();
    CorpusStats {
        queries: sessions.len(),
        candidates,
        pairs: pairs.len(),
        avg_candidates_per_query: candidates as f64 / q,
        avg_pairs_per_query: pairs.len() as f64 / q,
        avg_clicks_per_query: clicks as f64 / q,
        long_tail_fraction: long_tail as f64 / q,
    }
}
