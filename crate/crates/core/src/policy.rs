//! Plackett-Luce list-generation policy.
//!
//! Each candidate gets a context-free utility
//! `u = head . tanh(W [q; v; 1]) + behavior . [clicked, exposed_unclicked]`
//! and lists are generated by sequential softmax choice over the remaining
//! candidates. The behavioral indicators are the logged feedback the
//! reranker sees for the session.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn;
use crate::ordering::{logged_target, reconstruct_target, stable_sort_desc};
use crate::plackett_luce;
use crate::scorer::ScorerModel;
use crate::seed::{derive_seed, derived_rng, rng};
use crate::types::{corpus_dims, RankedList, Session};

pub const FORMAT_VERSION: u32 = 1;
pub const BEHAVIOR_FEATURES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub stage: String,
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Policy parameters; also the on-disk checkpoint layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListPolicy {
    pub format_version: u32,
    pub d_q: usize,
    pub d_v: usize,
    pub d_h: usize,
    /// Row-major `d_h x (d_q + d_v + 1)`, bias in the last column.
    pub utility_weights: Vec<f64>,
    pub utility_head: Vec<f64>,
    pub behavior_weights: Vec<f64>,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_meta: Option<PolicyMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub utility_weights: Vec<f64>,
    pub utility_head: Vec<f64>,
    pub behavior_weights: Vec<f64>,
}

impl PolicyGrad {
    fn zeros_like(p: &ListPolicy) -> Self {
        Self {
            utility_weights: vec![0.0; p.utility_weights.len()],
            utility_head: vec![0.0; p.utility_head.len()],
            behavior_weights: vec![0.0; p.behavior_weights.len()],
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.utility_weights.clone();
        out.extend_from_slice(&self.utility_head);
        out.extend_from_slice(&self.behavior_weights);
        out
    }
}

/// Per-session forward pass cached for gradient computation.
#[derive(Debug, Clone)]
pub struct SessionPass<'a> {
    pub session: &'a Session,
    hidden: Vec<Vec<f64>>,
    behavior: Vec<[f64; BEHAVIOR_FEATURES]>,
    pub utilities: Vec<f64>,
}

impl SessionPass<'_> {
    /// Candidate indices of `ids`, rejecting repeats and foreign ids.
    pub fn indices(&self, ids: &[String]) -> Result<Vec<usize>> {
        let mut seen = HashSet::with_capacity(ids.len());
        ids.iter()
            .enumerate()
            .map(|(t, id)| {
                let i = self.session.position_of(id).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "position {t}: `{id}` is not a candidate of `{}`",
                        self.session.query_id()
                    ))
                })?;
                if !seen.insert(i) {
                    return Err(Error::InvalidInput(format!(
                        "position {t}: `{id}` repeats an earlier pick"
                    )));
                }
                Ok(i)
            })
            .collect()
    }

    pub fn ids(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .map(|&i| self.session.candidates()[i].cand_id.clone())
            .collect()
    }
}

fn behavior_of(session: &Session, id: &str) -> [f64; BEHAVIOR_FEATURES] {
    [
        f64::from(u8::from(session.is_clicked(id))),
        f64::from(u8::from(session.exposed_unclicked().contains(id))),
    ]
}

impl ListPolicy {
    pub fn new(d_q: usize, d_v: usize, d_h: usize, tau: f64, seed: u64) -> Self {
        let mut rng = rng(derive_seed(seed, &["policy-init"]));
        Self {
            format_version: FORMAT_VERSION,
            d_q,
            d_v,
            d_h,
            utility_weights: nn::init_weights(d_h, nn::row_width(d_q, d_v), &mut rng),
            utility_head: nn::init_vector(d_h, &mut rng),
            behavior_weights: vec![0.0; BEHAVIOR_FEATURES],
            tau,
            train_meta: None,
        }
    }

    pub fn zeros(d_q: usize, d_v: usize, d_h: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            d_q,
            d_v,
            d_h,
            utility_weights: vec![0.0; d_h * nn::row_width(d_q, d_v)],
            utility_head: vec![0.0; d_h],
            behavior_weights: vec![0.0; BEHAVIOR_FEATURES],
            tau: 1.0,
            train_meta: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.d_h * nn::row_width(self.d_q, self.d_v);
        for (what, expected, actual) in [
            ("policy utility_weights", expected, self.utility_weights.len()),
            ("policy utility_head", self.d_h, self.utility_head.len()),
            ("policy behavior_weights", BEHAVIOR_FEATURES, self.behavior_weights.len()),
        ] {
            if expected != actual {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    actual,
                });
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidInput(format!("tau must be > 0, got {}", self.tau)));
        }
        if !nn::all_finite(&self.params()) {
            return Err(Error::InvalidInput("policy has non-finite parameters".into()));
        }
        Ok(())
    }

    fn check_session(&self, session: &Session) -> Result<()> {
        if session.query().features.len() != self.d_q {
            return Err(Error::DimensionMismatch {
                what: "query features",
                expected: self.d_q,
                actual: session.query().features.len(),
            });
        }
        if let Some(c) = session.candidates().iter().find(|c| c.features.len() != self.d_v) {
            return Err(Error::DimensionMismatch {
                what: "candidate features",
                expected: self.d_v,
                actual: c.features.len(),
            });
        }
        Ok(())
    }

    pub fn forward<'a>(&self, session: &'a Session) -> Result<SessionPass<'a>> {
        self.check_session(session)?;
        let q = &session.query().features;
        let mut hidden = Vec::with_capacity(session.len());
        let mut behavior = Vec::with_capacity(session.len());
        let mut utilities = Vec::with_capacity(session.len());
        for c in session.candidates() {
            let mut h = vec![0.0; self.d_h];
            nn::forward(&self.utility_weights, q, &c.features, &mut h);
            let b = behavior_of(session, &c.cand_id);
            utilities.push(nn::dot(&self.utility_head, &h) + nn::dot(&self.behavior_weights, &b));
            hidden.push(h);
            behavior.push(b);
        }
        Ok(SessionPass {
            session,
            hidden,
            behavior,
            utilities,
        })
    }

    /// Utilities of the session's candidates, in pool order.
    pub fn utilities(&self, session: &Session) -> Result<Vec<f64>> {
        Ok(self.forward(session)?.utilities)
    }

    /// Accumulates `sum_j d_utilities[j] * d u_j / d theta` into `grad`.
    pub fn backward(&self, pass: &SessionPass<'_>, d_utilities: &[f64], grad: &mut PolicyGrad) {
        let q = &pass.session.query().features;
        let mut dh = vec![0.0; self.d_h];
        for (j, &du) in d_utilities.iter().enumerate() {
            if du == 0.0 {
                continue;
            }
            let h = &pass.hidden[j];
            grad.utility_head.iter_mut().zip(h).for_each(|(g, x)| *g += du * x);
            grad.behavior_weights
                .iter_mut()
                .zip(&pass.behavior[j])
                .for_each(|(g, x)| *g += du * x);
            dh.iter_mut().zip(&self.utility_head).for_each(|(d, w)| *d = du * w);
            let v = &pass.session.candidates()[j].features;
            nn::backward(&mut grad.utility_weights, q, v, h, &dh);
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = self.utility_weights.clone();
        out.extend_from_slice(&self.utility_head);
        out.extend_from_slice(&self.behavior_weights);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let nw = self.utility_weights.len();
        let nh = self.utility_head.len();
        assert_eq!(params.len(), nw + nh + BEHAVIOR_FEATURES, "parameter vector length");
        self.utility_weights.copy_from_slice(&params[..nw]);
        self.utility_head.copy_from_slice(&params[nw..nw + nh]);
        self.behavior_weights.copy_from_slice(&params[nw + nh..]);
    }

    /// `theta += scale * grad`.
    pub fn apply(&mut self, grad: &PolicyGrad, scale: f64) {
        for (p, g) in [
            (&mut self.utility_weights, &grad.utility_weights),
            (&mut self.utility_head, &grad.utility_head),
            (&mut self.behavior_weights, &grad.behavior_weights),
        ] {
            p.iter_mut().zip(g).for_each(|(p, g)| *p += scale * g);
        }
    }

    pub fn new_grad(&self) -> PolicyGrad {
        PolicyGrad::zeros_like(self)
    }

    /// Plackett-Luce log-probability of generating `sequence` for `session`.
    pub fn list_logprob(&self, session: &Session, sequence: &[String]) -> Result<f64> {
        let pass = self.forward(session)?;
        let idx = pass.indices(sequence)?;
        Ok(plackett_luce::log_prob(&pass.utilities, self.tau, &idx))
    }

    /// Samples a length-`k` list without replacement.
    pub fn sample_list(&self, session: &Session, k: usize, seed: u64) -> Result<(RankedList, f64)> {
        check_k(session, k)?;
        let pass = self.forward(session)?;
        let mut rng = derived_rng(seed, &["sample", session.query_id()]);
        let idx = plackett_luce::sample(&pass.utilities, self.tau, k, &mut rng);
        let logprob = plackett_luce::log_prob(&pass.utilities, self.tau, &idx);
        Ok((RankedList::new(session.query_id(), pass.ids(&idx)), logprob))
    }

    /// Picks the highest-utility remaining item at every step (ties to the
    /// smaller id).
    pub fn greedy_decode(&self, session: &Session, k: usize) -> Result<RankedList> {
        check_k(session, k)?;
        let utilities = self.utilities(session)?;
        let mut list = greedy_from_utilities(session, &utilities, k)?;
        let scores = list
            .items
            .iter()
            .map(|id| utilities[session.position_of(id).expect("own id")])
            .collect();
        list.scores = Some(scores);
        Ok(list)
    }
}

fn check_k(session: &Session, k: usize) -> Result<()> {
    if k > session.len() {
        return Err(Error::InvalidInput(format!(
            "K = {k} exceeds the {} candidates of `{}`",
            session.len(),
            session.query_id()
        )));
    }
    Ok(())
}

pub fn greedy_from_utilities(session: &Session, utilities: &[f64], k: usize) -> Result<RankedList> {
    let ids: Vec<&str> = session.ids().collect();
    let mut order = stable_sort_desc(&ids, |id| session.position_of(id).map(|i| utilities[i]))?;
    order.truncate(k);
    Ok(RankedList::new(session.query_id(), order))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub d_h: usize,
    pub tau: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 1000,
            batch_size: 4,
            seed: 13,
            d_h: 32,
            tau: 1.0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bad.push("learning_rate must be > 0".to_owned());
        }
        if self.epochs < 1 {
            bad.push("epochs must be >= 1".to_owned());
        }
        if self.batch_size < 1 {
            bad.push("batch_size must be >= 1".to_owned());
        }
        if self.d_h < 1 {
            bad.push("d_h must be >= 1".to_owned());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            bad.push("tau must be > 0".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }

    /// Freshly initialized policy for a corpus.
    pub fn init_policy(&self, sessions: &[Session]) -> Result<ListPolicy> {
        self.validate()?;
        let (d_q, d_v) = corpus_dims(sessions)?;
        Ok(ListPolicy::new(d_q, d_v, self.d_h, self.tau, self.seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PretrainReport {
    /// Mean per-session negative log-likelihood after each epoch.
    pub epoch_nll: Vec<f64>,
    pub final_nll: f64,
}

/// Mean negative log-likelihood of full-length target sequences.
pub fn sequence_nll(policy: &ListPolicy, sessions: &[Session], targets: &[Vec<String>]) -> Result<f64> {
    let mut total = 0.0;
    for (s, t) in sessions.iter().zip(targets) {
        total -= policy.list_logprob(s, t)?;
    }
    Ok(total / sessions.len().max(1) as f64)
}

/// Gradient of [`sequence_nll`] restricted to `batch`.
pub fn sequence_nll_grad(
    policy: &ListPolicy,
    sessions: &[Session],
    targets: &[Vec<String>],
    batch: &[usize],
) -> Result<PolicyGrad> {
    let mut grad = policy.new_grad();
    let scale = 1.0 / batch.len().max(1) as f64;
    for &i in batch {
        let pass = policy.forward(&sessions[i])?;
        let idx = pass.indices(&targets[i])?;
        let (_, mut du) = plackett_luce::log_prob_grad(&pass.utilities, policy.tau, &idx);
        du.iter_mut().for_each(|d| *d *= -scale);
        policy.backward(&pass, &du, &mut grad);
    }
    Ok(grad)
}

/// Next-item NLL training on given supervision sequences.
pub fn fit_sequences(
    mut policy: ListPolicy,
    sessions: &[Session],
    targets: &[Vec<String>],
    cfg: &PretrainConfig,
    stage: &str,
) -> Result<(ListPolicy, PretrainReport)> {
    cfg.validate()?;
    if sessions.is_empty() {
        return Err(Error::InvalidInput("no sessions to train on".into()));
    }
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    let mut shuffle = derived_rng(cfg.seed, &["pretrain-shuffle", stage]);
    let mut epoch_nll = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(cfg.batch_size) {
            let grad = sequence_nll_grad(&policy, sessions, targets, batch)?;
            policy.apply(&grad, -cfg.learning_rate);
        }
        let nll = sequence_nll(&policy, sessions, targets)?;
        if !nll.is_finite() || !nn::all_finite(&policy.params()) {
            return Err(Error::Diverged {
                stage: "policy pretraining",
                unit: "epoch",
                index: epoch,
            });
        }
        epoch_nll.push(nll);
    }
    let final_nll = *epoch_nll.last().expect("epochs >= 1");
    policy.train_meta = Some(PolicyMeta {
        stage: stage.to_owned(),
        seed: cfg.seed,
        epochs: cfg.epochs,
        final_loss: final_nll,
        config_hash: None,
    });
    Ok((policy, PretrainReport { epoch_nll, final_nll }))
}

/// Experience-augmented targets: clicked items first, everything sorted by
/// the scorer.
pub fn experience_targets(sessions: &[Session], scorer: &ScorerModel) -> Result<Vec<Vec<String>>> {
    sessions
        .iter()
        .map(|s| {
            let scores = scorer.score_session(s)?;
            reconstruct_target(s, |id| scores.get(id).copied())
        })
        .collect()
}

/// Behavioral targets used by the base policy: clicked, exposed-unclicked,
/// unexposed, each sorted by the given behavioral score.
pub fn behavioral_targets<F>(sessions: &[Session], score_of: F) -> Result<Vec<Vec<String>>>
where
    F: Fn(&Session) -> Result<std::collections::HashMap<String, f64>>,
{
    sessions
        .iter()
        .map(|s| {
            let scores = score_of(s)?;
            logged_target(s, |id| scores.get(id).copied())
        })
        .collect()
}

/// Stage I: fit the policy to experience-augmented targets.
pub fn pretrain(
    policy: ListPolicy,
    sessions: &[Session],
    scorer: &ScorerModel,
    cfg: &PretrainConfig,
) -> Result<(ListPolicy, PretrainReport)> {
    let (d_q, d_v) = corpus_dims(sessions)?;
    if scorer.d_q != d_q || scorer.d_v != d_v {
        return Err(Error::DimensionMismatch {
            what: "scorer input",
            expected: d_q + d_v,
            actual: scorer.d_q + scorer.d_v,
        });
    }
    let targets = experience_targets(sessions, scorer)?;
    fit_sequences(policy, sessions, &targets, cfg, "stage1")
}

/// One line of a decoded-lists JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedList {
    pub query_id: String,
    pub items: Vec<String>,
    /// Policy log-probability of `items`; absent for score-sorted baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprob: Option<f64>,
}
