//! Stage II page-level alignment.
//!
//! The experience scores induce an ideal order `y_s`; item relevance is
//! `max(K - rank + 1, 0)` in that order, and a generated page is rewarded
//! with `alpha * R_old + beta * nDCG@K(page, y_s)`. The policy is trained with
//! group-relative advantages over `G` sampled pages per query.

use std::collections::HashMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn;
use crate::ordering::stable_sort_desc;
use crate::plackett_luce;
use crate::policy::{ListPolicy, PolicyMeta};
use crate::scorer::ScorerModel;
use crate::seed::derived_rng;
use crate::simulator::ClickModel;
use crate::types::{RankedList, Session};

/// `y_s`: candidates by descending experience score.
pub fn ideal_order<S, F>(ids: &[S], score_of: F) -> Result<Vec<String>>
where
    S: AsRef<str>,
    F: Fn(&str) -> Option<f64>,
{
    stable_sort_desc(ids, score_of)
}

/// Graded relevance `max(K - rank + 1, 0)` with 1-based ranks in `y_s`.
pub fn graded_rel(y_s: &[String], k: usize) -> HashMap<String, f64> {
    y_s.iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), k.saturating_sub(i) as f64))
        .collect()
}

fn discount(position: usize) -> f64 {
    1.0 / ((position + 2) as f64).log2()
}

/// `sum_{t <= min(K, len)} rel(y_t) / log2(1 + t)`.
pub fn dcg_at_k(list: &[String], rel: &HashMap<String, f64>, k: usize) -> Result<f64> {
    if list.is_empty() {
        return Err(Error::InvalidInput("DCG of an empty list".into()));
    }
    list.iter().take(k).enumerate().try_fold(0.0, |acc, (t, id)| {
        let r = rel.get(id).ok_or_else(|| Error::MissingScore(id.clone()))?;
        Ok(acc + r * discount(t))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ndcg {
    pub value: f64,
    /// Ideal DCG was zero; `value` is defined as 1.
    pub vacuous: bool,
}

/// DCG of `list` normalized by the DCG of the top-K of `y_s`.
pub fn ndcg_at_k(list: &[String], y_s: &[String], k: usize) -> Result<Ndcg> {
    let rel = graded_rel(y_s, k);
    let ideal = dcg_at_k(y_s, &rel, k)?;
    let dcg = dcg_at_k(list, &rel, k)?;
    Ok(ndcg_from(dcg, ideal))
}

fn ndcg_from(dcg: f64, ideal: f64) -> Ndcg {
    if ideal == 0.0 {
        Ndcg {
            value: 1.0,
            vacuous: true,
        }
    } else {
        Ndcg {
            value: dcg / ideal,
            vacuous: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            k: 10,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            bad.push("alpha and beta must be >= 0".to_owned());
        }
        if !(self.alpha + self.beta > 0.0) {
            bad.push("alpha + beta must be > 0".to_owned());
        }
        if self.k < 1 {
            bad.push("k must be >= 1".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    pub behavioral: f64,
    pub ndcg: f64,
}

/// Per-session reward state that depends only on the scorer.
#[derive(Debug, Clone)]
pub struct RewardContext<'a> {
    pub session: &'a Session,
    pub ideal: Vec<String>,
    rel: HashMap<String, f64>,
    ideal_dcg: f64,
}

impl<'a> RewardContext<'a> {
    pub fn new(session: &'a Session, scorer: &ScorerModel, k: usize) -> Result<Self> {
        let scores = scorer.score_session(session)?;
        let ids: Vec<&str> = session.ids().collect();
        let ideal = ideal_order(&ids, |id| scores.get(id).copied())?;
        let rel = graded_rel(&ideal, k);
        let ideal_dcg = dcg_at_k(&ideal, &rel, k)?;
        Ok(Self {
            session,
            ideal,
            rel,
            ideal_dcg,
        })
    }

    pub fn ndcg(&self, list: &[String], k: usize) -> Result<Ndcg> {
        Ok(ndcg_from(dcg_at_k(list, &self.rel, k)?, self.ideal_dcg))
    }

    pub fn reward(&self, list: &RankedList, clicks: &ClickModel, cfg: &RewardConfig) -> Result<RewardBreakdown> {
        let behavioral = clicks.behavioral_reward(list, self.session)?;
        let ndcg = self.ndcg(&list.items, cfg.k)?.value;
        Ok(RewardBreakdown {
            total: cfg.alpha * behavioral + cfg.beta * ndcg,
            behavioral,
            ndcg,
        })
    }
}

/// `alpha * R_old(list) + beta * nDCG@K(list, ideal order of the scorer)`.
pub fn reward(
    list: &RankedList,
    session: &Session,
    scorer: &ScorerModel,
    clicks: &ClickModel,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown> {
    RewardContext::new(session, scorer, cfg.k)?.reward(list, clicks, cfg)
}

/// Rewards standardized within the group using the population std. A group
/// with zero spread gets all-zero advantages.
pub fn group_advantages(rewards: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "group advantages need at least 2 rewards, got {}",
            rewards.len()
        )));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / (std + epsilon)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub advantage_epsilon: f64,
    /// Sessions per step; 0 means every session.
    pub sessions_per_step: usize,
    /// Gradient steps per sampled batch. With 1 the importance ratio is
    /// exactly 1 and clipping never binds.
    pub updates_per_batch: usize,
    pub clip_epsilon: Option<f64>,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            learning_rate: 0.002,
            steps: 200,
            seed: 17,
            advantage_epsilon: 1e-8,
            sessions_per_step: 64,
            updates_per_batch: 1,
            clip_epsilon: None,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.group_size < 2 {
            bad.push("group_size must be >= 2".to_owned());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            bad.push("learning_rate must be >= 0".to_owned());
        }
        if !(self.advantage_epsilon > 0.0) {
            bad.push("advantage_epsilon must be > 0".to_owned());
        }
        if self.updates_per_batch < 1 {
            bad.push("updates_per_batch must be >= 1".to_owned());
        }
        if let Some(eps) = self.clip_epsilon {
            if !(eps > 0.0) {
                bad.push("clip_epsilon must be > 0".to_owned());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_ndcg: f64,
    pub mean_behavioral: f64,
}

struct Rollout {
    indices: Vec<usize>,
    logprob: f64,
    advantage: f64,
}

/// Clipped-surrogate weight on `grad log pi` for one rollout.
fn surrogate_weight(advantage: f64, ratio: f64, clip: Option<f64>) -> f64 {
    if let Some(eps) = clip {
        let clipped = (advantage > 0.0 && ratio > 1.0 + eps) || (advantage < 0.0 && ratio < 1.0 - eps);
        if clipped {
            return 0.0;
        }
    }
    advantage * ratio
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn ascend(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            *p += lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Group-relative policy optimization over sampled pages, with Adam
/// ascending the surrogate.
pub fn train_grpo(
    mut policy: ListPolicy,
    sessions: &[Session],
    scorer: &ScorerModel,
    clicks: &ClickModel,
    reward_cfg: &RewardConfig,
    cfg: &GrpoConfig,
) -> Result<(ListPolicy, Vec<TraceRow>)> {
    reward_cfg.validate()?;
    cfg.validate()?;
    policy.validate()?;
    if sessions.is_empty() {
        return Err(Error::InvalidInput("no sessions to train on".into()));
    }
    let contexts = sessions
        .iter()
        .map(|s| RewardContext::new(s, scorer, reward_cfg.k))
        .collect::<Result<Vec<_>>>()?;
    let per_step = match cfg.sessions_per_step {
        0 => sessions.len(),
        n => n.min(sessions.len()),
    };
    let mut adam = Adam::new(policy.params().len());
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let step_label = step.to_string();
        let mut batch_rng = derived_rng(cfg.seed, &["grpo-batch", &step_label]);
        let mut batch = index::sample(&mut batch_rng, sessions.len(), per_step).into_vec();
        batch.sort_unstable();

        let (mut sum_r, mut sum_n, mut sum_b, mut count) = (0.0, 0.0, 0.0, 0usize);
        let mut groups = Vec::with_capacity(batch.len());
        for &si in &batch {
            let ctx = &contexts[si];
            let session = ctx.session;
            let k = reward_cfg.k.min(session.len());
            let pass = policy.forward(session)?;
            let mut rng = derived_rng(cfg.seed, &["grpo-rollout", &step_label, session.query_id()]);
            let mut rollouts = Vec::with_capacity(cfg.group_size);
            let mut rewards = Vec::with_capacity(cfg.group_size);
            for _ in 0..cfg.group_size {
                let indices = plackett_luce::sample(&pass.utilities, policy.tau, k, &mut rng);
                let list = RankedList::new(session.query_id(), pass.ids(&indices));
                let r = ctx.reward(&list, clicks, reward_cfg)?;
                sum_r += r.total;
                sum_n += r.ndcg;
                sum_b += r.behavioral;
                count += 1;
                rewards.push(r.total);
                let logprob = plackett_luce::log_prob(&pass.utilities, policy.tau, &indices);
                rollouts.push(Rollout {
                    indices,
                    logprob,
                    advantage: 0.0,
                });
            }
            let adv = group_advantages(&rewards, cfg.advantage_epsilon)?;
            rollouts.iter_mut().zip(adv).for_each(|(r, a)| r.advantage = a);
            groups.push((si, rollouts));
        }
        let n = count as f64;
        trace.push(TraceRow {
            step,
            mean_reward: sum_r / n,
            mean_ndcg: sum_n / n,
            mean_behavioral: sum_b / n,
        });

        for _ in 0..cfg.updates_per_batch {
            let mut grad = policy.new_grad();
            for (si, rollouts) in &groups {
                if rollouts.iter().all(|r| r.advantage == 0.0) {
                    continue;
                }
                let pass = policy.forward(&sessions[*si])?;
                let mut du = vec![0.0; pass.utilities.len()];
                for r in rollouts {
                    let (lp, g) = plackett_luce::log_prob_grad(&pass.utilities, policy.tau, &r.indices);
                    let weight = surrogate_weight(r.advantage, (lp - r.logprob).exp(), cfg.clip_epsilon);
                    if weight != 0.0 {
                        du.iter_mut().zip(&g).for_each(|(d, gi)| *d += weight * gi / n);
                    }
                }
                policy.backward(&pass, &du, &mut grad);
            }
            let mut params = policy.params();
            adam.ascend(&mut params, &grad.flat(), cfg.learning_rate);
            policy.set_params(&params);
        }
        if !nn::all_finite(&policy.params()) {
            return Err(Error::Diverged {
                stage: "GRPO",
                unit: "step",
                index: step,
            });
        }
    }
    let final_reward = trace.last().map_or(0.0, |t| t.mean_reward);
    policy.train_meta = Some(PolicyMeta {
        stage: "stage2".into(),
        seed: cfg.seed,
        epochs: cfg.steps,
        final_loss: -final_reward,
        config_hash: None,
    });
    Ok((policy, trace))
}

#[cfg(test)]
mod tests {
    use rand::Rng as _;

    use super::*;
    use crate::seed::rng;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn perms(items: &[String]) -> Vec<Vec<String>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(i);
            for mut tail in perms(&rest) {
                tail.insert(0, head.clone());
                out.push(tail);
            }
        }
        out
    }

    #[test]
    fn ideal_order_examples() {
        let s: HashMap<&str, f64> = [("a", 0.9), ("b", 0.1)].into();
        assert_eq!(ideal_order(&["b", "a"], |id| s.get(id).copied()).unwrap(), ids(&["a", "b"]));
        let eq: HashMap<&str, f64> = [("a", 0.2), ("b", 0.2), ("c", 0.2)].into();
        assert_eq!(
            ideal_order(&["c", "a", "b"], |id| eq.get(id).copied()).unwrap(),
            ids(&["a", "b", "c"])
        );
    }

    #[test]
    fn ideal_order_maximizes_discounted_score() {
        let mut r = rng(4);
        let names = ids(&["a", "b", "c", "d", "e", "f"]);
        for _ in 0..5 {
            let s: HashMap<String, f64> = names.iter().map(|n| (n.clone(), r.random::<f64>())).collect();
            let value = |p: &[String]| -> f64 { p.iter().enumerate().map(|(t, id)| s[id] * discount(t)).sum() };
            let best = perms(&names)
                .into_iter()
                .max_by(|a, b| value(a).total_cmp(&value(b)))
                .unwrap();
            assert_eq!(ideal_order(&names, |id| s.get(id).copied()).unwrap(), best);
        }
    }

    #[test]
    fn graded_rel_examples() {
        let y: Vec<String> = (1..=12).map(|i| format!("i{i:02}")).collect();
        assert_eq!(graded_rel(&y, 10)["i01"], 10.0);
        assert_eq!(graded_rel(&y, 5)["i05"], 1.0);
        assert_eq!(graded_rel(&y, 3)["i04"], 0.0);
        assert_eq!(graded_rel(&y, 3)["i12"], 0.0);
    }

    #[test]
    fn dcg_examples() {
        let rel: HashMap<String, f64> = [("a".to_string(), 5.0)].into();
        assert_eq!(dcg_at_k(&ids(&["a"]), &rel, 3).unwrap(), 5.0);
        let zero: HashMap<String, f64> = [("a".to_string(), 0.0), ("b".to_string(), 0.0)].into();
        assert_eq!(dcg_at_k(&ids(&["a", "b"]), &zero, 2).unwrap(), 0.0);
        let rel: HashMap<String, f64> = [("a", 3.0), ("b", 2.0), ("c", 1.0)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let by_hand = 2.0 + 3.0 / 3f64.log2() + 0.5;
        let dcg = dcg_at_k(&ids(&["b", "a", "c"]), &rel, 3).unwrap();
        assert!((dcg - by_hand).abs() < 1e-9);
        assert!((dcg - 4.392_789).abs() < 1e-6);
        assert!(matches!(dcg_at_k(&ids(&["z"]), &rel, 3), Err(Error::MissingScore(_))));
    }

    #[test]
    fn ndcg_examples() {
        let y = ids(&["a", "b", "c"]);
        assert_eq!(ndcg_at_k(&y, &y, 3).unwrap().value, 1.0);
        let got = ndcg_at_k(&ids(&["b", "a", "c"]), &y, 3).unwrap();
        let by_hand = (2.0 + 3.0 / 3f64.log2() + 0.5) / (3.0 + 2.0 / 3f64.log2() + 0.5);
        assert!((got.value - by_hand).abs() < 1e-9);
        assert!((got.value - 0.922_494_5).abs() < 1e-6);
        assert!(!got.vacuous);
    }

    #[test]
    fn ndcg_swap_within_top_k_is_below_one() {
        let y = ids(&["a", "b", "c", "d", "e"]);
        for k in 2..=5 {
            for i in 0..k {
                for j in i + 1..k {
                    let mut l = y.clone();
                    l.swap(i, j);
                    assert!(ndcg_at_k(&l[..k], &y, k).unwrap().value < 1.0);
                }
            }
        }
    }

    #[test]
    fn advantages_examples() {
        assert_eq!(group_advantages(&[0.3, 0.3, 0.3], 1e-8).unwrap(), vec![0.0; 3]);
        let two = group_advantages(&[0.0, 1.0], 1e-12).unwrap();
        assert!((two[0] + 1.0).abs() < 1e-9 && (two[1] - 1.0).abs() < 1e-9);
        let three = group_advantages(&[1.0, 2.0, 3.0], f64::MIN_POSITIVE).unwrap();
        let expected = 1.5f64.sqrt();
        assert!((three[0] + expected).abs() < 1e-6);
        assert_eq!(three[1], 0.0);
        assert!((three[2] - 1.224_745).abs() < 1e-6);
        assert!(group_advantages(&[1.0], 1e-8).is_err());
    }

    #[test]
    fn advantages_are_standardized() {
        let mut r = rng(12);
        for _ in 0..50 {
            let rewards: Vec<f64> = (0..8).map(|_| r.random::<f64>()).collect();
            let a = group_advantages(&rewards, 1e-15).unwrap();
            let mean = a.iter().sum::<f64>() / 8.0;
            let var = a.iter().map(|x| x * x).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn surrogate_clipping() {
        assert_eq!(surrogate_weight(1.0, 1.0, Some(0.2)), 1.0);
        assert_eq!(surrogate_weight(1.0, 1.3, Some(0.2)), 0.0);
        assert_eq!(surrogate_weight(-1.0, 0.7, Some(0.2)), 0.0);
        assert_eq!(surrogate_weight(-1.0, 1.3, Some(0.2)), -1.3);
        assert_eq!(surrogate_weight(1.0, 1.3, None), 1.3);
    }

    fn tiny_corpus(n: usize, queries: usize, scorer_seed: u64) -> (Vec<Session>, ScorerModel, ClickModel) {
        let sim = crate::simulator::SimConfig {
            n_queries: queries,
            candidates_per_query: n,
            exposure_depth: n.min(3),
            ..Default::default()
        };
        let sessions = crate::simulator::generate_corpus(&sim).unwrap();
        let (d_q, d_v) = crate::types::corpus_dims(&sessions).unwrap();
        (sessions, ScorerModel::new(d_q, d_v, 8, scorer_seed), sim.click_model())
    }

    fn fresh_policy(sessions: &[Session]) -> ListPolicy {
        crate::policy::PretrainConfig::default().init_policy(sessions).unwrap()
    }

    // A random 4-permutation already scores about 0.88 in expectation, so a
    // 0.1 gain needs a starting policy that is worse than random; the scorer
    // seed is fixed to one where it is.
    #[test]
    fn single_session_ndcg_improves() {
        let (sessions, scorer, clicks) = tiny_corpus(4, 1, 17);
        let rc = RewardConfig { alpha: 0.0, beta: 1.0, k: 4 };
        let cfg = GrpoConfig::default();
        let (p, trace) = train_grpo(fresh_policy(&sessions), &sessions, &scorer, &clicks, &rc, &cfg).unwrap();
        let w = cfg.steps / 10;
        let first: f64 = trace[..w].iter().map(|t| t.mean_ndcg).sum::<f64>() / w as f64;
        let last: f64 = trace[cfg.steps - w..].iter().map(|t| t.mean_ndcg).sum::<f64>() / w as f64;
        assert!(last - first >= 0.1, "{first} -> {last}");
        let ideal = RewardContext::new(&sessions[0], &scorer, 4).unwrap().ideal;
        assert_eq!(p.greedy_decode(&sessions[0], 4).unwrap().items, ideal);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (sessions, scorer, clicks) = tiny_corpus(5, 3, 5);
        let init = fresh_policy(&sessions);
        let cfg = GrpoConfig { learning_rate: 0.0, steps: 5, ..GrpoConfig::default() };
        let (p, _) = train_grpo(init.clone(), &sessions, &scorer, &clicks, &RewardConfig::default(), &cfg).unwrap();
        assert_eq!(p.params(), init.params());
    }

    #[test]
    fn equal_rewards_give_no_update() {
        let (sessions, scorer, _) = tiny_corpus(5, 3, 5);
        let flat = ClickModel { clickbait_gain: 0.0, quality_gain: 0.0, ..ClickModel::default() };
        let rc = RewardConfig { alpha: 1.0, beta: 0.0, k: 5 };
        let init = fresh_policy(&sessions);
        let cfg = GrpoConfig { steps: 5, ..GrpoConfig::default() };
        let (p, trace) = train_grpo(init.clone(), &sessions, &scorer, &flat, &rc, &cfg).unwrap();
        assert_eq!(p.params(), init.params());
        assert!(trace.iter().all(|t| (t.mean_behavioral - 1.0).abs() < 1e-12));
    }

    #[test]
    fn training_is_deterministic() {
        let (sessions, scorer, clicks) = tiny_corpus(5, 4, 5);
        let cfg = GrpoConfig { steps: 10, ..GrpoConfig::default() };
        let run = || train_grpo(fresh_policy(&sessions), &sessions, &scorer, &clicks, &RewardConfig::default(), &cfg).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn reward_is_linear_in_weights() {
        let (sessions, scorer, clicks) = tiny_corpus(6, 2, 5);
        let s = &sessions[1];
        let list = RankedList::new(s.query_id(), {
            let mut v: Vec<String> = s.ids().map(String::from).collect();
            v.reverse();
            v.truncate(4);
            v
        });
        let at = |alpha, beta| reward(&list, s, &scorer, &clicks, &RewardConfig { alpha, beta, k: 4 }).unwrap();
        let behavioral = at(1.0, 0.0);
        assert_eq!(behavioral.total, clicks.behavioral_reward(&list, s).unwrap());
        let ndcg = at(0.0, 1.0).total;
        assert!((at(0.3, 0.8).total - (0.3 * behavioral.total + 0.8 * ndcg)).abs() < 1e-12);
        let ideal = RewardContext::new(s, &scorer, 4).unwrap().ideal;
        let top = RankedList::new(s.query_id(), ideal[..4].to_vec());
        assert_eq!(reward(&top, s, &scorer, &clicks, &RewardConfig { alpha: 0.0, beta: 1.0, k: 4 }).unwrap().total, 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig { alpha: 0.0, beta: 0.0, k: 3 }.validate().is_err());
        assert!(GrpoConfig { group_size: 1, ..GrpoConfig::default() }.validate().is_err());
    }
}
