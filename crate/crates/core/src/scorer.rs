//! Pointwise experience scorer trained from pairwise preferences.
//!
//! `s(q, v) = w . tanh(W [q; v; 1]) + b`, trained on
//! `mean[-log sigmoid(s+ - s-) + lambda (s+ + s-)^2]` by mini-batch gradient
//! descent.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn;
use crate::seed::{derive_seed, derived_rng, rng};
use crate::simulator::{sigmoid, PreferencePair};
use crate::types::{corpus_dims, CandidateRecord, QueryRecord, Session};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_reg: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub d_h: usize,
    /// Fraction of queries whose pairs are held out for evaluation.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_reg: 0.01,
            learning_rate: 0.05,
            epochs: 40,
            batch_size: 32,
            seed: 11,
            d_h: 16,
            holdout_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            bad.push("lambda_reg must be >= 0".to_owned());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bad.push("learning_rate must be > 0".to_owned());
        }
        if self.batch_size < 1 {
            bad.push("batch_size must be >= 1".to_owned());
        }
        if self.d_h < 1 {
            bad.push("d_h must be >= 1".to_owned());
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            bad.push("holdout_fraction must be in [0,1)".to_owned());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_out_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Scorer parameters; also the on-disk checkpoint layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub format_version: u32,
    pub d_q: usize,
    pub d_v: usize,
    pub d_h: usize,
    /// Row-major `d_h x (d_q + d_v + 1)`, bias in the last column.
    pub fusion_weights: Vec<f64>,
    pub w: Vec<f64>,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_meta: Option<TrainMeta>,
}

/// Gradient with the same layout as [`ScorerModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerGrad {
    pub fusion_weights: Vec<f64>,
    pub w: Vec<f64>,
    pub b: f64,
}

impl ScorerGrad {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.fusion_weights.clone();
        out.extend_from_slice(&self.w);
        out.push(self.b);
        out
    }
}

/// A preference pair with its feature vectors looked up.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedPair<'a> {
    pub query: &'a [f64],
    pub winner: &'a [f64],
    pub loser: &'a [f64],
}

pub fn resolve_pairs<'a>(
    sessions: &'a [Session],
    pairs: &[PreferencePair],
) -> Result<Vec<ResolvedPair<'a>>> {
    let by_query: HashMap<&str, &Session> = sessions.iter().map(|s| (s.query_id(), s)).collect();
    pairs
        .iter()
        .map(|p| {
            let s = by_query
                .get(p.query_id.as_str())
                .ok_or_else(|| Error::UnknownQuery(p.query_id.clone()))?;
            Ok(ResolvedPair {
                query: &s.query().features,
                winner: &s.candidate(&p.winner_id)?.features,
                loser: &s.candidate(&p.loser_id)?.features,
            })
        })
        .collect()
}

impl ScorerModel {
    pub fn new(d_q: usize, d_v: usize, d_h: usize, seed: u64) -> Self {
        let mut rng = rng(derive_seed(seed, &["scorer-init"]));
        let cols = nn::row_width(d_q, d_v);
        Self {
            format_version: FORMAT_VERSION,
            d_q,
            d_v,
            d_h,
            fusion_weights: nn::init_weights(d_h, cols, &mut rng),
            w: nn::init_vector(d_h, &mut rng),
            b: 0.0,
            train_meta: None,
        }
    }

    pub fn zeros(d_q: usize, d_v: usize, d_h: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            d_q,
            d_v,
            d_h,
            fusion_weights: vec![0.0; d_h * nn::row_width(d_q, d_v)],
            w: vec![0.0; d_h],
            b: 0.0,
            train_meta: None,
        }
    }

    /// Checks internal consistency, e.g. after loading a checkpoint.
    pub fn validate(&self) -> Result<()> {
        let expected = self.d_h * nn::row_width(self.d_q, self.d_v);
        if self.fusion_weights.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "scorer fusion_weights",
                expected,
                actual: self.fusion_weights.len(),
            });
        }
        if self.w.len() != self.d_h {
            return Err(Error::DimensionMismatch {
                what: "scorer head weights",
                expected: self.d_h,
                actual: self.w.len(),
            });
        }
        if !nn::all_finite(&self.fusion_weights) || !nn::all_finite(&self.w) || !self.b.is_finite()
        {
            return Err(Error::InvalidInput("scorer has non-finite parameters".into()));
        }
        Ok(())
    }

    fn check_dims(&self, q: &[f64], v: &[f64]) -> Result<()> {
        if q.len() != self.d_q {
            return Err(Error::DimensionMismatch {
                what: "query features",
                expected: self.d_q,
                actual: q.len(),
            });
        }
        if v.len() != self.d_v {
            return Err(Error::DimensionMismatch {
                what: "candidate features",
                expected: self.d_v,
                actual: v.len(),
            });
        }
        Ok(())
    }

    /// Fused hidden representation of a query-candidate pair.
    pub fn embed(&self, q: &QueryRecord, v: &CandidateRecord) -> Result<Vec<f64>> {
        self.embed_raw(&q.features, &v.features)
    }

    pub fn embed_raw(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(q, v)?;
        let mut h = vec![0.0; self.d_h];
        nn::forward(&self.fusion_weights, q, v, &mut h);
        Ok(h)
    }

    pub fn score(&self, q: &QueryRecord, v: &CandidateRecord) -> Result<f64> {
        self.score_raw(&q.features, &v.features)
    }

    pub fn score_raw(&self, q: &[f64], v: &[f64]) -> Result<f64> {
        Ok(nn::dot(&self.w, &self.embed_raw(q, v)?) + self.b)
    }

    /// Scores of every candidate in the session, keyed by id.
    pub fn score_session(&self, session: &Session) -> Result<HashMap<String, f64>> {
        session
            .candidates()
            .iter()
            .map(|c| Ok((c.cand_id.clone(), self.score(session.query(), c)?)))
            .collect()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = self.fusion_weights.clone();
        out.extend_from_slice(&self.w);
        out.push(self.b);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let nf = self.fusion_weights.len();
        let nw = self.w.len();
        assert_eq!(params.len(), nf + nw + 1, "parameter vector length");
        self.fusion_weights.copy_from_slice(&params[..nf]);
        self.w.copy_from_slice(&params[nf..nf + nw]);
        self.b = params[nf + nw];
    }

    fn step(&mut self, grad: &ScorerGrad, lr: f64) {
        self.fusion_weights
            .iter_mut()
            .zip(&grad.fusion_weights)
            .for_each(|(p, g)| *p -= lr * g);
        self.w.iter_mut().zip(&grad.w).for_each(|(p, g)| *p -= lr * g);
        self.b -= lr * grad.b;
    }
}

fn require_pairs(pairs: &[ResolvedPair<'_>]) -> Result<()> {
    if pairs.is_empty() {
        Err(Error::InvalidInput("empty preference batch".into()))
    } else {
        Ok(())
    }
}

/// Mean pairwise logistic loss with the score-centering penalty.
pub fn pairwise_loss(model: &ScorerModel, pairs: &[ResolvedPair<'_>], lambda: f64) -> Result<f64> {
    require_pairs(pairs)?;
    let mut total = 0.0;
    for p in pairs {
        let sp = model.score_raw(p.query, p.winner)?;
        let sn = model.score_raw(p.query, p.loser)?;
        total += nn::neg_log_sigmoid(sp - sn) + lambda * (sp + sn).powi(2);
    }
    Ok(total / pairs.len() as f64)
}

/// Partial derivatives of one pair's loss w.r.t. `(s+, s-)`.
pub fn score_partials(sp: f64, sn: f64, lambda: f64) -> (f64, f64) {
    let miss = 1.0 - sigmoid(sp - sn);
    let center = 2.0 * lambda * (sp + sn);
    (-miss + center, miss + center)
}

/// Analytic gradient of [`pairwise_loss`].
pub fn pairwise_grad(
    model: &ScorerModel,
    pairs: &[ResolvedPair<'_>],
    lambda: f64,
) -> Result<ScorerGrad> {
    require_pairs(pairs)?;
    let mut grad = ScorerGrad {
        fusion_weights: vec![0.0; model.fusion_weights.len()],
        w: vec![0.0; model.d_h],
        b: 0.0,
    };
    let scale = 1.0 / pairs.len() as f64;
    let mut dh = vec![0.0; model.d_h];
    for p in pairs {
        let hp = model.embed_raw(p.query, p.winner)?;
        let hn = model.embed_raw(p.query, p.loser)?;
        let sp = nn::dot(&model.w, &hp) + model.b;
        let sn = nn::dot(&model.w, &hn) + model.b;
        let (dsp, dsn) = score_partials(sp, sn, lambda);
        for (h, ds, v) in [(&hp, dsp * scale, p.winner), (&hn, dsn * scale, p.loser)] {
            grad.b += ds;
            grad.w.iter_mut().zip(h).for_each(|(g, hi)| *g += ds * hi);
            dh.iter_mut().zip(&model.w).for_each(|(d, wi)| *d = ds * wi);
            nn::backward(&mut grad.fusion_weights, p.query, v, h, &dh);
        }
    }
    Ok(grad)
}

/// Fraction of pairs whose winner outscores the loser; ties count half.
pub fn pair_accuracy(model: &ScorerModel, pairs: &[ResolvedPair<'_>]) -> Result<f64> {
    require_pairs(pairs)?;
    let mut hits = 0.0;
    for p in pairs {
        let sp = model.score_raw(p.query, p.winner)?;
        let sn = model.score_raw(p.query, p.loser)?;
        hits += if sp > sn {
            1.0
        } else if sp == sn {
            0.5
        } else {
            0.0
        };
    }
    Ok(hits / pairs.len() as f64)
}

/// True for queries whose pairs are held out.
pub fn is_held_out(query_id: &str, fraction: f64, seed: u64) -> bool {
    let u = derive_seed(seed, &["holdout", query_id]) as f64 / u64::MAX as f64;
    u < fraction
}

/// Splits pairs into (train, held-out) by query.
pub fn split_pairs_by_query(
    pairs: &[PreferencePair],
    fraction: f64,
    seed: u64,
) -> (Vec<PreferencePair>, Vec<PreferencePair>) {
    pairs
        .iter()
        .cloned()
        .partition(|p| !is_held_out(&p.query_id, fraction, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub final_loss: f64,
    /// `None` when nothing was held out.
    pub held_out_accuracy: Option<f64>,
    pub epoch_losses: Vec<f64>,
    pub n_train: usize,
    pub n_held_out: usize,
}

pub fn train_scorer(
    pairs: &[PreferencePair],
    sessions: &[Session],
    cfg: &TrainConfig,
) -> Result<(ScorerModel, TrainReport)> {
    cfg.validate()?;
    let (train, held) = split_pairs_by_query(pairs, cfg.holdout_fraction, cfg.seed);
    if train.is_empty() {
        return Err(Error::InvalidInput("no training pairs".into()));
    }
    let (d_q, d_v) = corpus_dims(sessions)?;
    let train = resolve_pairs(sessions, &train)?;
    let held = resolve_pairs(sessions, &held)?;

    let mut model = ScorerModel::new(d_q, d_v, cfg.d_h, cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle = derived_rng(cfg.seed, &["scorer-shuffle"]);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i]));
            let grad = pairwise_grad(&model, &batch, cfg.lambda_reg)?;
            model.step(&grad, cfg.learning_rate);
        }
        let loss = pairwise_loss(&model, &train, cfg.lambda_reg)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                stage: "scorer training",
                unit: "epoch",
                index: epoch,
            });
        }
        epoch_losses.push(loss);
    }
    let final_loss = match epoch_losses.last() {
        Some(&l) => l,
        None => pairwise_loss(&model, &train, cfg.lambda_reg)?,
    };
    let held_out_accuracy = if held.is_empty() {
        None
    } else {
        Some(pair_accuracy(&model, &held)?)
    };
    model.train_meta = Some(TrainMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        final_loss,
        held_out_accuracy,
        config_hash: None,
    });
    let report = TrainReport {
        final_loss,
        held_out_accuracy,
        epoch_losses,
        n_train: train.len(),
        n_held_out: held.len(),
    };
    Ok((model, report))
}
