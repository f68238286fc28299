//! End-to-end experiment over a run directory.
//!
//! Every stage reads its inputs from and writes its outputs to one
//! directory, so stages can run separately (as CLI subcommands) or all at
//! once with [`run`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::grpo::{reward, train_grpo, TraceRow};
use crate::io;
use crate::metrics::{extract_labels, gsb_compare, ndcg_labels, GsbCounts, LabelKind};
use crate::ordering::stable_sort_desc;
use crate::policy::{behavioral_targets, fit_sequences, pretrain, DecodedList, ListPolicy, PretrainReport};
use crate::scorer::{is_held_out, train_scorer, ScorerModel, TrainReport};
use crate::simulator::{corpus_stats, generate_corpus, popularity_order, sample_preference_pairs, CorpusStats, PreferencePair};
use crate::types::{RankedList, Session};

pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const SIMCONFIG_FILE: &str = "simconfig.json";
pub const CONFIG_FILE: &str = "config.json";
pub const REPORT_FILE: &str = "report.csv";
pub const GSB_FILE: &str = "gsb.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCORES_FILE: &str = "scores.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Scorer,
    Base,
    Pretrain,
    Grpo,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Scorer, Stage::Base, Stage::Pretrain, Stage::Grpo];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Scorer => "scorer",
            Stage::Base => "base",
            Stage::Pretrain => "pretrain",
            Stage::Grpo => "grpo",
        }
    }

    pub fn checkpoint(self) -> &'static str {
        match self {
            Stage::Scorer => "scorer.json",
            Stage::Base => "base.json",
            Stage::Pretrain => "s1.json",
            Stage::Grpo => "s1s2.json",
        }
    }

    pub fn trace(self) -> &'static str {
        match self {
            Stage::Scorer => "scorer_trace.csv",
            Stage::Base => "base_trace.csv",
            Stage::Pretrain => "s1_trace.csv",
            Stage::Grpo => "grpo_trace.csv",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown stage `{s}` (scorer|base|pretrain|grpo)")))
    }
}

/// Ranking methods compared in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Logged impression order (popularity).
    Exposure,
    /// Historical click-rate order.
    Ctr,
    /// Experience scores alone.
    Scorer,
    Base,
    Stage1,
    Stage2,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Exposure,
        Method::Ctr,
        Method::Scorer,
        Method::Base,
        Method::Stage1,
        Method::Stage2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exposure => "exposure",
            Method::Ctr => "ctr",
            Method::Scorer => "scorer",
            Method::Base => "base",
            Method::Stage1 => "s1",
            Method::Stage2 => "s1s2",
        }
    }

    pub fn lists_file(self) -> String {
        format!("lists_{}.jsonl", self.as_str())
    }

    /// Per-list reward decomposition under the Stage II reward.
    pub fn rewards_file(self) -> String {
        format!("rewards_{}.jsonl", self.as_str())
    }

    fn policy_stage(self) -> Option<Stage> {
        match self {
            Method::Base => Some(Stage::Base),
            Method::Stage1 => Some(Stage::Pretrain),
            Method::Stage2 => Some(Stage::Grpo),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}` (exposure|ctr|scorer|base|s1|s1s2)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub metric: String,
    pub label_kind: String,
    pub k: usize,
    pub value: f64,
    pub n_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsbRow {
    pub method: String,
    pub good: u64,
    pub same: u64,
    pub bad: u64,
    pub adv_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub query_id: String,
    pub cand_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub query_id: String,
    pub total: f64,
    pub behavioral: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct EpochRow {
    epoch: usize,
    loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    files: BTreeMap<String, String>,
}

pub struct Corpus {
    pub sessions: Vec<Session>,
    pub pairs: Vec<PreferencePair>,
}

pub fn simulate(cfg: &PipelineConfig) -> Result<(Corpus, CorpusStats)> {
    cfg.simulator.validate()?;
    let sessions = generate_corpus(&cfg.simulator)?;
    let pairs = sample_preference_pairs(&sessions, &cfg.simulator)?;
    let stats = corpus_stats(&sessions, &pairs, cfg.simulator.long_tail_threshold);
    Ok((Corpus { sessions, pairs }, stats))
}

/// (policy-training, evaluation) sessions.
pub fn split_sessions(sessions: &[Session], cfg: &PipelineConfig) -> (Vec<Session>, Vec<Session>) {
    sessions
        .iter()
        .cloned()
        .partition(|s| !is_held_out(s.query_id(), cfg.eval.eval_fraction, cfg.eval.split_seed))
}

/// Logged behavioral signal per candidate: watch duration for clicked
/// items, historical click rate otherwise.
pub fn behavioral_scores(session: &Session, cfg: &PipelineConfig) -> Result<HashMap<String, f64>> {
    let mut scores = cfg.simulator.click_model().historical_ctr(session)?;
    let dur = extract_labels(session, LabelKind::Dur, cfg.eval.long_threshold)?;
    for id in session.clicked() {
        scores.insert(id.clone(), dur[id]);
    }
    Ok(scores)
}

/// Base policy: next-item NLL on the logged behavioral order (clicked by
/// watch duration, then exposed and unexposed by historical click rate).
pub fn train_base(sessions: &[Session], cfg: &PipelineConfig) -> Result<(ListPolicy, PretrainReport)> {
    let targets = behavioral_targets(sessions, |s| behavioral_scores(s, cfg))?;
    let init = cfg.base.init_policy(sessions)?;
    fit_sequences(init, sessions, &targets, &cfg.base, "base")
}

/// Top-`k` lists for every session.
pub fn rerank_sessions(
    method: Method,
    sessions: &[Session],
    scorer: Option<&ScorerModel>,
    policy: Option<&ListPolicy>,
    cfg: &PipelineConfig,
    k: usize,
) -> Result<Vec<DecodedList>> {
    let clicks = cfg.simulator.click_model();
    sessions
        .iter()
        .map(|s| {
            let k = k.min(s.len());
            let ids: Vec<&str> = s.ids().collect();
            let (mut items, logprob) = match method {
                Method::Exposure => (popularity_order(s)?, None),
                Method::Ctr => {
                    let ctr = clicks.historical_ctr(s)?;
                    (stable_sort_desc(&ids, |id| ctr.get(id).copied())?, None)
                }
                Method::Scorer => {
                    let scorer = scorer.ok_or_else(|| Error::MissingDependency("scorer model".into()))?;
                    let scores = scorer.score_session(s)?;
                    (stable_sort_desc(&ids, |id| scores.get(id).copied())?, None)
                }
                Method::Base | Method::Stage1 | Method::Stage2 => {
                    let policy = policy.ok_or_else(|| Error::MissingDependency(format!("{method} policy")))?;
                    let list = policy.greedy_decode(s, k)?;
                    let lp = policy.list_logprob(s, &list.items)?;
                    (list.items, Some(lp))
                }
            };
            items.truncate(k);
            Ok(DecodedList {
                query_id: s.query_id().to_owned(),
                items,
                logprob,
            })
        })
        .collect()
}

fn by_query(sessions: &[Session]) -> HashMap<&str, &Session> {
    sessions.iter().map(|s| (s.query_id(), s)).collect()
}

fn check_query_sets<'a>(
    expected: impl Iterator<Item = &'a str>,
    actual: impl Iterator<Item = &'a str>,
) -> Result<()> {
    let a: BTreeSet<&str> = expected.collect();
    let b: BTreeSet<&str> = actual.collect();
    let missing: Vec<String> = a.symmetric_difference(&b).map(|s| s.to_string()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::QuerySetMismatch(missing))
    }
}

/// nDCG per label kind and cutoff, plus the behavioral reward, for each
/// method's lists. Queries whose labels are all zero are skipped for that
/// label kind.
pub fn evaluate_lists(
    sessions: &[Session],
    methods: &[(String, Vec<DecodedList>)],
    cfg: &PipelineConfig,
) -> Result<Vec<ReportRow>> {
    let index = by_query(sessions);
    let clicks = cfg.simulator.click_model();
    let mut rows = Vec::new();
    for (method, lists) in methods {
        check_query_sets(sessions.iter().map(Session::query_id), lists.iter().map(|l| l.query_id.as_str()))?;
        for kind in LabelKind::ALL {
            for &k in &cfg.eval.ks {
                let (mut sum, mut n) = (0.0, 0usize);
                for l in lists {
                    let s = index[l.query_id.as_str()];
                    s.check_list(&l.items)?;
                    let labels = extract_labels(s, kind, cfg.eval.long_threshold)?;
                    let ndcg = ndcg_labels(&l.items, &labels, k)?;
                    if !ndcg.vacuous {
                        sum += ndcg.value;
                        n += 1;
                    }
                }
                rows.push(ReportRow {
                    method: method.clone(),
                    metric: "ndcg".into(),
                    label_kind: kind.to_string(),
                    k,
                    value: if n == 0 { 0.0 } else { sum / n as f64 },
                    n_queries: n,
                });
            }
        }
        let mut sum = 0.0;
        for l in lists {
            let s = index[l.query_id.as_str()];
            let list = RankedList::new(l.query_id.clone(), l.items.clone());
            sum += clicks.behavioral_reward(&list, s)?;
        }
        rows.push(ReportRow {
            method: method.clone(),
            metric: "behavioral_reward".into(),
            label_kind: "click_model".into(),
            k: lists.iter().map(|l| l.items.len()).max().unwrap_or(0),
            value: sum / lists.len().max(1) as f64,
            n_queries: lists.len(),
        });
    }
    Ok(rows)
}

/// Side-by-side oracle judgment of `a` against `b`, query by query.
pub fn gsb_lists(
    a: &[DecodedList],
    b: &[DecodedList],
    sessions: &[Session],
    judge_margin: f64,
    k: usize,
) -> Result<GsbCounts> {
    check_query_sets(a.iter().map(|l| l.query_id.as_str()), b.iter().map(|l| l.query_id.as_str()))?;
    let index = by_query(sessions);
    let b_lists: HashMap<&str, &DecodedList> = b.iter().map(|l| (l.query_id.as_str(), l)).collect();
    let mut counts = GsbCounts::default();
    for la in a {
        let s = index
            .get(la.query_id.as_str())
            .ok_or_else(|| Error::UnknownQuery(la.query_id.clone()))?;
        counts.add(gsb_compare(&la.items, &b_lists[la.query_id.as_str()].items, s, judge_margin, k)?);
    }
    Ok(counts)
}

/// One run directory: corpus, checkpoints, lists and reports.
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn require(&self, name: &str, what: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingDependency(format!("{what} ({}) not found", p.display())))
        }
    }

    pub fn sessions(&self) -> Result<Vec<Session>> {
        io::read_jsonl(&self.require(SESSIONS_FILE, "session corpus")?)
    }

    pub fn pairs(&self) -> Result<Vec<PreferencePair>> {
        io::read_jsonl(&self.require(PAIRS_FILE, "preference pairs")?)
    }

    pub fn scorer(&self) -> Result<ScorerModel> {
        let m: ScorerModel = io::read_json(&self.require(Stage::Scorer.checkpoint(), "scorer checkpoint")?)?;
        m.validate()?;
        Ok(m)
    }

    pub fn policy(&self, stage: Stage) -> Result<ListPolicy> {
        let what = format!("{} checkpoint", stage.as_str());
        let p: ListPolicy = io::read_json(&self.require(stage.checkpoint(), &what)?)?;
        p.validate()?;
        Ok(p)
    }

    pub fn lists(&self, method: Method) -> Result<Vec<DecodedList>> {
        let what = format!("{method} lists");
        io::read_jsonl(&self.require(&method.lists_file(), &what)?)
    }
}

pub fn cmd_simulate(cfg: &PipelineConfig, dir: &RunDir) -> Result<CorpusStats> {
    cfg.validate()?;
    io::ensure_dir(&dir.root)?;
    let (corpus, stats) = simulate(cfg)?;
    io::write_jsonl(&dir.path(SESSIONS_FILE), &corpus.sessions)?;
    io::write_jsonl(&dir.path(PAIRS_FILE), &corpus.pairs)?;
    io::write_json(&dir.path(SIMCONFIG_FILE), &cfg.simulator)?;
    io::write_json(&dir.path(CONFIG_FILE), cfg)?;
    Ok(stats)
}

/// Outcome of one training stage.
#[derive(Debug, Clone, PartialEq)]
pub enum StageOutcome {
    Scorer(TrainReport),
    Policy(PretrainReport),
    Grpo(Vec<TraceRow>),
}

pub fn cmd_train(stage: Stage, cfg: &PipelineConfig, dir: &RunDir) -> Result<StageOutcome> {
    cfg.validate()?;
    let hash = cfg.hash();
    let sessions = dir.sessions()?;
    let ckpt = dir.path(stage.checkpoint());
    let trace = dir.path(stage.trace());
    match stage {
        Stage::Scorer => {
            let pairs = dir.pairs()?;
            let (train, _) = split_sessions(&sessions, cfg);
            let train_ids: BTreeSet<&str> = train.iter().map(Session::query_id).collect();
            let pairs: Vec<PreferencePair> =
                pairs.into_iter().filter(|p| train_ids.contains(p.query_id.as_str())).collect();
            let (mut model, report) = train_scorer(&pairs, &train, &cfg.scorer)?;
            if let Some(meta) = model.train_meta.as_mut() {
                meta.config_hash = Some(hash);
            }
            io::write_json(&ckpt, &model)?;
            write_epochs(&trace, &report.epoch_losses)?;
            io::write_jsonl(&dir.path(SCORES_FILE), &score_rows(&model, &sessions)?)?;
            Ok(StageOutcome::Scorer(report))
        }
        Stage::Base | Stage::Pretrain => {
            let (train, _) = split_sessions(&sessions, cfg);
            let (mut policy, report) = if stage == Stage::Base {
                train_base(&train, cfg)?
            } else {
                let scorer = dir.scorer()?;
                let base = dir.policy(Stage::Base)?;
                pretrain(base, &train, &scorer, &cfg.pretrain)?
            };
            if let Some(meta) = policy.train_meta.as_mut() {
                meta.config_hash = Some(hash);
            }
            io::write_json(&ckpt, &policy)?;
            write_epochs(&trace, &report.epoch_nll)?;
            Ok(StageOutcome::Policy(report))
        }
        Stage::Grpo => {
            let scorer = dir.scorer()?;
            let s1 = dir.policy(Stage::Pretrain)?;
            let (train, _) = split_sessions(&sessions, cfg);
            let clicks = cfg.simulator.click_model();
            let (mut policy, rows) = train_grpo(s1, &train, &scorer, &clicks, &cfg.reward, &cfg.grpo)?;
            if let Some(meta) = policy.train_meta.as_mut() {
                meta.config_hash = Some(hash);
            }
            io::write_json(&ckpt, &policy)?;
            io::write_csv(&trace, &rows)?;
            Ok(StageOutcome::Grpo(rows))
        }
    }
}

/// Experience score of every candidate in every session.
pub fn score_rows(scorer: &ScorerModel, sessions: &[Session]) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::new();
    for s in sessions {
        for c in s.candidates() {
            rows.push(ScoreRow {
                query_id: s.query_id().to_owned(),
                cand_id: c.cand_id.clone(),
                score: scorer.score(s.query(), c)?,
            });
        }
    }
    Ok(rows)
}

/// Stage II reward of each list, split into its behavioral and nDCG parts.
pub fn reward_rows(
    lists: &[DecodedList],
    sessions: &[Session],
    scorer: &ScorerModel,
    cfg: &PipelineConfig,
) -> Result<Vec<RewardRow>> {
    let index = by_query(sessions);
    let clicks = cfg.simulator.click_model();
    lists
        .iter()
        .map(|l| {
            let s = index
                .get(l.query_id.as_str())
                .ok_or_else(|| Error::QuerySetMismatch(vec![l.query_id.clone()]))?;
            let r = reward(&RankedList::new(l.query_id.clone(), l.items.clone()), s, scorer, &clicks, &cfg.reward)?;
            Ok(RewardRow {
                query_id: l.query_id.clone(),
                total: r.total,
                behavioral: r.behavioral,
                ndcg: r.ndcg,
            })
        })
        .collect()
}

fn write_epochs(path: &Path, losses: &[f64]) -> Result<()> {
    let rows: Vec<EpochRow> = losses
        .iter()
        .enumerate()
        .map(|(epoch, &loss)| EpochRow { epoch, loss })
        .collect();
    io::write_csv(path, &rows)
}

/// Writes `lists_<method>.jsonl` for the evaluation split.
pub fn cmd_rerank(method: Method, cfg: &PipelineConfig, dir: &RunDir, k: usize) -> Result<PathBuf> {
    cfg.validate()?;
    let sessions = dir.sessions()?;
    let (_, eval) = split_sessions(&sessions, cfg);
    let scorer = match method {
        Method::Scorer => Some(dir.scorer()?),
        _ => None,
    };
    let policy = method.policy_stage().map(|s| dir.policy(s)).transpose()?;
    let lists = rerank_sessions(method, &eval, scorer.as_ref(), policy.as_ref(), cfg, k)?;
    let out = dir.path(&method.lists_file());
    io::write_jsonl(&out, &lists)?;
    Ok(out)
}

/// Evaluates every method whose lists exist in the run directory.
pub fn cmd_evaluate(cfg: &PipelineConfig, dir: &RunDir) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    let sessions = dir.sessions()?;
    let (_, eval) = split_sessions(&sessions, cfg);
    let mut methods = Vec::new();
    for m in Method::ALL {
        if dir.path(&m.lists_file()).is_file() {
            methods.push((m.to_string(), dir.lists(m)?));
        }
    }
    if methods.is_empty() {
        return Err(Error::MissingDependency(format!(
            "no lists_<method>.jsonl files in {}",
            dir.root.display()
        )));
    }
    let rows = evaluate_lists(&eval, &methods, cfg)?;
    io::write_csv(&dir.path(REPORT_FILE), &rows)?;
    if dir.path(Stage::Scorer.checkpoint()).is_file() {
        let scorer = dir.scorer()?;
        for (name, lists) in &methods {
            let m: Method = name.parse()?;
            io::write_jsonl(&dir.path(&m.rewards_file()), &reward_rows(lists, &eval, &scorer, cfg)?)?;
        }
    }
    Ok(rows)
}

/// GSB of list file `a` against list file `b`.
pub fn cmd_gsb(a: &Path, b: &Path, cfg: &PipelineConfig, dir: &RunDir, k: usize) -> Result<GsbRow> {
    let lists_a: Vec<DecodedList> = io::read_jsonl(a)?;
    let lists_b: Vec<DecodedList> = io::read_jsonl(b)?;
    let sessions = dir.sessions()?;
    let counts = gsb_lists(&lists_a, &lists_b, &sessions, cfg.eval.judge_margin, k)?;
    let name = a.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok(GsbRow {
        method: name.strip_prefix("lists_").unwrap_or(&name).to_owned(),
        good: counts.good,
        same: counts.same,
        bad: counts.bad,
        adv_percent: counts.adv()?,
    })
}

/// Methods compared against the base policy in the GSB report.
pub const GSB_METHODS: [Method; 3] = [Method::Scorer, Method::Stage1, Method::Stage2];

/// simulate, train every stage, rerank every method, evaluate, GSB against
/// the base policy, and a manifest of file digests.
pub fn run(cfg: &PipelineConfig, dir: &RunDir) -> Result<Vec<ReportRow>> {
    cmd_simulate(cfg, dir)?;
    for stage in Stage::ALL {
        cmd_train(stage, cfg, dir)?;
    }
    for m in Method::ALL {
        cmd_rerank(m, cfg, dir, cfg.eval.list_k)?;
    }
    let rows = cmd_evaluate(cfg, dir)?;
    let base = dir.path(&Method::Base.lists_file());
    let k = cfg.eval.list_k;
    let gsb = GSB_METHODS
        .iter()
        .map(|m| cmd_gsb(&dir.path(&m.lists_file()), &base, cfg, dir, k))
        .collect::<Result<Vec<_>>>()?;
    io::write_csv(&dir.path(GSB_FILE), &gsb)?;
    write_manifest(cfg, dir)?;
    Ok(rows)
}

fn write_manifest(cfg: &PipelineConfig, dir: &RunDir) -> Result<()> {
    let mut names: Vec<String> = vec![
        SESSIONS_FILE.into(),
        PAIRS_FILE.into(),
        SIMCONFIG_FILE.into(),
        CONFIG_FILE.into(),
        REPORT_FILE.into(),
        GSB_FILE.into(),
        SCORES_FILE.into(),
    ];
    for s in Stage::ALL {
        names.push(s.checkpoint().into());
        names.push(s.trace().into());
    }
    names.extend(Method::ALL.iter().map(|m| m.lists_file()));
    names.extend(Method::ALL.iter().map(|m| m.rewards_file()));
    let files = names
        .into_iter()
        .map(|n| {
            let digest = io::file_sha256(&dir.path(&n))?;
            Ok((n, digest))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let manifest = Manifest {
        config_hash: cfg.hash(),
        files,
    };
    io::write_json(&dir.path(MANIFEST_FILE), &manifest)
}

/// Looks up one report value.
pub fn report_value(rows: &[ReportRow], method: Method, metric: &str, label_kind: &str, k: usize) -> Option<f64> {
    rows.iter()
        .find(|r| r.method == method.as_str() && r.metric == metric && r.label_kind == label_kind && r.k == k)
        .map(|r| r.value)
}
