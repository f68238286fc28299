//! Offline evaluation: AUC, graded nDCG against label maps, GSB.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grpo::Ndcg;
use crate::seed::derived_rng;
use crate::types::Session;

pub const DEFAULT_JUDGE_MARGIN: f64 = 0.02;
pub const DEFAULT_LONG_PLAY_THRESHOLD: f64 = 0.6;

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("AUC needs both positive and negative examples".into()));
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half. Rank-based, O(n log n).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the number of won pairs, so ties stay integral
    let mut doubled: u128 = 0;
    let mut negs_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let tied_pos = order[i..j].iter().filter(|&&o| labels[o]).count() as u128;
        let tied_neg = (j - i) as u128 - tied_pos;
        doubled += tied_pos * (2 * negs_below + tied_neg);
        negs_below += tied_neg;
        i = j;
    }
    Ok(doubled as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Fraction of positive/negative pairs ordered correctly, by direct
/// enumeration of every pair.
pub fn pair_accuracy(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut doubled: u128 = 0;
    for (p, _) in labels.iter().enumerate().filter(|(_, &l)| l) {
        for (n, _) in labels.iter().enumerate().filter(|(_, &l)| !l) {
            doubled += match scores[p].total_cmp(&scores[n]) {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Ok(doubled as f64 / (2 * pos as u128 * neg as u128) as f64)
}

fn discount(position: usize) -> f64 {
    1.0 / ((position + 2) as f64).log2()
}

/// Graded nDCG@K of `list` with gain = label. The ideal ranking sorts every
/// labelled item by label.
pub fn ndcg_labels(list: &[String], labels: &HashMap<String, f64>, k: usize) -> Result<Ndcg> {
    if list.is_empty() {
        return Err(Error::InvalidInput("nDCG of an empty list".into()));
    }
    if let Some((id, l)) = labels.iter().find(|(_, l)| !(**l >= 0.0)) {
        return Err(Error::InvalidInput(format!("label of `{id}` is {l}; labels must be >= 0")));
    }
    let mut dcg = 0.0;
    for (t, id) in list.iter().take(k).enumerate() {
        let l = labels.get(id).ok_or_else(|| Error::MissingScore(id.clone()))?;
        dcg += l * discount(t);
    }
    let mut sorted: Vec<f64> = labels.values().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let ideal: f64 = sorted.iter().take(k).enumerate().map(|(t, l)| l * discount(t)).sum();
    Ok(if ideal == 0.0 {
        Ndcg {
            value: 1.0,
            vacuous: true,
        }
    } else {
        Ndcg {
            value: dcg / ideal,
            vacuous: false,
        }
    })
}

/// GSB advantage `(G - B) / (G + S + B)` in percent, rounded to 2 decimals.
pub fn gsb_adv(good: u64, same: u64, bad: u64) -> Result<f64> {
    let total = good + same + bad;
    if total == 0 {
        return Err(Error::InvalidInput("GSB counts are all zero".into()));
    }
    let raw = (good as f64 - bad as f64) / total as f64 * 100.0;
    Ok((raw * 100.0).round() / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Click,
    Long,
    Dur,
    Human,
}

impl LabelKind {
    pub const ALL: [LabelKind; 4] = [LabelKind::Click, LabelKind::Long, LabelKind::Dur, LabelKind::Human];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelKind::Click => "click",
            LabelKind::Long => "long",
            LabelKind::Dur => "dur",
            LabelKind::Human => "human",
        }
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LabelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown label kind `{s}`")))
    }
}

/// Per-candidate labels of one kind.
///
/// `click` is membership in the logged clicks; `dur` is the watch fraction
/// `true_quality * clicked`; `long` is `dur > long_threshold`; `human` is
/// `true_quality`.
pub fn extract_labels(session: &Session, kind: LabelKind, long_threshold: f64) -> Result<HashMap<String, f64>> {
    session
        .candidates()
        .iter()
        .map(|c| {
            let clicked = f64::from(u8::from(session.is_clicked(&c.cand_id)));
            let label = match kind {
                LabelKind::Click => clicked,
                LabelKind::Dur => c.truth()?.true_quality * clicked,
                LabelKind::Long => f64::from(u8::from(c.truth()?.true_quality * clicked > long_threshold)),
                LabelKind::Human => c.truth()?.true_quality,
            };
            Ok((c.cand_id.clone(), label))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Judgment {
    Good,
    Same,
    Bad,
}

/// Oracle side-by-side judgment of `a` against `b` by human-label nDCG@K.
pub fn gsb_compare(a: &[String], b: &[String], session: &Session, judge_margin: f64, k: usize) -> Result<Judgment> {
    session.check_list(a)?;
    session.check_list(b)?;
    let labels = extract_labels(session, LabelKind::Human, DEFAULT_LONG_PLAY_THRESHOLD)?;
    let na = ndcg_labels(a, &labels, k)?.value;
    let nb = ndcg_labels(b, &labels, k)?.value;
    Ok(if na - nb > judge_margin {
        Judgment::Good
    } else if nb - na > judge_margin {
        Judgment::Bad
    } else {
        Judgment::Same
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GsbCounts {
    pub good: u64,
    pub same: u64,
    pub bad: u64,
}

impl GsbCounts {
    pub fn add(&mut self, j: Judgment) {
        match j {
            Judgment::Good => self.good += 1,
            Judgment::Same => self.same += 1,
            Judgment::Bad => self.bad += 1,
        }
    }

    pub fn adv(&self) -> Result<f64> {
        gsb_adv(self.good, self.same, self.bad)
    }
}

/// Binary quality labels (`true_quality >= threshold`) over candidates with
/// the majority class subsampled per query, so each query contributes equal
/// numbers of positives and negatives. Queries with a single class are
/// skipped. Returns `(query_id, cand_id, positive)` triples.
pub fn balanced_quality_set(
    sessions: &[Session],
    threshold: f64,
    seed: u64,
) -> Result<Vec<(String, String, bool)>> {
    let mut out = Vec::new();
    for s in sessions {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for c in s.candidates() {
            if c.truth()?.true_quality >= threshold {
                pos.push(c.cand_id.as_str());
            } else {
                neg.push(c.cand_id.as_str());
            }
        }
        let m = pos.len().min(neg.len());
        if m == 0 {
            continue;
        }
        let mut rng = derived_rng(seed, &["balance", s.query_id()]);
        for (class, ids) in [(true, &pos), (false, &neg)] {
            let mut keep = index::sample(&mut rng, ids.len(), m).into_vec();
            keep.sort_unstable();
            out.extend(keep.into_iter().map(|i| (s.query_id().to_owned(), ids[i].to_owned(), class)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::Rng as _;

    use super::*;
    use crate::seed::rng;
    use crate::types::{CandidateRecord, QueryRecord, SimTruth};

    fn labels(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn session(qualities: &[f64], clicked: &[&str]) -> Session {
        let cands = qualities
            .iter()
            .enumerate()
            .map(|(i, &q)| CandidateRecord {
                cand_id: format!("c{i}"),
                features: vec![0.0],
                sim_truth: Some(SimTruth {
                    true_quality: q,
                    popularity: 1.0,
                    clickbait: 0.5,
                    mismatch: 0.0,
                }),
            })
            .collect();
        let query = QueryRecord {
            query_id: "q".into(),
            features: vec![0.0],
            pv_count: 3,
        };
        let c: BTreeSet<String> = clicked.iter().map(|s| s.to_string()).collect();
        Session::new(query, cands, c, BTreeSet::new()).unwrap()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.4, 0.5, 0.1], &[true, true, false, false]).unwrap(), 0.75);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(auc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn auc_equals_pair_accuracy_exactly() {
        let mut r = rng(3);
        for _ in 0..300 {
            let n = r.random_range(2..40);
            // coarse scores so ties are common
            let scores: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..6u8)) / 5.0).collect();
            let mut l: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
            l[0] = true;
            l[1] = false;
            assert_eq!(auc(&scores, &l).unwrap(), pair_accuracy(&scores, &l).unwrap());
        }
    }

    #[test]
    fn ndcg_labels_examples() {
        let l = labels(&[("a", 2.0), ("b", 1.0)]);
        assert_eq!(ndcg_labels(&ids(&["a", "b"]), &l, 2).unwrap().value, 1.0);
        let rev = ndcg_labels(&ids(&["b", "a"]), &l, 2).unwrap().value;
        let by_hand = (1.0 + 2.0 / 3f64.log2()) / (2.0 + 1.0 / 3f64.log2());
        assert!((rev - by_hand).abs() < 1e-12);
        assert!((rev - 0.859_718_7).abs() < 1e-6);
        let zero = ndcg_labels(&ids(&["a"]), &labels(&[("a", 0.0), ("b", 0.0)]), 2).unwrap();
        assert!(zero.vacuous && zero.value == 1.0);
        assert!(ndcg_labels(&ids(&["a"]), &labels(&[("a", -1.0)]), 1).is_err());
    }

    fn permutations(items: &[String]) -> Vec<Vec<String>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, head.clone());
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn ndcg_labels_matches_permutation_maximum() {
        let mut r = rng(5);
        for n in 1..=5 {
            let names: Vec<String> = (0..n).map(|i| format!("i{i}")).collect();
            let l: HashMap<String, f64> = names.iter().map(|id| (id.clone(), r.random_range(0.0..3.0))).collect();
            for k in 1..=n {
                let dcg = |p: &[String]| -> f64 { p.iter().take(k).enumerate().map(|(t, id)| l[id] * discount(t)).sum() };
                let perms = permutations(&names);
                let best = perms.iter().map(|p| dcg(p)).fold(f64::MIN, f64::max);
                for p in &perms {
                    let got = ndcg_labels(p, &l, k).unwrap().value;
                    assert!((got - dcg(p) / best).abs() < 1e-9);
                    assert!((0.0..=1.0 + 1e-12).contains(&got));
                }
            }
        }
    }

    #[test]
    fn ndcg_labels_scale_invariant() {
        let l = labels(&[("a", 0.2), ("b", 1.4), ("c", 0.7)]);
        let scaled: HashMap<String, f64> = l.iter().map(|(k, v)| (k.clone(), v * 3.5)).collect();
        let list = ids(&["c", "a", "b"]);
        let x = ndcg_labels(&list, &l, 3).unwrap().value;
        assert!((x - ndcg_labels(&list, &scaled, 3).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn gsb_examples() {
        assert_eq!(gsb_adv(48, 114, 26).unwrap(), 11.70);
        assert_eq!(gsb_adv(39, 133, 28).unwrap(), 5.50);
        assert_eq!(gsb_adv(5, 0, 5).unwrap(), 0.0);
        assert!(gsb_adv(0, 0, 0).is_err());
        assert_eq!(gsb_adv(26, 114, 48).unwrap(), -11.70);
    }

    #[test]
    fn label_extraction() {
        let s = session(&[0.9, 0.2, 0.7], &["c0", "c1"]);
        let click = extract_labels(&s, LabelKind::Click, 0.6).unwrap();
        assert_eq!(click, labels(&[("c0", 1.0), ("c1", 1.0), ("c2", 0.0)]));
        let dur = extract_labels(&s, LabelKind::Dur, 0.6).unwrap();
        assert!(dur["c0"] > dur["c1"]);
        assert_eq!(dur["c2"], 0.0);
        let long = extract_labels(&s, LabelKind::Long, 0.6).unwrap();
        assert_eq!(long, labels(&[("c0", 1.0), ("c1", 0.0), ("c2", 0.0)]));
        let human = extract_labels(&s, LabelKind::Human, 0.6).unwrap();
        assert_eq!(human, labels(&[("c0", 0.9), ("c1", 0.2), ("c2", 0.7)]));
    }

    #[test]
    fn click_labels_ignore_truth() {
        let mut cands = session(&[0.5, 0.5], &["c1"]).candidates().to_vec();
        cands.iter_mut().for_each(|c| c.sim_truth = None);
        let q = QueryRecord {
            query_id: "q".into(),
            features: vec![0.0],
            pv_count: 0,
        };
        let s = Session::new(q, cands, ["c1".to_string()].into(), BTreeSet::new()).unwrap();
        assert_eq!(extract_labels(&s, LabelKind::Click, 0.6).unwrap()["c1"], 1.0);
        assert!(matches!(extract_labels(&s, LabelKind::Human, 0.6), Err(Error::MissingSimTruth(_))));
    }

    #[test]
    fn gsb_compare_examples() {
        let s = session(&[0.9, 0.5, 0.1, 0.3], &[]);
        let ideal = ids(&["c0", "c1", "c3", "c2"]);
        let reversed: Vec<String> = ideal.iter().rev().cloned().collect();
        assert_eq!(gsb_compare(&ideal, &ideal, &s, 0.02, 4).unwrap(), Judgment::Same);
        assert_eq!(gsb_compare(&ideal, &reversed, &s, 0.01, 4).unwrap(), Judgment::Good);
        assert_eq!(gsb_compare(&reversed, &ideal, &s, 0.01, 4).unwrap(), Judgment::Bad);
        assert_eq!(gsb_compare(&ideal, &reversed, &s, 1.0, 4).unwrap(), Judgment::Same);
    }

    #[test]
    fn balanced_set_is_balanced_per_query() {
        let s = session(&[0.9, 0.8, 0.7, 0.1, 0.2], &[]);
        let set = balanced_quality_set(std::slice::from_ref(&s), 0.5, 1).unwrap();
        assert_eq!(set.iter().filter(|t| t.2).count(), 2);
        assert_eq!(set.iter().filter(|t| !t.2).count(), 2);
        let one_class = session(&[0.9, 0.8], &[]);
        assert!(balanced_quality_set(&[one_class], 0.5, 1).unwrap().is_empty());
    }
}
