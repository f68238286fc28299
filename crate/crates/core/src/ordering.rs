//! Deterministic score sorting and Stage I target reconstruction.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::types::Session;

/// Descending by score, ties broken by ascending id.
pub fn desc_then_id(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Sorts `ids` by descending score. Equal scores keep ascending id order so
/// the result never depends on input order.
pub fn stable_sort_desc<S, F>(ids: &[S], score_of: F) -> Result<Vec<String>>
where
    S: AsRef<str>,
    F: Fn(&str) -> Option<f64>,
{
    let mut keyed = Vec::with_capacity(ids.len());
    for id in ids {
        let id = id.as_ref();
        let score = score_of(id).ok_or_else(|| Error::MissingScore(id.to_owned()))?;
        if score.is_nan() {
            return Err(Error::InvalidInput(format!("score of `{id}` is NaN")));
        }
        keyed.push((id, score));
    }
    keyed.sort_by(|a, b| desc_then_id(*a, *b));
    Ok(keyed.into_iter().map(|(id, _)| id.to_owned()).collect())
}

/// Builds the augmented supervision sequence: clicked items sorted by score,
/// followed by exposed-unclicked and unexposed items merged and sorted by the
/// same score.
pub fn reconstruct_target<F>(session: &Session, score_of: F) -> Result<Vec<String>>
where
    F: Fn(&str) -> Option<f64>,
{
    let (clicked, rest): (Vec<&str>, Vec<&str>) =
        session.ids().partition(|id| session.is_clicked(id));
    let mut target = stable_sort_desc(&clicked, &score_of)?;
    target.extend(stable_sort_desc(&rest, &score_of)?);
    Ok(target)
}

/// Behavioral supervision order: clicked, then exposed-unclicked, then
/// unexposed, each segment sorted by `score_of`.
pub fn logged_target<F>(session: &Session, score_of: F) -> Result<Vec<String>>
where
    F: Fn(&str) -> Option<f64>,
{
    let clicked: Vec<&str> = session.ids().filter(|id| session.is_clicked(id)).collect();
    let exposed: Vec<&str> = session
        .ids()
        .filter(|id| session.exposed_unclicked().contains(*id))
        .collect();
    let mut target = stable_sort_desc(&clicked, &score_of)?;
    target.extend(stable_sort_desc(&exposed, &score_of)?);
    target.extend(stable_sort_desc(&session.unexposed(), &score_of)?);
    Ok(target)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use proptest::prelude::*;

    use super::*;
    use crate::types::tests::{cand, ids};
    use crate::types::QueryRecord;

    fn scores(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn permutations(items: &[String]) -> Vec<Vec<String>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(i);
            for mut tail in permutations(&rest) {
                tail.insert(0, head.clone());
                out.push(tail);
            }
        }
        out
    }

    // Sorted under the tie rule: each adjacent pair is (higher score) or
    // (equal score, smaller id).
    fn is_sorted_with_ties(list: &[String], s: &HashMap<String, f64>) -> bool {
        list.windows(2)
            .all(|w| s[&w[0]] > s[&w[1]] || (s[&w[0]] == s[&w[1]] && w[0] < w[1]))
    }

    #[test]
    fn two_element_sort() {
        let s = scores(&[("a", 0.1), ("b", 0.9)]);
        let out = stable_sort_desc(&["a", "b"], |id| s.get(id).copied()).unwrap();
        assert_eq!(out, ["b", "a"]);
    }

    #[test]
    fn tie_breaks_by_id() {
        let s = scores(&[("a", 0.5), ("b", 0.5)]);
        let out = stable_sort_desc(&["b", "a"], |id| s.get(id).copied()).unwrap();
        assert_eq!(out, ["a", "b"]);
    }

    #[test]
    fn three_elements_match_exhaustive_oracle() {
        let s = scores(&[("a", 0.3), ("b", 0.9), ("c", 0.3)]);
        let all: Vec<String> = ["a", "b", "c"].iter().map(|x| x.to_string()).collect();
        let valid: Vec<_> = permutations(&all)
            .into_iter()
            .filter(|p| is_sorted_with_ties(p, &s))
            .collect();
        assert_eq!(valid.len(), 1);
        let out = stable_sort_desc(&["c", "a", "b"], |id| s.get(id).copied()).unwrap();
        assert_eq!(out, valid[0]);
        assert_eq!(out, ["b", "a", "c"]);
    }

    #[test]
    fn missing_score_names_id() {
        let s = scores(&[("a", 0.1)]);
        let err = stable_sort_desc(&["a", "zz"], |id| s.get(id).copied()).unwrap_err();
        assert!(matches!(err, Error::MissingScore(ref id) if id == "zz"));
    }

    fn session(all: &[&str], clicked: &[&str], exposed: &[&str]) -> Session {
        let q = QueryRecord {
            query_id: "q".into(),
            features: vec![],
            pv_count: 0,
        };
        let cands = all.iter().map(|id| cand(id, vec![0.0])).collect();
        Session::new(q, cands, ids(clicked), ids(exposed)).unwrap()
    }

    #[test]
    fn clicked_first_then_merged_rest() {
        let sess = session(&["c1", "c2", "e1", "u1"], &["c1", "c2"], &["e1"]);
        let s = scores(&[("c1", 0.2), ("c2", 0.9), ("e1", 0.8), ("u1", 0.95)]);
        let out = reconstruct_target(&sess, |id| s.get(id).copied()).unwrap();
        assert_eq!(out, ["c2", "c1", "u1", "e1"]);
    }

    #[test]
    fn empty_clicked_segment() {
        let sess = session(&["e1", "u1"], &[], &["e1"]);
        let s = scores(&[("e1", 0.4), ("u1", 0.6)]);
        let out = reconstruct_target(&sess, |id| s.get(id).copied()).unwrap();
        assert_eq!(out, ["u1", "e1"]);
    }

    #[test]
    fn ties_match_brute_force_checker() {
        let sess = session(&["u2", "c2", "u1", "c1"], &["c1", "c2"], &[]);
        let s = scores(&[("c1", 0.1), ("c2", 0.1), ("u1", 0.5), ("u2", 0.5)]);
        let all: Vec<String> = sess.ids().map(str::to_owned).collect();
        let valid: Vec<_> = permutations(&all)
            .into_iter()
            .filter(|p| {
                let n_clicked = sess.clicked().len();
                let clicked_first = p[..n_clicked].iter().all(|id| sess.is_clicked(id));
                clicked_first
                    && is_sorted_with_ties(&p[..n_clicked], &s)
                    && is_sorted_with_ties(&p[n_clicked..], &s)
            })
            .collect();
        assert_eq!(valid.len(), 1);
        let out = reconstruct_target(&sess, |id| s.get(id).copied()).unwrap();
        assert_eq!(out, valid[0]);
        assert_eq!(out, ["c1", "c2", "u1", "u2"]);
    }

    #[test]
    fn logged_target_keeps_exposure_segments() {
        let sess = session(&["a", "b", "c", "d"], &["d"], &["c"]);
        let s = scores(&[("a", 0.9), ("b", 0.1), ("c", 0.0), ("d", 0.5)]);
        let out = logged_target(&sess, |id| s.get(id).copied()).unwrap();
        assert_eq!(out, ["d", "c", "a", "b"]);
    }

    proptest! {
        #[test]
        fn sort_is_idempotent(raw in proptest::collection::vec(-3i32..3, 0..12)) {
            let ids: Vec<String> = (0..raw.len()).map(|i| format!("id{i:02}")).collect();
            let s: HashMap<String, f64> =
                ids.iter().cloned().zip(raw.iter().map(|&x| x as f64)).collect();
            let once = stable_sort_desc(&ids, |id| s.get(id).copied()).unwrap();
            let twice = stable_sort_desc(&once, |id| s.get(id).copied()).unwrap();
            prop_assert!(is_sorted_with_ties(&once, &s));
            prop_assert_eq!(once, twice);
        }
    }
}
