//! Domain records shared by every stage of the pipeline.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Queries with fewer page views than this over seven days are long-tail.
pub const DEFAULT_LONG_TAIL_THRESHOLD: u64 = 70;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub features: Vec<f64>,
    /// Page views over a seven-day window.
    pub pv_count: u64,
}

impl QueryRecord {
    pub fn is_long_tail(&self, threshold: u64) -> bool {
        self.pv_count < threshold
    }
}

/// Hidden ground truth attached to simulator-generated candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub true_quality: f64,
    pub popularity: f64,
    pub clickbait: f64,
    pub mismatch: f64,
}

impl SimTruth {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.true_quality) {
            return Err(format!("true_quality {} outside [0,1]", self.true_quality));
        }
        if !(self.popularity >= 0.0 && self.popularity.is_finite()) {
            return Err(format!("popularity {} must be finite and >= 0", self.popularity));
        }
        if !unit(self.clickbait) {
            return Err(format!("clickbait {} outside [0,1]", self.clickbait));
        }
        if !unit(self.mismatch) {
            return Err(format!("mismatch {} outside [0,1]", self.mismatch));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub cand_id: String,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_truth: Option<SimTruth>,
}

impl CandidateRecord {
    pub fn truth(&self) -> Result<&SimTruth> {
        self.sim_truth
            .as_ref()
            .ok_or_else(|| Error::MissingSimTruth(self.cand_id.clone()))
    }
}

/// Serialized form of [`Session`]; validated on conversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionRecord {
    query: QueryRecord,
    candidates: Vec<CandidateRecord>,
    clicked: BTreeSet<String>,
    exposed_unclicked: BTreeSet<String>,
}

/// One query with its candidate pool partitioned into clicked (C),
/// exposed-but-unclicked (E) and, implicitly, unexposed (U) items.
///
/// U is never stored; it is whatever is left of the pool after C and E.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SessionRecord", into = "SessionRecord")]
pub struct Session {
    query: QueryRecord,
    candidates: Vec<CandidateRecord>,
    clicked: BTreeSet<String>,
    exposed_unclicked: BTreeSet<String>,
    index: HashMap<String, usize>,
}

impl Session {
    pub fn new(
        query: QueryRecord,
        candidates: Vec<CandidateRecord>,
        clicked: BTreeSet<String>,
        exposed_unclicked: BTreeSet<String>,
    ) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidSession {
            query_id: query.query_id.clone(),
            reason,
        };
        let mut index = HashMap::with_capacity(candidates.len());
        for (position, cand) in candidates.iter().enumerate() {
            if index.insert(cand.cand_id.clone(), position).is_some() {
                return Err(Error::DuplicateId {
                    id: cand.cand_id.clone(),
                    position,
                });
            }
            if let Some(truth) = &cand.sim_truth {
                truth
                    .validate()
                    .map_err(|e| invalid(format!("candidate `{}`: {e}", cand.cand_id)))?;
            }
        }
        if let Some(id) = clicked.intersection(&exposed_unclicked).next() {
            return Err(invalid(format!("`{id}` is both clicked and exposed-unclicked")));
        }
        if let Some(id) = clicked
            .iter()
            .chain(exposed_unclicked.iter())
            .find(|id| !index.contains_key(id.as_str()))
        {
            return Err(invalid(format!("`{id}` is not a candidate")));
        }
        if let Some(first) = candidates.first() {
            let dv = first.features.len();
            if let Some(c) = candidates.iter().find(|c| c.features.len() != dv) {
                return Err(invalid(format!(
                    "candidate `{}` has {} features, expected {dv}",
                    c.cand_id,
                    c.features.len()
                )));
            }
        }
        Ok(Self {
            query,
            candidates,
            clicked,
            exposed_unclicked,
            index,
        })
    }

    pub fn query(&self) -> &QueryRecord {
        &self.query
    }

    pub fn query_id(&self) -> &str {
        &self.query.query_id
    }

    pub fn candidates(&self) -> &[CandidateRecord] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn clicked(&self) -> &BTreeSet<String> {
        &self.clicked
    }

    pub fn exposed_unclicked(&self) -> &BTreeSet<String> {
        &self.exposed_unclicked
    }

    pub fn is_clicked(&self, id: &str) -> bool {
        self.clicked.contains(id)
    }

    pub fn is_exposed(&self, id: &str) -> bool {
        self.clicked.contains(id) || self.exposed_unclicked.contains(id)
    }

    /// Candidate ids that were never shown, in pool order.
    pub fn unexposed(&self) -> Vec<&str> {
        self.ids().filter(|id| !self.is_exposed(id)).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.candidates.iter().map(|c| c.cand_id.as_str())
    }

    pub fn position_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn candidate(&self, id: &str) -> Result<&CandidateRecord> {
        self.position_of(id)
            .map(|i| &self.candidates[i])
            .ok_or_else(|| Error::UnknownCandidate {
                query_id: self.query.query_id.clone(),
                id: id.to_owned(),
            })
    }

    pub fn truth(&self, id: &str) -> Result<&SimTruth> {
        self.candidate(id)?.truth()
    }

    /// Checks that `items` are distinct members of this session.
    pub fn check_list(&self, items: &[String]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (position, id) in items.iter().enumerate() {
            self.candidate(id)?;
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId {
                    id: id.clone(),
                    position,
                });
            }
        }
        Ok(())
    }
}

impl TryFrom<SessionRecord> for Session {
    type Error = Error;

    fn try_from(r: SessionRecord) -> Result<Self> {
        Session::new(r.query, r.candidates, r.clicked, r.exposed_unclicked)
    }
}

impl From<Session> for SessionRecord {
    fn from(s: Session) -> Self {
        SessionRecord {
            query: s.query,
            candidates: s.candidates,
            clicked: s.clicked,
            exposed_unclicked: s.exposed_unclicked,
        }
    }
}

/// Checks that every session carries the same feature dimensions.
pub fn corpus_dims(sessions: &[Session]) -> Result<(usize, usize)> {
    let first = sessions
        .iter()
        .find(|s| !s.is_empty())
        .ok_or_else(|| Error::InvalidInput("corpus has no candidates".into()))?;
    let dq = first.query.features.len();
    let dv = first.candidates[0].features.len();
    for s in sessions {
        if s.query.features.len() != dq {
            return Err(Error::DimensionMismatch {
                what: "query features",
                expected: dq,
                actual: s.query.features.len(),
            });
        }
        if let Some(c) = s.candidates.first() {
            if c.features.len() != dv {
                return Err(Error::DimensionMismatch {
                    what: "candidate features",
                    expected: dv,
                    actual: c.features.len(),
                });
            }
        }
    }
    Ok((dq, dv))
}

/// An ordered page of candidate ids for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub items: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl RankedList {
    pub fn new(query_id: impl Into<String>, items: Vec<String>) -> Self {
        Self {
            query_id: query_id.into(),
            items,
            scores: None,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}
