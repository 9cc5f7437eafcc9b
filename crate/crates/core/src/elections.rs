//! Democratic vote shares and seats under a plan.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DualGraph, Votes};
use crate::plan::Plan;
use crate::recom::Ensemble;
use crate::stats::{five_number, FiveNumber};

#[derive(Debug, Error, PartialEq)]
pub enum ElectionError {
    #[error("contest {0:?} is missing for unit {1:?}")]
    MissingContest(String, String),
    #[error("dataset has {got} units but the graph has {expected}")]
    UnitCount { expected: usize, got: usize },
    #[error("contest {0:?} has no two-party votes anywhere")]
    NoVotes(String),
    #[error("share is undefined: district {0} has no counted votes")]
    UndefinedShare(u8),
    #[error("share is undefined: no counted votes statewide")]
    UndefinedStatewide,
    #[error("plan {0} is not a valid bipartition of this graph")]
    InvalidPlan(usize),
    #[error("empty ensemble")]
    EmptyEnsemble,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareMode {
    /// `D / (D + R)`
    TwoParty,
    /// `(D + I) / (D + I + R)`
    Augmented,
}

impl fmt::Display for ShareMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShareMode::TwoParty => "two_party",
            ShareMode::Augmented => "augmented",
        })
    }
}

impl std::str::FromStr for ShareMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "two_party" | "two-party" => Ok(ShareMode::TwoParty),
            "augmented" => Ok(ShareMode::Augmented),
            _ => Err(format!("unknown share mode {s:?} (expected two_party or augmented)")),
        }
    }
}

impl ShareMode {
    /// (numerator, denominator) of the Democratic share.
    fn split(self, v: &Votes) -> (u128, u128) {
        let (d, r, i) = (v.dem as u128, v.rep as u128, v.ind as u128);
        match self {
            ShareMode::TwoParty => (d, d + r),
            ShareMode::Augmented => (d + i, d + i + r),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElectionDataset {
    pub contest_id: String,
    /// Indexed like the graph's units.
    pub votes: Vec<Votes>,
    pub mode: ShareMode,
}

impl ElectionDataset {
    pub fn new(contest_id: impl Into<String>, votes: Vec<Votes>, mode: ShareMode) -> Result<Self, ElectionError> {
        let contest_id = contest_id.into();
        if !votes.iter().any(|v| v.dem + v.rep > 0) {
            return Err(ElectionError::NoVotes(contest_id));
        }
        Ok(ElectionDataset {
            contest_id,
            votes,
            mode,
        })
    }

    /// Pulls one contest out of the graph's unit records.
    pub fn from_graph(g: &DualGraph, contest: &str, mode: ShareMode) -> Result<Self, ElectionError> {
        let votes = g
            .units()
            .iter()
            .map(|u| {
                u.votes
                    .get(contest)
                    .copied()
                    .ok_or_else(|| ElectionError::MissingContest(contest.into(), u.unit_id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(contest, votes, mode)
    }

    pub fn with_mode(&self, mode: ShareMode) -> Self {
        ElectionDataset {
            mode,
            ..self.clone()
        }
    }

    fn check(&self, g: &DualGraph) -> Result<(), ElectionError> {
        if self.votes.len() != g.n() {
            return Err(ElectionError::UnitCount {
                expected: g.n(),
                got: self.votes.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ElectionOutcome {
    /// Ascending: `shares[0]` is the less Democratic district.
    pub shares: [f64; 2],
    /// Indexed by district label.
    pub unsorted: [f64; 2],
    pub dem_seats: u8,
    pub proportional_seats: f64,
}

/// Summed votes of each district.
pub fn district_votes(p: &Plan, e: &ElectionDataset) -> [Votes; 2] {
    let mut out = [Votes::default(); 2];
    for (i, v) in e.votes.iter().enumerate() {
        let d = &mut out[p.district(i) as usize];
        d.dem += v.dem;
        d.rep += v.rep;
        d.ind += v.ind;
    }
    out
}

/// Twice the statewide Democratic share.
pub fn proportionality_reference(e: &ElectionDataset) -> Result<f64, ElectionError> {
    let (num, den) = e
        .votes
        .iter()
        .map(|v| e.mode.split(v))
        .fold((0u128, 0u128), |a, b| (a.0 + b.0, a.1 + b.1));
    if den == 0 {
        return Err(ElectionError::UndefinedStatewide);
    }
    Ok(2.0 * num as f64 / den as f64)
}

fn outcome(p: &Plan, e: &ElectionDataset, reference: f64) -> Result<ElectionOutcome, ElectionError> {
    let totals = district_votes(p, e);
    let mut unsorted = [0.0; 2];
    let mut seats = 0;
    for (d, v) in totals.iter().enumerate() {
        let (num, den) = e.mode.split(v);
        if den == 0 {
            return Err(ElectionError::UndefinedShare(d as u8));
        }
        unsorted[d] = num as f64 / den as f64;
        if 2 * num > den {
            seats += 1;
        }
    }
    let mut shares = unsorted;
    if shares[0] > shares[1] {
        shares.swap(0, 1);
    }
    Ok(ElectionOutcome {
        shares,
        unsorted,
        dem_seats: seats,
        proportional_seats: reference,
    })
}

pub fn district_shares(g: &DualGraph, p: &Plan, e: &ElectionDataset) -> Result<ElectionOutcome, ElectionError> {
    e.check(g)?;
    if !p.is_valid_for(g) {
        return Err(ElectionError::InvalidPlan(0));
    }
    outcome(p, e, proportionality_reference(e)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct OutcomeTable {
    pub contest_id: String,
    pub mode: ShareMode,
    #[serde(skip)]
    pub rows: Vec<ElectionOutcome>,
    pub proportional_seats: f64,
    /// Less Democratic district.
    pub dist1: FiveNumber,
    /// More Democratic district.
    pub dist2: FiveNumber,
    /// Plans electing 0, 1 and 2 Democrats.
    pub seat_histogram: [u64; 3],
}

/// Outcomes of every plan in ensemble order, with summaries.
pub fn ensemble_outcomes(g: &DualGraph, plans: &Ensemble, e: &ElectionDataset) -> Result<OutcomeTable, ElectionError> {
    e.check(g)?;
    if plans.is_empty() {
        return Err(ElectionError::EmptyEnsemble);
    }
    let reference = proportionality_reference(e)?;
    let rows = plans
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            if !entry.plan.is_valid_for(g) {
                return Err(ElectionError::InvalidPlan(i));
            }
            outcome(&entry.plan, e, reference)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut seat_histogram = [0u64; 3];
    for r in &rows {
        seat_histogram[r.dem_seats as usize] += 1;
    }
    let lo: Vec<f64> = rows.iter().map(|r| r.shares[0]).collect();
    let hi: Vec<f64> = rows.iter().map(|r| r.shares[1]).collect();
    Ok(OutcomeTable {
        contest_id: e.contest_id.clone(),
        mode: e.mode,
        proportional_seats: reference,
        dist1: five_number(&lo).expect("non-empty"),
        dist2: five_number(&hi).expect("non-empty"),
        seat_histogram,
        rows,
    })
}
