//! Exact counting and enumeration of contiguous bipartitions.
//!
//! Both operations run over a frontier decision diagram ([`frontier`]): the
//! graph's vertices are processed in a low-bandwidth order and every partial
//! colouring is summarised by the colours and connectivity of the vertices
//! still touching unprocessed ones. Equal summaries share a node, so the
//! number of plans is a path count through the diagram.
//!
//! Population and cut-size constraints are handled without materialising
//! plans: each diagram arc carries the population it adds to district 0 and
//! the number of edges it cuts, and constrained counts combine forward and
//! backward `(population, cut)` histograms at a middle level.

mod brute;
mod frontier;

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::DualGraph;
use crate::plan::Plan;

pub use brute::{brute_force_plans, BRUTE_FORCE_MAX_N};
pub(crate) use frontier::Diagram;

#[derive(Debug, Error)]
pub enum EnumError {
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph needs at least two units, has {0}")]
    TooSmall(usize),
    #[error("brute force is limited to {BRUTE_FORCE_MAX_N} units, graph has {0}")]
    TooLarge(usize),
    #[error("vertex frontier of width {0} is too wide for exact search")]
    FrontierTooWide(usize),
    #[error("population constraint needs a positive total population")]
    ZeroPopulation,
    #[error("plan count overflowed 128 bits")]
    Overflow,
    #[error("sink failed after {emitted} plans: {source}")]
    Sink {
        emitted: u64,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

#[derive(Debug, Error)]
#[error("invalid population deviation bound `{0}`: expected a decimal in (0, 1]")]
pub struct DevBoundError(String);

/// Exclusive upper bound on population deviation, held as an exact ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DevBound {
    num: u128,
    den: u128,
}

impl DevBound {
    pub fn new(num: u128, den: u128) -> Result<Self, DevBoundError> {
        if den == 0 || num == 0 || num > den {
            return Err(DevBoundError(format!("{num}/{den}")));
        }
        let g = num.gcd(&den);
        Ok(DevBound {
            num: num / g,
            den: den / g,
        })
    }

    /// Parses a plain decimal such as `0.03` exactly.
    pub fn from_decimal(s: &str) -> Result<Self, DevBoundError> {
        let err = || DevBoundError(s.to_string());
        let s = s.trim();
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty()
            || !int.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || frac.len() > 30
        {
            return Err(err());
        }
        let den = 10u128.pow(frac.len() as u32);
        let int: u128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| err())? };
        let frac_v: u128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
        let num = int
            .checked_mul(den)
            .and_then(|x| x.checked_add(frac_v))
            .ok_or_else(err)?;
        Self::new(num, den).map_err(|_| err())
    }

    /// Uses the shortest decimal that round-trips `x`, so `0.03` means 3/100.
    pub fn from_f64(x: f64) -> Result<Self, DevBoundError> {
        if !x.is_finite() {
            return Err(DevBoundError(x.to_string()));
        }
        Self::from_decimal(&format!("{x}"))
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn ratio(&self) -> (u128, u128) {
        (self.num, self.den)
    }

    /// Inclusive range of district-0 populations whose deviation is strictly
    /// below this bound. `None` if no integer population qualifies.
    pub fn window(&self, total: u64) -> Option<PopWindow> {
        // |total - 2 p0| * den < num * total
        let r = BigUint::from(self.num) * BigUint::from(total);
        if r.is_zero() {
            return None;
        }
        let x_max = (r - 1u32) / BigUint::from(self.den);
        let x_max = x_max.to_u64().unwrap_or(u64::MAX).min(total);
        let t = total as u128;
        let lo = (t.saturating_sub(x_max as u128)).div_ceil(2);
        let hi = ((t + x_max as u128) / 2).min(t);
        (lo <= hi).then_some(PopWindow {
            lo: lo as u64,
            hi: hi as u64,
        })
    }
}

impl fmt::Display for DevBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl FromStr for DevBound {
    type Err = DevBoundError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_decimal(s)
    }
}

impl Serialize for DevBound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for DevBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        DevBound::from_f64(x).map_err(serde::de::Error::custom)
    }
}

/// Inclusive bounds on the population of district 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PopWindow {
    pub lo: u64,
    pub hi: u64,
}

impl PopWindow {
    pub fn contains(&self, pop: u64) -> bool {
        self.lo <= pop && pop <= self.hi
    }
}

/// Hard constraints on a plan. Both bounds are exclusive: a plan passes when
/// `pop_dev < max_pop_dev` and `er < max_er`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pop_dev: Option<DevBound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_er: Option<u32>,
}

impl ConstraintSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(max_pop_dev: Option<f64>, max_er: Option<u32>) -> Result<Self, DevBoundError> {
        Ok(ConstraintSet {
            max_pop_dev: max_pop_dev.map(DevBound::from_f64).transpose()?,
            max_er,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.max_pop_dev.is_none() && self.max_er.is_none()
    }

    /// Population window for a graph of the given total population.
    /// `Ok(None)` means unconstrained; an empty window is reported as a
    /// window with `lo > hi`.
    pub(crate) fn window(&self, total: u64) -> Result<Option<PopWindow>, EnumError> {
        match self.max_pop_dev {
            None => Ok(None),
            Some(_) if total == 0 => Err(EnumError::ZeroPopulation),
            Some(b) => Ok(Some(b.window(total).unwrap_or(PopWindow { lo: 1, hi: 0 }))),
        }
    }

    /// Whether a plan with the given district-0 population and cut size
    /// satisfies the constraints.
    pub fn admits(&self, pop0: u64, total: u64, er: u32) -> bool {
        if let Some(max_er) = self.max_er {
            if er >= max_er {
                return false;
            }
        }
        match self.max_pop_dev {
            None => true,
            Some(b) => {
                let diff = BigInt::from(total) - BigInt::from(2 * pop0 as u128);
                let lhs = diff.magnitude() * BigUint::from(b.den);
                lhs < BigUint::from(b.num) * BigUint::from(total)
            }
        }
    }

    /// Plan-level check, including contiguity.
    pub fn admits_plan(&self, g: &DualGraph, plan: &Plan) -> bool {
        if !plan.is_valid_for(g) {
            return false;
        }
        let pop0: u64 = plan
            .members(0)
            .iter()
            .map(|&i| g.units()[i].population)
            .sum();
        self.admits(pop0, g.total_population(), crate::metrics::edges_removed(g, plan))
    }
}

fn check_graph(g: &DualGraph) -> Result<(), EnumError> {
    if g.n() < 2 {
        return Err(EnumError::TooSmall(g.n()));
    }
    if !g.is_connected() {
        return Err(EnumError::Disconnected);
    }
    Ok(())
}

/// Number of contiguous bipartitions of `g` satisfying `c`, exactly.
pub fn count_plans(g: &DualGraph, c: &ConstraintSet) -> Result<BigUint, EnumError> {
    check_graph(g)?;
    let diagram = Diagram::build(g)?;
    if c.is_empty() {
        return Ok(diagram.count());
    }
    let window = c.window(g.total_population())?;
    diagram.count_constrained(&g.populations(), window, c.max_er)
}

/// Streams every plan satisfying `c` to `sink`, each exactly once and in
/// canonical orientation. Returns the number emitted.
pub fn enumerate_plans<F, E>(g: &DualGraph, c: &ConstraintSet, mut sink: F) -> Result<u64, EnumError>
where
    F: FnMut(&Plan) -> Result<(), E>,
    E: Into<Box<dyn std::error::Error + Send + Sync>>,
{
    check_graph(g)?;
    let window = c.window(g.total_population())?;
    let diagram = Diagram::build(g)?;
    let pops = g.populations();
    let mut emitted = 0u64;
    let mut failure = None;
    diagram.walk(&pops, window, c.max_er, &mut |plan| match sink(plan) {
        Ok(()) => {
            emitted += 1;
            true
        }
        Err(e) => {
            failure = Some(e.into());
            false
        }
    });
    match failure {
        Some(source) => Err(EnumError::Sink { emitted, source }),
        None => Ok(emitted),
    }
}

/// Convenience wrapper collecting [`enumerate_plans`] into a vector.
pub fn collect_plans(g: &DualGraph, c: &ConstraintSet) -> Result<Vec<Plan>, EnumError> {
    let mut out = Vec::new();
    enumerate_plans(g, c, |p| {
        out.push(p.clone());
        Ok::<(), std::convert::Infallible>(())
    })?;
    Ok(out)
}
