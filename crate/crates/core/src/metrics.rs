//! Population deviation and compactness scores of a plan.

use std::f64::consts::PI;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::graph::DualGraph;
use crate::plan::Plan;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("population deviation is undefined for a total population of 0")]
    ZeroPopulation,
    #[error("district {district} has non-positive derived perimeter {perimeter}")]
    BadPerimeter { district: u8, perimeter: f64 },
    #[error("district {district} has a degenerate bounding box")]
    DegenerateBox { district: u8 },
    #[error("plan is not a valid bipartition of this graph")]
    InvalidPlan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PopDeviation {
    /// `|total - 2 p0| / total`, which equals `|p̄ - p_i| / p̄` for both districts.
    pub dev: Ratio<u128>,
    pub populations: [u64; 2],
}

impl PopDeviation {
    pub fn as_f64(&self) -> f64 {
        self.dev.to_f64().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlanMetrics {
    pub pop_dev: f64,
    pub er: u32,
    pub pbp: [f64; 2],
    pub pbp_min: f64,
    pub pbp_mean: f64,
    pub lw: [f64; 2],
    pub lw_min: f64,
    pub populations: [u64; 2],
}

pub fn district_populations(g: &DualGraph, p: &Plan) -> [u64; 2] {
    let mut pops = [0u64; 2];
    for (i, u) in g.units().iter().enumerate() {
        pops[p.district(i) as usize] += u.population;
    }
    pops
}

pub fn pop_deviation(g: &DualGraph, p: &Plan) -> Result<PopDeviation, MetricError> {
    let populations = district_populations(g, p);
    let total = populations[0] as u128 + populations[1] as u128;
    if total == 0 {
        return Err(MetricError::ZeroPopulation);
    }
    let diff = (populations[0] as i128 - populations[1] as i128).unsigned_abs();
    Ok(PopDeviation {
        dev: Ratio::new(diff, total),
        populations,
    })
}

/// Number of contiguity edges joining the two districts.
pub fn edges_removed(g: &DualGraph, p: &Plan) -> u32 {
    g.edges()
        .iter()
        .filter(|e| p.district(e.a) != p.district(e.b))
        .count() as u32
}

/// Area and perimeter of each district. Shared borders between units of the
/// same district are interior and subtracted twice; every loaded border
/// counts, pruned or not.
pub fn district_area_perimeter(g: &DualGraph, p: &Plan) -> ([f64; 2], [f64; 2]) {
    let mut area = [0.0; 2];
    let mut perim = [0.0; 2];
    for (i, u) in g.units().iter().enumerate() {
        let d = p.district(i) as usize;
        area[d] += u.area;
        perim[d] += u.perimeter;
    }
    for e in g.borders() {
        let d = p.district(e.a);
        if d == p.district(e.b) {
            perim[d as usize] -= 2.0 * e.shared_perimeter;
        }
    }
    (area, perim)
}

/// `4πA/P²` per district.
pub fn polsby_popper(g: &DualGraph, p: &Plan) -> Result<[f64; 2], MetricError> {
    let (area, perim) = district_area_perimeter(g, p);
    let mut out = [0.0; 2];
    for d in 0..2 {
        if !(perim[d] > 0.0) {
            return Err(MetricError::BadPerimeter {
                district: d as u8,
                perimeter: perim[d],
            });
        }
        out[d] = 4.0 * PI * area[d] / (perim[d] * perim[d]);
    }
    Ok(out)
}

/// Short side over long side of each district's axis-aligned bounding box.
pub fn length_width(g: &DualGraph, p: &Plan) -> Result<[f64; 2], MetricError> {
    let mut boxes = [[f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY]; 2];
    for (i, u) in g.units().iter().enumerate() {
        let b = &mut boxes[p.district(i) as usize];
        b[0] = b[0].min(u.bbox[0]);
        b[1] = b[1].min(u.bbox[1]);
        b[2] = b[2].max(u.bbox[2]);
        b[3] = b[3].max(u.bbox[3]);
    }
    let mut out = [0.0; 2];
    for (d, b) in boxes.iter().enumerate() {
        let dx = b[2] - b[0];
        let dy = b[3] - b[1];
        if !(dx > 0.0 && dy > 0.0) {
            return Err(MetricError::DegenerateBox { district: d as u8 });
        }
        out[d] = dx.min(dy) / dx.max(dy);
    }
    Ok(out)
}

pub fn score_plan(g: &DualGraph, p: &Plan) -> Result<PlanMetrics, MetricError> {
    if !p.is_valid_for(g) {
        return Err(MetricError::InvalidPlan);
    }
    let dev = pop_deviation(g, p)?;
    let pbp = polsby_popper(g, p)?;
    let lw = length_width(g, p)?;
    Ok(PlanMetrics {
        pop_dev: dev.as_f64(),
        er: edges_removed(g, p),
        pbp,
        pbp_min: pbp[0].min(pbp[1]),
        pbp_mean: (pbp[0] + pbp[1]) / 2.0,
        lw,
        lw_min: lw[0].min(lw[1]),
        populations: dev.populations,
    })
}
