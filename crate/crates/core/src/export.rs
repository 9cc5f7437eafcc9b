//! CSV report writers.

use std::io::Write;

use crate::elections::OutcomeTable;
use crate::graph::DualGraph;
use crate::metrics::{score_plan, MetricError, PlanMetrics};
use crate::recom::Ensemble;
use crate::stats::Histogram;
use crate::trees::{ratio_to_f64, ProposalDistribution};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("plan {plan}: {source}")]
    Metric { plan: u64, source: MetricError },
}

/// `x` rounded to `digits` significant digits, without trailing zeros.
/// Uses positional notation for moderate magnitudes and exponent notation
/// otherwise.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mant.to_string()), exp)
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Scores every plan and writes
/// `plan_id,pop_dev,er,pbp_min,pbp_mean,lw_min,pop_0,pop_1`.
pub fn write_metrics_csv<W: Write>(out: W, g: &DualGraph, plans: &Ensemble) -> Result<Vec<PlanMetrics>, ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["plan_id", "pop_dev", "er", "pbp_min", "pbp_mean", "lw_min", "pop_0", "pop_1"])?;
    let mut all = Vec::with_capacity(plans.len());
    for e in &plans.entries {
        let m = score_plan(g, &e.plan).map_err(|source| ExportError::Metric { plan: e.step, source })?;
        w.write_record([
            e.step.to_string(),
            fmt_sig(m.pop_dev, 15),
            m.er.to_string(),
            fmt_sig(m.pbp_min, 15),
            fmt_sig(m.pbp_mean, 15),
            fmt_sig(m.lw_min, 15),
            m.populations[0].to_string(),
            m.populations[1].to_string(),
        ])?;
        all.push(m);
    }
    w.flush()?;
    Ok(all)
}

/// `plan_id,contest,mode,share_lo,share_hi,dem_seats`, rows aligned with
/// `plans`.
pub fn write_outcomes_csv<W: Write>(out: W, plans: &Ensemble, table: &OutcomeTable) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["plan_id", "contest", "mode", "share_lo", "share_hi", "dem_seats"])?;
    let mode = table.mode.to_string();
    for (e, r) in plans.entries.iter().zip(&table.rows) {
        w.write_record([
            e.step.to_string(),
            table.contest_id.clone(),
            mode.clone(),
            fmt_sig(r.shares[0], 15),
            fmt_sig(r.shares[1], 15),
            r.dem_seats.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `er_score,probability,num_plans`, ascending by cut size.
pub fn write_treeprob_csv<W: Write>(out: W, dist: &ProposalDistribution) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["er_score", "probability", "num_plans"])?;
    for (er, share) in &dist.per_er {
        w.write_record([
            er.to_string(),
            fmt_sig(ratio_to_f64(&share.probability), 12),
            share.num_plans.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `bin_lo,bin_hi,count`.
pub fn write_histogram_csv<W: Write>(out: W, h: &Histogram) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for ((a, b), c) in h.edges().into_iter().zip(&h.counts) {
        w.write_record([fmt_sig(a, 15), fmt_sig(b, 15), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
