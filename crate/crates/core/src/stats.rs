//! Five-number summaries and fixed-width histograms.

use serde::Serialize;

pub const DEFAULT_BINS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Min, Tukey hinges and max. For odd lengths the median belongs to both
/// halves. Returns `None` for empty input or any NaN.
pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() || values.iter().any(|x| x.is_nan()) {
        return None;
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let half = n.div_ceil(2);
    Some(FiveNumber {
        min: xs[0],
        q1: median_sorted(&xs[..half]),
        median: median_sorted(&xs),
        q3: median_sorted(&xs[n - half..]),
        max: xs[n - 1],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// `bins` equal-width bins spanning the data range. The last bin is
    /// closed on the right. A constant sample lands in one bin.
    pub fn build(values: &[f64], bins: usize) -> Option<Histogram> {
        if bins == 0 || values.is_empty() || values.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for &x in values {
            let b = if width > 0.0 {
                (((x - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[b] += 1;
        }
        Some(Histogram { lo, hi, counts })
    }

    pub fn edges(&self) -> Vec<(f64, f64)> {
        let k = self.counts.len();
        let w = (self.hi - self.lo) / k as f64;
        (0..k)
            .map(|i| {
                let a = self.lo + w * i as f64;
                let b = if i + 1 == k { self.hi } else { self.lo + w * (i + 1) as f64 };
                (a, b)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_element_summary() {
        let xs = [7.0, 1.0, 9.0, 3.0, 5.0, 2.0, 8.0, 4.0, 6.0];
        let f = five_number(&xs).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 3.0, 5.0, 7.0, 9.0));
    }

    #[test]
    fn even_length_summary() {
        let f = five_number(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!((f.q1, f.median, f.q3), (2.5, 4.5, 6.5));
        let f = five_number(&[4.0]).unwrap();
        assert_eq!((f.min, f.q1, f.q3, f.max), (4.0, 4.0, 4.0, 4.0));
        assert!(five_number(&[]).is_none());
    }

    #[test]
    fn histogram_counts_everything() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let h = Histogram::build(&xs, 10).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 100);
        assert_eq!(h.counts[9], 10);
        assert_eq!(h.edges()[9].1, 1.0);
        let h = Histogram::build(&[2.0, 2.0], 5).unwrap();
        assert_eq!(h.counts, vec![2, 0, 0, 0, 0]);
    }
}
