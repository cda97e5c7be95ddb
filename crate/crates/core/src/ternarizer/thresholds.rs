use crate::error::{Error, Result};

use super::kde::{kde_log_density, silverman_bandwidth, IntDensity};

/// Student transfer outputs grouped by the teacher's output on each probe.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActivationRecord {
    pub y_minus: Vec<f64>,
    pub y_zero: Vec<f64>,
    pub y_plus: Vec<f64>,
}

impl ActivationRecord {
    pub fn from_outputs(y: &[i32], reference: &[i8]) -> Self {
        let mut rec = ActivationRecord::default();
        for (&v, &r) in y.iter().zip(reference) {
            let bucket = match r {
                -1 => &mut rec.y_minus,
                0 => &mut rec.y_zero,
                _ => &mut rec.y_plus,
            };
            bucket.push(v as f64);
        }
        rec
    }
}

/// Log-density access shared by the sample-list and histogram paths.
pub(crate) trait Cluster {
    fn count(&self) -> usize;
    fn mean(&self) -> f64;
    fn lowest(&self) -> f64;
    fn highest(&self) -> f64;
    fn log_density(&mut self, u: i32) -> f64;
}

/// Densities that agree to this much in log space count as a crossing.
const CROSSING_TOL: f64 = 1e-9;

struct Samples<'a> {
    values: &'a [f64],
    h: f64,
}

impl<'a> Samples<'a> {
    fn new(values: &'a [f64]) -> Self {
        let h = silverman_bandwidth(values).unwrap_or(1.0);
        Samples { values, h }
    }
}

impl Cluster for Samples<'_> {
    fn count(&self) -> usize {
        self.values.len()
    }
    fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
    fn lowest(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    fn highest(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
    fn log_density(&mut self, u: i32) -> f64 {
        kde_log_density(self.values, self.h, u as f64)
    }
}

impl Cluster for IntDensity {
    fn count(&self) -> usize {
        self.len()
    }
    fn mean(&self) -> f64 {
        IntDensity::mean(self)
    }
    fn lowest(&self) -> f64 {
        self.min() as f64
    }
    fn highest(&self) -> f64 {
        self.max() as f64
    }
    fn log_density(&mut self, u: i32) -> f64 {
        IntDensity::log_density(self, u)
    }
}

/// First integer scanning up from `base`'s mean toward `other`'s mean where
/// `other` is at least as dense as `base`.
fn crossing_up(base: &mut impl Cluster, other: &mut impl Cluster) -> i32 {
    let start = base.mean().floor() as i32;
    let end = (other.mean().ceil() as i32).max(start);
    (start..=end)
        .find(|&u| other.log_density(u) >= base.log_density(u) - CROSSING_TOL)
        .unwrap_or(end)
}

/// Mirror of [`crossing_up`], scanning downward.
fn crossing_down(base: &mut impl Cluster, other: &mut impl Cluster) -> i32 {
    let start = base.mean().ceil() as i32;
    let end = (other.mean().floor() as i32).min(start);
    (end..=start)
        .rev()
        .find(|&u| other.log_density(u) >= base.log_density(u) - CROSSING_TOL)
        .unwrap_or(end)
}

pub(crate) fn discriminants<C: Cluster>(minus: &mut C, zero: &mut C, plus: &mut C) -> Result<(i32, i32)> {
    let present: Vec<&C> = [&*minus, &*zero, &*plus]
        .into_iter()
        .filter(|c| c.count() > 0)
        .collect();
    if present.is_empty() {
        return Err(Error::Empty("no transfer outputs to threshold".into()));
    }
    let lowest = present.iter().map(|c| c.lowest()).fold(f64::INFINITY, f64::min) as i32;
    let highest = present.iter().map(|c| c.highest()).fold(f64::NEG_INFINITY, f64::max) as i32;
    let (has_m, has_z, has_p) = (minus.count() > 0, zero.count() > 0, plus.count() > 0);
    let (lo, hi) = if has_z {
        let hi = if has_p { crossing_up(zero, plus) } else { highest + 1 };
        let lo = if has_m { crossing_down(zero, minus) } else { lowest - 1 };
        (lo, hi)
    } else if has_m && has_p {
        let u = crossing_up(minus, plus);
        (u, u)
    } else if has_p {
        (lowest - 1, lowest - 1)
    } else {
        (highest + 1, highest + 1)
    };
    if lo > hi {
        let mid = (lo + hi).div_euclid(2);
        return Ok((mid, mid));
    }
    Ok((lo, hi))
}

/// Integer firing thresholds `(b_lo, b_hi)` at the density crossings
/// between the three clusters.
///
/// Without a `y_plus` cluster `b_hi` sits just above every observed output,
/// without `y_minus` `b_lo` sits just below; without `y_zero` both equal the
/// single crossing between `y_minus` and `y_plus`.
pub fn output_thresholds(rec: &ActivationRecord) -> Result<(i32, i32)> {
    discriminants(
        &mut Samples::new(&rec.y_minus),
        &mut Samples::new(&rec.y_zero),
        &mut Samples::new(&rec.y_plus),
    )
}
