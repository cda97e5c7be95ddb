use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Smallest bandwidth ever used; degenerate clusters would otherwise give 0.
pub const MIN_BANDWIDTH: f64 = 1e-6;

/// Type-7 quantile of sorted data (linear interpolation between order statistics).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    match sorted.get(lo + 1) {
        Some(&hi) => sorted[lo] + frac * (hi - sorted[lo]),
        None => sorted[lo],
    }
}

/// Silverman's rule from summary statistics. Falls back to the standard
/// deviation when the interquartile range vanishes.
pub(crate) fn bandwidth_from_stats(n: usize, std: f64, iqr: f64) -> f64 {
    let mut a = std.min(iqr / 1.34);
    if a <= 0.0 {
        a = std;
    }
    (0.9 * a * (n as f64).powf(-0.2)).max(MIN_BANDWIDTH)
}

pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("kernel density of no samples".into()));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    Ok(bandwidth_from_stats(n, std, iqr))
}

/// Gaussian kernel density of `samples` at each query point.
pub fn kde_estimate(samples: &[f64], queries: &[f64]) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    Ok(queries
        .iter()
        .map(|&u| {
            norm * samples
                .iter()
                .map(|&x| {
                    let z = (u - x) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect())
}

/// Natural log of the density at `u` for bandwidth `h`, without underflow.
pub fn kde_log_density(samples: &[f64], h: f64, u: f64) -> f64 {
    let terms = samples.iter().map(|&x| {
        let z = (u - x) / h;
        -0.5 * z * z
    });
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + terms.map(|t| (t - max).exp()).sum::<f64>().ln();
    lse - (samples.len() as f64 * h * (2.0 * PI).sqrt()).ln()
}

/// Density over integer-valued samples held as a histogram.
///
/// Sums kernel weights from a cached table while they stay representable
/// and switches to log-sum-exp when the density underflows.
#[derive(Clone, Debug, Default)]
pub(crate) struct IntDensity {
    offset: i32,
    counts: Vec<u32>,
    n: usize,
    min: i32,
    max: i32,
    sum: i64,
    h: f64,
    log_norm: f64,
    kernel: Vec<f64>,
    cutoff: usize,
}

/// exp(-x^2/2) drops below 1e-300 past this many bandwidths.
const KERNEL_REACH: f64 = 37.2;

impl IntDensity {
    /// Empties the histogram and sizes it for values in `[lo, hi]`.
    pub fn reset(&mut self, lo: i32, hi: i32) {
        self.offset = lo;
        self.counts.clear();
        self.counts.resize((hi - lo + 1).max(0) as usize, 0);
        self.n = 0;
        self.min = i32::MAX;
        self.max = i32::MIN;
        self.sum = 0;
    }

    #[inline]
    pub fn add(&mut self, v: i32) {
        self.counts[(v - self.offset) as usize] += 1;
        self.n += 1;
        self.sum += v as i64;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    /// Computes the bandwidth; call after all samples are added.
    pub fn finish(&mut self) {
        if self.n == 0 {
            return;
        }
        let mean = self.mean();
        let (lo, hi) = ((self.min - self.offset) as usize, (self.max - self.offset) as usize);
        let std = if self.n > 1 {
            let ss: f64 = self.counts[lo..=hi]
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| {
                    let d = (k + lo) as f64 + self.offset as f64 - mean;
                    c as f64 * d * d
                })
                .sum();
            (ss / (self.n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let iqr = self.quantile(0.75) - self.quantile(0.25);
        self.h = bandwidth_from_stats(self.n, std, iqr);
        self.log_norm = (self.n as f64 * self.h * (2.0 * PI).sqrt()).ln();
        self.cutoff = (KERNEL_REACH * self.h).ceil() as usize;
        self.kernel.clear();
    }

    fn order_stat(&self, k: usize) -> f64 {
        let mut seen = 0;
        let lo = (self.min - self.offset) as usize;
        for (i, &c) in self.counts[lo..].iter().enumerate() {
            seen += c as usize;
            if seen > k {
                return (i + lo) as f64 + self.offset as f64;
            }
        }
        self.max as f64
    }

    fn quantile(&self, q: f64) -> f64 {
        let pos = (self.n - 1) as f64 * q;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let a = self.order_stat(lo);
        if lo + 1 < self.n {
            a + frac * (self.order_stat(lo + 1) - a)
        } else {
            a
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.n as f64
    }

    pub fn min(&self) -> i32 {
        self.min
    }

    pub fn max(&self) -> i32 {
        self.max
    }

    fn kernel_at(&mut self, dist: usize) -> f64 {
        while self.kernel.len() <= dist {
            let z = self.kernel.len() as f64 / self.h;
            self.kernel.push((-0.5 * z * z).exp());
        }
        self.kernel[dist]
    }

    pub fn log_density(&mut self, u: i32) -> f64 {
        let reach = self.cutoff as i64;
        let lo = (u as i64 - reach).max(self.min as i64) as i32;
        let hi = (u as i64 + reach).min(self.max as i64) as i32;
        let mut s = 0.0;
        for v in lo..=hi {
            let c = self.counts[(v - self.offset) as usize];
            if c > 0 {
                s += c as f64 * self.kernel_at((v - u).unsigned_abs() as usize);
            }
        }
        if s >= 1e-280 {
            return s.ln() - self.log_norm;
        }
        let (min, max) = ((self.min - self.offset) as usize, (self.max - self.offset) as usize);
        let h = self.h;
        let terms = self.counts[min..=max]
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| {
                let z = ((k + min) as f64 + self.offset as f64 - u as f64) / h;
                (c as f64).ln() - 0.5 * z * z
            });
        let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
        m + terms.map(|t| (t - m).exp()).sum::<f64>().ln() - self.log_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;

    #[test]
    fn single_sample_peaks_at_itself() {
        let q: Vec<f64> = (-20..=20).map(|i| i as f64 * 1e-7).collect();
        let d = kde_estimate(&[0.0], &q).unwrap();
        let mid = d.len() / 2;
        assert!(d.iter().all(|&v| v <= d[mid] && v >= 0.0));
        for k in 1..=mid {
            assert!((d[mid - k] - d[mid + k]).abs() <= 1e-12 * d[mid]);
        }
        assert!(kde_estimate(&[], &q).is_err());
    }

    #[test]
    fn finds_both_modes_of_a_mixture() {
        let mut rng = Rng::new(17);
        let samples: Vec<f64> = (0..10_000)
            .map(|i| rng.normal() + if i % 2 == 0 { -4.0 } else { 4.0 })
            .collect();
        let grid: Vec<f64> = (-800..=800).map(|i| i as f64 / 100.0).collect();
        let d = kde_estimate(&samples, &grid).unwrap();
        let peak =
            |range: std::ops::Range<usize>| range.max_by(|&i, &j| d[i].total_cmp(&d[j])).map(|i| grid[i]).unwrap();
        assert!((peak(0..800) + 4.0).abs() < 0.1);
        assert!((peak(801..1601) - 4.0).abs() < 0.1);
    }

    #[test]
    fn integrates_to_one() {
        let mut rng = Rng::new(18);
        let samples: Vec<f64> = (0..300).map(|_| rng.normal() * 3.0 + 1.0).collect();
        let step = 0.01;
        let grid: Vec<f64> = (-3000..=3000).map(|i| i as f64 * step).collect();
        let d = kde_estimate(&samples, &grid).unwrap();
        let area: f64 = d.windows(2).map(|w| (w[0] + w[1]) * step / 2.0).sum();
        assert!((area - 1.0).abs() < 0.01, "area {area}");
    }

    #[test]
    fn histogram_density_matches_direct_sum() {
        let mut rng = Rng::new(19);
        let values: Vec<i32> = (0..500).map(|_| (rng.normal() * 6.0).round() as i32).collect();
        let mut hist = IntDensity::default();
        hist.reset(-100, 100);
        for &v in &values {
            hist.add(v);
        }
        hist.finish();
        let samples: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let h = silverman_bandwidth(&samples).unwrap();
        assert!((h - hist.h).abs() < 1e-12);
        for u in -60..=60 {
            let want = kde_log_density(&samples, h, u as f64);
            assert!((hist.log_density(u) - want).abs() < 1e-9, "u={u}");
        }
    }

    #[test]
    fn bandwidth_falls_back_to_std_without_spread() {
        // Most mass on one value: IQR is 0 but the std is not.
        let mut s = vec![0.0; 20];
        s.push(10.0);
        let h = silverman_bandwidth(&s).unwrap();
        let n = s.len() as f64;
        let mean = 10.0 / n;
        let std = ((20.0 * mean * mean + (10.0 - mean).powi(2)) / (n - 1.0)).sqrt();
        assert!((h - 0.9 * std * n.powf(-0.2)).abs() < 1e-12);
        assert_eq!(silverman_bandwidth(&[3.0]).unwrap(), MIN_BANDWIDTH);
    }
}
