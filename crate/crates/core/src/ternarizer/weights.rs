use crate::error::{Error, Result};

/// Maps real weights to {-1, 0, +1}: below `t_lo` is -1, above `t_hi` is +1.
pub fn ternarize_weights(w: &[f64], t_lo: f64, t_hi: f64) -> Result<Vec<i8>> {
    if !(t_lo <= 0.0 && t_hi >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "thresholds need t_lo <= 0 <= t_hi, got [{t_lo}, {t_hi}]"
        )));
    }
    Ok(w.iter()
        .map(|&v| {
            if v < t_lo {
                -1
            } else if v > t_hi {
                1
            } else {
                0
            }
        })
        .collect())
}

/// A chosen pair of weight thresholds and its score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TernConfig {
    pub t_lo: f64,
    pub t_hi: f64,
    pub score: f64,
}

/// How finely the threshold candidates are enumerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GridPolicy {
    /// Every distinct ternarization: one candidate per weight count.
    #[default]
    Full,
    /// At most this many evenly spaced candidates per axis, endpoints kept.
    Capped(usize),
}

impl std::fmt::Display for GridPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridPolicy::Full => write!(f, "full"),
            GridPolicy::Capped(k) => write!(f, "capped:{k}"),
        }
    }
}

impl std::str::FromStr for GridPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(GridPolicy::Full);
        }
        s.strip_prefix("capped:")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 2)
            .map(GridPolicy::Capped)
            .ok_or_else(|| Error::InvalidArgument(format!("grid policy {s:?} is not `full` or `capped:K` with K >= 2")))
    }
}

/// One threshold axis: candidate thresholds and how many weights each
/// switches on.
#[derive(Clone, Debug)]
struct Axis {
    /// Weight indices, most extreme first.
    order: Vec<usize>,
    thresholds: Vec<f64>,
    /// Number of weights strictly beyond each threshold.
    active: Vec<usize>,
}

impl Axis {
    /// `values` are magnitudes sorted descending with their weight indices.
    fn build(mut values: Vec<(f64, usize)>, extreme: f64, sign: f64, policy: GridPolicy) -> Axis {
        values.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        let n = values.len();
        let mut ks: Vec<usize> = (0..=n).collect();
        if let GridPolicy::Capped(cap) = policy {
            if n + 1 > cap {
                ks = (0..cap).map(|i| (i * n + (cap - 1) / 2) / (cap - 1)).collect();
                ks.dedup();
            }
        }
        let mags: Vec<f64> = values.iter().map(|v| v.0).collect();
        let mut thresholds = Vec::with_capacity(ks.len());
        let mut active = Vec::with_capacity(ks.len());
        for &k in &ks {
            let t = if k == 0 {
                extreme
            } else if k == n {
                0.0
            } else {
                (mags[k - 1] + mags[k]) / 2.0
            };
            thresholds.push(sign * t);
            active.push(mags.partition_point(|&m| m > t));
        }
        Axis {
            order: values.into_iter().map(|v| v.1).collect(),
            thresholds,
            active,
        }
    }
}

/// Candidate grid for one neuron. Row `a` fixes `t_lo`, column `b` fixes
/// `t_hi`; index 0 on either axis switches no weights on.
#[derive(Clone, Debug)]
pub struct WeightGrid {
    weights: Vec<f64>,
    neg: Axis,
    pos: Axis,
}

impl WeightGrid {
    pub fn new(weights: &[f64], policy: GridPolicy) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite weight".into()));
        }
        let negs: Vec<(f64, usize)> = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w < 0.0)
            .map(|(j, &w)| (-w, j))
            .collect();
        let poss: Vec<(f64, usize)> = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(j, &w)| (w, j))
            .collect();
        let neg_extreme = negs.iter().map(|v| v.0).fold(0.0, f64::max);
        let pos_extreme = poss.iter().map(|v| v.0).fold(0.0, f64::max);
        Ok(WeightGrid {
            weights: weights.to_vec(),
            neg: Axis::build(negs, neg_extreme, -1.0, policy),
            pos: Axis::build(poss, pos_extreme, 1.0, policy),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// (rows, cols) = (t_lo candidates, t_hi candidates).
    pub fn shape(&self) -> (usize, usize) {
        (self.neg.thresholds.len(), self.pos.thresholds.len())
    }

    pub fn num_negative(&self) -> usize {
        self.neg.order.len()
    }

    pub fn num_positive(&self) -> usize {
        self.pos.order.len()
    }

    pub fn t_lo(&self, a: usize) -> f64 {
        self.neg.thresholds[a]
    }

    pub fn t_hi(&self, b: usize) -> f64 {
        self.pos.thresholds[b]
    }

    /// Count of weights set to -1 by row `a`.
    pub fn neg_active(&self, a: usize) -> usize {
        self.neg.active[a]
    }

    /// Count of weights set to +1 by column `b`.
    pub fn pos_active(&self, b: usize) -> usize {
        self.pos.active[b]
    }

    /// Negative weight indices, most negative first.
    pub fn neg_order(&self) -> &[usize] {
        &self.neg.order
    }

    /// Positive weight indices, largest first.
    pub fn pos_order(&self) -> &[usize] {
        &self.pos.order
    }

    pub fn nonzeros(&self, a: usize, b: usize) -> usize {
        self.neg_active(a) + self.pos_active(b)
    }

    pub fn spread(&self, a: usize, b: usize) -> f64 {
        self.t_lo(a).abs() + self.t_hi(b).abs()
    }

    pub fn ternary(&self, a: usize, b: usize) -> Vec<i8> {
        let mut out = vec![0i8; self.weights.len()];
        for &j in &self.neg.order[..self.neg_active(a)] {
            out[j] = -1;
        }
        for &j in &self.pos.order[..self.pos_active(b)] {
            out[j] = 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        assert_eq!(ternarize_weights(&[-0.5, 0.1, 0.7], -0.2, 0.3).unwrap(), vec![-1, 0, 1]);
        assert!(ternarize_weights(&[1.0], 0.1, 0.3).is_err());
        assert!(ternarize_weights(&[1.0], -0.1, -0.3).is_err());
    }

    #[test]
    fn extremes_give_all_zero() {
        let w = [-0.4, -0.1, 0.2, 0.9];
        assert_eq!(ternarize_weights(&w, -0.4, 0.9).unwrap(), vec![0; 4]);
    }

    #[test]
    fn grid_reproduces_threshold_ternarization() {
        let w = [0.3, -0.2, -0.2, 0.0, 0.8, -0.9, 0.3];
        let g = WeightGrid::new(&w, GridPolicy::Full).unwrap();
        assert_eq!(g.shape(), (4, 4));
        for a in 0..4 {
            for b in 0..4 {
                let direct = ternarize_weights(&w, g.t_lo(a), g.t_hi(b)).unwrap();
                assert_eq!(g.ternary(a, b), direct);
                assert_eq!(g.nonzeros(a, b), direct.iter().filter(|&&v| v != 0).count());
            }
        }
        assert_eq!(g.ternary(3, 3), vec![1, -1, -1, 0, 1, -1, 1]);
        // The duplicated -0.2 and 0.3 cannot be split.
        assert_eq!(g.neg_active(2), 1);
        assert_eq!(g.pos_active(2), 1);
    }

    #[test]
    fn single_weight() {
        let g = WeightGrid::new(&[0.5], GridPolicy::Full).unwrap();
        assert_eq!(g.shape(), (1, 2));
        assert_eq!(g.t_hi(0), 0.5);
        assert_eq!(g.t_hi(1), 0.0);
        assert_eq!(g.ternary(0, 1), vec![1]);
    }

    #[test]
    fn capped_policy_keeps_endpoints() {
        let w: Vec<f64> = (1..=50).map(|i| i as f64 / 10.0).collect();
        let g = WeightGrid::new(&w, GridPolicy::Capped(5)).unwrap();
        assert_eq!(g.shape(), (1, 5));
        assert_eq!(g.pos_active(0), 0);
        assert_eq!(g.pos_active(4), 50);
        assert_eq!("capped:5".parse::<GridPolicy>().unwrap(), GridPolicy::Capped(5));
        assert!("capped:1".parse::<GridPolicy>().is_err());
    }
}
