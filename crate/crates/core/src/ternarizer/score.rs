use crate::error::{Error, Result};
use crate::teacher::TernaryDist;

use super::kde::IntDensity;
use super::thresholds::discriminants;
use super::weights::{ternarize_weights, WeightGrid};

/// Student-side probe inputs for one layer, stored column by column.
#[derive(Clone, Debug)]
pub struct ProbeInputs {
    count: usize,
    dim: usize,
    columns: Vec<i8>,
    live: Vec<bool>,
}

impl ProbeInputs {
    /// `rows` is `count x dim`, row-major.
    pub fn from_rows(count: usize, dim: usize, rows: &[i8]) -> Result<Self> {
        if rows.len() != count * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {count} probes of dim {dim}",
                rows.len()
            )));
        }
        if count == 0 {
            return Err(Error::Empty("probe set".into()));
        }
        let mut columns = vec![0i8; rows.len()];
        for d in 0..count {
            for j in 0..dim {
                columns[j * count + d] = rows[d * dim + j];
            }
        }
        let live = (0..dim)
            .map(|j| columns[j * count..(j + 1) * count].iter().any(|&v| v != 0))
            .collect();
        Ok(ProbeInputs {
            count,
            dim,
            columns,
            live,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn column(&self, j: usize) -> &[i8] {
        &self.columns[j * self.count..(j + 1) * self.count]
    }

    /// Whether input `j` is nonzero on at least one probe.
    pub fn is_live(&self, j: usize) -> bool {
        self.live[j]
    }

    pub fn row(&self, d: usize) -> Vec<i8> {
        (0..self.dim).map(|j| self.columns[j * self.count + d]).collect()
    }
}

/// What a student neuron should reproduce on each probe: the teacher's
/// most likely output and that output's probability.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronTargets {
    pub reference: Vec<i8>,
    pub weight: Vec<f64>,
}

impl NeuronTargets {
    pub fn from_dists(dists: &[TernaryDist]) -> Self {
        let reference: Vec<i8> = dists.iter().map(TernaryDist::most_likely).collect();
        let weight = dists.iter().zip(&reference).map(|(d, &r)| d.prob(r)).collect();
        NeuronTargets { reference, weight }
    }

    /// +1 where the label is `class`, -1 elsewhere, each with weight 1.
    pub fn from_labels(labels: &[usize], class: usize) -> Self {
        NeuronTargets {
            reference: labels.iter().map(|&l| if l == class { 1 } else { -1 }).collect(),
            weight: vec![1.0; labels.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }
}

/// Reusable buffers for [`score_outputs`].
#[derive(Default)]
pub(crate) struct ScoreScratch {
    clusters: [IntDensity; 3],
}

/// Score and thresholds for given integer transfer outputs.
pub(crate) fn score_outputs(
    y: &[i32],
    targets: &NeuronTargets,
    fan_in: usize,
    scratch: &mut ScoreScratch,
) -> Result<(f64, i32, i32)> {
    let (mut lo, mut hi) = (i32::MAX, i32::MIN);
    for &v in y {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let [m, z, p] = &mut scratch.clusters;
    for c in [&mut *m, &mut *z, &mut *p] {
        c.reset(lo, hi);
    }
    for (&v, &r) in y.iter().zip(&targets.reference) {
        match r {
            -1 => m.add(v),
            0 => z.add(v),
            _ => p.add(v),
        }
    }
    for c in [&mut *m, &mut *z, &mut *p] {
        c.finish();
    }
    let (b_lo, b_hi) = discriminants(m, z, p)?;
    let bound = fan_in as i32;
    let (b_lo, b_hi) = (b_lo.clamp(-bound, bound), b_hi.clamp(-bound, bound));
    let mut score = 0.0;
    for ((&v, &r), &w) in y.iter().zip(&targets.reference).zip(&targets.weight) {
        let out = if v < b_lo {
            -1
        } else if v > b_hi {
            1
        } else {
            0
        };
        if out == r {
            score += w;
        }
    }
    Ok((score, b_lo, b_hi))
}

/// Score of ternarizing real weights `w` at `(t_lo, t_hi)`.
///
/// The student's firing thresholds are refit to the resulting ternary
/// weights before scoring, so this is exactly the value a search sees.
pub fn score_config(probes: &ProbeInputs, targets: &NeuronTargets, w: &[f64], t_lo: f64, t_hi: f64) -> Result<f64> {
    Ok(score_config_full(probes, targets, w, t_lo, t_hi)?.0)
}

/// As [`score_config`], also returning `(b_lo, b_hi)`.
pub fn score_config_full(
    probes: &ProbeInputs,
    targets: &NeuronTargets,
    w: &[f64],
    t_lo: f64,
    t_hi: f64,
) -> Result<(f64, i32, i32)> {
    check_shapes(probes, targets, w.len())?;
    let tern = ternarize_weights(w, t_lo, t_hi)?;
    let mut y = vec![0i32; probes.len()];
    for (j, &t) in tern.iter().enumerate() {
        if t == 0 {
            continue;
        }
        for (acc, &x) in y.iter_mut().zip(probes.column(j)) {
            if t > 0 {
                *acc += x as i32;
            } else {
                *acc -= x as i32;
            }
        }
    }
    score_outputs(&y, targets, w.len(), &mut ScoreScratch::default())
}

fn check_shapes(probes: &ProbeInputs, targets: &NeuronTargets, fan_in: usize) -> Result<()> {
    if targets.is_empty() || probes.is_empty() {
        return Err(Error::Empty("probe set".into()));
    }
    if targets.len() != probes.len() || targets.weight.len() != probes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} probes",
            targets.len(),
            probes.len()
        )));
    }
    if fan_in != probes.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{fan_in} weights for probes of dim {}",
            probes.dim()
        )));
    }
    Ok(())
}

/// Anything the grid searches can optimize over.
pub trait Surface {
    /// (rows, cols) of the candidate grid.
    fn shape(&self) -> (usize, usize);
    fn score(&mut self, a: usize, b: usize) -> Result<f64>;
    /// Nonzero weight count of a candidate; fewer wins ties.
    fn nonzeros(&self, a: usize, b: usize) -> usize;
    /// |t_lo| + |t_hi| of a candidate; larger wins remaining ties.
    fn spread(&self, a: usize, b: usize) -> f64;
}

/// Cumulative transfer contributions along one grid axis. Inputs that are
/// zero on every probe are skipped, so candidates differing only in those
/// weights share a key.
struct AxisTable {
    keys: Vec<usize>,
    sums: Vec<i32>,
}

impl AxisTable {
    fn build(probes: &ProbeInputs, order: &[usize], active: impl Iterator<Item = usize>) -> AxisTable {
        let n = probes.len();
        let mut live_before = Vec::with_capacity(order.len() + 1);
        live_before.push(0);
        let mut sums = vec![0i32; n];
        let mut live = 0;
        for &j in order {
            if probes.is_live(j) {
                live += 1;
                let start = sums.len() - n;
                sums.extend_from_within(start..);
                let row = &mut sums[live * n..];
                for (acc, &x) in row.iter_mut().zip(probes.column(j)) {
                    *acc += x as i32;
                }
            }
            live_before.push(live);
        }
        AxisTable {
            keys: active.map(|k| live_before[k]).collect(),
            sums,
        }
    }

    fn row(&self, key: usize, n: usize) -> &[i32] {
        &self.sums[key * n..(key + 1) * n]
    }
}

/// What a candidate is scored against.
enum Objective<'a> {
    /// Reproduce per-probe teacher outputs.
    Mimic(&'a NeuronTargets),
    /// Count probes classified correctly by the argmax over output neurons,
    /// given the strongest competing neuron on each probe.
    Argmax {
        neuron: usize,
        rivals: &'a [(i32, usize)],
        labels: &'a [usize],
    },
}

/// Score surface of one neuron over its weight-threshold grid.
pub struct NeuronSurface<'a> {
    grid: &'a WeightGrid,
    probes: &'a ProbeInputs,
    objective: Objective<'a>,
    neg: AxisTable,
    pos: AxisTable,
    memo: Vec<Option<(f64, i32, i32)>>,
    memo_cols: usize,
    y: Vec<i32>,
    scratch: ScoreScratch,
    distinct: usize,
}

impl<'a> NeuronSurface<'a> {
    pub fn new(grid: &'a WeightGrid, probes: &'a ProbeInputs, targets: &'a NeuronTargets) -> Result<Self> {
        check_shapes(probes, targets, grid.weights().len())?;
        Ok(Self::build(grid, probes, Objective::Mimic(targets)))
    }

    /// Surface whose score is the number of probes the whole output layer
    /// classifies correctly when neuron `neuron` takes the candidate weights.
    /// `rivals[d]` is the largest transfer value among the other output
    /// neurons on probe `d` and its index.
    pub fn argmax(
        grid: &'a WeightGrid,
        probes: &'a ProbeInputs,
        neuron: usize,
        rivals: &'a [(i32, usize)],
        labels: &'a [usize],
    ) -> Result<Self> {
        if rivals.len() != probes.len() || labels.len() != probes.len() {
            return Err(Error::DimensionMismatch(
                "rivals or labels do not cover the probes".into(),
            ));
        }
        if grid.weights().len() != probes.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for probes of dim {}",
                grid.weights().len(),
                probes.dim()
            )));
        }
        Ok(Self::build(grid, probes, Objective::Argmax { neuron, rivals, labels }))
    }

    fn build(grid: &'a WeightGrid, probes: &'a ProbeInputs, objective: Objective<'a>) -> Self {
        let (rows, cols) = grid.shape();
        let neg = AxisTable::build(probes, grid.neg_order(), (0..rows).map(|a| grid.neg_active(a)));
        let pos = AxisTable::build(probes, grid.pos_order(), (0..cols).map(|b| grid.pos_active(b)));
        let neg_keys = neg.keys.last().map_or(0, |&k| k) + 1;
        let memo_cols = pos.keys.last().map_or(0, |&k| k) + 1;
        NeuronSurface {
            grid,
            probes,
            objective,
            neg,
            pos,
            memo: vec![None; neg_keys * memo_cols],
            memo_cols,
            y: vec![0; probes.len()],
            scratch: ScoreScratch::default(),
            distinct: 0,
        }
    }

    pub fn grid(&self) -> &WeightGrid {
        self.grid
    }

    /// Score of a candidate, plus its firing thresholds when the objective
    /// is mimicry (zeros otherwise).
    pub fn evaluate(&mut self, a: usize, b: usize) -> Result<(f64, i32, i32)> {
        let (ka, kb) = (self.neg.keys[a], self.pos.keys[b]);
        let slot = ka * self.memo_cols + kb;
        if let Some(hit) = self.memo[slot] {
            return Ok(hit);
        }
        let n = self.probes.len();
        let (neg, pos) = (self.neg.row(ka, n), self.pos.row(kb, n));
        for ((y, &p), &m) in self.y.iter_mut().zip(pos).zip(neg) {
            *y = p - m;
        }
        let out = match &self.objective {
            Objective::Mimic(targets) => score_outputs(&self.y, targets, self.grid.weights().len(), &mut self.scratch)?,
            Objective::Argmax { neuron, rivals, labels } => {
                let correct = self
                    .y
                    .iter()
                    .zip(rivals.iter())
                    .zip(labels.iter())
                    .filter(|((&y, &(ry, ri)), &l)| {
                        let wins = y > ry || (y == ry && *neuron < ri);
                        l == if wins { *neuron } else { ri }
                    })
                    .count();
                (correct as f64, 0, 0)
            }
        };
        self.memo[slot] = Some(out);
        self.distinct += 1;
        Ok(out)
    }

    /// Number of distinct ternary outcomes scored so far.
    pub fn distinct_evaluations(&self) -> usize {
        self.distinct
    }

    /// Integer transfer outputs of a candidate on every probe.
    pub fn outputs(&self, a: usize, b: usize) -> Vec<i32> {
        let n = self.probes.len();
        let (neg, pos) = (self.neg.row(self.neg.keys[a], n), self.pos.row(self.pos.keys[b], n));
        pos.iter().zip(neg).map(|(&p, &m)| p - m).collect()
    }
}

impl Surface for NeuronSurface<'_> {
    fn shape(&self) -> (usize, usize) {
        self.grid.shape()
    }

    fn score(&mut self, a: usize, b: usize) -> Result<f64> {
        Ok(self.evaluate(a, b)?.0)
    }

    fn nonzeros(&self, a: usize, b: usize) -> usize {
        self.grid.nonzeros(a, b)
    }

    fn spread(&self, a: usize, b: usize) -> f64 {
        self.grid.spread(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;
    use crate::ternarizer::GridPolicy;

    fn fixture(rng: &mut Rng, n: usize, dim: usize) -> (ProbeInputs, NeuronTargets, Vec<f64>) {
        let rows: Vec<i8> = (0..n * dim).map(|_| rng.below(3) as i8 - 1).collect();
        let probes = ProbeInputs::from_rows(n, dim, &rows).unwrap();
        let w: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let dists: Vec<TernaryDist> = (0..n)
            .map(|d| {
                let y: f64 = (0..dim).map(|j| w[j] * rows[d * dim + j] as f64).sum();
                TernaryDist::from_rho(y.tanh())
            })
            .collect();
        (probes, NeuronTargets::from_dists(&dists), w)
    }

    #[test]
    fn perfect_mimicry_of_silent_teacher() {
        let probes = ProbeInputs::from_rows(4, 2, &[1, 0, 0, 1, -1, 1, 0, 0]).unwrap();
        let targets = NeuronTargets {
            reference: vec![0; 4],
            weight: vec![1.0; 4],
        };
        let s = score_config(&probes, &targets, &[0.5, -0.5], -0.5, 0.5).unwrap();
        assert_eq!(s, 4.0);
    }

    #[test]
    fn never_matching_scores_zero() {
        // Identical inputs with opposite references: both clusters sit on one
        // value, the crossing lands on it, and the student outputs 0 there.
        let probes = ProbeInputs::from_rows(2, 2, &[1, -1, 1, -1]).unwrap();
        let targets = NeuronTargets {
            reference: vec![1, -1],
            weight: vec![0.8, 0.9],
        };
        assert_eq!(score_config(&probes, &targets, &[0.4, -0.3], -0.1, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn surface_agrees_with_direct_scoring() {
        let mut rng = Rng::new(31);
        for _ in 0..10 {
            let (probes, targets, w) = fixture(&mut rng, 40, 9);
            let grid = WeightGrid::new(&w, GridPolicy::Full).unwrap();
            let mut s = NeuronSurface::new(&grid, &probes, &targets).unwrap();
            let (rows, cols) = grid.shape();
            for a in 0..rows {
                for b in 0..cols {
                    let direct = score_config_full(&probes, &targets, &w, grid.t_lo(a), grid.t_hi(b)).unwrap();
                    assert_eq!(s.evaluate(a, b).unwrap(), direct);
                }
            }
        }
    }

    #[test]
    fn dead_inputs_share_memo_entries() {
        let rows = [1i8, 0, -1, 1, 0, 1, 0, 0, 1];
        let probes = ProbeInputs::from_rows(3, 3, &rows).unwrap();
        assert!(!probes.is_live(1));
        let targets = NeuronTargets::from_labels(&[0, 1, 0], 0);
        let w = [0.2, 0.9, 0.5];
        let grid = WeightGrid::new(&w, GridPolicy::Full).unwrap();
        let mut s = NeuronSurface::new(&grid, &probes, &targets).unwrap();
        for b in 0..4 {
            s.evaluate(0, b).unwrap();
        }
        // Column 1 (the largest weight, input always zero) adds nothing.
        assert_eq!(s.distinct_evaluations(), 3);
    }

    #[test]
    fn probe_order_does_not_matter() {
        let mut rng = Rng::new(32);
        let (probes, targets, w) = fixture(&mut rng, 30, 6);
        let mut perm: Vec<usize> = (0..30).collect();
        rng.shuffle(&mut perm);
        let rows: Vec<i8> = perm.iter().flat_map(|&d| probes.row(d)).collect();
        let shuffled = ProbeInputs::from_rows(30, 6, &rows).unwrap();
        let t2 = NeuronTargets {
            reference: perm.iter().map(|&d| targets.reference[d]).collect(),
            weight: perm.iter().map(|&d| targets.weight[d]).collect(),
        };
        for (lo, hi) in [(-0.3, 0.2), (-1.0, 0.0), (0.0, 0.5)] {
            let a = score_config(&probes, &targets, &w, lo, hi).unwrap();
            let b = score_config(&shuffled, &t2, &w, lo, hi).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }
}
