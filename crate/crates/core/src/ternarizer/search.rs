use crate::error::Result;

use super::score::Surface;

/// Best candidate found by a search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Found {
    pub a: usize,
    pub b: usize,
    pub score: f64,
    /// Distinct grid cells scored.
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SearchKind {
    Exhaustive,
    Dichotomic,
    /// Dichotomic first, then exhaustive because the score fell short of ε.
    Escalated,
}

impl SearchKind {
    pub fn name(self) -> &'static str {
        match self {
            SearchKind::Exhaustive => "exhaustive",
            SearchKind::Dichotomic => "dichotomic",
            SearchKind::Escalated => "escalated",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOutcome {
    pub found: Found,
    pub kind: SearchKind,
    /// Score of the dichotomic pass, when one ran.
    pub dichotomic_score: Option<f64>,
    /// Grid cells scored across all passes.
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Cand {
    a: usize,
    b: usize,
    score: f64,
    nonzeros: usize,
    spread: f64,
}

/// Total order on candidates: score, then sparser, then wider thresholds,
/// then the smaller grid index.
fn beats(x: &Cand, y: &Cand) -> bool {
    if x.score != y.score {
        return x.score > y.score;
    }
    if x.nonzeros != y.nonzeros {
        return x.nonzeros < y.nonzeros;
    }
    if x.spread != y.spread {
        return x.spread > y.spread;
    }
    (x.a, x.b) < (y.a, y.b)
}

struct Memo<'s, S: Surface> {
    surface: &'s mut S,
    cols: usize,
    seen: Vec<Option<f64>>,
    evaluations: usize,
    best: Option<Cand>,
}

impl<'s, S: Surface> Memo<'s, S> {
    fn new(surface: &'s mut S) -> Self {
        let (rows, cols) = surface.shape();
        Memo {
            surface,
            cols,
            seen: vec![None; rows * cols],
            evaluations: 0,
            best: None,
        }
    }

    fn eval(&mut self, a: usize, b: usize) -> Result<Cand> {
        let slot = a * self.cols + b;
        let score = match self.seen[slot] {
            Some(s) => s,
            None => {
                let s = self.surface.score(a, b)?;
                self.seen[slot] = Some(s);
                self.evaluations += 1;
                s
            }
        };
        let c = Cand {
            a,
            b,
            score,
            nonzeros: self.surface.nonzeros(a, b),
            spread: self.surface.spread(a, b),
        };
        if self.best.is_none_or(|best| beats(&c, &best)) {
            self.best = Some(c);
        }
        Ok(c)
    }

    fn finish(self) -> Found {
        let best = self.best.expect("at least one candidate evaluated");
        Found {
            a: best.a,
            b: best.b,
            score: best.score,
            evaluations: self.evaluations,
        }
    }
}

/// Scores every candidate.
pub fn exhaustive_search<S: Surface>(surface: &mut S) -> Result<Found> {
    let (rows, cols) = surface.shape();
    let mut memo = Memo::new(surface);
    for a in 0..rows {
        for b in 0..cols {
            memo.eval(a, b)?;
        }
    }
    Ok(memo.finish())
}

/// Interval kept after probing `p1 < p2` inside `[lo, hi]`. The side beyond
/// the worse probe is dropped; on a tie the peak of a unimodal function lies
/// between the probes.
fn narrow(lo: usize, hi: usize, p1: usize, p2: usize, s1: f64, s2: f64) -> (usize, usize) {
    if s1 > s2 {
        (lo, p2)
    } else if s2 > s1 {
        (p1, hi)
    } else {
        (p1, p2)
    }
}

/// Lines up to this many cells are scanned in full.
const LINE_SCAN_MAX: usize = 32;

/// Best cell on a line through the grid; `at(i)` maps a line position in
/// `[lo, hi]` to a cell. Short lines are scanned. On longer ones about
/// 2 log2(len) evenly spaced positions are scored first, then a ternary
/// search runs between the neighbours of the best one.
fn line_max<S: Surface>(
    memo: &mut Memo<'_, S>,
    lo: usize,
    hi: usize,
    at: impl Fn(usize) -> (usize, usize),
) -> Result<Cand> {
    let score = |memo: &mut Memo<'_, S>, i: usize| {
        let c = at(i);
        memo.eval(c.0, c.1)
    };
    let len = hi - lo;
    let samples = 2 * (usize::BITS - (len + 1).leading_zeros()) as usize + 1;
    let (mut l, mut h) = (lo, hi);
    if len + 1 > LINE_SCAN_MAX.max(samples) {
        let pos = |k: usize| lo + k * len / (samples - 1);
        let mut best = (0, score(memo, pos(0))?);
        for k in 1..samples {
            let c = score(memo, pos(k))?;
            if beats(&c, &best.1) {
                best = (k, c);
            }
        }
        l = pos(best.0.saturating_sub(1));
        h = pos((best.0 + 1).min(samples - 1));
    }
    while h - l + 1 > 3 && len + 1 > LINE_SCAN_MAX {
        let span = h - l;
        let (p1, p2) = (l + span / 3, l + 2 * span / 3);
        let s1 = score(memo, p1)?.score;
        let s2 = score(memo, p2)?.score;
        (l, h) = narrow(l, h, p1, p2, s1, s2);
    }
    let mut best: Option<Cand> = None;
    for i in l..=h {
        let cand = score(memo, i)?;
        if best.is_none_or(|b| beats(&cand, &b)) {
            best = Some(cand);
        }
    }
    Ok(best.expect("non-empty line"))
}

/// Pivot search that keeps two thirds of the grid per step.
///
/// Two pivot lines split the longer axis into thirds; the line maximum of
/// each is found by ternary search along the other axis, and the third
/// beyond the losing pivot is dropped. Once nine or fewer cells remain they
/// are all scored. Finds the optimum whenever the line maxima are unimodal.
pub fn dichotomic_search<S: Surface>(surface: &mut S) -> Result<Found> {
    let (rows, cols) = surface.shape();
    let mut memo = Memo::new(surface);
    let (mut r0, mut r1, mut c0, mut c1) = (0, rows - 1, 0, cols - 1);
    while (r1 - r0 + 1) * (c1 - c0 + 1) > 9 {
        if r1 - r0 >= c1 - c0 {
            let len = r1 - r0;
            let (p1, p2) = (r0 + len / 3, r0 + 2 * len / 3);
            let m1 = line_max(&mut memo, c0, c1, |i| (p1, i))?.score;
            let m2 = line_max(&mut memo, c0, c1, |i| (p2, i))?.score;
            (r0, r1) = narrow(r0, r1, p1, p2, m1, m2);
        } else {
            let len = c1 - c0;
            let (p1, p2) = (c0 + len / 3, c0 + 2 * len / 3);
            let m1 = line_max(&mut memo, r0, r1, |i| (i, p1))?.score;
            let m2 = line_max(&mut memo, r0, r1, |i| (i, p2))?.score;
            (c0, c1) = narrow(c0, c1, p1, p2, m1, m2);
        }
    }
    for a in r0..=r1 {
        for b in c0..=c1 {
            memo.eval(a, b)?;
        }
    }
    Ok(memo.finish())
}

/// Breaks score ties between two finished searches the same way the searches do.
fn prefer<S: Surface>(surface: &S, x: Found, y: Found) -> Found {
    let cand = |f: &Found| Cand {
        a: f.a,
        b: f.b,
        score: f.score,
        nonzeros: surface.nonzeros(f.a, f.b),
        spread: surface.spread(f.a, f.b),
    };
    if beats(&cand(&y), &cand(&x)) {
        y
    } else {
        x
    }
}

/// Dichotomic search, escalated to exhaustive when the normalized score
/// `score / norm` is below `epsilon`. `epsilon >= 1` always runs exhaustive
/// only, `epsilon <= 0` never escalates.
pub fn search_with_fallback<S: Surface>(surface: &mut S, epsilon: f64, norm: f64) -> Result<SearchOutcome> {
    if epsilon >= 1.0 {
        let found = exhaustive_search(surface)?;
        return Ok(SearchOutcome {
            found,
            kind: SearchKind::Exhaustive,
            dichotomic_score: None,
            evaluations: found.evaluations,
        });
    }
    let quick = dichotomic_search(surface)?;
    if epsilon <= 0.0 || quick.score / norm >= epsilon {
        return Ok(SearchOutcome {
            found: quick,
            kind: SearchKind::Dichotomic,
            dichotomic_score: Some(quick.score),
            evaluations: quick.evaluations,
        });
    }
    let full = exhaustive_search(surface)?;
    Ok(SearchOutcome {
        found: prefer(surface, full, quick),
        kind: SearchKind::Escalated,
        dichotomic_score: Some(quick.score),
        evaluations: quick.evaluations + full.evaluations,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::math::Rng;

    /// Table-backed surface for tests.
    pub struct Table {
        pub rows: usize,
        pub cols: usize,
        pub values: Vec<f64>,
    }

    impl Surface for Table {
        fn shape(&self) -> (usize, usize) {
            (self.rows, self.cols)
        }
        fn score(&mut self, a: usize, b: usize) -> Result<f64> {
            Ok(self.values[a * self.cols + b])
        }
        fn nonzeros(&self, a: usize, b: usize) -> usize {
            a + b
        }
        fn spread(&self, a: usize, b: usize) -> f64 {
            -((a + b) as f64)
        }
    }

    /// Strictly increasing then strictly decreasing sequence.
    pub fn unimodal_seq(rng: &mut Rng, n: usize) -> Vec<f64> {
        let peak = rng.below(n);
        let mut v = vec![0.0; n];
        for i in (0..peak).rev() {
            v[i] = v[i + 1] - 0.1 - rng.unit();
        }
        for i in peak + 1..n {
            v[i] = v[i - 1] - 0.1 - rng.unit();
        }
        v
    }

    pub fn unimodal_table(rng: &mut Rng, rows: usize, cols: usize) -> Table {
        let f = unimodal_seq(rng, rows);
        let g = unimodal_seq(rng, cols);
        let values = (0..rows * cols).map(|i| f[i / cols] + g[i % cols]).collect();
        Table { rows, cols, values }
    }

    #[test]
    fn single_candidate() {
        let mut t = Table {
            rows: 1,
            cols: 1,
            values: vec![0.25],
        };
        assert_eq!(dichotomic_search(&mut t).unwrap().score, 0.25);
        assert_eq!(exhaustive_search(&mut t).unwrap().evaluations, 1);
    }

    #[test]
    fn unimodal_surfaces_are_solved_exactly() {
        let mut rng = Rng::new(41);
        for _ in 0..200 {
            let (rows, cols) = (1 + rng.below(30), 1 + rng.below(30));
            let mut t = unimodal_table(&mut rng, rows, cols);
            let ex = exhaustive_search(&mut t).unwrap();
            let di = dichotomic_search(&mut t).unwrap();
            assert_eq!((di.a, di.b, di.score), (ex.a, ex.b, ex.score));
        }
    }

    #[test]
    fn ties_prefer_sparser_candidates() {
        let mut t = Table {
            rows: 2,
            cols: 2,
            values: vec![1.0, 1.0, 1.0, 0.0],
        };
        let f = exhaustive_search(&mut t).unwrap();
        assert_eq!((f.a, f.b), (0, 0));
    }

    #[test]
    fn fallback_policies() {
        let mut rng = Rng::new(42);
        for _ in 0..50 {
            let (rows, cols) = (2 + rng.below(20), 2 + rng.below(20));
            let values: Vec<f64> = (0..rows * cols).map(|_| rng.unit()).collect();
            let mut t = Table { rows, cols, values };
            let ex = exhaustive_search(&mut t).unwrap();
            let di = dichotomic_search(&mut t).unwrap();
            let never = search_with_fallback(&mut t, 0.0, 1.0).unwrap();
            assert_eq!(never.found, di);
            assert_eq!(never.kind, SearchKind::Dichotomic);
            let always = search_with_fallback(&mut t, 1.0, 1.0).unwrap();
            assert_eq!(always.found, ex);
            let some = search_with_fallback(&mut t, 0.999, 1.0).unwrap();
            assert!(some.found.score >= di.score);
            if some.kind == SearchKind::Escalated {
                assert_eq!(some.found.score, ex.score);
            }
        }
    }

    #[test]
    fn evaluation_count_grows_like_log_squared() {
        let mut rng = Rng::new(43);
        let mut worst: f64 = 0.0;
        for side in [10usize, 20, 50, 100, 200, 400, 800] {
            let mut t = unimodal_table(&mut rng, side, side);
            let n = dichotomic_search(&mut t).unwrap().evaluations as f64;
            let l = ((side * side) as f64).log2();
            worst = worst.max(n / (l * l));
        }
        assert!(worst < 3.0, "evaluations / log2(np)^2 reached {worst}");
    }
}
