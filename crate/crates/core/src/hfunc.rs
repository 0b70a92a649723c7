//! Piecewise-linear, concave, eventually constant functions on the real line.
//!
//! A function of this class is determined by its kinks ("singular values")
//! `x_1 < ... < x_N`, the values `v_k = f(x_k)` and the slope left of `x_1`.
//! Between kinks it is linear, left of `x_1` it continues with `slope_left`
//! and right of `x_N` it is constant. Segment slopes strictly decrease and
//! stay positive, so the function is increasing up to its plateau `v_N`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// A class-ℋ function stored by its singular values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "HFuncRecord<T>",
    into = "HFuncRecord<T>",
    bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct HFunc<T> {
    xs: Vec<T>,
    vs: Vec<T>,
    slope_left: T,
}

/// Flat on-disk form `{xs, vs, slope_left}`; validated on the way in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HFuncRecord<T> {
    pub xs: Vec<T>,
    pub vs: Vec<T>,
    pub slope_left: T,
}

impl<T: Scalar> TryFrom<HFuncRecord<T>> for HFunc<T> {
    type Error = Error;

    fn try_from(r: HFuncRecord<T>) -> Result<Self> {
        HFunc::new(r.xs, r.vs, r.slope_left)
    }
}

impl<T: Scalar> From<HFunc<T>> for HFuncRecord<T> {
    fn from(f: HFunc<T>) -> Self {
        HFuncRecord {
            xs: f.xs,
            vs: f.vs,
            slope_left: f.slope_left,
        }
    }
}

#[inline]
fn chord<T: Scalar>(x0: T, v0: T, x1: T, v1: T) -> T {
    (v1 - v0) / (x1 - x0)
}

impl<T: Scalar> HFunc<T> {
    /// Builds a function from its kinks, checking every invariant exactly.
    pub fn new(xs: Vec<T>, vs: Vec<T>, slope_left: T) -> Result<Self> {
        let f = HFunc { xs, vs, slope_left };
        f.validate()?;
        Ok(f)
    }

    /// `x ↦ v + slope·min(x − x0, 0)`: a single kink at `x0`.
    pub fn single(x0: T, v: T, slope: T) -> Result<Self> {
        Self::new(vec![x0], vec![v], slope)
    }

    /// Builds a function from sorted `(x, v)` samples that are concave up to
    /// rounding. Points closer than the merge tolerance collapse onto the
    /// left one; points whose left and right slopes agree to the relative
    /// slope tolerance are dropped, as is a trailing flat segment. A genuine
    /// loss of concavity is still an error.
    pub fn from_points(points: &[(T, T)], slope_left: T) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidFunction("no singular values".into()));
        }
        let mut xs: Vec<T> = Vec::with_capacity(points.len());
        let mut vs: Vec<T> = Vec::with_capacity(points.len());
        for &(x, v) in points {
            if !x.is_finite() || !v.is_finite() {
                return Err(Error::InvalidFunction("non-finite sample".into()));
            }
            if let Some(&last) = xs.last() {
                if x < last {
                    return Err(Error::InvalidFunction("samples not sorted".into()));
                }
                if x - last <= T::merge_tol(last) {
                    continue;
                }
            }
            xs.push(x);
            vs.push(v);
            // Drop the second-to-last point while it is not a real kink.
            while xs.len() >= 2 {
                let n = xs.len();
                let right = chord(xs[n - 2], vs[n - 2], xs[n - 1], vs[n - 1]);
                let left = if n == 2 {
                    slope_left
                } else {
                    chord(xs[n - 3], vs[n - 3], xs[n - 2], vs[n - 2])
                };
                // Vertical gap between the middle sample and the line through
                // its neighbours; rounding in the values alone can flip its sign.
                let gap = if n == 2 {
                    (left - right) * (xs[n - 1] - xs[n - 2])
                } else {
                    (left - right) * (xs[n - 2] - xs[n - 3]) * (xs[n - 1] - xs[n - 2])
                        / (xs[n - 1] - xs[n - 3])
                };
                let scale = vs[n - 2].abs().max(vs[n - 1].abs()).max(if n == 2 {
                    T::zero()
                } else {
                    vs[n - 3].abs()
                });
                if T::near(left, right) || gap.abs() <= T::rel_tol() * scale {
                    xs.remove(n - 2);
                    vs.remove(n - 2);
                } else if left < right {
                    return Err(Error::InvalidFunction(format!(
                        "slope increases from {left:e} to {right:e} at x = {:e}",
                        xs[n - 2]
                    )));
                } else {
                    break;
                }
            }
        }
        // The plateau starts at the last kink; a non-increasing tail is not a kink.
        while xs.len() >= 2 {
            let n = xs.len();
            let s = chord(xs[n - 2], vs[n - 2], xs[n - 1], vs[n - 1]);
            if s <= T::zero() || T::near(s, T::zero()) {
                xs.pop();
                vs.pop();
            } else {
                break;
            }
        }
        Self::new(xs, vs, slope_left)
    }

    /// Checks the class invariants: sorted kinks, strictly decreasing
    /// positive slopes, finite data.
    pub fn validate(&self) -> Result<()> {
        let n = self.xs.len();
        if n == 0 {
            return Err(Error::InvalidFunction("no singular values".into()));
        }
        if self.vs.len() != n {
            return Err(Error::InvalidFunction(format!(
                "{} singular values but {} values",
                n,
                self.vs.len()
            )));
        }
        if !self.slope_left.is_finite() || self.slope_left <= T::zero() {
            return Err(Error::InvalidFunction(format!(
                "left slope must be positive, got {:e}",
                self.slope_left
            )));
        }
        if self.xs.iter().chain(self.vs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction("non-finite entry".into()));
        }
        let mut prev = self.slope_left;
        for k in 0..n - 1 {
            if self.xs[k + 1] <= self.xs[k] {
                return Err(Error::InvalidFunction(format!(
                    "singular values not strictly increasing at index {k}"
                )));
            }
            let s = chord(self.xs[k], self.vs[k], self.xs[k + 1], self.vs[k + 1]);
            if !(s < prev) {
                return Err(Error::InvalidFunction(format!(
                    "slope {s:e} after x = {:e} does not decrease from {prev:e}",
                    self.xs[k]
                )));
            }
            prev = s;
        }
        if !(prev > T::zero()) {
            return Err(Error::InvalidFunction(format!(
                "last segment slope {prev:e} is not positive"
            )));
        }
        Ok(())
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn vs(&self) -> &[T] {
        &self.vs
    }

    pub fn slope_left(&self) -> T {
        self.slope_left
    }

    /// Number of singular values.
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// The constant value attained for `x ≥ x_N`.
    pub fn plateau(&self) -> T {
        self.vs[self.vs.len() - 1]
    }

    pub fn first_kink(&self) -> T {
        self.xs[0]
    }

    pub fn last_kink(&self) -> T {
        self.xs[self.xs.len() - 1]
    }

    /// Slope of the segment `(x_k, x_{k+1})`, zero-based `k`.
    fn segment_slope(&self, k: usize) -> T {
        chord(self.xs[k], self.vs[k], self.xs[k + 1], self.vs[k + 1])
    }

    /// Iterator over the slopes left of each singular value.
    pub fn left_slopes(&self) -> impl Iterator<Item = T> + '_ {
        std::iter::once(self.slope_left).chain((0..self.len() - 1).map(|k| self.segment_slope(k)))
    }

    /// Exact evaluation; total on the real line.
    pub fn evaluate(&self, x: T) -> T {
        let idx = self.xs.partition_point(|&xi| xi <= x);
        if idx == 0 {
            self.vs[0] + self.slope_left * (x - self.xs[0])
        } else if idx == self.xs.len() {
            self.plateau()
        } else {
            let k = idx - 1;
            self.vs[k] + (x - self.xs[k]) * self.segment_slope(k)
        }
    }

    /// Left derivative at the `k`-th singular value (one-based, as `x_1..x_N`).
    pub fn left_slope_at(&self, k: usize) -> Result<T> {
        if k == 0 || k > self.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.len(),
            });
        }
        Ok(if k == 1 {
            self.slope_left
        } else {
            self.segment_slope(k - 2)
        })
    }

    /// Left derivative at an arbitrary point.
    pub fn left_derivative(&self, x: T) -> T {
        // Index of the first kink ≥ x; the slope arriving there applies.
        let idx = self.xs.partition_point(|&xi| xi < x);
        if idx == 0 {
            self.slope_left
        } else if idx == self.xs.len() {
            T::zero()
        } else {
            self.segment_slope(idx - 1)
        }
    }

    /// `w ↦ f(w − c)`: kinks move right by `c`, values and slopes unchanged.
    pub fn shifted(&self, c: T) -> Self {
        HFunc {
            xs: self.xs.iter().map(|&x| x + c).collect(),
            vs: self.vs.clone(),
            slope_left: self.slope_left,
        }
    }

    /// Smallest `x` with `f(x) = y`. Every `y` up to the plateau has one.
    pub fn invert(&self, y: T) -> Result<T> {
        let plateau = self.plateau();
        if !(y <= plateau) {
            return Err(Error::AbovePlateau {
                target: y.to_f64().unwrap_or(f64::NAN),
                plateau: plateau.to_f64().unwrap_or(f64::NAN),
            });
        }
        if y == plateau {
            return Ok(self.last_kink());
        }
        if y <= self.vs[0] {
            return Ok(self.xs[0] + (y - self.vs[0]) / self.slope_left);
        }
        // vs is strictly increasing; find k with v_k ≤ y < v_{k+1}.
        let k = self.vs.partition_point(|&v| v <= y) - 1;
        let (x0, x1, v0, v1) = (self.xs[k], self.xs[k + 1], self.vs[k], self.vs[k + 1]);
        Ok(x0 + (y - v0) * (x1 - x0) / (v1 - v0))
    }

    /// Greedy ε-simplification.
    ///
    /// Starting from the first kink, jump to the furthest kink whose chord
    /// stays within `eps` of `f`, drop everything in between and repeat.
    /// The first and last kinks and the behaviour outside them are kept, so
    /// `sup |f − prune(f)| ≤ eps`.
    pub fn prune(&self, eps: T) -> Self {
        let n = self.len();
        if n <= 2 || !(eps > T::zero()) {
            return self.clone();
        }
        let mut keep = Vec::with_capacity(n);
        keep.push(0usize);
        let mut anchor = 0usize;
        while anchor < n - 1 {
            let mut next = anchor + 1;
            for i in anchor + 2..n {
                if self.chord_gap(anchor, i) <= eps {
                    next = i;
                } else {
                    // The gap only grows with i for a concave function.
                    break;
                }
            }
            keep.push(next);
            anchor = next;
        }
        if keep.len() == n {
            return self.clone();
        }
        let pts: Vec<(T, T)> = keep.iter().map(|&k| (self.xs[k], self.vs[k])).collect();
        // A subset of kinks of a concave function is concave; the normalising
        // constructor only guards against rounding.
        Self::from_points(&pts, self.slope_left).unwrap_or_else(|_| self.clone())
    }

    /// Largest distance between `f` and the chord joining kinks `a < b`.
    ///
    /// The maximum sits at the kink where segment slopes cross the chord
    /// slope, found by bisection; neighbours are checked against rounding.
    fn chord_gap(&self, a: usize, b: usize) -> T {
        let (xa, va) = (self.xs[a], self.vs[a]);
        let s = chord(xa, va, self.xs[b], self.vs[b]);
        // First j in (a, b) whose right segment slope is ≤ s.
        let (mut lo, mut hi) = (a + 1, b);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.segment_slope(mid) <= s {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let gap = |j: usize| self.vs[j] - (va + (self.xs[j] - xa) * s);
        let mut best = T::zero();
        for j in lo.saturating_sub(1).max(a + 1)..=(lo + 1).min(b - 1) {
            best = best.max(gap(j));
        }
        best
    }
}

/// Running evaluator for ascending query points, amortised O(1) per call.
struct Cursor<'a, T> {
    f: &'a HFunc<T>,
    idx: usize,
}

impl<'a, T: Scalar> Cursor<'a, T> {
    fn new(f: &'a HFunc<T>) -> Self {
        Cursor { f, idx: 0 }
    }

    fn eval(&mut self, x: T) -> T {
        let xs = &self.f.xs;
        while self.idx < xs.len() && xs[self.idx] <= x {
            self.idx += 1;
        }
        let f = self.f;
        if self.idx == 0 {
            f.vs[0] + f.slope_left * (x - xs[0])
        } else if self.idx == xs.len() {
            f.plateau()
        } else {
            let k = self.idx - 1;
            f.vs[k] + (x - xs[k]) * f.segment_slope(k)
        }
    }
}

/// `Σ c_i f_i` for non-negative weights.
///
/// The kinks of the result are the union of the inputs' kinks (near
/// duplicates merged, non-kinks dropped); values are the weighted sums.
pub fn conic_combine<T: Scalar>(terms: &[(T, &HFunc<T>)]) -> Result<HFunc<T>> {
    if terms.is_empty() {
        return Err(Error::EmptyCombination);
    }
    for &(w, _) in terms {
        if !w.is_finite() || w < T::zero() {
            return Err(Error::InvalidWeight(w.to_f64().unwrap_or(f64::NAN)));
        }
    }
    let active: Vec<(T, &HFunc<T>)> = terms
        .iter()
        .copied()
        .filter(|&(w, _)| w > T::zero())
        .collect();
    if active.is_empty() {
        return Err(Error::EmptyCombination);
    }
    if active.len() == 1 && active[0].0 == T::one() {
        return Ok(active[0].1.clone());
    }

    let mut grid: Vec<T> = active
        .iter()
        .flat_map(|(_, f)| f.xs.iter().copied())
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite kinks"));
    let mut union: Vec<T> = Vec::with_capacity(grid.len());
    for x in grid {
        match union.last() {
            Some(&last) if x - last <= T::merge_tol(last) => {}
            _ => union.push(x),
        }
    }

    let mut cursors: Vec<(T, Cursor<'_, T>)> =
        active.iter().map(|&(w, f)| (w, Cursor::new(f))).collect();
    let points: Vec<(T, T)> = union
        .iter()
        .map(|&x| {
            let v = cursors
                .iter_mut()
                .fold(T::zero(), |acc, (w, c)| acc + *w * c.eval(x));
            (x, v)
        })
        .collect();
    let slope_left = active
        .iter()
        .fold(T::zero(), |acc, &(w, f)| acc + w * f.slope_left);
    HFunc::from_points(&points, slope_left)
}

/// Samples a concave increasing utility at `n_points` equidistant kinks on
/// `[w_min, w_max]`; the result is constant beyond `w_max`.
///
/// The left slope is the backward difference `(u(w_min) − u(w_min − h))/h`
/// with `h = (w_max − w_min)/(10·n_points)`.
pub fn approximate_utility<T, F>(u: F, w_min: T, w_max: T, n_points: usize) -> Result<HFunc<T>>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let h = (w_max - w_min) / (T::lit(10.0) * T::from_usize_lossy(n_points.max(1)));
    let slope = (u(w_min) - u(w_min - h)) / h;
    approximate_utility_with_slope(u, slope, w_min, w_max, n_points)
}

/// As [`approximate_utility`], with an explicit left slope (e.g. `u'(w_min)`).
pub fn approximate_utility_with_slope<T, F>(
    u: F,
    slope_left: T,
    w_min: T,
    w_max: T,
    n_points: usize,
) -> Result<HFunc<T>>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if n_points < 2 {
        return Err(Error::InvalidUtility(format!(
            "need at least 2 sample points, got {n_points}"
        )));
    }
    if !(w_min.is_finite() && w_max.is_finite() && w_min < w_max) {
        return Err(Error::InvalidUtility(format!(
            "bad interval [{w_min}, {w_max}]"
        )));
    }
    let step = (w_max - w_min) / T::from_usize_lossy(n_points - 1);
    let xs: Vec<T> = (0..n_points)
        .map(|i| {
            if i == n_points - 1 {
                w_max
            } else {
                w_min + step * T::from_usize_lossy(i)
            }
        })
        .collect();
    let vs: Vec<T> = xs.iter().map(|&x| u(x)).collect();
    HFunc::new(xs, vs, slope_left).map_err(|e| match e {
        Error::InvalidFunction(msg) => Error::InvalidUtility(msg),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kink0() -> HFunc<f64> {
        HFunc::single(0.0, 0.0, 1.0).unwrap()
    }

    fn two() -> HFunc<f64> {
        HFunc::new(vec![0.0, 1.0], vec![0.0, 1.0], 2.0).unwrap()
    }

    #[test]
    fn evaluate_extends_linearly_and_flattens() {
        let f = kink0();
        assert_eq!(f.evaluate(-2.0), -2.0);
        assert_eq!(f.evaluate(3.0), 0.0);
        assert_eq!(two().evaluate(0.5), 0.5);
        assert_eq!(two().evaluate(-1.0), -2.0);
    }

    #[test]
    fn left_slopes() {
        assert_eq!(two().left_slope_at(1).unwrap(), 2.0);
        assert_eq!(two().left_slope_at(2).unwrap(), 1.0);
        assert_eq!(kink0().left_slope_at(1).unwrap(), 1.0);
        assert!(matches!(
            two().left_slope_at(3),
            Err(Error::IndexOutOfRange { index: 3, len: 2 })
        ));
        assert!(two().left_slope_at(0).is_err());
        assert_eq!(two().left_derivative(0.5), 1.0);
        assert_eq!(two().left_derivative(1.0), 1.0);
        assert_eq!(two().left_derivative(1.5), 0.0);
    }

    #[test]
    fn rejects_invalid() {
        assert!(HFunc::<f64>::new(vec![], vec![], 1.0).is_err());
        assert!(HFunc::new(vec![0.0, 1.0], vec![0.0, 1.0], 1.0).is_err());
        assert!(HFunc::new(vec![0.0, 1.0], vec![0.0, -1.0], 1.0).is_err());
        assert!(HFunc::new(vec![1.0, 0.0], vec![0.0, 1.0], 3.0).is_err());
        assert!(HFunc::new(vec![0.0], vec![0.0], 0.0).is_err());
        assert!(HFunc::new(vec![0.0], vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn combine_two_kinks() {
        let f1 = kink0();
        let f2 = HFunc::single(1.0, 0.0, 1.0).unwrap();
        let g = conic_combine(&[(1.0, &f1), (1.0, &f2)]).unwrap();
        assert_eq!(g.xs(), &[0.0, 1.0]);
        assert_eq!(g.vs(), &[-1.0, 0.0]);
        assert_eq!(g.slope_left(), 2.0);
    }

    #[test]
    fn combine_identical_and_scaled() {
        let f = two();
        let g = conic_combine(&[(0.5, &f), (0.5, &f)]).unwrap();
        for x in [-3.0, 0.0, 0.3, 1.0, 4.0] {
            assert_eq!(g.evaluate(x), f.evaluate(x));
        }
        let other = kink0();
        let h = conic_combine(&[(2.0, &f), (0.0, &other)]).unwrap();
        for x in [-3.0, 0.0, 0.3, 1.0, 4.0] {
            assert_eq!(h.evaluate(x), 2.0 * f.evaluate(x));
        }
    }

    #[test]
    fn combine_errors() {
        let f = two();
        assert_eq!(conic_combine::<f64>(&[]), Err(Error::EmptyCombination));
        assert_eq!(
            conic_combine(&[(0.0, &f), (0.0, &f)]),
            Err(Error::EmptyCombination)
        );
        assert!(matches!(
            conic_combine(&[(-1.0, &f)]),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn combine_merges_near_duplicates() {
        let f1 = HFunc::single(1.0, 0.0, 1.0).unwrap();
        let f2 = HFunc::single(1.0 + 1e-14, 0.0, 1.0).unwrap();
        let g = conic_combine(&[(1.0, &f1), (1.0, &f2)]).unwrap();
        assert_eq!(g.len(), 1);
        g.validate().unwrap();
    }

    #[test]
    fn prune_examples() {
        let f = HFunc::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.5], 2.0).unwrap();
        let g = f.prune(0.3);
        assert_eq!(g.xs(), &[0.0, 2.0]);
        assert_eq!(g.vs(), &[0.0, 1.5]);
        assert_eq!(g.slope_left(), 2.0);
        assert_eq!(f.prune(0.2), f);
        assert_eq!(f.prune(0.0), f);
        // boundary: the gap is exactly 0.25 and the comparison is closed
        assert_eq!(f.prune(0.25).len(), 2);
    }

    #[test]
    fn invert_examples() {
        assert_eq!(kink0().invert(-2.0).unwrap(), -2.0);
        assert_eq!(two().invert(0.5).unwrap(), 0.5);
        assert_eq!(two().invert(1.0).unwrap(), 1.0);
        assert_eq!(two().invert(-1.0).unwrap(), -0.5);
        assert!(matches!(
            two().invert(1.5),
            Err(Error::AbovePlateau { .. })
        ));
    }

    #[test]
    fn shift_moves_kinks() {
        let g = kink0().shifted(1.0);
        assert_eq!(g.xs(), &[1.0]);
        assert_eq!(g.evaluate(0.0), -1.0);
        assert_eq!(kink0().shifted(0.0), kink0());
    }

    #[test]
    fn approximate_cara_two_points() {
        let f = approximate_utility(|w: f64| -(-2.0 * w).exp(), 0.0, 1.0, 2).unwrap();
        assert_eq!(f.xs(), &[0.0, 1.0]);
        assert_eq!(f.vs()[0], -1.0);
        assert!((f.vs()[1] + (-2.0f64).exp()).abs() < 1e-15);
        // backward difference with h = 1/20
        let h: f64 = 0.05;
        let expect = (-1.0 + (2.0 * h).exp()) / h;
        assert!((f.slope_left() - expect).abs() < 1e-12);
    }

    #[test]
    fn approximate_crra_fifty_points() {
        let gamma = 2.0 / 3.0;
        let u = move |w: f64| (w.powf(1.0 - gamma) - 1.0) / (1.0 - gamma);
        let f = approximate_utility(u, 1.0, 9.0, 50).unwrap();
        assert_eq!(f.len(), 50);
        assert_eq!(f.first_kink(), 1.0);
        assert_eq!(f.last_kink(), 9.0);
        let dx = 8.0 / 49.0;
        for w in f.xs().windows(2) {
            assert!((w[1] - w[0] - dx).abs() < 1e-12);
        }
        assert_eq!(f.evaluate(20.0), u(9.0));
    }

    #[test]
    fn approximate_rejects_convex() {
        assert!(matches!(
            approximate_utility(|w: f64| w * w, 0.0, 1.0, 5),
            Err(Error::InvalidUtility(_))
        ));
        assert!(approximate_utility(|w: f64| w, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn from_points_drops_collinear() {
        let f = HFunc::from_points(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 2.5)], 2.0).unwrap();
        assert_eq!(f.xs(), &[0.0, 2.0, 3.0]);
        let g = HFunc::from_points(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)], 2.0).unwrap();
        assert_eq!(g.xs(), &[0.0, 1.0]);
        assert!(HFunc::from_points(&[(0.0, 0.0), (1.0, 1.0), (2.0, 3.0)], 5.0).is_err());
    }

    #[test]
    fn serde_record_roundtrip_validates() {
        let rec = HFuncRecord {
            xs: vec![0.0, 1.0],
            vs: vec![0.0, 1.0],
            slope_left: 2.0,
        };
        let f = HFunc::try_from(rec).unwrap();
        assert_eq!(f, two());
        let bad = HFuncRecord {
            xs: vec![0.0, 1.0],
            vs: vec![0.0, 1.0],
            slope_left: 0.5,
        };
        assert!(HFunc::try_from(bad).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let f = HFunc::<f32>::new(vec![0.0, 1.0], vec![0.0, 1.0], 2.0).unwrap();
        assert_eq!(f.evaluate(0.5), 0.5);
        let g = conic_combine(&[(0.5f32, &f), (0.5, &f)]).unwrap();
        assert_eq!(g.evaluate(0.25), 0.25);
    }
}
