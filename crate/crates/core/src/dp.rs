//! Exact backward induction over piecewise-linear concave value functions.
//!
//! One step maximises
//!
//! ```text
//! H(w, b) = R⁻¹ [ p·V_u(wR + b(u − R)) + (1 − p)·V_d(wR + b(d − R)) ]
//! ```
//!
//! over the stock position `b`. Optimal points lie on the grid formed by the
//! lines `C^u_i: wR + b(u − R) = x^u_i` and `C^d_j: wR + b(d − R) = x^d_j`
//! through the successors' kinks, so the maximiser is traced exactly by
//! walking grid intersections from `(N_u, N_d)` downwards. At each
//! intersection the left slope of `V` is
//! `min((p/q)·V_u'⁻(x^u_i), ((1−p)/(1−q))·V_d'⁻(x^d_j))`; whichever side
//! attains the minimum has its index decremented (both on a tie).

use crate::error::{Error, Result};
use crate::hfunc::HFunc;
use crate::lattice::{LatticeSpec, NodeId, StepCoefficients};
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One of the two families of grid lines in the `(w, b)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridLine<T> {
    /// `wR + b(u − R) = x`: the up-successor sits at its kink `x`.
    Up(T),
    /// `wR + b(d − R) = x`: the down-successor sits at its kink `x`.
    Down(T),
}

/// Optimal stock position as a function of wealth.
///
/// Linear between `points`; beyond them it follows one grid line on each
/// side, so it is defined for every wealth level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy<T> {
    points: Vec<(T, T)>,
    left: GridLine<T>,
    right: GridLine<T>,
    up: T,
    down: T,
    growth: T,
}

impl<T: Scalar> Policy<T> {
    /// `(w, β)` kinks in increasing wealth.
    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn left_ray(&self) -> GridLine<T> {
        self.left
    }

    pub fn right_ray(&self) -> GridLine<T> {
        self.right
    }

    fn on_line(&self, line: GridLine<T>, w: T) -> T {
        match line {
            GridLine::Up(x) => (x - w * self.growth) / (self.up - self.growth),
            GridLine::Down(x) => (x - w * self.growth) / (self.down - self.growth),
        }
    }

    /// Minimal optimal stock position at wealth `w`.
    pub fn at(&self, w: T) -> T {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if w < first.0 {
            return self.on_line(self.left, w);
        }
        if w > last.0 {
            return self.on_line(self.right, w);
        }
        let idx = self.points.partition_point(|&(x, _)| x <= w);
        let (x0, b0) = self.points[idx - 1];
        if idx == self.points.len() || w == x0 {
            return b0;
        }
        let (x1, b1) = self.points[idx];
        b0 + (w - x0) * (b1 - b0) / (x1 - x0)
    }
}

/// Successor value functions and step coefficients at one node.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a, T> {
    pub up_value: &'a HFunc<T>,
    pub down_value: &'a HFunc<T>,
    pub coeffs: StepCoefficients<T>,
}

/// Value function and optimal policy at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct StepResult<T> {
    pub value: HFunc<T>,
    pub policy: Policy<T>,
}

/// Solves `max_b H(w, b)` for every `w` at once.
pub fn backstep<T: Scalar>(inputs: &StepInputs<'_, T>) -> Result<StepResult<T>> {
    let StepCoefficients {
        up,
        down,
        growth,
        p,
        q,
    } = inputs.coeffs;
    if !(down < growth && growth < up) {
        return Err(Error::InvalidStep(format!(
            "need d < R < u, got d={down}, R={growth}, u={up}"
        )));
    }
    for prob in [p, q] {
        if !(prob > T::zero() && prob < T::one()) {
            return Err(Error::InvalidStep(format!("probability {prob} outside (0, 1)")));
        }
    }
    let (fu, fd) = (inputs.up_value, inputs.down_value);
    let (xu, vu, xd, vd) = (fu.xs(), fu.vs(), fd.xs(), fd.vs());
    let zu: Vec<T> = fu.left_slopes().collect();
    let zd: Vec<T> = fd.left_slopes().collect();
    let one = T::one();
    let up_weight = p / q;
    let down_weight = (one - p) / (one - q);
    let spread = up - down;
    let intersection = |i: usize, j: usize| {
        (
            (q * xu[i] + (one - q) * xd[j]) / growth,
            (xu[i] - xd[j]) / spread,
        )
    };

    let cap = xu.len() + xd.len();
    let mut values: Vec<(T, T)> = Vec::with_capacity(cap);
    let mut policy: Vec<(T, T)> = Vec::with_capacity(cap);
    let (mut i, mut j) = (xu.len() - 1, xd.len() - 1);
    let (slope_left, left_ray) = loop {
        let (x, beta) = intersection(i, j);
        values.push((x, (p * vu[i] + (one - p) * vd[j]) / growth));
        policy.push((x, beta));

        let cand_u = up_weight * zu[i];
        let cand_d = down_weight * zd[j];
        let tie = T::near(cand_u, cand_d);
        let dec_u = tie || cand_u < cand_d;
        let dec_d = tie || cand_d < cand_u;
        let z = cand_u.min(cand_d);

        if dec_u && dec_d && i > 0 {
            // On a tie the argmax is a whole parallelogram; its lower-left
            // boundary turns at the (i − 1, j) corner.
            policy.push(intersection(i - 1, j));
        }
        if dec_u && i == 0 {
            break (z, GridLine::Down(xd[j]));
        }
        if dec_d && j == 0 {
            let line = if dec_u { GridLine::Up(xu[i - 1]) } else { GridLine::Up(xu[i]) };
            break (z, line);
        }
        if dec_u {
            i -= 1;
        }
        if dec_d {
            j -= 1;
        }
    };

    values.reverse();
    policy.reverse();
    policy.dedup_by(|b, a| b.0 - a.0 <= T::merge_tol(a.0));
    let value = HFunc::from_points(&values, slope_left)?;
    Ok(StepResult {
        value,
        policy: Policy {
            points: policy,
            left: left_ray,
            right: GridLine::Up(xu[xu.len() - 1]),
            up,
            down,
            growth,
        },
    })
}

/// Minimal optimal investment at wealth `w`.
pub fn policy_at<T: Scalar>(res: &StepResult<T>, w: T) -> T {
    res.policy.at(w)
}

/// `H(w, b)` evaluated directly.
pub fn objective<T: Scalar>(inputs: &StepInputs<'_, T>, w: T, b: T) -> T {
    let c = inputs.coeffs;
    let one = T::one();
    (c.p * inputs.up_value.evaluate(w * c.growth + b * (c.up - c.growth))
        + (one - c.p) * inputs.down_value.evaluate(w * c.growth + b * (c.down - c.growth)))
        / c.growth
}

/// Which layers a sweep keeps in memory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Retain {
    #[default]
    All,
    /// Only these time indices (the root is always kept).
    Layers(Vec<usize>),
}

impl Retain {
    fn keeps(&self, m: usize) -> bool {
        match self {
            Retain::All => true,
            Retain::Layers(ms) => m == 0 || ms.contains(&m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions<T> {
    /// Sup-norm tolerance applied by pruning after each backstep; 0 keeps
    /// the solution exact.
    pub eps_step: T,
    /// Prune only on every `prune_every`-th layer counted from maturity.
    pub prune_every: usize,
    pub retain: Retain,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            eps_step: T::zero(),
            prune_every: 1,
            retain: Retain::All,
        }
    }
}

impl<T: Scalar> SolveOptions<T> {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn pruned(eps_step: T) -> Self {
        SolveOptions {
            eps_step,
            ..Self::default()
        }
    }

    fn prunes_layer(&self, n: usize, m: usize) -> bool {
        self.eps_step > T::zero() && (n - m).is_multiple_of(self.prune_every.max(1))
    }
}

/// Value function at a node, plus the policy unless the node is terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct NodeSolution<T> {
    pub value: HFunc<T>,
    pub policy: Option<Policy<T>>,
}

impl<T: Scalar> From<StepResult<T>> for NodeSolution<T> {
    fn from(r: StepResult<T>) -> Self {
        NodeSolution {
            value: r.value,
            policy: Some(r.policy),
        }
    }
}

impl<T: Scalar> NodeSolution<T> {
    pub fn terminal(value: HFunc<T>) -> Self {
        NodeSolution {
            value,
            policy: None,
        }
    }

    /// Optimal stock position; zero at maturity.
    pub fn policy_at(&self, w: T) -> T {
        self.policy.as_ref().map_or(T::zero(), |p| p.at(w))
    }
}

/// Node solutions for every retained time layer, in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface<T> {
    layers: Vec<Option<Vec<NodeSolution<T>>>>,
}

impl<T: Scalar> ValueSurface<T> {
    pub fn steps(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn root(&self) -> &NodeSolution<T> {
        &self.layers[0].as_ref().expect("root layer is always kept")[0]
    }

    pub fn layer(&self, m: usize) -> Option<&[NodeSolution<T>]> {
        self.layers.get(m).and_then(|l| l.as_deref())
    }

    pub fn node(&self, m: usize, index: usize) -> Option<&NodeSolution<T>> {
        self.layer(m).and_then(|l| l.get(index))
    }

    pub fn retained_layers(&self) -> impl Iterator<Item = (usize, &[NodeSolution<T>])> {
        self.layers
            .iter()
            .enumerate()
            .filter_map(|(m, l)| l.as_deref().map(|l| (m, l)))
    }
}

/// Generic layer-by-layer sweep.
///
/// `layer_sizes[m]` is the node count at step `m`; `step(m, idx, next)`
/// solves node `idx` of layer `m` from the solved layer `m + 1`. Nodes of
/// one layer run in parallel on the current rayon pool; results do not
/// depend on scheduling.
pub fn backward_sweep<T, F>(
    layer_sizes: &[usize],
    terminal: Vec<HFunc<T>>,
    opts: &SolveOptions<T>,
    step: F,
) -> Result<ValueSurface<T>>
where
    T: Scalar,
    F: Fn(usize, usize, &[NodeSolution<T>]) -> Result<StepResult<T>> + Sync,
{
    let n = layer_sizes.len() - 1;
    if terminal.len() != layer_sizes[n] {
        return Err(Error::InvalidSpec(format!(
            "expected {} terminal functions, got {}",
            layer_sizes[n],
            terminal.len()
        )));
    }
    let mut layers: Vec<Option<Vec<NodeSolution<T>>>> = vec![None; n + 1];
    let mut next: Vec<NodeSolution<T>> =
        terminal.into_iter().map(NodeSolution::terminal).collect();
    for m in (0..n).rev() {
        let prune = opts.prunes_layer(n, m);
        let current: Vec<NodeSolution<T>> = (0..layer_sizes[m])
            .into_par_iter()
            .map(|idx| {
                let mut res = step(m, idx, &next)?;
                if prune {
                    res.value = res.value.prune(opts.eps_step);
                }
                Ok(NodeSolution::from(res))
            })
            .collect::<Result<_>>()?;
        let finished = std::mem::replace(&mut next, current);
        if opts.retain.keeps(m + 1) {
            layers[m + 1] = Some(finished);
        }
    }
    layers[0] = Some(next);
    Ok(ValueSurface { layers })
}

/// Backward induction over a single-asset lattice.
///
/// `terminal[k]` is the value function at maturity node `(n, k)`.
pub fn solve<T: Scalar>(
    spec: &LatticeSpec<T>,
    terminal: Vec<HFunc<T>>,
    opts: &SolveOptions<T>,
) -> Result<ValueSurface<T>> {
    let n = spec.steps();
    let sizes: Vec<usize> = (0..=n).map(|m| spec.levels(m) + 1).collect();
    backward_sweep(&sizes, terminal, opts, |m, k, next| {
        let node = NodeId::new(m, k);
        let inputs = StepInputs {
            up_value: &next[node.up().k].value,
            down_value: &next[node.down().k].value,
            coeffs: spec.step(node)?,
        };
        backstep(&inputs)
    })
}

/// Flat export record for one node.
#[derive(Debug, Clone, Serialize)]
pub struct NodeRecord<T> {
    pub m: usize,
    pub index: usize,
    pub xs: Vec<T>,
    pub vs: Vec<T>,
    pub slope_left: T,
    pub policy: Vec<(T, T)>,
}

impl<T: Scalar> ValueSurface<T> {
    pub fn records(&self) -> Vec<NodeRecord<T>> {
        self.retained_layers()
            .flat_map(|(m, layer)| {
                layer.iter().enumerate().map(move |(index, node)| NodeRecord {
                    m,
                    index,
                    xs: node.value.xs().to_vec(),
                    vs: node.value.vs().to_vec(),
                    slope_left: node.value.slope_left(),
                    policy: node
                        .policy
                        .as_ref()
                        .map(|p| p.points().to_vec())
                        .unwrap_or_default(),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_coeffs() -> StepCoefficients<f64> {
        StepCoefficients::from_returns(2.0, 0.5, 1.0, 1.25).unwrap()
    }

    fn min0() -> HFunc<f64> {
        HFunc::single(0.0, 0.0, 1.0).unwrap()
    }

    /// Dense scan of `b` followed by golden-section refinement.
    fn brute_max(inputs: &StepInputs<'_, f64>, w: f64) -> (f64, f64) {
        let (lo, hi, h) = (-20.0, 20.0, 1e-3);
        let steps = ((hi - lo) / h) as usize;
        let mut best = (f64::NEG_INFINITY, lo);
        for s in 0..=steps {
            let b = lo + s as f64 * h;
            let v = objective(inputs, w, b);
            if v > best.0 {
                best = (v, b);
            }
        }
        let (mut a, mut c) = (best.1 - h, best.1 + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let m1 = c - g * (c - a);
            let m2 = a + g * (c - a);
            if objective(inputs, w, m1) < objective(inputs, w, m2) {
                a = m1;
            } else {
                c = m2;
            }
        }
        let b = 0.5 * (a + c);
        (objective(inputs, w, b).max(best.0), b)
    }

    #[test]
    fn toy_example() {
        let f = min0();
        let c = toy_coeffs();
        assert!((c.p - 0.5).abs() < 1e-15);
        assert!((c.q - 1.0 / 3.0).abs() < 1e-15);
        let inputs = StepInputs {
            up_value: &f,
            down_value: &f,
            coeffs: c,
        };
        let res = backstep(&inputs).unwrap();
        assert_eq!(res.value.xs(), &[0.0]);
        assert_eq!(res.value.vs(), &[0.0]);
        assert!((res.value.slope_left() - 0.75).abs() < 1e-15);
        assert_eq!(res.policy.points(), &[(0.0, 0.0)]);
        assert_eq!(res.policy.left_ray(), GridLine::Up(0.0));
        assert_eq!(policy_at(&res, -2.0), 2.0);
        assert_eq!(policy_at(&res, 0.0), 0.0);
        assert_eq!(policy_at(&res, 3.0), -3.0);
        for w in [-3.0, -2.0, -0.5, 0.0, 1.0] {
            let (v, _) = brute_max(&inputs, w);
            assert!((res.value.evaluate(w) - v).abs() < 1e-9, "w = {w}");
        }
    }

    #[test]
    fn single_kink_successors() {
        let a = HFunc::single(1.0, 2.0, 0.5).unwrap();
        let b = HFunc::single(-1.0, 1.0, 3.0).unwrap();
        let c = StepCoefficients::from_returns(1.1, 0.9, 1.01, 1.02).unwrap();
        let res = backstep(&StepInputs {
            up_value: &a,
            down_value: &b,
            coeffs: c,
        })
        .unwrap();
        assert_eq!(res.value.len(), 1);
        let x: f64 = (c.q - (1.0 - c.q)) / c.growth;
        let v: f64 = (c.p * 2.0 + (1.0 - c.p) * 1.0) / c.growth;
        assert!((res.value.xs()[0] - x).abs() < 1e-15);
        assert!((res.value.vs()[0] - v).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_coefficients() {
        let f = min0();
        let c = StepCoefficients {
            up: 1.0,
            down: 1.0,
            growth: 1.0,
            p: 0.5,
            q: 0.5,
        };
        assert!(backstep(&StepInputs {
            up_value: &f,
            down_value: &f,
            coeffs: c
        })
        .is_err());
    }

    #[test]
    fn policy_matches_brute_force_on_multi_kink_inputs() {
        let a = HFunc::new(vec![-1.0, 0.5, 2.0], vec![-2.0, 0.0, 1.0], 2.0).unwrap();
        let b = HFunc::new(vec![-2.0, 0.0, 1.0, 3.0], vec![-3.0, -0.5, 0.2, 0.8], 1.5).unwrap();
        let c = StepCoefficients::from_returns(1.3, 0.8, 1.05, 1.1).unwrap();
        let inputs = StepInputs {
            up_value: &a,
            down_value: &b,
            coeffs: c,
        };
        let res = backstep(&inputs).unwrap();
        assert!(res.value.len() < a.len() + b.len());
        for s in 0..80 {
            let w = -4.0 + 0.1 * s as f64;
            let (v, _) = brute_max(&inputs, w);
            assert!((res.value.evaluate(w) - v).abs() < 1e-9, "w = {w}");
            let at_policy = objective(&inputs, w, policy_at(&res, w));
            assert!((at_policy - v).abs() < 1e-9, "policy suboptimal at w = {w}");
        }
    }

    #[test]
    fn recurrence_values_agree_with_direct_values() {
        // Accumulating v_k = v_{k-1} − z_{k-1}(x_{k-1} − x_k) from the top
        // kink reproduces the directly evaluated values.
        let a = HFunc::new(vec![-1.0, 0.5, 2.0], vec![-2.0, 0.0, 1.0], 2.0).unwrap();
        let b = HFunc::new(vec![-2.0, 0.0, 1.0, 3.0], vec![-3.0, -0.5, 0.2, 0.8], 1.5).unwrap();
        let c = StepCoefficients::from_returns(1.3, 0.8, 1.05, 1.1).unwrap();
        let res = backstep(&StepInputs {
            up_value: &a,
            down_value: &b,
            coeffs: c,
        })
        .unwrap();
        let f = &res.value;
        let n = f.len();
        let slopes: Vec<f64> = f.left_slopes().collect();
        let mut v = f.vs()[n - 1];
        for k in (0..n - 1).rev() {
            v -= slopes[k + 1] * (f.xs()[k + 1] - f.xs()[k]);
            assert!((v - f.vs()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn tie_turns_at_lower_corner() {
        // Identical successors and p = q give p/q = (1-p)/(1-q): every step ties.
        let f = HFunc::new(vec![0.0, 1.0], vec![0.0, 1.0], 2.0).unwrap();
        let c = StepCoefficients::from_returns(1.2, 0.9, 1.0, 1.0).unwrap();
        let inputs = StepInputs {
            up_value: &f,
            down_value: &f,
            coeffs: c,
        };
        let res = backstep(&inputs).unwrap();
        // risk neutral: V = f, and the minimal optimiser is the lower boundary
        for w in [-1.0f64, 0.0, 0.3, 0.7, 1.0, 2.0] {
            assert!((res.value.evaluate(w) - f.evaluate(w)).abs() < 1e-12);
            let b = policy_at(&res, w);
            assert!((objective(&inputs, w, b) - f.evaluate(w)).abs() < 1e-12);
            // nothing strictly below b is optimal
            assert!(objective(&inputs, w, b - 1e-6) < objective(&inputs, w, b) - 1e-12);
        }
        assert_eq!(res.policy.points().len(), 3);
    }

    #[test]
    fn solve_zero_pruning_layers() {
        let spec = LatticeSpec::crr_with_drift(1.0, 0.2, 0.0, 0.05, 1.0, 3).unwrap();
        let u = HFunc::new(vec![-1.0, 0.0, 1.0], vec![-1.5, 0.0, 0.5], 2.0).unwrap();
        let surf = solve(&spec, vec![u.clone(); 4], &SolveOptions::exact()).unwrap();
        assert_eq!(surf.steps(), 3);
        assert_eq!(surf.layer(3).unwrap().len(), 4);
        assert_eq!(surf.layer(3).unwrap()[2].value, u);
        assert!(surf.layer(3).unwrap()[2].policy.is_none());
        assert_eq!(surf.layer(1).unwrap().len(), 2);
        surf.root().value.validate().unwrap();
        let wrong = solve(&spec, vec![u; 3], &SolveOptions::exact());
        assert!(wrong.is_err());
    }

    #[test]
    fn retain_drops_layers() {
        let spec = LatticeSpec::crr_with_drift(1.0, 0.2, 0.0, 0.05, 1.0, 4).unwrap();
        let u = HFunc::new(vec![-1.0, 0.0, 1.0], vec![-1.5, 0.0, 0.5], 2.0).unwrap();
        let opts = SolveOptions {
            retain: Retain::Layers(vec![2]),
            ..SolveOptions::exact()
        };
        let surf = solve(&spec, vec![u.clone(); 5], &opts).unwrap();
        assert!(surf.layer(1).is_none());
        assert!(surf.layer(2).is_some());
        assert!(surf.layer(4).is_none());
        let full = solve(&spec, vec![u; 5], &SolveOptions::exact()).unwrap();
        assert_eq!(full.root(), surf.root());
    }
}
