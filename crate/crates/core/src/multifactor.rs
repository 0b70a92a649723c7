//! Lattices with a second, untraded factor `Y`.
//!
//! Each node has four successors `(S·ũ|d̃, Y·ũ|d̃)`. Because only `S` is
//! traded, the two successors sharing the same asset move can be merged
//! into one conic mixture before the single-factor step runs, which keeps
//! every value function in class ℋ.
//!
//! Two constructions are provided: a recombining correlated binomial tree
//! for geometric factors ([`CorrelatedLattice`]) and a Heston grid on which
//! off-grid successors are spread over the four surrounding grid nodes by
//! bilinear weights ([`HestonLattice`]).

use crate::dp::{backstep, backward_sweep, NodeSolution, SolveOptions, StepInputs, StepResult, ValueSurface};
use crate::error::{Error, Result};
use crate::hfunc::{conic_combine, HFunc};
use crate::lattice::StepCoefficients;
use crate::scalar::Scalar;
use log::warn;
use serde::{Deserialize, Serialize};

/// Node `(m, k, l)`: time step, asset level, factor level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwoFactorNode {
    pub m: usize,
    pub k: usize,
    pub l: usize,
}

impl TwoFactorNode {
    pub fn new(m: usize, k: usize, l: usize) -> Self {
        TwoFactorNode { m, k, l }
    }
}

/// Joint probabilities of the four moves; first letter is the asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTransition<T> {
    pub p_uu: T,
    pub p_ud: T,
    pub p_du: T,
    pub p_dd: T,
}

impl<T: Scalar> JointTransition<T> {
    /// `¼(1 + ρ)` on matching moves, `¼(1 − ρ)` otherwise.
    pub fn correlated(rho: T) -> Result<Self> {
        if !(rho.abs() <= T::one()) {
            return Err(Error::InvalidParams(format!("correlation {rho} outside [-1, 1]")));
        }
        let quarter = T::lit(0.25);
        let same = quarter * (T::one() + rho);
        let cross = quarter * (T::one() - rho);
        Ok(JointTransition {
            p_uu: same,
            p_ud: cross,
            p_du: cross,
            p_dd: same,
        })
    }

    pub fn p_up(&self) -> T {
        self.p_uu + self.p_ud
    }

    /// Probability of the asset/factor move pair `(η_S, η_Y)`, `η = ±1`.
    pub fn prob(&self, eta_s: i8, eta_y: i8) -> T {
        match (eta_s > 0, eta_y > 0) {
            (true, true) => self.p_uu,
            (true, false) => self.p_ud,
            (false, true) => self.p_du,
            (false, false) => self.p_dd,
        }
    }
}

/// Merges four successor functions into the asset-up and asset-down
/// mixtures. Input order: `uu, ud, du, dd`. Returns `(p_u, V_u, V_d)`.
pub fn mix_successors<T: Scalar>(quads: [(T, &HFunc<T>); 4]) -> Result<(T, HFunc<T>, HFunc<T>)> {
    for &(p, _) in &quads {
        if !(p >= T::zero()) || !p.is_finite() {
            return Err(Error::Probability(p.to_f64().unwrap_or(f64::NAN)));
        }
    }
    let [(p_uu, f_uu), (p_ud, f_ud), (p_du, f_du), (p_dd, f_dd)] = quads;
    let p_u = p_uu + p_ud;
    let p_d = p_du + p_dd;
    let total = p_u + p_d;
    if !(p_u > T::zero() && p_d > T::zero()) {
        return Err(Error::DegenerateSplit((p_u / total).to_f64().unwrap_or(f64::NAN)));
    }
    let up = conic_combine(&merge_terms(&[(p_uu / p_u, f_uu), (p_ud / p_u, f_ud)]))?;
    let down = conic_combine(&merge_terms(&[(p_du / p_d, f_du), (p_dd / p_d, f_dd)]))?;
    Ok((p_u / total, up, down))
}

/// Sums the weights of terms that refer to the same function.
fn merge_terms<'a, T: Scalar>(terms: &[(T, &'a HFunc<T>)]) -> Vec<(T, &'a HFunc<T>)> {
    let mut out: Vec<(T, &HFunc<T>)> = Vec::with_capacity(terms.len());
    for &(w, f) in terms {
        match out.iter_mut().find(|(_, g)| std::ptr::eq(*g, f)) {
            Some(entry) => entry.0 = entry.0 + w,
            None => out.push((w, f)),
        }
    }
    out
}

/// Two geometric Brownian motions, `S` traded and `Y` not, with
/// instantaneous correlation `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MzSpec<T> {
    pub s0: T,
    pub mu_s: T,
    pub sigma_s: T,
    pub y0: T,
    pub mu_y: T,
    pub sigma_y: T,
    pub rho: T,
    pub r: T,
    pub horizon: T,
    pub n: usize,
}

impl<T: Scalar> MzSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.s0, self.sigma_s, self.y0, self.sigma_y, self.horizon];
        if positive.iter().any(|&v| !(v > T::zero() && v.is_finite())) {
            return Err(Error::InvalidParams(
                "s0, sigma_s, y0, sigma_y and horizon must be positive".into(),
            ));
        }
        if !(self.rho.abs() <= T::one()) {
            return Err(Error::InvalidParams(format!(
                "correlation {} outside [-1, 1]",
                self.rho
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("need at least one time step".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.n)
    }
}

/// `(e^{(μ−½σ²)Δt + σ√Δt}, e^{(μ−½σ²)Δt − σ√Δt})`.
fn lognormal_returns<T: Scalar>(mu: T, sigma: T, dt: T) -> (T, T) {
    let drift = (mu - T::lit(0.5) * sigma * sigma) * dt;
    let diffusion = sigma * dt.sqrt();
    ((drift + diffusion).exp(), (drift - diffusion).exp())
}

/// Recombining two-factor binomial tree; node `(m, k, l)` has
/// `S = s0·u^k·d^{m−k}` and `Y = y0·ũ^l·d̃^{m−l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedLattice<T> {
    spec: MzSpec<T>,
    up: T,
    down: T,
    factor_up: T,
    factor_down: T,
    transition: JointTransition<T>,
    coeffs: StepCoefficients<T>,
}

/// Builds the correlated tree for `spec`.
pub fn correlated_lattice<T: Scalar>(spec: MzSpec<T>) -> Result<CorrelatedLattice<T>> {
    CorrelatedLattice::new(spec)
}

impl<T: Scalar> CorrelatedLattice<T> {
    pub fn new(spec: MzSpec<T>) -> Result<Self> {
        spec.validate()?;
        let dt = spec.dt();
        let (up, down) = lognormal_returns(spec.mu_s, spec.sigma_s, dt);
        let (factor_up, factor_down) = lognormal_returns(spec.mu_y, spec.sigma_y, dt);
        let growth = (spec.r * dt).exp();
        if !(up > growth && growth > down) {
            return Err(Error::Arbitrage {
                m: 0,
                k: 0,
                u: up.to_f64().unwrap_or(f64::NAN),
                growth: growth.to_f64().unwrap_or(f64::NAN),
                d: down.to_f64().unwrap_or(f64::NAN),
            });
        }
        let transition = JointTransition::correlated(spec.rho)?;
        let coeffs = StepCoefficients::with_probability(up, down, growth, transition.p_up())?;
        Ok(CorrelatedLattice {
            spec,
            up,
            down,
            factor_up,
            factor_down,
            transition,
            coeffs,
        })
    }

    pub fn spec(&self) -> &MzSpec<T> {
        &self.spec
    }

    pub fn steps(&self) -> usize {
        self.spec.n
    }

    pub fn transition(&self) -> JointTransition<T> {
        self.transition
    }

    pub fn coefficients(&self) -> StepCoefficients<T> {
        self.coeffs
    }

    pub fn factor_returns(&self) -> (T, T) {
        (self.factor_up, self.factor_down)
    }

    /// Flat index of `(k, l)` within layer `m`.
    pub fn index(&self, node: TwoFactorNode) -> usize {
        node.k * (node.m + 1) + node.l
    }

    pub fn node(&self, m: usize, index: usize) -> TwoFactorNode {
        TwoFactorNode::new(m, index / (m + 1), index % (m + 1))
    }

    pub fn asset_price(&self, node: TwoFactorNode) -> T {
        self.spec.s0 * self.up.powi(node.k as i32) * self.down.powi((node.m - node.k) as i32)
    }

    pub fn factor_level(&self, node: TwoFactorNode) -> T {
        self.spec.y0
            * self.factor_up.powi(node.l as i32)
            * self.factor_down.powi((node.m - node.l) as i32)
    }

    /// `(S, Y)` at every maturity node in index order.
    pub fn terminal_states(&self) -> Vec<(T, T)> {
        let n = self.spec.n;
        (0..(n + 1) * (n + 1))
            .map(|i| {
                let node = self.node(n, i);
                (self.asset_price(node), self.factor_level(node))
            })
            .collect()
    }

    /// Backward induction from maturity functions given in index order.
    pub fn solve(&self, terminal: Vec<HFunc<T>>, opts: &SolveOptions<T>) -> Result<ValueSurface<T>> {
        let n = self.spec.n;
        let sizes: Vec<usize> = (0..=n).map(|m| (m + 1) * (m + 1)).collect();
        let t = self.transition;
        backward_sweep(&sizes, terminal, opts, |m, idx, next| {
            let node = self.node(m, idx);
            let width = m + 2;
            let at = |k: usize, l: usize| &next[k * width + l].value;
            let (p_u, v_u, v_d) = mix_successors([
                (t.p_uu, at(node.k + 1, node.l + 1)),
                (t.p_ud, at(node.k + 1, node.l)),
                (t.p_du, at(node.k, node.l + 1)),
                (t.p_dd, at(node.k, node.l)),
            ])?;
            let coeffs = StepCoefficients::with_probability(self.up, self.down, self.coeffs.growth, p_u)?;
            backstep(&StepInputs {
                up_value: &v_u,
                down_value: &v_d,
                coeffs,
            })
        })
    }
}

/// Discretised Heston model on a rectangular `(ln S, Y)` grid.
///
/// With `lambda` set, the mean rate of return is `r + λ·Y⁺` instead of `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonSpec<T> {
    pub kappa: T,
    pub theta: T,
    pub omega: T,
    pub rho: T,
    pub mu: T,
    pub r: T,
    pub horizon: T,
    pub n: usize,
    pub m_z: usize,
    pub m_v: usize,
    pub s0: T,
    pub y0: T,
    #[serde(default)]
    pub lambda: Option<T>,
}

impl<T: Scalar> HestonSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.m_z == 0 || self.m_v == 0 || self.n == 0 {
            return Err(Error::InvalidParams("n, m_z and m_v must be at least 1".into()));
        }
        if !(self.rho.abs() <= T::one()) {
            return Err(Error::InvalidParams(format!(
                "correlation {} outside [-1, 1]",
                self.rho
            )));
        }
        let nonneg = [self.kappa, self.theta, self.omega];
        if nonneg.iter().any(|&v| !(v >= T::zero() && v.is_finite())) {
            return Err(Error::InvalidParams("kappa, theta and omega must be non-negative".into()));
        }
        if !(self.s0 > T::zero() && self.y0 > T::zero() && self.horizon > T::zero()) {
            return Err(Error::InvalidParams("s0, y0 and horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.n)
    }

    fn drift(&self, y: T) -> T {
        match self.lambda {
            Some(lambda) => self.r + lambda * y.max(T::zero()),
            None => self.mu,
        }
    }

    /// Increment of `ln S` for asset move `η`.
    fn log_return(&self, y: T, eta: T) -> T {
        let dt = self.dt();
        (self.drift(y) - T::lit(0.5) * y) * dt + eta * (y.max(T::zero()) * dt).sqrt()
    }

    /// Next variance for factor move `η` (full truncation).
    fn next_variance(&self, y: T, eta: T) -> T {
        let dt = self.dt();
        let yp = y.max(T::zero());
        y + self.kappa * (self.theta - yp) * dt + eta * self.omega * (yp * dt).sqrt()
    }
}

/// An off-grid successor of a Heston node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepTarget<T> {
    pub eta_s: i8,
    pub eta_y: i8,
    pub prob: T,
    /// Gross asset return `R^{S,Y}_{η_S}`.
    pub asset_return: T,
    pub s: T,
    pub y: T,
}

/// The four successors of state `(s, y)`, ordered `uu, ud, du, dd`.
pub fn heston_step_targets<T: Scalar>(spec: &HestonSpec<T>, s: T, y: T) -> [StepTarget<T>; 4] {
    let probs = JointTransition::correlated(spec.rho.max(-T::one()).min(T::one()))
        .expect("clamped correlation");
    let target = |eta_s: i8, eta_y: i8| {
        let asset_return = spec.log_return(y, T::lit(eta_s as f64)).exp();
        StepTarget {
            eta_s,
            eta_y,
            prob: probs.prob(eta_s, eta_y),
            asset_return,
            s: s * asset_return,
            y: spec.next_variance(y, T::lit(eta_y as f64)),
        }
    };
    [target(1, 1), target(1, -1), target(-1, 1), target(-1, -1)]
}

/// Grid of one time layer: equidistant in `ln S` and in `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HestonGrid<T> {
    pub ln_s: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Scalar> HestonGrid<T> {
    fn point(ln_s0: T, y0: T) -> Self {
        HestonGrid {
            ln_s: vec![ln_s0],
            y: vec![y0],
        }
    }

    fn spanning(ln_s: (T, T), y: (T, T), m_z: usize, m_v: usize) -> Self {
        HestonGrid {
            ln_s: levels(ln_s.0, ln_s.1, m_z),
            y: levels(y.0, y.1, m_v),
        }
    }

    pub fn len(&self) -> usize {
        self.ln_s.len() * self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, k: usize, l: usize) -> usize {
        k * self.y.len() + l
    }

    pub fn node(&self, index: usize) -> (usize, usize) {
        (index / self.y.len(), index % self.y.len())
    }

    pub fn asset_price(&self, k: usize) -> T {
        self.ln_s[k].exp()
    }

    fn bounds(&self) -> ((T, T), (T, T)) {
        let s = (self.ln_s[0], self.ln_s[self.ln_s.len() - 1]);
        let y = (self.y[0], self.y[self.y.len() - 1]);
        (s, y)
    }
}

/// `steps + 1` equidistant levels, or one level if the interval is a point.
fn levels<T: Scalar>(lo: T, hi: T, steps: usize) -> Vec<T> {
    if hi - lo <= T::merge_tol(lo) {
        return vec![lo];
    }
    let delta = (hi - lo) / T::from_usize_lossy(steps);
    let mut out: Vec<T> = (0..steps).map(|i| lo + T::from_usize_lossy(i) * delta).collect();
    out.push(hi);
    out
}

/// Candidate extremum locations of `a·y + c·√y⁺` on `[lo, hi]`, plus the
/// kink of the truncation at zero.
fn critical_points<T: Scalar>(lo: T, hi: T, pieces: &[(T, T)]) -> Vec<T> {
    let mut out = vec![lo, hi];
    if lo < T::zero() && hi > T::zero() {
        out.push(T::zero());
    }
    for &(a, c) in pieces {
        if a != T::zero() {
            let root = -c / (T::lit(2.0) * a);
            if root > T::zero() {
                let y = root * root;
                if y > lo && y < hi {
                    out.push(y);
                }
            }
        }
    }
    out
}

/// Per-layer grids spanning the reachable interval of each factor.
///
/// The interval of layer `m + 1` is the image of layer `m`'s interval under
/// the four step maps, evaluated at the endpoints and interior critical
/// points, so it contains every point the non-recombining tree can reach.
pub fn heston_grids<T: Scalar>(spec: &HestonSpec<T>) -> Result<Vec<HestonGrid<T>>> {
    spec.validate()?;
    let dt = spec.dt();
    let sqrt_dt = dt.sqrt();
    let half = T::lit(0.5);
    let one = T::one();
    let drift_slope = spec.lambda.map_or(-half, |l| l - half) * dt;
    let mean_rev = one - spec.kappa * dt;
    let etas = [one, -one];

    let mut grids = Vec::with_capacity(spec.n + 1);
    grids.push(HestonGrid::point(spec.s0.ln(), spec.y0));
    for _ in 0..spec.n {
        let ((s_lo, s_hi), (y_lo, y_hi)) = grids[grids.len() - 1].bounds();
        let pieces: Vec<(T, T)> = etas
            .iter()
            .flat_map(|&eta| [(drift_slope, eta * sqrt_dt), (mean_rev, eta * spec.omega * sqrt_dt)])
            .collect();
        let ys = critical_points(y_lo, y_hi, &pieces);
        let mut ds = (T::infinity(), T::neg_infinity());
        let mut ny = (T::infinity(), T::neg_infinity());
        for &y in &ys {
            for &eta in &etas {
                let h = spec.log_return(y, eta);
                ds = (ds.0.min(h), ds.1.max(h));
                let v = spec.next_variance(y, eta);
                ny = (ny.0.min(v), ny.1.max(v));
            }
        }
        grids.push(HestonGrid::spanning(
            (s_lo + ds.0, s_hi + ds.1),
            ny,
            spec.m_z,
            spec.m_v,
        ));
    }
    Ok(grids)
}

/// Bracketing cell and the weight on its upper level.
fn locate<T: Scalar>(levels: &[T], x: T) -> (usize, T) {
    if levels.len() == 1 {
        return (0, T::zero());
    }
    let last = levels.len() - 1;
    let k = levels.partition_point(|&l| l <= x).clamp(1, last) - 1;
    let (lo, hi) = (levels[k], levels[k + 1]);
    let mut frac = (x - lo) / (hi - lo);
    let tol = T::lit(1e-9);
    if frac < -tol || frac > T::one() + tol {
        warn!("successor {x} outside grid [{}, {}]; clamped", levels[0], levels[last]);
    }
    frac = frac.max(T::zero()).min(T::one());
    if frac <= T::rel_tol() {
        frac = T::zero();
    } else if T::one() - frac <= T::rel_tol() {
        frac = T::one();
    }
    (k, frac)
}

/// Bilinear weights `[[p̃_00, p̃_01], [p̃_10, p̃_11]]` of `(x, y)` in the cell
/// `[x0, x1] × [y0, y1]`; first index along `x`. A degenerate side puts all
/// weight on its lower level. Targets outside the cell are clamped.
pub fn bilinear_weights<T: Scalar>(x: T, y: T, cell: ((T, T), (T, T))) -> [[T; 2]; 2] {
    let ((x0, x1), (y0, y1)) = cell;
    let fx = axis_fraction(x, x0, x1);
    let fy = axis_fraction(y, y0, y1);
    product_weights(fx, fy)
}

fn axis_fraction<T: Scalar>(v: T, lo: T, hi: T) -> T {
    if hi - lo <= T::zero() {
        return T::zero();
    }
    let f = (v - lo) / (hi - lo);
    if f < T::zero() || f > T::one() {
        warn!("interpolation target {v} outside cell [{lo}, {hi}]; clamped");
    }
    f.max(T::zero()).min(T::one())
}

fn product_weights<T: Scalar>(fx: T, fy: T) -> [[T; 2]; 2] {
    let one = T::one();
    [
        [(one - fx) * (one - fy), (one - fx) * fy],
        [fx * (one - fy), fx * fy],
    ]
}

/// Heston grids together with the `HestonSpec` they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct HestonLattice<T> {
    spec: HestonSpec<T>,
    grids: Vec<HestonGrid<T>>,
}

impl<T: Scalar> HestonLattice<T> {
    pub fn new(spec: HestonSpec<T>) -> Result<Self> {
        let grids = heston_grids(&spec)?;
        Ok(HestonLattice { spec, grids })
    }

    pub fn spec(&self) -> &HestonSpec<T> {
        &self.spec
    }

    pub fn grid(&self, m: usize) -> &HestonGrid<T> {
        &self.grids[m]
    }

    pub fn steps(&self) -> usize {
        self.spec.n
    }

    pub fn node(&self, m: usize, index: usize) -> TwoFactorNode {
        let (k, l) = self.grids[m].node(index);
        TwoFactorNode::new(m, k, l)
    }

    pub fn index(&self, node: TwoFactorNode) -> usize {
        self.grids[node.m].index(node.k, node.l)
    }

    /// `(S, Y)` at a node.
    pub fn state(&self, node: TwoFactorNode) -> (T, T) {
        let g = &self.grids[node.m];
        (g.asset_price(node.k), g.y[node.l])
    }

    pub fn terminal_states(&self) -> Vec<(T, T)> {
        let n = self.spec.n;
        (0..self.grids[n].len())
            .map(|i| self.state(self.node(n, i)))
            .collect()
    }

    pub fn step_targets(&self, node: TwoFactorNode) -> [StepTarget<T>; 4] {
        let (s, y) = self.state(node);
        heston_step_targets(&self.spec, s, y)
    }

    /// The sixteen grid transitions of `node`: `(η_S, successor index,
    /// probability)`, with equal successors merged per asset move.
    pub fn transitions(&self, node: TwoFactorNode) -> Vec<(i8, usize, T)> {
        let g = &self.grids[node.m];
        let next = &self.grids[node.m + 1];
        let y = g.y[node.l];
        let ln_s = g.ln_s[node.k];
        let mut out: Vec<(i8, usize, T)> = Vec::with_capacity(16);
        for t in heston_step_targets(&self.spec, T::one(), y) {
            // same expression as the grid bounds, so boundary targets land exactly
            let target_ln_s = ln_s + self.spec.log_return(y, T::lit(t.eta_s as f64));
            let (k, fx) = locate(&next.ln_s, target_ln_s);
            let (l, fy) = locate(&next.y, t.y);
            let w = product_weights(fx, fy);
            for (i, row) in w.iter().enumerate() {
                for (j, &wij) in row.iter().enumerate() {
                    if wij == T::zero() {
                        continue;
                    }
                    let idx = next.index(k + i, l + j);
                    let p = t.prob * wij;
                    match out.iter_mut().find(|e| e.0 == t.eta_s && e.1 == idx) {
                        Some(e) => e.2 = e.2 + p,
                        None => out.push((t.eta_s, idx, p)),
                    }
                }
            }
        }
        out
    }

    /// One backward step at `node` from the solved layer `m + 1`.
    pub fn backstep(&self, node: TwoFactorNode, next: &[NodeSolution<T>]) -> Result<StepResult<T>> {
        let (_, y) = self.state(node);
        if !(y > T::zero()) {
            return Err(Error::InvalidStep(format!(
                "variance {y} at node ({}, {}, {}) leaves no risk to trade",
                node.m, node.k, node.l
            )));
        }
        let dt = self.spec.dt();
        let up = self.spec.log_return(y, T::one()).exp();
        let down = self.spec.log_return(y, -T::one()).exp();
        let growth = (self.spec.r * dt).exp();

        let transitions = self.transitions(node);
        // (total probability, weighted successors) for the up and down moves of S
        let mut sides = [(T::zero(), Vec::new()), (T::zero(), Vec::new())];
        for &(eta_s, idx, p) in &transitions {
            let side = &mut sides[usize::from(eta_s < 0)];
            side.0 = side.0 + p;
            side.1.push((p, &next[idx].value));
        }
        let mut mixed = Vec::with_capacity(2);
        for (mass, terms) in &sides {
            if !(*mass > T::zero()) {
                return Err(Error::DegenerateSplit(mass.to_f64().unwrap_or(f64::NAN)));
            }
            let normalized: Vec<(T, &HFunc<T>)> = terms.iter().map(|&(p, f)| (p / *mass, f)).collect();
            mixed.push(conic_combine(&normalized)?);
        }
        let p_up = sides[0].0 / (sides[0].0 + sides[1].0);
        let coeffs = StepCoefficients::with_probability(up, down, growth, p_up)?;
        backstep(&StepInputs {
            up_value: &mixed[0],
            down_value: &mixed[1],
            coeffs,
        })
    }

    pub fn solve(&self, terminal: Vec<HFunc<T>>, opts: &SolveOptions<T>) -> Result<ValueSurface<T>> {
        let sizes: Vec<usize> = self.grids.iter().map(HestonGrid::len).collect();
        backward_sweep(&sizes, terminal, opts, |m, idx, next| {
            self.backstep(self.node(m, idx), next)
        })
    }
}

/// Free-function form of [`HestonLattice::backstep`].
pub fn heston_backstep<T: Scalar>(
    lattice: &HestonLattice<T>,
    node: TwoFactorNode,
    next: &[NodeSolution<T>],
) -> Result<StepResult<T>> {
    lattice.backstep(node, next)
}
