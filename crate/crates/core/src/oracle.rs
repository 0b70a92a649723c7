//! Closed-form and simulation references for the lattice engine.
//!
//! Continuous-time value functions and strategies for the classical
//! utility families, the Kraft strategy for Heston dynamics, the
//! Musiela–Zariphopoulou indifference price by Monte Carlo, and plain
//! risk-neutral lattice pricing.

use crate::error::{Error, Result};
use crate::hfunc::{approximate_utility_with_slope, HFunc};
use crate::lattice::{LatticeSpec, NodeId};
use crate::multifactor::{CorrelatedLattice, MzSpec, TwoFactorNode};
use crate::scalar::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Reference value, strategy (money in stock) and, for simulations, the
/// standard error of `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult<T> {
    pub value: T,
    pub strategy: Option<T>,
    pub stderr: Option<T>,
}

impl<T> OracleResult<T> {
    fn exact(value: T, strategy: T) -> Self {
        OracleResult {
            value,
            strategy: Some(strategy),
            stderr: None,
        }
    }
}

/// Black–Scholes market with a riskless bond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams<T> {
    pub r: T,
    pub mu: T,
    pub sigma: T,
    pub horizon: T,
}

impl<T: Scalar> MarketParams<T> {
    /// Sharpe ratio `(μ − r)/σ`.
    pub fn sharpe(&self) -> T {
        (self.mu - self.r) / self.sigma
    }

    /// `e^{−rT}`. The lattice value recursion discounts utility by `R⁻¹`
    /// per step, so its root value is this factor times the expected
    /// terminal utility the closed forms return.
    pub fn discount(&self) -> T {
        (-self.r * self.horizon).exp()
    }
}

/// Utility families with known continuous-time solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Utility<T> {
    /// `(x^{1−γ} − 1)/(1 − γ)` on `x > 0`.
    Crra { gamma: T },
    /// `−e^{−γx}`.
    Cara { gamma: T },
    /// `(w + √(β² + w²))^{−α}(w + α√(β² + w²))/(1 − α²)`.
    Sahara { alpha: T, beta: T },
}

impl<T: Scalar> Utility<T> {
    pub fn validate(&self) -> Result<()> {
        let one = T::one();
        match *self {
            Utility::Crra { gamma } if gamma > T::zero() && gamma != one => Ok(()),
            Utility::Cara { gamma } if gamma > T::zero() => Ok(()),
            Utility::Sahara { alpha, beta } if alpha > T::zero() && alpha != one && beta > T::zero() => {
                Ok(())
            }
            _ => Err(Error::InvalidParams(format!("invalid utility parameters {self:?}"))),
        }
    }

    pub fn value(&self, x: T) -> T {
        let one = T::one();
        match *self {
            Utility::Crra { gamma } => (x.powf(one - gamma) - one) / (one - gamma),
            Utility::Cara { gamma } => -(-gamma * x).exp(),
            Utility::Sahara { alpha, beta } => sahara_utility(alpha, beta, x),
        }
    }

    pub fn derivative(&self, x: T) -> T {
        match *self {
            Utility::Crra { gamma } => x.powf(-gamma),
            Utility::Cara { gamma } => gamma * (-gamma * x).exp(),
            Utility::Sahara { alpha, beta } => (x + (beta * beta + x * x).sqrt()).powf(-alpha),
        }
    }

    /// `n_points` equidistant kinks on `[w_min, w_max]`, left slope `U'(w_min)`.
    pub fn approximate(&self, w_min: T, w_max: T, n_points: usize) -> Result<HFunc<T>> {
        self.validate()?;
        if let Utility::Crra { .. } = self {
            if !(w_min > T::zero()) {
                return Err(Error::InvalidUtility(format!(
                    "CRRA utility needs positive wealth, got w_min = {w_min}"
                )));
            }
        }
        approximate_utility_with_slope(|x| self.value(x), self.derivative(w_min), w_min, w_max, n_points)
    }
}

fn sahara_utility<T: Scalar>(alpha: T, beta: T, w: T) -> T {
    let root = (beta * beta + w * w).sqrt();
    (w + root).powf(-alpha) * (w + alpha * root) / (T::one() - alpha * alpha)
}

/// Merton growth rate `ξ = (1 − γ)(r + (μ − r)²/(2γσ²))`.
pub fn merton_crra_xi<T: Scalar>(m: &MarketParams<T>, gamma: T) -> T {
    let lambda = m.sharpe();
    (T::one() - gamma) * (m.r + lambda * lambda / (T::lit(2.0) * gamma))
}

/// Continuous-time CRRA value and strategy at time 0.
///
/// The value is `e^{ξT}·w^{1−γ}/(1−γ) − 1/(1−γ)`: the growth factor scales
/// the power part of the utility only.
pub fn merton_crra<T: Scalar>(w: T, m: &MarketParams<T>, gamma: T) -> Result<OracleResult<T>> {
    check_crra(w, gamma)?;
    let one = T::one();
    let growth = (merton_crra_xi(m, gamma) * m.horizon).exp();
    let value = (growth * w.powf(one - gamma) - one) / (one - gamma);
    Ok(OracleResult::exact(value, crra_strategy(w, m, gamma)))
}

/// `e^{ξT}·U(w)`, which scales the constant in `U` as well.
pub fn merton_crra_scaled_utility<T: Scalar>(
    w: T,
    m: &MarketParams<T>,
    gamma: T,
) -> Result<OracleResult<T>> {
    check_crra(w, gamma)?;
    let growth = (merton_crra_xi(m, gamma) * m.horizon).exp();
    let value = growth * Utility::Crra { gamma }.value(w);
    Ok(OracleResult::exact(value, crra_strategy(w, m, gamma)))
}

fn check_crra<T: Scalar>(w: T, gamma: T) -> Result<()> {
    if !(w > T::zero()) {
        return Err(Error::InvalidParams(format!("CRRA needs positive wealth, got {w}")));
    }
    Utility::Crra { gamma }.validate()
}

fn crra_strategy<T: Scalar>(w: T, m: &MarketParams<T>, gamma: T) -> T {
    (m.mu - m.r) / (gamma * m.sigma * m.sigma) * w
}

/// `ξ = −(μ − r)²/(2σ²)`.
pub fn merton_cara_xi<T: Scalar>(m: &MarketParams<T>) -> T {
    let lambda = m.sharpe();
    -lambda * lambda / T::lit(2.0)
}

/// Continuous-time CARA value `e^{ξT}U(we^{rT})` and the constant strategy
/// `(μ − r)/(e^{rT}γσ²)`.
pub fn merton_cara<T: Scalar>(w: T, m: &MarketParams<T>, gamma: T) -> Result<OracleResult<T>> {
    Utility::Cara { gamma }.validate()?;
    let accrual = (m.r * m.horizon).exp();
    let value = (merton_cara_xi(m) * m.horizon).exp() * Utility::Cara { gamma }.value(w * accrual);
    let strategy = (m.mu - m.r) / (accrual * gamma * m.sigma * m.sigma);
    Ok(OracleResult::exact(value, strategy))
}

/// SAHARA scale at time `t`: `β·e^{−(r − ½((μ − r)/(ασ))²)(T − t)}`.
pub fn sahara_scale<T: Scalar>(t: T, m: &MarketParams<T>, alpha: T, beta: T) -> T {
    let z = (m.mu - m.r) / (alpha * m.sigma);
    beta * (-(m.r - T::lit(0.5) * z * z) * (m.horizon - t)).exp()
}

/// SAHARA value and strategy at `(w, t)`.
///
/// The value is `e^{(1−α)(r + λ²/(2α))(T−t)}·U_{α,b(t)}(w)` with `λ` the
/// Sharpe ratio; the strategy is `(μ − r)/(ασ²)·√(w² + b(t)²)`.
pub fn sahara<T: Scalar>(w: T, t: T, m: &MarketParams<T>, alpha: T, beta: T) -> Result<OracleResult<T>> {
    Utility::Sahara { alpha, beta }.validate()?;
    let b = sahara_scale(t, m, alpha, beta);
    let lambda = m.sharpe();
    let rate = (T::one() - alpha) * (m.r + lambda * lambda / (T::lit(2.0) * alpha));
    let value = (rate * (m.horizon - t)).exp() * sahara_utility(alpha, b, w);
    let strategy = (m.mu - m.r) / (alpha * m.sigma * m.sigma) * (w * w + b * b).sqrt();
    Ok(OracleResult::exact(value, strategy))
}

/// `U_{α,b(t)}(w)` without the time-dependent growth factor.
pub fn sahara_scaled_utility<T: Scalar>(w: T, t: T, m: &MarketParams<T>, alpha: T, beta: T) -> Result<T> {
    Utility::Sahara { alpha, beta }.validate()?;
    Ok(sahara_utility(alpha, sahara_scale(t, m, alpha, beta), w))
}

/// Parameters of the Kraft power-utility strategy under Heston dynamics
/// with `μ − r = λY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KraftParams<T> {
    pub gamma: T,
    pub lambda: T,
    pub rho: T,
    /// Volatility of the variance process.
    pub omega: T,
    pub kappa: T,
    pub horizon: T,
}

/// How the correction term attaches to the time factor `D(τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KraftGrouping {
    /// `w/γ·(λ + c·λ²)·D(τ)`; vanishes at maturity.
    A,
    /// `w/γ·(λ + c·λ²·D(τ))`; the myopic `wλ/γ` at maturity.
    #[default]
    B,
}

/// Kraft strategy (money in stock) at wealth `w` and time `t`.
pub fn kraft_heston<T: Scalar>(w: T, t: T, p: &KraftParams<T>, grouping: KraftGrouping) -> Result<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let KraftParams {
        gamma,
        lambda,
        rho,
        omega,
        kappa,
        horizon,
    } = *p;
    if !(gamma > T::zero()) {
        return Err(Error::InvalidParams(format!("risk aversion {gamma} must be positive")));
    }
    let k = kappa - (one - one / gamma) * rho * lambda * omega;
    let c = gamma / (gamma + rho * rho * (one - gamma));
    let b = -lambda * lambda * (one - gamma) / (two * c * gamma);
    let radicand = k * k + two * b * omega * omega;
    if !(radicand >= T::zero()) {
        return Err(Error::InvalidParams(format!(
            "negative radicand {radicand} in the Kraft exponent"
        )));
    }
    let a = radicand.sqrt();
    let tau = horizon - t;
    let e = (a * tau).exp();
    let d = (e - one) / (e * (k + a) + a - k);
    let correction = (one - gamma) * rho * omega * lambda * lambda / gamma;
    let factor = match grouping {
        KraftGrouping::A => (lambda + correction) * d,
        KraftGrouping::B => lambda + correction * d,
    };
    Ok(w / gamma * factor)
}

/// Risk-neutral price and root delta (shares) of a European claim.
pub fn crr_claim_price<T, F>(spec: &LatticeSpec<T>, payoff: F) -> Result<(T, T)>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let n = spec.steps();
    let mut layer: Vec<T> = spec.terminal_prices().into_iter().map(&payoff).collect();
    if n == 0 {
        return Ok((layer[0], T::zero()));
    }
    let mut root_children = (T::zero(), T::zero());
    for m in (0..n).rev() {
        if m == 0 {
            root_children = (layer[1], layer[0]);
        }
        let mut next = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let c = spec.step(NodeId::new(m, k))?;
            next.push((c.q * layer[k + 1] + (T::one() - c.q) * layer[k]) / c.growth);
        }
        layer = next;
    }
    let root = NodeId::new(0, 0);
    let s0 = spec.s0();
    let delta = (root_children.0 - root_children.1) / (s0 * (spec.up(root) - spec.down(root)));
    Ok((layer[0], delta))
}

/// Monte Carlo settings. Samples are drawn in antithetic pairs, in blocks
/// with their own counter-based stream, so results depend only on `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    /// Total number of draws, antithetic partners included.
    pub samples: usize,
    pub seed: u64,
}

const BLOCK_PAIRS: usize = 4096;

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    x: f64,
    z: f64,
    xx: f64,
    zz: f64,
    xz: f64,
}

impl Moments {
    fn add(&mut self, x: f64, z: f64) {
        self.n += 1.0;
        self.x += x;
        self.z += z;
        self.xx += x * x;
        self.zz += z * z;
        self.xz += x * z;
    }

    fn merge(mut self, o: Moments) -> Moments {
        self.n += o.n;
        self.x += o.x;
        self.z += o.z;
        self.xx += o.xx;
        self.zz += o.zz;
        self.xz += o.xz;
        self
    }
}

/// Indifference price of a claim `G(Y_T)` for a CARA investor (risk
/// aversion `gamma`) who trades only `S`, with zero interest rate:
///
/// ```text
/// π = ln E[e^{γ(1−ρ²)G(Y_T)} dQ/dP] / (γ(1−ρ²)),   dQ/dP = e^{−(μ_S/σ_S)W^S_T − μ_S²T/(2σ_S²)}
/// ```
///
/// The expectation is estimated as a ratio against the sample mean of
/// `dQ/dP`, so constant payoffs are priced exactly. The standard error uses
/// the delta method over antithetic pair averages.
pub fn mz_price_mc<T, G>(spec: &MzSpec<T>, gamma: T, payoff: G, opts: McOptions) -> Result<OracleResult<T>>
where
    T: Scalar,
    G: Fn(T) -> T + Sync,
{
    spec.validate()?;
    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
    let (rho, gamma_f) = (f(spec.rho), f(gamma));
    if rho.abs() >= 1.0 {
        return Err(Error::InvalidParams("correlation must lie strictly inside (-1, 1)".into()));
    }
    if spec.r != T::zero() {
        return Err(Error::InvalidParams("the price formula assumes a zero interest rate".into()));
    }
    if !(gamma_f > 0.0) {
        return Err(Error::InvalidParams(format!("risk aversion {gamma_f} must be positive")));
    }
    let pairs = opts.samples.div_ceil(2).max(2);
    let t = f(spec.horizon);
    let sqrt_t = t.sqrt();
    let (mu_s, sigma_s) = (f(spec.mu_s), f(spec.sigma_s));
    let (y0, mu_y, sigma_y) = (f(spec.y0), f(spec.mu_y), f(spec.sigma_y));
    let eff = gamma_f * (1.0 - rho * rho);
    let ortho = (1.0 - rho * rho).sqrt();
    let theta = mu_s / sigma_s;

    let draw = |z1: f64, z2: f64| -> (f64, f64) {
        let w_s = sqrt_t * z1;
        let w_y = sqrt_t * (rho * z1 + ortho * z2);
        let y_t = y0 * ((mu_y - 0.5 * sigma_y * sigma_y) * t + sigma_y * w_y).exp();
        let density = (-theta * w_s - 0.5 * theta * theta * t).exp();
        let g = f(payoff(T::lit(y_t)));
        ((eff * g).exp() * density, density)
    };

    let blocks = pairs.div_ceil(BLOCK_PAIRS);
    let partial: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(b as u64);
            let count = BLOCK_PAIRS.min(pairs - b * BLOCK_PAIRS);
            let mut m = Moments::default();
            for _ in 0..count {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let (xa, za) = draw(z1, z2);
                let (xb, zb) = draw(-z1, -z2);
                m.add(0.5 * (xa + xb), 0.5 * (za + zb));
            }
            m
        })
        .collect();
    let m = partial.into_iter().fold(Moments::default(), Moments::merge);

    let (mx, mz) = (m.x / m.n, m.z / m.n);
    let dof = m.n - 1.0;
    let var_x = (m.xx - m.n * mx * mx) / dof;
    let var_z = (m.zz - m.n * mz * mz) / dof;
    let cov = (m.xz - m.n * mx * mz) / dof;
    let price = (mx / mz).ln() / eff;
    let var_log = (var_x / (mx * mx) + var_z / (mz * mz) - 2.0 * cov / (mx * mz)).max(0.0) / m.n;
    Ok(OracleResult {
        value: T::lit(price),
        strategy: None,
        stderr: Some(T::lit(var_log.sqrt() / eff)),
    })
}

/// Exact exponential-utility seller price of `G(Y_T)` on the correlated
/// tree itself, by the one-step certainty-equivalent recursion
///
/// ```text
/// P = γ⁻¹ Σ_{η_S} q_{η_S} ln Σ_{η_Y} P(η_Y | η_S) e^{γ P'(η_S, η_Y)}
/// ```
///
/// with `q` risk neutral for `S`. The lattice engine run with the exact
/// exponential utility converges to this value; it isolates the time
/// discretisation from the engine's own error. Zero interest rate only.
pub fn mz_price_lattice<T, G>(spec: &MzSpec<T>, gamma: T, payoff: G) -> Result<T>
where
    T: Scalar,
    G: Fn(T) -> T,
{
    if spec.r != T::zero() {
        return Err(Error::InvalidParams("the price formula assumes a zero interest rate".into()));
    }
    if !(gamma > T::zero()) {
        return Err(Error::InvalidParams(format!("risk aversion {gamma} must be positive")));
    }
    let lattice = CorrelatedLattice::new(*spec)?;
    let n = spec.n;
    let q = lattice.coefficients().q;
    let t = lattice.transition();
    let p_up = t.p_up();
    // P(Y up | S up) and P(Y up | S down).
    let (c_up, c_down) = (t.p_uu / p_up, t.p_du / (T::one() - p_up));
    let mut prices: Vec<T> = (0..=n)
        .map(|l| payoff(lattice.factor_level(TwoFactorNode::new(n, 0, l))))
        .collect();
    if prices.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParams("payoff is not finite on the tree".into()));
    }
    // The claim depends on Y only, so prices are indexed by the Y level.
    let lse = |c: T, hi: T, lo: T| {
        let m = hi.max(lo);
        m + (c * (gamma * (hi - m)).exp() + (T::one() - c) * (gamma * (lo - m)).exp()).ln() / gamma
    };
    for m in (0..n).rev() {
        prices = (0..=m)
            .map(|l| {
                let (hi, lo) = (prices[l + 1], prices[l]);
                q * lse(c_up, hi, lo) + (T::one() - q) * lse(c_down, hi, lo)
            })
            .collect();
    }
    Ok(prices[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_market() -> MarketParams<f64> {
        MarketParams {
            r: 0.01,
            mu: 0.015,
            sigma: 0.1,
            horizon: 1.0,
        }
    }

    #[test]
    fn crra_reference_numbers() {
        let m = paper_market();
        let g = 2.0 / 3.0;
        assert!((merton_crra_xi(&m, g) - 0.003_958_333_333_333).abs() < 1e-12);
        for w in [0.5, 2.0, 7.0] {
            let o = merton_crra(w, &m, g).unwrap();
            assert!((o.strategy.unwrap() - 0.75 * w).abs() < 1e-12);
        }
        let no_premium = MarketParams { mu: 0.01, ..m };
        assert_eq!(merton_crra(1.0, &no_premium, g).unwrap().strategy, Some(0.0));
        assert!((merton_crra_xi(&no_premium, g) - (1.0 - g) * 0.01).abs() < 1e-15);
        assert!(merton_crra(0.0, &m, g).is_err());
        // both value conventions coincide at w = 1 only up to the constant
        let exact = merton_crra(1.0, &m, g).unwrap().value;
        let scaled = merton_crra_scaled_utility(1.0, &m, g).unwrap().value;
        assert!((exact - (merton_crra_xi(&m, g).exp() - 1.0) * 3.0).abs() < 1e-12);
        assert_eq!(scaled, 0.0);
    }

    #[test]
    fn cara_reference_numbers() {
        let m = paper_market();
        let o = merton_cara(1.0, &m, 2.0 / 3.0).unwrap();
        assert!((o.strategy.unwrap() - 0.742_537_375_312).abs() < 1e-11);
        assert!((merton_cara_xi(&m) + 0.00125).abs() < 1e-15);
        let no_premium = MarketParams { mu: 0.01, ..m };
        assert_eq!(merton_cara(3.0, &no_premium, 2.0 / 3.0).unwrap().strategy, Some(0.0));
    }

    #[test]
    fn sahara_reference_numbers() {
        let m = paper_market();
        let b0 = sahara_scale(0.0, &m, 2.0, 2.66);
        assert!((b0 - 2.634_355_5).abs() < 1e-6, "b0 = {b0}");
        let o = sahara(0.0, 0.0, &m, 2.0, 2.66).unwrap();
        assert!((o.strategy.unwrap() - 0.25 * b0).abs() < 1e-12);
        for w in [0.3, 1.7, 5.0] {
            let a = sahara(w, 0.0, &m, 2.0, 2.66).unwrap().strategy.unwrap();
            let b = sahara(-w, 0.0, &m, 2.0, 2.66).unwrap().strategy.unwrap();
            assert_eq!(a, b);
            assert!(a > 0.0);
        }
        let big = sahara(1e8, 0.0, &m, 2.0, 2.66).unwrap().strategy.unwrap();
        assert!((big / 1e8 - 0.25).abs() < 1e-12);
        assert!(sahara(1.0, 0.0, &m, 1.0, 2.66).is_err());
    }

    #[test]
    fn sahara_value_solves_hjb() {
        // V_t + r w V_w − ½λ² V_w²/V_ww = 0, checked by finite differences
        let m = MarketParams {
            r: 0.04,
            mu: 0.1,
            sigma: 0.2,
            horizon: 1.0,
        };
        let (alpha, beta) = (2.5, 1.3);
        let v = |w: f64, t: f64| sahara(w, t, &m, alpha, beta).unwrap().value;
        let lambda = m.sharpe();
        for (w, t) in [(0.7, 0.3), (-1.2, 0.6), (2.0, 0.1)] {
            let h = 1e-4;
            let vt = (v(w, t + h) - v(w, t - h)) / (2.0 * h);
            let vw = (v(w + h, t) - v(w - h, t)) / (2.0 * h);
            let vww = (v(w + h, t) - 2.0 * v(w, t) + v(w - h, t)) / (h * h);
            let residual = vt + m.r * w * vw - 0.5 * lambda * lambda * vw * vw / vww;
            assert!(residual.abs() < 1e-6, "residual {residual} at ({w}, {t})");
        }
    }

    #[test]
    fn crra_value_solves_hjb() {
        let m = paper_market();
        let g = 2.0 / 3.0;
        // V(t, w) = e^{ξ(T−t)} w^{1−γ}/(1−γ) − 1/(1−γ)
        let v = |w: f64, t: f64| {
            let shifted = MarketParams { horizon: m.horizon - t, ..m };
            merton_crra(w, &shifted, g).unwrap().value
        };
        let lambda = m.sharpe();
        let (w, t, h) = (1.5, 0.4, 1e-4);
        let vt = (v(w, t + h) - v(w, t - h)) / (2.0 * h);
        let vw = (v(w + h, t) - v(w - h, t)) / (2.0 * h);
        let vww = (v(w + h, t) - 2.0 * v(w, t) + v(w - h, t)) / (h * h);
        let residual = vt + m.r * w * vw - 0.5 * lambda * lambda * vw * vw / vww;
        assert!(residual.abs() < 1e-7, "residual {residual}");
    }

    #[test]
    fn utility_derivatives_match_finite_differences() {
        let cases = [
            Utility::Crra { gamma: 2.0 / 3.0 },
            Utility::Cara { gamma: 2.0 / 3.0 },
            Utility::Sahara { alpha: 2.0, beta: 2.66 },
        ];
        for u in cases {
            for x in [0.5f64, 1.0, 3.0] {
                let h = 1e-6;
                let fd = (u.value(x + h) - u.value(x - h)) / (2.0 * h);
                assert!((fd - u.derivative(x)).abs() < 1e-7, "{u:?} at {x}");
            }
        }
        assert!(Utility::Crra { gamma: 0.5 }.approximate(0.0, 1.0, 10).is_err());
        let f = Utility::Cara { gamma: 1.0 }.approximate(-1.0, 1.0, 10).unwrap();
        assert_eq!(f.len(), 10);
    }

    fn kraft_params() -> KraftParams<f64> {
        KraftParams {
            gamma: 2.0 / 3.0,
            lambda: 1.0 / 3.0,
            rho: 0.1,
            omega: 0.39,
            kappa: 1.15,
            horizon: 0.25,
        }
    }

    #[test]
    fn kraft_limits() {
        let p = kraft_params();
        let at_maturity = kraft_heston(2.0, 0.25, &p, KraftGrouping::B).unwrap();
        assert!((at_maturity - 2.0 * 0.5).abs() < 1e-15);
        assert_eq!(kraft_heston(2.0, 0.25, &p, KraftGrouping::A).unwrap(), 0.0);
        let uncorrelated = KraftParams { rho: 0.0, ..p };
        for t in [0.0, 0.1, 0.2] {
            let b = kraft_heston(1.0, t, &uncorrelated, KraftGrouping::B).unwrap();
            assert!((b - 0.5).abs() < 1e-15);
        }
        let mid = kraft_heston(1.0, 0.125, &p, KraftGrouping::B).unwrap();
        assert!(mid > 0.5 && mid < 0.5005, "mid = {mid}");
    }

    #[test]
    fn crr_put_call_parity_and_limits() {
        let spec = LatticeSpec::<f64>::crr_with_drift(5.0, 0.1, 0.01, 0.015, 1.0, 20).unwrap();
        for k in [3.0, 5.0, 7.0] {
            let (put, _) = crr_claim_price(&spec, |s: f64| (k - s).max(0.0)).unwrap();
            let (call, _) = crr_claim_price(&spec, |s: f64| (s - k).max(0.0)).unwrap();
            assert!((call - put - (5.0 - k * (-0.01f64).exp())).abs() < 1e-10);
        }
        assert_eq!(crr_claim_price(&spec, |_| 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(crr_claim_price(&spec, |s: f64| (1e-3 - s).max(0.0)).unwrap().0, 0.0);
    }

    #[test]
    fn crr_put_matches_binomial_weights() {
        // ∑_k C(n,k) q^k (1−q)^{n−k} Ψ(S_k) / R^n over all 2^n paths
        let n = 20;
        let spec = LatticeSpec::<f64>::crr_with_drift(5.0, 0.1, 0.01, 0.015, 1.0, n).unwrap();
        let c = spec.step(NodeId::new(0, 0)).unwrap();
        let mut sum = 0.0;
        let mut binom = 1.0;
        for k in 0..=n {
            if k > 0 {
                binom = binom * (n - k + 1) as f64 / k as f64;
            }
            let s = spec.price(NodeId::new(n, k));
            sum += binom * c.q.powi(k as i32) * (1.0 - c.q).powi((n - k) as i32) * (5.0 - s).max(0.0);
        }
        let oracle = sum / c.growth.powi(n as i32);
        let (put, delta) = crr_claim_price(&spec, |s: f64| (5.0 - s).max(0.0)).unwrap();
        assert!((put - oracle).abs() < 1e-12);
        assert!(delta < 0.0 && delta > -1.0);
    }

    fn mz() -> MzSpec<f64> {
        MzSpec {
            s0: 5.0,
            mu_s: 0.015,
            sigma_s: 0.1,
            y0: 5.0,
            mu_y: 0.015,
            sigma_y: 0.1,
            rho: 0.5,
            r: 0.0,
            horizon: 1.0,
            n: 20,
        }
    }

    #[test]
    fn lattice_mz_price_reference() {
        let put = |y: f64| (5.0 - y).max(0.0);
        let p = mz_price_lattice(&mz(), 2.0 / 3.0, put).unwrap();
        assert!((p - 0.201_411_096_871_131).abs() < 1e-12, "{p}");
        // ρ = 0: γ⁻¹ ln E[e^{γG}] over the symmetric binomial Y marginal
        let spec = MzSpec { rho: 0.0, ..mz() };
        let lat = CorrelatedLattice::new(spec).unwrap();
        let gamma = 2.0 / 3.0;
        let mut e = 0.0;
        let mut binom = 1.0;
        for l in 0..=spec.n {
            let y = lat.factor_level(TwoFactorNode::new(spec.n, 0, l));
            e += binom * 0.5f64.powi(spec.n as i32) * (gamma * put(y)).exp();
            binom = binom * (spec.n - l) as f64 / (l + 1) as f64;
        }
        let p0 = mz_price_lattice(&spec, gamma, put).unwrap();
        assert!((p0 - e.ln() / gamma).abs() < 1e-12);
        assert!(mz_price_lattice(&MzSpec { r: 0.01, ..mz() }, gamma, put).is_err());
    }

    #[test]
    fn mc_constant_payoffs_are_exact() {
        let opts = McOptions {
            samples: 20_000,
            seed: 7,
        };
        let zero = mz_price_mc(&mz(), 2.0 / 3.0, |_| 0.0, opts).unwrap();
        assert!(zero.value.abs() < 1e-12);
        let cash = mz_price_mc(&mz(), 2.0 / 3.0, |_| 1.25, opts).unwrap();
        assert!((cash.value - 1.25).abs() < 1e-12);
        assert!(mz_price_mc(&MzSpec { rho: 1.0, ..mz() }, 1.0, |_| 0.0, opts).is_err());
    }

    #[test]
    fn mc_independent_put_matches_quadrature() {
        // ρ = 0: π = γ⁻¹ ln E[e^{γ(K − Y_T)⁺}] with Y_T lognormal
        let spec = MzSpec { rho: 0.0, ..mz() };
        let gamma = 2.0 / 3.0;
        let k = 5.0;
        let (m, s) = ((spec.mu_y - 0.5 * spec.sigma_y * spec.sigma_y), spec.sigma_y);
        let steps = 20_000;
        let (lo, hi) = (-8.0, 8.0);
        let h = (hi - lo) / steps as f64;
        let mut integral = 0.0;
        for i in 0..=steps {
            let z = lo + i as f64 * h;
            let weight = if i == 0 || i == steps { 0.5 } else { 1.0 };
            let y = spec.y0 * (m + s * z).exp();
            let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            integral += weight * density * (gamma * (k - y).max(0.0)).exp();
        }
        let exact = (integral * h).ln() / gamma;
        let mc = mz_price_mc(
            &spec,
            gamma,
            |y| (k - y).max(0.0),
            McOptions {
                samples: 200_000,
                seed: 11,
            },
        )
        .unwrap();
        let se = mc.stderr.unwrap();
        assert!((mc.value - exact).abs() < 3.0 * se, "{} vs {exact} (se {se})", mc.value);
    }

    #[test]
    fn mc_is_reproducible_across_thread_counts() {
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    mz_price_mc(
                        &mz(),
                        2.0 / 3.0,
                        |y| (5.0 - y).max(0.0),
                        McOptions {
                            samples: 50_000,
                            seed: 3,
                        },
                    )
                    .unwrap()
                })
        };
        let a = run(1);
        assert_eq!(a, run(4));
        assert_eq!(a, run(8));
    }
}
