//! Recombining binomial trees for a single risky asset.
//!
//! Node `(m, k)` is the state after `k` up-moves in `m` steps; the up
//! successor is `(m + 1, k + 1)` and the down successor `(m + 1, k)`. From
//! the gross returns `u`, `d`, the riskless growth `R = e^{rΔt}` and the mean
//! rate `μ`, the physical and risk-neutral up-probabilities are
//!
//! ```text
//! p = (e^{μΔt} − d)/(u − d),   q = (R − d)/(u − d).
//! ```

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub m: usize,
    pub k: usize,
}

impl NodeId {
    pub fn new(m: usize, k: usize) -> Self {
        NodeId { m, k }
    }

    pub fn up(self) -> Self {
        NodeId::new(self.m + 1, self.k + 1)
    }

    pub fn down(self) -> Self {
        NodeId::new(self.m + 1, self.k)
    }
}

/// Everything a single backward step needs at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients<T> {
    pub up: T,
    pub down: T,
    pub growth: T,
    pub p: T,
    pub q: T,
}

impl<T: Scalar> StepCoefficients<T> {
    /// Derives `p` and `q` from returns, riskless growth and `e^{μΔt}`.
    pub fn from_returns(up: T, down: T, growth: T, mean_growth: T) -> Result<Self> {
        let spread = up - down;
        let p = (mean_growth - down) / spread;
        let q = (growth - down) / spread;
        for prob in [p, q] {
            if !(prob > T::zero() && prob < T::one()) {
                return Err(Error::Probability(prob.to_f64().unwrap_or(f64::NAN)));
            }
        }
        Ok(StepCoefficients {
            up,
            down,
            growth,
            p,
            q,
        })
    }

    /// Physical up-probability given directly; `q` from the returns.
    pub fn with_probability(up: T, down: T, growth: T, p: T) -> Result<Self> {
        let q = (growth - down) / (up - down);
        for prob in [p, q] {
            if !(prob > T::zero() && prob < T::one()) {
                return Err(Error::Probability(prob.to_f64().unwrap_or(f64::NAN)));
            }
        }
        Ok(StepCoefficients {
            up,
            down,
            growth,
            p,
            q,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Coefficients<T> {
    /// Constant returns; prices are `s0·u^k·d^{m−k}`.
    Crr { up: T, down: T, growth: T, mean_growth: T },
    /// Tabulated per-node returns and drift, per-step riskless rate.
    Table {
        up: Vec<Vec<T>>,
        down: Vec<Vec<T>>,
        rate: Vec<T>,
        mu: Vec<Vec<T>>,
        prices: Vec<Vec<T>>,
    },
}

/// A recombining binomial lattice with `n` steps over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec<T> {
    n: usize,
    horizon: T,
    s0: T,
    coeffs: Coefficients<T>,
}

fn check_node<T: Scalar>(m: usize, k: usize, up: T, growth: T, down: T) -> Result<()> {
    if up > growth && growth > down && down > T::zero() {
        Ok(())
    } else {
        Err(Error::Arbitrage {
            m,
            k,
            u: up.to_f64().unwrap_or(f64::NAN),
            growth: growth.to_f64().unwrap_or(f64::NAN),
            d: down.to_f64().unwrap_or(f64::NAN),
        })
    }
}

impl<T: Scalar> LatticeSpec<T> {
    /// Cox–Ross–Rubinstein tree: `u = 1/d = e^{σ√Δt}`, `μ = r + σ²/2`.
    pub fn crr(s0: T, sigma: T, r: T, horizon: T, n: usize) -> Result<Self> {
        let mu = r + sigma * sigma / T::lit(2.0);
        Self::crr_with_drift(s0, sigma, r, mu, horizon, n)
    }

    /// CRR returns with an explicit mean rate `μ`.
    pub fn crr_with_drift(s0: T, sigma: T, r: T, mu: T, horizon: T, n: usize) -> Result<Self> {
        if !(sigma > T::zero()) || !(horizon > T::zero()) || !(s0 > T::zero()) {
            return Err(Error::InvalidSpec(
                "sigma, horizon and s0 must be positive".into(),
            ));
        }
        let dt = horizon / T::from_usize_lossy(n.max(1));
        let up = (sigma * dt.sqrt()).exp();
        let down = up.recip();
        Self::constant(s0, up, down, r, mu, horizon, n)
    }

    /// Constant-coefficient tree with arbitrary returns.
    pub fn constant(s0: T, up: T, down: T, r: T, mu: T, horizon: T, n: usize) -> Result<Self> {
        let dt = horizon / T::from_usize_lossy(n.max(1));
        let growth = (r * dt).exp();
        let mean_growth = (mu * dt).exp();
        check_node(0, 0, up, growth, down)?;
        StepCoefficients::from_returns(up, down, growth, mean_growth)?;
        Ok(LatticeSpec {
            n,
            horizon,
            s0,
            coeffs: Coefficients::Crr {
                up,
                down,
                growth,
                mean_growth,
            },
        })
    }

    /// Tabulated tree. `up[m][k]`, `down[m][k]` and `mu[m][k]` for
    /// `m < n`, `k ≤ m`; `rate[m]` per step. Prices follow the down-path and
    /// must recombine to a relative `1e-9`.
    pub fn table(
        s0: T,
        horizon: T,
        rate: Vec<T>,
        up: Vec<Vec<T>>,
        down: Vec<Vec<T>>,
        mu: Vec<Vec<T>>,
    ) -> Result<Self> {
        let n = rate.len();
        if up.len() != n || down.len() != n || mu.len() != n {
            return Err(Error::InvalidSpec(format!(
                "tables must have {n} steps (rate length)"
            )));
        }
        for m in 0..n {
            if up[m].len() != m + 1 || down[m].len() != m + 1 || mu[m].len() != m + 1 {
                return Err(Error::InvalidSpec(format!(
                    "step {m} must have {} levels",
                    m + 1
                )));
            }
        }
        let dt = horizon / T::from_usize_lossy(n.max(1));
        for m in 0..n {
            let growth = (rate[m] * dt).exp();
            for k in 0..=m {
                check_node(m, k, up[m][k], growth, down[m][k])?;
                StepCoefficients::from_returns(
                    up[m][k],
                    down[m][k],
                    growth,
                    (mu[m][k] * dt).exp(),
                )?;
            }
        }
        let mut prices = vec![vec![s0]];
        for m in 0..n {
            let prev = &prices[m];
            let mut next = Vec::with_capacity(m + 2);
            next.push(prev[0] * down[m][0]);
            for k in 1..=m + 1 {
                let via_up = prev[k - 1] * up[m][k - 1];
                if k <= m {
                    let via_down = prev[k] * down[m][k];
                    let scale = via_up.abs().max(via_down.abs());
                    if (via_up - via_down).abs() > T::lit(1e-9) * scale {
                        return Err(Error::InvalidSpec(format!(
                            "tree does not recombine at step {}, level {k}",
                            m + 1
                        )));
                    }
                }
                next.push(via_up);
            }
            prices.push(next);
        }
        Ok(LatticeSpec {
            n,
            horizon,
            s0,
            coeffs: Coefficients::Table {
                up,
                down,
                rate,
                mu,
                prices,
            },
        })
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.n.max(1))
    }

    pub fn s0(&self) -> T {
        self.s0
    }

    /// `N(m)`: the highest price-level index at step `m`.
    pub fn levels(&self, m: usize) -> usize {
        m
    }

    pub fn up(&self, node: NodeId) -> T {
        match &self.coeffs {
            Coefficients::Crr { up, .. } => *up,
            Coefficients::Table { up, .. } => up[node.m][node.k],
        }
    }

    pub fn down(&self, node: NodeId) -> T {
        match &self.coeffs {
            Coefficients::Crr { down, .. } => *down,
            Coefficients::Table { down, .. } => down[node.m][node.k],
        }
    }

    /// Riskless gross return `R = e^{r(t)Δt}` over step `m → m+1`.
    pub fn growth(&self, m: usize) -> T {
        match &self.coeffs {
            Coefficients::Crr { growth, .. } => *growth,
            Coefficients::Table { rate, .. } => (rate[m] * self.dt()).exp(),
        }
    }

    fn mean_growth(&self, node: NodeId) -> T {
        match &self.coeffs {
            Coefficients::Crr { mean_growth, .. } => *mean_growth,
            Coefficients::Table { mu, .. } => (mu[node.m][node.k] * self.dt()).exp(),
        }
    }

    /// Asset price at a node.
    pub fn price(&self, node: NodeId) -> T {
        match &self.coeffs {
            Coefficients::Crr { up, down, .. } => {
                self.s0 * up.powi(node.k as i32) * down.powi((node.m - node.k) as i32)
            }
            Coefficients::Table { prices, .. } => prices[node.m][node.k],
        }
    }

    /// `(p, q)`: physical and risk-neutral up-probabilities at a node.
    pub fn probabilities(&self, node: NodeId) -> Result<(T, T)> {
        let s = self.step(node)?;
        Ok((s.p, s.q))
    }

    pub fn step(&self, node: NodeId) -> Result<StepCoefficients<T>> {
        if node.m >= self.n || node.k > self.levels(node.m) {
            return Err(Error::InvalidSpec(format!(
                "node ({}, {}) has no successors",
                node.m, node.k
            )));
        }
        StepCoefficients::from_returns(
            self.up(node),
            self.down(node),
            self.growth(node.m),
            self.mean_growth(node),
        )
    }

    /// Prices of all terminal nodes, indexed by `k`.
    pub fn terminal_prices(&self) -> Vec<T> {
        (0..=self.levels(self.n))
            .map(|k| self.price(NodeId::new(self.n, k)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_market() -> LatticeSpec<f64> {
        LatticeSpec::crr_with_drift(5.0, 0.10, 0.01, 0.015, 1.0, 20).unwrap()
    }

    #[test]
    fn crr_returns() {
        let l = paper_market();
        let node = NodeId::new(0, 0);
        assert!((l.up(node) - 1.022_612_5).abs() < 1e-7);
        assert!((l.down(node) - 0.977_887_4).abs() < 1e-7);
        assert!((l.growth(0) - 1.000_500_1).abs() < 1e-7);
        assert!((l.dt() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn crr_probabilities() {
        let l = paper_market();
        let (p, q) = l.probabilities(NodeId::new(3, 1)).unwrap();
        assert!((q - 0.505_592_266_533).abs() < 1e-10, "q = {q}");
        assert!((p - 0.511_185_465_328).abs() < 1e-10, "p = {p}");
    }

    #[test]
    fn risk_neutral_drift_gives_p_equal_q() {
        let l = LatticeSpec::crr_with_drift(1.0, 0.2, 0.03, 0.03, 1.0, 4).unwrap();
        let (p, q) = l.probabilities(NodeId::new(0, 0)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn hand_computed_q() {
        let l = LatticeSpec::<f64>::constant(1.0, 2.0, 0.5, 0.0, 0.0, 1.0, 1).unwrap();
        let (p, q) = l.probabilities(NodeId::new(0, 0)).unwrap();
        assert!((q - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p, q);
    }

    #[test]
    fn arbitrage_guard() {
        // u = e^{σ√Δt} equal to R = e^{rΔt} when r = σ with Δt = 1
        let err = LatticeSpec::crr(1.0, 0.1, 0.1, 1.0, 1).unwrap_err();
        assert!(matches!(err, Error::Arbitrage { .. }));
        // physical probability outside (0, 1)
        assert!(matches!(
            LatticeSpec::crr_with_drift(1.0, 0.1, 0.0, 1.0, 1.0, 1),
            Err(Error::Probability(_))
        ));
    }

    #[test]
    fn prices_recombine() {
        let l = paper_market();
        for m in 0..l.steps() {
            for k in 0..=m {
                let node = NodeId::new(m, k);
                let via_up_then_down = l.price(node) * l.up(node) * l.down(node.up());
                let via_down_then_up = l.price(node) * l.down(node) * l.up(node.down());
                assert!((via_up_then_down - via_down_then_up).abs() < 1e-12);
                assert!((l.price(node.up()) - l.price(node) * l.up(node)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn table_prices_and_validation() {
        let up = vec![vec![1.2], vec![1.1, 1.1]];
        let down = vec![vec![0.9], vec![0.825, 0.825]];
        let mu = vec![vec![0.02], vec![0.0, 0.05]];
        let l = LatticeSpec::<f64>::table(10.0, 1.0, vec![0.01, 0.02], up, down, mu).unwrap();
        assert!((l.price(NodeId::new(2, 1)) - 10.0 * 1.2 * 0.825).abs() < 1e-12);
        assert!((l.price(NodeId::new(2, 1)) - 10.0 * 0.9 * 1.1).abs() < 1e-12);
        assert!((l.price(NodeId::new(2, 0)) - 10.0 * 0.9 * 0.825).abs() < 1e-12);
        assert!((l.growth(1) - (0.02f64 * 0.5).exp()).abs() < 1e-15);
        // non-recombining table
        let bad = LatticeSpec::table(
            10.0,
            1.0,
            vec![0.0, 0.0],
            vec![vec![1.2], vec![1.1, 1.3]],
            vec![vec![0.9], vec![0.95, 0.8]],
            vec![vec![0.0], vec![0.0, 0.0]],
        );
        assert!(bad.is_err());
    }
}
