//! Run configuration: one TOML file with market, utility, solver, claim,
//! output and compare sections.
//!
//! Any number may be written as a TOML number or as a string, optionally
//! with a `%` suffix: `r = "1%"`, `sigma = 0.1` and `mu = "0.015"` all work.

use anyhow::{bail, ensure, Context, Result};
use kinkopt::oracle::{KraftGrouping, Utility};
use kinkopt::{HFunc, Side, Underlying};
use serde::{Deserialize, Deserializer};
use std::path::Path;

/// A real number in decimal or percent form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Float(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Float(x) => Ok(Num(x)),
            Raw::Int(i) => Ok(Num(i as f64)),
            Raw::Text(s) => parse_number(&s).map(Num).map_err(serde::de::Error::custom),
        }
    }
}

/// `"1.5%"` → 0.015, `"0.2"` → 0.2.
pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (body, scale) = match t.strip_suffix('%') {
        Some(b) => (b.trim_end(), 0.01),
        None => (t, 1.0),
    };
    body.parse::<f64>()
        .map(|x| x * scale)
        .map_err(|_| format!("`{s}` is not a number or percentage"))
}

fn nums(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

fn table(v: &[Vec<Num>]) -> Vec<Vec<f64>> {
    v.iter().map(|r| nums(r)).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: Market,
    pub utility: UtilityConfig,
    pub solver: Solver,
    pub claim: Option<Claim>,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub compare: Compare,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum Market {
    Crr {
        s0: Num,
        sigma: Num,
        r: Num,
        /// Defaults to `r + σ²/2`.
        mu: Option<Num>,
        horizon: Num,
    },
    Table {
        s0: Num,
        horizon: Num,
        rate: Vec<Num>,
        up: Vec<Vec<Num>>,
        down: Vec<Vec<Num>>,
        mu: Vec<Vec<Num>>,
    },
    Mz {
        s0: Num,
        mu_s: Num,
        sigma_s: Num,
        y0: Num,
        mu_y: Num,
        sigma_y: Num,
        rho: Num,
        r: Num,
        horizon: Num,
    },
    Heston {
        s0: Num,
        /// Initial variance.
        y0: Num,
        kappa: Num,
        theta: Num,
        omega: Num,
        rho: Num,
        #[serde(default)]
        mu: Option<Num>,
        r: Num,
        horizon: Num,
        m_z: usize,
        m_v: usize,
        /// Market price of risk: the drift becomes `r + λY`.
        lambda: Option<Num>,
    },
}

impl Market {
    pub fn name(&self) -> &'static str {
        match self {
            Market::Crr { .. } => "crr",
            Market::Table { .. } => "table",
            Market::Mz { .. } => "mz",
            Market::Heston { .. } => "heston",
        }
    }

    pub fn s0(&self) -> f64 {
        match self {
            Market::Crr { s0, .. }
            | Market::Table { s0, .. }
            | Market::Mz { s0, .. }
            | Market::Heston { s0, .. } => s0.0,
        }
    }

    pub fn table_steps(&self) -> Option<usize> {
        match self {
            Market::Table { rate, .. } => Some(rate.len()),
            _ => None,
        }
    }

    pub fn lattice(&self, n: usize) -> Result<kinkopt::LatticeSpec<f64>> {
        Ok(match self {
            Market::Crr {
                s0,
                sigma,
                r,
                mu,
                horizon,
            } => {
                let mu = mu.map_or(r.0 + sigma.0 * sigma.0 / 2.0, |m| m.0);
                kinkopt::LatticeSpec::crr_with_drift(s0.0, sigma.0, r.0, mu, horizon.0, n)?
            }
            Market::Table {
                s0,
                horizon,
                rate,
                up,
                down,
                mu,
            } => kinkopt::LatticeSpec::table(
                s0.0,
                horizon.0,
                nums(rate),
                table(up),
                table(down),
                table(mu),
            )?,
            _ => bail!("the {} market is not a single-asset lattice", self.name()),
        })
    }

    pub fn mz(&self, n: usize) -> Option<kinkopt::MzSpec<f64>> {
        match *self {
            Market::Mz {
                s0,
                mu_s,
                sigma_s,
                y0,
                mu_y,
                sigma_y,
                rho,
                r,
                horizon,
            } => Some(kinkopt::MzSpec {
                s0: s0.0,
                mu_s: mu_s.0,
                sigma_s: sigma_s.0,
                y0: y0.0,
                mu_y: mu_y.0,
                sigma_y: sigma_y.0,
                rho: rho.0,
                r: r.0,
                horizon: horizon.0,
                n,
            }),
            _ => None,
        }
    }

    pub fn heston(&self, n: usize) -> Option<kinkopt::HestonSpec<f64>> {
        match *self {
            Market::Heston {
                s0,
                y0,
                kappa,
                theta,
                omega,
                rho,
                mu,
                r,
                horizon,
                m_z,
                m_v,
                lambda,
            } => Some(kinkopt::HestonSpec {
                kappa: kappa.0,
                theta: theta.0,
                omega: omega.0,
                rho: rho.0,
                mu: mu.map_or(r.0, |m| m.0),
                r: r.0,
                horizon: horizon.0,
                n,
                m_z,
                m_v,
                s0: s0.0,
                y0: y0.0,
                lambda: lambda.map(|l| l.0),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum UtilityConfig {
    Crra {
        gamma: Num,
        w_min: Num,
        w_max: Num,
        n_points: usize,
    },
    Cara {
        gamma: Num,
        w_min: Num,
        w_max: Num,
        n_points: usize,
    },
    Sahara {
        alpha: Num,
        beta: Num,
        w_min: Num,
        w_max: Num,
        n_points: usize,
    },
    /// Kinks given directly.
    Kinks {
        xs: Vec<Num>,
        vs: Vec<Num>,
        slope_left: Num,
    },
}

impl UtilityConfig {
    pub fn family(&self) -> Option<Utility<f64>> {
        match *self {
            UtilityConfig::Crra { gamma, .. } => Some(Utility::Crra { gamma: gamma.0 }),
            UtilityConfig::Cara { gamma, .. } => Some(Utility::Cara { gamma: gamma.0 }),
            UtilityConfig::Sahara { alpha, beta, .. } => Some(Utility::Sahara {
                alpha: alpha.0,
                beta: beta.0,
            }),
            UtilityConfig::Kinks { .. } => None,
        }
    }

    /// Approximation interval.
    pub fn interval(&self) -> (f64, f64) {
        match self {
            UtilityConfig::Crra { w_min, w_max, .. }
            | UtilityConfig::Cara { w_min, w_max, .. }
            | UtilityConfig::Sahara { w_min, w_max, .. } => (w_min.0, w_max.0),
            UtilityConfig::Kinks { xs, .. } => (
                xs.first().map_or(f64::NAN, |x| x.0),
                xs.last().map_or(f64::NAN, |x| x.0),
            ),
        }
    }

    /// The class-ℋ utility on `[lo, hi]`, or the given kinks.
    pub fn build_on(&self, lo: f64, hi: f64) -> Result<HFunc<f64>> {
        Ok(match self {
            UtilityConfig::Crra { n_points, .. }
            | UtilityConfig::Cara { n_points, .. }
            | UtilityConfig::Sahara { n_points, .. } => self
                .family()
                .expect("parametric family")
                .approximate(lo, hi, *n_points)?,
            UtilityConfig::Kinks { xs, vs, slope_left } => {
                HFunc::new(nums(xs), nums(vs), slope_left.0)?
            }
        })
    }

    pub fn build(&self) -> Result<HFunc<f64>> {
        let (lo, hi) = self.interval();
        self.build_on(lo, hi)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    /// Number of time steps; a table market fixes it.
    pub n: Option<usize>,
    #[serde(default = "zero")]
    pub eps_step: Num,
    #[serde(default = "one")]
    pub prune_every: usize,
}

fn zero() -> Num {
    Num(0.0)
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Put,
    Call,
    Cash,
    Zero,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub payoff: PayoffKind,
    /// Strikes for puts and calls.
    #[serde(default)]
    pub strikes: Vec<Num>,
    /// Amount for a cash claim.
    pub amount: Option<Num>,
    #[serde(default = "seller")]
    pub side: Side,
    #[serde(default)]
    pub underlying: Underlying,
}

fn seller() -> Side {
    Side::Seller
}

impl Claim {
    /// `(strike, payoff)` pairs; the strike is `None` for strike-free payoffs.
    pub fn payoffs(&self) -> Vec<(Option<f64>, kinkopt::Payoff<f64>)> {
        use kinkopt::Payoff;
        match self.payoff {
            PayoffKind::Put => self
                .strikes
                .iter()
                .map(|k| (Some(k.0), Payoff::Put { strike: k.0 }))
                .collect(),
            PayoffKind::Call => self
                .strikes
                .iter()
                .map(|k| (Some(k.0), Payoff::Call { strike: k.0 }))
                .collect(),
            PayoffKind::Cash => vec![(None, Payoff::Cash(self.amount.map_or(0.0, |a| a.0)))],
            PayoffKind::Zero => vec![(None, Payoff::Zero)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WealthGrid {
    pub from: Num,
    pub to: Num,
    pub points: usize,
}

impl WealthGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.from.0];
        }
        (0..self.points)
            .map(|i| {
                let (a, b) = ((self.points - 1 - i) as f64, i as f64);
                (a * self.from.0 + b * self.to.0) / (a + b)
            })
            .collect()
    }
}

/// A node of a retained layer: `index` is the flat node index of layer `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSelect {
    pub m: usize,
    /// Defaults to the central node of the layer.
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub format: Format,
    pub path: Option<String>,
    /// Defaults to the middle half of the utility interval, 101 points.
    pub wealth: Option<WealthGrid>,
    /// Defaults to the root.
    pub node: Option<NodeSelect>,
    /// Include every node's value function and policy (JSON only).
    #[serde(default)]
    pub surface: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    #[default]
    Value,
    Strategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Deviation {
    #[default]
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Compare {
    /// Bound on the gated statistic; without it the report never fails.
    pub tolerance: Option<Num>,
    #[serde(default)]
    pub quantity: Quantity,
    #[serde(default)]
    pub statistic: Statistic,
    /// Relative deviations are undefined where the oracle vanishes, e.g.
    /// far out-of-the-money prices; gate those on absolute deviations.
    #[serde(default)]
    pub deviation: Deviation,
    pub kraft_grouping: Option<KraftGrouping>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            samples: default_samples(),
            seed: default_seed(),
        }
    }
}

fn default_samples() -> usize {
    100_000
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("malformed config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of time steps from the solver section or the table.
    pub fn steps(&self) -> Result<usize> {
        match (self.solver.n, self.market.table_steps()) {
            (Some(n), Some(t)) if n != t => {
                bail!("solver.n = {n} but the table market has {t} steps")
            }
            (_, Some(t)) => Ok(t),
            (Some(n), None) => Ok(n),
            (None, None) => bail!("solver.n is required"),
        }
    }

    pub fn wealth_grid(&self) -> Vec<f64> {
        match self.output.wealth {
            Some(g) => g.points(),
            None => {
                let (lo, hi) = self.utility.interval();
                WealthGrid {
                    from: Num(lo + 0.25 * (hi - lo)),
                    to: Num(lo + 0.75 * (hi - lo)),
                    points: 101,
                }
                .points()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        self.steps()?;
        ensure!(
            self.solver.eps_step.0 >= 0.0 && self.solver.eps_step.0.is_finite(),
            "solver.eps_step must be a non-negative number"
        );
        ensure!(self.solver.prune_every >= 1, "solver.prune_every must be at least 1");
        let (lo, hi) = self.utility.interval();
        ensure!(lo < hi, "utility interval [{lo}, {hi}] is empty");
        if let UtilityConfig::Kinks { xs, vs, .. } = &self.utility {
            ensure!(xs.len() == vs.len(), "utility.xs and utility.vs differ in length");
        }
        if let Some(g) = self.output.wealth {
            ensure!(g.points >= 1, "output.wealth.points must be at least 1");
            ensure!(g.from.0 <= g.to.0, "output.wealth.from exceeds output.wealth.to");
            ensure!(
                g.from.0 >= lo && g.to.0 <= hi,
                "wealth grid [{}, {}] leaves the utility interval [{lo}, {hi}]",
                g.from.0,
                g.to.0
            );
        }
        if self.output.surface {
            ensure!(
                self.output.format == Format::Json,
                "output.surface needs the json format"
            );
        }
        if let Some(c) = &self.claim {
            match c.payoff {
                PayoffKind::Put | PayoffKind::Call => {
                    ensure!(!c.strikes.is_empty(), "claim.strikes is empty")
                }
                PayoffKind::Cash => ensure!(c.amount.is_some(), "claim.amount is required"),
                PayoffKind::Zero => {}
            }
            if c.underlying == Underlying::Factor {
                ensure!(
                    matches!(self.market, Market::Mz { .. } | Market::Heston { .. }),
                    "a claim on the factor needs the mz or heston market"
                );
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CRR: &str = r#"
        [market]
        model = "crr"
        s0 = 5
        r = "1%"
        sigma = "10%"
        mu = "1.5%"
        horizon = 1

        [utility]
        kind = "crra"
        gamma = 0.6666666666666666
        w_min = 2
        w_max = 10
        n_points = 50

        [solver]
        n = 20
    "#;

    #[test]
    fn percentages() {
        assert_eq!(parse_number("1.5%").unwrap(), 0.015);
        assert_eq!(parse_number(" 10 % ").unwrap(), 0.1);
        assert_eq!(parse_number("0.25").unwrap(), 0.25);
        assert!(parse_number("ten").is_err());
    }

    #[test]
    fn parses_crr_config() {
        let cfg = RunConfig::parse(CRR).unwrap();
        match cfg.market {
            Market::Crr { r, sigma, mu, .. } => {
                assert_eq!(r.0, 0.01);
                assert_eq!(sigma.0, 0.1);
                assert_eq!(mu.unwrap().0, 0.015);
            }
            _ => panic!("wrong market"),
        }
        assert_eq!(cfg.steps().unwrap(), 20);
        let grid = cfg.wealth_grid();
        assert_eq!(grid.len(), 101);
        assert_eq!((grid[0], grid[100]), (4.0, 8.0));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::parse("[market]\nmodel = \"crr\"").is_err());
        let outside = format!("{CRR}\n[output]\nwealth = {{ from = 0, to = 5, points = 3 }}");
        assert!(RunConfig::parse(&outside).is_err());
        let typo = CRR.replace("n_points", "npoints");
        assert!(RunConfig::parse(&typo).is_err());
        let no_strikes = format!("{CRR}\n[claim]\npayoff = \"put\"");
        assert!(RunConfig::parse(&no_strikes).is_err());
    }
}
