//! `solve`, `price` and `compare`.

use crate::config::{Deviation, Market, Quantity, RunConfig, Statistic, UtilityConfig};
use crate::model::{Model, Selected};
use crate::output::{Cell, Table};
use anyhow::{bail, ensure, Context, Result};
use kinkopt::oracle::{
    crr_claim_price, kraft_heston, merton_cara, merton_crra, mz_price_mc, sahara, KraftGrouping,
    KraftParams, MarketParams, McOptions, Utility,
};
use kinkopt::{quote, ClaimSpec, HFunc, Side, SolveOptions, Underlying, ValueSurface};
use serde_json::json;

/// Settings the command line may override.
#[derive(Debug, Clone, Copy)]
pub struct Overrides {
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    pub kraft_grouping: Option<KraftGrouping>,
}

pub struct Run {
    pub cfg: RunConfig,
    pub model: Model,
    pub eps: f64,
    pub seed: u64,
    pub grouping: KraftGrouping,
}

impl Run {
    pub fn new(cfg: RunConfig, o: Overrides) -> Result<Self> {
        let eps = o.eps.unwrap_or(cfg.solver.eps_step.0);
        ensure!(eps >= 0.0 && eps.is_finite(), "--eps must be a non-negative number");
        let model = Model::build(&cfg)?;
        Ok(Run {
            eps,
            seed: o.seed.unwrap_or(cfg.oracle.seed),
            grouping: o
                .kraft_grouping
                .or(cfg.compare.kraft_grouping)
                .unwrap_or_default(),
            model,
            cfg,
        })
    }

    fn options(&self, at: Selected) -> SolveOptions<f64> {
        SolveOptions {
            eps_step: self.eps,
            prune_every: self.cfg.solver.prune_every,
            retain: at.retain(self.cfg.output.surface),
        }
    }

    fn solve_with(&self, u: &HFunc<f64>, at: Selected) -> Result<ValueSurface<f64>> {
        let count = self.model.terminal_states().len();
        self.model.solve(vec![u.clone(); count], &self.options(at))
    }

    fn base_meta(&self, t: &mut Table, at: Selected) {
        let (s, y) = self.model.state(at);
        let n = self.model.steps();
        t.meta("market", json!(self.cfg.market.name()));
        t.meta("steps", json!(n));
        t.meta("eps_step", json!(self.eps));
        t.meta(
            "node",
            json!({
                "m": at.m,
                "index": at.index,
                "t": self.model.horizon() * at.m as f64 / n.max(1) as f64,
                "s": s,
                "y": factor_json(y, &self.model),
            }),
        );
    }

    fn claims(&self) -> Result<Vec<(Option<f64>, ClaimSpec<f64>)>> {
        let claim = self.cfg.claim.as_ref().context("the claim section is required")?;
        Ok(claim
            .payoffs()
            .into_iter()
            .map(|(k, p)| (k, ClaimSpec::new(p, claim.underlying, claim.side)))
            .collect())
    }

    /// Utility on the approximation interval widened to cover every claim.
    fn claim_utility(&self, claims: &[(Option<f64>, ClaimSpec<f64>)]) -> Result<HFunc<f64>> {
        if let UtilityConfig::Kinks { .. } = self.cfg.utility {
            return self.cfg.utility.build();
        }
        let states = self.model.terminal_states();
        let (lo, hi) = self.cfg.utility.interval();
        let (mut a, mut b) = (lo, hi);
        for (_, c) in claims {
            let (l, h) = c.widened_interval(lo, hi, &states)?;
            a = a.min(l);
            b = b.max(h);
        }
        self.cfg.utility.build_on(a, b)
    }
}

fn factor_json(y: f64, model: &Model) -> serde_json::Value {
    match model {
        Model::Single(_) => serde_json::Value::Null,
        _ => json!(y),
    }
}

pub fn solve(run: &Run) -> Result<Table> {
    let at = run.model.select(run.cfg.output.node)?;
    let u = run.cfg.utility.build()?;
    let v = run.solve_with(&u, at)?;
    let node = at.get(&v)?;
    let mut t = Table::new(&["w [currency]", "value [utility]", "policy [currency in stock]"]);
    for w in run.cfg.wealth_grid() {
        t.push(vec![w.into(), node.value.evaluate(w).into(), node.policy_at(w).into()]);
    }
    run.base_meta(&mut t, at);
    t.meta("kinks", json!(node.value.len()));
    if run.cfg.output.surface {
        t.surface = Some(serde_json::to_value(v.records())?);
    }
    Ok(t)
}

/// Oracle price and delta for one claim, when the model has one.
struct ClaimOracle {
    price: f64,
    delta: Option<f64>,
    stderr: Option<f64>,
}

fn claim_oracle(run: &Run, claim: &ClaimSpec<f64>) -> Result<Option<ClaimOracle>> {
    let payoff = |x: f64| claim.payoff.value(x);
    Ok(match (&run.model, claim.underlying) {
        (Model::Single(spec), Underlying::Asset) => {
            let (price, delta) = crr_claim_price(spec, payoff)?;
            Some(ClaimOracle {
                price,
                delta: Some(delta),
                stderr: None,
            })
        }
        (Model::Mz(lattice), Underlying::Factor) => {
            let spec = lattice.spec();
            match run.cfg.utility.family() {
                Some(Utility::Cara { gamma }) if spec.r == 0.0 && claim.side == Side::Seller => {
                    let mc = mz_price_mc(
                        spec,
                        gamma,
                        payoff,
                        McOptions {
                            samples: run.cfg.oracle.samples,
                            seed: run.seed,
                        },
                    )?;
                    Some(ClaimOracle {
                        price: mc.value,
                        delta: None,
                        stderr: mc.stderr,
                    })
                }
                _ => None,
            }
        }
        _ => None,
    })
}

pub fn price(run: &Run) -> Result<Table> {
    let claims = run.claims()?;
    if let Some(sel) = run.cfg.output.node {
        ensure!(sel.m == 0, "prices are quoted at the root; drop output.node");
    }
    let root = Selected { m: 0, index: 0 };
    let u = run.claim_utility(&claims)?;
    let states = run.model.terminal_states();
    let opts = run.options(root);
    let v = run.model.solve(vec![u.clone(); states.len()], &opts)?;
    let s0 = run.cfg.market.s0();
    let mut t = Table::new(&[
        "strike [currency]",
        "w [currency]",
        "price [currency]",
        "delta [shares]",
        "oracle_price [currency]",
        "oracle_delta [shares]",
    ]);
    let mut stderrs = Vec::new();
    for (strike, claim) in &claims {
        let vs = run.model.solve(claim.terminals(&u, &states)?, &opts)?;
        let oracle = claim_oracle(run, claim)?;
        if let Some(se) = oracle.as_ref().and_then(|o| o.stderr) {
            stderrs.push(json!({ "strike": strike, "stderr": se }));
        }
        for w in run.cfg.wealth_grid() {
            let q = quote(&v, &vs, w, s0, claim.side)
                .with_context(|| format!("pricing at w = {w}"))?;
            t.push(vec![
                Cell::from(*strike),
                q.w.into(),
                q.price.into(),
                q.delta.into(),
                oracle.as_ref().map(|o| o.price).into(),
                oracle.as_ref().and_then(|o| o.delta).into(),
            ]);
        }
    }
    run.base_meta(&mut t, root);
    t.meta("utility_interval", json!([u.first_kink(), u.last_kink()]));
    if !stderrs.is_empty() {
        t.meta("oracle_stderr", json!(stderrs));
    }
    Ok(t)
}

/// One engine/oracle pair.
struct Point {
    strike: Option<f64>,
    w: f64,
    engine: f64,
    oracle: f64,
}

/// Engine and oracle values over the wealth grid, and the unit of both.
fn comparison(run: &Run) -> Result<(Vec<Point>, &'static str, Selected)> {
    let quantity = run.cfg.compare.quantity;
    let grid = run.cfg.wealth_grid();
    if run.cfg.claim.is_some() {
        let claims = run.claims()?;
        let root = Selected { m: 0, index: 0 };
        let u = run.claim_utility(&claims)?;
        let states = run.model.terminal_states();
        let opts = run.options(root);
        let v = run.model.solve(vec![u.clone(); states.len()], &opts)?;
        let mut points = Vec::new();
        for (strike, claim) in &claims {
            let oracle = claim_oracle(run, claim)?.with_context(|| {
                format!("no oracle for this claim on the {} market", run.cfg.market.name())
            })?;
            let target = match quantity {
                Quantity::Value => oracle.price,
                Quantity::Strategy => oracle.delta.context("the oracle has no delta for this model")?,
            };
            let vs = run.model.solve(claim.terminals(&u, &states)?, &opts)?;
            for &w in &grid {
                let q = quote(&v, &vs, w, run.cfg.market.s0(), claim.side)?;
                let engine = match quantity {
                    Quantity::Value => q.price,
                    Quantity::Strategy => q.delta,
                };
                points.push(Point {
                    strike: *strike,
                    w,
                    engine,
                    oracle: target,
                });
            }
        }
        let unit = match quantity {
            Quantity::Value => "currency",
            Quantity::Strategy => "shares",
        };
        return Ok((points, unit, root));
    }

    let family = run
        .cfg
        .utility
        .family()
        .context("closed-form oracles need a parametric utility")?;
    match (&run.cfg.market, family) {
        (&Market::Crr { r, sigma, mu, horizon, .. }, _) => {
            let root = run.model.select(run.cfg.output.node)?;
            ensure!(root.m == 0, "the closed-form oracles are stated at t = 0");
            let m = MarketParams {
                r: r.0,
                mu: mu.map_or(r.0 + sigma.0 * sigma.0 / 2.0, |m| m.0),
                sigma: sigma.0,
                horizon: horizon.0,
            };
            let u = run.cfg.utility.build()?;
            let v = run.solve_with(&u, root)?;
            let node = root.get(&v)?;
            let mut points = Vec::with_capacity(grid.len());
            for &w in &grid {
                let o = match family {
                    Utility::Crra { gamma } => merton_crra(w, &m, gamma)?,
                    Utility::Cara { gamma } => merton_cara(w, &m, gamma)?,
                    Utility::Sahara { alpha, beta } => sahara(w, 0.0, &m, alpha, beta)?,
                };
                let (engine, oracle) = match quantity {
                    // the lattice discounts utility by R⁻¹ each step
                    Quantity::Value => (node.value.evaluate(w), o.value * m.discount()),
                    Quantity::Strategy => (node.policy_at(w), o.strategy.context("no strategy")?),
                };
                points.push(Point {
                    strike: None,
                    w,
                    engine,
                    oracle,
                });
            }
            let unit = match quantity {
                Quantity::Value => "utility",
                Quantity::Strategy => "currency in stock",
            };
            Ok((points, unit, root))
        }
        (&Market::Heston { rho, omega, kappa, horizon, lambda: Some(lambda), .. }, Utility::Crra { gamma }) => {
            ensure!(
                quantity == Quantity::Strategy,
                "the Heston oracle covers the strategy only; set compare.quantity = \"strategy\""
            );
            let n = run.model.steps();
            let at = match run.cfg.output.node {
                Some(sel) => run.model.select(Some(sel))?,
                None => run.model.select(Some(crate::config::NodeSelect { m: n / 2, index: None }))?,
            };
            let u = run.cfg.utility.build()?;
            let v = run.solve_with(&u, at)?;
            let node = at.get(&v)?;
            let p = KraftParams {
                gamma,
                lambda: lambda.0,
                rho: rho.0,
                omega: omega.0,
                kappa: kappa.0,
                horizon: horizon.0,
            };
            let t = horizon.0 * at.m as f64 / n.max(1) as f64;
            let mut points = Vec::with_capacity(grid.len());
            for &w in &grid {
                points.push(Point {
                    strike: None,
                    w,
                    engine: node.policy_at(w),
                    oracle: kraft_heston(w, t, &p, run.grouping)?,
                });
            }
            Ok((points, "currency in stock", at))
        }
        _ => bail!(
            "no oracle for {} utility on the {} market",
            utility_name(&run.cfg.utility),
            run.cfg.market.name()
        ),
    }
}

fn utility_name(u: &UtilityConfig) -> &'static str {
    match u {
        UtilityConfig::Crra { .. } => "crra",
        UtilityConfig::Cara { .. } => "cara",
        UtilityConfig::Sahara { .. } => "sahara",
        UtilityConfig::Kinks { .. } => "kinks",
    }
}

fn relative(abs: f64, oracle: f64) -> f64 {
    if abs == 0.0 {
        0.0
    } else {
        abs / oracle.abs()
    }
}

/// The report, and whether the configured tolerance holds.
pub fn compare(run: &Run) -> Result<(Table, bool)> {
    let (points, unit, at) = comparison(run)?;
    ensure!(!points.is_empty(), "nothing to compare");
    let u = |name: &str| format!("{name} [{unit}]");
    let (engine, oracle, abs) = (u("engine"), u("oracle"), u("abs_dev"));
    let mut t = Table::new(&[
        "row",
        "strike [currency]",
        "w [currency]",
        &engine,
        &oracle,
        &abs,
        "rel_dev [1]",
    ]);
    let (mut max_abs, mut max_rel, mut sum_abs, mut sum_rel) = (0.0f64, 0.0f64, 0.0, 0.0);
    for p in &points {
        let a = (p.engine - p.oracle).abs();
        let r = relative(a, p.oracle);
        max_abs = max_abs.max(a);
        max_rel = max_rel.max(r);
        sum_abs += a;
        sum_rel += r;
        t.push(vec![
            "point".into(),
            p.strike.into(),
            p.w.into(),
            p.engine.into(),
            p.oracle.into(),
            a.into(),
            r.into(),
        ]);
    }
    let count = points.len() as f64;
    let (mean_abs, mean_rel) = (sum_abs / count, sum_rel / count);
    for (label, a, r) in [("max", max_abs, max_rel), ("mean", mean_abs, mean_rel)] {
        t.push(vec![label.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, a.into(), r.into()]);
    }
    let c = &run.cfg.compare;
    let gated = match (c.statistic, c.deviation) {
        (Statistic::Max, Deviation::Relative) => max_rel,
        (Statistic::Max, Deviation::Absolute) => max_abs,
        (Statistic::Mean, Deviation::Relative) => mean_rel,
        (Statistic::Mean, Deviation::Absolute) => mean_abs,
    };
    // NaN deviations fail the gate
    let pass = c.tolerance.is_none_or(|tol| gated <= tol.0);
    run.base_meta(&mut t, at);
    t.meta("gated", json!(gated));
    t.meta("tolerance", json!(c.tolerance.map(|x| x.0)));
    t.meta("pass", json!(pass));
    Ok((t, pass))
}
