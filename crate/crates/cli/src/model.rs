//! The configured market as one solvable lattice.

use crate::config::{Market, NodeSelect, RunConfig};
use anyhow::{bail, Context, Result};
use kinkopt::{
    CorrelatedLattice, HFunc, HestonLattice, LatticeSpec, NodeSolution, Retain, SolveOptions,
    ValueSurface,
};

pub enum Model {
    Single(LatticeSpec<f64>),
    Mz(CorrelatedLattice<f64>),
    Heston(HestonLattice<f64>),
}

impl Model {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let n = cfg.steps()?;
        Ok(match &cfg.market {
            Market::Crr { .. } | Market::Table { .. } => Model::Single(cfg.market.lattice(n)?),
            Market::Mz { .. } => Model::Mz(CorrelatedLattice::new(
                cfg.market.mz(n).expect("mz market"),
            )?),
            Market::Heston { .. } => Model::Heston(HestonLattice::new(
                cfg.market.heston(n).expect("heston market"),
            )?),
        })
    }

    pub fn steps(&self) -> usize {
        match self {
            Model::Single(s) => s.steps(),
            Model::Mz(l) => l.steps(),
            Model::Heston(l) => l.steps(),
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Model::Single(s) => s.horizon(),
            Model::Mz(l) => l.spec().horizon,
            Model::Heston(l) => l.spec().horizon,
        }
    }

    /// `(S, Y)` at each terminal node; `Y = 0` without a factor.
    pub fn terminal_states(&self) -> Vec<(f64, f64)> {
        match self {
            Model::Single(s) => s.terminal_prices().into_iter().map(|p| (p, 0.0)).collect(),
            Model::Mz(l) => l.terminal_states(),
            Model::Heston(l) => l.terminal_states(),
        }
    }

    pub fn solve(&self, terminal: Vec<HFunc<f64>>, opts: &SolveOptions<f64>) -> Result<ValueSurface<f64>> {
        Ok(match self {
            Model::Single(s) => kinkopt::solve(s, terminal, opts)?,
            Model::Mz(l) => l.solve(terminal, opts)?,
            Model::Heston(l) => l.solve(terminal, opts)?,
        })
    }

    /// Central node of layer `m`.
    fn central(&self, m: usize) -> usize {
        match self {
            Model::Single(_) => m / 2,
            Model::Mz(l) => l.index(kinkopt::TwoFactorNode::new(m, m / 2, m / 2)),
            Model::Heston(l) => {
                let g = l.grid(m);
                g.index(g.ln_s.len() / 2, g.y.len() / 2)
            }
        }
    }

    /// The requested node, the root by default.
    pub fn select(&self, node: Option<NodeSelect>) -> Result<Selected> {
        let Some(sel) = node else {
            return Ok(Selected { m: 0, index: 0 });
        };
        if sel.m > self.steps() {
            bail!("output.node.m = {} exceeds the {} steps", sel.m, self.steps());
        }
        Ok(Selected {
            m: sel.m,
            index: sel.index.unwrap_or_else(|| self.central(sel.m)),
        })
    }

    /// `(S, Y)` at a node.
    pub fn state(&self, at: Selected) -> (f64, f64) {
        match self {
            Model::Single(s) => (s.price(kinkopt::NodeId::new(at.m, at.index)), 0.0),
            Model::Mz(l) => {
                let node = l.node(at.m, at.index);
                (l.asset_price(node), l.factor_level(node))
            }
            Model::Heston(l) => l.state(l.node(at.m, at.index)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selected {
    pub m: usize,
    pub index: usize,
}

impl Selected {
    pub fn retain(self, surface: bool) -> Retain {
        if surface {
            Retain::All
        } else {
            Retain::Layers(vec![self.m])
        }
    }

    pub fn get(self, v: &ValueSurface<f64>) -> Result<&NodeSolution<f64>> {
        v.node(self.m, self.index)
            .with_context(|| format!("layer {} has no node {}", self.m, self.index))
    }
}
