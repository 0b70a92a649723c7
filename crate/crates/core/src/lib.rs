//! Exact dynamic programming for utility maximisation on binomial lattices.
//!
//! Value functions are kept in closed form as piecewise-linear, concave,
//! eventually constant functions ([`HFunc`]). One backward step maps the
//! two successor functions to the current one exactly, so optimal values,
//! policies and utility indifference prices come out without any wealth
//! grid.

// `!(x > 0)` deliberately rejects NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dp;
pub mod error;
pub mod hfunc;
pub mod lattice;
pub mod multifactor;
pub mod oracle;
pub mod pricing;
pub mod scalar;

pub use dp::{
    backstep, backward_sweep, policy_at, solve, GridLine, NodeSolution, Policy, Retain,
    SolveOptions, StepInputs, StepResult, ValueSurface,
};
pub use error::{Error, Result};
pub use hfunc::{approximate_utility, approximate_utility_with_slope, conic_combine, HFunc};
pub use lattice::{LatticeSpec, NodeId, StepCoefficients};
pub use multifactor::{
    bilinear_weights, correlated_lattice, heston_backstep, heston_grids, heston_step_targets,
    mix_successors, CorrelatedLattice, HestonGrid, HestonLattice, HestonSpec, JointTransition,
    MzSpec, TwoFactorNode,
};
pub use pricing::{
    hedge_delta, indifference_price, quote, shift_terminal, ClaimSpec, Payoff, Quote, Side,
    Underlying,
};
pub use scalar::Scalar;

pub type HFunc64 = HFunc<f64>;
pub type HFunc32 = HFunc<f32>;
pub type Lattice64 = LatticeSpec<f64>;
pub type Lattice32 = LatticeSpec<f32>;
pub type ValueSurface64 = ValueSurface<f64>;
