//! Utility indifference prices and hedges.
//!
//! A claim paying `Ψ` at maturity enters the problem only through the
//! terminal condition: the seller faces `U(w − Ψ)`, the buyer `U(w + Ψ)`.
//! Both are horizontal shifts of the utility, so the claim never leaves
//! class ℋ. Comparing the root value functions with and without the claim
//! gives the price; comparing the root policies gives the hedge.

use crate::dp::ValueSurface;
use crate::error::{Error, Result};
use crate::hfunc::HFunc;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Seller,
    Buyer,
}

/// State variable the payoff is written on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Underlying {
    #[default]
    Asset,
    Factor,
}

#[derive(Clone)]
pub enum Payoff<T> {
    Zero,
    Cash(T),
    Put { strike: T },
    Call { strike: T },
    Custom(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: fmt::Debug> fmt::Debug for Payoff<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Zero => write!(f, "Zero"),
            Payoff::Cash(c) => write!(f, "Cash({c:?})"),
            Payoff::Put { strike } => write!(f, "Put {{ strike: {strike:?} }}"),
            Payoff::Call { strike } => write!(f, "Call {{ strike: {strike:?} }}"),
            Payoff::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl<T: Scalar> Payoff<T> {
    pub fn value(&self, x: T) -> T {
        match self {
            Payoff::Zero => T::zero(),
            Payoff::Cash(c) => *c,
            Payoff::Put { strike } => (*strike - x).max(T::zero()),
            Payoff::Call { strike } => (x - *strike).max(T::zero()),
            Payoff::Custom(f) => f(x),
        }
    }
}

/// A European claim and the side of the trade being priced.
#[derive(Debug, Clone)]
pub struct ClaimSpec<T> {
    pub payoff: Payoff<T>,
    pub underlying: Underlying,
    pub side: Side,
}

impl<T: Scalar> ClaimSpec<T> {
    pub fn new(payoff: Payoff<T>, underlying: Underlying, side: Side) -> Self {
        ClaimSpec {
            payoff,
            underlying,
            side,
        }
    }

    pub fn seller(payoff: Payoff<T>) -> Self {
        Self::new(payoff, Underlying::Asset, Side::Seller)
    }

    pub fn buyer(payoff: Payoff<T>) -> Self {
        Self::new(payoff, Underlying::Asset, Side::Buyer)
    }

    /// `Ψ` at terminal state `(S, Y)`.
    pub fn cash_flow(&self, s: T, y: T) -> Result<T> {
        let x = match self.underlying {
            Underlying::Asset => s,
            Underlying::Factor => y,
        };
        let v = self.payoff.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidParams(format!("payoff is not finite at {x}")))
        }
    }

    /// Horizontal shift applied to the utility at a terminal state.
    pub fn shift(&self, s: T, y: T) -> Result<T> {
        let psi = self.cash_flow(s, y)?;
        Ok(match self.side {
            Side::Seller => psi,
            Side::Buyer => -psi,
        })
    }

    /// Terminal value functions with the claim, one per state.
    pub fn terminals(&self, utility: &HFunc<T>, states: &[(T, T)]) -> Result<Vec<HFunc<T>>> {
        states
            .iter()
            .map(|&(s, y)| Ok(shift_terminal(utility, self.shift(s, y)?)))
            .collect()
    }

    /// Wealth interval the utility must cover so that shifted terminals
    /// stay accurate on `[w_min, w_max]`.
    pub fn widened_interval(&self, w_min: T, w_max: T, states: &[(T, T)]) -> Result<(T, T)> {
        let mut lo = T::zero();
        let mut hi = T::zero();
        for &(s, y) in states {
            let c = self.shift(s, y)?;
            lo = lo.min(c);
            hi = hi.max(c);
        }
        // U(w − c) needs U on [w_min − max c, w_max − min c]
        Ok((w_min - hi, w_max - lo))
    }
}

/// `w ↦ U(w − c)`.
pub fn shift_terminal<T: Scalar>(u: &HFunc<T>, c: T) -> HFunc<T> {
    u.shifted(c)
}

/// Indifference price at wealth `w` from the root value functions without
/// (`v`) and with (`v_star`) the claim.
///
/// Seller: `π = V*⁻¹(V(w)) − w`; buyer: `π = w − V*⁻¹(V(w))`.
pub fn indifference_price<T: Scalar>(
    v: &ValueSurface<T>,
    v_star: &ValueSurface<T>,
    w: T,
    side: Side,
) -> Result<T> {
    if v.root().value == v_star.root().value {
        // a claim that leaves the value unchanged is worth exactly nothing
        return Ok(T::zero());
    }
    let target = v.root().value.evaluate(w);
    let x = v_star.root().value.invert(target)?;
    Ok(match side {
        Side::Seller => x - w,
        Side::Buyer => w - x,
    })
}

/// Shares of stock the claim adds to the optimal position:
/// `(β*(w ± π) − β(w)) / S₀`, evaluated at the compensated wealth.
pub fn hedge_delta<T: Scalar>(
    v: &ValueSurface<T>,
    v_star: &ValueSurface<T>,
    w: T,
    s0: T,
    side: Side,
) -> Result<T> {
    let price = indifference_price(v, v_star, w, side)?;
    Ok(delta_at(v, v_star, w, price, s0, side))
}

fn delta_at<T: Scalar>(
    v: &ValueSurface<T>,
    v_star: &ValueSurface<T>,
    w: T,
    price: T,
    s0: T,
    side: Side,
) -> T {
    let compensated = match side {
        Side::Seller => w + price,
        Side::Buyer => w - price,
    };
    (v_star.root().policy_at(compensated) - v.root().policy_at(w)) / s0
}

/// Price and hedge at one wealth level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote<T> {
    pub w: T,
    pub price: T,
    pub delta: T,
}

pub fn quote<T: Scalar>(
    v: &ValueSurface<T>,
    v_star: &ValueSurface<T>,
    w: T,
    s0: T,
    side: Side,
) -> Result<Quote<T>> {
    let price = indifference_price(v, v_star, w, side)?;
    Ok(Quote {
        w,
        price,
        delta: delta_at(v, v_star, w, price, s0, side),
    })
}
