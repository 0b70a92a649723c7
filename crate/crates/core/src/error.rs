use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid piecewise-linear function: {0}")]
    InvalidFunction(String),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("conic combination needs at least one term with positive weight")]
    EmptyCombination,

    #[error("negative or non-finite weight {0}")]
    InvalidWeight(f64),

    #[error("utility samples are not strictly concave and increasing: {0}")]
    InvalidUtility(String),

    #[error("target utility {target} is above the plateau {plateau}")]
    AbovePlateau { target: f64, plateau: f64 },

    #[error("invalid market specification: {0}")]
    InvalidSpec(String),

    #[error("no-arbitrage violated at step {m}, level {k}: need u > R > d, got u={u}, R={growth}, d={d}")]
    Arbitrage {
        m: usize,
        k: usize,
        u: f64,
        growth: f64,
        d: f64,
    },

    #[error("probability {0} outside (0, 1)")]
    Probability(f64),

    #[error("degenerate split: probability mass {0} on one branch")]
    DegenerateSplit(f64),

    #[error("invalid step inputs: {0}")]
    InvalidStep(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
