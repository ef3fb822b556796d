use thiserror::Error;

/// Which bound of `[0, 1]` a response function broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid response: {} extremum {extremum} lies outside [0, 1]", match .bound { Bound::Lower => "minimum", Bound::Upper => "maximum" })]
    InvalidResponse { bound: Bound, extremum: f64 },

    #[error("division by zero: p_a + p_b = 0")]
    DivisionByZero,

    #[error("asymmetric rates: p_a = {p_a}, p_b = {p_b}; memory rules need p_a = p_b")]
    AsymmetricRates { p_a: f64, p_b: f64 },

    #[error("{name} = {value} is outside its allowed range {range}")]
    Range {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("insufficient samples: {n_pairs} pairs cannot fill {batches} batches")]
    InsufficientSamples { n_pairs: u64, batches: usize },

    #[error("no valid model after {attempts} rejection-sampling attempts")]
    RejectionLimit { attempts: usize },

    #[error("search space has no free parameters")]
    EmptySpace,

    #[error("invalid search space: {0}")]
    InvalidSpace(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
