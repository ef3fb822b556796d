//! Local hidden variable models of Bell-type photon experiments in which a
//! detection can inhibit or enhance the same detector's next detection.
//!
//! The crate evaluates the Clauser–Horne parameter
//! `B = (3·p_ab(φ) − p_ab(3φ)) / (p_a + p_b)` for a family of two-harmonic
//! cosine response models along three independent routes:
//!
//! * [`analytic`]: closed forms, including the two-event memory algebra;
//! * [`quadrature`]: direct averaging over the hidden variable;
//! * [`montecarlo`]: event-by-event simulation with seeded, sharded RNG.
//!
//! [`search`] sweeps and maximizes `B` over model coefficients, angle and
//! memory strength.
//!
//! ```
//! use lhv_core::{ch_with_memory, paper_model, Angle, MemoryRule};
//!
//! let phi = Angle::radians(std::f64::consts::PI / 8.0);
//! let b = ch_with_memory(&paper_model(), &MemoryRule::memoryless(), phi)?.b;
//! assert!((b - 0.8047379).abs() < 1e-7);
//! # Ok::<(), lhv_core::Error>(())
//! ```

pub mod analytic;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod search;

pub use analytic::{
    ch_parameter, ch_with_memory, coincidence_closed, memory_adjusted_rates, quantum_reference, rates_closed,
    singles_closed, BellBreakdown, Decomposition, Rates,
};
pub use error::{Bound, Error, Result};
pub use model::{
    paper_model, response_at, validate_response, Angle, Coefficients, CosineResponse, LhvModel, MemoryKind,
    MemoryRule, ModelFile, Observer, Orientation, ValidityReport,
};
pub use montecarlo::{estimate_ch_mc, simulate_run, ChEstimate, Estimate, RunConfig, RunReport, Tally};
pub use quadrature::{mean_over_lambda, rates_by_quadrature, QuadratureSpec};
pub use search::{maximize_ch, random_valid_model, sweep_phi, Param, Params, SearchResult, SearchSpace};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/closed-forms.md")]
    mod closed_forms {}
    #[doc = include_str!("../../../book/src/memory.md")]
    mod memory {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/montecarlo.md")]
    mod montecarlo {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
}
#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
