//! Detection-response functions and the hidden-variable model.
//!
//! Each observer detects a photon with a probability that depends on the
//! shared hidden variable `λ ∈ [0, π]` (uniform density `1/π`) and on the
//! local polarizer setting `θ`:
//!
//! ```text
//! P(λ, θ) = a0 + a1·cos(2(λ ∓ θ)) + a2·cos(4(λ ∓ θ))
//! ```
//!
//! Alice uses the `λ − θ` orientation, Bob uses `λ + θ`.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Bound, Error, Result};

/// Slack allowed on the `[0, 1]` bounds of a response.
pub const VALIDITY_TOL: f64 = 1e-9;

/// Number of uniform λ samples used by [`validate_response`].
pub const VALIDITY_GRID: usize = 8192;

/// An angle in radians. Any finite value is accepted.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const fn radians(value: f64) -> Self {
        Angle(value)
    }

    pub fn degrees(value: f64) -> Self {
        Angle(value.to_radians())
    }

    pub const fn rad(self) -> f64 {
        self.0
    }

    /// The same direction folded into `[0, 2π)`, for display.
    pub fn normalized(self) -> Self {
        let r = self.0.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        Angle(if r >= TAU { 0.0 } else { r })
    }

    pub fn scaled(self, k: f64) -> Self {
        Angle(self.0 * k)
    }
}

impl From<f64> for Angle {
    fn from(value: f64) -> Self {
        Angle(value)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observer {
    Alice,
    Bob,
}

/// Sign of the setting inside the cosine arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// `λ − θ` (Alice).
    Minus,
    /// `λ + θ` (Bob).
    Plus,
}

/// The three coefficients of a two-harmonic cosine response, as they appear
/// in a model file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Coefficients {
    pub const fn new(a0: f64, a1: f64, a2: f64) -> Self {
        Coefficients { a0, a1, a2 }
    }

    /// `(1/6)[1 + √2 cos 2(λ−θ)]²` expanded into harmonics: `1/3, √2/3, 1/6`.
    pub fn paper() -> Self {
        Coefficients::new(1.0 / 3.0, SQRT_2 / 3.0, 1.0 / 6.0)
    }

    pub fn is_finite(&self) -> bool {
        self.a0.is_finite() && self.a1.is_finite() && self.a2.is_finite()
    }

    /// Evaluates the series given `c = cos(2x)`, using `cos 4x = 2c² − 1`.
    #[inline]
    pub fn at_cos2(&self, c: f64) -> f64 {
        self.a0 + self.a1 * c + self.a2 * (2.0 * c * c - 1.0)
    }

    /// Exact extrema over one period.
    ///
    /// In terms of `c = cos(2x) ∈ [−1, 1]` the series is the quadratic
    /// `a0 − a2 + a1·c + 2a2·c²`, so its extrema sit at `c = ±1` or at the
    /// vertex `c = −a1 / (4a2)`.
    pub fn exact_extrema(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in self.stationary_cos2() {
            let v = self.at_cos2(c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    fn stationary_cos2(&self) -> impl Iterator<Item = f64> {
        let vertex = if self.a2 != 0.0 {
            let c = -self.a1 / (4.0 * self.a2);
            (c.abs() <= 1.0).then_some(c)
        } else {
            None
        };
        [-1.0, 1.0].into_iter().chain(vertex)
    }
}

/// Detection probability of one observer as a function of `λ` and setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineResponse {
    pub coefficients: Coefficients,
    pub orientation: Orientation,
}

impl CosineResponse {
    pub const fn new(coefficients: Coefficients, orientation: Orientation) -> Self {
        CosineResponse {
            coefficients,
            orientation,
        }
    }

    /// Argument `x = λ ∓ θ` of the harmonics.
    #[inline]
    fn argument(&self, lambda: Angle, theta: Angle) -> f64 {
        match self.orientation {
            Orientation::Minus => lambda.rad() - theta.rad(),
            Orientation::Plus => lambda.rad() + theta.rad(),
        }
    }
}

/// `a0 + a1·cos(2(λ∓θ)) + a2·cos(4(λ∓θ))`. No validity check.
pub fn response_at(r: &CosineResponse, lambda: Angle, theta: Angle) -> f64 {
    let x = r.argument(lambda, theta);
    let Coefficients { a0, a1, a2 } = r.coefficients;
    a0 + a1 * (2.0 * x).cos() + a2 * (4.0 * x).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityReport {
    pub min: f64,
    pub max: f64,
    pub valid: bool,
}

impl ValidityReport {
    /// Converts an invalid report into [`Error::InvalidResponse`], naming the
    /// offending extremum (the minimum when both bounds fail).
    pub fn check(&self) -> Result<()> {
        if self.min < -VALIDITY_TOL || self.min.is_nan() {
            Err(Error::InvalidResponse {
                bound: Bound::Lower,
                extremum: self.min,
            })
        } else if self.max > 1.0 + VALIDITY_TOL || self.max.is_nan() {
            Err(Error::InvalidResponse {
                bound: Bound::Upper,
                extremum: self.max,
            })
        } else {
            Ok(())
        }
    }
}

/// Scans `P(λ, 0)` on a dense uniform grid over `[0, π)` together with the
/// analytic stationary points and reports the extrema.
///
/// The extrema do not depend on the setting or the orientation, since both
/// only shift `λ` along the period.
pub fn validate_response(r: &CosineResponse) -> ValidityReport {
    let coeffs = r.coefficients;
    if !coeffs.is_finite() {
        return ValidityReport {
            min: f64::NAN,
            max: f64::NAN,
            valid: false,
        };
    }
    let zero = Angle::radians(0.0);
    let step = PI / VALIDITY_GRID as f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for k in 0..VALIDITY_GRID {
        let v = response_at(r, Angle::radians(k as f64 * step), zero);
        min = min.min(v);
        max = max.max(v);
    }
    for c in coeffs.stationary_cos2() {
        let lambda = Angle::radians(0.5 * c.acos());
        let v = response_at(r, lambda, zero);
        min = min.min(v);
        max = max.max(v);
    }
    let valid = min >= -VALIDITY_TOL && max <= 1.0 + VALIDITY_TOL;
    ValidityReport { min, max, valid }
}

/// A pair of responses over a uniform hidden variable on `[0, π]`.
///
/// Both responses are valid by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhvModel {
    alice: CosineResponse,
    bob: CosineResponse,
}

impl LhvModel {
    pub fn new(alice: Coefficients, bob: Coefficients) -> Result<Self> {
        let alice = CosineResponse::new(alice, Orientation::Minus);
        let bob = CosineResponse::new(bob, Orientation::Plus);
        validate_response(&alice).check()?;
        validate_response(&bob).check()?;
        Ok(LhvModel { alice, bob })
    }

    /// Skips the grid scan; callers must already have checked the exact
    /// extrema of `coefficients` against the same tolerance.
    pub(crate) fn symmetric_prechecked(coefficients: Coefficients) -> Self {
        LhvModel {
            alice: CosineResponse::new(coefficients, Orientation::Minus),
            bob: CosineResponse::new(coefficients, Orientation::Plus),
        }
    }

    /// Same coefficients for both observers.
    pub fn symmetric(coefficients: Coefficients) -> Result<Self> {
        LhvModel::new(coefficients, coefficients)
    }

    pub fn alice(&self) -> &CosineResponse {
        &self.alice
    }

    pub fn bob(&self) -> &CosineResponse {
        &self.bob
    }

    pub fn response(&self, observer: Observer) -> &CosineResponse {
        match observer {
            Observer::Alice => &self.alice,
            Observer::Bob => &self.bob,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.alice.coefficients == self.bob.coefficients
    }

    /// The hidden-variable density, `1/π` on `[0, π]` and zero elsewhere.
    pub fn density(lambda: Angle) -> f64 {
        if (0.0..=PI).contains(&lambda.rad()) {
            1.0 / PI
        } else {
            0.0
        }
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            alice: self.alice.coefficients,
            bob: self.bob.coefficients,
        }
    }
}

/// The reference model: both observers use [`Coefficients::paper`].
pub fn paper_model() -> LhvModel {
    let c = Coefficients::paper();
    LhvModel {
        alice: CosineResponse::new(c, Orientation::Minus),
        bob: CosineResponse::new(c, Orientation::Plus),
    }
}

/// On-disk model description: `{"alice": {...}, "bob": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub alice: Coefficients,
    pub bob: Coefficients,
}

impl TryFrom<ModelFile> for LhvModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        LhvModel::new(file.alice, file.bob)
    }
}

/// Time-correlation rule between the two events of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    #[serde(alias = "none")]
    Memoryless,
    Inhibit,
    Enhance,
}

impl MemoryKind {
    pub fn name(self) -> &'static str {
        match self {
            MemoryKind::Memoryless => "none",
            MemoryKind::Inhibit => "inhibit",
            MemoryKind::Enhance => "enhance",
        }
    }
}

/// A memory rule with strength `s ∈ [0, 1]`.
///
/// After an observer detects in the first event of a block, with probability
/// `s` their second-event outcome is forced: no detection for
/// [`MemoryKind::Inhibit`], certain detection for [`MemoryKind::Enhance`].
/// `s = 1` gives the all-or-nothing rules; `s = 0` is memoryless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryRule {
    kind: MemoryKind,
    strength: f64,
}

impl MemoryRule {
    pub fn new(kind: MemoryKind, strength: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::Range {
                name: "strength",
                value: strength,
                range: "[0, 1]",
            });
        }
        Ok(MemoryRule { kind, strength })
    }

    pub const fn memoryless() -> Self {
        MemoryRule {
            kind: MemoryKind::Memoryless,
            strength: 0.0,
        }
    }

    pub fn inhibit(strength: f64) -> Result<Self> {
        MemoryRule::new(MemoryKind::Inhibit, strength)
    }

    pub fn enhance(strength: f64) -> Result<Self> {
        MemoryRule::new(MemoryKind::Enhance, strength)
    }

    pub fn kind(&self) -> MemoryKind {
        self.kind
    }

    /// Strength as stored; ignored for [`MemoryKind::Memoryless`].
    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// Probability that a first-event detection forces the second outcome.
    pub fn effective_strength(&self) -> f64 {
        match self.kind {
            MemoryKind::Memoryless => 0.0,
            _ => self.strength,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER_MAX: f64 = (1.5 + SQRT_2) / 3.0;
    /// Value at `λ − θ = π/2`; a local minimum only.
    const PAPER_AT_HALF_PI: f64 = (1.5 - SQRT_2) / 3.0;

    fn alice_paper() -> CosineResponse {
        *paper_model().alice()
    }

    #[test]
    fn paper_response_at_known_points() {
        let r = alice_paper();
        let theta = Angle::radians(0.3);
        let at = |offset: f64| response_at(&r, Angle::radians(0.3 + offset), theta);
        assert!((at(0.0) - PAPER_MAX).abs() < 1e-15);
        assert!((at(PI / 2.0) - PAPER_AT_HALF_PI).abs() < 1e-15);
        assert!((at(PI / 4.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((PAPER_MAX - 0.9714045).abs() < 1e-7);
        assert!((PAPER_AT_HALF_PI - 0.0285955).abs() < 1e-7);
    }

    #[test]
    fn compact_square_form_matches_expansion() {
        // (1/6)[1 + √2 cos y]² equals the harmonic series when y = 2(λ − θ).
        let r = alice_paper();
        for k in 0..50 {
            let x = k as f64 * 0.13;
            let square = (1.0 + SQRT_2 * (2.0 * x).cos()).powi(2) / 6.0;
            let series = response_at(&r, Angle::radians(x), Angle::radians(0.0));
            assert!((square - series).abs() < 1e-14);
        }
    }

    #[test]
    fn bob_orientation_is_plus() {
        let m = paper_model();
        let lambda = Angle::radians(0.7);
        let beta = Angle::radians(0.2);
        let bob = response_at(m.bob(), lambda, beta);
        let alice = response_at(m.alice(), lambda, Angle::radians(-0.2));
        assert_eq!(bob, alice);
    }

    #[test]
    fn paper_coefficients() {
        let c = paper_model().alice().coefficients;
        assert_eq!(c.a0, 1.0 / 3.0);
        assert!((c.a1 - 0.4714045).abs() < 1e-7);
        assert_eq!(c.a1, SQRT_2 / 3.0);
        assert_eq!(c.a2, 1.0 / 6.0);
        assert!(paper_model().is_symmetric());
        assert_eq!(paper_model().bob().orientation, Orientation::Plus);
    }

    #[test]
    fn paper_response_is_valid() {
        let report = validate_response(&alice_paper());
        assert!(report.valid);
        // (1/6)(1 + √2 c)² vanishes at c = cos 2(λ−θ) = −1/√2
        assert!(report.min.abs() < 1e-15);
        assert!((report.max - PAPER_MAX).abs() < 1e-12);
        let (lo, hi) = alice_paper().coefficients.exact_extrema();
        assert!(lo.abs() < 1e-15);
        assert!((hi - PAPER_MAX).abs() < 1e-15);
        let zero = Angle::radians(0.5 * (-SQRT_2 / 2.0).acos());
        assert!(response_at(&alice_paper(), zero, Angle::radians(0.0)).abs() < 1e-15);
    }

    #[test]
    fn overshooting_response_names_minimum() {
        let r = CosineResponse::new(Coefficients::new(0.5, 0.6, 0.0), Orientation::Minus);
        let report = validate_response(&r);
        assert!(!report.valid);
        assert!((report.min + 0.1).abs() < 1e-12);
        match report.check() {
            Err(Error::InvalidResponse { bound, extremum }) => {
                assert_eq!(bound, Bound::Lower);
                assert!((extremum + 0.1).abs() < 1e-12);
            }
            other => panic!("expected InvalidResponse, got {other:?}"),
        }
        assert!(LhvModel::symmetric(Coefficients::new(0.5, 0.6, 0.0)).is_err());
    }

    #[test]
    fn upper_violation_is_reported() {
        let r = CosineResponse::new(Coefficients::new(0.8, 0.1, 0.2), Orientation::Plus);
        let err = validate_response(&r).check().unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidResponse {
                bound: Bound::Upper,
                ..
            }
        ));
    }

    #[test]
    fn constant_responses_are_valid() {
        for c in [0.0, 1.0] {
            let r = CosineResponse::new(Coefficients::new(c, 0.0, 0.0), Orientation::Minus);
            let report = validate_response(&r);
            assert!(report.valid);
            assert_eq!(report.min, c);
            assert_eq!(report.max, c);
        }
    }

    #[test]
    fn interior_vertex_is_found() {
        // Minimum at c = -a1/(4 a2) = 0.25, strictly between grid points in general.
        let c = Coefficients::new(0.3, -0.2, 0.2);
        let (lo, _) = c.exact_extrema();
        let expected = 0.3 - 0.2 + (-0.2) * 0.25 + 0.4 * 0.25 * 0.25;
        assert!((lo - expected).abs() < 1e-15);
        let report = validate_response(&CosineResponse::new(c, Orientation::Minus));
        assert!((report.min - expected).abs() < 1e-12);
    }

    #[test]
    fn non_finite_coefficients_are_invalid() {
        let r = CosineResponse::new(Coefficients::new(f64::NAN, 0.0, 0.0), Orientation::Minus);
        assert!(!validate_response(&r).valid);
        assert!(validate_response(&r).check().is_err());
    }

    #[test]
    fn memory_rule_strength_range() {
        assert!(MemoryRule::inhibit(1.0).is_ok());
        assert!(MemoryRule::enhance(0.0).is_ok());
        assert!(matches!(
            MemoryRule::enhance(1.5),
            Err(Error::Range { name: "strength", .. })
        ));
        assert!(MemoryRule::inhibit(-0.1).is_err());
        assert!(MemoryRule::inhibit(f64::NAN).is_err());
        assert_eq!(MemoryRule::memoryless().effective_strength(), 0.0);
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(Angle::radians(-PI / 2.0).normalized().rad(), 1.5 * PI);
        assert_eq!(Angle::radians(TAU).normalized().rad(), 0.0);
        assert_eq!(Angle::radians(-1e-300).normalized().rad(), 0.0);
        assert!((Angle::degrees(22.5).rad() - PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn model_file_round_trip() {
        let file = paper_model().to_file();
        let json = serde_json::to_string(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(LhvModel::try_from(back).unwrap(), paper_model());
    }

    #[test]
    fn density_is_uniform() {
        assert_eq!(LhvModel::density(Angle::radians(1.0)), 1.0 / PI);
        assert_eq!(LhvModel::density(Angle::radians(4.0)), 0.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn response_has_period_pi(
                a0 in 0.0..1.0f64, a1 in -1.0..1.0f64, a2 in -1.0..1.0f64,
                lambda in -10.0..10.0f64, theta in -10.0..10.0f64,
            ) {
                let r = CosineResponse::new(Coefficients::new(a0, a1, a2), Orientation::Minus);
                let p = response_at(&r, Angle::radians(lambda), Angle::radians(theta));
                let q = response_at(&r, Angle::radians(lambda + PI), Angle::radians(theta));
                prop_assert!((p - q).abs() < 1e-12);
            }

            #[test]
            fn sufficient_condition_implies_valid(
                a0 in 0.0..1.0f64, u in 0.0..1.0f64, w in 0.0..1.0f64,
                sign1 in any::<bool>(), sign2 in any::<bool>(),
            ) {
                // Split the available budget min(a0, 1 - a0) between |a1| and |a2|.
                let budget = a0.min(1.0 - a0) * u;
                let a1 = budget * w * if sign1 { 1.0 } else { -1.0 };
                let a2 = budget * (1.0 - w) * if sign2 { 1.0 } else { -1.0 };
                let r = CosineResponse::new(Coefficients::new(a0, a1, a2), Orientation::Plus);
                prop_assert!(validate_response(&r).valid);
            }

            #[test]
            fn valid_responses_stay_in_unit_interval(
                seed in any::<u64>(), lambda in -10.0..10.0f64, theta in -10.0..10.0f64,
            ) {
                let m = crate::search::random_valid_model(seed).unwrap();
                let p = response_at(m.bob(), Angle::radians(lambda), Angle::radians(theta));
                prop_assert!((-VALIDITY_TOL..=1.0 + VALIDITY_TOL).contains(&p));
            }

            #[test]
            fn grid_scan_agrees_with_exact_extrema(
                a0 in 0.0..1.0f64, a1 in -1.0..1.0f64, a2 in -1.0..1.0f64,
            ) {
                let c = Coefficients::new(a0, a1, a2);
                let (lo, hi) = c.exact_extrema();
                let report = validate_response(&CosineResponse::new(c, Orientation::Minus));
                prop_assert!((report.min - lo).abs() < 1e-12);
                prop_assert!((report.max - hi).abs() < 1e-12);
            }
        }
    }
}
