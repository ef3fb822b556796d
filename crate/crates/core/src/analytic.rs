//! Closed-form rates and Clauser–Horne parameters.
//!
//! Averaging the responses over the uniform hidden variable kills every
//! harmonic in the singles, and orthogonality of `cos 2kλ` leaves only the
//! diagonal terms in the coincidences:
//!
//! ```text
//! p_a      = a0ᴬ
//! p_ab(φ)  = a0ᴬa0ᴮ + ½a1ᴬa1ᴮ cos 2φ + ½a2ᴬa2ᴮ cos 4φ
//! B        = (3 p_ab(φ) − p_ab(3φ)) / (p_a + p_b)
//! ```
//!
//! With Bob's response written in `λ + β`, the effective angle of `p_ab` is
//! `φ = α + β`; every function here takes that effective angle directly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Angle, LhvModel, MemoryKind, MemoryRule, Observer};

/// Largest `|p_a − p_b|` accepted by the memory algebra.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Per-event detection probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub p_a: f64,
    pub p_b: f64,
    pub p_ab: f64,
}

impl Rates {
    pub const fn new(p_a: f64, p_b: f64, p_ab: f64) -> Self {
        Rates { p_a, p_b, p_ab }
    }
}

/// Split of the CH parameter into the three terms of the two-event algebra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    /// Memoryless `B` times the rule's scale factor.
    pub scaled: f64,
    /// Contribution quadratic in the coincidence rates.
    pub quadratic: f64,
    /// Constant offset (enhanced detection only).
    pub offset: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.scaled + self.quadratic + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellBreakdown {
    pub b: f64,
    /// Present only for memoryless evaluation and strengths exactly 0 or 1.
    pub decomposition: Option<Decomposition>,
    pub rates_phi: Rates,
    pub rates_3phi: Rates,
}

pub fn singles_closed(model: &LhvModel, observer: Observer) -> f64 {
    model.response(observer).coefficients.a0
}

pub fn coincidence_closed(model: &LhvModel, phi: Angle) -> f64 {
    let a = model.alice().coefficients;
    let b = model.bob().coefficients;
    let phi = phi.rad();
    a.a0 * b.a0 + 0.5 * a.a1 * b.a1 * (2.0 * phi).cos() + 0.5 * a.a2 * b.a2 * (4.0 * phi).cos()
}

pub fn rates_closed(model: &LhvModel, phi: Angle) -> Rates {
    Rates {
        p_a: singles_closed(model, Observer::Alice),
        p_b: singles_closed(model, Observer::Bob),
        p_ab: coincidence_closed(model, phi),
    }
}

/// `B = (3·p_ab(φ) − p_ab(3φ)) / (p_a + p_b)`, with the singles taken from
/// `rates_phi`.
pub fn ch_parameter(rates_phi: &Rates, rates_3phi: &Rates) -> Result<f64> {
    let singles = rates_phi.p_a + rates_phi.p_b;
    if singles == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok((3.0 * rates_phi.p_ab - rates_3phi.p_ab) / singles)
}

/// Mean rates per event over a two-event block under `rule`.
///
/// The algebra assumes `p_a = p_b`; asymmetric input is rejected for any
/// rule other than memoryless.
pub fn memory_adjusted_rates(r: &Rates, rule: &MemoryRule) -> Result<Rates> {
    if rule.kind() == MemoryKind::Memoryless {
        return Ok(*r);
    }
    if (r.p_a - r.p_b).abs() > SYMMETRY_TOL {
        return Err(Error::AsymmetricRates {
            p_a: r.p_a,
            p_b: r.p_b,
        });
    }
    let s = rule.strength();
    let t = 1.0 - s;
    let p = r.p_a;
    let c = r.p_ab;
    // First-event outcome classes: both detect, exactly one, neither.
    let one_only = p - c;
    let neither = 1.0 - 2.0 * p + c;
    let (single, second_coinc) = match rule.kind() {
        MemoryKind::Inhibit => {
            let second_single = p * (1.0 - s * p);
            let second_coinc = c * t * t * c + 2.0 * one_only * t * c + neither * c;
            (0.5 * (p + second_single), second_coinc)
        }
        MemoryKind::Enhance => {
            let second_single = p * (s + t * p) + (1.0 - p) * p;
            let second_coinc = c * (s * s + 2.0 * s * t * p + t * t * c)
                + 2.0 * one_only * (s * p + t * c)
                + neither * c;
            (0.5 * (p + second_single), second_coinc)
        }
        MemoryKind::Memoryless => unreachable!(),
    };
    Ok(Rates {
        p_a: single,
        p_b: single,
        p_ab: 0.5 * (c + second_coinc),
    })
}

/// CH parameter of `model` at effective angle `phi` under `rule`.
pub fn ch_with_memory(model: &LhvModel, rule: &MemoryRule, phi: Angle) -> Result<BellBreakdown> {
    let base_phi = rates_closed(model, phi);
    let base_3phi = rates_closed(model, phi.scaled(3.0));
    let rates_phi = memory_adjusted_rates(&base_phi, rule)?;
    let rates_3phi = memory_adjusted_rates(&base_3phi, rule)?;
    let b = ch_parameter(&rates_phi, &rates_3phi)?;

    let s = rule.effective_strength();
    let decomposition = if s == 0.0 {
        Some(Decomposition {
            scaled: b,
            quadratic: 0.0,
            offset: 0.0,
        })
    } else if s == 1.0 {
        let p = base_phi.p_a;
        let memoryless = ch_parameter(&base_phi, &base_3phi)?;
        let squares = 3.0 * base_phi.p_ab.powi(2) - base_3phi.p_ab.powi(2);
        Some(match rule.kind() {
            MemoryKind::Inhibit => Decomposition {
                scaled: memoryless * (1.0 - p) / (1.0 - 0.5 * p),
                quadratic: squares / (2.0 * p * (2.0 - p)),
                offset: 0.0,
            },
            MemoryKind::Enhance => Decomposition {
                scaled: memoryless * (3.0 - 4.0 * p) / (3.0 - p),
                quadratic: squares / (2.0 * p * (3.0 - p)),
                offset: 2.0 * p / (3.0 - p),
            },
            MemoryKind::Memoryless => unreachable!(),
        })
    } else {
        None
    };

    Ok(BellBreakdown {
        b,
        decomposition,
        rates_phi,
        rates_3phi,
    })
}

/// CH parameter predicted by quantum mechanics for maximally entangled pairs
/// seen by detectors of efficiency `eta`: singles `η/2`, coincidences
/// `(η²/2)cos²φ`, hence `B = (η/2)(3cos²φ − cos²3φ)`.
pub fn quantum_reference(eta: f64, phi: Angle) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Range {
            name: "eta",
            value: eta,
            range: "[0, 1]",
        });
    }
    let phi = phi.rad();
    Ok(0.5 * eta * (3.0 * phi.cos().powi(2) - (3.0 * phi).cos().powi(2)))
}
