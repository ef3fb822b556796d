//! Midpoint-rule averages over the hidden variable.
//!
//! This is the numerical route to the singles and coincidence rates. It
//! never touches the closed forms in [`crate::analytic`], so the two can be
//! checked against each other.

use std::f64::consts::PI;

use crate::analytic::Rates;
use crate::error::{Error, Result};
use crate::model::{response_at, Angle, LhvModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    n_points: usize,
}

impl QuadratureSpec {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < Self::MIN_POINTS {
            return Err(Error::Range {
                name: "n_points",
                value: n_points as f64,
                range: ">= 8",
            });
        }
        Ok(QuadratureSpec { n_points })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { n_points: 1024 }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `(1/π)∫₀^π f(λ) dλ` by the midpoint rule.
pub fn mean_over_lambda<F>(f: F, spec: &QuadratureSpec) -> f64
where
    F: Fn(Angle) -> f64,
{
    let n = spec.n_points;
    let h = PI / n as f64;
    let mut acc = CompensatedSum::default();
    for k in 0..n {
        acc.add(f(Angle::radians((k as f64 + 0.5) * h)));
    }
    acc.value() / n as f64
}

/// Singles and coincidences at settings `(alpha, beta)` by direct averaging.
///
/// The matching closed-form angle is `alpha + beta`.
pub fn rates_by_quadrature(model: &LhvModel, alpha: Angle, beta: Angle, spec: &QuadratureSpec) -> Rates {
    let alice = |l| response_at(model.alice(), l, alpha);
    let bob = |l| response_at(model.bob(), l, beta);
    Rates {
        p_a: mean_over_lambda(alice, spec),
        p_b: mean_over_lambda(bob, spec),
        p_ab: mean_over_lambda(|l| alice(l) * bob(l), spec),
    }
}
