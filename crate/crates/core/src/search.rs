//! Sweeps and derivative-free maximization of the CH parameter.
//!
//! The objective is the closed-form `B` of a symmetric model under a memory
//! rule. Coefficient vectors whose response leaves `[0, 1]` score
//! [`PENALTY`] minus the size of the violation, which sits far below every
//! feasible value, so the optimizer never reports them.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ch_with_memory, BellBreakdown};
use crate::error::{Error, Result};
use crate::model::{validate_response, Angle, Coefficients, CosineResponse, LhvModel, MemoryKind, MemoryRule, Orientation, VALIDITY_TOL};

/// Objective value assigned to infeasible points, before subtracting the
/// violation magnitude.
pub const PENALTY: f64 = -1e3;

pub const MAX_ITERATIONS: usize = 500;
pub const DIAMETER_TOL: f64 = 1e-8;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Attempts allowed to [`random_valid_model`].
pub const REJECTION_ATTEMPTS: usize = 100_000;

/// Draws `a0 ~ U[0,1]`, `a1, a2 ~ U[−1,1]` until the response is valid and
/// returns the symmetric model.
pub fn random_valid_model(seed: u64) -> Result<LhvModel> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for _ in 0..REJECTION_ATTEMPTS {
        let c = Coefficients::new(
            rng.random::<f64>(),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        if validate_response(&CosineResponse::new(c, Orientation::Minus)).valid {
            return LhvModel::symmetric(c);
        }
    }
    Err(Error::RejectionLimit {
        attempts: REJECTION_ATTEMPTS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub phi: Angle,
    pub breakdown: BellBreakdown,
}

/// `B` at each grid angle, in grid order.
pub fn sweep_phi(model: &LhvModel, rule: &MemoryRule, grid: &[Angle]) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|&phi| {
            Ok(SweepRow {
                phi,
                breakdown: ch_with_memory(model, rule, phi)?,
            })
        })
        .collect()
}

/// `n` evenly spaced angles from `start` to `end` inclusive.
pub fn linspace(start: Angle, end: Angle, n: usize) -> Vec<Angle> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end.rad() - start.rad()) / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        end
                    } else {
                        Angle::radians(start.rad() + i as f64 * step)
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    A0,
    A1,
    A2,
    Phi,
    Strength,
}

/// Full parameter vector of a symmetric model, an angle and a strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub phi: f64,
    pub strength: f64,
}

impl Default for Params {
    /// Reference coefficients, `φ = π/8`, full strength.
    fn default() -> Self {
        Params {
            a0: 1.0 / 3.0,
            a1: SQRT_2 / 3.0,
            a2: 1.0 / 6.0,
            phi: PI / 8.0,
            strength: 1.0,
        }
    }
}

impl Params {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::A0 => self.a0,
            Param::A1 => self.a1,
            Param::A2 => self.a2,
            Param::Phi => self.phi,
            Param::Strength => self.strength,
        }
    }

    pub fn set(&mut self, p: Param, value: f64) {
        match p {
            Param::A0 => self.a0 = value,
            Param::A1 => self.a1 = value,
            Param::A2 => self.a2 = value,
            Param::Phi => self.phi = value,
            Param::Strength => self.strength = value,
        }
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients::new(self.a0, self.a1, self.a2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Bounds {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Bounds { lo, hi }
    }
}

impl Bounds {
    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Free parameters with their boxes, values for the rest, and the rule.
///
/// JSON form: `{"rule": "enhance", "free": {"phi": [0, 1.57]}, "fixed": {...}}`.
/// Missing fixed values default to [`Params::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub rule: MemoryKind,
    #[serde(with = "bounds_map")]
    pub free: BTreeMap<Param, Bounds>,
    #[serde(default)]
    pub fixed: Params,
    /// Extra starting points, tried after the fixed point and before the
    /// quasi-random restarts.
    #[serde(default)]
    pub starts: Vec<Params>,
}

mod bounds_map {
    use super::{Bounds, Param};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(map: &BTreeMap<Param, Bounds>, s: S) -> Result<S::Ok, S::Error> {
        let pairs: BTreeMap<Param, [f64; 2]> = map.iter().map(|(k, b)| (*k, [b.lo, b.hi])).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Param, Bounds>, D::Error> {
        let pairs = BTreeMap::<Param, [f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|(k, b)| (k, Bounds::from(b))).collect())
    }
}

impl SearchSpace {
    pub fn new(rule: MemoryKind, fixed: Params) -> Self {
        SearchSpace {
            rule,
            free: BTreeMap::new(),
            fixed,
            starts: Vec::new(),
        }
    }

    pub fn with_free(mut self, p: Param, lo: f64, hi: f64) -> Self {
        self.free.insert(p, Bounds { lo, hi });
        self
    }

    pub fn with_start(mut self, start: Params) -> Self {
        self.starts.push(start);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.free.is_empty() {
            return Err(Error::EmptySpace);
        }
        for (p, b) in &self.free {
            if !(b.lo.is_finite() && b.hi.is_finite()) || b.lo > b.hi {
                return Err(Error::InvalidSpace(format!("bounds for {p:?} must be finite with lo <= hi")));
            }
            if *p == Param::Strength && (b.lo < 0.0 || b.hi > 1.0) {
                return Err(Error::InvalidSpace("strength bounds must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    fn dims(&self) -> Vec<(Param, Bounds)> {
        self.free.iter().map(|(p, b)| (*p, *b)).collect()
    }

    fn point(&self, x: &[f64]) -> Params {
        let mut p = self.fixed;
        for ((param, _), v) in self.free.iter().zip(x) {
            p.set(*param, *v);
        }
        p
    }

    fn project(&self, params: &Params) -> Vec<f64> {
        self.free.iter().map(|(p, b)| b.clamp(params.get(*p))).collect()
    }
}

/// Objective value at one parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub b: f64,
    /// True when `b` is a penalty rather than a CH parameter.
    pub penalized: bool,
}

/// Closed-form `B` of the symmetric model at `params`, or a penalty.
pub fn evaluate(rule: MemoryKind, params: &Params) -> Evaluation {
    let coeffs = params.coefficients();
    let penalty = |violation: f64| Evaluation {
        b: PENALTY - violation,
        penalized: true,
    };
    if !coeffs.is_finite() {
        return penalty(0.0);
    }
    let (lo, hi) = coeffs.exact_extrema();
    let violation = (-lo).max(0.0) + (hi - 1.0).max(0.0);
    if lo < -VALIDITY_TOL || hi > 1.0 + VALIDITY_TOL {
        return penalty(violation);
    }
    let model = LhvModel::symmetric_prechecked(coeffs);
    let outcome = MemoryRule::new(rule, params.strength)
        .and_then(|memory| ch_with_memory(&model, &memory, Angle::radians(params.phi)));
    match outcome {
        Ok(br) if br.b.is_finite() => Evaluation {
            b: br.b,
            penalized: false,
        },
        _ => penalty(violation),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub params: Params,
    pub b: f64,
    pub penalized: bool,
    /// Index of the start this evaluation belongs to.
    pub restart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_params: Params,
    pub best_b: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

impl SearchResult {
    /// Best feasible `B` seen after each trace entry.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.trace
            .iter()
            .map(|e| {
                if !e.penalized && e.b > best {
                    best = e.b;
                }
                best
            })
            .collect()
    }
}

struct LocalRun {
    trace: Vec<TraceEntry>,
    best: Option<(Params, f64)>,
}

/// Nelder–Mead on `−B` inside the box, projecting every trial point.
fn nelder_mead(space: &SearchSpace, start: &[f64], restart: usize) -> LocalRun {
    let dims = space.dims();
    let n = dims.len();
    let mut run = LocalRun {
        trace: Vec::new(),
        best: None,
    };
    let eval = |x: &[f64], run: &mut LocalRun| -> f64 {
        let params = space.point(x);
        let e = evaluate(space.rule, &params);
        run.trace.push(TraceEntry {
            params,
            b: e.b,
            penalized: e.penalized,
            restart,
        });
        if !e.penalized && run.best.is_none_or(|(_, b)| e.b > b) {
            run.best = Some((params, e.b));
        }
        -e.b
    };
    let project = |x: &mut [f64]| {
        for (v, (_, b)) in x.iter_mut().zip(&dims) {
            *v = b.clamp(*v);
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for (i, (_, b)) in dims.iter().enumerate() {
        let mut v = start.to_vec();
        let h = 0.1 * b.width();
        v[i] = if v[i] + h <= b.hi { v[i] + h } else { v[i] - h };
        project(&mut v);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut run)).collect();

    for _ in 0..MAX_ITERATIONS {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if diameter(&simplex) < DIAMETER_TOL {
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|d| simplex[..n].iter().map(|x| x[d]).sum::<f64>() / n as f64).collect();
        let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(from).map(|(c, x)| c + coef * (x - c)).collect();
            project(&mut p);
            p
        };

        let worst = simplex[n].clone();
        let reflected = toward(-REFLECT, &worst);
        let f_r = eval(&reflected, &mut run);
        if f_r < values[0] {
            let expanded = toward(EXPAND, &reflected);
            let f_e = eval(&expanded, &mut run);
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
            continue;
        }
        let (contracted, f_c, accepted) = if f_r < values[n] {
            let c = toward(CONTRACT, &reflected);
            let f = eval(&c, &mut run);
            (c, f, f <= f_r)
        } else {
            let c = toward(CONTRACT, &worst);
            let f = eval(&c, &mut run);
            (c, f, f < values[n])
        };
        if accepted {
            simplex[n] = contracted;
            values[n] = f_c;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            let mut p: Vec<f64> = best.iter().zip(&simplex[i]).map(|(b, x)| b + SHRINK * (x - b)).collect();
            project(&mut p);
            values[i] = eval(&p, &mut run);
            simplex[i] = p;
        }
    }
    run
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in simplex.iter().enumerate() {
        for b in &simplex[i + 1..] {
            let dist = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d
}

const HALTON_BASES: [u64; 5] = [2, 3, 5, 7, 11];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// `count` Halton points over the box, randomly shifted modulo 1 by `seed`.
fn halton_starts(dims: &[(Param, Bounds)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let shift: Vec<f64> = dims.iter().map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            dims.iter()
                .zip(HALTON_BASES)
                .zip(&shift)
                .map(|(((_, b), base), s)| {
                    let u = (radical_inverse(i, base) + s).fract();
                    b.lo + u * b.width()
                })
                .collect()
        })
        .collect()
}

/// Multi-start Nelder–Mead maximization of `B` over `space`.
///
/// Starts, in order: the fixed point projected into the box, then
/// `space.starts`, then `restarts` quasi-random points. Exact ties keep the
/// earliest start.
pub fn maximize_ch(space: &SearchSpace, restarts: usize, seed: u64) -> Result<SearchResult> {
    space.validate()?;
    let dims = space.dims();
    let mut starts = vec![space.project(&space.fixed)];
    starts.extend(space.starts.iter().map(|s| space.project(s)));
    starts.extend(halton_starts(&dims, restarts, seed));

    let runs: Vec<LocalRun> = starts
        .par_iter()
        .enumerate()
        .map(|(i, x)| nelder_mead(space, x, i))
        .collect();

    let mut best: Option<(Params, f64)> = None;
    let mut trace = Vec::new();
    for run in runs {
        if let Some((p, b)) = run.best {
            if best.is_none_or(|(_, bb)| b > bb) {
                best = Some((p, b));
            }
        }
        trace.extend(run.trace);
    }
    let (best_params, best_b) = best.ok_or_else(|| Error::InvalidSpace("no feasible point found".into()))?;
    Ok(SearchResult {
        best_params,
        best_b,
        evaluations: trace.len(),
        trace,
    })
}
