//! Event-level simulation of the detection process.
//!
//! The source emits events in disjoint blocks of two. For each block two
//! hidden variables are drawn independently. In the first event each
//! observer detects with the probability given by their response. In the
//! second event an observer who detected in the first event has, with
//! probability `s`, a forced outcome (none under inhibition, certain under
//! enhancement); otherwise, and always for an observer who missed the first
//! event, the ordinary response at the second hidden variable applies.
//!
//! Blocks are split into a fixed number of batches. Each batch draws from
//! its own generator seeded by [`derive_seed`], so the result depends only
//! on the seed, the number of pairs and the batch count, never on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;
use std::ops::{Add, AddAssign};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{Angle, Coefficients, LhvModel, MemoryKind, MemoryRule};

pub const DEFAULT_BATCHES: usize = 100;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sub-stream `stream` of the master `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(mix64(seed) ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    /// Number of two-event blocks.
    pub n_pairs: u64,
    pub seed: u64,
    pub alpha: Angle,
    pub beta: Angle,
    pub rule: MemoryRule,
    /// Number of independently seeded shards; also the batch count used for
    /// batch-means errors.
    pub batches: usize,
}

impl RunConfig {
    /// Settings `alpha = phi`, `beta = 0`, i.e. effective angle `phi`.
    pub fn at_phi(phi: Angle, rule: MemoryRule, n_pairs: u64, seed: u64) -> Self {
        RunConfig {
            n_pairs,
            seed,
            alpha: phi,
            beta: Angle::radians(0.0),
            rule,
            batches: DEFAULT_BATCHES,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::Range {
                name: "n_pairs",
                value: 0.0,
                range: ">= 1",
            });
        }
        if self.batches == 0 {
            return Err(Error::Range {
                name: "batches",
                value: 0.0,
                range: ">= 1",
            });
        }
        if !(self.alpha.rad().is_finite() && self.beta.rad().is_finite()) {
            return Err(Error::Range {
                name: "angle",
                value: f64::NAN,
                range: "finite",
            });
        }
        Ok(())
    }

    /// Shard sizes: `n_pairs` split as evenly as possible into at most
    /// `batches` non-empty pieces.
    fn shard_sizes(&self) -> Vec<u64> {
        let k = (self.batches as u64).min(self.n_pairs);
        let (q, r) = (self.n_pairs / k, self.n_pairs % k);
        (0..k).map(|i| q + u64::from(i < r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Tally {
    pub events: u64,
    pub singles_a: u64,
    pub singles_b: u64,
    pub coincidences: u64,
}

impl Tally {
    pub fn p_a(&self) -> f64 {
        self.singles_a as f64 / self.events as f64
    }

    pub fn p_b(&self) -> f64 {
        self.singles_b as f64 / self.events as f64
    }

    pub fn p_ab(&self) -> f64 {
        self.coincidences as f64 / self.events as f64
    }

    /// `coincidences ≤ min(singles) ≤ events`.
    pub fn is_consistent(&self) -> bool {
        self.coincidences <= self.singles_a.min(self.singles_b)
            && self.singles_a <= self.events
            && self.singles_b <= self.events
    }
}

impl AddAssign for Tally {
    fn add_assign(&mut self, rhs: Tally) {
        self.events += rhs.events;
        self.singles_a += rhs.singles_a;
        self.singles_b += rhs.singles_b;
        self.coincidences += rhs.coincidences;
    }
}

impl Add for Tally {
    type Output = Tally;

    fn add(mut self, rhs: Tally) -> Tally {
        self += rhs;
        self
    }
}

impl std::iter::Sum for Tally {
    fn sum<I: Iterator<Item = Tally>>(iter: I) -> Tally {
        iter.fold(Tally::default(), Add::add)
    }
}

/// A Monte Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
}

impl Estimate {
    /// Proportion `count / n` with binomial error `sqrt(v(1−v)/n)`.
    pub fn proportion(count: u64, n: u64) -> Self {
        let value = count as f64 / n as f64;
        let v = value.clamp(0.0, 1.0);
        Estimate {
            value,
            stderr: (v * (1.0 - v) / n as f64).sqrt(),
            n,
        }
    }

    /// `|value − reference| ≤ k·stderr`.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.value - reference).abs() <= k * self.stderr
    }
}

/// Batch-means error of a statistic whose pooled value is `pooled`.
fn batch_means(pooled: f64, per_batch: &[f64], n: u64) -> Estimate {
    let k = per_batch.len();
    let stderr = if k < 2 {
        f64::NAN
    } else {
        let mean = per_batch.iter().sum::<f64>() / k as f64;
        let var = per_batch.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    };
    Estimate {
        value: pooled,
        stderr,
        n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tally: Tally,
    /// Per-shard tallies in shard order.
    pub batches: Vec<Tally>,
    pub p_a: Estimate,
    pub p_b: Estimate,
    pub p_ab: Estimate,
}

impl RunReport {
    fn from_batches(batches: Vec<Tally>) -> Self {
        let tally: Tally = batches.iter().copied().sum();
        RunReport {
            p_a: Estimate::proportion(tally.singles_a, tally.events),
            p_b: Estimate::proportion(tally.singles_b, tally.events),
            p_ab: Estimate::proportion(tally.coincidences, tally.events),
            tally,
            batches,
        }
    }

    /// Estimate of `stat` with a batch-means standard error.
    ///
    /// Unlike the binomial errors on `p_a`/`p_b`/`p_ab`, this accounts for
    /// the correlation between the two events of a block.
    pub fn batch_estimate(&self, stat: impl Fn(&Tally) -> f64) -> Estimate {
        let per_batch: Vec<f64> = self.batches.iter().map(&stat).collect();
        batch_means(stat(&self.tally), &per_batch, self.tally.events)
    }
}

const TWO_POW_NEG_32: f64 = 1.0 / 4_294_967_296.0;

/// Two independent uniforms on `[0, 1)` with 32-bit resolution from one draw.
#[inline]
fn uniform_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let v = rng.next_u64();
    ((v >> 32) as f64 * TWO_POW_NEG_32, (v as u32) as f64 * TWO_POW_NEG_32)
}

const PHASE_BITS: u32 = 10;
const PHASE_CELLS: usize = 1 << PHASE_BITS;
const PHASE_CELL_WIDTH: f64 = std::f64::consts::TAU / PHASE_CELLS as f64;
const TWO_POW_NEG_53: f64 = 1.0 / 9_007_199_254_740_992.0;

/// `(cos, sin)` at the left edge of each of the 1024 cells of `[0, 2π)`.
fn phase_table() -> &'static [(f64, f64); PHASE_CELLS] {
    static TABLE: OnceLock<[(f64, f64); PHASE_CELLS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        std::array::from_fn(|i| {
            let (s, c) = (i as f64 * PHASE_CELL_WIDTH).sin_cos();
            (c, s)
        })
    })
}

/// `(cos 2λ, sin 2λ)` for `λ` uniform on `[0, π)`, i.e. a uniform angle
/// `2λ` on `[0, 2π)` with 63 bits of resolution.
///
/// The top 10 bits pick a table cell, the remaining offset `δ < 2π/1024`
/// is rotated in with degree-5 Taylor polynomials (truncation error below
/// 1e-16).
#[inline]
fn double_angle_phase<R: Rng>(rng: &mut R, table: &[(f64, f64); PHASE_CELLS]) -> (f64, f64) {
    let v = rng.next_u64();
    let (c, s) = table[(v >> (64 - PHASE_BITS)) as usize];
    let d = ((v << PHASE_BITS) >> 11) as f64 * TWO_POW_NEG_53 * PHASE_CELL_WIDTH;
    let d2 = d * d;
    let cos_d = 1.0 - d2 * (0.5 - d2 / 24.0);
    let sin_d = d * (1.0 - d2 * (1.0 / 6.0 - d2 / 120.0));
    (c * cos_d - s * sin_d, s * cos_d + c * sin_d)
}

/// One observer's response with the setting folded in.
#[derive(Clone, Copy)]
struct Detector {
    coeffs: Coefficients,
    cos_setting: f64,
    sin_setting: f64,
}

impl Detector {
    fn new(coeffs: Coefficients, signed_setting: f64) -> Self {
        let (sin_setting, cos_setting) = (2.0 * signed_setting).sin_cos();
        Detector {
            coeffs,
            cos_setting,
            sin_setting,
        }
    }

    /// Detection probability given `(cos 2λ, sin 2λ)`.
    #[inline]
    fn probability(&self, (c, s): (f64, f64)) -> f64 {
        // cos(2λ − 2θ) with θ already carrying the orientation sign
        self.coeffs.at_cos2(c * self.cos_setting + s * self.sin_setting)
    }
}

#[derive(Clone, Copy)]
struct BlockSimulator {
    alice: Detector,
    bob: Detector,
    kind: MemoryKind,
    strength: f64,
}

impl BlockSimulator {
    fn new(model: &LhvModel, cfg: &RunConfig) -> Self {
        BlockSimulator {
            alice: Detector::new(model.alice().coefficients, cfg.alpha.rad()),
            // Bob's argument is λ + β
            bob: Detector::new(model.bob().coefficients, -cfg.beta.rad()),
            kind: cfg.rule.kind(),
            strength: cfg.rule.effective_strength(),
        }
    }

    /// Second-event outcome for an observer with first-event result `first`
    /// and ordinary draw `u` against response `ordinary`.
    #[inline]
    fn second_event<R: Rng>(&self, rng: &mut R, first: bool, u: f64, ordinary: f64) -> bool {
        if first && self.strength > 0.0 && (self.strength >= 1.0 || rng.random::<f64>() < self.strength) {
            return self.kind == MemoryKind::Enhance;
        }
        u < ordinary
    }

    fn run<R: Rng>(&self, rng: &mut R, pairs: u64) -> Tally {
        let mut t = Tally {
            events: 2 * pairs,
            ..Tally::default()
        };
        let table = phase_table();
        for _ in 0..pairs {
            let phase = double_angle_phase(rng, table);
            let (ua, ub) = uniform_pair(rng);
            let a1 = ua < self.alice.probability(phase);
            let b1 = ub < self.bob.probability(phase);
            let phase = double_angle_phase(rng, table);
            let (ua, ub) = uniform_pair(rng);
            let a2 = self.second_event(rng, a1, ua, self.alice.probability(phase));
            let b2 = self.second_event(rng, b1, ub, self.bob.probability(phase));
            t.singles_a += u64::from(a1) + u64::from(a2);
            t.singles_b += u64::from(b1) + u64::from(b2);
            t.coincidences += u64::from(a1 && b1) + u64::from(a2 && b2);
        }
        t
    }
}

/// Simulates `cfg.n_pairs` blocks and returns per-event rate estimates.
pub fn simulate_run(model: &LhvModel, cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let sim = BlockSimulator::new(model, cfg);
    let batches: Vec<Tally> = cfg
        .shard_sizes()
        .into_par_iter()
        .enumerate()
        .map(|(i, pairs)| {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(cfg.seed, i as u64));
            sim.run(&mut rng, pairs)
        })
        .collect();
    Ok(RunReport::from_batches(batches))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChEstimate {
    pub b: Estimate,
    pub at_phi: RunReport,
    pub at_3phi: RunReport,
}

/// `B` estimated from two runs sharing batch boundaries; singles are pooled
/// over both runs.
fn ch_from_tallies(at_phi: &Tally, at_3phi: &Tally) -> f64 {
    // Both runs share event counts, so the per-event normalisation cancels:
    // (3C − C')/E divided by the pooled mean p_a + p_b = S/(2E).
    debug_assert_eq!(at_phi.events, at_3phi.events);
    let singles = (at_phi.singles_a + at_phi.singles_b + at_3phi.singles_a + at_3phi.singles_b) as f64;
    2.0 * (3.0 * at_phi.coincidences as f64 - at_3phi.coincidences as f64) / singles
}

/// Monte Carlo estimate of the CH parameter at effective angle `phi`.
///
/// The runs at `phi` and `3phi` use sub-seeds 0 and 1 of `seed`. The
/// standard error comes from batch means over [`DEFAULT_BATCHES`] batches.
pub fn estimate_ch_mc(model: &LhvModel, rule: &MemoryRule, phi: Angle, n_pairs: u64, seed: u64) -> Result<ChEstimate> {
    if n_pairs < DEFAULT_BATCHES as u64 {
        return Err(Error::InsufficientSamples {
            n_pairs,
            batches: DEFAULT_BATCHES,
        });
    }
    if rule.kind() != MemoryKind::Memoryless && !model.is_symmetric() {
        let a = model.alice().coefficients.a0;
        let b = model.bob().coefficients.a0;
        return Err(Error::AsymmetricRates { p_a: a, p_b: b });
    }
    let cfg_phi = RunConfig::at_phi(phi, *rule, n_pairs, derive_seed(seed, 0));
    let cfg_3phi = RunConfig::at_phi(phi.scaled(3.0), *rule, n_pairs, derive_seed(seed, 1));
    let at_phi = simulate_run(model, &cfg_phi)?;
    let at_3phi = simulate_run(model, &cfg_3phi)?;

    let pooled = at_phi.tally.singles_a + at_phi.tally.singles_b + at_3phi.tally.singles_a + at_3phi.tally.singles_b;
    let empty_batch = at_phi
        .batches
        .iter()
        .zip(&at_3phi.batches)
        .any(|(x, y)| x.singles_a + x.singles_b + y.singles_a + y.singles_b == 0);
    if pooled == 0 || empty_batch {
        return Err(Error::DivisionByZero);
    }
    let per_batch: Vec<f64> = at_phi
        .batches
        .iter()
        .zip(&at_3phi.batches)
        .map(|(x, y)| ch_from_tallies(x, y))
        .collect();
    let b = batch_means(
        ch_from_tallies(&at_phi.tally, &at_3phi.tally),
        &per_batch,
        at_phi.tally.events + at_3phi.tally.events,
    );
    Ok(ChEstimate { b, at_phi, at_3phi })
}
