//! Symmetric α-stable Lévy motion.
//!
//! Increments are drawn with the Chambers–Mallows–Stuck transform. For a
//! step of length `dt` the draw is
//!
//! ```text
//! V = π (U₁ - 1/2),   W = -ln U₂,        U₁, U₂ ~ Open01 (53-bit, in that order)
//! S = sin(αV) / cos(V)^(1/α) · (cos((1-α)V) / W)^((1-α)/α)
//! X = dt^(1/α) · S
//! ```
//!
//! so that `E exp(iθX) = exp(-dt |θ|^α)`. `U₁` and `U₂` are consecutive
//! `Open01` draws from the replica stream; nothing else is consumed. A zero
//! step returns `0.0` without touching the stream.
//!
//! The density and potential utilities are reference numerics for tests and
//! calibration; the samplers never call them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    alpha: f64,
}

impl StableParams {
    /// Stability index in `(0, 2]`.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid(format!("stability index must lie in (0, 2], got {alpha}")));
        }
        Ok(Self { alpha })
    }

    /// Stability index restricted to the transient range `(0, 1)` used by
    /// the particle system.
    pub fn for_particles(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("particle motions need alpha in (0, 1), got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Uniform grid `0, step, 2·step, …, n_steps·step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    step: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(step: f64, n_steps: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("time step must be positive and finite, got {step}")));
        }
        Ok(Self { step, n_steps })
    }

    /// Grid covering `[0, t_max]` with the given step; `t_max` must be an
    /// integer multiple of `step`.
    pub fn covering(t_max: f64, step: f64) -> Result<Self> {
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(invalid(format!("horizon must be finite and non-negative, got {t_max}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("time step must be positive and finite, got {step}")));
        }
        let n = (t_max / step).round();
        if (n * step - t_max).abs() > 1e-12 * t_max.max(1.0) {
            return Err(invalid(format!("horizon {t_max} is not a multiple of the step {step}")));
        }
        Self::new(step, n as usize)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_max(&self) -> f64 {
        self.step * self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.step * i as f64
    }

    /// Number of left-Riemann nodes `0, step, …` strictly before `horizon`.
    pub fn nodes_before(&self, horizon: f64) -> Result<usize> {
        if horizon > self.t_max() * (1.0 + 1e-12) + 1e-300 {
            return Err(invalid(format!(
                "horizon {horizon} exceeds the simulated range {}",
                self.t_max()
            )));
        }
        let n = (horizon / self.step).round();
        if (n * self.step - horizon).abs() > 1e-9 * horizon.max(self.step) {
            return Err(invalid(format!("horizon {horizon} is not on the grid with step {}", self.step)));
        }
        Ok(n as usize)
    }
}

/// One trajectory on a [`TimeGrid`]; `values[0] == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StablePath {
    params: StableParams,
    grid: TimeGrid,
    values: Vec<f64>,
}

impl StablePath {
    /// Builds a path from explicit values. Used for frozen test paths and by
    /// samplers that assemble paths from pieces.
    pub fn from_values(params: StableParams, grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps() + 1 {
            return Err(invalid(format!(
                "path has {} values for a grid of {} steps",
                values.len(),
                grid.n_steps()
            )));
        }
        if values[0] != 0.0 {
            return Err(invalid("paths start at the origin"));
        }
        Ok(Self { params, grid, values })
    }

    pub fn params(&self) -> StableParams {
        self.params
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Standard symmetric α-stable draw (unit scale), CMS transform.
#[inline]
pub fn standard_draw<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u1: f64 = Open01.sample(rng);
    let u2: f64 = Open01.sample(rng);
    cms(alpha, u1, u2)
}

#[inline]
fn cms(alpha: f64, u1: f64, u2: f64) -> f64 {
    let v = PI * (u1 - 0.5);
    let w = -u2.ln();
    let inv = 1.0 / alpha;
    (alpha * v).sin() / v.cos().powf(inv) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) * inv)
}

/// Increment `ξ_{t+dt} - ξ_t`.
pub fn sample_increment<R: Rng + ?Sized>(params: StableParams, dt: f64, rng: &mut R) -> Result<f64> {
    if !dt.is_finite() {
        return Err(invalid(format!("time increment must be finite, got {dt}")));
    }
    if dt < 0.0 {
        return Err(invalid(format!("time increment must be non-negative, got {dt}")));
    }
    check_sampler_alpha(params)?;
    if dt == 0.0 {
        return Ok(0.0);
    }
    Ok(dt.powf(1.0 / params.alpha) * standard_draw(params.alpha, rng))
}

fn check_sampler_alpha(params: StableParams) -> Result<()> {
    if params.alpha == 1.0 {
        return Err(Error::Unsupported("the stable samplers exclude alpha = 1".into()));
    }
    Ok(())
}

/// Cumulative sum of independent increments with `dt = grid.step()`.
pub fn sample_path<R: Rng + ?Sized>(params: StableParams, grid: TimeGrid, rng: &mut R) -> Result<StablePath> {
    check_sampler_alpha(params)?;
    let mut values = Vec::with_capacity(grid.n_steps() + 1);
    values.push(0.0);
    fill_walk(params.alpha, grid.step(), grid.n_steps(), 0.0, rng, &mut values);
    Ok(StablePath { params, grid, values })
}

/// Appends `n` further positions of a walk started at `start`.
#[inline]
pub(crate) fn fill_walk<R: Rng + ?Sized>(alpha: f64, step: f64, n: usize, start: f64, rng: &mut R, out: &mut Vec<f64>) {
    let scale = step.powf(1.0 / alpha);
    let mut x = start;
    for _ in 0..n {
        x += scale * standard_draw(alpha, rng);
        out.push(x);
    }
}

/// Transition density `p_s(x)` of the symmetric α-stable motion with
/// characteristic exponent `s |θ|^α`.
///
/// `p_1` is computed by Fourier-cosine inversion
/// `(1/π) ∫₀^∞ cos(xθ) e^{-θ^α} dθ`, integrated half-period by half-period
/// with adaptive Gauss–Kronrod (absolute tolerance 1e-13 per piece) up to
/// the point where `e^{-θ^α} < 1e-18`. For `α < 1` and `|x| ≥ 2` the
/// convergent Bergström series is used instead. General `s` follows from
/// the scaling `p_s(x) = s^{-1/α} p_1(s^{-1/α} x)`.
pub fn transition_density(params: StableParams, s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("density time must be positive, got {s}")));
    }
    if !x.is_finite() {
        return Err(invalid("density argument must be finite"));
    }
    let scale = s.powf(-1.0 / params.alpha);
    Ok(scale * unit_density(params.alpha, scale * x)?)
}

const SERIES_SWITCH: f64 = 2.0;

fn unit_density(alpha: f64, x: f64) -> Result<f64> {
    let x = x.abs();
    if alpha < 1.0 && x >= SERIES_SWITCH {
        return Ok(bergstrom_series(alpha, x));
    }
    fourier_density(alpha, x)
}

pub(crate) fn fourier_density(alpha: f64, x: f64) -> Result<f64> {
    let theta_max = 41.5_f64.powf(1.0 / alpha);
    let piece = if x > 0.0 { (PI / x).min(1.0) } else { 1.0 };
    let mut total = 0.0;
    let mut lo = 0.0;
    while lo < theta_max {
        let hi = (lo + piece).min(theta_max);
        let e = quad::integrate(|t: f64| (x * t).cos() * (-t.powf(alpha)).exp(), lo, hi, 1e-13)?;
        total += e.value;
        lo = hi;
    }
    Ok(total / PI)
}

/// `p_1(x) = (1/π) Σ_{n≥1} (-1)^{n+1} Γ(nα+1)/n! · sin(nπα/2) · x^{-nα-1}`,
/// convergent for `α < 1`, `x > 0`.
pub(crate) fn bergstrom_series(alpha: f64, x: f64) -> f64 {
    let lx = x.ln();
    let mut sum = 0.0;
    for n in 1..2000 {
        let nf = n as f64;
        let mag = (libm::lgamma(nf * alpha + 1.0) - libm::lgamma(nf + 1.0) - (nf * alpha + 1.0) * lx).exp();
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * mag * (nf * PI * alpha / 2.0).sin();
        sum += term;
        if mag < 1e-18 * sum.abs().max(1e-300) && n > 4 {
            break;
        }
    }
    sum / PI
}

fn potential_cache() -> &'static Mutex<HashMap<u64, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Constant `C(α)` in `∫₀^∞ p_s(x) ds = C(α) |x|^{α-1}`, computed once per
/// α as `α ∫₀^∞ u^{-α} p_1(u) du` and cached.
pub fn potential_constant(params: StableParams) -> Result<f64> {
    let alpha = params.alpha;
    if alpha >= 1.0 {
        return Err(invalid(format!("the potential is infinite for alpha = {alpha} >= 1 (recurrent motion)")));
    }
    if let Some(c) = potential_cache().lock().expect("potential cache poisoned").get(&alpha.to_bits()) {
        return Ok(*c);
    }
    // [0, 2]: u = v^{1/(1-α)} turns u^{-α} du into dv / (1-α)
    let p = 1.0 / (1.0 - alpha);
    let mut err = None;
    let head = quad::integrate(
        |v: f64| match unit_density(alpha, v.powf(p)) {
            Ok(d) => d,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        SERIES_SWITCH.powf(1.0 - alpha),
        1e-11,
    )?
    .value
        * p;
    if let Some(e) = err {
        return Err(e);
    }
    // [2, ∞): term-by-term integral of the series
    let mut tail = 0.0;
    let l2 = SERIES_SWITCH.ln();
    for n in 1..2000 {
        let nf = n as f64;
        let mag = (libm::lgamma(nf * alpha + 1.0) - libm::lgamma(nf + 1.0) - (nf + 1.0) * alpha * l2).exp()
            / ((nf + 1.0) * alpha);
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        tail += sign * mag * (nf * PI * alpha / 2.0).sin();
        if mag < 1e-18 && n > 4 {
            break;
        }
    }
    tail /= PI;
    let c = alpha * (head + tail);
    potential_cache()
        .lock()
        .expect("potential cache poisoned")
        .insert(alpha.to_bits(), c);
    Ok(c)
}

/// Potential kernel `∫₀^∞ p_s(x) ds = C(α) |x|^{α-1}` for `α ∈ (0, 1)`.
pub fn potential_kernel(params: StableParams, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::Singularity("the potential kernel is infinite at x = 0".into()));
    }
    if !x.is_finite() {
        return Err(invalid("potential argument must be finite"));
    }
    Ok(potential_constant(params)? * x.abs().powf(params.alpha - 1.0))
}
