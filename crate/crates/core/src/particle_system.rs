//! The charged Poisson particle system and its occupation field.
//!
//! Two samplers are provided. [`sample_system`] is the literal construction
//! truncated to a window `[-L, L]`. [`sample_visitors`] draws, without any
//! truncation, exactly those particles of the infinite system that sit in a
//! bounded region `A` at one or more grid times.
//!
//! The visitor sampler relies on two facts. At every fixed time the
//! positions of the infinite system again form a unit-rate Poisson process,
//! and a symmetric Lévy walk read backwards from time `m` is a walk with the
//! same law. Sorting visitors by their first grid visit `m`, the visitors
//! with first visit `m` are therefore a Poisson(|A|) batch of uniform points
//! in `A` at time `m`, thinned to those whose backward walk avoids `A` at
//! the times `0..m`. Batches for different `m` are independent because they
//! are disjoint thinnings of the same Poisson process.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Result};
use crate::kernels::TestFunction;
use crate::rng;
use crate::stable_levy::{fill_walk, standard_draw, StableParams, StablePath, TimeGrid};

/// Spatial truncation `[-L, L]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Window {
    half_width: f64,
}

impl Window {
    pub fn new(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid(format!("window half-width must be positive and finite, got {half_width}")));
        }
        Ok(Self { half_width })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_width
    }
}

/// How the particles of a [`ParticleSystem`] were selected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// All particles started in the window.
    Window(Window),
    /// All particles that visit `[lo, hi]` at some grid time.
    Visitors { lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
pub struct ParticleSystem {
    params: StableParams,
    grid: TimeGrid,
    domain: Domain,
    points: Vec<f64>,
    charges: Vec<f64>,
    paths: Vec<StablePath>,
}

impl ParticleSystem {
    /// Assembles a system from explicit parts; charges must be `±1`.
    pub fn from_parts(
        params: StableParams,
        grid: TimeGrid,
        domain: Domain,
        points: Vec<f64>,
        charges: Vec<f64>,
        paths: Vec<StablePath>,
    ) -> Result<Self> {
        if points.len() != charges.len() || points.len() != paths.len() {
            return Err(invalid("points, charges and paths must have equal lengths"));
        }
        if charges.iter().any(|&c| c != 1.0 && c != -1.0) {
            return Err(invalid("charges must be +1 or -1"));
        }
        if paths.iter().any(|p| p.grid() != grid) {
            return Err(invalid("all paths must share the system grid"));
        }
        Ok(Self {
            params,
            grid,
            domain,
            points,
            charges,
            paths,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn params(&self) -> StableParams {
        self.params
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }

    pub fn paths(&self) -> &[StablePath] {
        &self.paths
    }

    /// Simulated horizon.
    pub fn horizon(&self) -> f64 {
        self.grid.t_max()
    }

    /// `x_j + ξ^j` at grid index `i`.
    #[inline]
    pub fn position(&self, j: usize, i: usize) -> f64 {
        self.points[j] + self.paths[j].values()[i]
    }

    /// Positions of particle `j` at every grid index.
    pub fn trajectory(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let x = self.points[j];
        self.paths[j].values().iter().map(move |v| x + v)
    }

    /// The same system with every charge negated.
    pub fn with_flipped_charges(&self) -> Self {
        let mut out = self.clone();
        for c in out.charges.iter_mut() {
            *c = -*c;
        }
        out
    }
}

#[inline]
fn fair_charge<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| invalid(format!("Poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng) as usize)
}

/// Poisson(2L) particles uniform on the window, fair charges, independent
/// paths. Draw order per particle: position, charge, path.
pub fn sample_system<R: Rng + ?Sized>(
    params: StableParams,
    window: Window,
    grid: TimeGrid,
    rng: &mut R,
) -> Result<ParticleSystem> {
    let params = StableParams::for_particles(params.alpha())?;
    let n = poisson_count(window.length(), rng)?;
    let l = window.half_width();
    let mut points = Vec::with_capacity(n);
    let mut charges = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for _ in 0..n {
        points.push(rng.random_range(-l..l));
        charges.push(fair_charge(rng));
        let mut values = Vec::with_capacity(grid.n_steps() + 1);
        values.push(0.0);
        fill_walk(params.alpha(), grid.step(), grid.n_steps(), 0.0, rng, &mut values);
        paths.push(StablePath::from_values(params, grid, values)?);
    }
    Ok(ParticleSystem {
        params,
        grid,
        domain: Domain::Window(window),
        points,
        charges,
        paths,
    })
}

/// Exactly the particles of the unit-intensity system on ℝ that occupy
/// `[lo, hi]` at one or more grid times.
///
/// Cost is about `(hi - lo)·n²/2` stable draws for `n` grid steps.
pub fn sample_visitors<R: Rng + ?Sized>(
    params: StableParams,
    lo: f64,
    hi: f64,
    grid: TimeGrid,
    rng: &mut R,
) -> Result<ParticleSystem> {
    let params = StableParams::for_particles(params.alpha())?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("visiting region must be a bounded interval, got [{lo}, {hi}]")));
    }
    let alpha = params.alpha();
    let scale = grid.step().powf(1.0 / alpha);
    let n = grid.n_steps();
    let inside = |x: f64| x >= lo && x <= hi;
    let mut points = Vec::new();
    let mut charges = Vec::new();
    let mut paths = Vec::new();
    let mut backward = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let count = poisson_count(hi - lo, rng)?;
        for _ in 0..count {
            let y = rng.random_range(lo..hi);
            backward.clear();
            backward.push(y);
            let mut x = y;
            let mut hit = false;
            for _ in 0..m {
                x -= scale * standard_draw(alpha, rng);
                if inside(x) {
                    hit = true;
                    break;
                }
                backward.push(x);
            }
            if hit {
                continue;
            }
            let start = backward[m];
            let mut values = Vec::with_capacity(n + 1);
            values.extend(backward.iter().rev().map(|p| p - start));
            fill_walk(alpha, grid.step(), n - m, y - start, rng, &mut values);
            debug_assert_eq!(values.len(), n + 1);
            points.push(start);
            charges.push(fair_charge(rng));
            paths.push(StablePath::from_values(params, grid, values)?);
        }
    }
    Ok(ParticleSystem {
        params,
        grid,
        domain: Domain::Visitors { lo, hi },
        points,
        charges,
        paths,
    })
}

const QUANTILE_DRAWS: usize = 1_000_000;
const QUANTILE_SEED: u64 = 0x7175_616e_7469_6c65;

fn quantile_cache() -> &'static Mutex<HashMap<(u64, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Empirical `q`-quantile of `|S|` for a standard symmetric α-stable `S`,
/// from 10⁶ draws on a fixed stream keyed by `α`. Cached per `(α, q)`.
pub fn stable_abs_quantile(alpha: f64, q: f64) -> Result<f64> {
    let params = StableParams::for_particles(alpha)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let key = (alpha.to_bits(), q.to_bits());
    if let Some(&c) = quantile_cache().lock().expect("quantile cache poisoned").get(&key) {
        return Ok(c);
    }
    let mut r = rng::replica_rng(rng::derive_seed(QUANTILE_SEED, rng::tags::QUANTILE), alpha.to_bits());
    let mut draws: Vec<f64> = (0..QUANTILE_DRAWS)
        .map(|_| standard_draw(params.alpha(), &mut r).abs())
        .collect();
    let idx = ((q * QUANTILE_DRAWS as f64).ceil() as usize).clamp(1, QUANTILE_DRAWS) - 1;
    let (_, c, _) = draws.select_nth_unstable_by(idx, f64::total_cmp);
    let c = *c;
    quantile_cache().lock().expect("quantile cache poisoned").insert(key, c);
    Ok(c)
}

/// `L = t_max + c_q·T^{1/α}`, with `c_q` from [`stable_abs_quantile`].
pub fn window_for(t_max: f64, horizon: f64, alpha: f64, q: f64) -> Result<Window> {
    if !(t_max >= 0.0 && t_max.is_finite() && horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("need finite t_max, T >= 0, got {t_max}, {horizon}")));
    }
    let c = stable_abs_quantile(alpha, q)?;
    Window::new(t_max + c * horizon.powf(1.0 / alpha))
}

/// `∫₀^T φ(x_j + ξ^j_s) ds` for every particle, as a left Riemann sum.
pub fn occupation_per_particle(system: &ParticleSystem, phi: &dyn TestFunction, horizon: f64) -> Result<Vec<f64>> {
    let n_t = system.grid.nodes_before(horizon)?;
    let (s_lo, s_hi) = phi.support();
    let dt = system.grid.step();
    Ok((0..system.len())
        .map(|j| {
            let x = system.points[j];
            system.paths[j].values()[..n_t]
                .iter()
                .map(|v| x + v)
                .filter(|&p| p >= s_lo && p <= s_hi)
                .map(|p| phi.eval(p))
                .sum::<f64>()
                * dt
        })
        .collect())
}

/// `⟨X_T, φ⟩ = T^{-1/2} Σ_j σ_j ∫₀^T φ(x_j + ξ^j_s) ds`.
pub fn occupation_field(system: &ParticleSystem, phi: &dyn TestFunction, horizon: f64) -> Result<f64> {
    if horizon <= 0.0 {
        return Err(invalid(format!("occupation horizon must be positive, got {horizon}")));
    }
    let per = occupation_per_particle(system, phi, horizon)?;
    let total: f64 = per.iter().zip(&system.charges).map(|(o, s)| o * s).sum();
    Ok(total / horizon.sqrt())
}

/// [`occupation_field`] for several test functions in one call.
pub fn occupation_fields(system: &ParticleSystem, phis: &[&dyn TestFunction], horizon: f64) -> Result<Vec<f64>> {
    phis.iter().map(|phi| occupation_field(system, *phi, horizon)).collect()
}
