//! Particle functionals: the pair functional `Δ`, the approximate
//! k-intersection local time, and the aggregated sums `η^T`, `ρ^T` together
//! with the occupation field on indicator functions.
//!
//! Time integrals are left Riemann sums over the nodes `0, dt, …, T - dt`.
//! Every sampler draws the exact sub-system of particles that can contribute
//! (see [`sample_visitors`]), so no spatial truncation enters.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::{
    smoothed_indicator, InteractionKernel, Mollifier, Profile, StepFunction, TestFunction,
};
use crate::particle_system::{occupation_per_particle, sample_visitors, ParticleSystem};
use crate::stable_levy::{StableParams, TimeGrid};

/// One replica's values on the evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub replica_id: u64,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub config_digest: String,
    /// Set when the sample is zero for a structural reason (too few particles).
    pub degenerate: bool,
}

/// FNV-1a over the JSON form of a config.
pub fn config_digest<C: Serialize>(config: &C) -> String {
    let bytes = serde_json::to_vec(config).expect("configs serialize");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(invalid("the evaluation grid is empty"));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("evaluation times must be finite and non-negative"));
    }
    Ok(())
}

/// `1_{[0,t]}` for each `t`, smoothed with the bump at width `κ` when `κ > 0`.
pub fn indicator_family(t_grid: &[f64], kappa: f64, profile: Profile) -> Result<Vec<Arc<dyn TestFunction>>> {
    t_grid
        .iter()
        .map(|&t| {
            let step = StepFunction::indicator(0.0, t)?;
            if kappa == 0.0 {
                Ok(Arc::new(step) as Arc<dyn TestFunction>)
            } else {
                Ok(Arc::new(smoothed_indicator(step, Mollifier::shared(profile), kappa)?) as Arc<dyn TestFunction>)
            }
        })
        .collect()
}

/// Union of the supports of a family, or `None` if all are empty.
fn joint_support(phis: &[Arc<dyn TestFunction>]) -> Option<(f64, f64)> {
    let lo = phis.iter().map(|p| p.support().0).fold(f64::INFINITY, f64::min);
    let hi = phis.iter().map(|p| p.support().1).fold(f64::NEG_INFINITY, f64::max);
    (lo < hi).then_some((lo, hi))
}

/// `Σ_{r,s < n_T} φ(P_i(r)) K(P_j(s) - P_i(r)) dt²` for two position
/// sequences on a shared grid. Not symmetric in `(i, j)`.
pub fn delta_pair(
    pos_i: &[f64],
    pos_j: &[f64],
    grid: TimeGrid,
    phi: &dyn TestFunction,
    kernel: &InteractionKernel,
    horizon: f64,
) -> Result<f64> {
    let n = grid.nodes_before(horizon)?;
    if pos_i.len() < n || pos_j.len() < n {
        return Err(invalid("paths are shorter than the horizon"));
    }
    let dt = grid.step();
    let mut total = 0.0;
    for &x in &pos_i[..n] {
        let w = phi.eval(x);
        if w == 0.0 {
            continue;
        }
        let inner: f64 = pos_j[..n].iter().map(|&y| kernel.eval(y - x)).sum();
        total += w * inner;
    }
    Ok(total * dt * dt)
}

fn check_k_alpha(k: usize, alpha: f64) -> Result<()> {
    if k < 2 {
        return Err(invalid(format!("intersection order must be at least 2, got {k}")));
    }
    let lo = 1.0 - 1.0 / k as f64;
    if !(alpha > lo && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in ({lo}, 1) for order {k}, got {alpha}")));
    }
    Ok(())
}

/// Approximate k-intersection local time
/// `Σ_{s_1..s_k} φ(P_1(s_1)) ∏_{i≥2} f_ε(P_i(s_i) - P_1(s_1)) dt^k`,
/// evaluated in factorized form in `O(k n²)`.
pub fn approx_k_ilt(
    alpha: f64,
    paths: &[&[f64]],
    grid: TimeGrid,
    phi: &dyn TestFunction,
    f: &Mollifier,
    eps: f64,
    horizon: f64,
) -> Result<f64> {
    check_k_alpha(paths.len(), alpha)?;
    let f_eps = f.scaled(eps)?;
    let n = grid.nodes_before(horizon)?;
    if paths.iter().any(|p| p.len() < n) {
        return Err(invalid("paths are shorter than the horizon"));
    }
    let dt = grid.step();
    let mut total = 0.0;
    for &x in &paths[0][..n] {
        let w = phi.eval(x);
        if w == 0.0 {
            continue;
        }
        let mut prod = w;
        for p in &paths[1..] {
            prod *= p[..n].iter().map(|&y| f_eps.eval(y - x)).sum::<f64>() * dt;
            if prod == 0.0 {
                break;
            }
        }
        total += prod;
    }
    Ok(total * dt)
}

/// Configuration of `η^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaConfig {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    pub step: f64,
    pub t_grid: Vec<f64>,
    /// Mollifier width for the kernel; together with `delta = 0` selects the raw kernel.
    pub eps: f64,
    pub delta: f64,
    /// Smoothing of the indicators; 0 keeps them sharp.
    pub kappa: f64,
    #[serde(default)]
    pub profile: Profile,
    /// Raw kernel only: `K(d) = max(|d|, raw_floor)^{γ-1}` for `|d| < raw_reach`.
    #[serde(default = "default_raw_floor")]
    pub raw_floor: f64,
    #[serde(default = "default_raw_reach")]
    pub raw_reach: f64,
}

fn default_raw_floor() -> f64 {
    0.01
}

fn default_raw_reach() -> f64 {
    20.0
}

impl EtaConfig {
    pub fn gamma(&self) -> f64 {
        (self.beta - self.alpha) / 2.0
    }

    /// Hurst index `(α + β)/2` of the limit.
    pub fn hurst(&self) -> f64 {
        (self.alpha + self.beta) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.alpha, self.beta);
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(invalid(format!("need 0 < alpha < beta < 1, got alpha={a}, beta={b}")));
        }
        if a + b <= 1.0 {
            return Err(invalid(format!("need alpha + beta > 1, got {}", a + b)));
        }
        check_t_grid(&self.t_grid)?;
        TimeGrid::covering(self.horizon, self.step)?;
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon must be positive"));
        }
        if (self.eps == 0.0) != (self.delta == 0.0) {
            return Err(invalid("eps and delta must both be zero (raw kernel) or both positive"));
        }
        if !(self.eps >= 0.0 && self.delta >= 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("need eps >= 0 and delta in [0, 1), got {}, {}", self.eps, self.delta)));
        }
        if !(self.kappa >= 0.0 && self.kappa < 1.0) {
            return Err(invalid(format!("kappa must lie in [0, 1), got {}", self.kappa)));
        }
        if !(self.raw_floor > 0.0 && self.raw_reach > 0.0 && self.raw_reach.is_finite()) {
            return Err(invalid("raw kernel floor and reach must be positive and finite"));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<InteractionKernel> {
        if self.eps == 0.0 {
            InteractionKernel::raw(self.gamma(), self.raw_floor)
        } else {
            InteractionKernel::mollified(self.gamma(), self.eps, self.delta, &Mollifier::shared(self.profile), None)
        }
    }
}

/// Precomputed state for repeated `η^T` draws.
pub struct EtaPlan {
    config: EtaConfig,
    params: StableParams,
    grid: TimeGrid,
    kernel: InteractionKernel,
    reach: f64,
    phis: Vec<Arc<dyn TestFunction>>,
    support: Option<(f64, f64)>,
    digest: String,
}

impl EtaPlan {
    pub fn new(config: &EtaConfig) -> Result<Self> {
        config.validate()?;
        let kernel = config.kernel()?;
        let reach = match kernel {
            InteractionKernel::Raw { .. } => config.raw_reach,
            _ => kernel.reach(),
        };
        let phis = indicator_family(&config.t_grid, config.kappa, config.profile)?;
        Ok(Self {
            params: StableParams::for_particles(config.alpha)?,
            grid: TimeGrid::covering(config.horizon, config.step)?,
            kernel,
            reach,
            support: joint_support(&phis),
            phis,
            digest: config_digest(config),
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &EtaConfig {
        &self.config
    }

    pub fn kernel(&self) -> &InteractionKernel {
        &self.kernel
    }

    /// Distance beyond which pairs do not interact.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// Region whose visitors make up the relevant sub-system.
    pub fn region(&self) -> Option<(f64, f64)> {
        self.support.map(|(lo, hi)| (lo - self.reach, hi + self.reach))
    }

    pub fn sample_system<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<ParticleSystem>> {
        match self.region() {
            Some((lo, hi)) => sample_visitors(self.params, lo, hi, self.grid, rng).map(Some),
            None => Ok(None),
        }
    }

    /// `η^T_t` for every `t` of the grid on a given system.
    pub fn evaluate(&self, system: &ParticleSystem) -> Result<Vec<f64>> {
        eta_on_system(system, &self.phis, &self.kernel, self.reach, self.config.horizon)
    }

    pub fn sample<R: Rng + ?Sized>(&self, replica_id: u64, rng: &mut R) -> Result<FunctionalSample> {
        let system = self.sample_system(rng)?;
        let (values, degenerate) = match &system {
            Some(s) if s.len() >= 2 => (self.evaluate(s)?, false),
            _ => (vec![0.0; self.config.t_grid.len()], true),
        };
        Ok(FunctionalSample {
            replica_id,
            t_grid: self.config.t_grid.clone(),
            values,
            config_digest: self.digest.clone(),
            degenerate,
        })
    }
}

/// One draw of `η^T` on the configured grid.
pub fn eta_t<R: Rng + ?Sized>(config: &EtaConfig, replica_id: u64, rng: &mut R) -> Result<FunctionalSample> {
    EtaPlan::new(config)?.sample(replica_id, rng)
}

struct Visit {
    pos: f64,
    particle: usize,
    weight: f64,
}

/// Every `(particle, node)` with node before the horizon and position in
/// `[lo, hi]`, sorted by position. `weight = σ_j dt`.
fn visits(system: &ParticleSystem, n: usize, lo: f64, hi: f64) -> Vec<Visit> {
    let dt = system.grid().step();
    let mut out = Vec::new();
    for j in 0..system.len() {
        let w = system.charges()[j] * dt;
        for p in system.trajectory(j).take(n) {
            if p >= lo && p <= hi {
                out.push(Visit {
                    pos: p,
                    particle: j,
                    weight: w,
                });
            }
        }
    }
    out.sort_by(|a, b| a.pos.total_cmp(&b.pos));
    out
}

/// `(1/T) Σ_{j≠k} σ_j σ_k Δ(j, k)` for each test function, using pairs
/// closer than `reach` only.
pub fn eta_on_system(
    system: &ParticleSystem,
    phis: &[Arc<dyn TestFunction>],
    kernel: &InteractionKernel,
    reach: f64,
    horizon: f64,
) -> Result<Vec<f64>> {
    let n = system.grid().nodes_before(horizon)?;
    let mut out = vec![0.0; phis.len()];
    let Some((a_lo, a_hi)) = joint_support(phis) else {
        return Ok(out);
    };
    let sources = visits(system, n, a_lo, a_hi);
    let targets = visits(system, n, a_lo - reach, a_hi + reach);
    let positions: Vec<f64> = targets.iter().map(|v| v.pos).collect();
    for src in &sources {
        let first = positions.partition_point(|&z| z <= src.pos - reach);
        let last = positions.partition_point(|&z| z < src.pos + reach);
        let field: f64 = targets[first..last]
            .iter()
            .filter(|v| v.particle != src.particle)
            .map(|v| v.weight * kernel.eval(v.pos - src.pos))
            .sum();
        for (acc, phi) in out.iter_mut().zip(phis) {
            *acc += src.weight * phi.eval(src.pos) * field;
        }
    }
    for v in out.iter_mut() {
        *v /= horizon;
    }
    Ok(out)
}

/// Configuration of `ρ^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoConfig {
    pub k: usize,
    pub alpha: f64,
    pub horizon: f64,
    pub step: f64,
    pub t_grid: Vec<f64>,
    pub eps: f64,
    pub kappa: f64,
    #[serde(default)]
    pub profile: Profile,
}

impl RhoConfig {
    /// `H = 1 - (1 - α)k/2`.
    pub fn hurst(&self) -> f64 {
        1.0 - (1.0 - self.alpha) * self.k as f64 / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        check_k_alpha(self.k, self.alpha)?;
        check_t_grid(&self.t_grid)?;
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon must be positive"));
        }
        TimeGrid::covering(self.horizon, self.step)?;
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.kappa >= 0.0 && self.kappa < 1.0) {
            return Err(invalid(format!("kappa must lie in [0, 1), got {}", self.kappa)));
        }
        Ok(())
    }
}

pub struct RhoPlan {
    config: RhoConfig,
    params: StableParams,
    grid: TimeGrid,
    mollifier: Arc<Mollifier>,
    phis: Vec<Arc<dyn TestFunction>>,
    support: Option<(f64, f64)>,
    digest: String,
}

impl RhoPlan {
    pub fn new(config: &RhoConfig) -> Result<Self> {
        config.validate()?;
        let phis = indicator_family(&config.t_grid, config.kappa, config.profile)?;
        Ok(Self {
            params: StableParams::for_particles(config.alpha)?,
            grid: TimeGrid::covering(config.horizon, config.step)?,
            mollifier: Mollifier::shared(config.profile),
            support: joint_support(&phis),
            phis,
            digest: config_digest(config),
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &RhoConfig {
        &self.config
    }

    pub fn region(&self) -> Option<(f64, f64)> {
        self.support.map(|(lo, hi)| (lo - self.config.eps, hi + self.config.eps))
    }

    pub fn sample_system<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<ParticleSystem>> {
        match self.region() {
            Some((lo, hi)) => sample_visitors(self.params, lo, hi, self.grid, rng).map(Some),
            None => Ok(None),
        }
    }

    pub fn evaluate(&self, system: &ParticleSystem) -> Result<Vec<f64>> {
        rho_on_system(system, self.config.k, &self.phis, &self.mollifier, self.config.eps, self.config.horizon)
    }

    pub fn sample<R: Rng + ?Sized>(&self, replica_id: u64, rng: &mut R) -> Result<FunctionalSample> {
        let system = self.sample_system(rng)?;
        let (values, degenerate) = match &system {
            Some(s) if s.len() >= self.config.k => (self.evaluate(s)?, false),
            _ => (vec![0.0; self.config.t_grid.len()], true),
        };
        Ok(FunctionalSample {
            replica_id,
            t_grid: self.config.t_grid.clone(),
            values,
            config_digest: self.digest.clone(),
            degenerate,
        })
    }
}

/// One draw of `ρ^T` on the configured grid.
pub fn rho_t<R: Rng + ?Sized>(config: &RhoConfig, replica_id: u64, rng: &mut R) -> Result<FunctionalSample> {
    RhoPlan::new(config)?.sample(replica_id, rng)
}

/// `T^{-k/2} Σ_{j_1,…,j_k distinct} σ_{j_1}⋯σ_{j_k} ⟨Λ_ε^f(P_{j_1},…,P_{j_k}; T), φ⟩`.
///
/// For every node `(j_1, s_1)` with `y = P_{j_1}(s_1)` in the support of
/// `φ`, let `c_j = σ_j Σ_s f_ε(P_j(s) - y) dt`. The inner sum over ordered
/// distinct `(j_2,…,j_k)` avoiding `j_1` equals `(k-1)! e_{k-1}(c)`, the
/// elementary symmetric polynomial of the `c_j` with `j ≠ j_1`. The
/// polynomial is accumulated as the product `∏ (1 + c_j z)` truncated at
/// degree `k-1`, so the result is exact for every `k`.
pub fn rho_on_system(
    system: &ParticleSystem,
    k: usize,
    phis: &[Arc<dyn TestFunction>],
    f: &Mollifier,
    eps: f64,
    horizon: f64,
) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(invalid("order must be positive"));
    }
    let n = system.grid().nodes_before(horizon)?;
    let f_eps = f.scaled(eps)?;
    let mut out = vec![0.0; phis.len()];
    let Some((a_lo, a_hi)) = joint_support(phis) else {
        return Ok(out);
    };
    if system.len() < k {
        return Ok(out);
    }
    let sources = visits(system, n, a_lo, a_hi);
    let nearby = visits(system, n, a_lo - eps, a_hi + eps);
    let positions: Vec<f64> = nearby.iter().map(|v| v.pos).collect();
    let mut acc = vec![0.0; system.len()];
    let mut touched: Vec<usize> = Vec::new();
    let mut e = vec![0.0; k];
    let factorial: f64 = (1..k).map(|i| i as f64).product();
    for src in &sources {
        let coeff = if k == 1 {
            1.0
        } else {
            let first = positions.partition_point(|&z| z <= src.pos - eps);
            let last = positions.partition_point(|&z| z < src.pos + eps);
            for v in &nearby[first..last] {
                if v.particle == src.particle {
                    continue;
                }
                if acc[v.particle] == 0.0 {
                    touched.push(v.particle);
                }
                acc[v.particle] += v.weight * f_eps.eval(v.pos - src.pos);
            }
            e.iter_mut().for_each(|x| *x = 0.0);
            e[0] = 1.0;
            for &j in &touched {
                let c = acc[j];
                for d in (1..k).rev() {
                    e[d] += c * e[d - 1];
                }
                acc[j] = 0.0;
            }
            touched.clear();
            factorial * e[k - 1]
        };
        if coeff == 0.0 {
            continue;
        }
        for (o, phi) in out.iter_mut().zip(phis) {
            *o += src.weight * phi.eval(src.pos) * coeff;
        }
    }
    let norm = horizon.powf(k as f64 / 2.0);
    for v in out.iter_mut() {
        *v /= norm;
    }
    Ok(out)
}

/// `⟨X_T, 1_{[0,t]}⟩` (or its smoothed version) on a grid of `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub alpha: f64,
    pub horizon: f64,
    pub step: f64,
    pub t_grid: Vec<f64>,
    pub kappa: f64,
    #[serde(default)]
    pub profile: Profile,
}

impl FieldConfig {
    /// `H = (1 + α)/2`.
    pub fn hurst(&self) -> f64 {
        (1.0 + self.alpha) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        StableParams::for_particles(self.alpha)?;
        check_t_grid(&self.t_grid)?;
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon must be positive"));
        }
        TimeGrid::covering(self.horizon, self.step)?;
        if !(self.kappa >= 0.0 && self.kappa < 1.0) {
            return Err(invalid(format!("kappa must lie in [0, 1), got {}", self.kappa)));
        }
        Ok(())
    }
}

pub struct FieldPlan {
    config: FieldConfig,
    params: StableParams,
    grid: TimeGrid,
    phis: Vec<Arc<dyn TestFunction>>,
    support: Option<(f64, f64)>,
    digest: String,
}

impl FieldPlan {
    pub fn new(config: &FieldConfig) -> Result<Self> {
        config.validate()?;
        let phis = indicator_family(&config.t_grid, config.kappa, config.profile)?;
        Ok(Self {
            params: StableParams::for_particles(config.alpha)?,
            grid: TimeGrid::covering(config.horizon, config.step)?,
            support: joint_support(&phis),
            phis,
            digest: config_digest(config),
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn sample<R: Rng + ?Sized>(&self, replica_id: u64, rng: &mut R) -> Result<FunctionalSample> {
        let mut values = vec![0.0; self.phis.len()];
        let mut degenerate = true;
        if let Some((lo, hi)) = self.support {
            let system = sample_visitors(self.params, lo, hi, self.grid, rng)?;
            degenerate = system.is_empty();
            let root = self.config.horizon.sqrt();
            for (v, phi) in values.iter_mut().zip(&self.phis) {
                let per = occupation_per_particle(&system, phi.as_ref(), self.config.horizon)?;
                *v = per.iter().zip(system.charges()).map(|(o, s)| o * s).sum::<f64>() / root;
            }
        }
        Ok(FunctionalSample {
            replica_id,
            t_grid: self.config.t_grid.clone(),
            values,
            config_digest: self.digest.clone(),
            degenerate,
        })
    }
}
