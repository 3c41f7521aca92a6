//! Mollifiers, smoothed step functions and the truncated Riesz operator.
//!
//! All functions here are one-dimensional. A [`TestFunction`] knows its
//! support so that quadratures and particle sums can skip the region where
//! it vanishes.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad;

/// A real test function with known (possibly infinite) support.
pub trait TestFunction: Send + Sync {
    fn eval(&self, x: f64) -> f64;

    /// Closed interval outside which the function vanishes.
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

impl<T: TestFunction + ?Sized> TestFunction for Arc<T> {
    fn eval(&self, x: f64) -> f64 {
        (**self).eval(x)
    }
    fn support(&self) -> (f64, f64) {
        (**self).support()
    }
}

impl<T: TestFunction + ?Sized> TestFunction for &T {
    fn eval(&self, x: f64) -> f64 {
        (**self).eval(x)
    }
    fn support(&self) -> (f64, f64) {
        (**self).support()
    }
}

/// Closure-backed test function.
pub struct Func<F> {
    f: F,
    support: (f64, f64),
}

impl<F: Fn(f64) -> f64 + Send + Sync> Func<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            support: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn with_support(f: F, lo: f64, hi: f64) -> Self {
        Self { f, support: (lo, hi) }
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> TestFunction for Func<F> {
    fn eval(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            return 0.0;
        }
        (self.f)(x)
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
}

/// The zero function.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl TestFunction for Zero {
    fn eval(&self, _x: f64) -> f64 {
        0.0
    }
    fn support(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// `amplitude · exp(-(x - center)² / (2 width²))`, cut at 40 widths.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl TestFunction for Gaussian {
    fn eval(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        if z.abs() > 40.0 {
            return 0.0;
        }
        self.amplitude * (-0.5 * z * z).exp()
    }
    fn support(&self) -> (f64, f64) {
        (self.center - 40.0 * self.width, self.center + 40.0 * self.width)
    }
}

/// Shape of the unnormalized mollifier on `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `exp(-1 / (1 - x²))`
    #[default]
    Bump,
    /// `(1 + cos πx) / 2`
    Cosine,
}

impl Profile {
    fn raw(self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::Bump => (-1.0 / (1.0 - x * x)).exp(),
            Profile::Cosine => 0.5 * (1.0 + (PI * x).cos()),
        }
    }
}

const CDF_CELLS: usize = 4096;

/// A symmetric probability density supported in `[-1, 1]`.
///
/// The cumulative distribution is tabulated on a uniform grid and
/// interpolated with cubic Hermite splines whose slopes are the density
/// itself, which keeps the interpolation error near 1e-14.
#[derive(Debug, Clone)]
pub struct Mollifier {
    profile: Profile,
    norm_const: f64,
    sup_norm: f64,
    cdf: Vec<f64>,
}

impl Mollifier {
    pub fn new(profile: Profile) -> Self {
        let mass = quad::integrate(|x| profile.raw(x), -1.0, 1.0, 1e-15)
            .expect("mollifier mass quadrature")
            .value;
        let norm_const = 1.0 / mass;
        let h = 2.0 / CDF_CELLS as f64;
        let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 0..CDF_CELLS {
            let a = -1.0 + i as f64 * h;
            acc += quad::integrate(|x| norm_const * profile.raw(x), a, a + h, 1e-16)
                .expect("mollifier cdf quadrature")
                .value;
            cdf.push(acc);
        }
        // pin the ends so that interior points of a smoothed step are exact
        let total = acc;
        for v in cdf.iter_mut() {
            *v /= total;
        }
        cdf[CDF_CELLS] = 1.0;
        Self {
            profile,
            norm_const,
            sup_norm: norm_const * profile.raw(0.0),
            cdf,
        }
    }

    pub fn bump() -> Self {
        Self::new(Profile::Bump)
    }

    /// Process-wide instance per profile, built on first use.
    pub fn shared(profile: Profile) -> Arc<Self> {
        static BUMP: OnceLock<Arc<Mollifier>> = OnceLock::new();
        static COSINE: OnceLock<Arc<Mollifier>> = OnceLock::new();
        let cell = match profile {
            Profile::Bump => &BUMP,
            Profile::Cosine => &COSINE,
        };
        cell.get_or_init(|| Arc::new(Self::new(profile))).clone()
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// `‖f‖_∞ = f(0)`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `f(x)`.
    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        self.norm_const * self.profile.raw(x)
    }

    /// `∫_{-1}^{u} f`.
    pub fn cdf(&self, u: f64) -> f64 {
        if u <= -1.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let h = 2.0 / CDF_CELLS as f64;
        let pos = (u + 1.0) / h;
        let i = (pos.floor() as usize).min(CDF_CELLS - 1);
        let s = pos - i as f64;
        let x0 = -1.0 + i as f64 * h;
        let (y0, y1) = (self.cdf[i], self.cdf[i + 1]);
        let (m0, m1) = (self.density(x0) * h, self.density(x0 + h) * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }

    /// `f̂(z) = ∫ cos(zx) f(x) dx`.
    pub fn fourier(&self, z: f64) -> f64 {
        quad::integrate(|x| (z * x).cos() * self.density(x), -1.0, 1.0, 1e-13)
            .expect("mollifier fourier quadrature")
            .value
    }

    /// `f_ε(x) = ε⁻¹ f(x / ε)` as a test function.
    pub fn scaled(&self, eps: f64) -> Result<ScaledMollifier<'_>> {
        check_eps(eps)?;
        Ok(ScaledMollifier { mollifier: self, eps })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("mollifier width must be positive, got {eps}")));
    }
    Ok(())
}

/// `f_ε(x) = ε⁻¹ f(x/ε)`, zero for `|x| ≥ ε`.
pub fn mollifier_eval(m: &Mollifier, eps: f64, x: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(m.density(x / eps) / eps)
}

#[derive(Debug, Clone, Copy)]
pub struct ScaledMollifier<'a> {
    mollifier: &'a Mollifier,
    eps: f64,
}

impl ScaledMollifier<'_> {
    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl TestFunction for ScaledMollifier<'_> {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.mollifier.density(x / self.eps) / self.eps
    }
    fn support(&self) -> (f64, f64) {
        (-self.eps, self.eps)
    }
}

/// `ψ = Σ a_j 1_{I_j}` with bounded intervals `I_j = [lo_j, hi_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pieces: Vec<(f64, f64, f64)>,
}

impl StepFunction {
    /// Pieces are `(coefficient, lo, hi)`.
    pub fn new(pieces: Vec<(f64, f64, f64)>) -> Result<Self> {
        for &(a, lo, hi) in &pieces {
            if !(a.is_finite() && lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(invalid(format!("bad step piece ({a}, [{lo}, {hi}])")));
            }
        }
        Ok(Self { pieces })
    }

    /// `1_{[lo, hi]}`.
    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(1.0, lo, hi)])
    }

    pub fn pieces(&self) -> &[(f64, f64, f64)] {
        &self.pieces
    }

    pub fn integral(&self) -> f64 {
        self.pieces.iter().map(|&(a, lo, hi)| a * (hi - lo)).sum()
    }

    /// `ψ̂(z) = Σ a_j (e^{iz·hi} - e^{iz·lo}) / (iz)`.
    pub fn fourier(&self, z: f64) -> Complex64 {
        self.pieces
            .iter()
            .map(|&(a, lo, hi)| {
                if z == 0.0 {
                    Complex64::new(a * (hi - lo), 0.0)
                } else {
                    let num = Complex64::from_polar(1.0, z * hi) - Complex64::from_polar(1.0, z * lo);
                    a * num / Complex64::new(0.0, z)
                }
            })
            .sum()
    }
}

impl TestFunction for StepFunction {
    /// Half-open convention `[lo, hi)` so adjacent indicators tile exactly.
    fn eval(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|&&(_, lo, hi)| x >= lo && x < hi)
            .map(|&(a, _, _)| a)
            .sum()
    }
    fn support(&self) -> (f64, f64) {
        let lo = self.pieces.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = self.pieces.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

/// `ψ_κ = ψ * g_κ`, evaluated in closed form from the mollifier's CDF:
/// `ψ_κ(x) = Σ a_j [G((x - lo_j)/κ) - G((x - hi_j)/κ)]`.
#[derive(Debug, Clone)]
pub struct SmoothedStep {
    step: StepFunction,
    mollifier: Arc<Mollifier>,
    kappa: f64,
}

/// Builds `ψ_κ`; `κ` must lie in `(0, 1)`.
pub fn smoothed_indicator(psi: StepFunction, g: Arc<Mollifier>, kappa: f64) -> Result<SmoothedStep> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(invalid(format!("smoothing width must lie in (0, 1), got {kappa}")));
    }
    Ok(SmoothedStep {
        step: psi,
        mollifier: g,
        kappa,
    })
}

impl SmoothedStep {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn step(&self) -> &StepFunction {
        &self.step
    }

    /// `ψ̂_κ(z) = ψ̂(z) ĝ(κz)`.
    pub fn fourier(&self, z: f64) -> Complex64 {
        self.step.fourier(z) * self.mollifier.fourier(self.kappa * z)
    }
}

impl TestFunction for SmoothedStep {
    fn eval(&self, x: f64) -> f64 {
        let k = self.kappa;
        self.step
            .pieces
            .iter()
            .map(|&(a, lo, hi)| a * (self.mollifier.cdf((x - lo) / k) - self.mollifier.cdf((x - hi) / k)))
            .sum()
    }
    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.step.support();
        (lo - self.kappa, hi + self.kappa)
    }
}

/// `h_δ(x) = |x|^{γ-1} 1{δ < |x| < 1/δ}`; `δ = 0` is the untruncated kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszKernel {
    gamma: f64,
    delta: f64,
}

impl RieszKernel {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("truncation delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { gamma, delta })
    }

    /// The limit `δ → 0`, i.e. the operator `V`.
    pub fn untruncated(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { gamma, delta: 0.0 })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Annulus `(δ, 1/δ)` of distances where `h_δ` is non-zero.
    pub fn annulus(&self) -> (f64, f64) {
        if self.delta == 0.0 {
            (0.0, f64::INFINITY)
        } else {
            (self.delta, 1.0 / self.delta)
        }
    }

    pub fn eval(&self, d: f64) -> f64 {
        let (lo, hi) = self.annulus();
        let a = d.abs();
        if a > lo && a < hi {
            a.powf(self.gamma - 1.0)
        } else {
            0.0
        }
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(invalid(format!("Riesz exponent gamma must lie in (0, 1/2), got {gamma}")));
    }
    Ok(())
}

/// `V^δ φ(x) = ∫ h_δ(x - y) φ(y) dy`.
///
/// The integral is split at `y = x`; on each side the substitution
/// `v = |x - y|^γ` removes the singularity, leaving `γ⁻¹ ∫ φ(x ∓ v^{1/γ}) dv`
/// over the part of the annulus that meets the support of `φ`. Absolute
/// tolerance 1e-8.
pub fn v_delta(kernel: &RieszKernel, phi: &dyn TestFunction, x: f64) -> Result<f64> {
    let (s_lo, s_hi) = phi.support();
    if !(s_lo.is_finite() && s_hi.is_finite()) && kernel.delta == 0.0 {
        return Err(invalid("the untruncated operator needs a test function with bounded support"));
    }
    let (d_min, d_max) = kernel.annulus();
    let g = kernel.gamma;
    let inv = 1.0 / g;
    let mut total = 0.0;
    // right side: y = x + d
    {
        let lo = d_min.max(s_lo - x).max(0.0);
        let hi = d_max.min(s_hi - x);
        if hi > lo {
            total += quad::integrate(|v: f64| phi.eval(x + v.powf(inv)), lo.powf(g), hi.powf(g), 5e-9)?.value;
        }
    }
    // left side: y = x - d
    {
        let lo = d_min.max(x - s_hi).max(0.0);
        let hi = d_max.min(x - s_lo);
        if hi > lo {
            total += quad::integrate(|v: f64| phi.eval(x - v.powf(inv)), lo.powf(g), hi.powf(g), 5e-9)?.value;
        }
    }
    Ok(total * inv)
}

/// Interaction kernel `K(d)` used by the pair functional `Δ`.
///
/// - `Raw`: `max(|d|, floor)^{γ-1}`; within one resolution unit of the
///   diagonal the kernel is frozen at its value at `floor`.
/// - `Truncated`: `h_δ(d)`.
/// - `Mollified`: `V^δ f_ε(d)` (or `V f_ε` cut at `reach`), tabulated on a
///   uniform grid in `|d|` and interpolated with Catmull–Rom cubics.
#[derive(Debug, Clone)]
pub enum InteractionKernel {
    Raw { gamma: f64, floor: f64 },
    Truncated(RieszKernel),
    Mollified(MollifiedTable),
}

#[derive(Debug, Clone)]
pub struct MollifiedTable {
    gamma: f64,
    eps: f64,
    delta: f64,
    spacing: f64,
    reach: f64,
    values: Vec<f64>,
}

impl InteractionKernel {
    pub fn raw(gamma: f64, floor: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(invalid(format!("diagonal floor must be positive, got {floor}")));
        }
        Ok(Self::Raw { gamma, floor })
    }

    pub fn truncated(kernel: RieszKernel) -> Result<Self> {
        if kernel.delta == 0.0 {
            return Err(invalid("use the raw kernel for delta = 0"));
        }
        Ok(Self::Truncated(kernel))
    }

    /// `V^δ f_ε`, or `V f_ε` restricted to `|d| ≤ reach` when `δ = 0`.
    pub fn mollified(gamma: f64, eps: f64, delta: f64, mollifier: &Mollifier, reach: Option<f64>) -> Result<Self> {
        check_gamma(gamma)?;
        check_eps(eps)?;
        let riesz = if delta > 0.0 {
            RieszKernel::new(gamma, delta)?
        } else {
            RieszKernel::untruncated(gamma)?
        };
        let reach = if delta > 0.0 {
            1.0 / delta + eps
        } else {
            match reach {
                Some(r) if r > 0.0 && r.is_finite() => r,
                _ => return Err(invalid("the untruncated mollified kernel needs a finite reach")),
            }
        };
        let spacing = if delta > 0.0 { eps.min(delta) / 32.0 } else { eps / 32.0 };
        let n = (reach / spacing).ceil() as usize + 3;
        let f_eps = mollifier.scaled(eps)?;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let d = i as f64 * spacing;
            values.push(v_delta(&riesz, &f_eps, d)?);
        }
        Ok(Self::Mollified(MollifiedTable {
            gamma,
            eps,
            delta,
            spacing,
            reach,
            values,
        }))
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Self::Raw { gamma, .. } => *gamma,
            Self::Truncated(k) => k.gamma,
            Self::Mollified(t) => t.gamma,
        }
    }

    /// Distance beyond which the kernel vanishes.
    pub fn reach(&self) -> f64 {
        match self {
            Self::Raw { .. } => f64::INFINITY,
            Self::Truncated(k) => 1.0 / k.delta,
            Self::Mollified(t) => t.reach,
        }
    }

    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        match self {
            Self::Raw { gamma, floor } => d.abs().max(*floor).powf(gamma - 1.0),
            Self::Truncated(k) => k.eval(d),
            Self::Mollified(t) => t.eval(d),
        }
    }
}

impl MollifiedTable {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    fn eval(&self, d: f64) -> f64 {
        let a = d.abs();
        if a >= self.reach {
            return 0.0;
        }
        let pos = a / self.spacing;
        let i = pos.floor() as usize;
        let s = pos - i as f64;
        let v = &self.values;
        let p1 = v[i];
        let p2 = v[i + 1];
        // the table is even in d, so mirror across the origin
        let p0 = if i == 0 { v[1] } else { v[i - 1] };
        let p3 = v[(i + 2).min(v.len() - 1)];
        let s2 = s * s;
        let s3 = s2 * s;
        0.5 * (2.0 * p1 + (p2 - p0) * s + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s2 + (3.0 * p1 - p0 - 3.0 * p2 + p3) * s3)
    }
}
