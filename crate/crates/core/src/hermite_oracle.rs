//! Reference generators for the limit processes: fractional Brownian motion,
//! Hermite processes as normalized partial sums of a long-range dependent
//! Gaussian sequence, and a discretized multiple Wiener–Itô integral in the
//! spectral domain.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `R(s, t) = ½(s^{2H} + t^{2H} - |s - t|^{2H})`.
pub fn target_covariance(h: f64, s: f64, t: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(invalid(format!("Hurst index must lie in (0, 1), got {h}")));
    }
    if !(s >= 0.0 && t >= 0.0) {
        return Err(invalid(format!("times must be non-negative, got {s}, {t}")));
    }
    let p = 2.0 * h;
    Ok(0.5 * (s.powf(p) + t.powf(p) - (s - t).abs().powf(p)))
}

/// Probabilists' Hermite polynomial `He_j(x)` by the three-term recurrence.
pub fn hermite_polynomial(j: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if j == 0 {
        return prev;
    }
    for i in 1..j {
        let next = x * cur - i as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

const FBM_MAX_POINTS: usize = 4096;

type CholeskyCache = Mutex<HashMap<Vec<u64>, Arc<DMatrix<f64>>>>;

fn fbm_cache() -> &'static CholeskyCache {
    static CACHE: OnceLock<CholeskyCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cholesky_lower(mut cov: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    // a relative jitter of 1e-14 absorbs rounding in nearly singular matrices
    let scale = (0..n).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    for i in 0..n {
        cov[(i, i)] += 1e-14 * scale;
    }
    match cov.cholesky() {
        Some(c) => Ok(c.l()),
        None => Err(Error::Numerical(format!("{what}: covariance matrix is not positive definite"))),
    }
}

/// Exact fBm on `t_grid` by Cholesky factorization of `R`; the factor is
/// cached per `(H, grid)`. Grid times equal to zero yield exactly 0.
pub fn fbm_sample<R: Rng + ?Sized>(h: f64, t_grid: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    target_covariance(h, 0.0, 0.0)?;
    if t_grid.len() > FBM_MAX_POINTS {
        return Err(invalid(format!("fBm grids are limited to {FBM_MAX_POINTS} points")));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("fBm times must be finite and non-negative"));
    }
    let positive: Vec<f64> = t_grid.iter().copied().filter(|&t| t > 0.0).collect();
    let mut key = vec![h.to_bits()];
    key.extend(positive.iter().map(|t| t.to_bits()));
    let l = {
        let cached = fbm_cache().lock().expect("fBm cache poisoned").get(&key).cloned();
        match cached {
            Some(l) => l,
            None => {
                let n = positive.len();
                let cov = DMatrix::from_fn(n, n, |i, j| {
                    target_covariance(h, positive[i], positive[j]).expect("validated")
                });
                let l = Arc::new(cholesky_lower(cov, "fBm")?);
                fbm_cache().lock().expect("fBm cache poisoned").insert(key, l.clone());
                l
            }
        }
    };
    let z = DVector::from_iterator(positive.len(), (0..positive.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let x = l.as_ref() * z;
    let mut it = x.iter();
    Ok(t_grid
        .iter()
        .map(|&t| if t > 0.0 { *it.next().expect("one value per positive time") } else { 0.0 })
        .collect())
}

/// Sequence lengths up to this use a Cholesky factor; longer ones use
/// circulant embedding.
pub const LRD_CHOLESKY_MAX: usize = 1024;

/// Correlation of the long-range dependent sequence at lag `m`:
/// `(1 + m)^{(2H-2)/k}`.
pub fn lrd_correlation(h: f64, k: usize, lag: usize) -> f64 {
    (1.0 + lag as f64).powf((2.0 * h - 2.0) / k as f64)
}

fn check_lrd(h: f64, k: usize) -> Result<()> {
    if !(h > 0.5 && h < 1.0) {
        return Err(invalid(format!("long-range dependence needs H in (1/2, 1), got {h}")));
    }
    if k == 0 {
        return Err(invalid("Hermite order must be at least 1"));
    }
    Ok(())
}

enum LrdFactor {
    Cholesky(DMatrix<f64>),
    /// square roots of the circulant eigenvalues divided by the embedding size
    Circulant { sqrt_eig: Vec<f64> },
}

type LrdCache = Mutex<HashMap<(u64, usize, usize), Arc<LrdFactor>>>;

fn lrd_cache() -> &'static LrdCache {
    static CACHE: OnceLock<LrdCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn lrd_factor(h: f64, k: usize, n: usize) -> Result<Arc<LrdFactor>> {
    let key = (h.to_bits(), k, n);
    if let Some(f) = lrd_cache().lock().expect("LRD cache poisoned").get(&key) {
        return Ok(f.clone());
    }
    let factor = if n <= LRD_CHOLESKY_MAX {
        let cov = DMatrix::from_fn(n, n, |i, j| lrd_correlation(h, k, i.abs_diff(j)));
        LrdFactor::Cholesky(cholesky_lower(cov, "long-range dependent sequence")?)
    } else {
        let m = (2 * (n - 1)).next_power_of_two();
        let mut c: Vec<Complex64> = (0..m)
            .map(|j| Complex64::new(lrd_correlation(h, k, j.min(m - j)), 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut c);
        let max = c.iter().map(|z| z.re).fold(0.0, f64::max);
        let most_negative = c.iter().map(|z| z.re).fold(0.0, f64::min);
        if most_negative < -1e-8 * max {
            return Err(Error::Numerical(format!(
                "circulant embedding has a negative eigenvalue ({most_negative:e}); use n <= {LRD_CHOLESKY_MAX} for the Cholesky path"
            )));
        }
        LrdFactor::Circulant {
            sqrt_eig: c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect(),
        }
    };
    let factor = Arc::new(factor);
    lrd_cache().lock().expect("LRD cache poisoned").insert(key, factor.clone());
    Ok(factor)
}

/// Stationary centered Gaussian sequence with unit variance and
/// correlation [`lrd_correlation`].
///
/// Exact in distribution on both paths: Cholesky for `n ≤ 1024`, otherwise
/// circulant embedding on the smallest power of two `m ≥ 2(n-1)`, keeping
/// the real part of the transformed complex noise.
pub fn lrd_gaussian_sequence<R: Rng + ?Sized>(h: f64, k: usize, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    check_lrd(h, k)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![rng.sample(StandardNormal)]);
    }
    match lrd_factor(h, k, n)?.as_ref() {
        LrdFactor::Cholesky(l) => {
            let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            Ok((l * z).iter().copied().collect())
        }
        LrdFactor::Circulant { sqrt_eig } => {
            let m = sqrt_eig.len();
            let mut w: Vec<Complex64> = sqrt_eig
                .iter()
                .map(|s| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * *s)
                .collect();
            FftPlanner::new().plan_fft_forward(m).process(&mut w);
            Ok(w[..n].iter().map(|z| z.re).collect())
        }
    }
}

/// Partial-sum oracle settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub k: usize,
    pub hurst: f64,
    pub n: usize,
    pub t_grid: Vec<f64>,
}

impl OracleConfig {
    /// Memory parameter `d = (H - 1)/k + 1/2`.
    pub fn d(&self) -> f64 {
        (self.hurst - 1.0) / self.k as f64 + 0.5
    }

    pub fn validate(&self) -> Result<()> {
        check_lrd(self.hurst, self.k)?;
        if self.n == 0 {
            return Err(invalid("partial-sum length must be positive"));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("the time grid must be non-empty with finite non-negative times"));
        }
        Ok(())
    }

    fn length(&self) -> usize {
        let t_max = self.t_grid.iter().copied().fold(0.0, f64::max);
        (self.n as f64 * t_max).floor() as usize
    }
}

/// `n^{-H} Σ_{l < ⌊nt⌋} He_k(ξ_l)` on the time grid.
pub fn hermite_partial_sum<R: Rng + ?Sized>(config: &OracleConfig, rng: &mut R) -> Result<Vec<f64>> {
    config.validate()?;
    let len = config.length();
    let xi = lrd_gaussian_sequence(config.hurst, config.k, len, rng)?;
    let mut cum = Vec::with_capacity(len + 1);
    cum.push(0.0);
    let mut s = 0.0;
    for x in &xi {
        s += hermite_polynomial(config.k, *x);
        cum.push(s);
    }
    let norm = (config.n as f64).powf(-config.hurst);
    Ok(config
        .t_grid
        .iter()
        .map(|&t| cum[((config.n as f64 * t).floor() as usize).min(len)] * norm)
        .collect())
}

/// Symmetric frequency bins `±(b + ½)Δω`, `b = 0, …, M-1`, with `M = Ω/Δω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    cutoff: f64,
    bin_width: f64,
    bins: usize,
}

impl SpectralGrid {
    pub fn new(cutoff: f64, bin_width: f64) -> Result<Self> {
        if !(cutoff > 0.0 && bin_width > 0.0 && cutoff.is_finite()) {
            return Err(invalid("spectral cutoff and bin width must be positive"));
        }
        let m = (cutoff / bin_width).round();
        if m < 1.0 || (m * bin_width - cutoff).abs() > 1e-9 * cutoff {
            return Err(invalid(format!("cutoff {cutoff} is not a multiple of the bin width {bin_width}")));
        }
        if m > 1e6 {
            return Err(invalid("more than 10^6 bins per side"));
        }
        Ok(Self {
            cutoff,
            bin_width,
            bins: m as usize,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Bins on the positive half-line.
    pub fn bins(&self) -> usize {
        self.bins
    }

    /// `∫_{bΔ}^{(b+1)Δ} u^{-a} du`.
    pub fn bin_mass(&self, b: usize, a: f64) -> f64 {
        let e = 1.0 - a;
        let d = self.bin_width;
        d.powf(e) * ((b as f64 + 1.0).powf(e) - (b as f64).powf(e)) / e
    }
}

/// Real part and the imaginary residual of the discretized integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub values: Vec<f64>,
    pub imaginary: Vec<f64>,
}

/// Spectral exponent `a = 2d = 1 - 2(1-H)/k` of the symmetric k-Hermite
/// process, for which `E|Z(du)|² = |u|^{-a} du` in every slot.
pub fn symmetric_exponent(k: usize, h: f64) -> f64 {
    1.0 - 2.0 * (1.0 - h) / k as f64
}

/// Self-similarity index `H = 1 + Σ_i (a_i - 1)/2`.
pub fn spectral_hurst(exponents: &[f64]) -> f64 {
    1.0 + exponents.iter().map(|a| (a - 1.0) / 2.0).sum::<f64>()
}

/// Kernel `(e^{iut} - 1)/(iu)`, equal to `t` at `u = 0`.
fn time_kernel(u: f64, t: f64) -> Complex64 {
    if u == 0.0 {
        return Complex64::new(t, 0.0);
    }
    let (s, c) = (u * t).sin_cos();
    Complex64::new(s / u, (1.0 - c) / u)
}

fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, k: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, k, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, k, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), &mut out);
    out
}

fn convolve(a: &[Complex64], b: &[Complex64], planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let len = a.len() + b.len() - 1;
    let m = len.next_power_of_two();
    let mut fa = a.to_vec();
    fa.resize(m, Complex64::new(0.0, 0.0));
    let mut fb = b.to_vec();
    fb.resize(m, Complex64::new(0.0, 0.0));
    let fwd = planner.plan_fft_forward(m);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    planner.plan_fft_inverse(m).process(&mut fa);
    let scale = 1.0 / m as f64;
    fa.truncate(len);
    fa.iter_mut().for_each(|z| *z *= scale);
    fa
}

/// Discretized multiple integral
/// `Σ'' K_t(u_1 + … + u_k) ∏_i Z_i(bin_i)` over tuples of signed bins whose
/// absolute bins are pairwise distinct, with `Z_i(b) = Ŵ(b) √(m_i(b)/Δω)`,
/// `m_i(b) = ∫_b |u|^{-a_i} du`, one complex white noise `Ŵ` with
/// `E|Ŵ(b)|² = Δω` and `Ŵ(-b) = conj Ŵ(b)`.
///
/// Frequencies `(2b+1)Δω/2` are integers in half-bin units, so the sum over
/// tuples is a convolution of per-slot arrays; the distinctness constraint
/// is imposed by Möbius inversion over set partitions of the slots.
pub fn spectral_hermite_sample<R: Rng + ?Sized>(
    exponents: &[f64],
    t_grid: &[f64],
    grid: &SpectralGrid,
    rng: &mut R,
) -> Result<SpectralSample> {
    let k = exponents.len();
    if k == 0 {
        return Err(invalid("at least one exponent is required"));
    }
    if k > 3 {
        return Err(Error::Unsupported(format!("spectral sampler supports k <= 3, got {k}")));
    }
    if exponents.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(invalid("spectral exponents must lie in (0, 1)"));
    }
    if exponents.iter().sum::<f64>() <= k as f64 - 1.0 {
        return Err(invalid("the exponents must sum to more than k - 1"));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("times must be finite and non-negative"));
    }
    let m = grid.bins();
    let dw = grid.bin_width();
    let noise: Vec<Complex64> = (0..m)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (dw / 2.0).sqrt()
        })
        .collect();
    // slot weights on the positive bins; negative bins are conjugates
    let weights: Vec<Vec<Complex64>> = exponents
        .iter()
        .map(|&a| {
            (0..m)
                .map(|b| noise[b] * (grid.bin_mass(b, a) / dw).sqrt())
                .collect()
        })
        .collect();
    // arrays indexed by half-bin frequency h, offset so that index = h + k·2M
    let offset = 2 * m;
    let single_len = 2 * offset + 1;
    let mut planner = FftPlanner::new();
    let mut total = vec![Complex64::new(0.0, 0.0); k * (single_len - 1) + 1];
    for partition in set_partitions(k) {
        let mut mobius = 1.0;
        let mut product: Option<Vec<Complex64>> = None;
        for block in &partition {
            let q = block.len();
            if q % 2 == 0 {
                mobius = -mobius;
            }
            mobius *= (1..q).product::<usize>() as f64;
            // all slots of the block share the absolute bin b, each at +b or -b
            let len = q * (single_len - 1) + 1;
            let mut arr = vec![Complex64::new(0.0, 0.0); len];
            for b in 0..m {
                let h_b = 2 * b + 1;
                for signs in 0u32..(1 << q) {
                    let mut w = Complex64::new(1.0, 0.0);
                    let mut h: i64 = 0;
                    for (pos, &slot) in block.iter().enumerate() {
                        if signs & (1 << pos) == 0 {
                            w *= weights[slot][b];
                            h += h_b as i64;
                        } else {
                            w *= weights[slot][b].conj();
                            h -= h_b as i64;
                        }
                    }
                    arr[(h + (q * offset) as i64) as usize] += w;
                }
            }
            product = Some(match product {
                None => arr,
                Some(p) => convolve(&p, &arr, &mut planner),
            });
        }
        let p = product.expect("partitions have at least one block");
        for (acc, v) in total.iter_mut().zip(&p) {
            *acc += mobius * v;
        }
    }
    let shift = (k * offset) as i64;
    let mut values = Vec::with_capacity(t_grid.len());
    let mut imaginary = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut z = Complex64::new(0.0, 0.0);
        for (i, a) in total.iter().enumerate() {
            if *a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let u = (i as i64 - shift) as f64 * dw / 2.0;
            z += time_kernel(u, t) * a;
        }
        values.push(z.re);
        imaginary.push(z.im);
    }
    Ok(SpectralSample { values, imaginary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    #[test]
    fn covariance_formula() {
        assert!((target_covariance(0.7, 2.0, 2.0).unwrap() - 2f64.powf(1.4)).abs() < 1e-15);
        assert!((target_covariance(0.5, 0.3, 0.8).unwrap() - 0.3).abs() < 1e-15);
        assert!((target_covariance(0.75, 0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(target_covariance(1.0, 1.0, 1.0).is_err());
        assert!(target_covariance(0.5, -1.0, 1.0).is_err());
        assert_eq!(
            target_covariance(0.6, 0.4, 1.3).unwrap(),
            target_covariance(0.6, 1.3, 0.4).unwrap()
        );
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_polynomial(0, 3.0), 1.0);
        assert_eq!(hermite_polynomial(1, 3.0), 3.0);
        assert_eq!(hermite_polynomial(2, 2.0), 3.0);
        assert_eq!(hermite_polynomial(3, 1.0), -2.0);
        // He_4(x) = x⁴ - 6x² + 3
        assert_eq!(hermite_polynomial(4, 2.0), 16.0 - 24.0 + 3.0);
    }

    #[test]
    fn fbm_starts_at_zero() {
        let x = fbm_sample(0.7, &[0.0, 0.5, 1.0], &mut replica_rng(1, 0)).unwrap();
        assert_eq!(x[0], 0.0);
        assert!(fbm_sample(1.2, &[1.0], &mut replica_rng(1, 0)).is_err());
    }

    #[test]
    fn lrd_domain() {
        assert!(lrd_gaussian_sequence(0.5, 2, 10, &mut replica_rng(1, 0)).is_err());
        assert!(lrd_gaussian_sequence(1.0, 2, 10, &mut replica_rng(1, 0)).is_err());
        assert_eq!(lrd_gaussian_sequence(0.7, 2, 10, &mut replica_rng(1, 0)).unwrap().len(), 10);
    }

    #[test]
    fn circulant_eigenvalues_are_nonnegative() {
        for &(h, k) in &[(0.6, 1), (0.6, 2), (0.75, 2), (0.9, 3), (0.55, 1)] {
            let f = lrd_factor(h, k, 5000).unwrap();
            assert!(matches!(f.as_ref(), LrdFactor::Circulant { .. }));
        }
    }

    #[test]
    fn partial_sum_at_zero() {
        let cfg = OracleConfig {
            k: 2,
            hurst: 0.6,
            n: 64,
            t_grid: vec![0.0, 0.5, 1.0],
        };
        let x = hermite_partial_sum(&cfg, &mut replica_rng(3, 0)).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((cfg.d() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bin_masses_add_up() {
        let g = SpectralGrid::new(4.0, 0.5).unwrap();
        let total: f64 = (0..g.bins()).map(|b| g.bin_mass(b, 0.3)).sum();
        assert!((total - 4f64.powf(0.7) / 0.7).abs() < 1e-12);
        assert!(SpectralGrid::new(1.0, 0.3).is_err());
    }

    fn brute_spectral(exponents: &[f64], t: f64, grid: &SpectralGrid, seed: u64) -> Complex64 {
        // same draws as the sampler
        let mut rng = replica_rng(seed, 0);
        let m = grid.bins();
        let dw = grid.bin_width();
        let noise: Vec<Complex64> = (0..m)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (dw / 2.0).sqrt()
            })
            .collect();
        let signed: Vec<(usize, bool)> = (0..m).flat_map(|b| [(b, false), (b, true)]).collect();
        let slot = |i: usize, (b, neg): (usize, bool)| {
            let w = noise[b] * (grid.bin_mass(b, exponents[i]) / dw).sqrt();
            let u = (b as f64 + 0.5) * dw;
            if neg { (w.conj(), -u) } else { (w, u) }
        };
        let k = exponents.len();
        let mut total = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; k];
        loop {
            let bins: Vec<usize> = idx.iter().map(|&i| signed[i].0).collect();
            let distinct = (0..k).all(|a| (a + 1..k).all(|b| bins[a] != bins[b]));
            if distinct {
                let mut w = Complex64::new(1.0, 0.0);
                let mut u = 0.0;
                for (s, &i) in idx.iter().enumerate() {
                    let (ws, us) = slot(s, signed[i]);
                    w *= ws;
                    u += us;
                }
                total += time_kernel(u, t) * w;
            }
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < signed.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == k {
                    return total;
                }
            }
        }
    }

    #[test]
    fn spectral_matches_direct_sum() {
        let grid = SpectralGrid::new(3.0, 0.25).unwrap();
        for exps in [vec![0.7], vec![0.6, 0.7], vec![0.8, 0.8, 0.9]] {
            let s = spectral_hermite_sample(&exps, &[0.7, 1.3], &grid, &mut replica_rng(5, 0)).unwrap();
            for (i, &t) in [0.7, 1.3].iter().enumerate() {
                let direct = brute_spectral(&exps, t, &grid, 5);
                assert!((direct.re - s.values[i]).abs() < 1e-9 * direct.norm().max(1.0), "{exps:?}");
                assert!((direct.im - s.imaginary[i]).abs() < 1e-9 * direct.norm().max(1.0));
                assert!(s.imaginary[i].abs() < 1e-9 * s.values[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn spectral_at_zero_and_validation() {
        let grid = SpectralGrid::new(2.0, 0.5).unwrap();
        let s = spectral_hermite_sample(&[0.7, 0.7], &[0.0, 1.0], &grid, &mut replica_rng(1, 0)).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert!(spectral_hermite_sample(&[0.7; 4], &[1.0], &grid, &mut replica_rng(1, 0)).is_err());
        assert!(spectral_hermite_sample(&[0.3, 0.3], &[1.0], &grid, &mut replica_rng(1, 0)).is_err());
        assert!((spectral_hurst(&[0.6, 0.7]) - 0.65).abs() < 1e-15);
        assert!((spectral_hurst(&[symmetric_exponent(2, 0.6); 2]) - 0.6).abs() < 1e-15);
    }
}
