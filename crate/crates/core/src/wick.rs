//! Wick products of tensor test functions, pairing combinatorics, and Monte
//! Carlo checks of the moment identities for Poisson sums over distinct
//! indices.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::TestFunction;
use crate::particle_system::{occupation_per_particle, sample_system, sample_visitors, ParticleSystem, Window};
use crate::quad;
use crate::rng::{derive_seed, replica_rng, tags, ReplicaRng};
use crate::stable_levy::{fill_walk, StableParams, TimeGrid};
use crate::stats::mean_se;

/// A set of disjoint unordered pairs of slots `0..k`, each stored as `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairSet {
    pairs: Vec<(usize, usize)>,
}

impl PairSet {
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut used = Vec::new();
        for p in pairs.iter_mut() {
            if p.0 == p.1 {
                return Err(invalid("a pair needs two distinct slots"));
            }
            if p.0 > p.1 {
                *p = (p.1, p.0);
            }
            used.push(p.0);
            used.push(p.1);
        }
        used.sort_unstable();
        if used.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("pairs must be disjoint"));
        }
        pairs.sort_unstable();
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Bitmask of the slots covered by the pairs.
    pub fn covered(&self) -> u64 {
        self.pairs.iter().fold(0, |m, &(a, b)| m | (1 << a) | (1 << b))
    }
}

/// All sets of disjoint pairs of `{0, …, k-1}`, the empty set first.
pub fn enumerate_pair_sets(k: usize) -> Result<Vec<PairSet>> {
    if k == 0 {
        return Err(invalid("order must be at least 1"));
    }
    if k > 20 {
        return Err(Error::Unsupported(format!("pair-set enumeration is capped at k = 20, got {k}")));
    }
    fn rec(free: &mut Vec<usize>, current: &mut Vec<(usize, usize)>, out: &mut Vec<PairSet>) {
        // the smallest free slot is either left single or paired with a later one
        let Some(&first) = free.first() else {
            out.push(PairSet { pairs: current.clone() });
            return;
        };
        let rest: Vec<usize> = free[1..].to_vec();
        let mut tail = rest.clone();
        rec(&mut tail, current, out);
        for (i, &partner) in rest.iter().enumerate() {
            let mut remaining: Vec<usize> = rest.clone();
            remaining.remove(i);
            current.push((first, partner));
            rec(&mut remaining, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..k).collect(), &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

/// `Σ_j C(k, 2j)·(2j-1)!!`, the number of pair sets of `k` slots.
pub fn pair_set_count(k: usize) -> u128 {
    let mut total = 0u128;
    for j in 0..=k / 2 {
        let double_fact: u128 = (1..=j as u128).map(|i| 2 * i - 1).product();
        total += binomial(k as u64, 2 * j as u64) * double_fact;
    }
    total
}

pub fn binomial(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// Number of `(A, A')` with `A ⊂ B`, `A' ⊂ B'`, `|B| = |B'| = n`, split by
/// `m = |A| + |A'|`, found by enumerating both subset lattices.
pub fn cancellation_counts(n: usize) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if n > 16 {
        return Err(Error::Unsupported(format!("subset enumeration is capped at n = 16, got {n}")));
    }
    let mut counts = vec![0u64; 2 * n + 1];
    for a in 0u32..(1 << n) {
        for b in 0u32..(1 << n) {
            counts[(a.count_ones() + b.count_ones()) as usize] += 1;
        }
    }
    Ok(counts)
}

/// Signed number of times a fixed non-normal pairing with `n` non-normal
/// pairs on each side appears: `Σ_{A⊂B, A'⊂B'} (-1)^{|A|+|A'|}`.
pub fn cancellation_identity(n: usize) -> Result<i64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if n > 16 {
        return Err(Error::Unsupported(format!("subset enumeration is capped at n = 16, got {n}")));
    }
    let mut total = 0i64;
    for a in 0u32..(1 << n) {
        for b in 0u32..(1 << n) {
            total += if (a.count_ones() + b.count_ones()) % 2 == 0 { 1 } else { -1 };
        }
    }
    Ok(total)
}

/// `Φ = Σ_j φ^{(1,j)} ⊗ … ⊗ φ^{(k,j)}`.
#[derive(Clone)]
pub struct TensorTestFunction {
    terms: Vec<Vec<Arc<dyn TestFunction>>>,
}

impl TensorTestFunction {
    pub fn new(terms: Vec<Vec<Arc<dyn TestFunction>>>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(invalid("a tensor test function needs at least one term"));
        };
        let k = first.len();
        if k == 0 || terms.iter().any(|t| t.len() != k) {
            return Err(invalid("every term needs the same positive number of factors"));
        }
        Ok(Self { terms })
    }

    /// `φ ⊗ … ⊗ φ` with `k` factors.
    pub fn power(phi: Arc<dyn TestFunction>, k: usize) -> Result<Self> {
        Self::new(vec![vec![phi; k]])
    }

    pub fn order(&self) -> usize {
        self.terms[0].len()
    }

    pub fn terms(&self) -> &[Vec<Arc<dyn TestFunction>>] {
        &self.terms
    }

    /// Union of the supports of all factors.
    pub fn support(&self) -> (f64, f64) {
        let all = self.terms.iter().flatten();
        let lo = all.clone().map(|p| p.support().0).fold(f64::INFINITY, f64::min);
        let hi = all.map(|p| p.support().1).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Field values and covariances for one term of a tensor test function:
/// `field[s] = ⟨X_T, φ^{(s)}⟩`, `cov[s][t] = E⟨X_T, φ^{(s)}⟩⟨X_T, φ^{(t)}⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct WickTerm {
    pub field: Vec<f64>,
    pub cov: Vec<Vec<Option<f64>>>,
}

/// `⟨:X_T ⊗ … ⊗ X_T:, Φ⟩ = Σ_j Σ_A (-1)^{|A|} ∏_{{s,t}∈A} cov_j[s][t] ∏_{s∉∪A} field_j[s]`.
pub fn wick_product(terms: &[WickTerm], phi: &TensorTestFunction) -> Result<f64> {
    if terms.len() != phi.terms().len() {
        return Err(invalid(format!(
            "expected field data for {} terms, got {}",
            phi.terms().len(),
            terms.len()
        )));
    }
    let k = phi.order();
    let pair_sets = enumerate_pair_sets(k)?;
    let mut total = 0.0;
    for term in terms {
        if term.field.len() != k || term.cov.len() != k || term.cov.iter().any(|r| r.len() != k) {
            return Err(invalid(format!("field data must have {k} slots")));
        }
        for a in &pair_sets {
            let mut prod = if a.len() % 2 == 0 { 1.0 } else { -1.0 };
            for &(s, t) in a.pairs() {
                prod *= term.cov[s][t]
                    .ok_or_else(|| invalid(format!("missing covariance for slots ({s}, {t})")))?;
            }
            let covered = a.covered();
            for (s, v) in term.field.iter().enumerate() {
                if covered & (1 << s) == 0 {
                    prod *= v;
                }
            }
            total += prod;
        }
    }
    Ok(total)
}

/// Set partitions of `0..k` as lists of blocks, each block a bitmask.
fn set_partitions(k: usize) -> Vec<Vec<u64>> {
    fn rec(i: usize, k: usize, blocks: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if i == k {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b] |= 1 << i;
            rec(i + 1, k, blocks, out);
            blocks[b] &= !(1 << i);
        }
        blocks.push(1 << i);
        rec(i + 1, k, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), &mut out);
    out
}

/// `Σ_{p_1,…,p_k distinct} ∏_s v_s[p_s]` by Möbius inversion over set
/// partitions: `Σ_π ∏_{B∈π} (-1)^{|B|-1}(|B|-1)! Σ_p ∏_{s∈B} v_s[p]`.
pub fn distinct_index_sum(vectors: &[&[f64]]) -> f64 {
    let k = vectors.len();
    if k == 0 {
        return 1.0;
    }
    let n = vectors[0].len();
    let mut total = 0.0;
    for partition in set_partitions(k) {
        let mut prod = 1.0;
        for &block in &partition {
            let size = block.count_ones() as usize;
            let mobius = if size % 2 == 1 { 1.0 } else { -1.0 } * (1..size).map(|i| i as f64).product::<f64>();
            let s: f64 = (0..n)
                .map(|p| {
                    (0..k)
                        .filter(|&s| block & (1 << s) != 0)
                        .map(|s| vectors[s][p])
                        .product::<f64>()
                })
                .sum();
            prod *= mobius * s;
        }
        total += prod;
    }
    total
}

/// Monte Carlo identity check: `lhs` and `rhs` estimate the same quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub se: f64,
    pub z: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl IdentityReport {
    fn new(lhs: f64, rhs: f64, se: f64, replicas: usize, seed: u64) -> Self {
        let diff = lhs - rhs;
        let z = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        Self {
            lhs,
            rhs,
            se,
            z,
            replicas,
            seed,
        }
    }
}

/// Sum of `f` over ordered tuples of `k` distinct indices below `n`.
fn sum_over_distinct(n: usize, k: usize, f: &mut dyn FnMut(&[usize]) -> f64) -> f64 {
    fn rec(n: usize, k: usize, idx: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> f64) -> f64 {
        if idx.len() == k {
            return f(idx);
        }
        let mut s = 0.0;
        for j in 0..n {
            if idx.contains(&j) {
                continue;
            }
            idx.push(j);
            s += rec(n, k, idx, f);
            idx.pop();
        }
        s
    }
    rec(n, k, &mut Vec::with_capacity(k), f)
}

/// Nested adaptive quadrature of `F` over `[lo, hi]^k`, `k ≤ 3`.
fn cube_integral(f: &(dyn Fn(&[f64]) -> f64 + Sync), k: usize, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    fn rec(f: &(dyn Fn(&[f64]) -> f64 + Sync), x: &mut Vec<f64>, k: usize, lo: f64, hi: f64, tol: f64) -> Result<f64> {
        if x.len() == k {
            return Ok(f(x));
        }
        let mut err = None;
        let v = quad::integrate(
            |t| {
                x.push(t);
                let r = rec(f, x, k, lo, hi, tol / (hi - lo));
                x.pop();
                r.unwrap_or_else(|e| {
                    err = Some(e);
                    0.0
                })
            },
            lo,
            hi,
            tol,
        )?
        .value;
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
    if k > 3 {
        return Err(Error::Unsupported(format!("quadrature over more than 3 dimensions (k = {k})")));
    }
    rec(f, &mut Vec::with_capacity(k), k, lo, hi, tol)
}

/// Expected sum of `F` over ordered distinct `k`-tuples of a Poisson system
/// with Lebesgue intensity on `[-L, L]`, against `∫_{[-L,L]^k} F`.
pub fn mecke_palm_check(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    window: Window,
    k: usize,
    replicas: usize,
    seed: u64,
) -> Result<IdentityReport> {
    if k == 0 {
        return Err(invalid("order must be at least 1"));
    }
    if replicas < 2 {
        return Err(invalid("need at least 2 replicas"));
    }
    let l = window.half_width();
    let rhs = cube_integral(f, k, -l, l, 1e-9)?;
    let draws: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            let n = rand_distr::Poisson::new(window.length())
                .map(|d| rng.sample(d) as usize)
                .unwrap_or(0);
            let pts: Vec<f64> = (0..n).map(|_| rng.random_range(-l..l)).collect();
            let mut buf = vec![0.0; k];
            sum_over_distinct(n, k, &mut |idx| {
                for (b, &i) in buf.iter_mut().zip(idx) {
                    *b = pts[i];
                }
                f(&buf)
            })
        })
        .collect();
    let (lhs, se) = mean_se(&draws);
    Ok(IdentityReport::new(lhs, rhs, se, replicas, seed))
}

/// Setting for the charged-sum second-moment check: particles live on
/// `[-L, L]` and move for `grid.t_max()`.
#[derive(Debug, Clone, Copy)]
pub struct PermutationSetting {
    pub alpha: f64,
    pub window: Window,
    pub grid: TimeGrid,
}

/// `E(Σ_{distinct} σ_{j_1}⋯σ_{j_k} F(P_{j_1},…,P_{j_k}))²` against
/// `∫_{W^k} E Σ_π F(P_1,…,P_k) F(P_{π_1},…,P_{π_k}) dx`.
///
/// `F` receives the position sequences of `k` particles. The right side is
/// estimated by `|W|^k` times the mean over independent uniform starting
/// points and paths, drawn on a stream separate from the left side.
pub fn second_moment_permutation_check(
    f: &(dyn Fn(&[&[f64]]) -> f64 + Sync),
    k: usize,
    setting: PermutationSetting,
    replicas: usize,
    seed: u64,
) -> Result<IdentityReport> {
    if k == 0 {
        return Err(invalid("order must be at least 1"));
    }
    if replicas < 2 {
        return Err(invalid("need at least 2 replicas"));
    }
    let params = StableParams::for_particles(setting.alpha)?;
    let lhs_draws: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let sys = sample_system(params, setting.window, setting.grid, &mut replica_rng(seed, r))?;
            let traj: Vec<Vec<f64>> = (0..sys.len()).map(|j| sys.trajectory(j).collect()).collect();
            let mut args: Vec<&[f64]> = Vec::with_capacity(k);
            let s = sum_over_distinct(sys.len(), k, &mut |idx| {
                args.clear();
                let mut sign = 1.0;
                for &i in idx {
                    args.push(&traj[i]);
                    sign *= sys.charges()[i];
                }
                sign * f(&args)
            });
            Ok(s * s)
        })
        .collect::<Result<_>>()?;
    let perms = permutations(k);
    let volume = setting.window.length().powi(k as i32);
    let rhs_seed = derive_seed(seed, tags::RHS);
    let l = setting.window.half_width();
    let rhs_draws: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(rhs_seed, r);
            let traj: Vec<Vec<f64>> = (0..k).map(|_| uniform_walk(params, setting.grid, l, &mut rng)).collect();
            let base: Vec<&[f64]> = traj.iter().map(|t| t.as_slice()).collect();
            let f0 = f(&base);
            let s: f64 = perms
                .iter()
                .map(|p| {
                    let permuted: Vec<&[f64]> = p.iter().map(|&i| base[i]).collect();
                    f(&permuted)
                })
                .sum();
            volume * f0 * s
        })
        .collect();
    let (lhs, se_l) = mean_se(&lhs_draws);
    let (rhs, se_r) = mean_se(&rhs_draws);
    Ok(IdentityReport::new(lhs, rhs, (se_l * se_l + se_r * se_r).sqrt(), replicas, seed))
}

fn uniform_walk(params: StableParams, grid: TimeGrid, l: f64, rng: &mut ReplicaRng) -> Vec<f64> {
    let x = rng.random_range(-l..l);
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    out.push(x);
    fill_walk(params.alpha(), grid.step(), grid.n_steps(), x, rng, &mut out);
    out
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..k {
            if !cur.contains(&i) {
                cur.push(i);
                rec(cur, k, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), k, &mut out);
    out
}

/// System used by [`wick_vs_rho_second_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WickSystemConfig {
    pub alpha: f64,
    pub horizon: f64,
    pub step: f64,
    /// Window half-width; `None` takes every particle that visits the
    /// support of `Φ`, which is exact.
    pub window: Option<f64>,
    /// Calibration replicas per evaluation replica.
    pub calibration_factor: usize,
}

/// Second moments of the Wick product `W`, of its distinct-index part `ρ`
/// and of `W - ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WickRhoReport {
    pub wick_sq: f64,
    pub rho_sq: f64,
    pub diff_sq: f64,
    #[serde(flatten)]
    pub identity: IdentityReport,
}

struct TermData {
    /// per slot, per particle: `T^{-1/2} σ_p ∫ φ(P_p)`
    contributions: Vec<Vec<f64>>,
}

fn term_data(sys: &ParticleSystem, phi: &TensorTestFunction, horizon: f64) -> Result<Vec<TermData>> {
    let root = horizon.sqrt();
    phi.terms()
        .iter()
        .map(|factors| {
            let contributions = factors
                .iter()
                .map(|f| {
                    let per = occupation_per_particle(sys, f.as_ref(), horizon)?;
                    Ok(per.iter().zip(sys.charges()).map(|(o, s)| o * s / root).collect())
                })
                .collect::<Result<_>>()?;
            Ok(TermData { contributions })
        })
        .collect()
}

fn draw_system(cfg: &WickSystemConfig, support: (f64, f64), rng: &mut ReplicaRng) -> Result<ParticleSystem> {
    let params = StableParams::for_particles(cfg.alpha)?;
    let grid = TimeGrid::covering(cfg.horizon, cfg.step)?;
    match cfg.window {
        Some(l) => sample_system(params, Window::new(l)?, grid, rng),
        None => {
            let (lo, hi) = support;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid("visitor sampling needs factors with bounded support"));
            }
            sample_visitors(params, lo, hi, grid, rng)
        }
    }
}

/// Checks `E(W - ρ)² = E W² - E ρ²` for `W = ⟨:X_T^{⊗k}:, Φ⟩` and
/// `ρ = T^{-k/2} Σ_{distinct} σ⋯σ ∫⋯∫ Φ`.
///
/// Covariances inside `W` come from a disjoint calibration batch. The
/// reported `z` is for the replica mean of `(W-ρ)² - W² + ρ² = 2ρ(ρ - W)`.
pub fn wick_vs_rho_second_moment(
    phi: &TensorTestFunction,
    cfg: &WickSystemConfig,
    replicas: usize,
    seed: u64,
) -> Result<WickRhoReport> {
    if replicas < 2 {
        return Err(invalid("need at least 2 replicas"));
    }
    if cfg.calibration_factor == 0 {
        return Err(invalid("calibration batch must be non-empty"));
    }
    let k = phi.order();
    let support = phi.support();
    let n_terms = phi.terms().len();
    // calibration: second moments E X(φ_s) X(φ_t) per term
    let cal_seed = derive_seed(seed, tags::CALIBRATION);
    let cal_n = replicas * cfg.calibration_factor;
    let cal_fields: Vec<Vec<Vec<f64>>> = (0..cal_n as u64)
        .into_par_iter()
        .map(|r| {
            let sys = draw_system(cfg, support, &mut replica_rng(cal_seed, r))?;
            Ok(term_data(&sys, phi, cfg.horizon)?
                .into_iter()
                .map(|t| t.contributions.iter().map(|c| c.iter().sum()).collect())
                .collect())
        })
        .collect::<Result<_>>()?;
    let covs: Vec<Vec<Vec<Option<f64>>>> = (0..n_terms)
        .map(|j| {
            (0..k)
                .map(|s| {
                    (0..k)
                        .map(|t| Some(cal_fields.iter().map(|f| f[j][s] * f[j][t]).sum::<f64>() / cal_n as f64))
                        .collect()
                })
                .collect()
        })
        .collect();
    let draws: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let sys = draw_system(cfg, support, &mut replica_rng(seed, r))?;
            let data = term_data(&sys, phi, cfg.horizon)?;
            let mut terms = Vec::with_capacity(n_terms);
            let mut rho = 0.0;
            for (j, d) in data.iter().enumerate() {
                terms.push(WickTerm {
                    field: d.contributions.iter().map(|c| c.iter().sum()).collect(),
                    cov: covs[j].clone(),
                });
                let v: Vec<&[f64]> = d.contributions.iter().map(|c| c.as_slice()).collect();
                rho += distinct_index_sum(&v);
            }
            Ok((wick_product(&terms, phi)?, rho))
        })
        .collect::<Result<_>>()?;
    let n = replicas as f64;
    let wick_sq = draws.iter().map(|(w, _)| w * w).sum::<f64>() / n;
    let rho_sq = draws.iter().map(|(_, r)| r * r).sum::<f64>() / n;
    let diff_sq = draws.iter().map(|(w, r)| (w - r) * (w - r)).sum::<f64>() / n;
    let gap: Vec<f64> = draws.iter().map(|(w, r)| 2.0 * r * (r - w)).collect();
    let (_, se) = mean_se(&gap);
    Ok(WickRhoReport {
        wick_sq,
        rho_sq,
        diff_sq,
        identity: IdentityReport::new(diff_sq, wick_sq - rho_sq, se, replicas, seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{Func, Zero};

    #[test]
    fn small_pair_sets() {
        let two = enumerate_pair_sets(2).unwrap();
        assert_eq!(two.len(), 2);
        assert!(two[0].is_empty());
        assert_eq!(two[1].pairs(), &[(0, 1)]);
        assert_eq!(enumerate_pair_sets(3).unwrap().len(), 4);
        assert_eq!(enumerate_pair_sets(4).unwrap().len(), 10);
        assert!(enumerate_pair_sets(0).is_err());
    }

    #[test]
    fn pair_sets_match_brute_force() {
        // brute force: include or exclude each of the C(k,2) pairs, keeping disjoint choices
        fn count(all: &[(usize, usize)], used: u64) -> u128 {
            let Some((&(a, b), rest)) = all.split_first() else {
                return 1;
            };
            let without = count(rest, used);
            let bits = (1 << a) | (1 << b);
            if used & bits == 0 {
                without + count(rest, used | bits)
            } else {
                without
            }
        }
        for k in 1..=8usize {
            let all: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
            let brute = count(&all, 0);
            let sets = enumerate_pair_sets(k).unwrap();
            assert_eq!(sets.len() as u128, brute, "k={k}");
            assert_eq!(pair_set_count(k), brute, "k={k}");
            let mut dedup = sets.clone();
            dedup.dedup();
            assert_eq!(dedup.len(), sets.len());
            for s in &sets {
                assert_eq!(s.covered().count_ones() as usize, 2 * s.len());
            }
        }
    }

    #[test]
    fn cancellation() {
        for n in 1..=8 {
            assert_eq!(cancellation_identity(n).unwrap(), 0);
            let counts = cancellation_counts(n).unwrap();
            for (m, &c) in counts.iter().enumerate() {
                assert_eq!(c as u128, binomial(2 * n as u64, m as u64));
            }
        }
        let alt: i128 = (0..=6).map(|m| if m % 2 == 0 { 1 } else { -1 } * binomial(6, m) as i128).sum();
        assert_eq!(cancellation_identity(3).unwrap() as i128, alt);
        assert!(cancellation_identity(0).is_err());
    }

    fn phi_power(k: usize) -> TensorTestFunction {
        TensorTestFunction::power(Arc::new(Func::with_support(|x: f64| 1.0 - x.abs(), -1.0, 1.0)), k).unwrap()
    }

    #[test]
    fn wick_low_orders() {
        let p1 = phi_power(1);
        let t = WickTerm {
            field: vec![1.7],
            cov: vec![vec![Some(0.3)]],
        };
        assert_eq!(wick_product(&[t], &p1).unwrap(), 1.7);
        let p2 = phi_power(2);
        let t = WickTerm {
            field: vec![1.7, 1.7],
            cov: vec![vec![Some(0.3), Some(0.3)], vec![Some(0.3), Some(0.3)]],
        };
        assert!((wick_product(&[t.clone()], &p2).unwrap() - (1.7 * 1.7 - 0.3)).abs() < 1e-15);
        let missing = WickTerm {
            cov: vec![vec![Some(0.3), None], vec![None, Some(0.3)]],
            ..t
        };
        assert!(wick_product(&[missing], &p2).is_err());
    }

    #[test]
    fn wick_with_zero_factor() {
        let zero: Arc<dyn TestFunction> = Arc::new(Zero);
        let one: Arc<dyn TestFunction> = Arc::new(Func::with_support(|_| 1.0, 0.0, 1.0));
        let phi = TensorTestFunction::new(vec![vec![one.clone(), zero, one]]).unwrap();
        // a zero factor has zero field value and zero covariances
        let t = WickTerm {
            field: vec![0.8, 0.0, -0.4],
            cov: vec![
                vec![Some(1.0), Some(0.0), Some(0.5)],
                vec![Some(0.0), Some(0.0), Some(0.0)],
                vec![Some(0.5), Some(0.0), Some(1.0)],
            ],
        };
        assert_eq!(wick_product(&[t], &phi).unwrap(), 0.0);
    }

    #[test]
    fn distinct_sum_matches_loops() {
        let a = [0.3, -1.2, 0.7, 2.0];
        let b = [1.1, 0.4, -0.5, 0.9];
        let c = [-0.2, 0.6, 1.5, -1.0];
        let mut brute2 = 0.0;
        let mut brute3 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                brute2 += a[i] * b[j];
                for l in 0..4 {
                    if l != i && l != j {
                        brute3 += a[i] * b[j] * c[l];
                    }
                }
            }
        }
        assert!((distinct_index_sum(&[&a, &b]) - brute2).abs() < 1e-12);
        assert!((distinct_index_sum(&[&a, &b, &c]) - brute3).abs() < 1e-12);
        assert_eq!(set_partitions(4).len(), 15);
    }

    #[test]
    fn zero_functions_give_zero_reports() {
        let w = Window::new(2.0).unwrap();
        let r = mecke_palm_check(&|_: &[f64]| 0.0, w, 2, 50, 1).unwrap();
        assert_eq!((r.lhs, r.rhs, r.z), (0.0, 0.0, 0.0));
        let setting = PermutationSetting {
            alpha: 0.7,
            window: w,
            grid: TimeGrid::covering(1.0, 0.1).unwrap(),
        };
        let r = second_moment_permutation_check(&|_: &[&[f64]]| 0.0, 2, setting, 20, 1).unwrap();
        assert_eq!((r.lhs, r.rhs, r.z), (0.0, 0.0, 0.0));
        let zero = TensorTestFunction::new(vec![vec![
            Arc::new(Func::with_support(|_| 0.0, 0.0, 1.0)) as Arc<dyn TestFunction>,
            Arc::new(Func::with_support(|_| 0.0, 0.0, 1.0)),
        ]])
        .unwrap();
        let cfg = WickSystemConfig {
            alpha: 0.7,
            horizon: 2.0,
            step: 0.1,
            window: None,
            calibration_factor: 2,
        };
        let r = wick_vs_rho_second_moment(&zero, &cfg, 10, 3).unwrap();
        assert_eq!((r.wick_sq, r.rho_sq, r.diff_sq), (0.0, 0.0, 0.0));
    }

    #[test]
    fn mecke_palm_first_order() {
        let w = Window::new(2.0).unwrap();
        let f = |x: &[f64]| if (0.0..=1.0).contains(&x[0]) { 1.0 } else { 0.0 };
        let r = mecke_palm_check(&f, w, 1, 4000, 7).unwrap();
        assert!((r.rhs - 1.0).abs() < 1e-8);
        assert!(r.z.abs() < 4.0, "{r:?}");
    }
}
