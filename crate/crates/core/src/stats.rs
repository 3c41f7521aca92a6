//! Ensembles of replicas and the estimators run on them.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::FunctionalSample;
use crate::rng::{derive_seed, replica_rng, tags, ReplicaRng};

/// Replica-major table of values on a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaEnsemble {
    pub t_grid: Vec<f64>,
    pub replica_ids: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
}

impl ReplicaEnsemble {
    pub fn new(t_grid: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len() as u64).collect();
        Self::with_ids(t_grid, ids, rows)
    }

    pub fn with_ids(t_grid: Vec<f64>, replica_ids: Vec<u64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if replica_ids.len() != rows.len() {
            return Err(invalid("one replica id per row"));
        }
        if rows.iter().any(|r| r.len() != t_grid.len()) {
            return Err(invalid("every row must have one value per grid time"));
        }
        Ok(Self {
            t_grid,
            replica_ids,
            rows,
        })
    }

    pub fn from_samples(samples: Vec<FunctionalSample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(invalid("no samples"));
        };
        let t_grid = first.t_grid.clone();
        if samples.iter().any(|s| s.t_grid != t_grid) {
            return Err(invalid("samples disagree on the time grid"));
        }
        let ids = samples.iter().map(|s| s.replica_id).collect();
        let rows = samples.into_iter().map(|s| s.values).collect();
        Self::with_ids(t_grid, ids, rows)
    }

    /// Runs `f(replica, rng)` for replicas `0..replicas`, each on its own
    /// stream of `seed`. The result does not depend on the worker count.
    pub fn simulate<F>(t_grid: Vec<f64>, replicas: usize, seed: u64, f: F) -> Result<Self>
    where
        F: Fn(u64, &mut ReplicaRng) -> Result<Vec<f64>> + Sync,
    {
        let rows = (0..replicas as u64)
            .into_par_iter()
            .map(|r| f(r, &mut replica_rng(seed, r)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(t_grid, rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }

    /// Index of grid time `t` (to 1e-12).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.t_grid
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| invalid(format!("time {t} is not on the ensemble grid")))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.rows.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Sample covariance matrix with jackknife standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub t_grid: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    pub replicas: usize,
}

impl CovEstimate {
    pub fn at(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let i = index_in(&self.t_grid, s)?;
        let j = index_in(&self.t_grid, t)?;
        Ok((self.cov[i][j], self.se[i][j]))
    }
}

fn index_in(grid: &[f64], t: f64) -> Result<usize> {
    grid.iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or_else(|| invalid(format!("time {t} is not on the grid")))
}

fn check_finite(ens: &ReplicaEnsemble) -> Result<()> {
    if ens.rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("ensemble contains non-finite values".into()));
    }
    Ok(())
}

/// Centered columns and their means.
fn centered(ens: &ReplicaEnsemble) -> Vec<Vec<f64>> {
    let n = ens.len() as f64;
    (0..ens.t_grid.len())
        .map(|i| {
            let col = ens.column(i);
            let m = col.iter().sum::<f64>() / n;
            col.into_iter().map(|v| v - m).collect()
        })
        .collect()
}

/// Leave-one-out covariances of two centered columns.
fn jackknife_cov(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let full = (sab - sa * sb / n) / (n - 1.0);
    let m = n - 1.0;
    let loo: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let (ra, rb) = (sa - x, sb - y);
            (sab - x * y - ra * rb / m) / (m - 1.0)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n;
    let var = loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (n - 1.0) / n;
    (full, var.sqrt())
}

/// Sample covariance over replicas with jackknife standard errors.
///
/// The leave-one-out estimates need at least three replicas.
pub fn estimate_covariance(ens: &ReplicaEnsemble) -> Result<CovEstimate> {
    if ens.len() < 3 {
        return Err(Error::Degenerate(format!(
            "covariance with jackknife errors needs at least 3 replicas, got {}",
            ens.len()
        )));
    }
    check_finite(ens)?;
    let cols = centered(ens);
    let d = cols.len();
    let mut cov = vec![vec![0.0; d]; d];
    let mut se = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let (c, e) = jackknife_cov(&cols[i], &cols[j]);
            cov[i][j] = c;
            cov[j][i] = c;
            se[i][j] = e;
            se[j][i] = e;
        }
    }
    Ok(CovEstimate {
        t_grid: ens.t_grid.clone(),
        cov,
        se,
        replicas: ens.len(),
    })
}

/// Correlation between the columns at `s` and `t`, with a jackknife error.
pub fn correlation(ens: &ReplicaEnsemble, s: f64, t: f64) -> Result<(f64, f64)> {
    if ens.len() < 3 {
        return Err(Error::Degenerate("correlation needs at least 3 replicas".into()));
    }
    check_finite(ens)?;
    let a = ens.column(ens.index_of(s)?);
    let b = ens.column(ens.index_of(t)?);
    let n = a.len();
    let corr = |skip: Option<usize>| -> f64 {
        let it = || (0..n).filter(|&i| Some(i) != skip);
        let m = it().count() as f64;
        let ma = it().map(|i| a[i]).sum::<f64>() / m;
        let mb = it().map(|i| b[i]).sum::<f64>() / m;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for i in it() {
            let (x, y) = (a[i] - ma, b[i] - mb);
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        sab / (saa * sbb).sqrt()
    };
    let full = corr(None);
    if !full.is_finite() {
        return Err(Error::Degenerate("a column has zero variance".into()));
    }
    let loo: Vec<f64> = (0..n).map(|i| corr(Some(i))).collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (n as f64 - 1.0) / n as f64;
    Ok((full, var.sqrt()))
}

/// Divides every value by the sample standard deviation at `t = 1`.
pub fn normalize(ens: &ReplicaEnsemble) -> Result<ReplicaEnsemble> {
    if ens.len() < 2 {
        return Err(Error::Degenerate("normalization needs at least 2 replicas".into()));
    }
    check_finite(ens)?;
    let col = ens.column(ens.index_of(1.0)?);
    let n = col.len() as f64;
    let m = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::Degenerate("zero variance at t = 1".into()));
    }
    Ok(ens.scaled(1.0 / var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub hurst: f64,
    pub se: f64,
}

/// Half the least-squares slope of `log Var Z(t)` against `log t`.
///
/// The standard error is the delta method applied to the joint asymptotic
/// covariance of the sample variances,
/// `Cov(v̂_i, v̂_j) ≈ (E[X_i² X_j²] - v_i v_j)/n` on centered columns.
pub fn hurst_from_variance(ens: &ReplicaEnsemble, t_subset: &[f64]) -> Result<HurstEstimate> {
    let mut ts = t_subset.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 3 {
        return Err(invalid("the Hurst regression needs at least 3 distinct times"));
    }
    if ts.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("the Hurst regression needs positive times"));
    }
    if ens.len() < 3 {
        return Err(Error::Degenerate("the Hurst regression needs at least 3 replicas".into()));
    }
    check_finite(ens)?;
    let n = ens.len() as f64;
    let cols: Vec<Vec<f64>> = ts
        .iter()
        .map(|&t| {
            let c = ens.column(ens.index_of(t)?);
            let m = c.iter().sum::<f64>() / n;
            Ok(c.into_iter().map(|v| v - m).collect())
        })
        .collect::<Result<_>>()?;
    let vars: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / (n - 1.0)).collect();
    if vars.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate("a variance estimate is not positive".into()));
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = vars.iter().map(|v| v.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let w: Vec<f64> = xs.iter().map(|x| (x - xm) / sxx).collect();
    let slope: f64 = w.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let k = ts.len();
    let mut var_slope = 0.0;
    for i in 0..k {
        for j in 0..k {
            let m4 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * a * b * b).sum::<f64>() / n;
            let c = (m4 - vars[i] * vars[j]) / n;
            var_slope += w[i] * w[j] * c / (vars[i] * vars[j]);
        }
    }
    Ok(HurstEstimate {
        hurst: slope / 2.0,
        se: var_slope.max(0.0).sqrt() / 2.0,
    })
}

/// Sample skewness of a column and its large-sample standard error `√(6/n)`.
pub fn skewness(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), (6.0 / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub replicas: usize,
    pub permutations: usize,
    pub seed: u64,
    /// Standard deviation of the permutation statistics, a noise scale for
    /// comparing statistics across runs.
    #[serde(default)]
    pub null_sd: f64,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `nm/(n+m) · (2 mean|A-B| - mean|A-A'| - mean|B-B'|)` with the first `n`
/// pooled points labelled A.
fn energy_from_labels(dist: &[Vec<f64>], labels: &[bool]) -> f64 {
    let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
    for (i, row) in dist.iter().enumerate() {
        let li = labels[i];
        for (j, &d) in row.iter().enumerate().skip(i + 1) {
            match (li, labels[j]) {
                (true, true) => aa += d,
                (false, false) => bb += d,
                _ => ab += d,
            }
        }
    }
    let n = labels.iter().filter(|&&l| l).count() as f64;
    let m = labels.len() as f64 - n;
    let e = 2.0 * ab / (n * m) - 2.0 * aa / (n * n) - 2.0 * bb / (m * m);
    n * m / (n + m) * e
}

fn same_multiset(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let sort = |x: &[Vec<f64>]| {
        let mut v = x.to_vec();
        v.sort_by(|p, q| {
            p.iter()
                .zip(q)
                .map(|(s, t)| s.total_cmp(t))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        v
    };
    sort(a) == sort(b)
}

/// Two-sample energy-distance test with a permutation p-value
/// `(1 + #{perm ≥ observed}) / (B + 1)`.
///
/// Permutation `p` shuffles the pooled labels with its own stream derived
/// from `seed`, so the p-value is independent of the worker count.
pub fn energy_distance_test(a: &[Vec<f64>], b: &[Vec<f64>], permutations: usize, seed: u64) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("energy distance needs two non-empty samples"));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|r| r.len() != dim) {
        return Err(invalid("samples must live on the same grid"));
    }
    if a.iter().chain(b).flatten().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("samples contain non-finite values".into()));
    }
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let total = pooled.len();
    let dist: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|i| pooled.iter().map(|q| euclid(pooled[i], q)).collect())
        .collect();
    let labels: Vec<bool> = (0..total).map(|i| i < a.len()).collect();
    let observed = if same_multiset(a, b) {
        0.0
    } else {
        energy_from_labels(&dist, &labels).max(0.0)
    };
    let perm_seed = derive_seed(seed, tags::PERMUTATION);
    let null: Vec<f64> = (0..permutations as u64)
        .into_par_iter()
        .map(|p| {
            let mut l = labels.clone();
            l.shuffle(&mut replica_rng(perm_seed, p));
            energy_from_labels(&dist, &l)
        })
        .collect();
    let exceed = null.iter().filter(|&&s| s >= observed).count();
    let null_sd = if null.len() > 1 {
        let m = null.iter().sum::<f64>() / null.len() as f64;
        (null.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (null.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(TestReport {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (permutations + 1) as f64,
        replicas: total,
        permutations,
        seed,
        null_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_ensemble(rows: usize, cols: usize, seed: u64) -> ReplicaEnsemble {
        let t: Vec<f64> = (1..=cols).map(|i| i as f64 * 0.5).collect();
        ReplicaEnsemble::simulate(t, rows, seed, |_, r| Ok((0..cols).map(|_| r.sample(StandardNormal)).collect()))
            .unwrap()
    }

    #[test]
    fn constant_ensemble_has_zero_covariance() {
        let e = ReplicaEnsemble::new(vec![0.5, 1.0], vec![vec![2.0, 3.0]; 10]).unwrap();
        let c = estimate_covariance(&e).unwrap();
        assert!(c.cov.iter().flatten().all(|&v| v == 0.0));
        assert!(c.se.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn too_few_replicas() {
        let e = ReplicaEnsemble::new(vec![1.0], vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(estimate_covariance(&e).is_err());
    }

    #[test]
    fn independent_columns() {
        let e = normal_ensemble(10_000, 3, 1);
        let c = estimate_covariance(&e).unwrap();
        for i in 0..3 {
            assert!((c.cov[i][i] - 1.0).abs() < 4.0 * c.se[i][i]);
            for j in 0..3 {
                if i != j {
                    assert!(c.cov[i][j].abs() < 3.5 * c.se[i][j], "{} {}", c.cov[i][j], c.se[i][j]);
                }
            }
        }
        // jackknife error of a variance of N(0,1) is about √(2/n)
        assert!((c.se[0][0] / (2.0f64 / 10_000.0).sqrt() - 1.0).abs() < 0.1);
    }

    #[test]
    fn covariance_ignores_replica_order() {
        let e = normal_ensemble(200, 3, 2);
        let mut rev = e.clone();
        rev.rows.reverse();
        let (a, b) = (estimate_covariance(&e).unwrap(), estimate_covariance(&rev).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.cov[i][j] - b.cov[i][j]).abs() < 1e-13);
                assert!((a.se[i][j] - b.se[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalization() {
        let e = normal_ensemble(100, 4, 3);
        let n = normalize(&e.scaled(7.5)).unwrap();
        let col = n.column(n.index_of(1.0).unwrap());
        let m = col.iter().sum::<f64>() / 100.0;
        let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 99.0;
        assert!((v - 1.0).abs() < 1e-12);
        let direct = normalize(&e).unwrap();
        for (r, s) in n.rows.iter().zip(&direct.rows) {
            for (x, y) in r.iter().zip(s) {
                assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
            }
        }
        let no_one = ReplicaEnsemble::new(vec![0.5], vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(normalize(&no_one).is_err());
        let flat = ReplicaEnsemble::new(vec![1.0], vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(normalize(&flat).is_err());
    }

    #[test]
    fn hurst_rejects_degenerate_input() {
        let t = vec![0.5, 1.0, 2.0];
        let det = ReplicaEnsemble::new(t.clone(), vec![t.clone(); 50]).unwrap();
        assert!(hurst_from_variance(&det, &t).is_err());
        let e = normal_ensemble(50, 3, 4);
        assert!(hurst_from_variance(&e, &[0.5, 1.0]).is_err());
        assert!(hurst_from_variance(&e, &[0.5, 1.0, 1.0]).is_err());
    }

    #[test]
    fn hurst_of_scaled_brownian_like_ensemble() {
        // Z(t) = t^H N with H = 0.3: exact power law
        let t = vec![0.5, 1.0, 2.0, 4.0];
        let e = ReplicaEnsemble::simulate(t.clone(), 5000, 5, |_, r| {
            let z: f64 = r.sample(StandardNormal);
            Ok(t.iter().map(|s| s.powf(0.3) * z).collect())
        })
        .unwrap();
        let h = hurst_from_variance(&e, &t).unwrap();
        assert!((h.hurst - 0.3).abs() < 1e-12);
        let s = hurst_from_variance(&e.scaled(123.0), &t).unwrap();
        assert!((s.hurst - h.hurst).abs() < 1e-12);
    }

    #[test]
    fn energy_identical_multisets() {
        let a: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let mut b = a.clone();
        b.reverse();
        let r = energy_distance_test(&a, &b, 99, 1).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.5);
        assert!(energy_distance_test(&a, &[], 9, 1).is_err());
    }

    #[test]
    fn energy_detects_shift() {
        let a = normal_ensemble(200, 1, 6).rows;
        let b: Vec<Vec<f64>> = normal_ensemble(200, 1, 7).rows.into_iter().map(|r| vec![r[0] + 3.0]).collect();
        let r = energy_distance_test(&a, &b, 199, 2).unwrap();
        assert!(r.statistic > 0.0);
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn energy_is_deterministic() {
        let a = normal_ensemble(50, 2, 8).rows;
        let b = normal_ensemble(60, 2, 9).rows;
        assert_eq!(
            energy_distance_test(&a, &b, 99, 3).unwrap(),
            energy_distance_test(&a, &b, 99, 3).unwrap()
        );
    }

    #[test]
    fn correlation_of_comonotone_columns() {
        let e = ReplicaEnsemble::simulate(vec![0.5, 1.0], 100, 10, |_, r| {
            let z: f64 = r.sample(StandardNormal);
            Ok(vec![z, 2.0 * z + 1.0])
        })
        .unwrap();
        let (c, se) = correlation(&e, 0.5, 1.0).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert!(se < 1e-6);
    }
}
