//! Tolerance checks shared by `verify` and `convergence-study`.

use hpl_core::hermite_oracle::target_covariance;
use hpl_core::stats::{
    correlation, energy_distance_test, estimate_covariance, hurst_from_variance, normalize, skewness, ReplicaEnsemble,
    TestReport,
};
use serde::{Deserialize, Serialize};

use crate::config::Checks;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEntry {
    pub s: f64,
    pub t: f64,
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
    pub rel_err: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovCheck {
    pub entries: Vec<CovEntry>,
    pub max_rel_err: f64,
    pub max_abs_z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrCheck {
    pub s: f64,
    pub t: f64,
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
    pub rel_err: f64,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstCheck {
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub report: TestReport,
    pub min_p: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewCheck {
    pub t: f64,
    pub skewness: f64,
    pub se: f64,
    pub pass: Option<bool>,
}

/// Every diagnostic that could be computed; `pass` fields are set only for
/// configured tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub replicas: usize,
    pub target_hurst: Option<f64>,
    pub covariance: Option<CovCheck>,
    pub correlation: Option<CorrCheck>,
    pub hurst: Option<HurstCheck>,
    pub energy: Option<EnergyCheck>,
    pub skewness: Option<SkewCheck>,
    pub pass: bool,
}

fn rt(e: hpl_core::error::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn fbm_corr(h: f64, s: f64, t: f64) -> Result<f64, CliError> {
    let c = target_covariance(h, s, t).map_err(rt)?;
    let v = (target_covariance(h, s, s).map_err(rt)? * target_covariance(h, t, t).map_err(rt)?).sqrt();
    Ok(c / v)
}

pub fn run_checks(
    ens: &ReplicaEnsemble,
    reference: Option<&ReplicaEnsemble>,
    target_hurst: Option<f64>,
    checks: &Checks,
    seed: u64,
) -> Result<CheckReport, CliError> {
    let has_unit = ens.index_of(1.0).is_ok();
    let shaped = if checks.normalize {
        if !has_unit {
            return Err(CliError::Config(vec!["normalization needs t = 1 on the ensemble grid".into()]));
        }
        normalize(ens).map_err(rt)?
    } else {
        ens.clone()
    };
    let mut pass = true;

    let covariance = match (target_hurst, checks.cov_rel_tol.or(checks.cov_z_tol)) {
        (Some(h), Some(_)) => {
            let est = estimate_covariance(&shaped).map_err(rt)?;
            let mut entries = Vec::new();
            for (i, &s) in ens.t_grid.iter().enumerate() {
                for (j, &t) in ens.t_grid.iter().enumerate().skip(i) {
                    let target = target_covariance(h, s, t).map_err(rt)?;
                    let (estimate, se) = (est.cov[i][j], est.se[i][j]);
                    let diff = estimate - target;
                    let rel_err = if target != 0.0 { (diff / target).abs() } else { diff.abs() };
                    let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
                    entries.push(CovEntry {
                        s,
                        t,
                        estimate,
                        se,
                        target,
                        rel_err,
                        z,
                    });
                }
            }
            let max_rel_err = entries.iter().map(|e| e.rel_err).fold(0.0, f64::max);
            let max_abs_z = entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
            // a zero tolerance only passes an exact match
            let ok = checks.cov_rel_tol.is_none_or(|tol| max_rel_err <= tol && (tol > 0.0 || max_rel_err == 0.0))
                && checks.cov_z_tol.is_none_or(|tol| max_abs_z <= tol && (tol > 0.0 || max_abs_z == 0.0));
            pass &= ok;
            Some(CovCheck {
                entries,
                max_rel_err,
                max_abs_z,
                pass: ok,
            })
        }
        (None, Some(_)) => {
            return Err(CliError::Config(vec!["covariance checks need a target Hurst index".into()]));
        }
        _ => None,
    };

    let [s, t] = checks.corr_pair;
    let corr_est = match target_hurst {
        Some(_) if ens.index_of(s).is_ok() && ens.index_of(t).is_ok() && s > 0.0 && t > 0.0 => {
            match correlation(ens, s, t) {
                Ok(v) => Some(v),
                Err(e) if checks.corr_rel_tol.is_some() => return Err(rt(e)),
                Err(_) => None,
            }
        }
        _ => None,
    };
    let correlation = match (target_hurst, corr_est) {
        (Some(h), Some((estimate, se))) => {
            let target = fbm_corr(h, s, t)?;
            let rel_err = ((estimate - target) / target).abs();
            let ok = checks.corr_rel_tol.map(|tol| rel_err <= tol && (tol > 0.0 || rel_err == 0.0));
            pass &= ok.unwrap_or(true);
            Some(CorrCheck {
                s,
                t,
                estimate,
                se,
                target,
                rel_err,
                pass: ok,
            })
        }
        _ if checks.corr_rel_tol.is_some() => {
            return Err(CliError::Config(vec![format!(
                "the correlation check needs a target Hurst index and times {s}, {t} > 0 on the grid"
            )]));
        }
        _ => None,
    };

    let times: Vec<f64> = match &checks.hurst_times {
        Some(ts) => ts.clone(),
        None => ens.t_grid.iter().copied().filter(|&t| t > 0.0).collect(),
    };
    let hurst_est = match (target_hurst, times.len() >= 3) {
        (Some(_), true) => match hurst_from_variance(ens, &times) {
            Ok(v) => Some(v),
            Err(e) if checks.hurst_tol.is_some() => return Err(rt(e)),
            Err(_) => None,
        },
        _ => None,
    };
    let hurst = match (target_hurst, hurst_est) {
        (Some(target), Some(est)) => {
            let ok = checks.hurst_tol.map(|tol| (est.hurst - target).abs() <= tol);
            pass &= ok.unwrap_or(true);
            Some(HurstCheck {
                estimate: est.hurst,
                se: est.se,
                target,
                pass: ok,
            })
        }
        _ if checks.hurst_tol.is_some() => {
            return Err(CliError::Config(vec![
                "the Hurst check needs a target Hurst index and at least 3 positive times".into(),
            ]));
        }
        _ => None,
    };

    let energy = match reference {
        Some(r) => {
            if r.t_grid != ens.t_grid {
                return Err(CliError::Config(vec!["the reference ensemble uses a different time grid".into()]));
            }
            let r = if checks.normalize { normalize(r).map_err(rt)? } else { r.clone() };
            let report = energy_distance_test(&shaped.rows, &r.rows, checks.permutations.max(1), seed).map_err(rt)?;
            let ok = checks.energy_min_p.map(|p| report.p_value > p);
            pass &= ok.unwrap_or(true);
            Some(EnergyCheck {
                report,
                min_p: checks.energy_min_p,
                pass: ok,
            })
        }
        None => None,
    };

    let skewness = if has_unit {
        let (sk, se) = skewness(&ens.column(ens.index_of(1.0).map_err(rt)?));
        let ok = checks.positive_skew.then_some(sk > 2.0 * se);
        pass &= ok.unwrap_or(true);
        Some(SkewCheck {
            t: 1.0,
            skewness: sk,
            se,
            pass: ok,
        })
    } else if checks.positive_skew {
        return Err(CliError::Config(vec!["the skewness check needs t = 1 on the grid".into()]));
    } else {
        None
    };

    Ok(CheckReport {
        replicas: ens.len(),
        target_hurst,
        covariance,
        correlation,
        hurst,
        energy,
        skewness,
        pass,
    })
}
