//! The four batch commands. Each returns whether its tolerances passed.

use std::fs;
use std::path::{Path, PathBuf};

use hpl_core::io::{read_ensemble_csv, read_json, write_ensemble_csv, write_json, RunMetadata, VERSION};
use hpl_core::rng::{derive_seed, tags};
use hpl_core::stats::{estimate_covariance, hurst_from_variance, mean_se, skewness, ReplicaEnsemble};
use serde::{Deserialize, Serialize};

use crate::checks::{run_checks, CheckReport};
use crate::config::{Discrepancy, Experiment, RunConfig};
use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_report<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_json(path, value).map_err(|e| io_err(path, e))
}

fn metadata(command: &str, config: &RunConfig, seed: u64, replicas: usize, exp: &Experiment) -> Result<RunMetadata, CliError> {
    Ok(RunMetadata {
        version: VERSION.into(),
        command: command.into(),
        seed,
        replicas,
        config: serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))?,
        derived: exp.derived(),
    })
}

/// Simulates `exp` and writes `<dir>/<stem>.csv` plus `<stem>.meta.json`.
fn simulate_to(
    dir: &Path,
    stem: &str,
    exp: &Experiment,
    replicas: usize,
    seed: u64,
    meta: RunMetadata,
) -> Result<ReplicaEnsemble, CliError> {
    let ens = exp
        .simulate(replicas, seed)
        .map_err(|e| CliError::Runtime(format!("{} simulation failed: {e}", exp.name())))?;
    let csv = dir.join(format!("{stem}.csv"));
    write_ensemble_csv(&csv, &ens).map_err(|e| io_err(&csv, e))?;
    write_report(&dir.join(format!("{stem}.meta.json")), &meta)?;
    Ok(ens)
}

pub fn simulate(config: &RunConfig) -> Result<bool, CliError> {
    let (exp, replicas) = config.validate_simulate()?;
    let seed = config.seed()?;
    let dir = config.out_dir();
    create_dir(&dir)?;
    let meta = metadata("simulate", config, seed, replicas, exp)?;
    let ens = simulate_to(&dir, exp.name(), exp, replicas, seed, meta)?;
    println!(
        "wrote {} replicas x {} times to {}",
        ens.len(),
        ens.t_grid.len(),
        dir.join(format!("{}.csv", exp.name())).display()
    );
    Ok(true)
}

fn load_ensemble(path: &Path) -> Result<ReplicaEnsemble, CliError> {
    if !path.exists() {
        return Err(CliError::Config(vec![format!("ensemble file {} does not exist", path.display())]));
    }
    read_ensemble_csv(path).map_err(|e| io_err(path, e))
}

/// `x.csv` → `x.meta.json`.
fn sidecar(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

fn print_checks(label: &str, r: &CheckReport) {
    let flag = |p: Option<bool>| match p {
        Some(true) => " [pass]",
        Some(false) => " [FAIL]",
        None => "",
    };
    println!("{label}: {} replicas", r.replicas);
    if let Some(c) = &r.covariance {
        println!(
            "  covariance: max rel err {:.4}, max |z| {:.2}{}",
            c.max_rel_err,
            c.max_abs_z,
            flag(Some(c.pass))
        );
    }
    if let Some(c) = &r.correlation {
        println!(
            "  corr({}, {}): {:.4} ± {:.4} vs {:.4} (rel err {:.4}){}",
            c.s,
            c.t,
            c.estimate,
            c.se,
            c.target,
            c.rel_err,
            flag(c.pass)
        );
    }
    if let Some(h) = &r.hurst {
        println!("  hurst: {:.4} ± {:.4} vs {:.4}{}", h.estimate, h.se, h.target, flag(h.pass));
    }
    if let Some(e) = &r.energy {
        println!(
            "  energy: statistic {:.4}, p = {:.4}{}",
            e.report.statistic,
            e.report.p_value,
            flag(e.pass)
        );
    }
    if let Some(s) = &r.skewness {
        println!("  skewness at t = 1: {:.3} ± {:.3}{}", s.skewness, s.se, flag(s.pass));
    }
}

pub fn verify(config: &RunConfig) -> Result<bool, CliError> {
    let v = config.validate_verify()?;
    let seed = config.seed()?;
    let ens = load_ensemble(&v.ensemble)?;
    let reference = v.reference.as_deref().map(load_ensemble).transpose()?;
    let target_hurst = match v.target_hurst {
        Some(h) => Some(h),
        None => {
            let meta = sidecar(&v.ensemble);
            meta.exists()
                .then(|| read_json::<RunMetadata>(&meta).ok())
                .flatten()
                .and_then(|m| m.derived.get("target_hurst").and_then(|h| h.as_f64()))
        }
    };
    let report = run_checks(&ens, reference.as_ref(), target_hurst, &v.checks, seed)?;
    let dir = config.out_dir();
    create_dir(&dir)?;
    write_report(&dir.join("verify.json"), &report)?;
    print_checks("verify", &report);
    Ok(report.pass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungSummary {
    pub index: usize,
    pub horizon: f64,
    pub experiment: Experiment,
    pub discrepancy: f64,
    /// Monte Carlo noise scale of `discrepancy`.
    pub noise: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub discrepancy: Discrepancy,
    pub rungs: Vec<RungSummary>,
    /// Each discrepancy is at most the previous one plus twice the combined noise.
    pub monotone: bool,
    pub final_pass: bool,
    pub pass: bool,
}

/// `d_{i+1} ≤ d_i + 2·√(n_i² + n_{i+1}²)` for consecutive rungs.
pub fn monotone_within_noise(d: &[f64], noise: &[f64]) -> bool {
    (1..d.len()).all(|i| d[i] <= d[i - 1] + 2.0 * noise[i].hypot(noise[i - 1]))
}

fn rung_discrepancy(kind: Discrepancy, r: &CheckReport) -> Result<(f64, f64), CliError> {
    let missing = |what: &str| CliError::Runtime(format!("the {what} discrepancy could not be computed"));
    match kind {
        Discrepancy::Correlation => {
            let c = r.correlation.as_ref().ok_or_else(|| missing("correlation"))?;
            Ok((c.rel_err, c.se / c.target.abs()))
        }
        Discrepancy::Energy => {
            let e = r.energy.as_ref().ok_or_else(|| missing("energy"))?;
            Ok((e.report.statistic, e.report.null_sd))
        }
        Discrepancy::Hurst => {
            let h = r.hurst.as_ref().ok_or_else(|| missing("Hurst"))?;
            Ok(((h.estimate - h.target).abs(), h.se))
        }
    }
}

pub fn convergence_study(config: &RunConfig) -> Result<bool, CliError> {
    let (conv, experiments, replicas) = config.validate_convergence()?;
    let seed = config.seed()?;
    let dir = config.out_dir();
    create_dir(&dir)?;
    let target_hurst = Some(conv.target_hurst.unwrap_or_else(|| conv.base.hurst()));
    let reference = match &conv.reference {
        Some(r) => {
            let n = conv.reference_replicas.unwrap_or(replicas);
            let rseed = derive_seed(seed, tags::REFERENCE);
            let meta = metadata("convergence-study", config, rseed, n, r)?;
            Some(simulate_to(&dir, "reference", r, n, rseed, meta)?)
        }
        None => None,
    };
    let kind = conv.discrepancy();
    let mut rungs = Vec::new();
    for (i, exp) in experiments.iter().enumerate() {
        let rung_dir = dir.join(format!("rung-{i}"));
        create_dir(&rung_dir)?;
        let meta = metadata("convergence-study", config, seed, replicas, exp)?;
        let ens = simulate_to(&rung_dir, exp.name(), exp, replicas, seed, meta)?;
        let report = run_checks(&ens, reference.as_ref(), target_hurst, &conv.checks, seed)?;
        write_report(&rung_dir.join("report.json"), &report)?;
        let horizon = horizon_of(exp);
        print_checks(&format!("rung {i} (T = {horizon})"), &report);
        let (discrepancy, noise) = rung_discrepancy(kind, &report)?;
        rungs.push(RungSummary {
            index: i,
            horizon,
            experiment: exp.clone(),
            discrepancy,
            noise,
            pass: report.pass,
        });
    }
    let d: Vec<f64> = rungs.iter().map(|r| r.discrepancy).collect();
    let n: Vec<f64> = rungs.iter().map(|r| r.noise).collect();
    let monotone = monotone_within_noise(&d, &n);
    let final_pass = rungs.last().is_some_and(|r| r.pass);
    let summary = ConvergenceSummary {
        discrepancy: kind,
        rungs,
        monotone,
        final_pass,
        pass: monotone && final_pass,
    };
    write_report(&dir.join("summary.json"), &summary)?;
    let csv_path = dir.join("summary.csv");
    let mut csv = String::from("rung,horizon,discrepancy,noise,pass\n");
    for r in &summary.rungs {
        csv.push_str(&format!(
            "{},{},{:.16e},{:.16e},{}\n",
            r.index, r.horizon, r.discrepancy, r.noise, r.pass
        ));
    }
    fs::write(&csv_path, csv).map_err(|e| io_err(&csv_path, e))?;
    println!(
        "{} discrepancy by rung: {:?}; monotone within noise: {monotone}; final rung passes: {final_pass}",
        serde_json::to_value(kind).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default(),
        d
    );
    Ok(summary.pass)
}

fn horizon_of(exp: &Experiment) -> f64 {
    match exp {
        Experiment::Eta(c) => c.horizon,
        Experiment::Rho(c) => c.horizon,
        Experiment::Field(c) => c.horizon,
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSummary {
    pub t: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub skewness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub source: PathBuf,
    pub replicas: usize,
    pub times: Vec<TimeSummary>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub hurst: Option<f64>,
    pub hurst_se: Option<f64>,
}

fn summarize(path: &Path) -> Result<EnsembleSummary, CliError> {
    let ens = load_ensemble(path)?;
    let times = (0..ens.t_grid.len())
        .map(|i| {
            let col = ens.column(i);
            let (mean, se) = mean_se(&col);
            let centered: Vec<f64> = col.iter().map(|v| (v - mean) * (v - mean)).collect();
            let (variance, variance_se) = mean_se(&centered);
            TimeSummary {
                t: ens.t_grid[i],
                mean,
                mean_se: se,
                variance,
                variance_se,
                skewness: skewness(&col).0,
            }
        })
        .collect();
    let positive: Vec<f64> = ens.t_grid.iter().copied().filter(|&t| t > 0.0).collect();
    let hurst = (positive.len() >= 3).then(|| hurst_from_variance(&ens, &positive).ok()).flatten();
    Ok(EnsembleSummary {
        source: path.to_path_buf(),
        replicas: ens.len(),
        times,
        covariance: estimate_covariance(&ens).ok().map(|c| c.cov),
        hurst: hurst.map(|h| h.hurst),
        hurst_se: hurst.map(|h| h.se),
    })
}

pub fn report(config: &RunConfig, files: &[PathBuf]) -> Result<bool, CliError> {
    let mut inputs: Vec<PathBuf> = config.report.as_ref().map(|r| r.ensembles.clone()).unwrap_or_default();
    inputs.extend(files.iter().cloned());
    if inputs.is_empty() {
        return Err(CliError::Config(vec!["report needs at least one ensemble CSV".into()]));
    }
    let dir = config.out_dir();
    create_dir(&dir)?;
    for path in &inputs {
        let s = summarize(path)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        write_report(&dir.join(format!("{stem}.report.json")), &s)?;
        // plot-ready moments by time
        let csv_path = dir.join(format!("{stem}.moments.csv"));
        let mut csv = String::from("t,mean,mean_se,variance,variance_se,skewness\n");
        for m in &s.times {
            csv.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                m.t, m.mean, m.mean_se, m.variance, m.variance_se, m.skewness
            ));
        }
        fs::write(&csv_path, csv).map_err(|e| io_err(&csv_path, e))?;
        println!("{}: {} replicas", path.display(), s.replicas);
        for m in &s.times {
            println!("  t = {:<8} mean {:>12.5e}  var {:>12.5e}  skew {:>8.3}", m.t, m.mean, m.variance, m.skewness);
        }
        if let (Some(h), Some(se)) = (s.hurst, s.hurst_se) {
            println!("  variance-scaling Hurst estimate {h:.4} ± {se:.4}");
        }
    }
    Ok(true)
}
