//! Run configuration: TOML files (or a metadata sidecar from an earlier run)
//! merged with command-line overrides.

use std::path::{Path, PathBuf};

use hpl_core::functionals::{EtaConfig, EtaPlan, FieldConfig, FieldPlan, RhoConfig, RhoPlan};
use hpl_core::hermite_oracle::{
    fbm_sample, hermite_partial_sum, spectral_hermite_sample, spectral_hurst, target_covariance, OracleConfig,
    SpectralGrid,
};
use hpl_core::io::{read_json, RunMetadata};
use hpl_core::rng::ReplicaRng;
use hpl_core::stats::ReplicaEnsemble;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbmConfig {
    pub hurst: f64,
    pub t_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    /// One spectral exponent per slot.
    pub exponents: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub cutoff: f64,
    pub bin_width: f64,
}

/// Anything that produces one row per replica on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Eta(EtaConfig),
    Rho(RhoConfig),
    Field(FieldConfig),
    Fbm(FbmConfig),
    PartialSum(OracleConfig),
    Spectral(SpectralConfig),
}

pub type Sampler = Box<dyn Fn(u64, &mut ReplicaRng) -> hpl_core::error::Result<Vec<f64>> + Sync>;

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Eta(_) => "eta",
            Experiment::Rho(_) => "rho",
            Experiment::Field(_) => "field",
            Experiment::Fbm(_) => "fbm",
            Experiment::PartialSum(_) => "partial-sum",
            Experiment::Spectral(_) => "spectral",
        }
    }

    pub fn t_grid(&self) -> &[f64] {
        match self {
            Experiment::Eta(c) => &c.t_grid,
            Experiment::Rho(c) => &c.t_grid,
            Experiment::Field(c) => &c.t_grid,
            Experiment::Fbm(c) => &c.t_grid,
            Experiment::PartialSum(c) => &c.t_grid,
            Experiment::Spectral(c) => &c.t_grid,
        }
    }

    /// Self-similarity index of the limit the experiment targets.
    pub fn hurst(&self) -> f64 {
        match self {
            Experiment::Eta(c) => c.hurst(),
            Experiment::Rho(c) => c.hurst(),
            Experiment::Field(c) => c.hurst(),
            Experiment::Fbm(c) => c.hurst,
            Experiment::PartialSum(c) => c.hurst,
            Experiment::Spectral(c) => spectral_hurst(&c.exponents),
        }
    }

    pub fn is_particle(&self) -> bool {
        matches!(self, Experiment::Eta(_) | Experiment::Rho(_) | Experiment::Field(_))
    }

    pub fn validate(&self) -> hpl_core::error::Result<()> {
        match self {
            Experiment::Eta(c) => EtaPlan::new(c).map(|_| ()),
            Experiment::Rho(c) => RhoPlan::new(c).map(|_| ()),
            Experiment::Field(c) => FieldPlan::new(c).map(|_| ()),
            Experiment::Fbm(c) => {
                target_covariance(c.hurst, 0.0, 0.0)?;
                check_grid(&c.t_grid)
            }
            Experiment::PartialSum(c) => c.validate(),
            Experiment::Spectral(c) => {
                SpectralGrid::new(c.cutoff, c.bin_width)?;
                check_grid(&c.t_grid)?;
                let k = c.exponents.len();
                if k == 0 || k > 3 {
                    return Err(hpl_core::error::Error::InvalidArgument(format!(
                        "spectral sampling needs 1 to 3 exponents, got {k}"
                    )));
                }
                if c.exponents.iter().any(|&a| !(a > 0.0 && a < 1.0)) || c.exponents.iter().sum::<f64>() <= k as f64 - 1.0 {
                    return Err(hpl_core::error::Error::InvalidArgument(
                        "spectral exponents must lie in (0, 1) and sum to more than k - 1".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Builds the per-replica sampler once; plans and caches are shared.
    pub fn sampler(&self) -> hpl_core::error::Result<Sampler> {
        Ok(match self.clone() {
            Experiment::Eta(c) => {
                let plan = EtaPlan::new(&c)?;
                Box::new(move |r, rng| Ok(plan.sample(r, rng)?.values))
            }
            Experiment::Rho(c) => {
                let plan = RhoPlan::new(&c)?;
                Box::new(move |r, rng| Ok(plan.sample(r, rng)?.values))
            }
            Experiment::Field(c) => {
                let plan = FieldPlan::new(&c)?;
                Box::new(move |r, rng| Ok(plan.sample(r, rng)?.values))
            }
            Experiment::Fbm(c) => Box::new(move |_, rng| fbm_sample(c.hurst, &c.t_grid, rng)),
            Experiment::PartialSum(c) => Box::new(move |_, rng| hermite_partial_sum(&c, rng)),
            Experiment::Spectral(c) => {
                let grid = SpectralGrid::new(c.cutoff, c.bin_width)?;
                Box::new(move |_, rng| Ok(spectral_hermite_sample(&c.exponents, &c.t_grid, &grid, rng)?.values))
            }
        })
    }

    pub fn simulate(&self, replicas: usize, seed: u64) -> hpl_core::error::Result<ReplicaEnsemble> {
        let sampler = self.sampler()?;
        ReplicaEnsemble::simulate(self.t_grid().to_vec(), replicas, seed, sampler)
    }

    /// Quantities worth recording next to the output.
    pub fn derived(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut m = serde_json::Map::new();
        m.insert("target_hurst".into(), self.hurst().into());
        match self {
            Experiment::Eta(c) => {
                if let Ok(plan) = EtaPlan::new(c) {
                    m.insert("gamma".into(), c.gamma().into());
                    m.insert("reach".into(), plan.reach().into());
                    if let Some((lo, hi)) = plan.region() {
                        m.insert("visitor_region".into(), serde_json::json!([lo, hi]));
                    }
                }
            }
            Experiment::Rho(c) => {
                if let Ok(plan) = RhoPlan::new(c) {
                    if let Some((lo, hi)) = plan.region() {
                        m.insert("visitor_region".into(), serde_json::json!([lo, hi]));
                    }
                }
            }
            Experiment::PartialSum(c) => {
                m.insert("d".into(), c.d().into());
            }
            _ => {}
        }
        m
    }

    /// Applies one rung of a convergence ladder.
    pub fn with_rung(&self, rung: &Rung) -> Result<Experiment, String> {
        let mut e = self.clone();
        let bad = |what: &str| Err(format!("a {what} ladder does not apply to `{}` experiments", self.name()));
        match &mut e {
            Experiment::Eta(c) => {
                c.horizon = rung.horizon;
                if let Some(v) = rung.eps {
                    c.eps = v;
                }
                if let Some(v) = rung.delta {
                    c.delta = v;
                }
                if let Some(v) = rung.kappa {
                    c.kappa = v;
                }
                if let Some(v) = rung.step {
                    c.step = v;
                }
            }
            Experiment::Rho(c) => {
                c.horizon = rung.horizon;
                if rung.delta.is_some() {
                    return bad("delta");
                }
                if let Some(v) = rung.eps {
                    c.eps = v;
                }
                if let Some(v) = rung.kappa {
                    c.kappa = v;
                }
                if let Some(v) = rung.step {
                    c.step = v;
                }
            }
            Experiment::Field(c) => {
                c.horizon = rung.horizon;
                if rung.eps.is_some() {
                    return bad("eps");
                }
                if rung.delta.is_some() {
                    return bad("delta");
                }
                if let Some(v) = rung.kappa {
                    c.kappa = v;
                }
                if let Some(v) = rung.step {
                    c.step = v;
                }
            }
            _ => return Err(format!("`{}` experiments have no horizon to refine", self.name())),
        }
        Ok(e)
    }
}

fn check_grid(t_grid: &[f64]) -> hpl_core::error::Result<()> {
    if t_grid.is_empty() {
        return Err(hpl_core::error::Error::InvalidArgument("the evaluation grid is empty".into()));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(hpl_core::error::Error::InvalidArgument(
            "evaluation times must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

/// Tolerance checks run by `verify` and on every convergence rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// Divide by the standard deviation at t = 1 before comparing shapes.
    #[serde(default = "yes")]
    pub normalize: bool,
    /// Largest allowed relative error of any covariance entry against `R`.
    pub cov_rel_tol: Option<f64>,
    /// Largest allowed `|estimate - R| / SE` over covariance entries.
    pub cov_z_tol: Option<f64>,
    /// Correlation at this pair of times is compared with the fBm value.
    #[serde(default = "default_pair")]
    pub corr_pair: [f64; 2],
    pub corr_rel_tol: Option<f64>,
    /// Largest allowed `|Ĥ - H|`.
    pub hurst_tol: Option<f64>,
    /// Times used by the variance regression; all positive grid times if absent.
    pub hurst_times: Option<Vec<f64>>,
    /// The energy test against the reference passes when `p > energy_min_p`.
    pub energy_min_p: Option<f64>,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    /// Require skewness at t = 1 above two standard errors.
    #[serde(default)]
    pub positive_skew: bool,
}

fn yes() -> bool {
    true
}

fn default_pair() -> [f64; 2] {
    [0.5, 1.0]
}

fn default_permutations() -> usize {
    999
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            normalize: true,
            cov_rel_tol: None,
            cov_z_tol: None,
            corr_pair: default_pair(),
            corr_rel_tol: None,
            hurst_tol: None,
            hurst_times: None,
            energy_min_p: None,
            permutations: default_permutations(),
            positive_skew: false,
        }
    }
}

impl Checks {
    fn validate(&self, has_reference: bool, errors: &mut Vec<String>) {
        for (name, v) in [
            ("cov_rel_tol", self.cov_rel_tol),
            ("cov_z_tol", self.cov_z_tol),
            ("corr_rel_tol", self.corr_rel_tol),
            ("hurst_tol", self.hurst_tol),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    errors.push(format!("checks.{name} must be non-negative, got {v}"));
                }
            }
        }
        if let Some(p) = self.energy_min_p {
            if !(0.0..1.0).contains(&p) {
                errors.push(format!("checks.energy_min_p must lie in [0, 1), got {p}"));
            }
            if !has_reference {
                errors.push("checks.energy_min_p needs a reference ensemble".into());
            }
            if self.permutations == 0 {
                errors.push("checks.permutations must be positive".into());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub ensemble: PathBuf,
    pub reference: Option<PathBuf>,
    /// Hurst index of the target; defaults to the one recorded in the
    /// ensemble's metadata sidecar.
    pub target_hurst: Option<f64>,
    #[serde(default)]
    pub checks: Checks,
}

/// Which number summarizes the distance of a rung from its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discrepancy {
    /// Relative error of the normalized correlation at `corr_pair`.
    Correlation,
    /// Energy statistic against the reference ensemble.
    Energy,
    /// `|Ĥ - H|`.
    Hurst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub base: Experiment,
    pub horizons: Vec<f64>,
    pub eps: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub kappa: Option<Vec<f64>>,
    pub step: Option<Vec<f64>>,
    pub reference: Option<Experiment>,
    pub reference_replicas: Option<usize>,
    pub target_hurst: Option<f64>,
    pub discrepancy: Option<Discrepancy>,
    #[serde(default)]
    pub checks: Checks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub horizon: f64,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub step: Option<f64>,
}

impl ConvergenceConfig {
    pub fn rungs(&self) -> Result<Vec<Rung>, Vec<String>> {
        let n = self.horizons.len();
        let mut errors = Vec::new();
        if n == 0 {
            errors.push("convergence.horizons is empty".into());
        }
        let pick = |name: &str, v: &Option<Vec<f64>>, errors: &mut Vec<String>| -> Vec<Option<f64>> {
            match v {
                None => vec![None; n],
                Some(v) if v.len() == n => v.iter().map(|x| Some(*x)).collect(),
                Some(v) => {
                    errors.push(format!("convergence.{name} has {} entries but there are {n} horizons", v.len()));
                    vec![None; n]
                }
            }
        };
        let eps = pick("eps", &self.eps, &mut errors);
        let delta = pick("delta", &self.delta, &mut errors);
        let kappa = pick("kappa", &self.kappa, &mut errors);
        let step = pick("step", &self.step, &mut errors);
        let rungs: Vec<Rung> = (0..n)
            .map(|i| Rung {
                horizon: self.horizons[i],
                eps: eps[i],
                delta: delta[i],
                kappa: kappa[i],
                step: step[i],
            })
            .collect();
        for i in 0..n {
            for j in 0..i {
                if rungs[i] == rungs[j] {
                    errors.push(format!("convergence rungs {j} and {i} are identical"));
                }
            }
        }
        if errors.is_empty() {
            Ok(rungs)
        } else {
            Err(errors)
        }
    }

    pub fn discrepancy(&self) -> Discrepancy {
        self.discrepancy.unwrap_or(if self.reference.is_some() {
            Discrepancy::Energy
        } else {
            Discrepancy::Correlation
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub ensembles: Vec<PathBuf>,
}

/// Everything a run needs. Command-line flags override file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub out: Option<PathBuf>,
    pub simulate: Option<Experiment>,
    pub verify: Option<VerifyConfig>,
    pub convergence: Option<ConvergenceConfig>,
    pub report: Option<ReportConfig>,
}

impl RunConfig {
    /// Reads TOML, or the `config` stored in a `.json` metadata sidecar.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if path.extension().is_some_and(|e| e == "json") {
            let meta: RunMetadata = read_json(path).map_err(|e| CliError::Config(vec![e.to_string()]))?;
            return serde_json::from_value(meta.config)
                .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        toml::from_str(&text).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config(vec!["a seed is required (--seed or `seed` in the config)".into()]))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("hpl-out"))
    }

    fn replicas_or(&self, errors: &mut Vec<String>) -> usize {
        match self.replicas {
            Some(r) if r >= 3 => r,
            Some(r) => {
                errors.push(format!("replicas must be at least 3, got {r}"));
                0
            }
            None => {
                errors.push("replicas is required (--replicas or `replicas` in the config)".into());
                0
            }
        }
    }

    fn check_seed(&self, errors: &mut Vec<String>) {
        if self.seed.is_none() {
            errors.push("a seed is required (--seed or `seed` in the config)".into());
        }
    }

    pub fn validate_simulate(&self) -> Result<(&Experiment, usize), CliError> {
        let mut errors = Vec::new();
        self.check_seed(&mut errors);
        let replicas = self.replicas_or(&mut errors);
        let exp = match &self.simulate {
            Some(e) => {
                if let Err(err) = e.validate() {
                    errors.push(format!("simulate ({}): {err}", e.name()));
                }
                Some(e)
            }
            None => {
                errors.push("missing [simulate] section".into());
                None
            }
        };
        match (exp, errors.is_empty()) {
            (Some(e), true) => Ok((e, replicas)),
            _ => Err(CliError::Config(errors)),
        }
    }

    pub fn validate_verify(&self) -> Result<&VerifyConfig, CliError> {
        let mut errors = Vec::new();
        self.check_seed(&mut errors);
        let Some(v) = &self.verify else {
            errors.push("missing [verify] section".into());
            return Err(CliError::Config(errors));
        };
        v.checks.validate(v.reference.is_some(), &mut errors);
        if errors.is_empty() {
            Ok(v)
        } else {
            Err(CliError::Config(errors))
        }
    }

    pub fn validate_convergence(&self) -> Result<(&ConvergenceConfig, Vec<Experiment>, usize), CliError> {
        let mut errors = Vec::new();
        self.check_seed(&mut errors);
        let replicas = self.replicas_or(&mut errors);
        let Some(c) = &self.convergence else {
            errors.push("missing [convergence] section".into());
            return Err(CliError::Config(errors));
        };
        if !c.base.is_particle() {
            errors.push(format!(
                "convergence.base must be an eta, rho or field experiment, got `{}`",
                c.base.name()
            ));
        }
        let mut experiments = Vec::new();
        match c.rungs() {
            Ok(rungs) => {
                for (i, r) in rungs.iter().enumerate() {
                    match c.base.with_rung(r) {
                        Ok(e) => {
                            if let Err(err) = e.validate() {
                                errors.push(format!("rung {i} (T = {}): {err}", r.horizon));
                            }
                            experiments.push(e);
                        }
                        Err(msg) => errors.push(format!("rung {i}: {msg}")),
                    }
                }
            }
            Err(mut e) => errors.append(&mut e),
        }
        if let Some(r) = &c.reference {
            if let Err(e) = r.validate() {
                errors.push(format!("convergence.reference: {e}"));
            }
            if r.t_grid() != c.base.t_grid() {
                errors.push("convergence.reference must use the same t_grid as the base experiment".into());
            }
        }
        if c.reference_replicas.is_some_and(|r| r < 3) {
            errors.push("convergence.reference_replicas must be at least 3".into());
        }
        if c.discrepancy() == Discrepancy::Energy && c.reference.is_none() {
            errors.push("the energy discrepancy needs convergence.reference".into());
        }
        c.checks.validate(c.reference.is_some(), &mut errors);
        if errors.is_empty() {
            Ok((c, experiments, replicas))
        } else {
            Err(CliError::Config(errors))
        }
    }
}
