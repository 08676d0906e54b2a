//! Sectioned TOML experiment configuration. Every mathematical
//! constraint is re-validated at parse time so a bad config fails before
//! any assembly starts, with the violated rule on stderr.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use fracgreen_core::fundamental::{DecayFitParams, ExhaustionSchedule, ScalingParams};
use fracgreen_core::kernel::{FractionalOrder, Kernel, Potential};
use fracgreen_core::solve::{Preconditioner, SolveConfig};
use fracgreen_core::Real;

use crate::CliError;

/// Production lattice floor for configured runs; tiny grids below this
/// are reserved for the in-crate exactness tests.
pub const MIN_CONFIG_N_SIDE: usize = 8;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub rhs: Option<RhsSection>,
    pub fundamental: Option<FundamentalSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub rng: RngSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub s: Real,
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "one")]
    pub lambda: Real,
    #[serde(rename = "Lambda")]
    pub lambda_upper: Option<Real>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    #[serde(rename = "R")]
    pub r_ball: Option<Real>,
    #[serde(rename = "N_side")]
    pub n_side: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// zero | constant | inverse_power | tabulated.
    pub kind: Option<String>,
    pub value: Option<Real>,
    pub beta: Option<Real>,
    /// Declared integrability exponent; required for nonzero kinds.
    pub q: Option<Real>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tolerance")]
    pub tolerance: Real,
    pub max_iterations: Option<usize>,
    #[serde(default = "default_preconditioner")]
    pub preconditioner: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iterations: None,
            preconditioner: default_preconditioner(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsSection {
    /// mollifier | constant_ball | tabulated.
    pub kind: String,
    pub l: Option<Real>,
    pub value: Option<Real>,
    pub radius: Option<Real>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundamentalSection {
    pub radii: Vec<Real>,
    pub scales: Vec<Real>,
    pub h: Real,
    pub fit_window: [Real; 2],
    #[serde(default = "default_shells")]
    pub n_shells: usize,
    #[serde(default = "one")]
    pub p: Real,
    pub gamma: Option<Real>,
    #[serde(default = "default_diag_radii")]
    pub diagnostic_radii: Vec<Real>,
    pub diagnostic_centers: Option<Vec<Vec<Real>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngSection {
    pub seed: u64,
}

fn default_family() -> String {
    "pure".into()
}

fn one() -> Real {
    1.0
}

fn default_tolerance() -> Real {
    1e-10
}

fn default_preconditioner() -> String {
    "diagonal".into()
}

fn default_shells() -> usize {
    8
}

fn default_diag_radii() -> Vec<Real> {
    vec![0.5, 1.0, 2.0]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        cfg.order()?;
        cfg.kernel()?;
        cfg.solve_config()?;
        if cfg.potential_kind() != "zero" {
            cfg.potential()?;
        }
        Ok(cfg)
    }

    pub fn order(&self) -> Result<FractionalOrder<Real>, CliError> {
        FractionalOrder::new(self.grid.n, self.kernel.s).map_err(CliError::from_core)
    }

    pub fn kernel(&self) -> Result<Kernel<Real>, CliError> {
        let order = self.order()?;
        match self.kernel.family.as_str() {
            "pure" => Kernel::pure_fractional(order).map_err(CliError::from_core),
            "modulated" => {
                let upper = self.kernel.lambda_upper.ok_or_else(|| {
                    CliError::config("modulated kernel requires the Lambda upper bound")
                })?;
                Kernel::modulated(order, self.kernel.lambda, upper).map_err(CliError::from_core)
            }
            other => Err(CliError::config(format!(
                "kernel family must be \"pure\" or \"modulated\", got \"{other}\""
            ))),
        }
    }

    fn potential_kind(&self) -> &str {
        self.potential.kind.as_deref().unwrap_or("zero")
    }

    pub fn potential(&self) -> Result<Potential<Real>, CliError> {
        let require_q = || {
            self.potential.q.ok_or_else(|| {
                CliError::config(
                    "nonzero potentials require the declared integrability exponent q",
                )
            })
        };
        let potential = match self.potential_kind() {
            "zero" => Potential::zero(),
            "constant" => {
                let value = self.potential.value.ok_or_else(|| {
                    CliError::config("constant potential requires value")
                })?;
                Potential::constant(value, require_q()?).map_err(CliError::from_core)?
            }
            "inverse_power" => {
                let beta = self.potential.beta.ok_or_else(|| {
                    CliError::config("inverse_power potential requires beta")
                })?;
                Potential::inverse_power(beta, require_q()?).map_err(CliError::from_core)?
            }
            "tabulated" => {
                let path = self.potential.path.as_ref().ok_or_else(|| {
                    CliError::config("tabulated potential requires path")
                })?;
                let values = read_value_column(path)?;
                Potential::tabulated(values, require_q()?).map_err(CliError::from_core)?
            }
            other => {
                return Err(CliError::config(format!(
                    "potential kind must be zero|constant|inverse_power|tabulated, got \"{other}\""
                )))
            }
        };
        if !potential.is_zero() {
            potential
                .validate_against(&self.order()?)
                .map_err(CliError::from_core)?;
        }
        Ok(potential)
    }

    pub fn solve_config(&self) -> Result<SolveConfig<Real>, CliError> {
        let preconditioner = match self.solver.preconditioner.as_str() {
            "none" => Preconditioner::None,
            "diagonal" => Preconditioner::Diagonal,
            other => {
                return Err(CliError::config(format!(
                    "preconditioner must be \"none\" or \"diagonal\", got \"{other}\""
                )))
            }
        };
        let cfg = SolveConfig {
            cg_tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            preconditioner,
        };
        cfg.validate().map_err(CliError::from_core)?;
        Ok(cfg)
    }

    /// Ball radius and lattice side for single-domain commands.
    pub fn domain(&self) -> Result<(Real, usize), CliError> {
        let r = self.grid.r_ball.ok_or_else(|| {
            CliError::config("this command requires grid.R (ball radius)")
        })?;
        let n_side = self.grid.n_side.ok_or_else(|| {
            CliError::config("this command requires grid.N_side (lattice side)")
        })?;
        if n_side < MIN_CONFIG_N_SIDE {
            return Err(CliError::config(format!(
                "grid.N_side must be at least {MIN_CONFIG_N_SIDE} for configured runs, got {n_side}"
            )));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(CliError::config(format!(
                "grid.R must be positive and finite, got {r}"
            )));
        }
        Ok((r, n_side))
    }

    pub fn schedule(&self) -> Result<ExhaustionSchedule<Real>, CliError> {
        let f = self.fundamental_section()?;
        let schedule = ExhaustionSchedule {
            radii: f.radii.clone(),
            scales: f.scales.clone(),
            h: f.h,
        };
        schedule.validate().map_err(CliError::from_core)?;
        // The mollifier resolution rule h <= 1/(4l), surfaced at parse
        // time instead of stage k.
        for &l in &f.scales {
            if f.h * l > 0.25 {
                return Err(CliError::config(format!(
                    "schedule violates the resolution rule h <= 1/(4l): h = {}, l = {l}",
                    f.h
                )));
            }
        }
        Ok(schedule)
    }

    pub fn fit_params(&self) -> Result<DecayFitParams<Real>, CliError> {
        let f = self.fundamental_section()?;
        let [lo, hi] = f.fit_window;
        if !(lo > 0.0 && hi > lo) {
            return Err(CliError::config(format!(
                "fit_window must satisfy 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        let a_max = f.radii.last().copied().unwrap_or(0.0);
        let l_last = f.scales.last().copied().unwrap_or(1.0);
        let floor = (3.0 / l_last).max(4.0 * f.h);
        if lo < floor {
            return Err(CliError::config(format!(
                "fit_window excludes the mollifier core and lattice layer: lo must be >= max(3/l, 4h) = {floor}, got {lo}"
            )));
        }
        if hi > 0.5 * a_max {
            return Err(CliError::config(format!(
                "fit_window excludes boundary truncation: hi must be <= R/2 = {}, got {hi}",
                0.5 * a_max
            )));
        }
        Ok(DecayFitParams {
            r_lo: lo,
            r_hi: hi,
            n_shells: f.n_shells,
        })
    }

    pub fn scaling_params(&self) -> Result<ScalingParams<Real>, CliError> {
        let f = self.fundamental_section()?;
        let order = self.order()?;
        let (n, s) = (order.n(), order.s());
        let gamma = f.gamma.unwrap_or(0.5 * s);
        if !(gamma > 0.0 && gamma < s) {
            return Err(CliError::config(format!(
                "diagnostic exponent gamma must lie in (0, s) = (0, {s}), got {gamma}"
            )));
        }
        let p_max = n as Real / order.decay_exponent();
        if !(f.p >= 1.0 && f.p < p_max) {
            return Err(CliError::config(format!(
                "diagnostic exponent p must lie in [1, n/(n-2s)) = [1, {p_max}), got {}",
                f.p
            )));
        }
        let w_p_max = n as Real / (n as Real - s);
        if f.p >= w_p_max {
            return Err(CliError::config(format!(
                "diagnostic exponent p must also satisfy p < n/(n-s) = {w_p_max} for the seminorm column, got {}",
                f.p
            )));
        }
        let centers = match &f.diagnostic_centers {
            None => vec![[0.0; 3]],
            Some(list) => {
                let mut out = Vec::with_capacity(list.len());
                for c in list {
                    if c.len() != n {
                        return Err(CliError::config(format!(
                            "diagnostic center {c:?} must have {n} coordinates"
                        )));
                    }
                    let mut arr = [0.0; 3];
                    arr[..n].copy_from_slice(c);
                    out.push(arr);
                }
                out
            }
        };
        if f.diagnostic_radii.iter().any(|&r| !(r > 0.0)) {
            return Err(CliError::config(
                "diagnostic radii must all be positive",
            ));
        }
        let scale = f.scales.last().copied().unwrap_or(1.0);
        Ok(ScalingParams {
            p: f.p,
            gamma,
            radii: f.diagnostic_radii.clone(),
            centers,
            mollifier_scale: scale,
        })
    }

    fn fundamental_section(&self) -> Result<&FundamentalSection, CliError> {
        self.fundamental.as_ref().ok_or_else(|| {
            CliError::config("this command requires the [fundamental] section")
        })
    }

    pub fn seed(&self) -> u64 {
        self.rng.seed
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.output.dir.as_deref()
    }
}

/// Reads a single-column CSV (header "value") used by tabulated
/// potentials and right-hand sides; one row per active node in node
/// order.
pub fn read_value_column(path: &Path) -> Result<Vec<Real>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::config(format!("bad CSV header in {}: {e}", path.display())))?;
    let col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| {
            CliError::config(format!("{} must have a \"value\" column", path.display()))
        })?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| CliError::config(format!("bad CSV row in {}: {e}", path.display())))?;
        let cell = record.get(col).ok_or_else(|| {
            CliError::config(format!("row {i} of {} is missing the value column", path.display()))
        })?;
        let v: Real = cell.parse().map_err(|e| {
            CliError::config(format!("row {i} of {}: {e}", path.display()))
        })?;
        out.push(v);
    }
    Ok(out)
}
