//! Report writers: compact single-line JSON with a stable field order
//! and one isolated metadata block, CSV with 17 significant digits, and
//! atomic create (temp file + rename) for every artifact.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use fracgreen_core::fundamental::{DecayFit, ScalingRow, StageReport};
use fracgreen_core::grid::{DiscreteField, Grid};
use fracgreen_core::Real;

use crate::CliError;

/// Version stamp recorded in every JSON artifact; bump on any change to
/// the emitted shape. Matching schemas live in schemas/.
pub const SCHEMA_VERSION: &str = "1.0.0";

/// The one nondeterministic block in any report.
#[derive(Debug, Serialize)]
pub struct Meta {
    pub created_at: String,
    pub seed: u64,
    pub config: String,
}

impl Meta {
    pub fn new(seed: u64, config: &Path) -> Self {
        Self {
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true),
            seed,
            config: config.display().to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GridInfo {
    pub n: usize,
    pub r_ball: Real,
    pub n_side: usize,
    pub h: Real,
    pub n_active: usize,
}

impl GridInfo {
    pub fn of(grid: &Grid<Real>) -> Self {
        Self {
            n: grid.n(),
            r_ball: grid.r_ball(),
            n_side: grid.n_side(),
            h: grid.h(),
            n_active: grid.n_active(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SolveResultInfo {
    pub iterations: usize,
    pub final_residual: Real,
    pub energy_value: Real,
    pub laxmilgram_ratio: Option<Real>,
    pub norms: fracgreen_core::variational::NormReport<Real>,
}

#[derive(Debug, Serialize)]
pub struct SolveReportFile {
    pub schema_version: String,
    pub kind: String,
    pub meta: Meta,
    pub kernel: fracgreen_core::kernel::Kernel<Real>,
    pub grid: GridInfo,
    pub result: SolveResultInfo,
}

#[derive(Debug, Serialize)]
pub struct FundamentalReportFile {
    pub schema_version: String,
    pub kind: String,
    pub meta: Meta,
    pub kernel: fracgreen_core::kernel::Kernel<Real>,
    pub stages: Vec<StageReport<Real>>,
    pub cauchy_gaps: Vec<Real>,
    pub decay_fit: Option<DecayFit<Real>>,
    pub pointwise_bound_constant: Option<Real>,
    /// Stage index that failed, when the run ended early.
    pub failed_stage: Option<usize>,
    pub error: Option<String>,
    pub final_field: Option<FieldDump>,
}

#[derive(Debug, Serialize)]
pub struct FieldDump {
    pub n_side: usize,
    pub r_ball: Real,
    pub values: Vec<Real>,
}

impl FieldDump {
    pub fn of(field: &DiscreteField<Real>) -> Self {
        Self {
            n_side: field.grid().n_side(),
            r_ball: field.grid().r_ball(),
            values: field.values().to_vec(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifySummaryFile {
    pub schema_version: String,
    pub kind: String,
    pub meta: Meta,
    pub suite: String,
    pub checks: Vec<crate::suites::CheckResult>,
    pub all_pass: bool,
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("cannot create output dir {}: {e}", dir.display())))
}

/// Writes bytes to `dir/name` atomically: temp file in the same
/// directory, then rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let final_path = dir.join(name);
    let tmp_path = dir.join(format!(".{name}.tmp"));
    let io_err = |e: std::io::Error| {
        CliError::config(format!("cannot write {}: {e}", final_path.display()))
    };
    let mut f = std::fs::File::create(&tmp_path).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    drop(f);
    std::fs::rename(&tmp_path, &final_path).map_err(io_err)?;
    Ok(final_path)
}

/// Compact single-line JSON plus trailing newline; serde struct order
/// gives the stable key ordering.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string(value)
        .map_err(|e| CliError::config(format!("cannot serialize {name}: {e}")))?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

/// 17 significant digits, enough to round-trip every f64.
pub fn fmt(v: Real) -> String {
    format!("{v:.16e}")
}

pub fn write_solution_csv(
    dir: &Path,
    name: &str,
    field: &DiscreteField<Real>,
) -> Result<PathBuf, CliError> {
    let grid = field.grid();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: &[&str] = if grid.n() == 2 {
        &["x", "y", "value"]
    } else {
        &["x", "y", "z", "value"]
    };
    w.write_record(header).map_err(csv_err(name))?;
    for a in 0..grid.n_active() {
        let x = grid.active_coords(a);
        let mut row: Vec<String> = x[..grid.n()].iter().map(|&c| fmt(c)).collect();
        row.push(fmt(field.at(a)));
        w.write_record(&row).map_err(csv_err(name))?;
    }
    finish_csv(dir, name, w)
}

pub fn write_residual_history_csv(
    dir: &Path,
    name: &str,
    history: &[f64],
) -> Result<PathBuf, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "residual"]).map_err(csv_err(name))?;
    for (i, r) in history.iter().enumerate() {
        w.write_record([i.to_string(), fmt(*r)]).map_err(csv_err(name))?;
    }
    finish_csv(dir, name, w)
}

/// Shell table of the decay fit: geometric radius, geometric mean value,
/// node count.
pub fn write_radial_profile_csv(
    dir: &Path,
    name: &str,
    fit: &DecayFit<Real>,
) -> Result<PathBuf, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r_geometric", "mean_value", "node_count"])
        .map_err(csv_err(name))?;
    for &(r, v, count) in &fit.shells {
        w.write_record([fmt(r), fmt(v), count.to_string()])
            .map_err(csv_err(name))?;
    }
    finish_csv(dir, name, w)
}

/// Localized scaling table: one row per (center, radius).
pub fn write_scaling_csv(
    dir: &Path,
    name: &str,
    rows: &[ScalingRow<Real>],
) -> Result<PathBuf, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "center_x",
        "center_y",
        "center_z",
        "radius",
        "lp_norm",
        "l1_v_mass",
        "wgamma_seminorm",
        "pointwise_constant",
    ])
    .map_err(csv_err(name))?;
    for row in rows {
        w.write_record([
            fmt(row.center[0]),
            fmt(row.center[1]),
            fmt(row.center[2]),
            fmt(row.radius),
            fmt(row.lp),
            fmt(row.l1_v),
            fmt(row.wgamma),
            fmt(row.pointwise),
        ])
        .map_err(csv_err(name))?;
    }
    finish_csv(dir, name, w)
}

fn csv_err(name: &str) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::config(format!("cannot build {name}: {e}"))
}

fn finish_csv(dir: &Path, name: &str, w: csv::Writer<Vec<u8>>) -> Result<PathBuf, CliError> {
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::config(format!("cannot build {name}: {e}")))?;
    write_atomic(dir, name, &bytes)
}
