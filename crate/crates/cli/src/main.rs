//! Command line driver for the nonlocal Schrödinger toolbox.
//!
//! Three subcommands share one TOML experiment configuration:
//!
//! - `solve`: one Dirichlet problem on a ball, reported as
//!   `solve_report.json` plus `solution.csv`.
//! - `fundamental`: the exhaustion pipeline with decay diagnostics,
//!   reported as `fundamental_report.json`, `radial_profile.csv`, and
//!   `scaling_diagnostics.csv`.
//! - `verify <suite>`: a named invariant suite, reported as
//!   `verify_summary.json` with one stdout line per check.
//!
//! Exit codes: 0 on success, 1 for configuration or validation
//! problems, 2 for numerical failures (non-convergence, failed
//! verification checks, a failed pipeline stage). Runs are seeded and
//! deterministic: repeated runs produce byte-identical outputs apart
//! from the timestamp inside the `meta` block.

mod config;
mod io;
mod suites;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use fracgreen_core::fundamental::{run_exhaustion, scaling_diagnostics, Mollifier};
use fracgreen_core::grid::{DiscreteField, Grid};
use fracgreen_core::op::{sample_potential, AssembledOperator, AssemblyParams};
use fracgreen_core::solve::{weak_solve, SolveReport};
use fracgreen_core::{Error as CoreError, Real};

use config::{read_value_column, ExperimentConfig};
use io::{
    write_json, write_radial_profile_csv, write_residual_history_csv, write_scaling_csv,
    write_solution_csv, FieldDump, FundamentalReportFile, GridInfo, Meta, SolveReportFile,
    SolveResultInfo, VerifySummaryFile, SCHEMA_VERSION,
};

/// Process error carrying the exit-code contract: 1 for configuration
/// and validation problems, 2 for numerical failures.
#[derive(Debug)]
pub(crate) struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    /// Classifies a library error: invalid setup is a configuration
    /// error, a failed computation is a numerical one.
    pub(crate) fn from_core(err: CoreError) -> Self {
        let code = match &err {
            CoreError::Config(_)
            | CoreError::Precondition(_)
            | CoreError::Domain(_)
            | CoreError::KernelSingularAtOrigin => 1,
            CoreError::NonConvergence { .. }
            | CoreError::NotPositiveDefinite { .. }
            | CoreError::QuadratureNonConvergence { .. }
            | CoreError::DegenerateField { .. } => 2,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }

    /// Same classification with a context prefix on the message.
    pub(crate) fn from_core_with(context: impl Into<String>, err: CoreError) -> Self {
        let mut e = Self::from_core(err);
        e.message = format!("{}: {}", context.into(), e.message);
        e
    }

    pub(crate) fn code(&self) -> u8 {
        self.code
    }

    pub(crate) fn message(&self) -> &str {
        &self.message
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fracgreen",
    version,
    about = "Fundamental solutions of nonlocal Schrödinger operators on lattice balls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one Dirichlet problem L u + V u = f and write its report
    Solve(RunArgs),
    /// Run the exhaustion pipeline and fit the decay of the limit field
    Fundamental(RunArgs),
    /// Replay a named verification suite and write its summary
    Verify {
        /// Suite: multiplier, embedding, maxprinciple, comparison,
        /// plancherel, minimizer, decay, or all
        suite: String,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment configuration (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides FRACGREEN_OUT and the config
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// RNG seed; overrides the config
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Fundamental(args) => cmd_fundamental(args),
        Command::Verify { suite, args } => cmd_verify(suite, args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Loaded configuration plus the resolved output directory and seed.
///
/// Output directory precedence: `--out`, then `FRACGREEN_OUT`, then
/// `output.dir` in the config, then `fracgreen-out`. Seed precedence:
/// `--seed`, then `rng.seed` in the config (default 0).
struct RunContext {
    config: ExperimentConfig,
    config_path: PathBuf,
    out_dir: PathBuf,
    seed: u64,
}

impl RunContext {
    fn new(args: &RunArgs) -> Result<Self, CliError> {
        let config = ExperimentConfig::load(&args.config)?;
        let out_dir = args
            .out
            .clone()
            .or_else(|| std::env::var_os("FRACGREEN_OUT").map(PathBuf::from))
            .or_else(|| config.output_dir().map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from("fracgreen-out"));
        let seed = args.seed.unwrap_or_else(|| config.seed());
        Ok(Self {
            config,
            config_path: args.config.clone(),
            out_dir,
            seed,
        })
    }

    fn meta(&self) -> Meta {
        Meta::new(self.seed, &self.config_path)
    }
}

/// Builds the right-hand side field from the `[rhs]` section.
fn build_rhs(
    cfg: &ExperimentConfig,
    grid: &Arc<Grid<Real>>,
) -> Result<DiscreteField<Real>, CliError> {
    let section = cfg.rhs.as_ref().ok_or_else(|| {
        CliError::config(
            "solve requires an [rhs] section (kind = \"mollifier\" | \"constant_ball\" | \"tabulated\")",
        )
    })?;
    match section.kind.as_str() {
        "mollifier" => {
            let l = section
                .l
                .ok_or_else(|| CliError::config("rhs.kind = \"mollifier\" requires rhs.l"))?;
            let moll = Mollifier::new(grid.n(), l).map_err(CliError::from_core)?;
            moll.sample(Arc::clone(grid)).map_err(CliError::from_core)
        }
        "constant_ball" => {
            let value = section.value.ok_or_else(|| {
                CliError::config("rhs.kind = \"constant_ball\" requires rhs.value")
            })?;
            let radius = section.radius.unwrap_or_else(|| grid.r_ball());
            if radius <= 0.0 {
                return Err(CliError::config("rhs.radius must be positive"));
            }
            let r2 = radius * radius;
            let n = grid.n();
            Ok(DiscreteField::from_fn(Arc::clone(grid), move |x| {
                let d2: Real = x[..n].iter().map(|&c| c * c).sum();
                if d2 <= r2 {
                    value
                } else {
                    0.0
                }
            }))
        }
        "tabulated" => {
            let path = section
                .path
                .as_ref()
                .ok_or_else(|| CliError::config("rhs.kind = \"tabulated\" requires rhs.path"))?;
            let values = read_value_column(path)?;
            if values.len() != grid.n_active() {
                return Err(CliError::config(format!(
                    "tabulated rhs has {} values but the grid has {} active nodes",
                    values.len(),
                    grid.n_active()
                )));
            }
            DiscreteField::from_values(Arc::clone(grid), values).map_err(CliError::from_core)
        }
        other => Err(CliError::config(format!(
            "unknown rhs.kind \"{other}\"; expected mollifier, constant_ball, or tabulated"
        ))),
    }
}

fn cmd_solve(args: &RunArgs) -> Result<ExitCode, CliError> {
    let ctx = RunContext::new(args)?;
    let cfg = &ctx.config;
    let order = cfg.order()?;
    let (r, n_side) = cfg.domain()?;
    let grid = Grid::build(order.n(), r, n_side).map_err(CliError::from_core)?;
    let rhs = build_rhs(cfg, &grid)?;
    let solver = cfg.solve_config()?;
    let op = AssembledOperator::assemble(
        cfg.kernel()?,
        cfg.potential()?,
        Arc::clone(&grid),
        &AssemblyParams::default(),
    )
    .map_err(CliError::from_core)?;

    match weak_solve(&op, &rhs, &solver) {
        Ok(report) => {
            let SolveReport {
                solution,
                iterations,
                final_residual,
                energy_value,
                norm_report,
                laxmilgram_ratio,
            } = report;
            let file = SolveReportFile {
                schema_version: SCHEMA_VERSION.to_string(),
                kind: "solve_report".to_string(),
                meta: ctx.meta(),
                kernel: op.kernel().clone(),
                grid: GridInfo::of(&grid),
                result: SolveResultInfo {
                    iterations,
                    final_residual,
                    energy_value,
                    laxmilgram_ratio,
                    norms: norm_report,
                },
            };
            write_json(&ctx.out_dir, "solve_report.json", &file)?;
            write_solution_csv(&ctx.out_dir, "solution.csv", &solution)?;
            println!(
                "solve: converged in {iterations} iterations, residual {final_residual:.3e}, outputs in {}",
                ctx.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(CoreError::NonConvergence {
            iterations,
            final_residual,
            tolerance,
            history,
        }) => {
            write_residual_history_csv(&ctx.out_dir, "residual_history.csv", &history)?;
            Err(CliError::numerical(format!(
                "solver did not converge after {iterations} iterations \
                 (residual {final_residual:.3e} > tolerance {tolerance:.3e}); \
                 residual_history.csv written to {}",
                ctx.out_dir.display()
            )))
        }
        Err(err) => Err(CliError::from_core(err)),
    }
}

fn cmd_fundamental(args: &RunArgs) -> Result<ExitCode, CliError> {
    let ctx = RunContext::new(args)?;
    let cfg = &ctx.config;
    let kernel = cfg.kernel()?;
    let potential = cfg.potential()?;
    let schedule = cfg.schedule()?;
    let fit = cfg.fit_params()?;
    let solver = cfg.solve_config()?;

    match run_exhaustion(&kernel, &potential, &schedule, &solver, &fit) {
        Ok(report) => {
            for (k, stage) in report.stages.iter().enumerate() {
                println!(
                    "stage {k}: radius {:.3}, side {}, {} iterations, residual {:.3e}, min value {:.3e}",
                    stage.radius, stage.n_side, stage.iterations, stage.final_residual,
                    stage.min_value
                );
            }
            println!(
                "decay fit: slope {:.4}, r^2 {:.6}, pointwise constant {:.6}",
                report.decay_fit.slope, report.decay_fit.r_squared,
                report.pointwise_bound_constant
            );
            let file = FundamentalReportFile {
                schema_version: SCHEMA_VERSION.to_string(),
                kind: "fundamental_report".to_string(),
                meta: ctx.meta(),
                kernel: kernel.clone(),
                stages: report.stages.clone(),
                cauchy_gaps: report.cauchy_gaps.clone(),
                decay_fit: Some(report.decay_fit.clone()),
                pointwise_bound_constant: Some(report.pointwise_bound_constant),
                failed_stage: None,
                error: None,
                final_field: Some(FieldDump::of(&report.final_field)),
            };
            write_json(&ctx.out_dir, "fundamental_report.json", &file)?;
            write_radial_profile_csv(&ctx.out_dir, "radial_profile.csv", &report.decay_fit)?;
            let scaling = cfg.scaling_params()?;
            let v = sample_potential(&potential, report.final_field.grid())
                .map_err(CliError::from_core)?;
            let diag = scaling_diagnostics(&report.final_field, &v, kernel.order(), &scaling)
                .map_err(CliError::from_core)?;
            write_scaling_csv(&ctx.out_dir, "scaling_diagnostics.csv", &diag.rows)?;
            println!("fundamental: outputs in {}", ctx.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(failure) => {
            let file = FundamentalReportFile {
                schema_version: SCHEMA_VERSION.to_string(),
                kind: "fundamental_report".to_string(),
                meta: ctx.meta(),
                kernel: kernel.clone(),
                stages: failure.partial_stages.clone(),
                cauchy_gaps: Vec::new(),
                decay_fit: None,
                pointwise_bound_constant: None,
                failed_stage: Some(failure.stage),
                error: Some(failure.error.to_string()),
                final_field: None,
            };
            write_json(&ctx.out_dir, "fundamental_report.json", &file)?;
            Err(CliError::from_core_with(
                format!(
                    "exhaustion stage {} failed; partial report written to {}",
                    failure.stage,
                    ctx.out_dir.display()
                ),
                failure.error,
            ))
        }
    }
}

fn cmd_verify(suite: &str, args: &RunArgs) -> Result<ExitCode, CliError> {
    if !suites::SUITE_NAMES.contains(&suite) {
        return Err(CliError::config(format!(
            "unknown verify suite \"{suite}\"; valid suites: {}",
            suites::SUITE_NAMES.join(", ")
        )));
    }
    let ctx = RunContext::new(args)?;
    let checks = suites::run_suite(suite, &ctx.config, ctx.seed)?;
    let all_pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!(
            "{} {}: measured {:.6e} vs threshold {:.6e} ({})",
            if c.pass { "PASS" } else { "FAIL" },
            c.id,
            c.measured,
            c.threshold,
            c.description
        );
    }
    let file = VerifySummaryFile {
        schema_version: SCHEMA_VERSION.to_string(),
        kind: "verify_summary".to_string(),
        meta: ctx.meta(),
        suite: suite.to_string(),
        checks,
        all_pass,
    };
    write_json(&ctx.out_dir, "verify_summary.json", &file)?;
    if all_pass {
        println!("verify {suite}: all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verify {suite}: at least one check failed");
        Ok(ExitCode::from(2))
    }
}
