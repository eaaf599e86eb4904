//! Argument parsing and process-level plumbing.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "plab", version, about = "Numerical checks for state-constrained optimal control problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List built-in problems and problem files under $PLAB_CATALOG_DIR.
    Catalog(CatalogArgs),
    /// Integrate a control and report the endpoint and the dynamics residual.
    Simulate(SimulateArgs),
    /// Run the penalized reduction on a candidate (nonsingular or singular case).
    Reduce(ReduceArgs),
    /// Extract multipliers and check the maximum principle.
    CertifyMp(CertifyMpArgs),
    /// Check the second-order condition along direction files.
    CertifySoc(CertifySocArgs),
    /// Convergence of chattering controls to the relaxed trajectory.
    Chatter(ChatterArgs),
    /// Distance-to-solution bound on randomly perturbed curves.
    Regularity(RegularityArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CatalogArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Catalog name, problem file, or `<name>.json` under $PLAB_CATALOG_DIR.
    #[arg(long)]
    pub problem: String,
    /// Parameter override `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Number of grid intervals (default 200; a control file brings its own grid).
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-direction and per-sample work; output does not depend on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    /// Add wall-clock timing to the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CandidateArgs {
    /// Trajectory CSV whose control (and initial state) define the candidate.
    #[arg(long, conflicts_with = "constant_control")]
    pub control: Option<PathBuf>,
    /// Constant control `u1,u2,..` on a uniform grid.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    pub constant_control: Option<Vector>,
    /// Initial state `x1,x2,..` overriding the problem's candidate.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    pub x0: Option<Vector>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub candidate: CandidateArgs,
    /// Write the integrated trajectory (CSV plus sidecar).
    #[arg(long)]
    pub save_trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub candidate: CandidateArgs,
    /// Constant reference controls `u_i` for the relaxation; repeatable.
    #[arg(long = "reference", value_parser = parse_vector, allow_hyphen_values = true)]
    pub references: Vec<Vector>,
    /// Penalty weights tried in order, comma separated (default 1, 1/2, .., 1/1024).
    #[arg(long, value_parser = parse_vector)]
    pub lambda_grid: Option<Vector>,
    #[arg(long, default_value_t = 1e-7, value_parser = parse_positive)]
    pub tol_alt: f64,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_positive)]
    pub tol_feas: f64,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_positive)]
    pub tol_dyn: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Write the minimizer (or the last Ekeland anchor).
    #[arg(long)]
    pub save_trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MultiplierArgs {
    /// Lattice points per control coordinate for comparison controls.
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u64).range(2..))]
    pub per_axis: u64,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_positive)]
    pub tol_active: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyMpArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub candidate: CandidateArgs,
    #[command(flatten)]
    pub multipliers: MultiplierArgs,
    #[arg(long, default_value_t = 1e-8, value_parser = parse_positive)]
    pub tol_residual: f64,
    #[arg(long, default_value_t = 1e-8, value_parser = parse_positive)]
    pub tol_gap: f64,
    /// Exhaustive lattice step for the Hamiltonian supremum over box control sets.
    #[arg(long, default_value_t = 1e-3, value_parser = parse_positive)]
    pub sup_step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CertifySocArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub candidate: CandidateArgs,
    #[command(flatten)]
    pub multipliers: MultiplierArgs,
    /// Direction file; repeatable.
    #[arg(long = "direction", required = true)]
    pub directions: Vec<PathBuf>,
    #[arg(long, default_value_t = 1e-5, value_parser = parse_positive)]
    pub tol_soc: f64,
    #[arg(long, default_value_t = 1e-8, value_parser = parse_positive)]
    pub tol_cone: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ChatterArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub candidate: CandidateArgs,
    /// Constant reference controls; default is the upper corner of a box U.
    #[arg(long = "reference", value_parser = parse_vector, allow_hyphen_values = true)]
    pub references: Vec<Vector>,
    /// Weights, one per reference (default: the problem's `alpha`, else 0.5).
    #[arg(long, value_parser = parse_vector)]
    pub alpha: Option<Vector>,
    /// Numbers of switching pieces.
    #[arg(long, value_parser = parse_counts, default_value = "10,100,1000")]
    pub s: Counts,
}

#[derive(Debug, Clone, Args)]
pub struct RegularityArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub candidate: CandidateArgs,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub eps0: f64,
    /// Sup-norm size of the state perturbation (default 0.1·eps0).
    #[arg(long, value_parser = parse_nonnegative)]
    pub amplitude: Option<f64>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok((k.trim().to_string(), v))
}

fn parse_grid(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if n < 2 {
        return Err("the grid needs at least 2 intervals".into());
    }
    Ok(n)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("must be positive, got {s}"));
    }
    Ok(v)
}

fn parse_nonnegative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("must be nonnegative, got {s}"));
    }
    Ok(v)
}

/// Comma-separated list of finite numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

/// Comma-separated list of positive integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts(pub Vec<usize>);

fn parse_vector(s: &str) -> Result<Vector, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("`{p}` is not a finite number")))
        .collect::<Result<_, _>>()
        .map(Vector)
}

fn parse_counts(s: &str) -> Result<Counts, String> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().ok().filter(|v| *v >= 1).ok_or_else(|| format!("`{p}` is not a positive integer")))
        .collect::<Result<_, _>>()
        .map(Counts)
}

/// Runs the CLI and returns the process exit code: 0 pass, 1 runtime failure
/// or negative verdict, 2 usage error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match commands::execute(&cli.command) {
        Ok((report, out)) => {
            let text = report.to_json();
            let written = match out {
                Some(path) => std::fs::write(&path, text).map_err(CliError::io(path)),
                None => stdout.write_all(text.as_bytes()).map_err(CliError::io("<stdout>")),
            };
            match written {
                Ok(()) => report.exit_code,
                Err(e) => {
                    let _ = writeln!(stderr, "plab: error: {e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "plab: error: {e}");
            e.exit_code()
        }
    }
}
