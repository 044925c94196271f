//! `psm`: constructions and verification suites for symplectic groupoids of
//! Poisson manifolds, with JSON reports and optional CSV output.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use psm_core::groupoid2d::BRANCH_SWITCH;
use psm_core::pathspace::DEFAULT_FLOW_STEPS;

#[derive(Debug, Parser)]
#[command(name = "psm", version, about = "Symplectic groupoids of Poisson manifolds")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    /// Also write the tabular part of the result as CSV to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Grid intervals N for discretized paths.
    #[arg(long = "intervals", short = 'N', global = true, default_value_t = 2000)]
    pub intervals: usize,
    /// RK4 steps for gauge flows.
    #[arg(long, global = true, default_value_t = DEFAULT_FLOW_STEPS)]
    pub steps: usize,
    /// |φ| below which h and ψ switch to their linearized form.
    #[arg(long, global = true, default_value_t = BRANCH_SWITCH)]
    pub switch: f64,
    /// Tolerance of the algebraic groupoid axioms.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,
    /// Domain rectangle X0,X1,Y0,Y1 of planar structures.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = rectangle)]
    pub domain: Option<[f64; 4]>,
    #[arg(long, global = true, default_value_t = 100)]
    pub samples: usize,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.intervals < 16 {
            bail!("--intervals must be at least 16, got {}", self.intervals);
        }
        if self.steps == 0 {
            bail!("--steps must be positive");
        }
        if !(self.switch > 0.0 && self.tol > 0.0) {
            bail!("tolerances must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form groupoid of a planar structure φ ∂₁∧∂₂.
    G2d(G2dArgs),
    /// Gauss-law solutions, gauge flows and invariants of paths.
    Flow(FlowArgs),
    /// The groupoid T*G over the dual of a Lie algebra.
    Lie(LieArgs),
    /// Rotation-invariant structures f(|x|) ε x on ℝ³.
    Radial(RadialArgs),
    /// Scalar expressions.
    Expr(ExprArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum G2dOp {
    Member,
    Mul,
    Inv,
    Left,
    Right,
    H,
    Psi,
    Xf,
    Verify,
}

#[derive(Debug, Args)]
pub struct G2dArgs {
    pub op: G2dOp,
    #[arg(long, default_value = "0")]
    pub phi: String,
    #[arg(long, allow_hyphen_values = true, value_parser = pair)]
    pub x: Option<[f64; 2]>,
    #[arg(long, allow_hyphen_values = true, value_parser = pair)]
    pub pi: Option<[f64; 2]>,
    #[arg(long, allow_hyphen_values = true, value_parser = pair)]
    pub x2: Option<[f64; 2]>,
    #[arg(long, allow_hyphen_values = true, value_parser = pair)]
    pub pi2: Option<[f64; 2]>,
    /// Half-width of the sampled x box for `verify`.
    #[arg(long, default_value_t = 2.0)]
    pub x_radius: f64,
    /// Half-width of the sampled π box for `verify`.
    #[arg(long, default_value_t = 2.0)]
    pub pi_radius: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FlowOp {
    Solve,
    Gauge,
    Invariants,
    Concat,
    Embed,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    pub op: FlowOp,
    /// phi2d:EXPR, radial:EXPR, constant:FILE, lie:FILE, su2, so3 or heisenberg3.
    #[arg(long)]
    pub structure: Option<String>,
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Second morphism for `concat`.
    #[arg(long = "in2", value_name = "FILE")]
    pub input2: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Initial point for `solve`.
    #[arg(long, allow_hyphen_values = true, value_parser = list)]
    pub x0: Option<Values>,
    /// `;`-separated components of η_u in the variable u, for `solve`.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<String>,
    /// `;`-separated components of β in x1..xn and u, for `gauge`.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Groupoid point for `embed` (planar).
    #[arg(long, allow_hyphen_values = true, value_parser = pair)]
    pub x: Option<[f64; 2]>,
    #[arg(long, allow_hyphen_values = true, value_parser = pair)]
    pub pi: Option<[f64; 2]>,
    /// Groupoid point for `embed` (Lie).
    #[arg(long, allow_hyphen_values = true, value_parser = list)]
    pub xi: Option<Values>,
    #[arg(long, allow_hyphen_values = true, value_parser = list)]
    pub g: Option<Values>,
    /// Reparametrize embedded paths so η vanishes at the ends.
    #[arg(long)]
    pub tapered: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LieOp {
    Roundtrip,
    Mul,
    Holonomy,
}

#[derive(Debug, Args)]
pub struct LieArgs {
    pub op: LieOp,
    /// su2, so3, heisenberg3 or a JSON file.
    #[arg(long, default_value = "su2")]
    pub spec: String,
    #[arg(long, allow_hyphen_values = true, value_parser = list)]
    pub xi: Option<Values>,
    /// Quaternion w,x,y,z for su2, row-major matrix entries otherwise.
    #[arg(long, allow_hyphen_values = true, value_parser = list)]
    pub g: Option<Values>,
    /// Defaults to r(ξ, g).
    #[arg(long, allow_hyphen_values = true, value_parser = list)]
    pub xi2: Option<Values>,
    #[arg(long, allow_hyphen_values = true, value_parser = list)]
    pub g2: Option<Values>,
    /// Constant η for `holonomy`.
    #[arg(long, allow_hyphen_values = true, value_parser = list)]
    pub eta: Option<Values>,
    /// Morphism file for `holonomy`.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub tapered: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RadialOp {
    Analyze,
}

#[derive(Debug, Args)]
pub struct RadialArgs {
    pub op: RadialOp,
    #[arg(long)]
    pub f: String,
    #[arg(long, value_parser = pair)]
    pub range: [f64; 2],
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExprOp {
    Eval,
    Diff,
}

#[derive(Debug, Args)]
pub struct ExprArgs {
    pub op: ExprOp,
    pub expr: String,
    /// Comma-separated variable names.
    #[arg(long, default_value = "x")]
    pub vars: String,
    #[arg(long, allow_hyphen_values = true, value_parser = list)]
    pub at: Option<Values>,
    #[arg(long)]
    pub wrt: Option<String>,
}

/// A comma-separated list of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Values(pub Vec<f64>);

fn numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

fn list(s: &str) -> Result<Values, String> {
    numbers(s).map(Values)
}

fn fixed<const K: usize>(s: &str) -> Result<[f64; K], String> {
    let v = numbers(s)?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected {K} comma-separated numbers, got {}", v.len()))
}

fn pair(s: &str) -> Result<[f64; 2], String> {
    fixed::<2>(s)
}

fn rectangle(s: &str) -> Result<[f64; 4], String> {
    fixed::<4>(s)
}

/// A command's result: the JSON report, whether every check passed, and
/// optional CSV rows.
pub struct Outcome {
    pub json: Value,
    pub passed: bool,
    pub csv: Option<String>,
}

impl Outcome {
    fn ok(json: Value) -> Self {
        Outcome {
            json,
            passed: true,
            csv: None,
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(core) = e.downcast_ref::<psm_core::Error>() {
        core.kind()
    } else if e.downcast_ref::<psm_core::expr::ParseError>().is_some() {
        "parse"
    } else if e.downcast_ref::<psm_core::expr::EvalError>().is_some() {
        "eval"
    } else if e.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else {
        "usage"
    }
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({"error": {"kind": kind, "message": message}}));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim().to_string()),
    };
    let outcome = cli.config.validate().and_then(|()| commands::run(&cli));
    match outcome {
        Ok(out) => {
            if let (Some(path), Some(csv)) = (&cli.csv, &out.csv) {
                if let Err(e) = std::fs::write(path, csv) {
                    return fail("io", format!("{}: {e}", path.display()));
                }
            }
            let _ = writeln!(std::io::stdout().lock(), "{}", out.json);
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => fail(error_kind(&e), format!("{e:#}")),
    }
}
