//! Command-line front end.
//!
//! Exit codes: 0 success, 2 hypothesis failure, 3 parse, schema or usage
//! error, 4 numerical failure. Data goes to stdout (or `--output`),
//! diagnostics to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{gronwall1_bound, gronwall2_bound, GronwallData, ZetaReading};
use crate::config::{OutputFormat, RunConfig};
use crate::error::Error;
use crate::kernel::KernelEngine;
use crate::oracle::h2_check;
use crate::scenarios::build_scenario;
use crate::system::{Ivp, Numerics};
use crate::vop::{fmt_f64, H3Policy, VopSolver};

pub const EXIT_OK: i32 = 0;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Environment variable holding the worker count for trajectory sampling.
pub const THREADS_ENV: &str = "IDEPCAG_NUM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "idepcag", version, about = "Linear impulsive equations with piecewise constant arguments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the solution of a configured system.
    Solve(SolveArgs),
    /// Report the contraction (H2) and invertibility (H3) checks.
    Check(CheckArgs),
    /// Run a built-in worked example.
    Scenario(ScenarioArgs),
    /// Sample the fundamental matrix W(t, tau).
    Fundamental(FundamentalArgs),
    /// Tabulate the Gronwall envelopes against the homogeneous solution norm.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Proceed when the invertibility check fails.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// One of s1-geometric, s2-impulse-product, s3-cooke-yorke, s4-sine.
    name: String,
    /// Parameter overrides as key=value.
    #[arg(long, num_args = 1.., value_parser = parse_param)]
    params: Vec<(String, String)>,
    /// Print the deviation from the reference solution and the Picard oracle.
    #[arg(long)]
    compare: bool,
    #[arg(long, default_value_t = 201)]
    samples: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct FundamentalArgs {
    #[command(flatten)]
    common: Common,
    /// Initial time; defaults to the configured tau.
    #[arg(long)]
    tau: Option<f64>,
    /// Comma-separated sample times; defaults to the configured output times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// Prefactor used for the bound on u(gamma(t)).
    #[arg(long, value_enum, default_value = "inverse")]
    reading: Reading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Reading {
    Inverse,
    Literal,
}

fn parse_param(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// A failed command: exit code plus message for stderr.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<i32, Failure>;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Hypothesis(_) => EXIT_HYPOTHESIS,
        Error::InvalidGrid(_)
        | Error::OutsideWindow { .. }
        | Error::Parse(_)
        | Error::Dimension(_)
        | Error::InvalidArgument(_)
        | Error::Config(_) => EXIT_INPUT,
        Error::Eval { .. }
        | Error::SingularImpulse { .. }
        | Error::Singular { .. }
        | Error::NonFinite { .. }
        | Error::NotConverged { .. }
        | Error::JumpMismatch { .. } => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let sink: &mut dyn Write = if informational { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if informational { EXIT_OK } else { EXIT_INPUT };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a, out, err),
        Command::Check(a) => cmd_check(&a, out, err),
        Command::Scenario(a) => cmd_scenario(&a, out, err),
        Command::Fundamental(a) => cmd_fundamental(&a, out, err),
        Command::Bounds(a) => cmd_bounds(&a, out, err),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let src = std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(RunConfig::from_json(&src)?)
}

fn threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

fn emit(path: &Option<PathBuf>, bytes: &[u8], out: &mut dyn Write) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes),
        None => out.write_all(bytes),
    }
}

/// Builds the solver, printing both hypothesis summaries.
fn solver_for(ivp: Ivp, numerics: &Numerics, force: bool, err: &mut dyn Write) -> Result<VopSolver, Failure> {
    writeln!(err, "{}", h2_check(&ivp)?.summary())?;
    let policy = if force { H3Policy::Force } else { H3Policy::Enforce };
    match VopSolver::new(ivp, numerics, policy) {
        Ok(s) => {
            writeln!(err, "{}", s.h3_report().summary())?;
            Ok(s)
        }
        Err(e @ Error::Hypothesis(_)) => Err(Failure {
            code: EXIT_HYPOTHESIS,
            message: format!("{e} (use --force to proceed)"),
        }),
        Err(e) => Err(e.into()),
    }
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let cfg = load(&a.common.config)?;
    let ivp = cfg.ivp()?;
    let solver = solver_for(ivp, &cfg.numerics, a.common.force, err)?;
    let trajectory = solver.sample_trajectory_with(&cfg.sample_times(), threads())?;
    let bytes = match a.format.unwrap_or(cfg.output.format) {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            trajectory.write_csv(&mut buf)?;
            buf
        }
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&trajectory).expect("trajectory serialises");
            s.push('\n');
            s.into_bytes()
        }
    };
    emit(&a.common.output, &bytes, out)?;
    Ok(EXIT_OK)
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Outcome {
    let cfg = load(&a.config)?;
    let ivp = cfg.ivp()?;
    let h2 = h2_check(&ivp)?;
    let kernel = KernelEngine::new(ivp.system.a.clone(), ivp.system.b.clone(), &cfg.numerics)?;
    let h3 = kernel.check_h3(&ivp.partition)?;
    match a.format {
        ReportFormat::Text => {
            writeln!(out, "{}", h2.summary())?;
            writeln!(out, "{}", h3.summary())?;
            writeln!(out, "k,t_k,zeta_k,t_next,h2_integral,nu_plus,nu_minus,cond_left,cond_right")?;
            for (row, v) in h3.intervals.iter().zip(&h2.per_interval) {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    row.k,
                    fmt_f64(row.t_k),
                    fmt_f64(row.zeta_k),
                    fmt_f64(row.t_next),
                    fmt_f64(*v),
                    fmt_f64(row.nu_plus),
                    fmt_f64(row.nu_minus),
                    fmt_f64(row.cond_left),
                    fmt_f64(row.cond_right)
                )?;
            }
        }
        ReportFormat::Json => {
            let report = serde_json::json!({ "h2": h2, "h3": h3, "pass": h2.pass && h3.pass });
            writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serialises"))?;
        }
    }
    Ok(if h2.pass && h3.pass { EXIT_OK } else { EXIT_HYPOTHESIS })
}

fn cmd_scenario(a: &ScenarioArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let scenario = build_scenario(&a.name, &a.params)?;
    writeln!(err, "{}: {}", scenario.id(), scenario.notes())?;
    // The worked examples are solvable even where the sufficient condition fails.
    let solver = solver_for(scenario.ivp().clone(), &Numerics::default(), true, err)?;
    let times = scenario.sample_times(a.samples);
    if a.compare {
        let cmp = scenario.compare(&solver, &times, 5)?;
        let (_, end) = scenario.ivp().partition.window();
        let last = solver.solve(end)?;
        writeln!(out, "scenario: {}", scenario.id())?;
        writeln!(out, "samples: {}", cmp.samples)?;
        match cmp.max_closed_form_error {
            Some(e) => writeln!(out, "max |solve - closed_form|: {e:.3e}")?,
            None => writeln!(out, "max |solve - closed_form|: n/a")?,
        }
        match cmp.max_oracle_deviation {
            Some(e) => writeln!(out, "max |solve - picard|: {e:.3e}")?,
            None => writeln!(out, "max |solve - picard|: n/a")?,
        }
        if let Some(note) = &cmp.oracle_note {
            writeln!(out, "oracle note: {note}")?;
        }
        let values: Vec<String> = last.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "y({end}) = {}", values.join(","))?;
        if a.output.is_none() {
            return Ok(EXIT_OK);
        }
    }
    let trajectory = solver.sample_trajectory_with(&times, threads())?;
    let bytes = match a.format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            trajectory.write_csv(&mut buf)?;
            buf
        }
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&trajectory).expect("trajectory serialises");
            s.push('\n');
            s.into_bytes()
        }
    };
    emit(&a.output, &bytes, out)?;
    Ok(EXIT_OK)
}

fn cmd_fundamental(a: &FundamentalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let cfg = load(&a.common.config)?;
    let ivp = cfg.ivp()?;
    let tau = a.tau.unwrap_or(ivp.tau);
    let times = a.times.clone().unwrap_or_else(|| {
        cfg.sample_times().into_iter().filter(|&t| t >= tau).collect()
    });
    let n = ivp.dim();
    let solver = solver_for(ivp, &cfg.numerics, a.common.force, err)?;
    let engine = solver.fundamental();
    let mut buf = Vec::new();
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            header.push(format!("w_{i}_{j}"));
        }
    }
    writeln!(buf, "{}", header.join(","))?;
    for t in times {
        let w = engine.w_global(t, tau)?;
        let mut row = vec![fmt_f64(t)];
        for i in 0..n {
            for j in 0..n {
                row.push(fmt_f64(w[(i, j)]));
            }
        }
        writeln!(buf, "{}", row.join(","))?;
    }
    emit(&a.common.output, &buf, out)?;
    Ok(EXIT_OK)
}

fn cmd_bounds(a: &BoundsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let cfg = load(&a.common.config)?;
    let ivp = cfg.ivp()?;
    let homogeneous = ivp.with_system(ivp.system.homogeneous_part())?;
    let data = GronwallData::from_system(&homogeneous.system, homogeneous.partition.clone(), homogeneous.tau)?;
    writeln!(err, "theta_hat = {:.6e}, rho = {:.6e}", data.theta_hat(), data.rho())?;
    if !(data.theta_hat() < 1.0) {
        return Err(Failure {
            code: EXIT_HYPOTHESIS,
            message: format!("theta_hat = {:.6e} is not below 1", data.theta_hat()),
        });
    }
    let with_second = data.rho() < 1.0;
    let u_tau = homogeneous.y0.norm();
    let solver = solver_for(homogeneous, &cfg.numerics, a.common.force, err)?;
    let reading = match a.reading {
        Reading::Inverse => ZetaReading::Inverse,
        Reading::Literal => ZetaReading::Literal,
    };
    let mut buf = Vec::new();
    writeln!(buf, "t,norm_y,gronwall1,dominated1,gronwall2,dominated2")?;
    let mut all = true;
    for t in cfg.sample_times() {
        let y = solver.solve(t)?.norm();
        let b1 = gronwall1_bound(&data, u_tau, t, reading)?.at_t;
        let d1 = y <= b1 * (1.0 + 1e-8);
        let (b2, d2) = if with_second {
            let b2 = gronwall2_bound(&data, u_tau, t)?;
            (fmt_f64(b2), (y <= b2 * (1.0 + 1e-8)).to_string())
        } else {
            ("n/a".to_string(), "n/a".to_string())
        };
        all &= d1 && d2 != "false";
        writeln!(buf, "{},{},{},{},{},{}", fmt_f64(t), fmt_f64(y), fmt_f64(b1), d1, b2, d2)?;
    }
    if !all {
        writeln!(err, "warning: some samples exceed a bound")?;
    }
    emit(&a.common.output, &buf, out)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("idepcag").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_are_input_errors() {
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_INPUT);
        assert_eq!(run_args(&["solve"]).0, EXIT_INPUT);
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("scenario"));
    }

    #[test]
    fn unknown_scenario() {
        let (code, _, err) = run_args(&["scenario", "s7"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("unknown scenario"));
    }

    #[test]
    fn scenario_compare_reports_errors() {
        let (code, out, _) = run_args(&["scenario", "s1-geometric", "--params", "alpha=0.9", "beta=1.2", "x0=1.8", "--compare"]);
        assert_eq!(code, EXIT_OK);
        let line = out.lines().find(|l| l.starts_with("max |solve - closed_form|")).unwrap();
        let v: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(v <= 1e-7, "{out}");
    }

    #[test]
    fn scenario_gate_exit_code() {
        let (code, _, _) = run_args(&["scenario", "s4-sine", "--params", "h=5"]);
        assert_eq!(code, EXIT_HYPOTHESIS);
    }

    #[test]
    fn exit_code_classes() {
        assert_eq!(exit_code(&Error::Hypothesis("x".into())), EXIT_HYPOTHESIS);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_INPUT);
        assert_eq!(
            exit_code(&Error::NonFinite {
                what: "x",
                from: 0.0,
                to: 1.0
            }),
            EXIT_NUMERICAL
        );
    }
}
