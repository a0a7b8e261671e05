//! Command-line front end: load a problem, solve it and print the iteration
//! log as an aligned table or as CSV.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{ArgGroup, Parser, ValueEnum};
use thiserror::Error;

use crate::bnb::{self, SolverConfig, SolverError, SolverReport, Status, Termination};
use crate::catalog::{catalog, CatalogError, EXAMPLE_COUNT};
use crate::neurodynamic::{FlowConfig, FlowTrace};
use crate::outcome::CornerRule;
use crate::problem::{load_problem, validate, BilevelProblem, ProblemError};

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_MAX_ITERATIONS: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("output: {0}")]
    Output(#[from] io::Error),
    #[error("output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Options(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Example(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Corner {
    /// Payoff nadir for two lower objectives, simplex corner otherwise.
    #[default]
    Auto,
    /// Maximum of each lower objective over the vertices of a simplex containing X.
    Simplex,
    /// Payoff-table nadir.
    Payoff,
}

impl From<Corner> for CornerRule {
    fn from(c: Corner) -> Self {
        match c {
            Corner::Auto => CornerRule::Auto,
            Corner::Simplex => CornerRule::Simplex,
            Corner::Payoff => CornerRule::Payoff,
        }
    }
}

/// Everything a run needs. Unset overrides keep the library defaults.
/// Runs are deterministic; there is no seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub input: Input,
    pub epsilon: f64,
    pub direction: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub stationarity_tol: Option<f64>,
    pub feasibility_tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub corner: CornerRule,
    pub format: Format,
    pub trace: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(input: Input) -> Self {
        RunOptions {
            input,
            epsilon: SolverConfig::default().epsilon,
            direction: None,
            dt: None,
            t_max: None,
            stationarity_tol: None,
            feasibility_tol: None,
            max_iterations: None,
            corner: CornerRule::Auto,
            format: Format::Table,
            trace: None,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let base = FlowConfig::default();
        let flow = FlowConfig {
            dt: self.dt.unwrap_or(base.dt),
            t_max: self.t_max.unwrap_or(base.t_max),
            stationarity_tol: self.stationarity_tol.unwrap_or(base.stationarity_tol),
            feasibility_tol: self.feasibility_tol.unwrap_or(base.feasibility_tol),
            ..base
        };
        let base = SolverConfig::default();
        SolverConfig {
            epsilon: self.epsilon,
            direction: self.direction.clone(),
            flow,
            max_iterations: self.max_iterations.unwrap_or(base.max_iterations),
            corner: self.corner,
            ..base
        }
    }

    fn check(&self) -> Result<(), CliError> {
        if let Input::Example(id) = self.input {
            if !(1..=EXAMPLE_COUNT).contains(&id) {
                return Err(CatalogError(id).into());
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Options(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "neurobilevel", version, about = "Global solver for pseudoconvex semivectorial bilevel programs")]
#[command(group(ArgGroup::new("input").required(true).args(["example", "file"])))]
pub struct Args {
    /// Built-in example 1 to 6.
    #[arg(long, value_name = "N")]
    pub example: Option<usize>,
    /// Problem file.
    #[arg(long, value_name = "PATH")]
    pub file: Option<PathBuf>,
    /// Relative gap of the stopping test.
    #[arg(long, value_name = "E", default_value_t = 0.01, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Positive ray direction, one entry per lower objective.
    #[arg(long, value_name = "v1,...,vp", value_delimiter = ',', allow_negative_numbers = true)]
    pub direction: Option<Vec<f64>>,
    /// Initial Euler step of every flow.
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Time horizon of every flow.
    #[arg(long, allow_negative_numbers = true)]
    pub t_max: Option<f64>,
    /// Flow stops once its velocity falls below this.
    #[arg(long)]
    pub stationarity_tol: Option<f64>,
    /// Penalty value below which a point counts as feasible.
    #[arg(long)]
    pub feasibility_tol: Option<f64>,
    /// Iteration cap of the branch-and-bound loop.
    #[arg(long = "max-iters", value_name = "K")]
    pub max_iters: Option<usize>,
    /// Upper corner that seeds the vertex set.
    #[arg(long, value_enum, default_value_t)]
    pub corner: Corner,
    /// Iteration table with 6 decimals, or CSV at full precision.
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Write every flow trajectory as CSV blocks to this file.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

impl From<Args> for RunOptions {
    fn from(a: Args) -> Self {
        let input = match (a.example, a.file) {
            (Some(id), _) => Input::Example(id),
            (None, Some(path)) => Input::File(path),
            (None, None) => unreachable!("clap requires one input"),
        };
        RunOptions {
            input,
            epsilon: a.epsilon,
            direction: a.direction,
            dt: a.dt,
            t_max: a.t_max,
            stationarity_tol: a.stationarity_tol,
            feasibility_tol: a.feasibility_tol,
            max_iterations: a.max_iters,
            corner: a.corner.into(),
            format: a.format,
            trace: a.trace,
        }
    }
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Args::try_parse_from(args) {
        Ok(a) => run(&a.into(), out, err),
        Err(e) => {
            let informational = !e.use_stderr();
            let _ = if informational { write!(out, "{e}") } else { write!(err, "{e}") };
            if informational {
                EXIT_OPTIMAL
            } else {
                EXIT_INPUT_ERROR
            }
        }
    }
}

/// Solves the selected problem and writes the log and summary to `out`.
/// Diagnostics and errors go to `err`.
pub fn run(options: &RunOptions, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_inner(options, out, err) {
        Ok(report) => exit_code(report.status),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Optimal => EXIT_OPTIMAL,
        Status::Infeasible => EXIT_INFEASIBLE,
        Status::MaxIterations => EXIT_MAX_ITERATIONS,
    }
}

fn load(input: &Input) -> Result<(BilevelProblem, String), CliError> {
    Ok(match input {
        Input::Example(id) => (catalog(*id)?, format!("Example {id}")),
        Input::File(path) => (load_problem(path)?, path.display().to_string()),
    })
}

fn run_inner(options: &RunOptions, out: &mut dyn Write, err: &mut dyn Write) -> Result<SolverReport, CliError> {
    options.check()?;
    let (problem, label) = load(&options.input)?;
    for d in validate(&problem)? {
        writeln!(err, "{d}")?;
    }
    let mut cfg = options.solver_config();
    if let Some(path) = &options.trace {
        let file = File::create(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
        cfg.flow.trace = Some(FlowTrace::new(Box::new(BufWriter::new(file))));
    }
    let report = bnb::solve(&problem, &cfg)?;
    match options.format {
        Format::Table => write_table(out, &label, &problem, &report)?,
        Format::Csv => write_csv(out, problem.p(), &report)?,
    }
    Ok(report)
}

/// Six decimals, as in the published tables.
pub fn fmt6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        format!("{v}")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    format!("({})", v.iter().map(|x| fmt6(*x)).collect::<Vec<_>>().join(", "))
}

fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::Gap => "gap closed",
        Termination::Exhausted => "vertex set exhausted",
        Termination::Infeasible => "no feasible point",
        Termination::MaxIterations => "iteration cap reached",
    }
}

/// One row per logged iteration with columns `k, v^k, alpha, beta, gap`, then
/// a summary block.
pub fn write_table(
    out: &mut dyn Write,
    label: &str,
    problem: &BilevelProblem,
    report: &SolverReport,
) -> io::Result<()> {
    let rows: Vec<[String; 5]> =
        report.log.iter().map(|r| [r.k.to_string(), fmt_vec(&r.v), fmt6(r.alpha), fmt6(r.beta), fmt6(r.gap)]).collect();
    let header = ["k", "v^k", "alpha", "beta", "gap"].map(String::from);
    let mut widths = header.clone().map(|h| h.len());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    writeln!(out, "{label}: n = {}, m = {}, p = {}", problem.n(), problem.m(), problem.p())?;
    for row in std::iter::once(&header).chain(&rows) {
        let cells: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(out, "{}", cells.join("  ").trim_end())?;
    }
    let b = &report.outcome_box;
    writeln!(out)?;
    writeln!(out, "status      {:?} ({})", report.status, termination_label(report.termination))?;
    match &report.incumbent {
        Some(inc) => {
            writeln!(out, "h*          {}", fmt6(inc.h))?;
            writeln!(out, "x*          {}", fmt_vec(&inc.x))?;
            writeln!(out, "y*          {}", fmt_vec(&inc.y))?;
        }
        None => writeln!(out, "h*          none")?,
    }
    writeln!(
        out,
        "bounds      alpha = {}, beta = {}, gap = {}",
        fmt6(report.alpha),
        fmt6(report.beta),
        fmt6(report.gap())
    )?;
    writeln!(out, "box         m = {}, M = {}, nadir = {}", fmt_vec(&b.lower), fmt_vec(&b.upper), fmt_vec(&b.nadir))?;
    writeln!(out, "iterations  {}", report.iterations)?;
    writeln!(out, "wall time   {:.3} s", report.wall_time.as_secs_f64())?;
    Ok(())
}

/// Header `k,v_1..v_p,alpha,beta,gap`, one row per iteration in round-trip
/// precision, then a `#`-prefixed summary row.
pub fn write_csv(out: &mut dyn Write, p: usize, report: &SolverReport) -> Result<(), CliError> {
    {
        let mut w = csv::Writer::from_writer(&mut *out);
        let mut header = vec!["k".to_string()];
        header.extend((1..=p).map(|i| format!("v_{i}")));
        header.extend(["alpha", "beta", "gap"].map(String::from));
        w.write_record(&header)?;
        for r in &report.log {
            let mut rec = vec![r.k.to_string()];
            rec.extend(r.v.iter().map(f64::to_string));
            rec.extend([r.alpha, r.beta, r.gap].map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
    let (h, x, y) = match &report.incumbent {
        Some(inc) => (inc.h.to_string(), join(&inc.x), join(&inc.y)),
        None => ("none".into(), String::new(), String::new()),
    };
    writeln!(
        out,
        "# status={:?},termination={:?},h={h},x={x},y={y},alpha={},beta={},iterations={},wall_time_s={}",
        report.status,
        report.termination,
        report.alpha,
        report.beta,
        report.iterations,
        report.wall_time.as_secs_f64()
    )?;
    Ok(())
}
