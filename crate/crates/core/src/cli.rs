//! Command-line driver.
//!
//! Exit codes: 0 on success, 2 when `check` finds the system not well posed,
//! 1 on any error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::canonical::{reduce, Reduction};
use crate::charsolve::{march, parse_presets, DataSpec, GridSpec, MarchOptions, SolutionTrace, TransverseGrid};
use crate::energymon::{verify_estimate, EnergyReport, DEFAULT_C_TOL};
use crate::error::{Error, Result};
use crate::matkit::Matrix;
use crate::scalar::Tolerances;
use crate::sysmodel::{load_system, Chart, FirstOrderSystem};
use crate::wellposed::{check_criteria, Verdict, WellPosednessReport};

/// Text of the built-in `wave3d` system definition.
pub const WAVE3D: &str = include_str!("../data/wave3d.sys");

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_WELL_POSED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "charprob", version, about = "Characteristic problems for linear first-order hyperbolic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print side matrices, null structure and canonical blocks.
    Analyze(CommonArgs),
    /// Decide well-posedness.
    Check(CommonArgs),
    /// March the characteristic problem and write per-slice diagnostics.
    Solve(SolveArgs),
    /// Check the energy estimate on a ladder of levels T.
    #[command(name = "verify-estimate")]
    VerifyEstimate(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false, id = "source")]
pub struct SourceArgs {
    /// Built-in example (wave3d).
    #[arg(long, group = "source")]
    pub example: Option<String>,
    /// System definition file.
    #[arg(long, group = "source")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Tolerance overrides, e.g. `rank=1e-9,eig=1e-8` (keys rank, orth, sym, eig, ctol).
    #[arg(long)]
    pub tol: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// x cells on the initial slice.
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    /// Transverse cells, one value for all directions or one per direction.
    #[arg(long, default_value = "16")]
    pub cells: String,
    #[arg(long, default_value_t = 1.0)]
    pub cfl: f64,
    /// Extent of the triangle `u + x ≤ Xtotal`.
    #[arg(long = "Xtotal", default_value_t = std::f64::consts::PI)]
    pub x_total: f64,
    /// Presets for the normal variables on u = 0 (default: zero).
    #[arg(long)]
    pub q0: Option<String>,
    /// Presets for the null variables on x = 0 (default: zero).
    #[arg(long)]
    pub w0: Option<String>,
    /// CSV output path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run even if the system is not certified well posed.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Explicit levels instead of the default ladder (comma-separated).
    #[arg(long = "T")]
    pub levels: Option<String>,
}

/// Tolerances plus the estimate constant `C_tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub tol: Tolerances<f64>,
    pub c_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            c_tol: DEFAULT_C_TOL,
        }
    }
}

pub fn parse_tolerances(text: Option<&str>) -> Result<ToleranceConfig> {
    let mut cfg = ToleranceConfig::default();
    let Some(text) = text else { return Ok(cfg) };
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value in --tol, got '{item}'")))?;
        let x: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("invalid tolerance value '{v}'")))?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Config(format!("tolerance '{k}' must be positive")));
        }
        match k.trim() {
            "rank" => cfg.tol.rank = x,
            "orth" => cfg.tol.orth = x,
            "sym" => cfg.tol.sym = x,
            "eig" => cfg.tol.eig = x,
            "ctol" => cfg.c_tol = x,
            other => return Err(Error::Config(format!("unknown tolerance key '{other}'"))),
        }
    }
    Ok(cfg)
}

/// Loads the system selected by `--example` or `--input`.
pub fn load_source(src: &SourceArgs) -> Result<(FirstOrderSystem<f64>, Chart<f64>)> {
    let text = match (&src.example, &src.input) {
        (Some(name), _) => builtin_example(name)?.to_string(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?,
        (None, None) => return Err(Error::Config("one of --example or --input is required".into())),
    };
    load_system(&text)
}

pub fn builtin_example(name: &str) -> Result<&'static str> {
    match name {
        "wave3d" => Ok(WAVE3D),
        other => Err(Error::Config(format!("unknown example '{other}' (available: wave3d)"))),
    }
}

fn parse_cells(text: &str, dims: usize) -> Result<Vec<usize>> {
    let cells: Vec<usize> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid cell count '{s}'")))
        })
        .collect::<Result<_>>()?;
    match cells.len() {
        1 => Ok(vec![cells[0]; dims]),
        n if n == dims => Ok(cells),
        n => Err(Error::Config(format!("--cells has {n} entries for {dims} transverse directions"))),
    }
}

pub fn grid_from_args(args: &GridArgs, transverse_dim: usize) -> Result<GridSpec<f64>> {
    let cells = parse_cells(&args.cells, transverse_dim)?;
    Ok(GridSpec::new(
        args.x_total,
        args.nx,
        args.cfl,
        cells.into_iter().map(TransverseGrid::periodic).collect(),
    ))
}

pub fn data_from_args(args: &GridArgs, n_normal: usize, m: usize) -> Result<DataSpec<f64>> {
    let mut data = DataSpec::zero(n_normal, m);
    if let Some(q) = &args.q0 {
        data.q0 = parse_presets(q)?;
    }
    if let Some(w) = &args.w0 {
        data.w0 = parse_presets(w)?;
    }
    if data.q0.len() != n_normal {
        return Err(Error::Config(format!("--q0 needs {n_normal} presets, got {}", data.q0.len())));
    }
    if data.w0.len() != m {
        return Err(Error::Config(format!("--w0 needs {m} presets, got {}", data.w0.len())));
    }
    Ok(data)
}

fn matrix_block(out: &mut String, label: &str, m: &Matrix<f64>) {
    let _ = writeln!(out, "{label} ({}x{}):", m.rows(), m.cols());
    let _ = write!(out, "{m}");
}

fn vector_line(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
}

pub fn analyze_text(red: &Reduction<f64>) -> String {
    let mut out = String::new();
    for (name, b) in red.sides.names.iter().zip(&red.sides.b) {
        matrix_block(&mut out, &format!("B^{name}"), b);
    }
    let _ = writeln!(out, "m = {}", red.multiplicity);
    for (i, z) in red.structure.right_null.iter().enumerate() {
        let _ = writeln!(out, "z[{i}]: {}", vector_line(z));
    }
    for (i, z) in red.structure.left_null.iter().enumerate() {
        let _ = writeln!(out, "z~[{i}]: {}", vector_line(z));
    }
    matrix_block(&mut out, "S", &red.structure.s);
    matrix_block(&mut out, "M", &red.transversality);
    let det = crate::matkit::determinant(&red.transversality).unwrap_or(f64::NAN);
    let _ = writeln!(out, "det M = {det:.16e}");
    let c = &red.canonical;
    let _ = writeln!(out, "variables: {}", c.variables.labels.join(" "));
    matrix_block(&mut out, "to_hat", &c.variables.to_hat);
    matrix_block(&mut out, "Nu", &c.nu);
    matrix_block(&mut out, "Nx", &c.nx);
    for (i, ni) in c.ni.iter().enumerate() {
        matrix_block(&mut out, &format!("N{}", c.coord_names[i + 2]), ni);
    }
    matrix_block(&mut out, "N0", &c.n0);
    for (i, li) in c.li.iter().enumerate() {
        matrix_block(&mut out, &format!("L{}", c.coord_names[i + 2]), li);
    }
    matrix_block(&mut out, "L0", &c.l0);
    matrix_block(&mut out, "Lx", &c.lx);
    for (name, ca) in red.compact.coord_names.iter().zip(&red.compact.c) {
        matrix_block(&mut out, &format!("C^{name}"), ca);
    }
    matrix_block(&mut out, "R", &red.compact.r);
    out
}

pub fn check_text(report: &WellPosednessReport<f64>, r_matrix: &Matrix<f64>) -> String {
    let mut out = String::new();
    let yes = |b: bool| if b { "holds" } else { "fails" };
    let _ = writeln!(out, "criterion i (C^a symmetric): {}", yes(report.criterion_i()));
    for (name, ok) in &report.symmetric_ca {
        let _ = writeln!(out, "  C^{name} symmetric: {ok}");
    }
    let _ = writeln!(out, "criterion ii (Nu > 0, Nx <= 0, Nu + Nx > 0): {}", yes(report.criterion_ii()));
    for (label, class) in [
        ("Nu", &report.class_nu),
        ("Nx", &report.class_nx),
        ("Nu+Nx", &report.class_nu_plus_nx),
        ("sym(R)", &report.class_r),
    ] {
        let _ = writeln!(out, "  {label}: {} eigenvalues {}", class.tag, vector_line(&class.eigenvalues));
    }
    matrix_block(&mut out, "R", r_matrix);
    let _ = writeln!(out, "r = {:.16e}", report.r);
    let _ = writeln!(out, "c = {:.16e}", report.c);
    match report.t_max {
        None => {
            let _ = writeln!(out, "T_max = inf");
            let _ = writeln!(out, "factor(T) = 1");
        }
        Some(t) => {
            let _ = writeln!(out, "T_max = {t:.16e}");
            let _ = writeln!(out, "factor(T) = exp({:.16e} T)", report.growth_exponent);
        }
    }
    let _ = writeln!(out, "time function u + x: {}", if report.time_function_ok { "ok" } else { "not spacelike" });
    for f in &report.failures {
        let _ = writeln!(out, "failure: {f}");
    }
    if report.verdict == Verdict::Inconclusive {
        let _ = writeln!(out, "note: Nx exceeds zero only within the marginal band; INCONCLUSIVE is a tool convention");
    }
    let _ = writeln!(out, "verdict: {}", report.verdict);
    out
}

/// Default levels: 8 evenly spaced values in `(0, upper)`, floored to
/// multiples of `du`, where `upper` is the largest level the marched triangle
/// covers, capped by `T_max`.
pub fn ladder(grid: &GridSpec<f64>, t_max: Option<f64>) -> Vec<f64> {
    let du = grid.du();
    let covered = grid.cfl * grid.x_total * (grid.nx - 1) as f64 / grid.nx as f64;
    let upper = t_max.map_or(covered, |t| t.min(covered));
    let mut out: Vec<f64> = Vec::new();
    for k in 1..=8 {
        let t = (k as f64 * upper / 9.0 / du + 1e-9).floor() * du;
        if t > 0.0 && out.last().is_none_or(|&last| t > last) {
            out.push(t);
        }
    }
    out
}

fn parse_levels(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid level '{s}'")))
        })
        .collect()
}

pub fn estimate_csv(rows: &[EnergyReport<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record([
        "T",
        "norm_q0_sq",
        "norm_w0_sq",
        "sigma_norm_sq",
        "bound",
        "margin",
        "balance_residual",
        "holds",
    ])
    .map_err(io)?;
    for r in rows {
        w.write_record([
            format!("{:.16e}", r.t),
            format!("{:.16e}", r.norm_q0_sq),
            format!("{:.16e}", r.norm_w0_sq),
            format!("{:.16e}", r.sigma_norm_sq),
            format!("{:.16e}", r.bound),
            format!("{:.16e}", r.margin),
            format!("{:.16e}", r.balance_residual),
            r.holds.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

pub fn trace_csv(trace: &SolutionTrace<f64>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(["level", "u", "x_extent", "max_abs"]).map_err(io)?;
    for (s, m) in trace.slices.iter().zip(&trace.max_abs) {
        w.write_record([
            s.level.to_string(),
            format!("{:.16e}", s.u_level),
            s.x_extent().to_string(),
            format!("{m:.16e}"),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::Config(format!("cannot write output: {e}"))),
    }
}

fn prepare(common: &CommonArgs) -> Result<(Reduction<f64>, ToleranceConfig)> {
    let cfg = parse_tolerances(common.tol.as_deref())?;
    let (sys, chart) = load_source(&common.source)?;
    Ok((reduce(&sys, &chart, &cfg.tol)?, cfg))
}

/// Executes one command, writing reports to `stdout`. Returns the exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Analyze(common) => {
            let (red, _) = prepare(common)?;
            emit(&None, &analyze_text(&red), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Check(common) => {
            let (red, cfg) = prepare(common)?;
            let report = check_criteria(&red.compact, &cfg.tol);
            emit(&None, &check_text(&report, &red.compact.r), stdout)?;
            Ok(match report.verdict {
                Verdict::NotWellPosed => EXIT_NOT_WELL_POSED,
                _ => EXIT_OK,
            })
        }
        Command::Solve(args) => {
            let (red, _) = prepare(&args.common)?;
            let c = &red.canonical;
            let grid = grid_from_args(&args.grid, c.transverse_dim())?;
            let data = data_from_args(&args.grid, c.n_normal(), c.m)?;
            let trace = march(c, &grid, &data, MarchOptions { force: args.grid.force })?;
            emit(&args.grid.out, &trace_csv(&trace)?, stdout)?;
            Ok(EXIT_OK)
        }
        Command::VerifyEstimate(args) => {
            let (red, cfg) = prepare(&args.common)?;
            let c = &red.canonical;
            let report = check_criteria(&red.compact, &cfg.tol);
            if report.verdict != Verdict::WellPosed {
                return Err(Error::NotWellPosed("verify the estimate".into()));
            }
            let grid = grid_from_args(&args.grid, c.transverse_dim())?;
            let data = data_from_args(&args.grid, c.n_normal(), c.m)?;
            let levels = match &args.levels {
                Some(text) => parse_levels(text)?,
                None => ladder(&grid, report.t_max),
            };
            let trace = march(c, &grid, &data, MarchOptions { force: args.grid.force })?;
            let rows = levels
                .iter()
                .map(|&t| verify_estimate(&trace, &red.compact, &report, t, cfg.c_tol))
                .collect::<Result<Vec<_>>>()?;
            for r in &rows {
                if let Some(t) = r.snapped_from {
                    eprintln!("warning: T = {t} snapped to grid level {}", r.t);
                }
            }
            emit(&args.grid.out, &estimate_csv(&rows)?, stdout)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args`, runs, and maps errors to exit code 1.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
