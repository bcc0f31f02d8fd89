//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 solver nonconvergence, 4 detected nonexistence.

pub mod config;
pub mod expr;
pub mod output;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::continuation::{el_residual_field, solve_second_bvp, Problem, Solution};
use crate::error::Error;
use crate::estimates::{boundary_cofactor_check, DiagnosticEntry, DiagnosticsReport};
use crate::functionals::{
    eval_f, eval_l, integral_g, properness_probe, ProperVerdict, TestFunctionFamily,
};
use crate::lin_ma::{linearized_residual, solve_linearized};
use crate::ma_dirichlet::{ma_residual, solve_ma};
use crate::mesh::{
    build_grid, cofactor_divergence_sup, hessian_determinant, DomainSpec, Grid, MatrixField,
    ScalarField,
};
use crate::oned_oracle::{existence_threshold_1d, solve_exact_1d, OneDProblem, OracleOutcome};
use crate::par;

pub use config::{parse_config, ConfigError, RunConfig, SourceSpec};
pub use output::{report_lookup, FieldTable, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_NONEXISTENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "abreu-bvp",
    version,
    about = "Second boundary value problem solver for fourth-order Monge-Ampere functionals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the fourth-order problem by continuation.
    Solve(CommonArgs),
    /// Solve det D^2 u = det with u = phi on the boundary.
    Ma(CommonArgs),
    /// Solve a11 u_xx + 2 a12 u_xy + a22 u_yy = f with u = phi on the boundary.
    Linma(CommonArgs),
    /// Quadrature solution of the one-dimensional problem.
    Oracle1d(CommonArgs),
    /// Evaluate F and L at `u` (or at the computed solution).
    Functional(CommonArgs),
    /// Sample L over test-function families.
    ProbeProperness(CommonArgs),
    /// Solve and report every diagnostic check.
    Diagnostics(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides [output] dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid resolution; overrides [problem] resolution.
    #[arg(long)]
    resolution: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Ma(_) => "ma",
            Command::Linma(_) => "linma",
            Command::Oracle1d(_) => "oracle1d",
            Command::Functional(_) => "functional",
            Command::ProbeProperness(_) => "probe-properness",
            Command::Diagnostics(_) => "diagnostics",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::Ma(a)
            | Command::Linma(a)
            | Command::Oracle1d(a)
            | Command::Functional(a)
            | Command::ProbeProperness(a)
            | Command::Diagnostics(a) => a,
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Io(_) => EXIT_FAILURE,
            CliError::Solver(e) => match e {
                Error::InvalidDomain(_)
                | Error::InvalidParameter(_)
                | Error::GridResolution(_)
                | Error::NonzeroBoundaryData
                | Error::EmptyFamily
                | Error::NoBracket { .. } => EXIT_CONFIG,
                Error::NewtonDivergence { .. }
                | Error::ConvexityLost { .. }
                | Error::ContinuationFailure { .. }
                | Error::LinearSolverStalled { .. }
                | Error::SingularSystem { .. }
                | Error::NotElliptic { .. } => EXIT_NONCONVERGENCE,
                Error::WFloorBreach { .. } => EXIT_NONEXISTENCE,
                _ => EXIT_FAILURE,
            },
        }
    }

    fn status(&self) -> &'static str {
        match self.exit_code() {
            EXIT_CONFIG => "config_error",
            EXIT_NONCONVERGENCE => "nonconvergence",
            EXIT_NONEXISTENCE => "nonexistence",
            _ => "error",
        }
    }
}

fn config_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_path_buf(),
        source: ConfigError::general(message),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let threads = par::threads_from_env();
    par::with_threads(threads, || execute(&cli.command))
}

fn execute(command: &Command) -> i32 {
    let args = command.args();
    let cfg = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let out_dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let mut report = Report::new();
    report.value("command", command.name());
    report.value("config", args.config.display());
    describe_config(&mut report, &cfg);

    let result = match command {
        Command::Solve(_) => cmd_solve(&cfg, &mut report),
        Command::Ma(_) => cmd_ma(&cfg, &mut report),
        Command::Linma(_) => cmd_linma(&cfg, &mut report),
        Command::Oracle1d(_) => cmd_oracle1d(&cfg, &args.config, &mut report),
        Command::Functional(_) => cmd_functional(&cfg, &mut report),
        Command::ProbeProperness(_) => cmd_probe(&cfg, &mut report),
        Command::Diagnostics(_) => cmd_diagnostics(&cfg, &mut report),
    };
    let (code, fields) = match result {
        Ok(Finished { code, fields }) => {
            let status = if code == EXIT_NONEXISTENCE {
                "nonexistence"
            } else {
                "ok"
            };
            report.value("status", status);
            (code, fields)
        }
        Err(e) => {
            eprintln!("error: {e}");
            report.value("status", e.status()).value("error", &e);
            (e.exit_code(), None)
        }
    };
    report.value("exit_code", code);

    match write_outputs(
        &out_dir,
        &report,
        fields.as_ref().filter(|_| cfg.output.write_fields),
    ) {
        Ok(()) => {
            print!("{}", report.as_str());
            code
        }
        Err(e) => {
            eprintln!("error: cannot write outputs to {}: {e}", out_dir.display());
            if code == EXIT_OK {
                EXIT_FAILURE
            } else {
                code
            }
        }
    }
}

fn write_outputs(dir: &Path, report: &Report, fields: Option<&FieldTable>) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), report.as_str())?;
    if let Some(f) = fields {
        f.write(&dir.join("fields.txt"))?;
    }
    Ok(())
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| config_error(&args.config, format!("cannot read config: {e}")))?;
    let mut cfg = parse_config(&text).map_err(|source| CliError::Config {
        path: args.config.clone(),
        source,
    })?;
    if let Some(r) = args.resolution {
        if r < 3 {
            return Err(config_error(
                &args.config,
                format!("--resolution must be at least 3, got {r}"),
            ));
        }
        cfg.resolution = r;
    }
    if let SourceSpec::File(p) = &cfg.f {
        if p.is_relative() {
            let base = args.config.parent().unwrap_or(Path::new("."));
            cfg.f = SourceSpec::File(base.join(p));
        }
    }
    Ok(cfg)
}

struct Finished {
    code: i32,
    fields: Option<FieldTable>,
}

impl Finished {
    fn ok(fields: Option<FieldTable>) -> Self {
        Finished {
            code: EXIT_OK,
            fields,
        }
    }
}

fn describe_config(r: &mut Report, cfg: &RunConfig) {
    r.open("problem");
    match cfg.domain {
        DomainSpec::Interval { a, b } => r.value("domain", format!("interval ({a}, {b})")),
        DomainSpec::Disk { radius } => r.value("domain", format!("disk (radius {radius})")),
        DomainSpec::Ellipse { semi_x, semi_y } => {
            r.value("domain", format!("ellipse (semi-axes {semi_x}, {semi_y})"))
        }
    };
    r.number("theta", cfg.theta);
    match &cfg.f {
        SourceSpec::Expr(e) => r.value("f", e),
        SourceSpec::File(p) => r.value("f_file", p.display()),
    };
    r.value("phi", &cfg.phi)
        .value("psi", &cfg.psi)
        .value("resolution", cfg.resolution);
    r.close();
}

/// Rows `x y value` (or `x value`), `#` comments allowed.
fn read_samples(path: &Path) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_error(path, format!("cannot read source file: {e}")))?;
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let row = match vals.as_deref() {
            Ok(&[x, v]) => (x, 0.0, v),
            Ok(&[x, y, v]) => (x, y, v),
            _ => {
                return Err(config_error(
                    path,
                    format!("line {}: expected 'x [y] value'", k + 1),
                ))
            }
        };
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(config_error(path, "source file has no samples"));
    }
    Ok(rows)
}

fn coord_key(x: f64, y: f64) -> (i64, i64) {
    ((x * 1e9).round() as i64, (y * 1e9).round() as i64)
}

fn source_field(cfg: &RunConfig, grid: &Grid) -> Result<ScalarField, CliError> {
    match &cfg.f {
        SourceSpec::Expr(e) => Ok(ScalarField::from_fn(grid, |p| e.eval_at(p))),
        SourceSpec::File(path) => {
            let map: HashMap<(i64, i64), f64> = read_samples(path)?
                .into_iter()
                .map(|(x, y, v)| (coord_key(x, y), v))
                .collect();
            let values = grid
                .coords()
                .iter()
                .map(|p| {
                    map.get(&coord_key(p[0], p[1])).copied().ok_or_else(|| {
                        config_error(
                            path,
                            format!("no sample for grid node ({}, {})", p[0], p[1]),
                        )
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ScalarField::from_values(grid, values)?)
        }
    }
}

fn build_problem(cfg: &RunConfig) -> Result<Problem, CliError> {
    let grid = build_grid(cfg.domain, cfg.resolution)?;
    let f = source_field(cfg, &grid)?;
    let phi = ScalarField::from_fn(&grid, |p| cfg.phi.eval_at(p));
    let psi = ScalarField::from_fn(&grid, |p| cfg.psi.eval_at(p));
    Ok(Problem::new(grid, cfg.gspec(), f, phi, psi)?)
}

fn report_diagnostics(r: &mut Report, diagnostics: &DiagnosticsReport) {
    r.open("diagnostics");
    for e in diagnostics.entries() {
        report_entry(r, e);
    }
    r.value("all_pass", diagnostics.all_pass());
    r.close();
}

fn report_entry(r: &mut Report, e: &DiagnosticEntry) {
    r.open(&e.name);
    r.number("measured", e.measured)
        .number("bound", e.bound)
        .number("tolerance", e.tolerance);
    match e.pass {
        Some(p) => r.value("pass", p),
        None => r.value("pass", "n/a"),
    };
    for (k, v) in &e.details {
        r.number(k, *v);
    }
    r.close();
}

fn solution_fields(problem: &Problem, sol: &Solution) -> Result<FieldTable, CliError> {
    let grid = problem.grid();
    let residual = el_residual_field(problem, &sol.u, &sol.d)?;
    Ok(table(grid, &sol.u, Some(&sol.w), Some(&sol.d), &residual))
}

fn table(
    grid: &Grid,
    u: &ScalarField,
    w: Option<&ScalarField>,
    d: Option<&ScalarField>,
    residual: &ScalarField,
) -> FieldTable {
    let mut t = FieldTable::default();
    let n_int = grid.num_interior();
    for (i, &p) in grid.coords().iter().enumerate() {
        t.push(
            p,
            u.values()[i],
            w.map_or(0.0, |w| w.values()[i]),
            d.map_or(0.0, |d| d.values()[i]),
            residual.values()[i],
            i >= n_int,
        );
    }
    t
}

fn report_solution(r: &mut Report, problem: &Problem, sol: &Solution) {
    r.open("solution");
    r.number("el_residual_sup", sol.el_residual_norm)
        .number("fixed_point_change", sol.fixed_point_change)
        .number("min_u", sol.u.min())
        .number("max_u", sol.u.max())
        .number("min_w", sol.w.min())
        .number("max_w", sol.w.max())
        .number(
            "min_d",
            sol.d
                .interior()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        );
    r.open("trace");
    for (k, s) in sol.trace.iter().enumerate() {
        r.open(&format!("step_{:03}", k + 1));
        r.number("t", s.t)
            .value("method", s.method.as_str())
            .value("iterations", s.iterations)
            .number("residual", s.residual);
        r.close();
    }
    r.close();
    if problem.phi_is_zero() {
        if let (Ok(fv), Ok(lv)) = (eval_f(&sol.u, problem), eval_l(&sol.u, problem)) {
            r.open("functionals")
                .number("F", fv)
                .number("L", lv)
                .close();
        }
    }
    r.close();
    report_diagnostics(r, &sol.diagnostics);
}

fn cmd_solve(cfg: &RunConfig, r: &mut Report) -> Result<Finished, CliError> {
    let problem = build_problem(cfg)?;
    let sol = solve_second_bvp(&problem, &cfg.solver)?;
    report_solution(r, &problem, &sol);
    Ok(Finished::ok(Some(solution_fields(&problem, &sol)?)))
}

fn cmd_diagnostics(cfg: &RunConfig, r: &mut Report) -> Result<Finished, CliError> {
    let problem = build_problem(cfg)?;
    let grid = problem.grid();
    let sol = solve_second_bvp(&problem, &cfg.solver)?;
    let mut diagnostics = sol.diagnostics.clone();
    if diagnostics.get("boundary_cofactor").is_none() {
        if let Ok(e) = boundary_cofactor_check(&sol.u, grid) {
            diagnostics.push(e);
        }
    }
    diagnostics.push(DiagnosticEntry {
        name: "cofactor_divergence".into(),
        measured: cofactor_divergence_sup(&sol.u, grid)?,
        bound: 0.0,
        pass: None,
        tolerance: 0.0,
        details: vec![("h".into(), grid.h())],
    });
    diagnostics.push(DiagnosticEntry {
        name: "el_residual".into(),
        measured: sol.el_residual_norm,
        bound: 0.0,
        pass: None,
        tolerance: 0.0,
        details: vec![("fixed_point_change".into(), sol.fixed_point_change)],
    });
    let sol = Solution { diagnostics, ..sol };
    report_solution(r, &problem, &sol);
    Ok(Finished::ok(Some(solution_fields(&problem, &sol)?)))
}

fn cmd_ma(cfg: &RunConfig, r: &mut Report) -> Result<Finished, CliError> {
    let grid = build_grid(cfg.domain, cfg.resolution)?;
    let g = ScalarField::from_fn(&grid, |p| cfg.det.eval_at(p));
    let phi = ScalarField::from_fn(&grid, |p| cfg.phi.eval_at(p));
    let u = solve_ma(&grid, &g, phi.boundary(), &cfg.solver.ma)?;
    let d = hessian_determinant(&u, &grid)?;
    let gs = cfg.gspec();
    let w = d.map(|v| if v > 0.0 { gs.w(v) } else { f64::NAN });
    let residual = ma_residual(&grid, &u, &g)?;
    r.open("ma")
        .value("det", &cfg.det)
        .number("residual_sup", residual.sup_norm())
        .number("min_u", u.min())
        .number("max_u", u.max())
        .close();
    Ok(Finished::ok(Some(table(
        &grid,
        &u,
        Some(&w),
        Some(&d),
        &residual,
    ))))
}

fn cmd_linma(cfg: &RunConfig, r: &mut Report) -> Result<Finished, CliError> {
    let grid = build_grid(cfg.domain, cfg.resolution)?;
    let entries = grid
        .interior_coords()
        .iter()
        .map(|&p| {
            let [a11, a22, a12] = [0, 1, 2].map(|k| cfg.coefficients[k].eval_at(p));
            [a11, a22, a12]
        })
        .collect();
    let a = MatrixField::new(&grid, entries)?;
    let f = source_field(cfg, &grid)?;
    let phi = ScalarField::from_fn(&grid, |p| cfg.phi.eval_at(p));
    let v = solve_linearized(&grid, &a, &f, phi.boundary(), &cfg.solver.linear)?;
    let residual = linearized_residual(&grid, &a, &v, &f)?;
    r.open("linma")
        .value("a11", &cfg.coefficients[0])
        .value("a22", &cfg.coefficients[1])
        .value("a12", &cfg.coefficients[2])
        .number("residual_sup", residual.sup_norm())
        .number("min_u", v.min())
        .number("max_u", v.max())
        .close();
    Ok(Finished::ok(Some(table(&grid, &v, None, None, &residual))))
}

fn oned_problem(cfg: &RunConfig, config_path: &Path) -> Result<OneDProblem, CliError> {
    let DomainSpec::Interval { a, b } = cfg.domain else {
        return Err(config_error(
            config_path,
            "oracle1d needs an interval domain",
        ));
    };
    let phi = (cfg.phi.eval(a, 0.0), cfg.phi.eval(b, 0.0));
    let psi = (cfg.psi.eval(a, 0.0), cfg.psi.eval(b, 0.0));
    let p = match &cfg.f {
        SourceSpec::Expr(e) => {
            let e = e.clone();
            OneDProblem::new((a, b), cfg.theta, move |x| e.eval(x, 0.0), phi, psi)?
        }
        SourceSpec::File(path) => {
            let mut rows: Vec<(f64, f64)> = read_samples(path)?
                .into_iter()
                .map(|(x, _, v)| (x, v))
                .collect();
            rows.sort_by(|p, q| p.0.total_cmp(&q.0));
            OneDProblem::new((a, b), cfg.theta, move |x| interpolate(&rows, x), phi, psi)?
        }
    };
    Ok(p)
}

fn interpolate(rows: &[(f64, f64)], x: f64) -> f64 {
    let k = rows.partition_point(|r| r.0 < x);
    if k == 0 {
        return rows[0].1;
    }
    if k == rows.len() {
        return rows[k - 1].1;
    }
    let (x0, y0) = rows[k - 1];
    let (x1, y1) = rows[k];
    if x1 == x0 {
        return y1;
    }
    y0 + (x - x0) / (x1 - x0) * (y1 - y0)
}

fn cmd_oracle1d(cfg: &RunConfig, config_path: &Path, r: &mut Report) -> Result<Finished, CliError> {
    let p = oned_problem(cfg, config_path)?;
    let outcome = solve_exact_1d(&p, cfg.resolution)?;
    r.open("oracle");
    if let Some(bracket) = cfg.probe.threshold {
        let c = existence_threshold_1d(&p, bracket, cfg.resolution, cfg.probe.threshold_tol)?;
        r.number("critical_multiplier", c);
    }
    let finished = match outcome {
        OracleOutcome::Solution(s) => {
            r.value("exists", true)
                .number("min_w", s.w.iter().copied().fold(f64::INFINITY, f64::min))
                .number("min_u", s.u.iter().copied().fold(f64::INFINITY, f64::min));
            let mut t = FieldTable::default();
            let last = s.x.len() - 1;
            for i in 0..s.x.len() {
                t.push(
                    [s.x[i], 0.0],
                    s.u[i],
                    s.w[i],
                    s.d[i],
                    0.0,
                    i == 0 || i == last,
                );
            }
            Finished::ok(Some(t))
        }
        OracleOutcome::Nonexistent(cert) => {
            r.value("exists", false);
            r.open("certificate")
                .number("argmin", cert.argmin)
                .number("min_w", cert.min_w)
                .close();
            Finished {
                code: EXIT_NONEXISTENCE,
                fields: None,
            }
        }
    };
    r.close();
    Ok(finished)
}

fn cmd_functional(cfg: &RunConfig, r: &mut Report) -> Result<Finished, CliError> {
    let problem = build_problem(cfg)?;
    if !problem.phi_is_zero() {
        return Err(Error::NonzeroBoundaryData.into());
    }
    let grid = problem.grid();
    let (u, source) = match &cfg.u {
        Some(e) => {
            let mut u = ScalarField::from_fn(grid, |p| e.eval_at(p));
            u = ScalarField::from_parts(grid, u.interior(), &vec![0.0; grid.num_boundary()])?;
            (u, e.source().to_string())
        }
        None => (
            solve_second_bvp(&problem, &cfg.solver)?.u,
            "solution".to_string(),
        ),
    };
    let fv = eval_f(&u, &problem)?;
    let lv = eval_l(&u, &problem)?;
    let ig = integral_g(&u, grid, problem.gspec())?;
    let residual = crate::functionals::el_residual(&u, &problem)?;
    r.open("functional")
        .value("u", source)
        .number("F", fv)
        .number("L", lv)
        .number("integral_G", ig)
        .number("el_residual_sup", residual.sup_norm())
        .close();
    let d = hessian_determinant(&u, grid)?;
    let gs = problem.gspec();
    let w = d.map(|v| gs.w(v));
    Ok(Finished::ok(Some(table(
        grid,
        &u,
        Some(&w),
        Some(&d),
        &residual,
    ))))
}

fn cmd_probe(cfg: &RunConfig, r: &mut Report) -> Result<Finished, CliError> {
    let problem = build_problem(cfg)?;
    let mut overall = ProperVerdict::NoViolationFound;
    r.open("properness");
    for &kind in &cfg.probe.families {
        let family = TestFunctionFamily::with_range(
            kind,
            cfg.probe.scale_min,
            cfg.probe.scale_max,
            cfg.probe.count,
        );
        let probe = properness_probe(&problem, &family)?;
        r.open(kind.as_str());
        match probe.margin_estimate {
            Some(l) => r.number("margin_estimate", l),
            None => r.value("margin_estimate", "none"),
        };
        match probe.offset {
            Some(c) => r.number("offset", c),
            None => r.value("offset", "none"),
        };
        r.value("verdict", probe.verdict.as_str());
        r.value("members", probe.samples.len());
        r.close();
        if probe.verdict == ProperVerdict::NotProper {
            overall = ProperVerdict::NotProper;
        }
    }
    r.value("verdict", overall.as_str());
    r.close();
    Ok(Finished::ok(None))
}
