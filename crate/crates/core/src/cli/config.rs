//! Line-oriented run configuration.
//!
//! ```text
//! [domain]
//! kind = disk
//! radius = 1
//!
//! [g]
//! theta = 0
//!
//! [problem]
//! f = "0"
//! phi = "0"
//! psi = "1"
//! resolution = 64
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use crate::continuation::ContinuationOptions;
use crate::functionals::FamilyKind;
use crate::gfamily::GSpec;
use crate::linalg::SolverKind;
use crate::ma_dirichlet::InitMode;
use crate::mesh::DomainSpec;

use super::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Source term given inline or as a file of `x y value` rows.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Expr(Expr),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub families: Vec<FamilyKind>,
    pub count: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Bracket for the existence threshold search of `oracle1d`.
    pub threshold: Option<(f64, f64)>,
    pub threshold_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            families: vec![
                FamilyKind::ScaledParabola,
                FamilyKind::SkewedParabola,
                FamilyKind::BoundaryLayer,
            ],
            count: 25,
            scale_min: 0.1,
            scale_max: 1e3,
            threshold: None,
            threshold_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub write_fields: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub theta: f64,
    pub f: SourceSpec,
    pub phi: Expr,
    pub psi: Expr,
    /// Right-hand side of `det D^2 u = g` for the `ma` subcommand.
    pub det: Expr,
    /// Evaluation point of the `functional` subcommand; solved for when absent.
    pub u: Option<Expr>,
    /// `[a11, a22, a12]` of the `linma` operator.
    pub coefficients: [Expr; 3],
    pub resolution: usize,
    pub solver: ContinuationOptions,
    pub probe: ProbeConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn gspec(&self) -> GSpec {
        GSpec::new(self.theta, self.domain.dim()).expect("validated at parse time")
    }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("domain", &["kind", "a", "b", "radius", "semi_x", "semi_y"]),
    ("g", &["theta"]),
    (
        "problem",
        &[
            "f",
            "f_file",
            "phi",
            "psi",
            "det",
            "u",
            "a11",
            "a22",
            "a12",
            "resolution",
        ],
    ),
    (
        "solver",
        &[
            "t_steps",
            "damping",
            "fixed_point_tol",
            "max_picard_iters",
            "w_floor",
            "max_step_halvings",
            "newton_fallback",
            "max_newton_iters",
            "ma_newton_tol",
            "ma_max_newton_iters",
            "init",
            "linear_solver",
            "linear_tol",
            "max_linear_iters",
        ],
    ),
    ("output", &["dir", "fields"]),
    (
        "probe",
        &[
            "families",
            "count",
            "scale_min",
            "scale_max",
            "threshold_lo",
            "threshold_hi",
            "threshold_tol",
        ],
    ),
];

#[derive(Debug, Clone)]
struct Entry {
    section: &'static str,
    key: String,
    value: String,
    line: usize,
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(raw: &str, line: usize) -> Result<String, ConfigError> {
    let v = raw.trim();
    if let Some(rest) = v.strip_prefix('"') {
        match rest.strip_suffix('"') {
            Some(inner) if !inner.contains('"') => Ok(inner.to_string()),
            _ => Err(ConfigError::at(line, "unterminated string")),
        }
    } else {
        Ok(v.to_string())
    }
}

fn lex(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<&'static str> = None;
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = strip_comment(raw).trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, "malformed section header"))?
                .trim();
            let Some(&(known, _)) = SCHEMA.iter().find(|(n, _)| *n == name) else {
                return Err(ConfigError::at(line, format!("unknown section [{name}]")));
            };
            section = Some(known);
            continue;
        }
        let Some((key, value)) = s.split_once('=') else {
            return Err(ConfigError::at(line, "expected 'key = value'"));
        };
        let key = key.trim();
        let Some(sec) = section else {
            return Err(ConfigError::at(
                line,
                format!("key '{key}' outside of any section"),
            ));
        };
        let keys = SCHEMA
            .iter()
            .find(|(n, _)| *n == sec)
            .map(|s| s.1)
            .unwrap_or(&[]);
        if !keys.contains(&key) {
            return Err(ConfigError::at(
                line,
                format!("unknown key '{key}' in [{sec}]"),
            ));
        }
        if !seen.insert((sec, key.to_string())) {
            return Err(ConfigError::at(
                line,
                format!("duplicate key '{key}' in [{sec}]"),
            ));
        }
        entries.push(Entry {
            section: sec,
            key: key.to_string(),
            value: unquote(value, line)?,
            line,
        });
    }
    Ok(entries)
}

struct Table {
    entries: Vec<Entry>,
}

impl Table {
    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries
            .iter()
            .find(|e| e.section == section && e.key == key)
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.get(section, key).map(|e| e.line)
    }

    fn num(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(section, key)
            .map(|e| {
                e.value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        ConfigError::at(
                            e.line,
                            format!("'{key}' expects a number, got '{}'", e.value),
                        )
                    })
            })
            .transpose()
    }

    fn count(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(section, key)
            .map(|e| {
                e.value.parse::<usize>().map_err(|_| {
                    ConfigError::at(
                        e.line,
                        format!("'{key}' expects a non-negative integer, got '{}'", e.value),
                    )
                })
            })
            .transpose()
    }

    fn flag(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        self.get(section, key)
            .map(|e| match e.value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(ConfigError::at(
                    e.line,
                    format!("'{key}' expects true or false, got '{other}'"),
                )),
            })
            .transpose()
    }

    fn expr(&self, section: &str, key: &str) -> Result<Option<Expr>, ConfigError> {
        self.get(section, key)
            .map(|e| {
                Expr::parse(&e.value)
                    .map_err(|err| ConfigError::at(e.line, format!("in '{key}': {err}")))
            })
            .transpose()
    }

    fn required_num(
        &self,
        section: &str,
        key: &str,
        header_line: usize,
    ) -> Result<f64, ConfigError> {
        self.num(section, key)?
            .ok_or_else(|| ConfigError::at(header_line, format!("[{section}] requires '{key}'")))
    }
}

fn parse_domain(t: &Table) -> Result<DomainSpec, ConfigError> {
    let kind = t
        .get("domain", "kind")
        .ok_or_else(|| ConfigError::general("[domain] requires 'kind'"))?;
    let line = kind.line;
    let domain = match kind.value.as_str() {
        "interval" => DomainSpec::interval(
            t.num("domain", "a")?.unwrap_or(0.0),
            t.num("domain", "b")?.unwrap_or(1.0),
        ),
        "disk" => DomainSpec::disk(t.num("domain", "radius")?.unwrap_or(1.0)),
        "ellipse" => DomainSpec::ellipse(
            t.required_num("domain", "semi_x", line)?,
            t.required_num("domain", "semi_y", line)?,
        ),
        other => {
            return Err(ConfigError::at(
                line,
                format!("unknown domain kind '{other}' (expected interval, disk or ellipse)"),
            ))
        }
    };
    domain.map_err(|e| ConfigError::at(line, e.to_string()))
}

/// Boundary sample points used for parse-time checks of the data.
pub fn boundary_samples(domain: &DomainSpec) -> Vec<[f64; 2]> {
    match *domain {
        DomainSpec::Interval { a, b } => vec![[a, 0.0], [b, 0.0]],
        _ => {
            let (ax, ay) = domain.semi_axes();
            (0..256)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / 256.0;
                    [ax * t.cos(), ay * t.sin()]
                })
                .collect()
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let t = Table {
        entries: lex(text)?,
    };
    let domain = parse_domain(&t)?;

    let theta = t.num("g", "theta")?.unwrap_or(0.0);
    if let Err(e) = GSpec::new(theta, domain.dim()) {
        let line = t.line_of("g", "theta");
        let msg = if theta >= 1.0 / domain.dim() as f64 && theta < 1.0 {
            format!(
                "theta must be < 1/n (n = {}, theta = {theta})",
                domain.dim()
            )
        } else {
            e.to_string()
        };
        return Err(ConfigError { line, message: msg });
    }

    let f = match (t.expr("problem", "f")?, t.get("problem", "f_file")) {
        (Some(_), Some(e)) => {
            return Err(ConfigError::at(
                e.line,
                "give either 'f' or 'f_file', not both",
            ))
        }
        (Some(f), None) => SourceSpec::Expr(f),
        (None, Some(e)) => SourceSpec::File(PathBuf::from(&e.value)),
        (None, None) => SourceSpec::Expr(Expr::parse("0").expect("literal")),
    };
    let default = |s: &str| Expr::parse(s).expect("literal");
    let phi = t.expr("problem", "phi")?.unwrap_or_else(|| default("0"));
    let psi = t.expr("problem", "psi")?.unwrap_or_else(|| default("1"));
    for p in boundary_samples(&domain) {
        let v = psi.eval_at(p);
        if !(v > 0.0 && v.is_finite()) {
            return Err(ConfigError {
                line: t.line_of("problem", "psi"),
                message: format!(
                    "psi must be positive on the boundary, got psi({}, {}) = {v}",
                    p[0], p[1]
                ),
            });
        }
        if !phi.eval_at(p).is_finite() {
            return Err(ConfigError {
                line: t.line_of("problem", "phi"),
                message: format!("phi is not finite at ({}, {})", p[0], p[1]),
            });
        }
    }
    if domain.dim() == 1 {
        for (key, e) in [
            ("f", t.expr("problem", "f")?),
            ("phi", Some(phi.clone())),
            ("psi", Some(psi.clone())),
        ] {
            if let Some(e) = e {
                if !e.is_one_dimensional() {
                    return Err(ConfigError {
                        line: t.line_of("problem", key),
                        message: format!("'{key}' depends on y on a one-dimensional domain"),
                    });
                }
            }
        }
    }
    let det = t.expr("problem", "det")?.unwrap_or_else(|| default("1"));
    let u = t.expr("problem", "u")?;
    let coefficients = [
        t.expr("problem", "a11")?.unwrap_or_else(|| default("1")),
        t.expr("problem", "a22")?.unwrap_or_else(|| default("1")),
        t.expr("problem", "a12")?.unwrap_or_else(|| default("0")),
    ];
    let resolution = t.count("problem", "resolution")?.unwrap_or(64);
    if resolution < 3 {
        return Err(ConfigError {
            line: t.line_of("problem", "resolution"),
            message: format!("resolution must be at least 3, got {resolution}"),
        });
    }

    let solver = parse_solver(&t)?;
    let probe = parse_probe(&t)?;
    let output = OutputConfig {
        dir: t
            .get("output", "dir")
            .map(|e| PathBuf::from(&e.value))
            .unwrap_or_else(|| PathBuf::from("out")),
        write_fields: t.flag("output", "fields")?.unwrap_or(true),
    };

    Ok(RunConfig {
        domain,
        theta,
        f,
        phi,
        psi,
        det,
        u,
        coefficients,
        resolution,
        solver,
        probe,
        output,
    })
}

fn parse_solver(t: &Table) -> Result<ContinuationOptions, ConfigError> {
    let mut o = ContinuationOptions::default();
    let s = "solver";
    if let Some(v) = t.count(s, "t_steps")? {
        o.t_steps = v;
    }
    if let Some(v) = t.num(s, "damping")? {
        o.damping = v;
    }
    if let Some(v) = t.num(s, "fixed_point_tol")? {
        o.fixed_point_tol = v;
    }
    if let Some(v) = t.count(s, "max_picard_iters")? {
        o.max_picard_iters = v;
    }
    if let Some(v) = t.num(s, "w_floor")? {
        o.w_floor = v;
    }
    if let Some(v) = t.count(s, "max_step_halvings")? {
        o.max_step_halvings = v;
    }
    if let Some(v) = t.flag(s, "newton_fallback")? {
        o.newton_fallback = v;
    }
    if let Some(v) = t.count(s, "max_newton_iters")? {
        o.max_newton_iters = v;
    }
    if let Some(v) = t.num(s, "ma_newton_tol")? {
        o.ma.newton_tol = v;
    }
    if let Some(v) = t.count(s, "ma_max_newton_iters")? {
        o.ma.max_newton_iters = v;
    }
    if let Some(e) = t.get(s, "init") {
        o.ma.init_mode = match e.value.as_str() {
            "poisson" => InitMode::PoissonSqrt,
            "paraboloid" => InitMode::Paraboloid,
            other => {
                return Err(ConfigError::at(
                    e.line,
                    format!("unknown init '{other}' (expected poisson or paraboloid)"),
                ))
            }
        };
    }
    if let Some(e) = t.get(s, "linear_solver") {
        o.linear.solver_kind = match e.value.as_str() {
            "direct" => SolverKind::DirectSparse,
            "iterative" => SolverKind::Iterative,
            other => {
                return Err(ConfigError::at(
                    e.line,
                    format!("unknown linear_solver '{other}' (expected direct or iterative)"),
                ))
            }
        };
    }
    if let Some(v) = t.num(s, "linear_tol")? {
        o.linear.linear_tol = v;
    }
    if let Some(v) = t.count(s, "max_linear_iters")? {
        o.linear.max_linear_iters = v;
    }
    o.ma.linear = o.linear;
    o.validate().map_err(|e| ConfigError {
        line: t.entries.iter().find(|e| e.section == s).map(|e| e.line),
        message: e.to_string(),
    })?;
    Ok(o)
}

fn parse_probe(t: &Table) -> Result<ProbeConfig, ConfigError> {
    let mut p = ProbeConfig::default();
    let s = "probe";
    if let Some(e) = t.get(s, "families") {
        p.families = e
            .value
            .split(',')
            .map(|name| {
                FamilyKind::parse(name.trim()).ok_or_else(|| {
                    ConfigError::at(e.line, format!("unknown family '{}'", name.trim()))
                })
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = t.count(s, "count")? {
        p.count = v;
    }
    if let Some(v) = t.num(s, "scale_min")? {
        p.scale_min = v;
    }
    if let Some(v) = t.num(s, "scale_max")? {
        p.scale_max = v;
    }
    if !(p.scale_min > 0.0 && p.scale_min < p.scale_max) {
        return Err(ConfigError {
            line: t.line_of(s, "scale_min").or(t.line_of(s, "scale_max")),
            message: "need 0 < scale_min < scale_max".into(),
        });
    }
    match (t.num(s, "threshold_lo")?, t.num(s, "threshold_hi")?) {
        (Some(lo), Some(hi)) if lo < hi => p.threshold = Some((lo, hi)),
        (None, None) => {}
        _ => {
            return Err(ConfigError {
                line: t
                    .line_of(s, "threshold_lo")
                    .or(t.line_of(s, "threshold_hi")),
                message: "threshold search needs both threshold_lo < threshold_hi".into(),
            })
        }
    }
    if let Some(v) = t.num(s, "threshold_tol")? {
        if !(v > 0.0) {
            return Err(ConfigError::at(
                t.line_of(s, "threshold_tol").unwrap_or(0),
                "threshold_tol must be positive",
            ));
        }
        p.threshold_tol = v;
    }
    Ok(p)
}
