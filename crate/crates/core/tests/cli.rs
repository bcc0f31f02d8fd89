use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use abreu_bvp::cli::{report_lookup, FieldTable};
use tempfile::TempDir;

const DISK: &str = r#"
[domain]
kind = disk
radius = 1

[g]
theta = 0

[problem]
f = "0"
phi = "0"
psi = "1"
resolution = 24
"#;

fn interval(c: f64) -> String {
    format!("[domain]\nkind = interval\na = 0\nb = 1\n\n[problem]\nf = \"{c}\"\nresolution = 65\n")
}

struct Run {
    code: i32,
    out: PathBuf,
    stderr: String,
}

impl Run {
    fn report(&self) -> String {
        fs::read_to_string(self.out.join("report.txt")).unwrap()
    }

    fn get(&self, path: &[&str]) -> Option<String> {
        report_lookup(&self.report(), path)
    }
}

fn exec(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_abreu-bvp"));
    cmd.args(args).current_dir(dir);
    match threads {
        Some(t) => cmd.env("ABREU_BVP_THREADS", t),
        None => cmd.env_remove("ABREU_BVP_THREADS"),
    };
    cmd.output().unwrap()
}

fn run_in(dir: &TempDir, sub: &str, config: &str, out: &str) -> Run {
    run_threads(dir, sub, config, out, None)
}

fn run_threads(dir: &TempDir, sub: &str, config: &str, out: &str, threads: Option<&str>) -> Run {
    let cfg = dir.path().join(format!("{out}.cfg"));
    fs::write(&cfg, config).unwrap();
    let o = exec(
        dir.path(),
        &[sub, "--config", cfg.to_str().unwrap(), "--out", out],
        threads,
    );
    Run {
        code: o.status.code().unwrap(),
        out: dir.path().join(out),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

#[test]
fn solve_trivial_disk_writes_fields() {
    let dir = TempDir::new().unwrap();
    let r = run_in(&dir, "solve", DISK, "trivial");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.get(&["status"]).as_deref(), Some("ok"));
    assert_eq!(r.get(&["diagnostics", "all_pass"]).as_deref(), Some("true"));
    let text = fs::read_to_string(r.out.join("fields.txt")).unwrap();
    let t = FieldTable::parse(&text).unwrap();
    assert!(t.boundary.iter().any(|&b| b) && t.boundary.iter().any(|&b| !b));
    for i in 0..t.len() {
        let exact = 0.5 * (t.x[i] * t.x[i] + t.y[i] * t.y[i] - 1.0);
        assert!((t.u[i] - exact).abs() < 1e-6);
        assert!((t.w[i] - 1.0).abs() < 1e-8);
    }
    // written file reads back bitwise
    assert_eq!(t.to_text(), text);
}

#[test]
fn outputs_do_not_depend_on_runs_or_threads() {
    let dir = TempDir::new().unwrap();
    let config = DISK.replace("f = \"0\"", "f = \"2 + x\"");
    let a = run_threads(&dir, "solve", &config, "a", None);
    let b = run_threads(&dir, "solve", &config, "b", None);
    let c = run_threads(&dir, "solve", &config, "c", Some("4"));
    for r in [&a, &b, &c] {
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    let read = |r: &Run| fs::read(r.out.join("fields.txt")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
}

#[test]
fn oracle_reports_nonexistence_certificate() {
    let dir = TempDir::new().unwrap();
    let r = run_in(&dir, "oracle1d", &interval(20.0), "c20");
    assert_eq!(r.code, 4);
    assert_eq!(r.get(&["oracle", "exists"]).as_deref(), Some("false"));
    assert_eq!(
        r.get(&["oracle", "certificate", "argmin"]).as_deref(),
        Some("0.5")
    );
    assert_eq!(
        r.get(&["oracle", "certificate", "min_w"]).as_deref(),
        Some("-1.5")
    );

    let r = run_in(&dir, "oracle1d", &interval(4.0), "c4");
    assert_eq!(r.code, 0);
    let t = FieldTable::read(&r.out.join("fields.txt")).unwrap();
    assert_eq!(t.len(), 65);
    assert!((t.w[32] - 0.5).abs() < 1e-12);
}

#[test]
fn oracle_threshold_search() {
    let dir = TempDir::new().unwrap();
    let config = format!(
        "{}[probe]\nthreshold_lo = 0\nthreshold_hi = 100\n",
        interval(1.0)
    );
    let r = run_in(&dir, "oracle1d", &config, "thr");
    assert_eq!(r.code, 0);
    let c: f64 = r
        .get(&["oracle", "critical_multiplier"])
        .unwrap()
        .parse()
        .unwrap();
    assert!((c - 8.0).abs() < 1e-6);
}

#[test]
fn solver_exits_with_nonexistence_for_large_source() {
    let dir = TempDir::new().unwrap();
    let r = run_in(&dir, "solve", &interval(20.0), "solve20");
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert_eq!(r.get(&["status"]).as_deref(), Some("nonexistence"));
    assert!(!r.out.join("fields.txt").exists());
}

#[test]
fn properness_verdicts() {
    let dir = TempDir::new().unwrap();
    let r = run_in(&dir, "probe-properness", &interval(0.0), "p0");
    assert_eq!(r.code, 0);
    assert_eq!(
        r.get(&["properness", "verdict"]).as_deref(),
        Some("no violation found")
    );
    assert_eq!(
        r.get(&["properness", "scaled_parabola", "margin_estimate"])
            .as_deref(),
        Some("1.0")
    );
    let r = run_in(&dir, "probe-properness", &interval(20.0), "p20");
    assert_eq!(r.code, 0);
    assert_eq!(
        r.get(&["properness", "verdict"]).as_deref(),
        Some("not proper (witness found)")
    );
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let bad = DISK.replace("theta = 0", "theta = 0.5");
    let r = run_in(&dir, "solve", &bad, "bad");
    assert_eq!(r.code, 2);
    assert!(
        r.stderr.contains("line 7") && r.stderr.contains("theta must be < 1/n"),
        "{}",
        r.stderr
    );

    let bad = interval(1.0).replace("[problem]", "[problem]\npsi = \"x\u{2212}10\"");
    let r = run_in(&dir, "solve", &bad, "bad2");
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("psi must be positive"), "{}", r.stderr);

    let r = run_in(&dir, "oracle1d", DISK, "bad3");
    assert_eq!(r.code, 2);

    let nonzero = DISK.replace("phi = \"0\"", "phi = \"1\"");
    let r = run_in(&dir, "functional", &nonzero, "bad4");
    assert_eq!(r.code, 2);
}

#[test]
fn resolution_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("o.cfg");
    fs::write(&cfg, interval(4.0)).unwrap();
    let o = exec(
        dir.path(),
        &[
            "oracle1d",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "o",
            "--resolution",
            "9",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let t = FieldTable::read(&dir.path().join("o/fields.txt")).unwrap();
    assert_eq!(t.len(), 9);
}

#[test]
fn other_subcommands() {
    let dir = TempDir::new().unwrap();

    let ma = DISK.replace("phi = \"0\"", "phi = \"0\"\ndet = \"1\"");
    let r = run_in(&dir, "ma", &ma, "ma");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res: f64 = r.get(&["ma", "residual_sup"]).unwrap().parse().unwrap();
    assert!(res < 1e-9);

    let lin = DISK
        .replace("f = \"0\"", "f = \"4\"")
        .replace("phi = \"0\"", "phi = \"x^2 + y^2\"");
    let r = run_in(&dir, "linma", &lin, "linma");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let t = FieldTable::read(&r.out.join("fields.txt")).unwrap();
    for i in 0..t.len() {
        assert!((t.u[i] - (t.x[i] * t.x[i] + t.y[i] * t.y[i])).abs() < 1e-9);
    }

    let func = DISK
        .replace("resolution = 24", "resolution = 64")
        .replace("phi = \"0\"", "phi = \"0\"\nu = \"(x^2 + y^2 - 1) / 2\"");
    let r = run_in(&dir, "functional", &func, "func");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let f: f64 = r.get(&["functional", "F"]).unwrap().parse().unwrap();
    let l: f64 = r.get(&["functional", "L"]).unwrap().parse().unwrap();
    assert!((f + std::f64::consts::PI).abs() < 1e-2);
    assert!((l - std::f64::consts::PI).abs() < 1e-2);

    let r = run_in(&dir, "diagnostics", DISK, "diag");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r
        .get(&["diagnostics", "cofactor_divergence", "measured"])
        .is_some());
    assert!(r
        .get(&["diagnostics", "boundary_cofactor", "measured"])
        .is_some());
}

#[test]
fn source_from_sample_file() {
    let dir = TempDir::new().unwrap();
    let rows: String = (0..65)
        .map(|i| {
            let x = if i == 64 { 1.0 } else { i as f64 / 64.0 };
            format!("{x:e} 4\n")
        })
        .collect();
    fs::write(dir.path().join("f.txt"), rows).unwrap();
    let config = interval(4.0).replace("f = \"4\"", "f_file = f.txt");
    let r = run_in(&dir, "oracle1d", &config, "file");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r2 = run_in(&dir, "oracle1d", &interval(4.0), "expr");
    assert_eq!(
        fs::read(r.out.join("fields.txt")).unwrap(),
        fs::read(r2.out.join("fields.txt")).unwrap()
    );
}
