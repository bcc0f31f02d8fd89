//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::f64::consts::PI;
use std::io::Write;
use std::process::Command;

use abreu_bvp::continuation::{
    solve_second_bvp, solve_second_bvp_from, ContinuationOptions, Problem,
};
use abreu_bvp::estimates::{boundary_cofactor_residuals, observed_orders};
use abreu_bvp::functionals::{
    concavity_probe, eval_f, eval_l, gradient_check, properness_probe, FamilyKind, ProperVerdict,
    TestFunctionFamily,
};
use abreu_bvp::gfamily::GSpec;
use abreu_bvp::ma_dirichlet::InitMode;
use abreu_bvp::mesh::{
    build_grid, cofactor_divergence_sup, cofactor_divergence_sup_inside, DomainSpec, Grid,
    ScalarField,
};
use abreu_bvp::oned_oracle::{existence_threshold_1d, solve_exact_1d, OneDProblem, OracleOutcome};

/// Writes past the test harness capture so the line shows in every run.
fn verdict(id: usize, name: &str, pass: bool, details: String) {
    let line = format!(
        "acceptance {id:>2} {} {name}: {details}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn disk_problem(res: usize, theta: f64, f: f64) -> Problem {
    Problem::from_functions(
        DomainSpec::disk(1.0).unwrap(),
        res,
        theta,
        move |_| f,
        |_| 0.0,
        |_| 1.0,
    )
    .unwrap()
}

fn interval_problem(res: usize, f: f64) -> Problem {
    Problem::from_functions(
        DomainSpec::interval(0.0, 1.0).unwrap(),
        res,
        0.0,
        move |_| f,
        |_| 0.0,
        |_| 1.0,
    )
    .unwrap()
}

fn paraboloid(grid: &Grid, scale: f64) -> ScalarField {
    ScalarField::from_fn(grid, |p| scale * 0.5 * (p[0] * p[0] + p[1] * p[1] - 1.0))
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

#[test]
fn criterion_01_trivial_disk_solution() {
    let p = disk_problem(64, 0.0, 0.0);
    let s = solve_second_bvp(&p, &ContinuationOptions::default()).unwrap();
    let u_err = s.u.max_abs_diff(&paraboloid(p.grid(), 1.0)).unwrap();
    let w_err =
        s.w.values()
            .iter()
            .fold(0.0f64, |m, w| m.max((w - 1.0).abs()));
    verdict(
        1,
        "trivial disk solution",
        u_err <= 1e-6 && w_err <= 1e-8,
        format!("|u - (r^2 - 1)/2| = {u_err:.3e} (<= 1e-6), |w - 1| = {w_err:.3e} (<= 1e-8)"),
    );
}

#[test]
fn criterion_02_oracle_equivalence_in_one_dimension() {
    let oracle = OneDProblem::constant_source((0.0, 1.0), 0.0, 4.0, 1.0).unwrap();
    let errs: Vec<f64> = [64, 128]
        .iter()
        .map(|&res| {
            let p = interval_problem(res, 4.0);
            let s = solve_second_bvp(&p, &ContinuationOptions::default()).unwrap();
            let OracleOutcome::Solution(o) = solve_exact_1d(&oracle, res).unwrap() else {
                panic!("oracle reports nonexistence for f = 4");
            };
            p.grid()
                .coords()
                .iter()
                .zip(s.u.values())
                .fold(0.0f64, |m, (c, &u)| m.max((u - o.u_at(c[0])).abs()))
        })
        .collect();
    let ratio = errs[0] / errs[1];
    verdict(
        2,
        "continuation matches 1D oracle",
        (3.5..=4.5).contains(&ratio),
        format!(
            "sup errors {} at 64/128, ratio {ratio:.3} in [3.5, 4.5]",
            fmt_list(&errs)
        ),
    );
}

#[test]
fn criterion_03_nonexistence_and_properness() {
    let oracle = |c: f64| {
        let p = OneDProblem::constant_source((0.0, 1.0), 0.0, c, 1.0).unwrap();
        solve_exact_1d(&p, 129).unwrap().exists()
    };
    let (exists_79, exists_81) = (oracle(7.9), oracle(8.1));
    let template = OneDProblem::constant_source((0.0, 1.0), 0.0, 1.0, 1.0).unwrap();
    let threshold = existence_threshold_1d(&template, (0.0, 100.0), 129, 1e-7).unwrap();

    let family = TestFunctionFamily::new(FamilyKind::ScaledParabola, 25);
    let v20 = properness_probe(&interval_problem(65, 20.0), &family)
        .unwrap()
        .verdict;
    let v0 = properness_probe(&interval_problem(65, 0.0), &family)
        .unwrap()
        .verdict;

    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("c20.cfg");
    std::fs::write(
        &cfg,
        "[domain]\nkind = interval\na = 0\nb = 1\n[problem]\nf = \"20\"\nresolution = 65\n",
    )
    .unwrap();
    let code = Command::new(env!("CARGO_BIN_EXE_abreu-bvp"))
        .args(["solve", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap()
        .status
        .code();

    let pass = exists_79
        && !exists_81
        && (threshold - 8.0).abs() <= 1e-6
        && v20 == ProperVerdict::NotProper
        && v0 == ProperVerdict::NoViolationFound
        && code == Some(4);
    verdict(
        3,
        "nonexistence and properness agree",
        pass,
        format!(
            "exists(7.9) = {exists_79}, exists(8.1) = {exists_81}, threshold = {threshold:.8}, \
             probe(c = 20) = {}, probe(c = 0) = {}, solve exit code at c = 20: {code:?}",
            v20.as_str(),
            v0.as_str()
        ),
    );
}

#[test]
fn criterion_04_large_source_on_disk() {
    let p = disk_problem(64, 0.0, 50.0);
    let opts = ContinuationOptions::default();
    let a = solve_second_bvp(&p, &opts).unwrap();
    let mut alt = opts;
    alt.ma.init_mode = InitMode::Paraboloid;
    let w0 = ScalarField::from_fn(p.grid(), |q| 1.0 + 0.5 * (1.0 - q[0] * q[0] - q[1] * q[1]));
    let b = solve_second_bvp_from(&p, &alt, &w0).unwrap();
    let el = a.el_residual_norm.max(b.el_residual_norm);
    let min_w = a.w.min().min(b.w.min());
    let min_d = a.d.min().min(b.d.min());
    let gap = a.u.max_abs_diff(&b.u).unwrap();
    verdict(
        4,
        "large source f = 50 on the disk",
        el <= 1e-4 * 50.0 && min_w > 0.0 && min_d > 0.0 && gap <= 1e-5,
        format!(
            "EL residual {el:.3e} (<= 5e-3), min w {min_w:.3e}, min d {min_d:.3e}, \
             |u_a - u_b| = {gap:.3e} (<= 1e-5)"
        ),
    );
}

#[test]
fn criterion_05_gradient_check() {
    let p = disk_problem(64, 0.0, 0.0);
    let u = paraboloid(p.grid(), 1.0);
    let eta = ScalarField::from_fn(p.grid(), |q| {
        let b = (1.0 - 4.0 * (q[0] * q[0] + q[1] * q[1])).max(0.0);
        0.1 * b * b
    });
    let steps = [1e-2, 1e-3];
    let gaps: Vec<f64> = steps
        .iter()
        .map(|&s| gradient_check(&u, &eta, &p, s).unwrap().relative_gap)
        .collect();
    let order = observed_orders(&steps, &gaps)[0];
    verdict(
        5,
        "Euler-Lagrange gradient check",
        order >= 1.8 && gaps[1] <= 1e-5,
        format!(
            "gaps {} at s = 1e-2, 1e-3, order {order:.3} (>= 1.8), gap(1e-3) <= 1e-5",
            fmt_list(&gaps)
        ),
    );
}

#[test]
fn criterion_06_concavity_of_a() {
    let grid = build_grid(DomainSpec::disk(1.0).unwrap(), 64).unwrap();
    let (u0, u1) = (paraboloid(&grid, 1.0), paraboloid(&grid, 2.0));
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    let mut fit = 0.0f64;
    for theta in [0.0, 0.125, 0.25 - 1e-9] {
        let gs = GSpec::new(theta, 2).unwrap();
        let probe = concavity_probe(&u0, &u1, &grid, &gs, 11).unwrap();
        let rel = probe.max_second_difference / probe.values[0].abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        pass &= probe.max_second_difference <= 1e-8 * probe.values[0].abs();
        if theta == 0.0 {
            fit = probe
                .ts
                .iter()
                .zip(&probe.values)
                .fold(0.0f64, |m, (&t, &a)| {
                    m.max((a - 2.0 * PI * (1.0 + t).ln()).abs())
                });
        }
    }
    verdict(
        6,
        "concavity of A(t)",
        pass && fit <= 1e-2,
        format!(
            "max second difference / |A(0)| = {worst:.3e} (<= 1e-8) over theta in {{0, 1/8, 1/4}}, \
             |A - 2 pi log(1 + t)| = {fit:.3e} (<= 1e-2)"
        ),
    );
}

#[test]
fn criterion_07_boundary_cofactor_identity() {
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let resolutions = [32, 64, 128];
    let mut hs = Vec::new();
    let mut radial = Vec::new();
    let mut smooth = Vec::new();
    let mut unit = 0.0f64;
    for res in resolutions {
        let g = build_grid(DomainSpec::disk(1.0).unwrap(), res).unwrap();
        hs.push(g.h());
        let u = ScalarField::from_fn(&g, |p| p[0] * p[0] + p[1] * p[1] - 1.0);
        radial.push(sup(&boundary_cofactor_residuals(&u, &g).unwrap()));
        let v = ScalarField::from_fn(&g, |p| {
            (0.5 * (p[0] * p[0] + p[1] * p[1])).exp() - 0.5f64.exp()
        });
        smooth.push(sup(&boundary_cofactor_residuals(&v, &g).unwrap()));
        if res == 64 {
            unit = sup(&boundary_cofactor_residuals(&paraboloid(&g, 1.0), &g).unwrap());
        }
    }
    // r^2 - 1 is reproduced exactly by the boundary fit, so its residual is
    // zero to rounding at every resolution; the order is measured above that
    // floor and on a non-polynomial radial function.
    let floor = 1e-8;
    let radial_orders = observed_orders(&hs, &radial);
    let radial_ok = radial.iter().all(|&e| e <= floor) || radial_orders.iter().all(|&o| o >= 1.0);
    let smooth_orders = observed_orders(&hs, &smooth);
    let smooth_ok = smooth_orders.iter().all(|&o| o >= 1.0);
    verdict(
        7,
        "boundary cofactor identity",
        radial_ok && smooth_ok && unit <= 1e-8,
        format!(
            "r^2 - 1: sup {} (zero within {floor:e}), orders {}; exp(r^2/2) - exp(1/2): sup {}, orders {} (>= 1); \
             unit paraboloid at 64: {unit:.3e} (<= 1e-8)",
            fmt_list(&radial),
            fmt_list(&radial_orders),
            fmt_list(&smooth),
            fmt_list(&smooth_orders)
        ),
    );
}

#[test]
fn criterion_08_maximum_principle() {
    let mut details = Vec::new();
    let mut pass = true;
    for f in [-4.0, 4.0] {
        let s =
            solve_second_bvp(&interval_problem(65, f), &ContinuationOptions::default()).unwrap();
        let e = s.diagnostics.get("max_principle").unwrap();
        let gap = if f < 0.0 {
            e.get("min_gap")
        } else {
            e.get("max_gap")
        }
        .unwrap();
        pass &= e.pass == Some(true) && gap <= 1e-8;
        details.push(format!(
            "f = {f}: {} gap {gap:.3e}",
            if f < 0.0 { "min" } else { "max" }
        ));
    }
    verdict(
        8,
        "maximum principle for w",
        pass,
        format!(
            "{} (extremum on the boundary, gap <= 1e-8)",
            details.join(", ")
        ),
    );
}

#[test]
fn criterion_09_cofactor_divergence() {
    let mut hs = Vec::new();
    let mut inside = Vec::new();
    let mut full = Vec::new();
    for res in [32, 64, 128] {
        let g = build_grid(DomainSpec::disk(1.0).unwrap(), res).unwrap();
        let u = ScalarField::from_fn(&g, |p| (0.5 * (p[0] * p[0] + p[1] * p[1])).exp());
        hs.push(g.h());
        inside.push(cofactor_divergence_sup_inside(&u, &g, 0.8).unwrap());
        full.push(cofactor_divergence_sup(&u, &g).unwrap());
    }
    let orders = observed_orders(&hs, &inside);
    let full_orders = observed_orders(&hs, &full);
    verdict(
        9,
        "cofactor rows are divergence free",
        orders.iter().all(|&o| o >= 1.8),
        format!(
            "sup over r <= 0.8: {} orders {} (>= 1.8); all eligible nodes: {} orders {}",
            fmt_list(&inside),
            fmt_list(&orders),
            fmt_list(&full),
            fmt_list(&full_orders)
        ),
    );
}

#[test]
fn criterion_10_functional_closed_forms() {
    let p = disk_problem(64, 0.0, 0.0);
    let u = paraboloid(p.grid(), 1.0);
    let f = eval_f(&u, &p).unwrap();
    let l = eval_l(&u, &p).unwrap();
    verdict(
        10,
        "functional closed forms",
        (f + PI).abs() <= 1e-2 && (l - PI).abs() <= 1e-2,
        format!("F = {f:.6} (-pi +- 1e-2), L = {l:.6} (pi +- 1e-2)"),
    );
}
