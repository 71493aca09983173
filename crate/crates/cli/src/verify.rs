//! `verify`: invariant batteries on built-in fixtures.

use anyhow::{bail, Result};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tmce_core::analysis::{check_small_sphere_curvature, check_c0_estimate, check_conformal_curvature};
use tmce_core::{
    build_domain, check_gradient_estimate, check_mean_convexity, conformal_mean_curvature, energy_gradient,
    mollify_scalar, mollify_vector, relaxed_energy, smoothed_energy, solve_nodal, subgraph_indicator,
    weighted_perimeter, DomainMesh, DomainSpec, MetricModel, MollifierSpec, ScalarField, SolverConfig, VectorField,
};

pub const SUITES: [&str; 4] = ["functionals", "perimeter", "conformal", "estimates"];

/// One line of the pass/fail table.
#[derive(Debug, Clone)]
pub struct Row {
    pub suite: &'static str,
    pub check: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

fn row(suite: &'static str, check: impl Into<String>, measured: f64, bound: f64, passed: bool) -> Row {
    Row {
        suite,
        check: check.into(),
        measured,
        bound,
        passed,
    }
}

/// Sum of a few random plane waves on the embedding coordinates.
fn smooth_field(mesh: &DomainMesh, rng: &mut StdRng, amp: f64) -> ScalarField {
    let modes: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0) * amp / 3.0,
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.0..6.3),
            ]
        })
        .collect();
    ScalarField::new(
        (0..mesh.n_nodes())
            .map(|v| {
                let p = mesh.embedding(v);
                modes.iter().map(|m| m[0] * (m[1] * p[0] + m[2] * p[1] + m[3]).sin()).sum()
            })
            .collect(),
    )
}

fn functionals() -> Result<Vec<Row>> {
    const S: &str = "functionals";
    let mut rows = Vec::new();
    let mut rng = StdRng::seed_from_u64(11);
    let alpha = 1.3;
    let eps = 1e-3;

    let mut worst: f64 = 0.0;
    for spec in [DomainSpec::EuclideanSquare { l: 1.0 }, DomainSpec::SphereCap { theta0: 0.8 }] {
        let mesh = build_domain(spec, 1.0 / 6.0)?;
        for _ in 0..3 {
            let u = ScalarField::new((0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let psi = ScalarField::new((0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let g = energy_gradient(&mesh, &u, &psi, alpha, eps)?;
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for v in 0..mesh.n_nodes() {
                let d = 1e-5;
                let (mut up, mut dn) = (u.clone(), u.clone());
                up.values[v] += d;
                dn.values[v] -= d;
                let fd = (smoothed_energy(&mesh, &up, &psi, alpha, eps)? - smoothed_energy(&mesh, &dn, &psi, alpha, eps)?)
                    / (2.0 * d);
                diff = diff.max((g.values[v] - fd).abs());
                scale = scale.max(fd.abs());
            }
            worst = worst.max(diff / scale);
        }
    }
    rows.push(row(S, "energy_gradient vs central differences", worst, 1e-6, worst <= 1e-6));

    let mesh = build_domain(DomainSpec::EuclideanDisk { r: 1.0 }, 1.0 / 8.0)?;
    let vol = mesh.volume();
    let cap = 2.0;
    let mut violations = 0usize;
    for _ in 0..20 {
        let u = ScalarField::new((0..mesh.n_nodes()).map(|_| rng.gen_range(-cap..cap)).collect());
        let e = relaxed_energy(&mesh, &u, &u, alpha)?;
        let tol = 1e-12 * (1.0 + e.f);
        let lower = (-alpha * cap).exp() * vol.max(e.bv);
        if e.f_alpha < lower * (1.0 - 1e-12) || e.f < vol.max(e.bv) - tol || e.f > vol + e.bv + tol {
            violations += 1;
        }
    }
    rows.push(row(S, "area bounds on 20 random capped fields (violations)", violations as f64, 0.0, violations == 0));

    let u = smooth_field(&mesh, &mut rng, 1.0);
    let psi = smooth_field(&mesh, &mut rng, 1.0);
    let a = 0.7;
    let j0 = relaxed_energy(&mesh, &u, &psi, alpha)?.j;
    let j1 = relaxed_energy(&mesh, &u.shifted(a), &psi.shifted(a), alpha)?.j;
    let rel = (j1 / j0 - (alpha * a).exp()).abs() / (alpha * a).exp();
    rows.push(row(S, "J(u+a; psi+a) = e^(alpha a) J(u; psi)", rel, 1e-12, rel <= 1e-12));

    let zero = ScalarField::constant(mesh.n_nodes(), 0.0);
    let fa = relaxed_energy(&mesh, &zero, &zero, alpha)?.f_alpha;
    let rel = (fa - vol).abs() / vol;
    rows.push(row(S, "F_alpha(0) = vol", rel, 1e-12, rel <= 1e-12));
    Ok(rows)
}

fn perimeter() -> Result<Vec<Row>> {
    const S: &str = "perimeter";
    let mut rows = Vec::new();
    let mut rng = StdRng::seed_from_u64(23);
    let h = 1.0 / 32.0;
    let mesh = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, h)?;
    let alpha = 1.0;
    let cap = 2.0;
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let u = smooth_field(&mesh, &mut rng, 1.0);
        let fa = relaxed_energy(&mesh, &u, &u, alpha)?.f_alpha;
        let p = weighted_perimeter(&subgraph_indicator(&mesh, &u, cap, h, alpha)?)?.total;
        worst = worst.max((fa - p).abs() / fa);
    }
    rows.push(row(S, "|F_alpha - perimeter| / F_alpha, 3 smooth fields", worst, 0.05, worst <= 0.05));

    let c = 0.4;
    let flat = ScalarField::constant(mesh.n_nodes(), c);
    let p = weighted_perimeter(&subgraph_indicator(&mesh, &flat, cap, h, alpha)?)?.total;
    let rel = (p - (alpha * c).exp() * mesh.volume()).abs() / p;
    rows.push(row(S, "flat sheet perimeter = e^(alpha c) vol", rel, 0.05, rel <= 0.05));

    let u = smooth_field(&mesh, &mut rng, 0.5);
    let shift = 4.0 * h;
    let p0 = weighted_perimeter(&subgraph_indicator(&mesh, &u, cap, h, alpha)?)?.total;
    let p1 = weighted_perimeter(&subgraph_indicator(&mesh, &u.shifted(shift), cap, h, alpha)?)?.total;
    let rel = (p1 / p0 - (alpha * shift).exp()).abs();
    rows.push(row(S, "vertical shift scales perimeter by e^(alpha a)", rel, 1e-9, rel <= 1e-9));
    Ok(rows)
}

fn conformal() -> Result<Vec<Row>> {
    const S: &str = "conformal";
    let mut rows = Vec::new();
    let u1 = |p: [f64; 2]| 0.3 * (2.0 * p[0]).sin() + 0.2 * p[0] * p[0];
    let e = check_conformal_curvature(DomainSpec::Interval { a: 1.0 }, 1.5, 1.0 / 32.0, &u1)?;
    rows.push(row(S, "formula vs direct divergence, interval (order)", e.measured, e.bound, e.passed));
    let u2 = |p: [f64; 2]| 0.4 * (2.0 * p[0]).sin() * (p[1] + 0.3).cos();
    let e = check_conformal_curvature(DomainSpec::EuclideanSquare { l: 1.0 }, 2.0, 1.0 / 16.0, &u2)?;
    rows.push(row(S, "formula vs direct divergence, square (order)", e.measured, e.bound, e.passed));
    let h = 0.37;
    let d = (conformal_mean_curvature(h, 0.0, 0.0, 3) - h).abs();
    rows.push(row(S, "f = 0 is the identity", d, 0.0, d == 0.0));
    let (alpha, n, r) = (2.0, 2.0, 0.6);
    let got = conformal_mean_curvature(0.0, alpha / n, alpha * r / n, 3);
    let d = (got - (-alpha * r / n).exp() * alpha).abs();
    rows.push(row(S, "horizontal slice has e^(-alpha r/n) alpha", d, 1e-15, d <= 1e-15));
    Ok(rows)
}

/// Worst `√(h'² + |Y|²) - (f + ε)` over the evaluation set.
fn constraint_excess(mesh: &DomainMesh, sigma: f64, eps: f64) -> Result<f64> {
    let chart = &mesh.chart;
    let spec = MollifierSpec::new(sigma)?;
    let n = chart.n_nodes();
    let f: Vec<f64> = (0..n)
        .map(|v| {
            let p = chart.coords(v);
            1.0 + 0.5 * (6.0 * p[0]).sin() * (4.0 * p[1]).cos()
        })
        .collect();
    let mut h = ScalarField::constant(n, 0.0);
    let mut x = VectorField::zeros(n, 2);
    for v in 0..n {
        let p = chart.coords(v);
        let (phi, beta) = (3.0 * p[0] * p[1] + p[0], 2.0 * p[0] + p[1]);
        h.values[v] = f[v] * phi.cos();
        x.at_mut(v)[0] = f[v] * phi.sin() * beta.cos();
        x.at_mut(v)[1] = f[v] * phi.sin() * beta.sin();
    }
    let hm = mollify_scalar(chart, &h, &spec)?;
    let ym = mollify_vector(chart, &x, &spec)?;
    let mut worst = f64::NEG_INFINITY;
    for v in spec.evaluation_set(chart)? {
        let y = ym.at(v);
        let len = (hm.values[v].powi(2) + y[0] * y[0] + y[1] * y[1]).sqrt();
        worst = worst.max(len - (f[v] + eps));
    }
    Ok(worst)
}

fn estimates() -> Result<Vec<Row>> {
    const S: &str = "estimates";
    let mut rows = Vec::new();
    let disk = build_domain(DomainSpec::EuclideanDisk { r: 1.0 }, 1.0 / 16.0)?;
    let e = check_mean_convexity(&disk)?;
    rows.push(row(S, "mean convexity, euclidean_disk(1)", e.measured, e.bound, e.passed));
    let hemi = build_domain(DomainSpec::Hemisphere, 1.0 / 16.0)?;
    let e = check_mean_convexity(&hemi)?;
    rows.push(row(S, "mean convexity, hemisphere", e.measured, e.bound, e.passed));
    let big = build_domain(DomainSpec::SphereCap { theta0: 2.0 }, 1.0 / 32.0)?;
    let e = check_mean_convexity(&big)?;
    rows.push(row(S, "sphere_cap(2.0) is rejected as not mean convex", e.measured, e.bound, !e.passed));
    for model in [MetricModel::PolarFlat, MetricModel::PolarSphere, MetricModel::PolarHyperbolic] {
        let e = check_small_sphere_curvature(model, &[0.05, 0.1, 0.2, 0.3])?;
        rows.push(row(
            S,
            format!("small geodesic circles H r -> n-1, {model:?}"),
            e.measured,
            e.bound,
            e.passed,
        ));
    }

    let psi = ScalarField::constant(disk.n_nodes(), 0.0);
    let sol = solve_nodal(&disk, &psi, 1.0, &SolverConfig::default())?;
    let grid: Vec<f64> = (0..=100).map(|k| 0.1 * k as f64).collect();
    let e = check_gradient_estimate(&disk, &sol.u, 1.0, &grid)?;
    rows.push(row(S, "gradient estimate on the disk solve (smallest K)", e.measured, e.bound, e.passed));
    let small = build_domain(DomainSpec::EuclideanDisk { r: 0.8 }, 1.0 / 12.0)?;
    let psi = ScalarField::constant(small.n_nodes(), 1.5);
    let sol = solve_nodal(&small, &psi, 1.0, &SolverConfig::default())?;
    let e = check_c0_estimate(&small, &sol.u, &psi, 1.0)?;
    rows.push(row(S, "C0 estimate against the frozen constant", e.measured, e.bound, e.passed));

    let mass = (MollifierSpec::quadrature_mass(2) - 1.0).abs();
    rows.push(row(S, "mollifier unit mass", mass, 1e-10, mass <= 1e-10));
    let fixture = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 1.0 / 64.0)?;
    let mut sigma0 = 0.0;
    for sigma in [0.2, 0.1, 0.05, 0.025] {
        if constraint_excess(&fixture, sigma, 0.05)? <= 0.0 {
            if sigma0 == 0.0 {
                sigma0 = sigma;
            }
        } else {
            sigma0 = 0.0;
        }
    }
    rows.push(row(S, "mollified constraint holds below sigma_0 (eps = 0.05)", sigma0, 0.0, sigma0 > 0.0));

    let chart = &fixture.chart;
    let g = ScalarField::new(
        (0..chart.n_nodes())
            .map(|v| {
                let p = chart.coords(v);
                (6.0 * p[0]).sin() * (3.0 * p[1]).cos() + p[0] * p[0]
            })
            .collect(),
    );
    let sample = MollifierSpec::new(0.2)?.evaluation_set(chart)?;
    let mut errs = Vec::new();
    for sigma in [0.2, 0.1, 0.05] {
        let m = mollify_scalar(chart, &g, &MollifierSpec::new(sigma)?)?;
        errs.push(sample.iter().map(|&v| (m.values[v] - g.values[v]).abs()).sum::<f64>());
    }
    let ratio = errs.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    rows.push(row(S, "mollifier L1 error shrinks when sigma halves (worst ratio)", ratio, 0.5, ratio <= 0.5));
    Ok(rows)
}

/// Runs a suite (or `all`) and returns its rows.
pub fn run_suite(name: &str) -> Result<Vec<Row>> {
    Ok(match name {
        "functionals" => functionals()?,
        "perimeter" => perimeter()?,
        "conformal" => conformal()?,
        "estimates" => estimates()?,
        "all" => {
            let mut rows = Vec::new();
            for s in SUITES {
                rows.extend(run_suite(s)?);
            }
            rows
        }
        other => bail!("unknown suite `{other}` (expected functionals, perimeter, conformal, estimates or all)"),
    })
}

pub fn cmd_verify(name: &str) -> Result<i32> {
    let rows = run_suite(name)?;
    println!("{:<12} {:<58} {:>12} {:>12}  result", "suite", "check", "measured", "bound");
    for r in &rows {
        println!(
            "{:<12} {:<58} {:>12.4e} {:>12.4e}  {}",
            r.suite,
            r.check,
            r.measured,
            r.bound,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    println!("{} checks, {} failed", rows.len(), failed);
    Ok(if failed == 0 { 0 } else { 1 })
}
