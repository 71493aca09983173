//! Checks of the a-priori estimates and boundary conditions on computed
//! solutions and catalog domains.
//!
//! Constants that the theory only proves to exist are measured once and
//! frozen in `fixtures/c0_constants.txt`; everything else is recomputed from
//! the mesh, the field and `α`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::geometry::{
    boundary_mean_curvature, build_domain, conformal_mean_curvature, divergence, gradient, graph_mean_curvature,
    DomainMesh, DomainSpec, MetricModel,
};

/// Where a check was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckContext {
    pub domain: String,
    pub alpha: Option<f64>,
    pub h: f64,
}

impl CheckContext {
    fn of(mesh: &DomainMesh, alpha: Option<f64>) -> Self {
        Self {
            domain: mesh.spec.to_string(),
            alpha,
            h: mesh.h,
        }
    }
}

/// One named inequality: `passed` is exactly whether `measured` satisfies
/// it against `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticEntry {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
    pub context: CheckContext,
    pub details: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub entries: Vec<DiagnosticEntry>,
}

impl DiagnosticReport {
    pub fn push(&mut self, entry: DiagnosticEntry) {
        self.entries.push(entry);
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn get(&self, name: &str) -> Option<&DiagnosticEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Nodal `|Du|_g` from the finite-difference gradient.
pub fn gradient_norms(mesh: &DomainMesh, u: &ScalarField) -> Result<Vec<f64>> {
    let du = gradient(mesh, u)?;
    let dim = mesh.dim();
    Ok((0..mesh.n_nodes())
        .map(|v| {
            let g = mesh.metric_at(v);
            let x = du.at(v);
            let mut s = 0.0;
            for a in 0..dim {
                for b in 0..dim {
                    s += g[a * dim + b] * x[a] * x[b];
                }
            }
            s.sqrt()
        })
        .collect())
}

/// `sup|Du| ≤ e^{2K max|u|} sup_∂(1 + |Du|)`: reports the smallest `K` in
/// `k_grid` that makes it hold, or `+∞` if none does. The bound is the
/// largest grid value.
pub fn check_gradient_estimate(mesh: &DomainMesh, u: &ScalarField, alpha: f64, k_grid: &[f64]) -> Result<DiagnosticEntry> {
    let norms = gradient_norms(mesh, u)?;
    let sup = norms.iter().copied().fold(0.0, f64::max);
    let sup_bnd = mesh.boundary.iter().map(|b| 1.0 + norms[b.node]).fold(0.0, f64::max);
    let max_u = u.max_abs();
    let mut grid: Vec<f64> = k_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let k = grid
        .iter()
        .copied()
        .find(|&k| sup <= (2.0 * k * max_u).exp() * sup_bnd)
        .unwrap_or(f64::INFINITY);
    let bound = grid.last().copied().unwrap_or(f64::NAN);
    let mut details = BTreeMap::new();
    details.insert("sup_grad".into(), sup);
    details.insert("sup_boundary_one_plus_grad".into(), sup_bnd);
    details.insert("max_abs_u".into(), max_u);
    // The ratio the exponential must cover; K = ln(ratio) / (2 max|u|).
    details.insert("ratio".into(), sup / sup_bnd);
    Ok(DiagnosticEntry {
        name: "gradient_estimate".into(),
        measured: k,
        bound,
        passed: k.is_finite(),
        context: CheckContext::of(mesh, Some(alpha)),
        details,
    })
}

/// Frozen constants of the small-ball `C⁰` estimate.
///
/// Text format: one `family.key = value` per line, `#` starts a comment.
/// Each family needs `C`, `max_size` and `max_alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenConstants {
    pub families: BTreeMap<String, SmallBallConstant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallConstant {
    pub c: f64,
    pub max_size: f64,
    pub max_alpha: f64,
}

const BUILTIN_CONSTANTS: &str = include_str!("../fixtures/c0_constants.txt");

impl FrozenConstants {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CONSTANTS).expect("checked-in constants parse")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::InvalidConfig(format!("constants line {}: `{line}`", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(bad)?;
            let (family, field) = key.trim().split_once('.').ok_or_else(bad)?;
            let value: f64 = value.trim().parse().map_err(|_| bad())?;
            raw.entry(family.trim().to_string())
                .or_default()
                .insert(field.trim().to_string(), value);
        }
        let mut families = BTreeMap::new();
        for (family, fields) in raw {
            let get = |k: &str| {
                fields
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::InvalidConfig(format!("constants for `{family}` lack `{k}`")))
            };
            families.insert(
                family.clone(),
                SmallBallConstant {
                    c: get("C")?,
                    max_size: get("max_size")?,
                    max_alpha: get("max_alpha")?,
                },
            );
        }
        Ok(Self { families })
    }

    /// The constant covering `spec` at this `α`, if `spec` is a small ball.
    pub fn lookup(&self, spec: &DomainSpec, alpha: f64) -> Result<SmallBallConstant> {
        let not = || Error::NotSmallBall(spec.to_string());
        let family = match spec {
            DomainSpec::EuclideanDisk { .. } | DomainSpec::SphereCap { .. } | DomainSpec::HyperbolicDisk { .. } => {
                spec.name()
            }
            _ => return Err(not()),
        };
        let c = self.families.get(family).ok_or_else(not)?;
        if spec.size() > c.max_size * (1.0 + 1e-12) || alpha > c.max_alpha * (1.0 + 1e-12) {
            return Err(not());
        }
        Ok(*c)
    }
}

/// `sup|u| / (sup_∂|ψ| + 1)`, the quantity the frozen `C` bounds.
pub fn c0_ratio(mesh: &DomainMesh, u: &ScalarField, psi: &ScalarField) -> f64 {
    let sup_psi = mesh.boundary.iter().map(|b| psi.values[b.node].abs()).fold(0.0, f64::max);
    u.max_abs() / (sup_psi + 1.0)
}

/// `sup|u| ≤ C (sup_∂|ψ| + 1)` against the built-in frozen `C`.
pub fn check_c0_estimate(mesh: &DomainMesh, u: &ScalarField, psi: &ScalarField, alpha: f64) -> Result<DiagnosticEntry> {
    check_c0_estimate_with(&FrozenConstants::builtin(), mesh, u, psi, alpha)
}

pub fn check_c0_estimate_with(
    constants: &FrozenConstants,
    mesh: &DomainMesh,
    u: &ScalarField,
    psi: &ScalarField,
    alpha: f64,
) -> Result<DiagnosticEntry> {
    u.check_len(mesh.n_nodes())?;
    psi.check_len(mesh.n_nodes())?;
    let c = constants.lookup(&mesh.spec, alpha)?;
    let ratio = c0_ratio(mesh, u, psi);
    let mut details = BTreeMap::new();
    details.insert("sup_u".into(), u.max_abs());
    details.insert("frozen_C".into(), c.c);
    Ok(DiagnosticEntry {
        name: "c0_estimate".into(),
        measured: ratio,
        bound: c.c,
        passed: ratio <= c.c,
        context: CheckContext::of(mesh, Some(alpha)),
        details,
    })
}

fn geodesic_ball(model: MetricModel, r: f64) -> Result<DomainSpec> {
    match model {
        MetricModel::Euclidean | MetricModel::PolarFlat => Ok(DomainSpec::EuclideanDisk { r }),
        MetricModel::PolarSphere if r < PI => Ok(DomainSpec::SphereCap { theta0: r }),
        MetricModel::PolarSphere => Err(Error::RadiusExceedsChart(r)),
        MetricModel::PolarHyperbolic => Ok(DomainSpec::HyperbolicDisk { r }),
    }
}

/// Mean of the discrete boundary curvature of the geodesic ball of radius
/// `r` around the chart center, at resolution `r / cells`.
pub fn geodesic_circle_curvature(model: MetricModel, r: f64, cells: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidDomain(format!("radius {r} must be positive")));
    }
    let mesh = build_domain(geodesic_ball(model, r)?, r / cells as f64)?;
    let bc = boundary_mean_curvature(&mesh)?;
    Ok(bc.values.iter().sum::<f64>() / bc.values.len() as f64)
}

/// Fits `H(r)·r = c₀ + c₂ r²` over `radii` and passes when `c₀` is within 5%
/// of `n - 1`, the value for the divergence of the unit normal. The distance
/// of `c₀` from `n` is reported alongside.
pub fn check_small_sphere_curvature(model: MetricModel, radii: &[f64]) -> Result<DiagnosticEntry> {
    if radii.len() < 2 {
        return Err(Error::InvalidConfig("small-sphere fit needs at least two radii".into()));
    }
    let n = 2.0;
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        pts.push((r, geodesic_circle_curvature(model, r, 32)? * r));
    }
    // Least squares in (1, r²).
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(r, y) in &pts {
        let x = r * r;
        s0 += 1.0;
        s1 += x;
        s2 += x * x;
        t0 += y;
        t1 += x * y;
    }
    let det = s0 * s2 - s1 * s1;
    let c0 = (s2 * t0 - s1 * t1) / det;
    let c2 = (s0 * t1 - s1 * t0) / det;
    let rel = (c0 - (n - 1.0)).abs() / (n - 1.0);
    let mut details = BTreeMap::new();
    details.insert("c0".into(), c0);
    details.insert("c2".into(), c2);
    details.insert("rel_err_vs_n_minus_1".into(), rel);
    details.insert("rel_err_vs_n".into(), (c0 - n).abs() / n);
    Ok(DiagnosticEntry {
        name: "small_sphere_curvature".into(),
        measured: rel,
        bound: 0.05,
        passed: rel <= 0.05,
        context: CheckContext {
            domain: format!("{model:?}"),
            alpha: None,
            h: radii.iter().copied().fold(f64::INFINITY, f64::min) / 32.0,
        },
        details,
    })
}

/// Largest radius in `radii` below which every listed geodesic circle has
/// curvature above `α`.
pub fn mean_convex_radius(model: MetricModel, alpha: f64, radii: &[f64]) -> Result<Option<f64>> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = None;
    for r in sorted {
        if geodesic_circle_curvature(model, r, 32)? > alpha {
            best = Some(r);
        } else {
            break;
        }
    }
    Ok(best)
}

/// `min_∂ H_∂Ω ≥ -10h`.
pub fn check_mean_convexity(mesh: &DomainMesh) -> Result<DiagnosticEntry> {
    let bc = boundary_mean_curvature(mesh)?;
    let tol = 10.0 * mesh.h;
    Ok(DiagnosticEntry {
        name: "mean_convexity".into(),
        measured: bc.min,
        bound: -tol,
        passed: bc.min >= -tol,
        context: CheckContext::of(mesh, None),
        details: BTreeMap::new(),
    })
}

/// Mean curvature of the graph of `u` in `Q_α` at each interior node,
/// computed two ways on a flat chart:
///
/// * the conformal formula applied to the weak-form curvature, with
///   `H = -div(Du/ω)`, `f = αu/n`, `df(v̄) = (α/n)/ω`, `m = n + 1`;
/// * the divergence in `e^{2αr/n}(g + dr²)` of the rescaled unit normal
///   `e^{-f}(-Du, 1)/ω`, by centered differences with step `h` in every
///   direction including `r`.
///
/// Returns both fields; boundary entries are zero.
pub fn conformal_curvature_pair(mesh: &DomainMesh, u: &ScalarField, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if mesh.chart.model != MetricModel::Euclidean {
        return Err(Error::InvalidDomain(format!(
            "conformal cross-check needs a flat chart, got {}",
            mesh.spec
        )));
    }
    let n = mesh.dim() as f64;
    let m = mesh.dim() + 1;
    let (div_du_over_omega, _) = graph_mean_curvature(mesh, u, alpha)?;
    let du = gradient(mesh, u)?;
    let dim = mesh.dim();
    let omega: Vec<f64> = (0..mesh.n_nodes())
        .map(|v| (1.0 + du.at(v).iter().map(|x| x * x).sum::<f64>()).sqrt())
        .collect();
    let mut normal = VectorField::zeros(mesh.n_nodes(), dim);
    for v in 0..mesh.n_nodes() {
        for a in 0..dim {
            normal.at_mut(v)[a] = -du.at(v)[a] / omega[v];
        }
    }
    let div_n = divergence(mesh, &normal)?;
    let delta = mesh.chart.spacing(0);
    let k = (m as f64 - 1.0) * alpha / n;
    let dr_weight = ((k * delta).exp() - (-k * delta).exp()) / (2.0 * delta);
    let mut formula = vec![0.0; mesh.n_nodes()];
    let mut direct = vec![0.0; mesh.n_nodes()];
    for v in 0..mesh.n_nodes() {
        if !mesh.interior_mask[v] {
            continue;
        }
        let f = alpha * u.values[v] / n;
        formula[v] = conformal_mean_curvature(-div_du_over_omega.values[v], alpha / n / omega[v], f, m);
        // e^{-mf} [∂_i(e^{(m-1)f} N^i) + ∂_r(e^{(m-1)f}) N^r] with N independent of r.
        direct[v] = (-f).exp() * (div_n.values[v] + dr_weight / omega[v]);
    }
    Ok((formula, direct))
}

/// Runs [`conformal_curvature_pair`] for `u_fn` on `spec` at `h` and `h/2`
/// and passes when the maximum discrepancy over nodes at least two cells
/// from the boundary decays with observed order `≥ 1.8`.
pub fn check_conformal_curvature(
    spec: DomainSpec,
    alpha: f64,
    h: f64,
    u_fn: &dyn Fn([f64; 2]) -> f64,
) -> Result<DiagnosticEntry> {
    let mut errs = Vec::new();
    let mut last_mesh = None;
    for hh in [h, h / 2.0] {
        let mesh = build_domain(spec, hh)?;
        let u = ScalarField::new((0..mesh.n_nodes()).map(|v| u_fn(mesh.param_coords(v))).collect());
        let (a, b) = conformal_curvature_pair(&mesh, &u, alpha)?;
        let adj = mesh.neighbors();
        let mut err: f64 = 0.0;
        for v in 0..mesh.n_nodes() {
            let deep = mesh.interior_mask[v] && adj[v].iter().all(|&w| mesh.interior_mask[w]);
            if deep {
                err = err.max((a[v] - b[v]).abs());
            }
        }
        errs.push(err);
        last_mesh = Some(mesh);
    }
    let order = (errs[0] / errs[1]).log2();
    let mut details = BTreeMap::new();
    details.insert("discrepancy_h".into(), errs[0]);
    details.insert("discrepancy_h_half".into(), errs[1]);
    let mesh = last_mesh.expect("two resolutions");
    Ok(DiagnosticEntry {
        name: "conformal_curvature".into(),
        measured: order,
        bound: 1.8,
        passed: order >= 1.8,
        context: CheckContext::of(&mesh, Some(alpha)),
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_needs_no_exponential() {
        let mesh = build_domain(DomainSpec::EuclideanDisk { r: 1.0 }, 0.1).unwrap();
        let u = ScalarField::constant(mesh.n_nodes(), 0.0);
        let e = check_gradient_estimate(&mesh, &u, 1.0, &[0.0, 1.0]).unwrap();
        assert!(e.passed && e.measured == 0.0);
    }

    #[test]
    fn builtin_constants_parse_and_reject_large_balls() {
        let c = FrozenConstants::builtin();
        assert!(c.families.contains_key("euclidean_disk"));
        assert!(matches!(
            c.lookup(&DomainSpec::Hemisphere, 1.0),
            Err(Error::NotSmallBall(_))
        ));
        assert!(c.lookup(&DomainSpec::EuclideanDisk { r: 100.0 }, 1.0).is_err());
        assert!(FrozenConstants::parse("disk.C = x").is_err());
        assert!(FrozenConstants::parse("disk.C = 1").is_err());
    }

    #[test]
    fn mean_convexity_verdicts() {
        let disk = build_domain(DomainSpec::EuclideanDisk { r: 1.0 }, 1.0 / 16.0).unwrap();
        assert!(check_mean_convexity(&disk).unwrap().passed);
        let hemi = build_domain(DomainSpec::Hemisphere, 1.0 / 16.0).unwrap();
        let e = check_mean_convexity(&hemi).unwrap();
        assert!(e.passed && e.measured.abs() < 0.05);
        // cot 2 ≈ -0.457 must exceed the tolerance 10h.
        let big = build_domain(DomainSpec::SphereCap { theta0: 2.0 }, 1.0 / 32.0).unwrap();
        assert!(!check_mean_convexity(&big).unwrap().passed);
    }

    #[test]
    fn small_circles_follow_the_divergence_convention() {
        for model in [MetricModel::PolarFlat, MetricModel::PolarSphere, MetricModel::PolarHyperbolic] {
            let e = check_small_sphere_curvature(model, &[0.05, 0.1, 0.2, 0.3]).unwrap();
            assert!(e.passed, "{model:?}: {e:?}");
        }
        assert!(matches!(
            check_small_sphere_curvature(MetricModel::PolarSphere, &[1.0, 4.0]),
            Err(Error::RadiusExceedsChart(_))
        ));
    }

    #[test]
    fn sphere_circles_stay_mean_convex_for_alpha_two_below_arccot_two() {
        let radii: Vec<f64> = (1..=12).map(|k| 0.05 * k as f64).collect();
        let r3 = mean_convex_radius(MetricModel::PolarSphere, 2.0, &radii).unwrap().unwrap();
        // cot r > 2 exactly for r < atan(1/2) ≈ 0.4636.
        assert!((r3 - 0.45).abs() < 1e-12, "{r3}");
    }

    #[test]
    fn conformal_formula_matches_direct_divergence() {
        let u = |p: [f64; 2]| 0.3 * (2.0 * p[0]).sin() + 0.2 * p[0] * p[0];
        let e = check_conformal_curvature(DomainSpec::Interval { a: 1.0 }, 1.5, 1.0 / 32.0, &u).unwrap();
        assert!(e.passed, "{e:?}");
        let u2 = |p: [f64; 2]| 0.4 * (p[0] * 2.0).sin() * (p[1] + 0.3).cos();
        let e = check_conformal_curvature(DomainSpec::EuclideanSquare { l: 1.0 }, 2.0, 1.0 / 16.0, &u2).unwrap();
        assert!(e.passed, "{e:?}");
    }

    #[test]
    fn small_disk_solutions_respect_the_frozen_constant() {
        let mesh = build_domain(DomainSpec::EuclideanDisk { r: 0.8 }, 1.0 / 12.0).unwrap();
        for c in [0.0, 2.0, -7.0] {
            let psi = ScalarField::constant(mesh.n_nodes(), c);
            let mut cfg = crate::solvers::SolverConfig::default();
            cfg.cap_schedule = vec![c.abs() + 5.0, c.abs() + 10.0];
            let r = crate::solvers::solve_nodal(&mesh, &psi, 1.0, &cfg).unwrap();
            let e = check_c0_estimate(&mesh, &r.u, &psi, 1.0).unwrap();
            assert!(e.passed, "{e:?}");
        }
    }

    /// Calibration battery behind `fixtures/c0_constants.txt`; run with
    /// `--ignored` to re-measure. The frozen `C` is the largest ratio seen,
    /// rounded up with 10% headroom.
    #[test]
    #[ignore]
    fn calibrate_c0_constants() {
        let cases = [
            (DomainSpec::EuclideanDisk { r: 1.0 }, 1.0),
            (DomainSpec::SphereCap { theta0: 0.4 }, 2.0),
            (DomainSpec::HyperbolicDisk { r: 0.5 }, 2.0),
        ];
        for (spec, max_alpha) in cases {
            let mesh = build_domain(spec, 1.0 / 16.0).unwrap();
            let mut worst: f64 = 0.0;
            for alpha in [0.25 * max_alpha, 0.5 * max_alpha, max_alpha] {
                for c in [0.0, 1.0, -1.0, 3.0, -3.0, 30.0, -30.0] {
                    for tilt in [0.0, 0.5] {
                        let psi = ScalarField::new((0..mesh.n_nodes()).map(|v| c + tilt * mesh.embedding(v)[0]).collect());
                        let mut cfg = crate::solvers::SolverConfig::default();
                        cfg.cap_schedule = vec![c.abs() + 5.0, c.abs() + 10.0];
                        let r = crate::solvers::solve_nodal(&mesh, &psi, alpha, &cfg).unwrap();
                        worst = worst.max(c0_ratio(&mesh, &r.u, &psi));
                    }
                }
            }
            println!("{} worst ratio {worst:.4}", spec.name());
        }
    }
}
