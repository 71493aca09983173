//! Product and conformal area functionals, the relaxed Dirichlet energy and
//! its nodal gradient.
//!
//! The interior integrals are exact for P1 fields on the metric simplices:
//! `|Du|` is constant per simplex and `∫ e^{αu}` is integrated in closed
//! form, so a steep boundary simplex carries the same energy as the vertical
//! wall it approximates.

pub(crate) mod element;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geometry::DomainMesh;
use crate::numerics::phi1;
use element::{local_values, Element};

/// Energies of one candidate `u` with boundary data `ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Product area `∫ ω dvol`.
    #[serde(rename = "F")]
    pub f: f64,
    /// Conformal area `∫ e^{αu} ω dvol`.
    #[serde(rename = "F_alpha")]
    pub f_alpha: f64,
    /// Wall term `(1/α) ∮ |e^{αu} - e^{αψ}| dA`.
    pub wall: f64,
    /// `F_alpha + wall`.
    #[serde(rename = "J")]
    pub j: f64,
    /// `∫ |Du| dvol`.
    pub bv: f64,
    /// Contribution of each simplex to `F_alpha`.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub cells: Vec<f64>,
}

fn check_field(mesh: &DomainMesh, u: &ScalarField) -> Result<()> {
    u.check_len(mesh.n_nodes())
}

/// `∫_Ω √(1+|Du|²) dvol`.
pub fn product_area(mesh: &DomainMesh, u: &ScalarField) -> Result<f64> {
    check_field(mesh, u)?;
    Ok(interior_energy(mesh, &u.values, 0.0))
}

/// `∫_Ω e^{αu} √(1+|Du|²) dvol`.
pub fn conformal_area(mesh: &DomainMesh, u: &ScalarField, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    check_field(mesh, u)?;
    Ok(interior_energy(mesh, &u.values, alpha))
}

pub(crate) fn interior_energy(mesh: &DomainMesh, u: &[f64], alpha: f64) -> f64 {
    let dim = mesh.dim();
    mesh.simplices
        .iter()
        .map(|s| Element::new(s, dim, &local_values(s, dim, u), alpha).energy())
        .sum()
}

/// Signed wall gap `(e^{αu} - e^{αψ})/α`, continuous at `α = 0`.
pub(crate) fn wall_gap(u: f64, psi: f64, alpha: f64) -> f64 {
    (alpha * psi).exp() * (u - psi) * phi1(alpha * (u - psi))
}

/// Smoothed wall density `√(s² + ε²)` and its first two `u`-derivatives.
pub(crate) fn wall_smoothed(u: f64, psi: f64, alpha: f64, eps: f64) -> (f64, f64, f64) {
    let s = wall_gap(u, psi, alpha);
    let e = (alpha * u).exp();
    let q = s * s + eps * eps;
    let r = q.sqrt();
    let d1 = s * e / r;
    let d2 = e * e * eps * eps / (q * r) + alpha * s * e / r;
    (r, d1, d2)
}

/// Change of `√(s² + ε²)` when `u` moves from `old` to `new`.
pub(crate) fn wall_smoothed_delta(old: f64, new: f64, psi: f64, alpha: f64, eps: f64) -> f64 {
    let s_old = wall_gap(old, psi, alpha);
    let ds = (alpha * old).exp() * (new - old) * phi1(alpha * (new - old));
    let s_new = s_old + ds;
    let r_old = (s_old * s_old + eps * eps).sqrt();
    let r_new = (s_new * s_new + eps * eps).sqrt();
    ds * (s_new + s_old) / (r_new + r_old)
}

/// Default wall smoothing: `10⁻³` times the mean boundary weight `e^{αψ}`.
pub fn default_wall_eps(mesh: &DomainMesh, psi: &ScalarField, alpha: f64) -> f64 {
    let n = mesh.boundary.len().max(1) as f64;
    1e-3 * mesh
        .boundary
        .iter()
        .map(|b| (alpha * psi.values[b.node]).exp())
        .sum::<f64>()
        / n
}

/// Full energy report with the exact `|·|` in the wall term. `α = 0` gives
/// the product-area problem with wall `∮ |u - ψ| dA`.
pub fn relaxed_energy(mesh: &DomainMesh, u: &ScalarField, psi: &ScalarField, alpha: f64) -> Result<EnergyReport> {
    check_field(mesh, u)?;
    check_field(mesh, psi)?;
    if alpha < 0.0 {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    let dim = mesh.dim();
    let mut f = 0.0;
    let mut bv = 0.0;
    let mut cells = Vec::with_capacity(mesh.simplices.len());
    for s in &mesh.simplices {
        let local = local_values(s, dim, &u.values);
        let el = Element::new(s, dim, &local, alpha);
        cells.push(el.energy());
        f += el.omega * s.volume;
        bv += el.grad_sq().sqrt() * s.volume;
    }
    let f_alpha: f64 = cells.iter().sum();
    let wall: f64 = mesh
        .boundary
        .iter()
        .map(|b| b.area * wall_gap(u.values[b.node], psi.values[b.node], alpha).abs())
        .sum();
    Ok(EnergyReport {
        f,
        f_alpha,
        wall,
        j: f_alpha + wall,
        bv,
        cells,
    })
}

/// `J` with the wall term replaced by its smooth surrogate `dA √(s² + ε²)`.
pub fn smoothed_energy(mesh: &DomainMesh, u: &ScalarField, psi: &ScalarField, alpha: f64, eps: f64) -> Result<f64> {
    check_field(mesh, u)?;
    check_field(mesh, psi)?;
    let wall: f64 = mesh
        .boundary
        .iter()
        .map(|b| b.area * wall_smoothed(u.values[b.node], psi.values[b.node], alpha, eps).0)
        .sum();
    Ok(interior_energy(mesh, &u.values, alpha) + wall)
}

/// Nodal partial derivatives of [`smoothed_energy`].
pub fn energy_gradient(
    mesh: &DomainMesh,
    u: &ScalarField,
    psi: &ScalarField,
    alpha: f64,
    eps: f64,
) -> Result<ScalarField> {
    check_field(mesh, u)?;
    check_field(mesh, psi)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("wall smoothing must be positive, got {eps}")));
    }
    let mut g = interior_gradient(mesh, &u.values, alpha);
    for b in &mesh.boundary {
        g[b.node] += b.area * wall_smoothed(u.values[b.node], psi.values[b.node], alpha, eps).1;
    }
    Ok(ScalarField::new(g))
}

/// Nodal partial derivatives of the interior term `F_α`.
pub(crate) fn interior_gradient(mesh: &DomainMesh, u: &[f64], alpha: f64) -> Vec<f64> {
    let dim = mesh.dim();
    let mut g = vec![0.0; mesh.n_nodes()];
    for s in &mesh.simplices {
        let el = Element::new(s, dim, &local_values(s, dim, u), alpha);
        let ge = el.gradient(alpha);
        for (k, &v) in s.nodes[..=dim].iter().enumerate() {
            g[v] += ge[k];
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};

    fn field(mesh: &DomainMesh, f: impl Fn([f64; 3]) -> f64) -> ScalarField {
        ScalarField::new((0..mesh.n_nodes()).map(|v| f(mesh.embedding(v))).collect())
    }

    #[test]
    fn flat_and_tilted_square() {
        let mesh = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 0.1).unwrap();
        let c = field(&mesh, |_| 0.7);
        assert!((product_area(&mesh, &c).unwrap() - 1.0).abs() < 1e-13);
        assert!((conformal_area(&mesh, &c, 2.0).unwrap() - 1.4f64.exp()).abs() < 1e-12);
        let tilt = field(&mesh, |x| x[0]);
        assert!((product_area(&mesh, &tilt).unwrap() - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn grim_reaper_closed_forms_converge_at_second_order() {
        let a: f64 = 1.0;
        let exact_f = 2.0 * (1.0 / a.cos() + a.tan()).ln();
        let exact_fa = 2.0 * a.tan();
        let mut errs = Vec::new();
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let mesh = build_domain(DomainSpec::Interval { a }, h).unwrap();
            let u = field(&mesh, |x| -x[0].cos().ln());
            let f = product_area(&mesh, &u).unwrap();
            let fa = conformal_area(&mesh, &u, 1.0).unwrap();
            errs.push(((f - exact_f).abs(), (fa - exact_fa).abs()));
        }
        assert!(errs[1].0 < 1e-3 && errs[1].1 < 1e-3);
        assert!(errs[0].0 / errs[1].0 > 3.5);
        assert!(errs[0].1 / errs[1].1 > 3.5);
    }

    #[test]
    fn wall_shift_factorises() {
        let mesh = build_domain(DomainSpec::EuclideanDisk { r: 1.0 }, 0.2).unwrap();
        let psi = field(&mesh, |x| 0.3 * x[0]);
        let alpha = 1.5;
        let a = 0.4;
        let u = psi.shifted(a);
        let rep = relaxed_energy(&mesh, &u, &psi, alpha).unwrap();
        let expect: f64 = mesh
            .boundary
            .iter()
            .map(|b| b.area * (alpha * psi.values[b.node]).exp())
            .sum::<f64>()
            * ((alpha * a).exp() - 1.0).abs()
            / alpha;
        assert!((rep.wall - expect).abs() < 1e-12);
        let rep0 = relaxed_energy(&mesh, &psi, &psi, alpha).unwrap();
        assert_eq!(rep0.wall, 0.0);
        assert_eq!(rep0.j, rep0.f_alpha);
    }

    #[test]
    fn hemisphere_floor_tends_to_pi() {
        let mesh = build_domain(DomainSpec::Hemisphere, 0.05).unwrap();
        let psi = ScalarField::constant(mesh.n_nodes(), 0.0);
        let mut last = 0.0;
        for t in [5.0, 10.0, 20.0] {
            let u = ScalarField::constant(mesh.n_nodes(), -t);
            last = relaxed_energy(&mesh, &u, &psi, 2.0).unwrap().j;
        }
        assert!((last - std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn flat_gradient_is_alpha_times_hat_mass() {
        let mesh = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 0.125).unwrap();
        let zero = ScalarField::constant(mesh.n_nodes(), 0.0);
        let g = energy_gradient(&mesh, &zero, &zero, 1.0, 1e-3).unwrap();
        for v in 0..mesh.n_nodes() {
            if mesh.interior_mask[v] {
                assert!((g.values[v] - mesh.node_volume[v]).abs() < 1e-14);
            }
        }
    }
}
