//! Mean curvature of graphs, of the domain boundary, and under conformal
//! rescaling.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::mesh::{DomainMesh, DomainSpec};
use super::ops::axis_derivative;
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::functionals::element::{local_values, Element};

/// Nodal `H = div(Du/ω)` and `H - α/ω`, in the lumped weak form.
///
/// With `W_i = ∫ e^{αu} φ_i`, the weak residual is `-(∂F_α/∂u_i)/W_i` and
/// `H_i` adds back `α (∫ e^{αu} φ_i / ω)/W_i`. This is exactly the quantity
/// the nodal solver drives to zero, so a converged solve has residual at
/// the solver tolerance; for affine `u` on a flat chart `H` vanishes exactly.
/// Boundary entries are zero.
pub fn graph_mean_curvature(mesh: &DomainMesh, u: &ScalarField, alpha: f64) -> Result<(ScalarField, ScalarField)> {
    u.check_len(mesh.n_nodes())?;
    let dim = mesh.dim();
    let n = mesh.n_nodes();
    let mut grad = vec![0.0; n];
    let mut mass = vec![0.0; n];
    let mut inv_omega = vec![0.0; n];
    for s in &mesh.simplices {
        let el = Element::new(s, dim, &local_values(s, dim, &u.values), alpha);
        let g = el.gradient(alpha);
        for (k, &v) in s.nodes[..=dim].iter().enumerate() {
            grad[v] += g[k];
            mass[v] += el.ik[k];
            inv_omega[v] += el.ik[k] / el.omega;
        }
    }
    let mut h = vec![0.0; n];
    let mut res = vec![0.0; n];
    for v in 0..n {
        if mesh.interior_mask[v] {
            res[v] = -grad[v] / mass[v];
            h[v] = res[v] + alpha * inv_omega[v] / mass[v];
        }
    }
    Ok((ScalarField::new(h), ScalarField::new(res)))
}

/// `div(v̄)` at each boundary node, in the order of [`DomainMesh::boundary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurvature {
    pub values: Vec<f64>,
    pub min: f64,
    /// `min ≥ -tol` with `tol = 10h`.
    pub mean_convex: bool,
}

/// Divergence of the outward normal extended into a collar.
///
/// Polar charts extend `v̄ = ±∂_ρ/|∂_ρ|` along the radial lines, which is
/// the nearest-point extension, and differentiate one-sidedly across the
/// last three rings. On the square the extension is constant along each
/// edge; at a corner the normal turns by `π/2` within one boundary cell,
/// which is reported as that angle per unit boundary measure.
pub fn boundary_mean_curvature(mesh: &DomainMesh) -> Result<BoundaryCurvature> {
    let chart = &mesh.chart;
    let values: Vec<f64> = match mesh.spec {
        DomainSpec::Interval { .. } => vec![0.0; mesh.boundary.len()],
        DomainSpec::EuclideanSquare { .. } => mesh
            .boundary
            .iter()
            .map(|b| {
                if b.normal[0] != 0.0 && b.normal[1] != 0.0 {
                    0.5 * PI / b.area
                } else {
                    0.0
                }
            })
            .collect(),
        _ => {
            if chart.shape[0] < 3 {
                return Err(Error::CollarTooThin(format!("{} rings, need 3", chart.shape[0])));
            }
            let nc = chart.n_nodes();
            let mut flux = vec![0.0; nc];
            for (v, f) in flux.iter_mut().enumerate() {
                let rho = chart.coords(v)[0];
                let (grr, gtt) = chart.model.polar_diag(rho);
                // √det g · X^ρ with X^ρ = 1/√g_ρρ.
                *f = (grr * gtt).sqrt() / grr.sqrt();
            }
            let d = axis_derivative(chart, &flux, 0, None);
            mesh.boundary
                .iter()
                .map(|b| {
                    let sign = b.normal[0].signum();
                    sign * d[b.node] / chart.sqrt_det_g[b.node]
                })
                .collect()
        }
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BoundaryCurvature {
        mean_convex: min >= -10.0 * mesh.h,
        min,
        values,
    })
}

/// `e^{-f}(H + (m-1) df(v̄))`: mean curvature after the conformal change
/// `g ↦ e^{2f} g` of an `m`-dimensional ambient manifold.
///
/// For the graph of `u` in `Q_α` use `H = -div(Du/ω)` (upward normal),
/// `f = αu/n`, `df(v̄) = (α/n)/ω` and `m = n + 1`.
pub fn conformal_mean_curvature(h: f64, df_v: f64, f: f64, m: usize) -> f64 {
    assert!(m >= 2, "ambient dimension must be at least 2");
    (-f).exp() * (h + (m as f64 - 1.0) * df_v)
}
