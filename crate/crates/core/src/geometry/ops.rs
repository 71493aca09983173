//! Finite-difference gradient and divergence on the chart grid.
//!
//! Second-order centered differences in the interior and second-order
//! one-sided differences at non-periodic chart edges. On polar charts with a
//! pole, the first ring uses the pole value as its inner neighbour, the pole
//! gradient is read off the first Fourier mode of the first ring, and the
//! pole divergence is the flux through the first ring over the enclosed
//! volume.

use std::f64::consts::PI;

use super::chart::MetricChart;
use super::mesh::DomainMesh;
use crate::error::Result;
use crate::fields::{ScalarField, VectorField};

/// Derivative of chart-node data `f` along axis `a`. `inner` is the value at
/// `ρ = 0` for polar charts with a pole.
pub(crate) fn axis_derivative(chart: &MetricChart, f: &[f64], a: usize, inner: Option<f64>) -> Vec<f64> {
    let n_axis = chart.shape[a];
    let dx = chart.spacing(a);
    let mut out = vec![0.0; chart.n_nodes()];
    for (node, o) in out.iter_mut().enumerate() {
        let idx = chart.multi_index(node);
        let at = |k: usize| {
            let mut m = idx;
            m[a] = k;
            f[chart.index(m[0], m[1])]
        };
        let i = idx[a];
        *o = if chart.periodic[a] {
            (at((i + 1) % n_axis) - at((i + n_axis - 1) % n_axis)) / (2.0 * dx)
        } else if i == 0 {
            match inner {
                Some(v0) if a == 0 => (at(1) - v0) / (2.0 * dx),
                _ => (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * dx),
            }
        } else if i == n_axis - 1 {
            (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * dx)
        } else {
            (at(i + 1) - at(i - 1)) / (2.0 * dx)
        };
    }
    out
}

/// First Fourier coefficients `(a, b)` of the first ring, so that
/// `f(ρ₀, θ) ≈ c + a cos θ + b sin θ`.
fn first_mode(chart: &MetricChart, f: &[f64]) -> (f64, f64) {
    let nt = chart.shape[1];
    let mut a = 0.0;
    let mut b = 0.0;
    for j in 0..nt {
        let th = chart.axis(1)[j];
        let v = f[chart.index(0, j)];
        a += v * th.cos();
        b += v * th.sin();
    }
    (2.0 * a / nt as f64, 2.0 * b / nt as f64)
}

/// `Du^a = g^{ab} ∂_b u`.
pub fn gradient(mesh: &DomainMesh, u: &ScalarField) -> Result<VectorField> {
    u.check_len(mesh.n_nodes())?;
    let chart = &mesh.chart;
    let dim = chart.dim;
    let n_chart = chart.n_nodes();
    let pole_value = mesh.pole.map(|p| u.values[p]);
    let partials: Vec<Vec<f64>> = (0..dim)
        .map(|a| axis_derivative(chart, &u.values[..n_chart], a, pole_value))
        .collect();
    let mut out = VectorField::zeros(mesh.n_nodes(), dim);
    for node in 0..n_chart {
        let gi = chart.g_inv(node);
        let comps = out.at_mut(node);
        for a in 0..dim {
            comps[a] = (0..dim).map(|b| gi[a * 2 + b] * partials[b][node]).sum();
        }
    }
    if let Some(p) = mesh.pole {
        let rho0 = chart.axis(0)[0];
        let (a, b) = first_mode(chart, &u.values[..n_chart]);
        let gm = chart.model.pole_metric();
        let comps = out.at_mut(p);
        comps[0] = a / rho0 / gm[0];
        comps[1] = b / rho0 / gm[3];
    }
    Ok(out)
}

/// `div X = (1/√det g) ∂_a(√det g X^a)`.
pub fn divergence(mesh: &DomainMesh, x: &VectorField) -> Result<ScalarField> {
    let chart = &mesh.chart;
    let dim = chart.dim;
    if x.len() != mesh.n_nodes() || x.dim != dim {
        return Err(crate::error::Error::ShapeMismatch {
            expected: mesh.n_nodes(),
            got: x.len(),
        });
    }
    let n_chart = chart.n_nodes();
    let mut div = vec![0.0; mesh.n_nodes()];
    for a in 0..dim {
        let flux: Vec<f64> = (0..n_chart).map(|v| chart.sqrt_det_g[v] * x.at(v)[a]).collect();
        // √det g vanishes at the pole, and so does the radial flux density.
        let inner = mesh.pole.map(|_| 0.0);
        let d = axis_derivative(chart, &flux, a, inner);
        for v in 0..n_chart {
            div[v] += d[v] / chart.sqrt_det_g[v];
        }
    }
    if let Some(p) = mesh.pole {
        let nt = chart.shape[1];
        let rho0 = chart.axis(0)[0];
        let flux: f64 = (0..nt)
            .map(|j| {
                let v = chart.index(0, j);
                x.at(v)[0] * chart.sqrt_det_g[v]
            })
            .sum::<f64>()
            * 2.0
            * PI
            / nt as f64;
        div[p] = flux / chart.model.polar_ball_volume(rho0);
    }
    Ok(ScalarField::new(div))
}
