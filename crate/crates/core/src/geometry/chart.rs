use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::gauss8;

/// Closed-form metric of a catalog chart.
///
/// Polar models use `(ρ, θ)` with `ρ` the radial parameter: Euclidean radius,
/// colatitude on the unit sphere, or the Poincaré radius in the hyperbolic
/// disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MetricModel {
    Euclidean,
    PolarFlat,
    PolarSphere,
    PolarHyperbolic,
}

impl MetricModel {
    pub fn is_polar(self) -> bool {
        !matches!(self, MetricModel::Euclidean)
    }

    /// `(g_ρρ, g_θθ)` of a polar model at radius `rho`.
    pub fn polar_diag(self, rho: f64) -> (f64, f64) {
        match self {
            MetricModel::Euclidean | MetricModel::PolarFlat => (1.0, rho * rho),
            MetricModel::PolarSphere => (1.0, rho.sin().powi(2)),
            MetricModel::PolarHyperbolic => {
                let c = 2.0 / (1.0 - rho * rho);
                (c * c, c * c * rho * rho)
            }
        }
    }

    /// Row-major metric at parameter point `p` (only the leading `dim × dim`
    /// block is meaningful).
    pub fn metric(self, p: [f64; 2]) -> [f64; 4] {
        match self {
            MetricModel::Euclidean => [1.0, 0.0, 0.0, 1.0],
            _ => {
                let (grr, gtt) = self.polar_diag(p[0]);
                [grr, 0.0, 0.0, gtt]
            }
        }
    }

    /// Metric of the pole in the Cartesian frame `(ρ cos θ, ρ sin θ)`.
    pub fn pole_metric(self) -> [f64; 4] {
        match self {
            MetricModel::PolarHyperbolic => [4.0, 0.0, 0.0, 4.0],
            _ => [1.0, 0.0, 0.0, 1.0],
        }
    }

    /// Volume density `√det g` of a polar model at radius `rho`.
    pub fn polar_density(self, rho: f64) -> f64 {
        let (grr, gtt) = self.polar_diag(rho);
        (grr * gtt).sqrt()
    }

    /// Volume of the ball `ρ < rho` around the pole.
    pub fn polar_ball_volume(self, rho: f64) -> f64 {
        match self {
            MetricModel::PolarFlat | MetricModel::Euclidean => PI * rho * rho,
            MetricModel::PolarSphere => 2.0 * PI * (1.0 - rho.cos()),
            MetricModel::PolarHyperbolic => 4.0 * PI * rho * rho / (1.0 - rho * rho),
        }
    }
}

/// Logically rectangular chart carrying a Riemannian metric per node.
///
/// Nodes are numbered row-major over `shape`; for polar charts axis 0 is `ρ`
/// and axis 1 is the periodic angle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricChart {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub param_box: Vec<[f64; 2]>,
    pub metric: Vec<f64>,
    pub sqrt_det_g: Vec<f64>,
    pub model: MetricModel,
    pub periodic: Vec<bool>,
    axes: Vec<Vec<f64>>,
}

impl MetricChart {
    pub(crate) fn new(model: MetricModel, axes: Vec<Vec<f64>>, periodic: Vec<bool>) -> Self {
        let dim = axes.len();
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let param_box = axes
            .iter()
            .zip(&periodic)
            .map(|(a, &per)| {
                if per {
                    [0.0, 2.0 * PI]
                } else {
                    [a[0], a[a.len() - 1]]
                }
            })
            .collect();
        let mut chart = Self {
            dim,
            shape,
            param_box,
            metric: Vec::new(),
            sqrt_det_g: Vec::new(),
            model,
            periodic,
            axes,
        };
        let n = chart.n_nodes();
        let mut metric = Vec::with_capacity(n * dim * dim);
        let mut sqrt_det = Vec::with_capacity(n);
        for node in 0..n {
            let g = model.metric(chart.coords(node));
            if dim == 1 {
                metric.push(g[0]);
                sqrt_det.push(g[0].sqrt());
            } else {
                metric.extend_from_slice(&g);
                sqrt_det.push((g[0] * g[3] - g[1] * g[2]).sqrt());
            }
        }
        chart.metric = metric;
        chart.sqrt_det_g = sqrt_det;
        chart
    }

    pub fn n_nodes(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        if self.dim == 1 {
            i
        } else {
            i * self.shape[1] + j
        }
    }

    /// Chart multi-index of a node.
    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        if self.dim == 1 {
            [node, 0]
        } else {
            [node / self.shape[1], node % self.shape[1]]
        }
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    /// Uniform spacing along axis `a`.
    pub fn spacing(&self, a: usize) -> f64 {
        if self.periodic[a] {
            2.0 * PI / self.shape[a] as f64
        } else {
            let ax = &self.axes[a];
            (ax[ax.len() - 1] - ax[0]) / (ax.len() - 1) as f64
        }
    }

    /// Parameter coordinates of a node (second entry is zero in 1D).
    pub fn coords(&self, node: usize) -> [f64; 2] {
        let [i, j] = self.multi_index(node);
        if self.dim == 1 {
            [self.axes[0][i], 0.0]
        } else {
            [self.axes[0][i], self.axes[1][j]]
        }
    }

    /// Metric at a node as a row-major `dim × dim` slice.
    pub fn g(&self, node: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.metric[node * s..(node + 1) * s]
    }

    /// Inverse metric at a node, row-major `dim × dim`.
    pub fn g_inv(&self, node: usize) -> [f64; 4] {
        let g = self.g(node);
        if self.dim == 1 {
            [1.0 / g[0], 0.0, 0.0, 0.0]
        } else {
            let det = g[0] * g[3] - g[1] * g[2];
            [g[3] / det, -g[1] / det, -g[2] / det, g[0] / det]
        }
    }

    /// Metric length of the parameter segment `p → q`, with the angle
    /// difference wrapped for periodic axes.
    pub fn segment_length(&self, p: [f64; 2], q: [f64; 2]) -> f64 {
        let mut d = [q[0] - p[0], q[1] - p[1]];
        if self.dim == 2 && self.periodic[1] {
            d[1] = (d[1] + PI).rem_euclid(2.0 * PI) - PI;
        }
        let model = self.model;
        gauss8(0.0, 1.0, |t| {
            let x = [p[0] + t * d[0], p[1] + t * d[1]];
            let g = model.metric(x);
            (g[0] * d[0] * d[0] + 2.0 * g[1] * d[0] * d[1] + g[3] * d[1] * d[1]).sqrt()
        })
    }

    /// Checks that every nodal metric is symmetric positive definite and
    /// that `sqrt_det_g` matches it.
    pub fn validate(&self) -> Result<()> {
        for node in 0..self.n_nodes() {
            let g = self.g(node);
            let (min_eig, det) = if self.dim == 1 {
                (g[0], g[0])
            } else {
                if (g[1] - g[2]).abs() > 1e-14 * (g[0].abs() + g[3].abs()) {
                    return Err(Error::InvalidDomain(format!("asymmetric metric at node {node}")));
                }
                let tr = g[0] + g[3];
                let det = g[0] * g[3] - g[1] * g[2];
                let disc = ((g[0] - g[3]).powi(2) + 4.0 * g[1] * g[2]).max(0.0).sqrt();
                (0.5 * (tr - disc), det)
            };
            if !(min_eig > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "metric not positive definite at node {node}"
                )));
            }
            let s = det.sqrt();
            if (self.sqrt_det_g[node] - s).abs() > 1e-12 * s {
                return Err(Error::InvalidDomain(format!("sqrt_det_g mismatch at node {node}")));
            }
        }
        Ok(())
    }
}
