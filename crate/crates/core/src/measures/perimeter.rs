//! `e^{αr}`-weighted perimeter of subgraph indicators in `Ω × ℝ`.
//!
//! Indicator values sit at the `r`-cell centres, with a fixed row of ones
//! below `-T` and of zeros above `T`. Between two consecutive rows the
//! indicator is interpolated as follows:
//!
//! * 1D `Ω`: each `(x, r)` rectangle is split into two P1 triangles.
//! * 2D `Ω`: each prism `T × [r_j, r_{j+1}]` uses the P1 gradient of the
//!   row average over `T` and the vertex-mean difference quotient in `r`.
//!
//! The weight `e^{αr}` is integrated exactly over each element.

use serde::{Deserialize, Serialize};

use super::indicator::SubgraphIndicator;
use crate::error::Result;
use crate::numerics::{exp_integral, gauss8};

/// Weighted perimeter with its non-zero cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerimeterReport {
    pub total: f64,
    /// Cells with non-zero density, in element order.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub cells: Vec<PerimeterCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerimeterCell {
    pub index: usize,
    /// Product-metric volume of the cell.
    pub volume: f64,
    /// Weighted `|Dλ|` averaged over the cell.
    pub density: f64,
    /// Unit `Dλ` in the orthonormal `(x, r)` frame; unused entries are 0.
    pub direction: [f64; 3],
}

/// Structured gradient operator on the extended indicator grid.
///
/// Extended columns have stride `n_r + 2`: entry 0 is the row below `-T`,
/// entries `1..=n_r` the cells, and `n_r + 1` the row above `T`.
#[derive(Debug, Clone)]
pub(crate) struct PerimeterGrid {
    pub dim: usize,
    pub n_nodes: usize,
    pub n_r: usize,
    pub h_r: f64,
    /// `(nodes, grad rows, volume)` per `Ω` element.
    elems: Vec<([usize; 3], [[f64; 3]; 2], f64)>,
    /// `r`-weights per interval between extended rows `j` and `j+1`: one
    /// entry in 2D, the two triangle weights in 1D.
    rw: Vec<[f64; 2]>,
}

impl PerimeterGrid {
    pub fn new(ind: &SubgraphIndicator) -> Self {
        let mesh = &ind.mesh;
        let dim = mesh.dim();
        let h_r = ind.h_r;
        let alpha = ind.alpha;
        let elems = mesh.simplices.iter().map(|s| (s.nodes, s.grad, s.volume)).collect();
        let rw = (0..=ind.n_r)
            .map(|j| {
                let r0 = -ind.cap + (j as f64 - 0.5) * h_r;
                if dim == 2 {
                    [exp_integral(alpha, r0, r0 + h_r), 0.0]
                } else {
                    let lower = gauss8(0.0, 1.0, |t| (1.0 - t) * (alpha * (r0 + t * h_r)).exp()) * h_r;
                    let upper = gauss8(0.0, 1.0, |t| t * (alpha * (r0 + t * h_r)).exp()) * h_r;
                    [lower, upper]
                }
            })
            .collect();
        Self {
            dim,
            n_nodes: mesh.n_nodes(),
            n_r: ind.n_r,
            h_r,
            elems,
            rw,
        }
    }

    pub fn stride(&self) -> usize {
        self.n_r + 2
    }

    /// Components per cell.
    pub fn comps(&self) -> usize {
        self.dim + 1
    }

    pub fn n_cells(&self) -> usize {
        let per = if self.dim == 2 { 1 } else { 2 };
        per * self.elems.len() * (self.n_r + 1)
    }

    pub fn extend(&self, ind: &SubgraphIndicator) -> Vec<f64> {
        let s = self.stride();
        let mut ext = vec![0.0; self.n_nodes * s];
        for v in 0..self.n_nodes {
            ext[v * s] = 1.0;
            ext[v * s + 1..v * s + 1 + self.n_r].copy_from_slice(ind.column(v));
        }
        ext
    }

    /// Calls `f(cell, weight, volume, gradient)` for every cell.
    pub fn for_each_cell(&self, ext: &[f64], mut f: impl FnMut(usize, f64, f64, [f64; 3])) {
        let s = self.stride();
        let hr = self.h_r;
        let mut cell = 0;
        for &(nodes, grad, vol) in &self.elems {
            if self.dim == 2 {
                for j in 0..=self.n_r {
                    let mut g = [0.0; 3];
                    for (a, &v) in nodes.iter().enumerate() {
                        let lo = ext[v * s + j];
                        let hi = ext[v * s + j + 1];
                        let m = 0.5 * (lo + hi);
                        g[0] += grad[0][a] * m;
                        g[1] += grad[1][a] * m;
                        g[2] += (hi - lo) / (3.0 * hr);
                    }
                    f(cell, vol * self.rw[j][0], vol * hr, g);
                    cell += 1;
                }
            } else {
                let (p, q) = (nodes[0], nodes[1]);
                for j in 0..=self.n_r {
                    let (p0, p1) = (ext[p * s + j], ext[p * s + j + 1]);
                    let (q0, q1) = (ext[q * s + j], ext[q * s + j + 1]);
                    let lower = [(q0 - p0) / vol, (q1 - q0) / hr, 0.0];
                    let upper = [(q1 - p1) / vol, (p1 - p0) / hr, 0.0];
                    f(cell, vol * self.rw[j][0], 0.5 * vol * hr, lower);
                    f(cell + 1, vol * self.rw[j][1], 0.5 * vol * hr, upper);
                    cell += 2;
                }
            }
        }
    }

    /// `Σ w_c |D_c λ|`.
    pub fn total(&self, ext: &[f64]) -> f64 {
        let mut sum = 0.0;
        self.for_each_cell(ext, |_, w, _, g| sum += w * norm(g));
        sum
    }

    /// Unweighted cell gradients into `out` (`comps()` per cell).
    pub fn apply(&self, ext: &[f64], out: &mut [f64]) {
        let c = self.comps();
        self.for_each_cell(ext, |cell, _, _, g| out[cell * c..cell * c + c].copy_from_slice(&g[..c]));
    }

    /// Cell weights `w_c`.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_cells()];
        let ext = vec![0.0; self.n_nodes * self.stride()];
        self.for_each_cell(&ext, |cell, wc, _, _| w[cell] = wc);
        w
    }

    /// Adds `Dᵀ p` to `out` over the extended grid.
    pub fn adjoint_add(&self, p: &[f64], out: &mut [f64]) {
        let s = self.stride();
        let hr = self.h_r;
        let c = self.comps();
        let mut cell = 0;
        for &(nodes, grad, vol) in &self.elems {
            if self.dim == 2 {
                for j in 0..=self.n_r {
                    let q = &p[cell * c..cell * c + 3];
                    for (a, &v) in nodes.iter().enumerate() {
                        let x = 0.5 * (grad[0][a] * q[0] + grad[1][a] * q[1]);
                        let r = q[2] / (3.0 * hr);
                        out[v * s + j] += x - r;
                        out[v * s + j + 1] += x + r;
                    }
                    cell += 1;
                }
            } else {
                let (pn, qn) = (nodes[0], nodes[1]);
                for j in 0..=self.n_r {
                    let lo = &p[cell * c..cell * c + 2];
                    let up = &p[(cell + 1) * c..(cell + 1) * c + 2];
                    out[qn * s + j] += lo[0] / vol - lo[1] / hr;
                    out[pn * s + j] -= lo[0] / vol;
                    out[qn * s + j + 1] += lo[1] / hr + up[0] / vol;
                    out[pn * s + j + 1] += up[1] / hr - up[0] / vol;
                    out[pn * s + j] -= up[1] / hr;
                    cell += 2;
                }
            }
        }
    }

    /// Dual field `w_c (Du, -1)/√(1+|Du|²)` of the foliation by vertical
    /// translates of the P1 graph of `u`, in `comps()` layout.
    pub fn foliation_dual(&self, u: &[f64]) -> Vec<f64> {
        let c = self.comps();
        let w = self.weights();
        let per = if self.dim == 2 { 1 } else { 2 };
        let mut p = vec![0.0; self.n_cells() * c];
        let mut cell = 0;
        for &(nodes, grad, vol) in &self.elems {
            let mut dir = [0.0; 3];
            if self.dim == 2 {
                for a in 0..3 {
                    dir[0] += grad[0][a] * u[nodes[a]];
                    dir[1] += grad[1][a] * u[nodes[a]];
                }
                dir[2] = -1.0;
            } else {
                dir[0] = (u[nodes[1]] - u[nodes[0]]) / vol;
                dir[1] = -1.0;
            }
            let n = norm(dir);
            for _ in 0..per * (self.n_r + 1) {
                for a in 0..c {
                    p[cell * c + a] = w[cell] * dir[a] / n;
                }
                cell += 1;
            }
        }
        p
    }

    /// Absolute row sums per cell block (max over components) and absolute
    /// column sums per extended entry of `D`.
    pub fn abs_sums(&self) -> (Vec<f64>, Vec<f64>) {
        let s = self.stride();
        let hr = self.h_r;
        let mut rows = vec![0.0; self.n_cells()];
        let mut cols = vec![0.0; self.n_nodes * s];
        let mut cell = 0;
        for &(nodes, grad, vol) in &self.elems {
            if self.dim == 2 {
                let gx0: f64 = grad[0].iter().map(|x| x.abs()).sum();
                let gx1: f64 = grad[1].iter().map(|x| x.abs()).sum();
                let row = gx0.max(gx1).max(2.0 / hr);
                for j in 0..=self.n_r {
                    rows[cell] = row;
                    for (a, &v) in nodes.iter().enumerate() {
                        let x = 0.5 * (grad[0][a].abs() + grad[1][a].abs()) + 1.0 / (3.0 * hr);
                        cols[v * s + j] += x;
                        cols[v * s + j + 1] += x;
                    }
                    cell += 1;
                }
            } else {
                let (pn, qn) = (nodes[0], nodes[1]);
                let row = (2.0 / vol).max(2.0 / hr);
                for j in 0..=self.n_r {
                    rows[cell] = row;
                    rows[cell + 1] = row;
                    cols[qn * s + j] += 1.0 / vol + 1.0 / hr;
                    cols[pn * s + j] += 1.0 / vol + 1.0 / hr;
                    cols[qn * s + j + 1] += 1.0 / hr + 1.0 / vol;
                    cols[pn * s + j + 1] += 1.0 / hr + 1.0 / vol;
                    cell += 2;
                }
            }
        }
        (rows, cols)
    }
}

pub(crate) fn norm(g: [f64; 3]) -> f64 {
    (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
}

/// `∫ e^{αr} |Dλ|` in the product metric `g + dr²`.
pub fn weighted_perimeter(ind: &SubgraphIndicator) -> Result<PerimeterReport> {
    ind.check_monotone()?;
    let grid = PerimeterGrid::new(ind);
    let ext = grid.extend(ind);
    let mut cells = Vec::new();
    let mut total = 0.0;
    grid.for_each_cell(&ext, |index, w, volume, g| {
        let n = norm(g);
        if n > 0.0 {
            let e = w * n;
            total += e;
            cells.push(PerimeterCell {
                index,
                volume,
                density: e / volume,
                direction: [g[0] / n, g[1] / n, g[2] / n],
            });
        }
    });
    Ok(PerimeterReport { total, cells })
}
