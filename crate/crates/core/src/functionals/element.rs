//! Exact P1 kernels of `∫_T e^{αu} √(1+|Du|²)` on one simplex.
//!
//! With `a = αu` at the vertices, Hermite–Genocchi gives
//! `∫_T e^{αu} = d!|T| exp[a_0..a_d]`, and each extra copy of `a_k` in the
//! divided difference inserts one factor of the hat function `φ_k`.

use crate::geometry::Simplex;
use crate::numerics::{exp_divdiff, MAX_DIVDIFF_POINTS};

/// Element quantities shared by energy, gradient and Hessian.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Element {
    pub n: usize,
    pub omega: f64,
    /// `∫_T e^{αu}`.
    pub i0: f64,
    /// `∫_T e^{αu} φ_k`.
    pub ik: [f64; 3],
    /// `(K u)_k`.
    pub q: [f64; 3],
    pub k: [[f64; 3]; 3],
    pub scale: f64,
    pub a: [f64; 3],
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|j| j as f64).product()
}

fn dd_with(a: &[f64], extra: &[f64]) -> f64 {
    let mut pts = [0.0; MAX_DIVDIFF_POINTS];
    let n = a.len();
    pts[..n].copy_from_slice(a);
    pts[n..n + extra.len()].copy_from_slice(extra);
    exp_divdiff(&pts[..n + extra.len()])
}

pub(crate) fn local_values(s: &Simplex, dim: usize, u: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, &v) in out.iter_mut().zip(&s.nodes[..=dim]) {
        *o = u[v];
    }
    out
}

impl Element {
    pub fn new(s: &Simplex, dim: usize, u: &[f64; 3], alpha: f64) -> Self {
        let n = dim + 1;
        let k = s.stiffness(dim);
        let mut q = [0.0; 3];
        let mut grad2 = 0.0;
        for i in 0..n {
            q[i] = (0..n).map(|j| k[i][j] * u[j]).sum();
            grad2 += q[i] * u[i];
        }
        let omega = (1.0 + grad2.max(0.0)).sqrt();
        let mut a = [0.0; 3];
        for i in 0..n {
            a[i] = alpha * u[i];
        }
        let scale = factorial(dim) * s.volume;
        let i0 = scale * dd_with(&a[..n], &[]);
        let mut ik = [0.0; 3];
        for i in 0..n {
            ik[i] = scale * dd_with(&a[..n], &[a[i]]);
        }
        Self {
            n,
            omega,
            i0,
            ik,
            q,
            k,
            scale,
            a,
        }
    }

    /// `∫_T e^{αu} ω`.
    pub fn energy(&self) -> f64 {
        self.omega * self.i0
    }

    /// `|Du|²` on the simplex.
    pub fn grad_sq(&self) -> f64 {
        self.omega * self.omega - 1.0
    }

    /// Partial derivatives with respect to the vertex values.
    pub fn gradient(&self, alpha: f64) -> [f64; 3] {
        let mut g = [0.0; 3];
        for i in 0..self.n {
            g[i] = self.q[i] / self.omega * self.i0 + alpha * self.omega * self.ik[i];
        }
        g
    }

    /// `∫_T e^{αu} φ_k φ_l`.
    pub fn second_moments(&self) -> [[f64; 3]; 3] {
        let n = self.n;
        let mut m = [[0.0; 3]; 3];
        for i in 0..n {
            for j in i..n {
                let mult = if i == j { 2.0 } else { 1.0 };
                let v = mult * self.scale * dd_with(&self.a[..n], &[self.a[i], self.a[j]]);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    pub fn hessian(&self, alpha: f64) -> [[f64; 3]; 3] {
        let n = self.n;
        let w = self.omega;
        let w3 = w * w * w;
        let ikl = self.second_moments();
        let mut h = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                h[i][j] = self.i0 * (self.k[i][j] / w - self.q[i] * self.q[j] / w3)
                    + alpha * (self.ik[j] * self.q[i] + self.ik[i] * self.q[j]) / w
                    + alpha * alpha * w * ikl[i][j];
            }
        }
        h
    }
}

/// `E_T(u_new) - E_T(u_old)` without subtracting the two energies.
///
/// `Δω` uses `(ω'² - ω²)/(ω' + ω)` and `ΔI_0` telescopes one vertex at a
/// time, so a tiny change next to a large energy keeps its relative accuracy.
pub(crate) fn energy_delta(s: &Simplex, dim: usize, old: &[f64; 3], new: &[f64; 3], alpha: f64) -> f64 {
    let n = dim + 1;
    let k = s.stiffness(dim);
    let mut quad_old = 0.0;
    let mut quad_new = 0.0;
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad_old += k[i][j] * old[i] * old[j];
            quad_new += k[i][j] * new[i] * new[j];
            cross += k[i][j] * (new[i] - old[i]) * (new[j] + old[j]);
        }
    }
    let w_old = (1.0 + quad_old.max(0.0)).sqrt();
    let w_new = (1.0 + quad_new.max(0.0)).sqrt();
    let d_omega = cross / (w_old + w_new);

    let scale = factorial(dim) * s.volume;
    let mut a_old = [0.0; 3];
    let mut a_new = [0.0; 3];
    for i in 0..n {
        a_old[i] = alpha * old[i];
        a_new[i] = alpha * new[i];
    }
    let i0_new = scale * dd_with(&a_new[..n], &[]);
    let mut d_i0 = 0.0;
    let mut pts = [0.0; 4];
    for i in 0..n {
        if old[i] == new[i] {
            continue;
        }
        // Nodes a'_0..a'_i followed by a_i..a_d.
        pts[..=i].copy_from_slice(&a_new[..=i]);
        pts[i + 1..n + 1].copy_from_slice(&a_old[i..n]);
        let dd = exp_divdiff(&pts[..n + 1]);
        // The divided difference in `a` picks up a factor α relative to `u`.
        d_i0 += (new[i] - old[i]) * alpha * scale * dd;
    }
    d_omega * i0_new + w_old * d_i0
}
