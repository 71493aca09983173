//! Relaxed subgraph indicators on `Ω × [-T, T]` and profile reconstruction.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fields::{NodeClass, ScalarField};
use crate::geometry::DomainMesh;
use crate::numerics::{exp_integral, gauss8};

/// Monotone-in-`r` field `λ(x, r) ∈ [0, 1]` on the product grid.
///
/// The `r`-axis has `n_r` cells of height `h_r` covering `[-T, T]`; value
/// `k` of a column is the cell `[-T + k h_r, -T + (k+1) h_r]`. Below `-T`
/// the indicator is taken as 1 and above `T` as 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgraphIndicator {
    pub mesh: DomainMesh,
    pub cap: f64,
    pub h_r: f64,
    pub n_r: usize,
    pub alpha: f64,
    /// Node-major: `values[node * n_r + k]`.
    pub values: Vec<f64>,
}

/// How the jump of the indicator across the graph is resolved in `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transition {
    /// Sharp jump with one fractional cell, `λ = ∫_cell e^{αr} 1_{r<u} / ∫_cell e^{αr}`.
    Cell,
    /// Quintic smoothstep of total width `width`, shifted so that every
    /// level set is a vertical translate of the graph whose `e^{αr}`-average
    /// is the graph itself.
    Smooth { width: f64 },
}

impl Transition {
    /// `Smooth` with width `4√h`, `h` the mesh spacing.
    pub fn default_for(mesh: &DomainMesh) -> Self {
        Transition::Smooth {
            width: 4.0 * mesh.h.sqrt(),
        }
    }
}

impl SubgraphIndicator {
    /// Indicator filled with `value` everywhere.
    pub fn filled(mesh: &DomainMesh, cap: f64, h_r: f64, alpha: f64, value: f64) -> Result<Self> {
        let n_r = r_cells(cap, h_r)?;
        if alpha < 0.0 {
            return Err(Error::NonPositiveAlpha(alpha));
        }
        Ok(Self {
            mesh: mesh.clone(),
            cap,
            h_r: 2.0 * cap / n_r as f64,
            n_r,
            alpha,
            values: vec![value; mesh.n_nodes() * n_r],
        })
    }

    pub fn column(&self, node: usize) -> &[f64] {
        &self.values[node * self.n_r..(node + 1) * self.n_r]
    }

    pub fn column_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.n_r..(node + 1) * self.n_r]
    }

    /// Lower edge of cell `k`.
    pub fn r_edge(&self, k: usize) -> f64 {
        -self.cap + k as f64 * self.h_r
    }

    pub fn r_center(&self, k: usize) -> f64 {
        self.r_edge(k) + 0.5 * self.h_r
    }

    /// `∫_cell e^{αr} dr` of cell `k`.
    pub fn cell_weight(&self, k: usize) -> f64 {
        exp_integral(self.alpha, self.r_edge(k), self.r_edge(k) + self.h_r)
    }

    /// Fails with the first node and level where `λ` leaves `[0, 1]` or
    /// increases in `r`.
    pub fn check_monotone(&self) -> Result<()> {
        const TOL: f64 = 1e-12;
        for node in 0..self.mesh.n_nodes() {
            let col = self.column(node);
            let mut prev = 1.0;
            for (k, &v) in col.iter().enumerate() {
                if !(v >= -TOL && v <= 1.0 + TOL) || v > prev + TOL {
                    return Err(Error::NotMonotone { node, level: k });
                }
                prev = v;
            }
        }
        Ok(())
    }

    /// Same indicator moved up by `m` cells (down for negative `m`), refilled
    /// from the fixed slabs below and above.
    pub fn shifted(&self, m: i64) -> Self {
        let mut out = self.clone();
        let n = self.n_r as i64;
        for node in 0..self.mesh.n_nodes() {
            let src = self.column(node);
            for (k, dst) in out.column_mut(node).iter_mut().enumerate() {
                let from = k as i64 - m;
                *dst = if from < 0 {
                    1.0
                } else if from >= n {
                    0.0
                } else {
                    src[from as usize]
                };
            }
        }
        out
    }

    /// Same indicator on `[-T - m h_r, T + m h_r]`, padded with full cells
    /// below and empty cells above.
    pub fn extended(&self, m: usize) -> Self {
        let n_r = self.n_r + 2 * m;
        let mut values = Vec::with_capacity(self.mesh.n_nodes() * n_r);
        for node in 0..self.mesh.n_nodes() {
            values.extend(std::iter::repeat(1.0).take(m));
            values.extend_from_slice(self.column(node));
            values.extend(std::iter::repeat(0.0).take(m));
        }
        Self {
            mesh: self.mesh.clone(),
            cap: self.cap + m as f64 * self.h_r,
            h_r: self.h_r,
            n_r,
            alpha: self.alpha,
            values,
        }
    }

    /// CSV dump with columns `x_index, r_index, lambda`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_index,r_index,lambda\n");
        for node in 0..self.mesh.n_nodes() {
            for (k, v) in self.column(node).iter().enumerate() {
                let _ = writeln!(out, "{node},{k},{v:.17e}");
            }
        }
        out
    }
}

fn r_cells(cap: f64, h_r: f64) -> Result<usize> {
    if !(cap > 0.0) {
        return Err(Error::NonPositiveCap(cap));
    }
    if !(h_r > 0.0) || !h_r.is_finite() {
        return Err(Error::NonPositiveResolution(h_r));
    }
    Ok(((2.0 * cap / h_r).round() as usize).max(2))
}

/// Quintic smoothstep profile falling from 1 at `-w/2` to 0 at `w/2`.
fn smooth_profile(t: f64, w: f64) -> f64 {
    let x = (t / w + 0.5).clamp(0.0, 1.0);
    1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

/// Offset `c` such that `α ∫ e^{αt} S(t - c) dt = 1`, which makes the
/// smoothed indicator reconstruct the graph exactly.
fn smooth_offset(alpha: f64, w: f64) -> f64 {
    // D(t) = S(t) - 1_{t<0} is supported in [-w/2, w/2].
    let j = gauss8(-0.5 * w, 0.0, |t| (alpha * t).exp() * (smooth_profile(t, w) - 1.0))
        + gauss8(0.0, 0.5 * w, |t| (alpha * t).exp() * smooth_profile(t, w));
    if alpha > 0.0 {
        -(alpha * j).ln_1p() / alpha
    } else {
        -j
    }
}

/// Subgraph indicator of `clamp(u, ±T)` with the default smooth transition.
pub fn subgraph_indicator(mesh: &DomainMesh, u: &ScalarField, cap: f64, h_r: f64, alpha: f64) -> Result<SubgraphIndicator> {
    subgraph_indicator_with(mesh, u, cap, h_r, alpha, Transition::default_for(mesh))
}

/// Subgraph indicator with an explicit transition. Cell values are
/// `e^{αr}`-weighted cell averages of the continuous profile, so that
/// [`reconstruct_profile`] inverts them up to the cap.
pub fn subgraph_indicator_with(
    mesh: &DomainMesh,
    u: &ScalarField,
    cap: f64,
    h_r: f64,
    alpha: f64,
    transition: Transition,
) -> Result<SubgraphIndicator> {
    u.check_len(mesh.n_nodes())?;
    let mut ind = SubgraphIndicator::filled(mesh, cap, h_r, alpha, 0.0)?;
    let h_r = ind.h_r;
    let offset = match transition {
        Transition::Cell => 0.0,
        Transition::Smooth { width } => {
            if !(width > 0.0) {
                return Err(Error::InvalidConfig(format!("transition width must be positive, got {width}")));
            }
            smooth_offset(alpha, width)
        }
    };
    for node in 0..mesh.n_nodes() {
        let c = u.values[node].clamp(-cap, cap) + offset;
        for k in 0..ind.n_r {
            let a = ind.r_edge(k);
            let b = a + h_r;
            ind.values[node * ind.n_r + k] = match transition {
                Transition::Cell => {
                    if c <= a {
                        0.0
                    } else if c >= b {
                        1.0
                    } else if alpha > 0.0 {
                        (alpha * (c - a)).exp_m1() / (alpha * h_r).exp_m1()
                    } else {
                        (c - a) / h_r
                    }
                }
                Transition::Smooth { width } => smooth_cell(a, b, c, width, alpha),
            };
        }
    }
    Ok(ind)
}

/// `∫_a^b e^{αr} S(r - c) / ∫_a^b e^{αr}` for the smoothstep of width `w`.
fn smooth_cell(a: f64, b: f64, c: f64, w: f64, alpha: f64) -> f64 {
    let lo = c - 0.5 * w;
    let hi = c + 0.5 * w;
    if b <= lo {
        return 1.0;
    }
    if a >= hi {
        return 0.0;
    }
    // Weights relative to e^{αa} keep large caps in range.
    let full = exp_integral(alpha, 0.0, b - a);
    let mut num = 0.0;
    if lo > a {
        num += exp_integral(alpha, 0.0, lo - a);
    }
    let s0 = lo.max(a);
    let s1 = hi.min(b);
    if s1 > s0 {
        num += gauss8(s0, s1, |r| (alpha * (r - a)).exp() * smooth_profile(r - c, w));
    }
    (num / full).clamp(0.0, 1.0)
}

/// Profile `ω` with `e^{αω} = α ∫ e^{αt} λ(x, t) dt` (the fixed slab below
/// `-T` included), and the cap flags with margin `δ = 2h_r`.
pub fn reconstruct_profile(ind: &SubgraphIndicator) -> (ScalarField, Vec<NodeClass>) {
    let t = ind.cap;
    let delta = 2.0 * ind.h_r;
    let alpha = ind.alpha;
    let n = ind.mesh.n_nodes();
    let mut omega = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    // ∫_cell e^{α(t - T)} per cell, all at most h_r.
    let weights: Vec<f64> = (0..ind.n_r)
        .map(|k| exp_integral(alpha, ind.r_edge(k) - t, ind.r_edge(k) + ind.h_r - t))
        .collect();
    for node in 0..n {
        let col = ind.column(node);
        let w = if alpha > 0.0 {
            let s: f64 = (-2.0 * alpha * t).exp()
                + alpha * col.iter().zip(&weights).map(|(l, w)| l * w).sum::<f64>();
            (t + s.ln() / alpha).clamp(-t, t)
        } else {
            -t + col.iter().sum::<f64>() * ind.h_r
        };
        classes.push(if w < -t + delta {
            NodeClass::MinusInf
        } else if w >= t - delta {
            NodeClass::PlusInf
        } else {
            NodeClass::Finite
        });
        omega.push(w);
    }
    (
        ScalarField {
            values: omega,
            cap: Some(t),
        },
        classes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};

    #[test]
    fn cell_mode_of_zero_is_a_sharp_step() {
        let mesh = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 0.25).unwrap();
        let u = ScalarField::constant(mesh.n_nodes(), 0.0);
        let ind = subgraph_indicator_with(&mesh, &u, 1.0, 0.125, 1.0, Transition::Cell).unwrap();
        for node in 0..mesh.n_nodes() {
            for k in 0..ind.n_r {
                let expect = if ind.r_center(k) < 0.0 { 1.0 } else { 0.0 };
                assert_eq!(ind.column(node)[k], expect);
            }
        }
    }

    #[test]
    fn smooth_indicator_reconstructs_exactly() {
        let mesh = build_domain(DomainSpec::EuclideanDisk { r: 1.0 }, 0.1).unwrap();
        let u = ScalarField::new((0..mesh.n_nodes()).map(|v| 0.5 * mesh.embedding(v)[0] - 0.2).collect());
        for alpha in [0.0, 1.0, 2.0] {
            let ind = subgraph_indicator(&mesh, &u, 3.0, 0.05, alpha).unwrap();
            ind.check_monotone().unwrap();
            let (w, flags) = reconstruct_profile(&ind);
            for v in 0..mesh.n_nodes() {
                assert!((w.values[v] - u.values[v]).abs() < 1e-12, "alpha {alpha}");
                assert_eq!(flags[v], NodeClass::Finite);
            }
        }
    }

    #[test]
    fn cell_indicator_reconstructs_within_half_cell() {
        let mesh = build_domain(DomainSpec::Interval { a: 1.0 }, 0.1).unwrap();
        let u = ScalarField::new((0..mesh.n_nodes()).map(|v| 1.7 * mesh.param_coords(v)[0]).collect());
        let ind = subgraph_indicator_with(&mesh, &u, 1.0, 0.1, 1.5, Transition::Cell).unwrap();
        let (w, _) = reconstruct_profile(&ind);
        for v in 0..mesh.n_nodes() {
            assert!((w.values[v] - u.values[v].clamp(-1.0, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_indicator_is_minus_infinity() {
        let mesh = build_domain(DomainSpec::Interval { a: 1.0 }, 0.25).unwrap();
        let ind = SubgraphIndicator::filled(&mesh, 2.0, 0.1, 2.0, 0.0).unwrap();
        let (_, flags) = reconstruct_profile(&ind);
        assert!(flags.iter().all(|&c| c == NodeClass::MinusInf));
    }
}
