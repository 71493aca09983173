//! Chart-coordinate mollification with the `√det g` weighting that keeps
//! pointwise length constraints nearly intact.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::geometry::MetricChart;
use crate::numerics::gauss8;

/// Standard bump `exp(-1/(1-|x|²))` on the unit ball, scaled by `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub sigma: f64,
}

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// `∫ bump` over the unit ball of `ℝ¹` and `ℝ²`.
fn bump_mass(dim: usize) -> f64 {
    static MASS: OnceLock<[f64; 2]> = OnceLock::new();
    let m = MASS.get_or_init(|| {
        let panels = 256;
        let mut one = 0.0;
        let mut two = 0.0;
        for p in 0..panels {
            let a = p as f64 / panels as f64;
            let b = (p + 1) as f64 / panels as f64;
            one += 2.0 * gauss8(a, b, |x| bump(x * x));
            two += 2.0 * std::f64::consts::PI * gauss8(a, b, |r| r * bump(r * r));
        }
        [one, two]
    });
    m[dim - 1]
}

impl MollifierSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("mollifier width must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// Unit-mass profile at `x` in the unit ball of `ℝ^{x.len()}`.
    pub fn profile(x: &[f64]) -> f64 {
        bump(x.iter().map(|v| v * v).sum()) / bump_mass(x.len())
    }

    /// `φ_σ(x) = σ^{-n} φ(x/σ)`.
    pub fn scaled(&self, x: &[f64]) -> f64 {
        let n = x.len() as i32;
        let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() / (self.sigma * self.sigma);
        bump(r2) / bump_mass(x.len()) / self.sigma.powi(n)
    }

    /// `∫ φ` over its support by composite quadrature, for the mass check.
    pub fn quadrature_mass(dim: usize) -> f64 {
        let panels = 200;
        let mut sum = 0.0;
        for p in 0..panels {
            let a = -1.0 + 2.0 * p as f64 / panels as f64;
            let b = a + 2.0 / panels as f64;
            sum += if dim == 1 {
                gauss8(a, b, |x| Self::profile(&[x]))
            } else {
                // Polar rule: panel `p` covers radii in [0, 1] and the full circle.
                let (r0, r1) = (0.5 * (a + 1.0), 0.5 * (b + 1.0));
                gauss8(r0, r1, |r| {
                    r * (0..16)
                        .map(|q| {
                            let t0 = 2.0 * std::f64::consts::PI * q as f64 / 16.0;
                            gauss8(t0, t0 + std::f64::consts::PI / 8.0, |t| Self::profile(&[r * t.cos(), r * t.sin()]))
                        })
                        .sum::<f64>()
                })
            };
        }
        sum
    }

    /// Chart nodes at parameter distance at least `σ` from every
    /// non-periodic chart edge, where the zero extension is not felt.
    pub fn evaluation_set(&self, chart: &MetricChart) -> Result<Vec<usize>> {
        let set: Vec<usize> = (0..chart.n_nodes())
            .filter(|&v| {
                let p = chart.coords(v);
                (0..chart.dim).all(|a| {
                    chart.periodic[a]
                        || (p[a] - chart.param_box[a][0] >= self.sigma - 1e-12
                            && chart.param_box[a][1] - p[a] >= self.sigma - 1e-12)
                })
            })
            .collect();
        if set.is_empty() {
            return Err(Error::MollifierTooWide { sigma: self.sigma });
        }
        Ok(set)
    }
}

/// Discrete kernel offsets and weights, renormalized to unit sum so that
/// constants are reproduced exactly away from the chart edges.
fn kernel(chart: &MetricChart, spec: &MollifierSpec) -> Vec<([isize; 2], f64)> {
    let dim = chart.dim;
    let reach: Vec<isize> = (0..dim)
        .map(|a| (spec.sigma / chart.spacing(a)).floor() as isize)
        .collect();
    let r1 = if dim == 2 { reach[1] } else { 0 };
    let mut k = Vec::new();
    for i in -reach[0]..=reach[0] {
        for j in -r1..=r1 {
            let x = [i as f64 * chart.spacing(0), if dim == 2 { j as f64 * chart.spacing(1) } else { 0.0 }];
            let w = spec.scaled(&x[..dim]);
            if w > 0.0 {
                k.push(([i, j], w));
            }
        }
    }
    let total: f64 = k.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut k {
        *w /= total;
    }
    k
}

fn convolve(chart: &MetricChart, f: &[f64], kern: &[([isize; 2], f64)]) -> Vec<f64> {
    let n = chart.n_nodes();
    let shape = [chart.shape[0] as isize, if chart.dim == 2 { chart.shape[1] as isize } else { 1 }];
    let mut out = vec![0.0; n];
    for (v, o) in out.iter_mut().enumerate() {
        let [i, j] = chart.multi_index(v);
        let mut sum = 0.0;
        for &([di, dj], w) in kern {
            let mut idx = [i as isize + di, j as isize + dj];
            let mut inside = true;
            for a in 0..chart.dim {
                if chart.periodic[a] {
                    idx[a] = idx[a].rem_euclid(shape[a]);
                } else if idx[a] < 0 || idx[a] >= shape[a] {
                    inside = false;
                }
            }
            if inside {
                sum += w * f[chart.index(idx[0] as usize, idx[1] as usize)];
            }
        }
        *o = sum;
    }
    out
}

/// `h' = (1/√det g) φ_σ ∗ (√det g h)` in chart coordinates, with `h`
/// extended by zero outside the chart.
pub fn mollify_scalar(chart: &MetricChart, h: &ScalarField, spec: &MollifierSpec) -> Result<ScalarField> {
    h.check_len(chart.n_nodes())?;
    spec.evaluation_set(chart)?;
    let kern = kernel(chart, spec);
    let weighted: Vec<f64> = h.values.iter().zip(&chart.sqrt_det_g).map(|(x, s)| x * s).collect();
    let conv = convolve(chart, &weighted, &kern);
    Ok(ScalarField::new(conv.iter().zip(&chart.sqrt_det_g).map(|(c, s)| c / s).collect()))
}

/// `Y = (1/√det g) φ_σ ∗ (√det g X)` componentwise in the chart basis.
pub fn mollify_vector(chart: &MetricChart, x: &VectorField, spec: &MollifierSpec) -> Result<VectorField> {
    if x.len() != chart.n_nodes() || x.dim != chart.dim {
        return Err(Error::ShapeMismatch {
            expected: chart.n_nodes(),
            got: x.len(),
        });
    }
    spec.evaluation_set(chart)?;
    let kern = kernel(chart, spec);
    let mut out = VectorField::zeros(chart.n_nodes(), chart.dim);
    for a in 0..chart.dim {
        let weighted: Vec<f64> = (0..chart.n_nodes()).map(|v| x.at(v)[a] * chart.sqrt_det_g[v]).collect();
        let conv = convolve(chart, &weighted, &kern);
        for v in 0..chart.n_nodes() {
            out.at_mut(v)[a] = conv[v] / chart.sqrt_det_g[v];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};

    #[test]
    fn profile_has_unit_mass_and_symmetry() {
        assert!((MollifierSpec::quadrature_mass(1) - 1.0).abs() < 1e-10);
        assert!((MollifierSpec::quadrature_mass(2) - 1.0).abs() < 1e-10);
        assert_eq!(MollifierSpec::profile(&[0.3, -0.2]), MollifierSpec::profile(&[-0.3, 0.2]));
    }

    #[test]
    fn constants_are_reproduced_on_the_evaluation_set() {
        let mesh = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 1.0 / 32.0).unwrap();
        let spec = MollifierSpec::new(0.1).unwrap();
        let one = ScalarField::constant(mesh.chart.n_nodes(), 1.0);
        let out = mollify_scalar(&mesh.chart, &one, &spec).unwrap();
        for v in spec.evaluation_set(&mesh.chart).unwrap() {
            assert!((out.values[v] - 1.0).abs() < 1e-14);
        }
        assert!(matches!(
            mollify_scalar(&mesh.chart, &one, &MollifierSpec::new(0.6).unwrap()),
            Err(Error::MollifierTooWide { .. })
        ));
    }
}
