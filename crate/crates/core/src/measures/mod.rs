//! BV norms, truncation, wall terms, subgraph indicators and their
//! weighted perimeter in `Ω × ℝ` with the metric `e^{2αr/n}(g + dr²)`.

mod indicator;
mod mollify;
pub(crate) mod perimeter;

pub use indicator::{reconstruct_profile, subgraph_indicator, subgraph_indicator_with, SubgraphIndicator, Transition};
pub use mollify::{mollify_scalar, mollify_vector, MollifierSpec};
pub use perimeter::{weighted_perimeter, PerimeterCell, PerimeterReport};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::functionals::wall_gap;
use crate::geometry::DomainMesh;

/// `∫_Ω |Du| dvol`, exact for the P1 interpolant of `u`.
pub fn bv_norm(mesh: &DomainMesh, u: &ScalarField) -> Result<f64> {
    u.check_len(mesh.n_nodes())?;
    let dim = mesh.dim();
    Ok(mesh
        .simplices
        .iter()
        .map(|s| {
            let g2: f64 = (0..dim)
                .map(|r| {
                    let g: f64 = (0..=dim).map(|a| s.grad[r][a] * u.values[s.nodes[a]]).sum();
                    g * g
                })
                .sum();
            g2.sqrt() * s.volume
        })
        .sum())
}

/// `max(min(u, T), -T)`, carrying the cap.
pub fn truncate(u: &ScalarField, cap: f64) -> Result<ScalarField> {
    if !(cap > 0.0) {
        return Err(Error::NonPositiveCap(cap));
    }
    Ok(ScalarField {
        values: u.values.iter().map(|v| v.clamp(-cap, cap)).collect(),
        cap: Some(cap),
    })
}

/// `(1/α) ∮ |e^{αu} - e^{αψ}| dA` with the boundary trapezoid weights.
pub fn boundary_jump(mesh: &DomainMesh, u: &ScalarField, psi: &ScalarField, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    u.check_len(mesh.n_nodes())?;
    psi.check_len(mesh.n_nodes())?;
    Ok(mesh
        .boundary
        .iter()
        .map(|b| b.area * wall_gap(u.values[b.node], psi.values[b.node], alpha).abs())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};

    #[test]
    fn bv_of_examples() {
        let sq = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 0.1).unwrap();
        let x = ScalarField::new((0..sq.n_nodes()).map(|v| sq.param_coords(v)[0]).collect());
        assert!((bv_norm(&sq, &x).unwrap() - 1.0).abs() < 1e-13);
        assert!(bv_norm(&sq, &ScalarField::constant(sq.n_nodes(), 3.0)).unwrap() < 1e-12);
        let line = build_domain(DomainSpec::Interval { a: 0.5 }, 0.01).unwrap();
        let v = ScalarField::new((0..line.n_nodes()).map(|n| line.param_coords(n)[0].abs()).collect());
        assert!((bv_norm(&line, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_clamps_and_records_cap() {
        let u = ScalarField::new(vec![-5.0, 0.5, 4.0]);
        let t = truncate(&u, 2.0).unwrap();
        assert_eq!(t.values, vec![-2.0, 0.5, 2.0]);
        assert_eq!(t.cap, Some(2.0));
        assert!(truncate(&u, 0.0).is_err());
    }

    #[test]
    fn hemisphere_wall_tends_to_pi() {
        let mesh = build_domain(DomainSpec::Hemisphere, 0.02).unwrap();
        let psi = ScalarField::constant(mesh.n_nodes(), 0.0);
        let u = ScalarField::constant(mesh.n_nodes(), -30.0);
        let j = boundary_jump(&mesh, &u, &psi, 2.0).unwrap();
        assert!((j - std::f64::consts::PI).abs() < 1e-3);
        assert!(boundary_jump(&mesh, &u, &psi, 0.0).is_err());
    }
}
