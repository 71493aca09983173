//! Structural invariants over randomly drawn domains and fields.

use proptest::prelude::*;
use tmce_core::{
    build_domain, conformal_mean_curvature, solve_indicator, solve_nodal, NodeClass, SolverConfig, relaxed_energy, subgraph_indicator, truncate, weighted_perimeter,
    DomainMesh, DomainSpec, MollifierSpec, ScalarField,
};

fn domain() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        (0.5..1.5f64).prop_map(|a| DomainSpec::Interval { a }),
        (0.5..1.5f64).prop_map(|r| DomainSpec::EuclideanDisk { r }),
        (0.5..1.5f64).prop_map(|l| DomainSpec::EuclideanSquare { l }),
        (0.3..0.6f64).prop_map(|r_in| DomainSpec::EuclideanAnnulus { r_in, r_out: 1.2 }),
        (0.2..1.5f64).prop_map(|theta0| DomainSpec::SphereCap { theta0 }),
        Just(DomainSpec::Hemisphere),
        (0.3..1.2f64).prop_map(|r| DomainSpec::HyperbolicDisk { r }),
    ]
}

fn small_domain() -> impl Strategy<Value = DomainMesh> {
    (domain(), 5usize..9).prop_map(|(spec, k)| build_domain(spec, 1.0 / k as f64).unwrap())
}

/// A mesh with node values drawn uniformly from `[-amp, amp]`.
fn mesh_and_field(amp: f64) -> impl Strategy<Value = (DomainMesh, ScalarField)> {
    small_domain().prop_flat_map(move |mesh| {
        let n = mesh.n_nodes();
        (Just(mesh), prop::collection::vec(-amp..amp, n).prop_map(ScalarField::new))
    })
}

/// Chart nodes within one grid step along every axis, angles wrapping.
fn chart_stencil(mesh: &DomainMesh, node: usize) -> Vec<usize> {
    let chart = &mesh.chart;
    let idx = chart.multi_index(node);
    let offsets: Vec<[i64; 2]> = if chart.dim == 1 {
        vec![[-1, 0], [1, 0]]
    } else {
        (-1..=1).flat_map(|a| (-1..=1).map(move |b| [a, b])).filter(|o| *o != [0, 0]).collect()
    };
    offsets
        .into_iter()
        .filter_map(|o| {
            let mut at = [0usize; 2];
            for a in 0..chart.dim {
                let n = chart.shape[a] as i64;
                let mut i = idx[a] as i64 + o[a];
                if chart.periodic[a] {
                    i = i.rem_euclid(n);
                } else if i < 0 || i >= n {
                    return None;
                }
                at[a] = i as usize;
            }
            Some(chart.index(at[0], at[1]))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn catalog_metrics_are_spd_with_consistent_density(mesh in small_domain()) {
        let chart = &mesh.chart;
        for v in 0..chart.n_nodes() {
            let g = chart.g(v);
            let det = if chart.dim == 1 {
                prop_assert!(g[0] > 0.0);
                g[0]
            } else {
                prop_assert!(g[1] == g[2]);
                prop_assert!(g[0] > 0.0 && g[0] * g[3] - g[1] * g[2] > 0.0);
                g[0] * g[3] - g[1] * g[2]
            };
            prop_assert!((chart.sqrt_det_g[v] - det.sqrt()).abs() <= 1e-12 * det.sqrt());
        }
    }

    #[test]
    fn boundary_normals_are_unit_and_touch_the_interior(mesh in small_domain()) {
        for b in &mesh.boundary {
            let g = mesh.metric_at(b.node);
            let len2 = if mesh.dim() == 1 {
                g[0] * b.normal[0] * b.normal[0]
            } else {
                g[0] * b.normal[0] * b.normal[0] + 2.0 * g[1] * b.normal[0] * b.normal[1] + g[3] * b.normal[1] * b.normal[1]
            };
            prop_assert!((len2 - 1.0).abs() <= 1e-10, "node {} |v|² = {}", b.node, len2);
            prop_assert!(chart_stencil(&mesh, b.node).into_iter().any(|w| mesh.interior_mask[w]));
        }
    }

    #[test]
    fn energy_report_is_consistent_and_scales_under_translation(
        (mesh, u) in mesh_and_field(1.5),
        alpha in 0.2..2.5f64,
        a in -1.0..1.0f64,
    ) {
        let psi = ScalarField::new(u.values.iter().map(|x| 0.5 * x.sin()).collect());
        let e = relaxed_energy(&mesh, &u, &psi, alpha).unwrap();
        prop_assert!(e.f >= 0.0 && e.f_alpha >= 0.0 && e.wall >= 0.0 && e.bv >= 0.0);
        prop_assert!((e.j - (e.f_alpha + e.wall)).abs() <= 1e-12 * e.j);
        let s = relaxed_energy(&mesh, &u.shifted(a), &psi.shifted(a), alpha).unwrap();
        let k = (alpha * a).exp();
        prop_assert!((s.j - k * e.j).abs() <= 1e-12 * s.j);
        prop_assert!((s.f - e.f).abs() <= 1e-12 * e.f);
    }

    #[test]
    fn area_bounds_hold_for_every_capped_field(
        (mesh, raw) in mesh_and_field(4.0),
        cap in 0.1..3.0f64,
        alpha in 0.1..3.0f64,
    ) {
        let u = truncate(&raw, cap).unwrap();
        prop_assert!(u.max_abs() <= cap);
        let e = relaxed_energy(&mesh, &u, &u, alpha).unwrap();
        let vol = mesh.volume();
        let tol = 1e-12 * (1.0 + e.f);
        prop_assert!(e.f >= vol.max(e.bv) - tol);
        prop_assert!(e.f <= vol + e.bv + tol);
        prop_assert!(e.f_alpha >= (-alpha * cap).exp() * vol.max(e.bv) * (1.0 - 1e-12));
    }

    #[test]
    fn subgraph_indicators_are_monotone_and_shift_exactly(
        (mesh, u) in mesh_and_field(0.8),
        alpha in 0.2..2.0f64,
        m in 1i64..4,
    ) {
        let h_r = 1.0 / 16.0;
        let ind = subgraph_indicator(&mesh, &u, 1.5, h_r, alpha).unwrap();
        prop_assert!(ind.check_monotone().is_ok());
        for v in 0..mesh.n_nodes() {
            let col = ind.column(v);
            prop_assert!(col.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!(col[0] >= col[ind.n_r - 1]);
        }
        let p = weighted_perimeter(&ind).unwrap();
        let sum: f64 = p.cells.iter().map(|c| c.density * c.volume).sum();
        prop_assert!((p.total - sum).abs() <= 1e-10 * p.total);
        let padded = weighted_perimeter(&ind.extended(3)).unwrap().total;
        prop_assert!((padded - p.total).abs() <= 1e-12 * p.total);
        // |u| ≤ 0.8 and the transition width keep the graph off the slabs moved in.
        let up = weighted_perimeter(&ind.extended(4).shifted(m)).unwrap().total;
        let expect = (alpha * m as f64 * ind.h_r).exp() * p.total;
        prop_assert!((up - expect).abs() <= 1e-10 * expect, "{} vs {}", up, expect);
    }

    #[test]
    fn mollifier_profile_is_even(x in -1.0..1.0f64, y in -1.0..1.0f64) {
        prop_assert_eq!(MollifierSpec::profile(&[x, y]), MollifierSpec::profile(&[-x, -y]));
        prop_assert_eq!(MollifierSpec::profile(&[x]), MollifierSpec::profile(&[-x]));
    }

    #[test]
    fn zero_conformal_factor_is_the_identity(h in -10.0..10.0f64, m in 2usize..6) {
        prop_assert_eq!(conformal_mean_curvature(h, 0.0, 0.0, m), h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn finite_solutions_stay_clear_of_the_cap(c in -2.0..2.0f64, slope in -1.0..1.0f64, alpha in 0.2..1.5f64) {
        let mesh = build_domain(DomainSpec::EuclideanDisk { r: 0.8 }, 1.0 / 8.0).unwrap();
        let psi = ScalarField::new((0..mesh.n_nodes()).map(|v| c + slope * mesh.embedding(v)[0]).collect());
        let config = SolverConfig::default();
        let sol = solve_nodal(&mesh, &psi, alpha, &config).unwrap();
        if sol.classification.iter().all(|&k| k == NodeClass::Finite) {
            let last = *config.cap_schedule.last().unwrap();
            prop_assert!(sol.u.max_abs() < last - 2.0 * config.h_r);
        }
    }

    #[test]
    fn indicator_solver_output_is_monotone(c in -0.5..0.5f64, alpha in 0.5..1.5f64) {
        let mesh = build_domain(DomainSpec::Interval { a: 1.0 }, 0.25).unwrap();
        let psi = ScalarField::new((0..mesh.n_nodes()).map(|v| c + 0.3 * mesh.param_coords(v)[0]).collect());
        let config = SolverConfig { h_r: 0.125, indicator_cap: 1.0, indicator_max_iters: 2000, ..SolverConfig::default() };
        let (ind, _) = solve_indicator(&mesh, &psi, alpha, &config).unwrap();
        prop_assert!(ind.check_monotone().is_ok());
    }
}
