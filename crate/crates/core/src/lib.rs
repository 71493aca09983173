//! Discretizations of the translating mean curvature equation
//! `div(Du/ω) = α/ω`, `ω = √(1+|Du|²)`, on catalog Riemannian domains.
//!
//! Two formulations are solved side by side: nodal minimization of the
//! relaxed conformal area `∫ e^{αu} ω + (1/α)∮|e^{αu} - e^{αψ}|`, and convex
//! minimization of the `e^{αr}`-weighted perimeter of subgraph indicators
//! on `Ω × [-T, T]`.

pub mod analysis;
pub mod error;
pub mod fields;
pub mod functionals;
pub mod geometry;
pub mod measures;
pub mod numerics;
pub mod solvers;

pub use analysis::{
    check_c0_estimate, check_conformal_curvature, check_gradient_estimate, check_mean_convexity,
    check_small_sphere_curvature, DiagnosticEntry, DiagnosticReport, FrozenConstants,
};
pub use error::{Error, Result};
pub use fields::{ScalarField, VectorField};
pub use functionals::{
    conformal_area, default_wall_eps, energy_gradient, product_area, relaxed_energy, smoothed_energy, EnergyReport,
};
pub use geometry::{
    boundary_mean_curvature, build_domain, conformal_mean_curvature, divergence, gradient, graph_mean_curvature,
    BoundaryCurvature, BoundaryNode, DomainMesh, DomainSpec, MetricChart, MetricModel, Simplex,
};
pub use fields::{class_counts, NodeClass};
pub use measures::{
    boundary_jump, bv_norm, mollify_scalar, mollify_vector, reconstruct_profile, subgraph_indicator,
    subgraph_indicator_with, truncate, weighted_perimeter, MollifierSpec, PerimeterCell, PerimeterReport,
    SubgraphIndicator, Transition,
};
pub use solvers::{
    blowup_scan, classify, miranda_probe, residual_norms, solve_indicator, solve_indicator_from, solve_nodal,
    BlowupScan, HistoryEntry, MirandaReport, SolveReport, SolverConfig,
};
