//! Discrete Riemannian domains, finite-difference operators and curvature.

mod chart;
mod curvature;
mod mesh;
mod ops;

pub use chart::{MetricChart, MetricModel};
pub use curvature::{boundary_mean_curvature, conformal_mean_curvature, graph_mean_curvature, BoundaryCurvature};
pub use mesh::{build_domain, BoundaryNode, DomainMesh, DomainSpec, Simplex};
pub use ops::{divergence, gradient};
