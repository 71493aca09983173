use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use super::chart::{MetricChart, MetricModel};
use crate::error::{Error, Result};

/// Catalog of supported domains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainSpec {
    /// Open interval `(-a, a)`.
    Interval { a: f64 },
    /// Euclidean disk of radius `r`.
    EuclideanDisk { r: f64 },
    /// Euclidean square `[0, l]²`.
    EuclideanSquare { l: f64 },
    /// Euclidean annulus `r_in < |x| < r_out`.
    EuclideanAnnulus { r_in: f64, r_out: f64 },
    /// Geodesic ball of radius `theta0` around the north pole of the unit sphere.
    SphereCap { theta0: f64 },
    /// Upper hemisphere of the unit sphere.
    Hemisphere,
    /// Geodesic ball of radius `r` in the hyperbolic plane.
    HyperbolicDisk { r: f64 },
}

impl DomainSpec {
    /// Parses `name(args)`, e.g. `sphere_cap(0.4)` or `hemisphere()`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.find('(') {
            Some(open) => {
                let close = text
                    .rfind(')')
                    .filter(|&c| c > open)
                    .ok_or_else(|| Error::InvalidDomain(format!("unbalanced parentheses in `{text}`")))?;
                (&text[..open], &text[open + 1..close])
            }
            None => (text, ""),
        };
        let args: Vec<f64> = args
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidDomain(format!("bad number `{s}` in `{text}`")))
            })
            .collect::<Result<_>>()?;
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!(
                    "`{}` takes {n} argument(s), got {}",
                    name.trim(),
                    args.len()
                )))
            }
        };
        let spec = match name.trim() {
            "interval" => {
                want(1)?;
                DomainSpec::Interval { a: args[0] }
            }
            "euclidean_disk" => {
                want(1)?;
                DomainSpec::EuclideanDisk { r: args[0] }
            }
            "euclidean_square" => {
                want(1)?;
                DomainSpec::EuclideanSquare { l: args[0] }
            }
            "euclidean_annulus" => {
                want(2)?;
                DomainSpec::EuclideanAnnulus {
                    r_in: args[0],
                    r_out: args[1],
                }
            }
            "sphere_cap" => {
                want(1)?;
                DomainSpec::SphereCap { theta0: args[0] }
            }
            "hemisphere" => {
                want(0)?;
                DomainSpec::Hemisphere
            }
            "hyperbolic_disk" => {
                want(1)?;
                DomainSpec::HyperbolicDisk { r: args[0] }
            }
            other => return Err(Error::UnknownDomain(other.to_string())),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainSpec::Interval { .. } => "interval",
            DomainSpec::EuclideanDisk { .. } => "euclidean_disk",
            DomainSpec::EuclideanSquare { .. } => "euclidean_square",
            DomainSpec::EuclideanAnnulus { .. } => "euclidean_annulus",
            DomainSpec::SphereCap { .. } => "sphere_cap",
            DomainSpec::Hemisphere => "hemisphere",
            DomainSpec::HyperbolicDisk { .. } => "hyperbolic_disk",
        }
    }

    /// The size parameter varied by domain-size sweeps (outer radius for the annulus).
    pub fn size(&self) -> f64 {
        match *self {
            DomainSpec::Interval { a } => a,
            DomainSpec::EuclideanDisk { r } => r,
            DomainSpec::EuclideanSquare { l } => l,
            DomainSpec::EuclideanAnnulus { r_out, .. } => r_out,
            DomainSpec::SphereCap { theta0 } => theta0,
            DomainSpec::Hemisphere => PI / 2.0,
            DomainSpec::HyperbolicDisk { r } => r,
        }
    }

    /// Same domain family with its size parameter replaced.
    pub fn with_size(&self, size: f64) -> Result<Self> {
        let spec = match *self {
            DomainSpec::Interval { .. } => DomainSpec::Interval { a: size },
            DomainSpec::EuclideanDisk { .. } => DomainSpec::EuclideanDisk { r: size },
            DomainSpec::EuclideanSquare { .. } => DomainSpec::EuclideanSquare { l: size },
            DomainSpec::EuclideanAnnulus { r_in, .. } => DomainSpec::EuclideanAnnulus { r_in, r_out: size },
            DomainSpec::SphereCap { .. } | DomainSpec::Hemisphere => DomainSpec::SphereCap { theta0: size },
            DomainSpec::HyperbolicDisk { .. } => DomainSpec::HyperbolicDisk { r: size },
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDomain(msg));
        match *self {
            DomainSpec::Interval { a } if !(a > 0.0) => bad(format!("interval half-width {a} must be positive")),
            DomainSpec::EuclideanDisk { r } if !(r > 0.0) => bad(format!("disk radius {r} must be positive")),
            DomainSpec::EuclideanSquare { l } if !(l > 0.0) => bad(format!("square side {l} must be positive")),
            DomainSpec::EuclideanAnnulus { r_in, r_out } if !(r_in > 0.0 && r_out > r_in) => {
                bad(format!("annulus radii {r_in}, {r_out} must satisfy 0 < r < R"))
            }
            DomainSpec::SphereCap { theta0 } if !(theta0 > 0.0) => bad(format!("cap radius {theta0} must be positive")),
            DomainSpec::SphereCap { theta0 } if theta0 >= PI => {
                bad(format!("cap radius {theta0} ≥ π degenerates the colatitude chart"))
            }
            DomainSpec::HyperbolicDisk { r } if !(r > 0.0) => bad(format!("hyperbolic radius {r} must be positive")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DomainSpec::Interval { a } => write!(f, "interval({a})"),
            DomainSpec::EuclideanDisk { r } => write!(f, "euclidean_disk({r})"),
            DomainSpec::EuclideanSquare { l } => write!(f, "euclidean_square({l})"),
            DomainSpec::EuclideanAnnulus { r_in, r_out } => write!(f, "euclidean_annulus({r_in}, {r_out})"),
            DomainSpec::SphereCap { theta0 } => write!(f, "sphere_cap({theta0})"),
            DomainSpec::Hemisphere => write!(f, "hemisphere()"),
            DomainSpec::HyperbolicDisk { r } => write!(f, "hyperbolic_disk({r})"),
        }
    }
}

/// A boundary node with its outward unit normal (chart components) and the
/// boundary measure attributed to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNode {
    pub node: usize,
    pub normal: [f64; 2],
    pub area: f64,
}

/// A P1 simplex of the discrete domain.
///
/// `grad` maps the local nodal values to the gradient in an orthonormal
/// frame (`dim` rows of `dim + 1` entries), so `|Du|² = |grad · u_T|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Simplex {
    pub nodes: [usize; 3],
    pub volume: f64,
    pub grad: [[f64; 3]; 2],
}

impl Simplex {
    /// `K = gradᵀ grad`, the constant matrix with `|Du|² = uᵀ K u`.
    pub fn stiffness(&self, dim: usize) -> [[f64; 3]; 3] {
        let mut k = [[0.0; 3]; 3];
        for a in 0..=dim {
            for b in 0..=dim {
                k[a][b] = (0..dim).map(|r| self.grad[r][a] * self.grad[r][b]).sum();
            }
        }
        k
    }
}

/// Discrete domain: chart nodes, an optional pole node, boundary data and
/// the P1 simplices built from metric edge lengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainMesh {
    pub spec: DomainSpec,
    pub h: f64,
    pub chart: MetricChart,
    pub pole: Option<usize>,
    pub interior_mask: Vec<bool>,
    pub boundary: Vec<BoundaryNode>,
    pub simplices: Vec<Simplex>,
    pub node_volume: Vec<f64>,
    boundary_slot: Vec<Option<usize>>,
}

/// Builds the discrete domain for a catalog entry at parameter spacing `h`.
pub fn build_domain(spec: DomainSpec, h: f64) -> Result<DomainMesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::NonPositiveResolution(h));
    }
    spec.check()?;
    let cells = |extent: f64| ((extent / h) - 1e-9).ceil().max(1.0) as usize;
    match spec {
        DomainSpec::Interval { a } => {
            let n = cells(2.0 * a).max(2);
            let xs = (0..=n).map(|i| -a + 2.0 * a * i as f64 / n as f64).collect();
            Ok(build_interval(spec, h, xs))
        }
        DomainSpec::EuclideanSquare { l } => {
            let n = cells(l).max(2);
            let xs: Vec<f64> = (0..=n).map(|i| l * i as f64 / n as f64).collect();
            Ok(build_square(spec, h, xs))
        }
        DomainSpec::EuclideanDisk { r } => Ok(build_polar(spec, h, MetricModel::PolarFlat, None, r)),
        DomainSpec::EuclideanAnnulus { r_in, r_out } => {
            Ok(build_polar(spec, h, MetricModel::PolarFlat, Some(r_in), r_out))
        }
        DomainSpec::SphereCap { theta0 } => Ok(build_polar(spec, h, MetricModel::PolarSphere, None, theta0)),
        DomainSpec::Hemisphere => Ok(build_polar(spec, h, MetricModel::PolarSphere, None, PI / 2.0)),
        DomainSpec::HyperbolicDisk { r } => {
            Ok(build_polar(spec, h, MetricModel::PolarHyperbolic, None, (r / 2.0).tanh()))
        }
    }
}

fn build_interval(spec: DomainSpec, h: f64, xs: Vec<f64>) -> DomainMesh {
    let n = xs.len();
    let chart = MetricChart::new(MetricModel::Euclidean, vec![xs], vec![false]);
    let mut simplices = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let len = chart.segment_length(chart.coords(i), chart.coords(i + 1));
        simplices.push(Simplex {
            nodes: [i, i + 1, usize::MAX],
            volume: len,
            grad: [[-1.0 / len, 1.0 / len, 0.0], [0.0; 3]],
        });
    }
    let boundary = vec![
        BoundaryNode {
            node: 0,
            normal: [-1.0, 0.0],
            area: 1.0,
        },
        BoundaryNode {
            node: n - 1,
            normal: [1.0, 0.0],
            area: 1.0,
        },
    ];
    finish(spec, h, chart, None, boundary, simplices)
}

fn build_square(spec: DomainSpec, h: f64, xs: Vec<f64>) -> DomainMesh {
    let n = xs.len();
    let chart = MetricChart::new(MetricModel::Euclidean, vec![xs.clone(), xs], vec![false, false]);
    let mut simplices = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let a = chart.index(i, j);
            let b = chart.index(i + 1, j);
            let c = chart.index(i, j + 1);
            let d = chart.index(i + 1, j + 1);
            simplices.push(triangle(&chart, None, [a, b, d]));
            simplices.push(triangle(&chart, None, [a, c, d]));
        }
    }
    let dx = chart.spacing(0);
    let mut boundary = Vec::new();
    for node in 0..chart.n_nodes() {
        let [i, j] = chart.multi_index(node);
        let mut nrm = [0.0f64, 0.0];
        if i == 0 {
            nrm[0] -= 1.0;
        }
        if i == n - 1 {
            nrm[0] += 1.0;
        }
        if j == 0 {
            nrm[1] -= 1.0;
        }
        if j == n - 1 {
            nrm[1] += 1.0;
        }
        if nrm != [0.0, 0.0] {
            let len = (nrm[0] * nrm[0] + nrm[1] * nrm[1]).sqrt();
            boundary.push(BoundaryNode {
                node,
                normal: [nrm[0] / len, nrm[1] / len],
                area: dx,
            });
        }
    }
    finish(spec, h, chart, None, boundary, simplices)
}

fn build_polar(spec: DomainSpec, h: f64, model: MetricModel, inner: Option<f64>, outer: f64) -> DomainMesh {
    let rhos: Vec<f64> = match inner {
        Some(r_in) => {
            let n = (((outer - r_in) / h) - 1e-9).ceil().max(2.0) as usize;
            (0..=n).map(|i| r_in + (outer - r_in) * i as f64 / n as f64).collect()
        }
        None => {
            let n = ((outer / h) - 1e-9).ceil().max(3.0) as usize;
            (1..=n).map(|i| outer * i as f64 / n as f64).collect()
        }
    };
    let n_theta = (4 * ((2.0 * PI * outer / (4.0 * h)) - 1e-9).ceil() as usize).max(16);
    let thetas: Vec<f64> = (0..n_theta).map(|j| 2.0 * PI * j as f64 / n_theta as f64).collect();
    let nr = rhos.len();
    let chart = MetricChart::new(model, vec![rhos, thetas], vec![false, true]);
    let pole = if inner.is_none() { Some(chart.n_nodes()) } else { None };

    let mut simplices = Vec::new();
    if let Some(p) = pole {
        for j in 0..n_theta {
            let jn = (j + 1) % n_theta;
            simplices.push(triangle(&chart, pole, [p, chart.index(0, j), chart.index(0, jn)]));
        }
    }
    for i in 0..nr - 1 {
        for j in 0..n_theta {
            let jn = (j + 1) % n_theta;
            let a = chart.index(i, j);
            let b = chart.index(i + 1, j);
            let c = chart.index(i, jn);
            let d = chart.index(i + 1, jn);
            simplices.push(triangle(&chart, pole, [a, b, d]));
            simplices.push(triangle(&chart, pole, [a, c, d]));
        }
    }

    let mut boundary = Vec::new();
    let mut rings = vec![(nr - 1, 1.0)];
    if inner.is_some() {
        rings.insert(0, (0, -1.0));
    }
    for (ring, sign) in rings {
        let rho = chart.axis(0)[ring];
        let (grr, _) = model.polar_diag(rho);
        for j in 0..n_theta {
            let node = chart.index(ring, j);
            let prev = chart.index(ring, (j + n_theta - 1) % n_theta);
            let next = chart.index(ring, (j + 1) % n_theta);
            let p = chart.coords(node);
            let area = 0.5
                * (chart.segment_length(chart.coords(prev), p) + chart.segment_length(p, chart.coords(next)));
            boundary.push(BoundaryNode {
                node,
                normal: [sign / grr.sqrt(), 0.0],
                area,
            });
        }
    }
    finish(spec, h, chart, pole, boundary, simplices)
}

/// Parameter coordinates of a vertex; the pole takes the angle of `partner`
/// so that pole edges run along a meridian.
fn vertex_coords(chart: &MetricChart, pole: Option<usize>, node: usize, partner: usize) -> [f64; 2] {
    if Some(node) == pole {
        [0.0, chart.coords(partner)[1]]
    } else {
        chart.coords(node)
    }
}

fn triangle(chart: &MetricChart, pole: Option<usize>, nodes: [usize; 3]) -> Simplex {
    let len = |a: usize, b: usize| {
        let pa = vertex_coords(chart, pole, nodes[a], nodes[b]);
        let pb = vertex_coords(chart, pole, nodes[b], nodes[a]);
        chart.segment_length(pa, pb)
    };
    let l01 = len(0, 1);
    let l02 = len(0, 2);
    let l12 = len(1, 2);
    // Gram matrix of the edge vectors from vertex 0.
    let g11 = l01 * l01;
    let g22 = l02 * l02;
    let g12 = 0.5 * (g11 + g22 - l12 * l12);
    let det = g11 * g22 - g12 * g12;
    let (p, q, s) = (g22 / det, -g12 / det, g11 / det);
    // Upper-triangular R with RᵀR = G⁻¹; R applied to edge differences gives
    // the gradient in an orthonormal frame.
    let u11 = p.sqrt();
    let u12 = q / u11;
    let u22 = (s - u12 * u12).sqrt();
    let grad = [[-u11 - u12, u11, u12], [-u22, 0.0, u22]];
    Simplex {
        nodes,
        volume: 0.5 * det.sqrt(),
        grad,
    }
}

fn finish(
    spec: DomainSpec,
    h: f64,
    chart: MetricChart,
    pole: Option<usize>,
    boundary: Vec<BoundaryNode>,
    simplices: Vec<Simplex>,
) -> DomainMesh {
    let n = chart.n_nodes() + usize::from(pole.is_some());
    let dim = chart.dim;
    let mut node_volume = vec![0.0; n];
    for s in &simplices {
        for &v in &s.nodes[..=dim] {
            node_volume[v] += s.volume / (dim + 1) as f64;
        }
    }
    let mut interior_mask = vec![true; n];
    let mut boundary_slot = vec![None; n];
    for (k, b) in boundary.iter().enumerate() {
        interior_mask[b.node] = false;
        boundary_slot[b.node] = Some(k);
    }
    DomainMesh {
        spec,
        h,
        chart,
        pole,
        interior_mask,
        boundary,
        simplices,
        node_volume,
        boundary_slot,
    }
}

impl DomainMesh {
    pub fn n_nodes(&self) -> usize {
        self.interior_mask.len()
    }

    /// Dimension of Ω.
    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        !self.interior_mask[node]
    }

    /// Position of `node` in [`DomainMesh::boundary`], if it is a boundary node.
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot[node]
    }

    /// Total Riemannian volume of the discrete domain.
    pub fn volume(&self) -> f64 {
        self.simplices.iter().map(|s| s.volume).sum()
    }

    /// Total boundary measure.
    pub fn boundary_measure(&self) -> f64 {
        self.boundary.iter().map(|b| b.area).sum()
    }

    /// Parameter coordinates; the pole sits at `ρ = 0, θ = 0`.
    pub fn param_coords(&self, node: usize) -> [f64; 2] {
        if Some(node) == self.pole {
            [0.0, 0.0]
        } else {
            self.chart.coords(node)
        }
    }

    /// Embedding coordinates used for closed-form data: the line, the plane,
    /// the unit sphere in ℝ³, or the Poincaré disk.
    pub fn embedding(&self, node: usize) -> [f64; 3] {
        let p = self.param_coords(node);
        match self.chart.model {
            MetricModel::Euclidean => [p[0], p[1], 0.0],
            MetricModel::PolarFlat | MetricModel::PolarHyperbolic => [p[0] * p[1].cos(), p[0] * p[1].sin(), 0.0],
            MetricModel::PolarSphere => [p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin(), p[0].cos()],
        }
    }

    /// Geodesic distance of a node from the domain center for radially
    /// symmetric domains (chart radius for the flat and spherical charts,
    /// hyperbolic distance for the Poincaré chart); `|x|` for the interval.
    pub fn radial_distance(&self, node: usize) -> f64 {
        let p = self.param_coords(node);
        match self.chart.model {
            MetricModel::Euclidean => (p[0] * p[0] + p[1] * p[1]).sqrt(),
            MetricModel::PolarFlat | MetricModel::PolarSphere => p[0],
            MetricModel::PolarHyperbolic => 2.0 * p[0].atanh(),
        }
    }

    /// Metric at a node (pole: Cartesian frame), row-major `dim × dim`.
    pub fn metric_at(&self, node: usize) -> Vec<f64> {
        if Some(node) == self.pole {
            self.chart.model.pole_metric().to_vec()
        } else {
            self.chart.g(node).to_vec()
        }
    }

    /// Node adjacency through shared simplices (sorted, without self).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let dim = self.dim();
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for s in &self.simplices {
            for &a in &s.nodes[..=dim] {
                for &b in &s.nodes[..=dim] {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Mesh dump: `node_index, param coords..., g row-major..., interior_flag`.
    pub fn to_csv(&self) -> String {
        let dim = self.dim();
        let mut out = String::from("node_index");
        for a in 0..dim {
            out.push_str(&format!(",x{a}"));
        }
        for a in 0..dim {
            for b in 0..dim {
                out.push_str(&format!(",g{a}{b}"));
            }
        }
        out.push_str(",interior_flag\n");
        for node in 0..self.n_nodes() {
            out.push_str(&node.to_string());
            let p = self.param_coords(node);
            for x in &p[..dim] {
                out.push_str(&format!(",{x:.17e}"));
            }
            for g in self.metric_at(node) {
                out.push_str(&format!(",{g:.17e}"));
            }
            out.push_str(&format!(",{}\n", u8::from(self.interior_mask[node])));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_quarter_grid_is_five_by_five_flat() {
        let mesh = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 0.25).unwrap();
        assert_eq!(mesh.chart.shape, vec![5, 5]);
        for node in 0..mesh.n_nodes() {
            assert_eq!(mesh.chart.g(node), &[1.0, 0.0, 0.0, 1.0]);
        }
        assert_eq!(mesh.boundary.len(), 16);
        assert!((mesh.volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn parse_round_trips_through_display() {
        for text in [
            "interval(1)",
            "euclidean_disk(2)",
            "euclidean_square(1)",
            "euclidean_annulus(0.5, 1)",
            "sphere_cap(0.4)",
            "hemisphere()",
            "hyperbolic_disk(1)",
        ] {
            let spec = DomainSpec::parse(text).unwrap();
            assert_eq!(DomainSpec::parse(&spec.to_string()).unwrap(), spec);
        }
    }

    #[test]
    fn parse_rejects_unknown_and_degenerate() {
        assert!(matches!(DomainSpec::parse("torus(1)"), Err(Error::UnknownDomain(_))));
        assert!(matches!(DomainSpec::parse("sphere_cap(3.2)"), Err(Error::InvalidDomain(_))));
        assert!(DomainSpec::parse("euclidean_disk()").is_err());
        assert!(matches!(
            build_domain(DomainSpec::Hemisphere, 0.0),
            Err(Error::NonPositiveResolution(_))
        ));
    }

    #[test]
    fn triangle_gradient_map_reproduces_flat_gradients() {
        let mesh = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 0.1).unwrap();
        for s in &mesh.simplices {
            let u: Vec<f64> = s.nodes.iter().map(|&v| {
                let p = mesh.param_coords(v);
                2.0 * p[0] - 3.0 * p[1]
            }).collect();
            let gx: f64 = (0..3).map(|a| s.grad[0][a] * u[a]).sum();
            let gy: f64 = (0..3).map(|a| s.grad[1][a] * u[a]).sum();
            assert!((gx * gx + gy * gy - 13.0).abs() < 1e-10);
        }
    }
}
