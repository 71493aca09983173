//! Nodal and indicator solvers for the capped generalized Dirichlet problem,
//! the cap-schedule blow-up scan, and residual norms.

mod indicator;
mod miranda;
mod nodal;

pub use indicator::{solve_indicator, solve_indicator_from};
pub use miranda::{miranda_probe, MirandaReport};
pub use nodal::solve_nodal;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::fields::{class_counts, NodeClass, ScalarField};
use crate::geometry::{graph_mean_curvature, DomainMesh};

/// Solver parameters shared by both formulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Strictly increasing caps `T` for the nodal solver.
    pub cap_schedule: Vec<f64>,
    /// Continuation values of `σ`, increasing and ending at 1.
    pub sigma_steps: Vec<f64>,
    /// Newton iterations per stage.
    pub max_iters: usize,
    /// Stop when `max |∂J/∂u_i| / ∫ e^{αu} φ_i` over free nodes falls below this.
    pub grad_tol: f64,
    /// Primal-dual gap at which the indicator solver stops.
    pub energy_tol: f64,
    /// Wall smoothing; `None` uses `10⁻³` times the mean boundary weight.
    pub wall_eps: Option<f64>,
    /// Primal and dual step factors on top of the diagonal preconditioners;
    /// their product must not exceed 1.
    pub tau: f64,
    pub sigma_dual: f64,
    /// `r`-resolution of indicators and the blow-up margin `2h_r`.
    pub h_r: f64,
    /// Half-height `T` of the indicator grid.
    pub indicator_cap: f64,
    pub indicator_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cap_schedule: vec![5.0, 10.0, 20.0, 40.0],
            sigma_steps: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            max_iters: 200,
            grad_tol: 1e-8,
            energy_tol: 1e-4,
            wall_eps: None,
            tau: 1.0,
            sigma_dual: 1.0,
            h_r: 1.0 / 64.0,
            indicator_cap: 3.0,
            indicator_max_iters: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.cap_schedule.is_empty() {
            return bad("cap_schedule is empty".into());
        }
        if self.cap_schedule.iter().any(|&t| !(t > 0.0)) {
            return bad("cap_schedule entries must be positive".into());
        }
        if self.cap_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("cap_schedule must be strictly increasing".into());
        }
        if self.sigma_steps.is_empty()
            || self.sigma_steps.iter().any(|s| !(0.0..=1.0).contains(s))
            || self.sigma_steps.windows(2).any(|w| !(w[1] > w[0]))
            || *self.sigma_steps.last().unwrap() != 1.0
        {
            return bad("sigma_steps must increase within [0, 1] and end at 1".into());
        }
        for (name, v) in [
            ("grad_tol", self.grad_tol),
            ("energy_tol", self.energy_tol),
            ("tau", self.tau),
            ("sigma_dual", self.sigma_dual),
            ("h_r", self.h_r),
            ("indicator_cap", self.indicator_cap),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(e) = self.wall_eps {
            if !(e > 0.0) {
                return bad(format!("wall_eps must be positive, got {e}"));
            }
        }
        if self.max_iters == 0 || self.indicator_max_iters == 0 {
            return bad("iteration limits must be positive".into());
        }
        Ok(())
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub sigma: f64,
    pub cap: f64,
    pub energy: f64,
    pub grad_norm: f64,
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub u: ScalarField,
    pub classification: Vec<NodeClass>,
    /// `NaN` when no finite interior node qualifies.
    pub residual_linf: f64,
    pub residual_l2: f64,
    /// Energy of each accepted iterate (of the stage's functional).
    pub energy_history: Vec<f64>,
    pub history: Vec<HistoryEntry>,
    pub iterations: usize,
    pub converged: bool,
    /// Classification agreed across the last two caps.
    pub stable: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

impl SolveReport {
    pub fn class_counts(&self) -> [usize; 3] {
        class_counts(&self.classification)
    }

    /// `INCONCLUSIVE` verdicts are never resolved by guessing.
    pub fn inconclusive(&self) -> bool {
        !self.stable
    }
}

/// Classification of a capped solution: within `margin` of `∓T` means `∓∞`.
pub fn classify(u: &[f64], cap: f64, margin: f64) -> Vec<NodeClass> {
    u.iter()
        .map(|&v| {
            if v <= -cap + margin {
                NodeClass::MinusInf
            } else if v >= cap - margin {
                NodeClass::PlusInf
            } else {
                NodeClass::Finite
            }
        })
        .collect()
}

/// Sup and volume-weighted RMS of `H - α/ω` over finite interior nodes at
/// graph distance at least 2 from every `±∞` node.
pub fn residual_norms(mesh: &DomainMesh, u: &ScalarField, alpha: f64, classes: &[NodeClass]) -> Result<(f64, f64)> {
    u.check_len(mesh.n_nodes())?;
    if classes.len() != mesh.n_nodes() {
        return Err(Error::ShapeMismatch {
            expected: mesh.n_nodes(),
            got: classes.len(),
        });
    }
    let n = mesh.n_nodes();
    let adj = mesh.neighbors();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for v in 0..n {
        if classes[v] != NodeClass::Finite {
            dist[v] = 0;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        if dist[v] >= 2 {
            continue;
        }
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let finite: Vec<f64> = u
        .values
        .iter()
        .zip(classes)
        .map(|(&x, &c)| if c == NodeClass::Finite { x } else { 0.0 })
        .collect();
    let (_, res) = graph_mean_curvature(mesh, &ScalarField::new(finite), alpha)?;
    let mut linf: f64 = 0.0;
    let mut sum = 0.0;
    let mut vol = 0.0;
    let mut any = false;
    for v in 0..n {
        if mesh.interior_mask[v] && dist[v] >= 2 {
            any = true;
            let r = res.values[v];
            linf = linf.max(r.abs());
            sum += r * r * mesh.node_volume[v];
            vol += mesh.node_volume[v];
        }
    }
    if !any {
        return Err(Error::NoFiniteNodes);
    }
    Ok((linf, (sum / vol).sqrt()))
}

/// Verdict of a cap-schedule scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupScan {
    pub classification: Vec<NodeClass>,
    pub stable: bool,
    /// `(cap, [finite, plus, minus])` after each cap.
    pub per_cap: Vec<(f64, [usize; 3])>,
    pub report: SolveReport,
}

impl BlowupScan {
    pub fn verdict(&self) -> &'static str {
        if self.stable {
            "CLASSIFIED"
        } else {
            "INCONCLUSIVE"
        }
    }
}

/// Runs the nodal solver over the cap schedule and reports whether the
/// classification settled across the last two caps.
pub fn blowup_scan(mesh: &DomainMesh, psi: &ScalarField, alpha: f64, config: &SolverConfig) -> Result<BlowupScan> {
    if config.cap_schedule.len() < 2 {
        return Err(Error::InvalidConfig("blow-up scan needs at least two caps".into()));
    }
    let (report, per_cap) = nodal::solve_nodal_with_caps(mesh, psi, alpha, config)?;
    Ok(BlowupScan {
        classification: report.classification.clone(),
        stable: report.stable,
        per_cap,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};

    #[test]
    fn default_config_is_valid_and_bad_ones_are_named() {
        SolverConfig::default().validate().unwrap();
        let mut c = SolverConfig::default();
        c.cap_schedule = vec![10.0, 5.0];
        assert!(c.validate().unwrap_err().to_string().contains("cap_schedule"));
        let mut c = SolverConfig::default();
        c.sigma_steps = vec![0.0, 0.5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn flat_field_residual_is_alpha() {
        let mesh = build_domain(DomainSpec::EuclideanSquare { l: 1.0 }, 0.1).unwrap();
        let u = ScalarField::constant(mesh.n_nodes(), 0.0);
        let classes = vec![NodeClass::Finite; mesh.n_nodes()];
        let (linf, l2) = residual_norms(&mesh, &u, 1.7, &classes).unwrap();
        assert!((linf - 1.7).abs() < 1e-12 && (l2 - 1.7).abs() < 1e-12);
        let all_inf = vec![NodeClass::MinusInf; mesh.n_nodes()];
        assert!(matches!(residual_norms(&mesh, &u, 1.7, &all_inf), Err(Error::NoFiniteNodes)));
    }
}
