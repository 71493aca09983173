//! Projected damped Newton for the capped relaxed energy on P1 fields.
//!
//! Boundary nodes follow an active set. An attached node sits at `u = ψ`,
//! where the exact wall `(1/α)|e^{αu} - e^{αψ}|` has the subdifferential
//! `dA e^{αψ}[-1, 1]`; it is released once the interior force leaves that
//! interval and then carries the smooth surrogate `dA √(s² + ε²)`. Nodes
//! pushed against `±T` are pinned there.

use std::collections::BTreeMap;

use faer::sparse::linalg::solvers::{Cholesky, SpSolver, SymbolicCholesky};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Col, Side};

use super::{classify, residual_norms, HistoryEntry, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::functionals::element::{energy_delta, local_values, Element};
use crate::functionals::{default_wall_eps, interior_energy, wall_gap, wall_smoothed, wall_smoothed_delta};
use crate::geometry::DomainMesh;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 50;
const MU_MAX: f64 = 1e10;
/// Tolerance for the continuation stages with `σ < 1`, which only need to
/// land in the basin of the next stage.
const CONTINUATION_TOL: f64 = 1e-6;
/// Consecutive accepted steps with `|ΔE| ≤ STALL_REL·|E|` that end a stage:
/// the iterate no longer moves at working precision.
const STALL_REL: f64 = 1e-15;
const STALL_STEPS: usize = 5;

/// Solves the relaxed Dirichlet problem over the cap schedule, with `σ`
/// continuation at the first cap.
pub fn solve_nodal(mesh: &DomainMesh, psi: &ScalarField, alpha: f64, config: &SolverConfig) -> Result<SolveReport> {
    Ok(solve_nodal_with_caps(mesh, psi, alpha, config)?.0)
}

/// Fixed CSC pattern `adjacency ∪ diagonal` with one symbolic factorization.
struct Pattern {
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    diag: Vec<usize>,
    /// Value slots of each simplex's local `(a, b)` pairs.
    local: Vec<[[usize; 3]; 3]>,
    symbolic: SymbolicCholesky<usize>,
}

impl Pattern {
    fn new(mesh: &DomainMesh) -> Result<Self> {
        let n = mesh.n_nodes();
        let dim = mesh.dim();
        let adj = mesh.neighbors();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut rows = Vec::new();
        col_ptr.push(0);
        for (j, nb) in adj.iter().enumerate() {
            let mut col: Vec<usize> = nb.iter().copied().chain(std::iter::once(j)).collect();
            col.sort_unstable();
            col.dedup();
            rows.extend(col);
            col_ptr.push(rows.len());
        }
        let slot = |i: usize, j: usize| col_ptr[j] + rows[col_ptr[j]..col_ptr[j + 1]].binary_search(&i).unwrap();
        let diag = (0..n).map(|j| slot(j, j)).collect();
        let local = mesh
            .simplices
            .iter()
            .map(|s| {
                let mut m = [[0; 3]; 3];
                for a in 0..=dim {
                    for b in 0..=dim {
                        m[a][b] = slot(s.nodes[a], s.nodes[b]);
                    }
                }
                m
            })
            .collect();
        let sym = SymbolicSparseColMat::new_checked(n, n, col_ptr.clone(), None, rows.clone());
        let symbolic = SymbolicCholesky::try_new(sym.as_ref(), Side::Lower)
            .map_err(|e| Error::InvalidConfig(format!("sparse pattern rejected: {e:?}")))?;
        Ok(Self {
            col_ptr,
            rows,
            diag,
            local,
            symbolic,
        })
    }
}

/// One stage: a fixed `σ`, cap and smoothing.
struct Stage<'a> {
    mesh: &'a DomainMesh,
    psi: &'a [f64],
    alpha: f64,
    eps: f64,
    cap: f64,
}

struct State {
    u: Vec<f64>,
    released: Vec<bool>,
    pinned: Vec<bool>,
}

impl State {
    fn free(&self, mesh: &DomainMesh, v: usize) -> bool {
        !self.pinned[v] && (mesh.interior_mask[v] || self.released[v])
    }
}

impl Stage<'_> {
    /// Stage objective: interior energy plus the surrogate wall at every
    /// boundary node (an attached node contributes the constant `dA ε`).
    fn objective(&self, u: &[f64]) -> f64 {
        interior_energy(self.mesh, u, self.alpha)
            + self
                .mesh
                .boundary
                .iter()
                .map(|b| b.area * wall_smoothed(u[b.node], self.psi[b.node], self.alpha, self.eps).0)
                .sum::<f64>()
    }

    /// Gradient of the objective and the per-node mass `∫ e^{αu} φ_i` used to
    /// make the stopping test scale free.
    fn gradient(&self, state: &State) -> (Vec<f64>, Vec<f64>) {
        let mesh = self.mesh;
        let dim = mesh.dim();
        let n = mesh.n_nodes();
        let mut g = vec![0.0; n];
        let mut w = vec![0.0; n];
        for s in &mesh.simplices {
            let el = Element::new(s, dim, &local_values(s, dim, &state.u), self.alpha);
            let ge = el.gradient(self.alpha);
            for (k, &v) in s.nodes[..=dim].iter().enumerate() {
                g[v] += ge[k];
                w[v] += el.ik[k];
            }
        }
        for b in &mesh.boundary {
            let v = b.node;
            if state.released[v] {
                g[v] += b.area * wall_smoothed(state.u[v], self.psi[v], self.alpha, self.eps).1;
                w[v] += b.area * (self.alpha * state.u[v]).exp();
            }
        }
        (g, w)
    }

    /// `E(new) - E(old)` without cancellation.
    fn delta(&self, old: &[f64], new: &[f64]) -> f64 {
        let mesh = self.mesh;
        let dim = mesh.dim();
        let mut d = 0.0;
        for s in &mesh.simplices {
            let lo = local_values(s, dim, old);
            let ln = local_values(s, dim, new);
            if lo != ln {
                d += energy_delta(s, dim, &lo, &ln, self.alpha);
            }
        }
        for b in &mesh.boundary {
            let v = b.node;
            if old[v] != new[v] {
                d += b.area * wall_smoothed_delta(old[v], new[v], self.psi[v], self.alpha, self.eps);
            }
        }
        d
    }

    /// Scaled Newton system `(DHD + μI) y = -Dg` over the free nodes, with
    /// identity rows elsewhere; returns `D y` or `None` if `μ` runs away.
    fn newton_direction(&self, pat: &Pattern, state: &State, g: &[f64], mu: &mut f64) -> Option<Vec<f64>> {
        let mesh = self.mesh;
        let dim = mesh.dim();
        let n = mesh.n_nodes();
        let free: Vec<bool> = (0..n).map(|v| state.free(mesh, v)).collect();
        let mut vals = vec![0.0; pat.rows.len()];
        for (s, slots) in mesh.simplices.iter().zip(&pat.local) {
            let el = Element::new(s, dim, &local_values(s, dim, &state.u), self.alpha);
            let he = el.hessian(self.alpha);
            for a in 0..=dim {
                for b in 0..=dim {
                    if free[s.nodes[a]] && free[s.nodes[b]] {
                        vals[slots[a][b]] += he[a][b];
                    }
                }
            }
        }
        for b in &mesh.boundary {
            let v = b.node;
            if free[v] {
                vals[pat.diag[v]] += b.area * wall_smoothed(state.u[v], self.psi[v], self.alpha, self.eps).2;
            }
        }
        let d: Vec<f64> = (0..n)
            .map(|v| {
                let h = vals[pat.diag[v]].abs();
                if free[v] && h > 0.0 && h.is_finite() {
                    1.0 / h.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        for j in 0..n {
            for p in pat.col_ptr[j]..pat.col_ptr[j + 1] {
                vals[p] *= d[pat.rows[p]] * d[j];
            }
            if !free[j] {
                vals[pat.diag[j]] = 1.0;
            }
        }
        let rhs: Col<f64> = Col::from_fn(n, |v| if free[v] { -d[v] * g[v] } else { 0.0 });
        loop {
            let mut shifted = vals.clone();
            for j in 0..n {
                if free[j] {
                    shifted[pat.diag[j]] += *mu;
                }
            }
            let sym = SymbolicSparseColMat::new_checked(n, n, pat.col_ptr.clone(), None, pat.rows.clone());
            let mat = SparseColMat::<usize, f64>::new(sym, shifted);
            match Cholesky::try_new_with_symbolic(pat.symbolic.clone(), mat.as_ref(), Side::Lower) {
                Ok(llt) => {
                    let y = llt.solve(&rhs);
                    let dir: Vec<f64> = (0..n).map(|v| if free[v] { d[v] * y[v] } else { 0.0 }).collect();
                    if dir.iter().all(|x| x.is_finite()) {
                        *mu = if *mu > 1e-12 { *mu / 10.0 } else { 0.0 };
                        return Some(dir);
                    }
                }
                Err(_) => {}
            }
            *mu = (*mu * 10.0).max(1e-10);
            if *mu > MU_MAX {
                *mu = 0.0;
                return None;
            }
        }
    }

    /// Projected Armijo backtracking along `dir`.
    fn line_search(&self, state: &State, g: &[f64], dir: &[f64]) -> Option<(Vec<f64>, f64)> {
        let mesh = self.mesh;
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let mut new = state.u.clone();
            let mut slope = 0.0;
            for v in 0..mesh.n_nodes() {
                if state.free(mesh, v) && dir[v] != 0.0 {
                    new[v] = (state.u[v] + t * dir[v]).clamp(-self.cap, self.cap);
                    slope += g[v] * (new[v] - state.u[v]);
                }
            }
            if !(slope < 0.0) {
                return None;
            }
            let de = self.delta(&state.u, &new);
            if de.is_finite() && de <= ARMIJO * slope {
                return Some((new, de));
            }
            t *= 0.5;
        }
        None
    }
}

struct Outcome {
    converged: bool,
    iterations: usize,
    fallbacks: usize,
}

fn run_stage(
    stage: &Stage,
    pat: &Pattern,
    state: &mut State,
    sigma: f64,
    tol: f64,
    max_iters: usize,
    history: &mut Vec<HistoryEntry>,
    energy_history: &mut Vec<f64>,
) -> Result<Outcome> {
    let mesh = stage.mesh;
    let n = mesh.n_nodes();
    let mut energy = stage.objective(&state.u);
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy(format!("stage start at sigma {sigma}, cap {}", stage.cap)));
    }
    let mut mu = 0.0;
    let mut stalled = 0;
    let mut out = Outcome {
        converged: false,
        iterations: 0,
        fallbacks: 0,
    };
    for it in 0..=max_iters {
        let (mut g, mut w) = stage.gradient(state);
        let mut changed = false;

        // Re-attach released nodes that sit inside the smoothing band when
        // doing so does not raise the objective.
        let mut attached_any = false;
        for b in &mesh.boundary {
            let v = b.node;
            if state.released[v] && !state.pinned[v] && wall_gap(state.u[v], stage.psi[v], stage.alpha).abs() <= stage.eps {
                let mut trial = state.u.clone();
                trial[v] = stage.psi[v];
                let de = stage.delta(&state.u, &trial);
                if de <= 0.0 {
                    state.u[v] = stage.psi[v];
                    state.released[v] = false;
                    energy += de;
                    attached_any = true;
                }
            }
        }
        if attached_any {
            (g, w) = stage.gradient(state);
        }
        for b in &mesh.boundary {
            let v = b.node;
            if !state.released[v] {
                let bound = b.area * (stage.alpha * stage.psi[v]).exp();
                if g[v].abs() > bound * (1.0 + 1e-9) {
                    state.released[v] = true;
                    w[v] += bound;
                    changed = true;
                }
            }
        }
        for v in 0..n {
            let movable = mesh.interior_mask[v] || state.released[v];
            if !movable {
                continue;
            }
            let at_floor = state.u[v] <= -stage.cap;
            let at_ceiling = state.u[v] >= stage.cap;
            let outward = (at_floor && g[v] > 0.0) || (at_ceiling && g[v] < 0.0);
            if state.pinned[v] != outward {
                state.pinned[v] = outward;
                changed = true;
            }
        }
        let rel = (0..n)
            .filter(|&v| state.free(mesh, v))
            .map(|v| g[v].abs() / w[v].max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        history.push(HistoryEntry {
            iteration: it,
            sigma,
            cap: stage.cap,
            energy,
            grad_norm: rel,
        });
        if sigma == 1.0 {
            energy_history.push(energy);
        }
        out.iterations = it;
        if rel <= tol && !changed {
            out.converged = true;
            break;
        }
        if it == max_iters {
            break;
        }
        let step = stage
            .newton_direction(pat, state, &g, &mut mu)
            .and_then(|dir| stage.line_search(state, &g, &dir));
        let step = match step {
            Some(s) => Some(s),
            None => {
                // Mass-scaled steepest descent.
                out.fallbacks += 1;
                let dir: Vec<f64> = (0..n)
                    .map(|v| {
                        if state.free(mesh, v) {
                            -g[v] / w[v].max(f64::MIN_POSITIVE)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                stage.line_search(state, &g, &dir)
            }
        };
        match step {
            Some((new, de)) => {
                state.u = new;
                energy += de;
                if de.abs() <= STALL_REL * energy.abs() {
                    stalled += 1;
                    if stalled >= STALL_STEPS {
                        out.converged = rel <= tol;
                        break;
                    }
                } else {
                    stalled = 0;
                }
            }
            None => {
                // No descent left at working precision.
                out.converged = rel <= tol;
                break;
            }
        }
        if !energy.is_finite() {
            return Err(Error::NonFiniteEnergy(format!("iteration {it} at sigma {sigma}, cap {}", stage.cap)));
        }
    }
    Ok(out)
}

pub(super) fn solve_nodal_with_caps(
    mesh: &DomainMesh,
    psi: &ScalarField,
    alpha: f64,
    config: &SolverConfig,
) -> Result<(SolveReport, Vec<(f64, [usize; 3])>)> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    config.validate()?;
    psi.check_len(mesh.n_nodes())?;
    let first_cap = config.cap_schedule[0];
    for b in &mesh.boundary {
        let p = psi.values[b.node];
        if !p.is_finite() || p.abs() >= first_cap {
            return Err(Error::InvalidConfig(format!(
                "boundary value {p} at node {} is not inside the first cap {first_cap}",
                b.node
            )));
        }
    }
    let n = mesh.n_nodes();
    let pat = Pattern::new(mesh)?;
    let mean = mesh.boundary.iter().map(|b| psi.values[b.node]).sum::<f64>() / mesh.boundary.len().max(1) as f64;
    let mut state = State {
        u: (0..n).map(|v| if mesh.interior_mask[v] { mean } else { psi.values[v] }).collect(),
        released: vec![false; n],
        pinned: vec![false; n],
    };

    let mut stages: Vec<(f64, f64)> = config.sigma_steps.iter().map(|&s| (s, first_cap)).collect();
    stages.extend(config.cap_schedule[1..].iter().map(|&t| (1.0, t)));

    let margin = 2.0 * config.h_r;
    let mut history = Vec::new();
    let mut energy_history = Vec::new();
    let mut per_cap = Vec::new();
    let mut cap_classes = Vec::new();
    let mut iterations = 0;
    let mut fallbacks = 0;
    let mut converged = true;
    for &(sigma, cap) in &stages {
        let a = sigma * alpha;
        let stage = Stage {
            mesh,
            psi: &psi.values,
            alpha: a,
            eps: config.wall_eps.unwrap_or_else(|| default_wall_eps(mesh, psi, a)),
            cap,
        };
        let tol = if sigma < 1.0 { config.grad_tol.max(CONTINUATION_TOL) } else { config.grad_tol };
        let out = run_stage(&stage, &pat, &mut state, sigma, tol, config.max_iters, &mut history, &mut energy_history)?;
        iterations += out.iterations;
        fallbacks += out.fallbacks;
        if sigma == 1.0 {
            converged &= out.converged;
            let classes = classify(&state.u, cap, margin);
            per_cap.push((cap, crate::fields::class_counts(&classes)));
            cap_classes.push(classes);
        }
    }

    let cap = *config.cap_schedule.last().unwrap();
    let classification = cap_classes.last().cloned().unwrap_or_default();
    let stable = cap_classes.len() >= 2 && cap_classes[cap_classes.len() - 2] == classification;
    let u = ScalarField {
        values: state.u.clone(),
        cap: Some(cap),
    };
    let (residual_linf, residual_l2) = match residual_norms(mesh, &u, alpha, &classification) {
        Ok(r) => r,
        Err(Error::NoFiniteNodes) => (f64::NAN, f64::NAN),
        Err(e) => return Err(e),
    };
    let report = crate::functionals::relaxed_energy(mesh, &u, psi, alpha)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("J".into(), report.j);
    diagnostics.insert("F_alpha".into(), report.f_alpha);
    diagnostics.insert("wall".into(), report.wall);
    diagnostics.insert("stages".into(), stages.len() as f64);
    diagnostics.insert("gradient_fallbacks".into(), fallbacks as f64);
    diagnostics.insert("released_boundary_nodes".into(), state.released.iter().filter(|&&r| r).count() as f64);
    diagnostics.insert("pinned_nodes".into(), state.pinned.iter().filter(|&&p| p).count() as f64);
    diagnostics.insert(
        "final_grad_norm".into(),
        history.last().map(|h: &HistoryEntry| h.grad_norm).unwrap_or(0.0),
    );
    Ok((
        SolveReport {
            u,
            classification,
            residual_linf,
            residual_l2,
            energy_history,
            history,
            iterations,
            converged,
            stable,
            diagnostics,
        },
        per_cap,
    ))
}
