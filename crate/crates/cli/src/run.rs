//! `solve` and `sweep`: orchestration of one or more runs and their files.

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tmce_core::{
    blowup_scan, check_c0_estimate, check_gradient_estimate, check_mean_convexity, build_domain, class_counts, reconstruct_profile, relaxed_energy, solve_indicator,
    solve_indicator_from, solve_nodal, DomainMesh, MetricModel, NodeClass, ScalarField, SolveReport,
};

use crate::config::{DiagnosticKind, PsiSource, RunConfig, SolverKind};
use crate::expr::{Expr, Point};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

/// Grid of `K` values searched by the gradient-estimate diagnostic.
const K_GRID: [f64; 21] = [
    0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0,
];

/// Headline numbers of one run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub verdict: &'static str,
    pub residual_linf: f64,
    pub residual_l2: f64,
    pub energy: f64,
    pub counts: [usize; 3],
    pub error_linf: Option<f64>,
    pub error_sampled_linf: Option<f64>,
    pub max_abs_u: f64,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.verdict == "INCONCLUSIVE" {
            EXIT_INCONCLUSIVE
        } else {
            EXIT_OK
        }
    }
}

/// The three files of a run directory.
pub struct RunFiles {
    pub solution_csv: String,
    pub report_json: String,
    pub history_csv: String,
}

fn point(mesh: &DomainMesh, node: usize) -> Point {
    let e = mesh.embedding(node);
    Point {
        x: e[0],
        y: e[1],
        z: e[2],
        dist: mesh.radial_distance(node),
    }
}

fn boundary_data(cfg: &RunConfig, mesh: &DomainMesh) -> Result<ScalarField> {
    let values: Vec<f64> = match &cfg.psi {
        PsiSource::Expr(e) => (0..mesh.n_nodes()).map(|v| e.eval(&point(mesh, v))).collect(),
        PsiSource::Csv(p) => {
            let path = if p.is_absolute() { p.clone() } else { cfg.base_dir.join(p) };
            read_node_csv(&path, mesh.n_nodes())?
        }
    };
    if let Some(v) = values.iter().position(|x| !x.is_finite()) {
        bail!("`psi` is not finite at node {v}");
    }
    Ok(ScalarField::new(values))
}

/// Reads `node,value` rows (an optional header line is skipped).
fn read_node_csv(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("`psi_csv`: reading {}", path.display()))?;
    let mut values = vec![f64::NAN; n];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.chars().next().is_some_and(|c| c.is_ascii_alphabetic())) {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("`psi_csv`: line {} is not `node,value`", i + 1))?;
        let node: usize = a.trim().parse().map_err(|_| anyhow!("`psi_csv`: bad node on line {}", i + 1))?;
        let value: f64 = b.trim().parse().map_err(|_| anyhow!("`psi_csv`: bad value on line {}", i + 1))?;
        *values
            .get_mut(node)
            .ok_or_else(|| anyhow!("`psi_csv`: node {node} out of range (mesh has {n})"))? = value;
    }
    if let Some(v) = values.iter().position(|x| x.is_nan()) {
        bail!("`psi_csv`: no value for node {v}");
    }
    Ok(values)
}

/// `max |u - exact|` over finite nodes, and over points sampled inside each
/// simplex of a flat chart (the piecewise-linear `u` against the exact
/// function). Polar charts report the nodal value for both.
pub fn error_norms(mesh: &DomainMesh, u: &[f64], classes: &[NodeClass], exact: &Expr) -> (f64, f64) {
    let mut nodal: f64 = 0.0;
    for v in 0..mesh.n_nodes() {
        if classes[v] == NodeClass::Finite {
            nodal = nodal.max((u[v] - exact.eval(&point(mesh, v))).abs());
        }
    }
    if mesh.chart.model != MetricModel::Euclidean {
        return (nodal, nodal);
    }
    const S: usize = 8;
    let dim = mesh.dim();
    let mut sampled = nodal;
    for s in &mesh.simplices {
        let nodes = &s.nodes[..=dim];
        if nodes.iter().any(|&v| classes[v] != NodeClass::Finite) {
            continue;
        }
        let mut weights = Vec::new();
        if dim == 1 {
            for i in 0..=S {
                let t = i as f64 / S as f64;
                weights.push([1.0 - t, t, 0.0]);
            }
        } else {
            for i in 0..=S {
                for j in 0..=S - i {
                    let (a, b) = (i as f64 / S as f64, j as f64 / S as f64);
                    weights.push([1.0 - a - b, a, b]);
                }
            }
        }
        for w in weights {
            let mut p = [0.0; 2];
            let mut uh = 0.0;
            for (k, &v) in nodes.iter().enumerate() {
                let c = mesh.param_coords(v);
                p[0] += w[k] * c[0];
                p[1] += w[k] * c[1];
                uh += w[k] * u[v];
            }
            let at = Point {
                x: p[0],
                y: if dim == 2 { p[1] } else { 0.0 },
                z: 0.0,
                dist: (p[0] * p[0] + if dim == 2 { p[1] * p[1] } else { 0.0 }).sqrt(),
            };
            sampled = sampled.max((uh - exact.eval(&at)).abs());
        }
    }
    (nodal, sampled)
}

fn entry_json(e: &tmce_core::DiagnosticEntry) -> Value {
    serde_json::to_value(e).expect("diagnostic entry serializes")
}

fn counts_json(c: [usize; 3]) -> Value {
    json!({ "finite": c[0], "plus_inf": c[1], "minus_inf": c[2] })
}

/// Runs the configured solvers and diagnostics without touching the disk.
pub fn execute(cfg: &RunConfig) -> Result<(RunSummary, RunFiles)> {
    let mesh = build_domain(cfg.domain, cfg.h)?;
    let psi = boundary_data(cfg, &mesh)?;
    let alpha = cfg.alpha;
    let multi_cap = cfg.solver.cap_schedule.len() >= 2;

    let mut nodal: Option<(SolveReport, Vec<(f64, [usize; 3])>)> = None;
    if cfg.has(SolverKind::Nodal) {
        nodal = Some(if multi_cap {
            let scan = blowup_scan(&mesh, &psi, alpha, &cfg.solver)?;
            (scan.report, scan.per_cap)
        } else {
            (solve_nodal(&mesh, &psi, alpha, &cfg.solver)?, Vec::new())
        });
    }
    let mut indicator = None;
    if cfg.has(SolverKind::Indicator) {
        let (ind, report) = match &nodal {
            Some((r, _)) => solve_indicator_from(&mesh, &psi, alpha, &cfg.solver, &r.u)?,
            None => solve_indicator(&mesh, &psi, alpha, &cfg.solver)?,
        };
        let (profile, flags) = reconstruct_profile(&ind);
        indicator = Some((report, profile, flags));
    }

    // The nodal solution is primary when both ran.
    let (main, verdict): (&SolveReport, &'static str) = match (&nodal, &indicator) {
        (Some((r, _)), _) => (
            r,
            match (multi_cap, r.stable, r.converged) {
                (true, true, _) => "CLASSIFIED",
                (false, _, true) => "CONVERGED",
                _ => "INCONCLUSIVE",
            },
        ),
        (None, Some((r, _, _))) => (r, if r.converged { "CONVERGED" } else { "INCONCLUSIVE" }),
        (None, None) => unreachable!("at least one solver is configured"),
    };
    let verdict = match &indicator {
        Some((r, _, _)) if nodal.is_some() && !r.converged => "INCONCLUSIVE",
        _ => verdict,
    };
    let (u, classes): (Vec<f64>, Vec<NodeClass>) = match (&nodal, &indicator) {
        (Some((r, _)), _) => (r.u.values.clone(), r.classification.clone()),
        (None, Some((_, p, f))) => (p.values.clone(), f.clone()),
        _ => unreachable!(),
    };
    let counts = class_counts(&classes);
    let energy = relaxed_energy(&mesh, &ScalarField::new(u.clone()), &psi, alpha)?;
    let errors = cfg.exact.as_ref().map(|e| error_norms(&mesh, &u, &classes, e));

    let all_finite = counts[0] == mesh.n_nodes();
    let mut checks = Vec::new();
    for kind in &cfg.diagnostics {
        let ufield = ScalarField::new(u.clone());
        let entry = match kind {
            DiagnosticKind::GradientEstimate if all_finite => {
                entry_json(&check_gradient_estimate(&mesh, &ufield, alpha, &K_GRID)?)
            }
            DiagnosticKind::C0Estimate if all_finite => match check_c0_estimate(&mesh, &ufield, &psi, alpha) {
                Ok(e) => entry_json(&e),
                Err(e) => json!({ "name": kind.name(), "skipped": e.to_string() }),
            },
            DiagnosticKind::MeanConvexity => entry_json(&check_mean_convexity(&mesh)?),
            _ => json!({ "name": kind.name(), "skipped": "solution has infinite nodes" }),
        };
        checks.push(entry);
    }

    let mut report = json!({
        "tool": "tmce",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.echo(),
        "mesh": { "nodes": mesh.n_nodes(), "h": mesh.h, "volume": mesh.volume(), "boundary_measure": mesh.boundary_measure() },
        "verdict": verdict,
        "converged": main.converged,
        "stable": main.stable,
        "iterations": main.iterations,
        "energies": {
            "F": energy.f, "F_alpha": energy.f_alpha, "wall": energy.wall, "J": energy.j, "bv": energy.bv,
        },
        "residual_linf": main.residual_linf,
        "residual_l2": main.residual_l2,
        "classification_counts": counts_json(counts),
        "diagnostics": { "solver": main.diagnostics, "checks": checks },
    });
    if let Some((_, per_cap)) = &nodal {
        report["per_cap"] = per_cap
            .iter()
            .map(|(cap, c)| json!({ "cap": cap, "counts": counts_json(*c) }))
            .collect();
    }
    if let Some((nodal_linf, sampled)) = errors {
        report["error"] = json!({ "nodal_linf": nodal_linf, "sampled_linf": sampled });
    }
    if let Some((r, profile, flags)) = &indicator {
        let mut section = json!({
            "converged": r.converged,
            "iterations": r.iterations,
            "classification_counts": counts_json(class_counts(flags)),
            "diagnostics": r.diagnostics,
        });
        if let Some((n, _)) = &nodal {
            let diff = (0..mesh.n_nodes())
                .filter(|&v| flags[v] == NodeClass::Finite && n.classification[v] == NodeClass::Finite)
                .map(|v| (profile.values[v] - n.u.values[v]).abs())
                .fold(0.0, f64::max);
            section["max_diff_vs_nodal"] = json!(diff);
        }
        report["indicator"] = section;
    }

    let dim = mesh.dim();
    let mut solution = String::from("node");
    for a in 0..dim {
        let _ = write!(solution, ",x{a}");
    }
    solution.push_str(",u,class");
    if nodal.is_some() && indicator.is_some() {
        solution.push_str(",u_indicator,class_indicator");
    }
    solution.push('\n');
    for v in 0..mesh.n_nodes() {
        let p = mesh.param_coords(v);
        let _ = write!(solution, "{v}");
        for x in &p[..dim] {
            let _ = write!(solution, ",{x}");
        }
        let _ = write!(solution, ",{},{}", u[v], classes[v].as_str());
        if let (Some(_), Some((_, profile, flags))) = (&nodal, &indicator) {
            let _ = write!(solution, ",{},{}", profile.values[v], flags[v].as_str());
        }
        solution.push('\n');
    }
    let mut history = String::from("iteration,sigma,cap,energy,grad_norm\n");
    for e in &main.history {
        let _ = writeln!(history, "{},{},{},{},{}", e.iteration, e.sigma, e.cap, e.energy, e.grad_norm);
    }

    let summary = RunSummary {
        verdict,
        residual_linf: main.residual_linf,
        residual_l2: main.residual_l2,
        energy: energy.j,
        counts,
        error_linf: errors.map(|e| e.0),
        error_sampled_linf: errors.map(|e| e.1),
        max_abs_u: main.u.max_abs(),
    };
    let files = RunFiles {
        solution_csv: solution,
        report_json: serde_json::to_string_pretty(&report)? + "\n",
        history_csv: history,
    };
    Ok((summary, files))
}

/// Writes `files` into a sibling staging directory and renames it over
/// `dir`, so readers never see a half-written run.
pub fn write_atomically(dir: &Path, files: &[(&str, &str)]) -> Result<()> {
    let name = dir
        .file_name()
        .ok_or_else(|| anyhow!("output directory `{}` has no name", dir.display()))?
        .to_string_lossy()
        .into_owned();
    let parent = dir.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let parent = if parent.as_os_str().is_empty() { PathBuf::from(".") } else { parent };
    std::fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
    let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
    if staging.exists() {
        std::fs::remove_dir_all(&staging)?;
    }
    std::fs::create_dir(&staging).with_context(|| format!("creating {}", staging.display()))?;
    for (file, body) in files {
        std::fs::write(staging.join(file), body)?;
    }
    if dir.exists() {
        std::fs::remove_dir_all(dir).with_context(|| format!("replacing {}", dir.display()))?;
    }
    std::fs::rename(&staging, dir).with_context(|| format!("moving results into {}", dir.display()))?;
    Ok(())
}

pub fn cmd_solve(path: &Path) -> Result<i32> {
    let cfg = RunConfig::load(path)?;
    let (summary, files) = execute(&cfg)?;
    let dir = cfg.output_dir();
    write_atomically(
        &dir,
        &[
            ("solution.csv", &files.solution_csv),
            ("report.json", &files.report_json),
            ("history.csv", &files.history_csv),
        ],
    )?;
    println!(
        "{}: finite={} plus_inf={} minus_inf={} J={:.10} residual_linf={:.3e}",
        summary.verdict, summary.counts[0], summary.counts[1], summary.counts[2], summary.energy, summary.residual_linf
    );
    if let Some(e) = summary.error_sampled_linf {
        println!("error vs exact: nodal {:.3e}, sampled {:.3e}", summary.error_linf.unwrap_or(f64::NAN), e);
    }
    println!("wrote {}", dir.display());
    Ok(summary.exit_code())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    H,
    TMax,
    Alpha,
    DomainSize,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "h" => SweepParam::H,
            "T_max" => SweepParam::TMax,
            "alpha" => SweepParam::Alpha,
            "domain_size" => SweepParam::DomainSize,
            other => bail!("unknown sweep parameter `{other}` (expected h, T_max, alpha or domain_size)"),
        })
    }
}

/// `cfg` with the swept parameter set to `value`.
pub fn with_param(cfg: &RunConfig, param: SweepParam, value: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    match param {
        SweepParam::H => c.h = value,
        SweepParam::Alpha => c.alpha = value,
        SweepParam::DomainSize => c.domain = cfg.domain.with_size(value)?,
        SweepParam::TMax => {
            let mut caps: Vec<f64> = cfg.solver.cap_schedule.iter().copied().filter(|&t| t < value).collect();
            caps.push(value);
            if caps.len() < 2 && cfg.solver.cap_schedule.len() >= 2 {
                caps.insert(0, value / 2.0);
            }
            c.solver.cap_schedule = caps;
        }
    }
    c.validate()?;
    Ok(c)
}

/// Least-squares slope of `ln err` against `ln h`.
pub fn fitted_order(hs: &[f64], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errs)
        .filter(|(_, e)| **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

pub fn cmd_sweep(path: &Path, param: &str, values: &[f64]) -> Result<i32> {
    let param = SweepParam::parse(param)?;
    if values.is_empty() {
        bail!("`--values` is empty");
    }
    let cfg = RunConfig::load(path)?;
    let mut csv = String::from(
        "value,verdict,residual_linf,residual_l2,energy,finite,plus_inf,minus_inf,error_linf,error_sampled_linf,max_abs_u\n",
    );
    let mut exit = EXIT_OK;
    let mut errs = Vec::new();
    for &value in values {
        let run = with_param(&cfg, param, value)?;
        let (s, _) = execute(&run).with_context(|| format!("sweep value {value}"))?;
        let _ = writeln!(
            csv,
            "{value},{},{:e},{:e},{},{},{},{},{},{},{}",
            s.verdict,
            s.residual_linf,
            s.residual_l2,
            s.energy,
            s.counts[0],
            s.counts[1],
            s.counts[2],
            opt(s.error_linf),
            opt(s.error_sampled_linf),
            s.max_abs_u
        );
        println!(
            "{value:>12}  {:<12} finite={} plus_inf={} minus_inf={} J={:.8} residual_linf={:.3e}{}",
            s.verdict,
            s.counts[0],
            s.counts[1],
            s.counts[2],
            s.energy,
            s.residual_linf,
            s.error_sampled_linf.map(|e| format!(" error={e:.3e}")).unwrap_or_default()
        );
        if s.exit_code() == EXIT_INCONCLUSIVE {
            exit = EXIT_INCONCLUSIVE;
        }
        if let Some(e) = s.error_sampled_linf {
            errs.push((value, e));
        }
    }
    if param == SweepParam::H && errs.len() >= 2 {
        let (hs, es): (Vec<f64>, Vec<f64>) = errs.into_iter().unzip();
        println!("fitted error order: {:.3}", fitted_order(&hs, &es));
    }
    let dir = cfg.output_dir();
    write_atomically(&dir, &[("sweep.csv", &csv)])?;
    println!("wrote {}", dir.join("sweep.csv").display());
    Ok(exit)
}
