//! Run configuration: flat `key = value` lines with dotted sections.
//!
//! ```text
//! # grim reaper
//! domain = interval(1.0)
//! alpha = 1
//! h = 0.00390625
//! psi = -ln(cos(x))
//! exact = -ln(cos(x))
//! solvers = nodal
//! solver.cap_schedule = 5, 10
//! ```
//!
//! Every key is optional except `domain`, `alpha` and `h`. Unknown keys,
//! duplicates and malformed values are errors that name the key.

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tmce_core::{DomainSpec, SolverConfig};

use crate::expr::Expr;

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "TMCE_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq)]
pub enum PsiSource {
    Expr(Expr),
    /// Per-node values, one `node,value` row per mesh node.
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Nodal,
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    GradientEstimate,
    C0Estimate,
    MeanConvexity,
}

impl DiagnosticKind {
    pub fn name(self) -> &'static str {
        match self {
            DiagnosticKind::GradientEstimate => "gradient_estimate",
            DiagnosticKind::C0Estimate => "c0_estimate",
            DiagnosticKind::MeanConvexity => "mean_convexity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub alpha: f64,
    pub h: f64,
    pub psi: PsiSource,
    /// Reference solution; adds error norms to the report.
    pub exact: Option<Expr>,
    pub solvers: Vec<SolverKind>,
    pub diagnostics: Vec<DiagnosticKind>,
    /// Output directory as written in the file (resolved by [`RunConfig::output_dir`]).
    pub output: PathBuf,
    pub solver: SolverConfig,
    /// Directory of the config file, for relative `psi_csv` paths.
    pub base_dir: PathBuf,
}

const SOLVER_KEYS: &[&str] = &[
    "cap_schedule",
    "sigma_steps",
    "max_iters",
    "grad_tol",
    "energy_tol",
    "wall_eps",
    "tau",
    "sigma_dual",
    "h_r",
    "indicator_cap",
    "indicator_max_iters",
];

fn number(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| anyhow!("`{key}`: expected a number, got `{}`", v.trim()))?;
    if !x.is_finite() {
        bail!("`{key}`: value must be finite");
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| anyhow!("`{key}`: expected a non-negative integer, got `{}`", v.trim()))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| number(key, s)).collect()
}

fn names(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, stem, &base)
    }

    /// Parses config text; `stem` names the default output directory.
    pub fn parse(text: &str, stem: &str, base_dir: &Path) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{line}`", i + 1))?;
            let k = k.trim().to_string();
            if kv.insert(k.clone(), v.trim().to_string()).is_some() {
                bail!("`{k}` is set twice");
            }
        }
        let mut solver = SolverConfig::default();
        let mut domain = None;
        let mut alpha = None;
        let mut h = None;
        let mut psi_expr = None;
        let mut psi_csv = None;
        let mut exact = None;
        let mut solvers = vec![SolverKind::Nodal];
        let mut diagnostics = vec![DiagnosticKind::GradientEstimate, DiagnosticKind::MeanConvexity];
        let mut output = PathBuf::from("runs").join(stem);
        for (k, v) in &kv {
            let key = k.as_str();
            match key {
                "domain" => domain = Some(DomainSpec::parse(v).map_err(|e| anyhow!("`domain`: {e}"))?),
                "alpha" => alpha = Some(number(key, v)?),
                "h" => h = Some(number(key, v)?),
                "h_r" => solver.h_r = number(key, v)?,
                "psi" => psi_expr = Some(Expr::parse(v).map_err(|e| anyhow!("`psi`: {e}"))?),
                "psi_csv" => psi_csv = Some(PathBuf::from(v)),
                "exact" => exact = Some(Expr::parse(v).map_err(|e| anyhow!("`exact`: {e}"))?),
                "output" => output = PathBuf::from(v),
                "solvers" => {
                    solvers = names(v)
                        .iter()
                        .map(|s| match s.as_str() {
                            "nodal" => Ok(SolverKind::Nodal),
                            "indicator" => Ok(SolverKind::Indicator),
                            other => Err(anyhow!("`solvers`: unknown solver `{other}`")),
                        })
                        .collect::<Result<_>>()?;
                    if solvers.is_empty() {
                        bail!("`solvers`: at least one solver is required");
                    }
                }
                "diagnostics" => {
                    diagnostics = names(v)
                        .iter()
                        .map(|s| match s.as_str() {
                            "gradient_estimate" => Ok(DiagnosticKind::GradientEstimate),
                            "c0_estimate" => Ok(DiagnosticKind::C0Estimate),
                            "mean_convexity" => Ok(DiagnosticKind::MeanConvexity),
                            other => Err(anyhow!("`diagnostics`: unknown check `{other}`")),
                        })
                        .collect::<Result<_>>()?;
                }
                _ => {
                    let field = key
                        .strip_prefix("solver.")
                        .filter(|f| SOLVER_KEYS.contains(f))
                        .ok_or_else(|| anyhow!("unknown key `{key}`"))?;
                    match field {
                        "cap_schedule" => solver.cap_schedule = list(key, v)?,
                        "sigma_steps" => solver.sigma_steps = list(key, v)?,
                        "max_iters" => solver.max_iters = count(key, v)?,
                        "grad_tol" => solver.grad_tol = number(key, v)?,
                        "energy_tol" => solver.energy_tol = number(key, v)?,
                        "wall_eps" => solver.wall_eps = Some(number(key, v)?),
                        "tau" => solver.tau = number(key, v)?,
                        "sigma_dual" => solver.sigma_dual = number(key, v)?,
                        "h_r" => solver.h_r = number(key, v)?,
                        "indicator_cap" => solver.indicator_cap = number(key, v)?,
                        _ => solver.indicator_max_iters = count(key, v)?,
                    }
                }
            }
        }
        let domain = domain.ok_or_else(|| anyhow!("missing required key `domain`"))?;
        let alpha = alpha.ok_or_else(|| anyhow!("missing required key `alpha`"))?;
        let h = h.ok_or_else(|| anyhow!("missing required key `h`"))?;
        let psi = match (psi_expr, psi_csv) {
            (Some(_), Some(_)) => bail!("`psi` and `psi_csv` are mutually exclusive"),
            (None, Some(p)) => PsiSource::Csv(p),
            (Some(e), None) => PsiSource::Expr(e),
            (None, None) => PsiSource::Expr(Expr::parse("0")?),
        };
        let cfg = Self {
            domain,
            alpha,
            h,
            psi,
            exact,
            solvers,
            diagnostics,
            output,
            solver,
            base_dir: base_dir.to_path_buf(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            bail!("`alpha` must be positive, got {}", self.alpha);
        }
        if !(self.h > 0.0) {
            bail!("`h` must be positive, got {}", self.h);
        }
        self.solver.validate().map_err(|e| anyhow!("`solver`: {e}"))?;
        Ok(())
    }

    /// `output` if absolute, else joined onto `$TMCE_OUTPUT_ROOT` (or the
    /// working directory when unset).
    pub fn output_dir(&self) -> PathBuf {
        if self.output.is_absolute() {
            return self.output.clone();
        }
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.output),
            _ => self.output.clone(),
        }
    }

    pub fn has(&self, kind: SolverKind) -> bool {
        self.solvers.contains(&kind)
    }

    /// The fully resolved configuration, as echoed in `report.json`.
    pub fn echo(&self) -> Value {
        let psi = match &self.psi {
            PsiSource::Expr(e) => json!({ "expression": e.source, "constant": e.constant() }),
            PsiSource::Csv(p) => json!({ "csv": p.display().to_string() }),
        };
        json!({
            "domain": self.domain.to_string(),
            "alpha": self.alpha,
            "h": self.h,
            "psi": psi,
            "exact": self.exact.as_ref().map(|e| e.source.clone()),
            "solvers": self.solvers.iter().map(|s| match s {
                SolverKind::Nodal => "nodal",
                SolverKind::Indicator => "indicator",
            }).collect::<Vec<_>>(),
            "diagnostics": self.diagnostics.iter().map(|d| d.name()).collect::<Vec<_>>(),
            "output": self.output.display().to_string(),
            "solver": serde_json::to_value(&self.solver).expect("solver config serializes"),
        })
    }
}
