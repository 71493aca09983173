//! Random compactly supported perturbations of an indicator, used to probe
//! local minimality of the weighted perimeter.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::indicator::Pav;
use crate::error::Result;
use crate::measures::perimeter::PerimeterGrid;
use crate::measures::SubgraphIndicator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirandaReport {
    pub trials: usize,
    pub perimeter: f64,
    /// Most negative change `P(λ') - P(λ)` seen (0 if none decreased).
    pub min_change: f64,
    /// Trials that lowered the perimeter by more than the tolerance.
    pub violations: usize,
}

/// Perturbs interior columns inside a random `(x, r)` window, projects them
/// back to non-increasing columns in `[0, 1]`, and compares perimeters.
/// Boundary columns and the ghost rows are never touched.
pub fn miranda_probe(ind: &SubgraphIndicator, trials: usize, seed: u64, tol: f64) -> Result<MirandaReport> {
    ind.check_monotone()?;
    let grid = PerimeterGrid::new(ind);
    let s = grid.stride();
    let n_r = grid.n_r;
    let mesh = &ind.mesh;
    let adj = mesh.neighbors();
    let interior: Vec<usize> = (0..mesh.n_nodes()).filter(|&v| mesh.interior_mask[v]).collect();
    let base = grid.extend(ind);
    let perimeter = grid.total(&base);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut pav = Pav::default();
    let ones = vec![1.0; n_r];
    let mut min_change: f64 = 0.0;
    let mut violations = 0;
    if interior.is_empty() {
        return Ok(MirandaReport {
            trials: 0,
            perimeter,
            min_change,
            violations,
        });
    }
    for _ in 0..trials {
        let centre = interior[rng.gen_range(0..interior.len())];
        let mut support = vec![centre];
        if rng.gen_bool(0.5) {
            support.extend(adj[centre].iter().copied().filter(|&w| mesh.interior_mask[w]));
        }
        let k0 = rng.gen_range(0..n_r) as f64;
        let half = rng.gen_range(1..=(n_r / 8).max(1)) as f64;
        let amp = rng.gen_range(-0.5..0.5);
        let shift = rng.gen_range(-(half as i64)..=(half as i64));
        let vertical = rng.gen_bool(0.5);
        let mut trial = base.clone();
        for &v in &support {
            let col = &mut trial[v * s + 1..v * s + 1 + n_r];
            let orig = &base[v * s + 1..v * s + 1 + n_r];
            for k in 0..n_r {
                let t = (k as f64 - k0) / half;
                if t.abs() >= 1.0 {
                    continue;
                }
                col[k] = if vertical {
                    // Vertical slide of the column inside the window.
                    let src = (k as i64 - shift).clamp(0, n_r as i64 - 1) as usize;
                    orig[src]
                } else {
                    orig[k] + amp * (1.0 - t * t)
                };
            }
            pav.project(col, &ones);
        }
        let change = grid.total(&trial) - perimeter;
        min_change = min_change.min(change);
        if change < -tol {
            violations += 1;
        }
    }
    Ok(MirandaReport {
        trials,
        perimeter,
        min_change,
        violations,
    })
}
