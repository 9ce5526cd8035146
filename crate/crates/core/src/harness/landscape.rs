//! Objective-landscape sweep on the two-stage tree.
//!
//! For every `(θ₁, θ₂)` on a uniform grid this emits the exact return
//! moments (closed form) next to Monte-Carlo estimates from fresh rollouts,
//! giving both the variance-penalised and shortfall-penalised surfaces.
//! The interesting comparison: mean − variance has spurious optima at
//! deterministic corner policies, while mean − shortfall keeps a single
//! optimum at the true best corner.

use crate::envs::tree_exact_moments;
use crate::error::Result;
use crate::harness::exec::{map_indexed, stream_rng};
use rand::Rng;
use std::io::Write;

#[derive(Clone, Copy, Debug)]
pub struct LandscapeRow {
    pub theta1: f64,
    pub theta2: f64,
    pub mean_exact: f64,
    pub var_exact: f64,
    pub lpm0_exact: f64,
    pub mean_mc: f64,
    pub var_mc: f64,
    pub lpm0_mc: f64,
}

/// Sweep the grid, one independent random stream per cell. Rows come back
/// in row-major order: `θ₁` varies slowest, `θ₂` fastest.
pub fn run_landscape(
    resolution: usize,
    n_rollouts: usize,
    base_seed: u64,
) -> Result<Vec<LandscapeRow>> {
    assert!(resolution >= 2, "grid needs at least two points per axis");
    assert!(n_rollouts >= 1, "Monte-Carlo columns need at least one rollout");
    let cells = resolution * resolution;
    let rows = map_indexed(cells, |cell| {
        let i1 = cell / resolution;
        let i2 = cell % resolution;
        let theta1 = i1 as f64 / (resolution - 1) as f64;
        let theta2 = i2 as f64 / (resolution - 1) as f64;
        let exact = tree_exact_moments(theta1, theta2);

        // The tree is two independent coin flips with rewards ±1 per stage,
        // so rollouts reduce to direct Bernoulli path sampling. This also
        // behaves at the grid boundary, where the policy is deterministic.
        let mut rng = stream_rng(base_seed, cell as u64);
        let mut returns = Vec::with_capacity(n_rollouts);
        for _ in 0..n_rollouts {
            let first = if rng.gen::<f64>() < theta1 { 1.0 } else { -1.0 };
            let second = if rng.gen::<f64>() < theta2 { 1.0 } else { -1.0 };
            returns.push(first + second);
        }
        let n = n_rollouts as f64;
        let mean_mc = returns.iter().sum::<f64>() / n;
        let var_mc = returns.iter().map(|g| (g - mean_mc).powi(2)).sum::<f64>() / n;
        let lpm0_mc = returns.iter().map(|g| (-g).max(0.0)).sum::<f64>() / n;

        LandscapeRow {
            theta1,
            theta2,
            mean_exact: exact.mean,
            var_exact: exact.variance,
            lpm0_exact: exact.lpm1_at_zero,
            mean_mc,
            var_mc,
            lpm0_mc,
        }
    });
    Ok(rows)
}

pub fn write_landscape_csv<W: Write>(rows: &[LandscapeRow], out: &mut W) -> Result<()> {
    writeln!(
        out,
        "theta1,theta2,mean_exact,var_exact,lpm0_exact,mean_mc,var_mc,lpm0_mc"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.theta1, r.theta2, r.mean_exact, r.var_exact, r.lpm0_exact, r.mean_mc, r.var_mc,
            r.lpm0_mc
        )?;
    }
    Ok(())
}

/// Strict local maxima of a row-major `resolution × resolution` surface
/// under 8-connectivity. Returns `(i1, i2)` grid indices.
pub fn grid_local_maxima(values: &[f64], resolution: usize) -> Vec<(usize, usize)> {
    assert_eq!(values.len(), resolution * resolution, "surface shape mismatch");
    let at = |i: usize, j: usize| values[i * resolution + j];
    let mut maxima = Vec::new();
    for i in 0..resolution {
        for j in 0..resolution {
            let center = at(i, j);
            let mut is_max = true;
            'neighbors: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ni = i as i64 + di;
                    let nj = j as i64 + dj;
                    if ni < 0 || nj < 0 || ni >= resolution as i64 || nj >= resolution as i64 {
                        continue;
                    }
                    if at(ni as usize, nj as usize) >= center {
                        is_max = false;
                        break 'neighbors;
                    }
                }
            }
            if is_max {
                maxima.push((i, j));
            }
        }
    }
    maxima
}
