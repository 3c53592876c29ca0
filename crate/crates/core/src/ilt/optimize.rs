//! Polak-Ribiere conjugate-gradient evolution of the level set.

use super::gradient::IltEngine;
use super::IltConfig;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::levelset::{mask_from_levelset, reinitialize, signed_distance, LevelSet};
use crate::lithosim::KernelBank;

#[derive(Debug, Clone)]
pub struct OptResult {
    /// Level set with the lowest loss seen.
    pub final_psi: LevelSet,
    pub final_mask: ScalarField,
    /// `L_LS` of every evaluated iterate, in order.
    pub loss_trace: Vec<f64>,
    pub iterations_run: usize,
}

impl OptResult {
    pub fn best_loss(&self) -> f64 {
        self.loss_trace.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `L_LS` over the level set.
///
/// Each iteration evaluates the loss and `dL/dpsi` at the current iterate,
/// forms a PR+ direction and moves `psi` so the largest per-pixel change is
/// `cfg.dt`. The level set is reinitialized to a signed distance every
/// `cfg.reinit_every` iterations, which also restarts CG.
pub fn optimize(
    z_target: &ScalarField,
    kernels: &KernelBank,
    cfg: &IltConfig,
    initial_psi: Option<&LevelSet>,
) -> Result<OptResult> {
    let engine = IltEngine::new(z_target, kernels, cfg)?;
    let start = match initial_psi {
        Some(p) => {
            p.field().ensure_same_shape(z_target)?;
            p.clone()
        }
        None => signed_distance(z_target)?,
    };
    run(&engine, start)
}

/// [`optimize`] on a prepared engine.
pub fn run(engine: &IltEngine, start: LevelSet) -> Result<OptResult> {
    let cfg = engine.config();
    let mut psi = start;
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut best_so_far = Vec::with_capacity(cfg.max_iters);
    let mut best: Option<(f64, LevelSet)> = None;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for it in 0..cfg.max_iters {
        if it > 0 && it % cfg.reinit_every == 0 {
            psi = reinitialize(&psi)?;
            prev = None;
        }
        let (loss, grad) = engine.levelset_gradient(&psi)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: it, loss });
        }
        trace.push(loss);
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, psi.clone()));
        }
        let best_loss = best.as_ref().map(|b| b.0).unwrap_or(loss);
        best_so_far.push(best_loss);
        if it >= cfg.stop_window {
            let earlier = best_so_far[it - cfg.stop_window];
            if earlier > 0.0 && (earlier - best_loss) / earlier < cfg.stop_tolerance {
                break;
            }
        }
        if it + 1 == cfg.max_iters {
            break;
        }

        let g = grad.into_data();
        let mut direction: Vec<f64> = g.iter().map(|v| -v).collect();
        if let Some((g_prev, d_prev)) = &prev {
            let denom = dot(g_prev, g_prev);
            if denom > 0.0 {
                let num: f64 = g.iter().zip(g_prev).map(|(a, b)| a * (a - b)).sum();
                let beta = (num / denom).max(0.0);
                for (d, dp) in direction.iter_mut().zip(d_prev) {
                    *d += beta * dp;
                }
            }
            if dot(&direction, &g) >= 0.0 {
                direction = g.iter().map(|v| -v).collect();
            }
        }
        let peak = direction.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(peak > 0.0) {
            break;
        }
        let step = cfg.dt / peak;
        let next: Vec<f64> = psi
            .field()
            .data()
            .iter()
            .zip(&direction)
            .map(|(p, d)| p + step * d)
            .collect();
        psi = LevelSet::new(psi.field().with_data(next)?)?;
        prev = Some((g, direction));
    }

    let (_, best_psi) = best.expect("at least one iteration");
    let iterations_run = trace.len();
    Ok(OptResult {
        final_mask: mask_from_levelset(&best_psi),
        final_psi: best_psi,
        loss_trace: trace,
        iterations_run,
    })
}
