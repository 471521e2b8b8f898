//! Calibration of the noise knob against the target correctness band, and
//! the day-to-day variation harness.

use serde::Serialize;
use thiserror::Error;

use sculi_core::accel::{build_schedule, simulate_kp, ActivityLog};
use sculi_core::attack::{best_candidate, comparison_to_mean, compress};
use sculi_core::curve::{CurveParams, Scalar};
use sculi_core::leakage::{synthesize_trace, PowerParams};

use crate::config::ResolvedScenario;
use crate::run::{mean, RunError};

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(
        "target mean delta in [{lo}, {hi}] unreachable over sigma_noise in [0, {sigma_max}]; explored: {explored}"
    )]
    Unreachable {
        lo: f64,
        hi: f64,
        sigma_max: f64,
        explored: String,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationStep {
    pub sigma_noise: f64,
    pub mean_delta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationResult {
    pub sigma_noise: f64,
    pub mean_delta: f64,
    pub seeds: usize,
    pub steps: Vec<CalibrationStep>,
}

/// Mean best-candidate delta over `seeds` fresh noise seeds at the given
/// noise level, reusing one simulated activity log.
fn eval_sigma(
    log: &ActivityLog,
    k: &Scalar,
    base: &PowerParams,
    resolved: &ResolvedScenario,
    sigma: f64,
    seeds: u64,
) -> Result<f64, RunError> {
    let mut params = base.clone();
    params.sigma_noise = sigma;
    let mut deltas = Vec::with_capacity(seeds as usize);
    for s in 0..seeds {
        let t = synthesize_trace(
            log,
            &params,
            &resolved.laser,
            &resolved.floorplan,
            resolved.seed.wrapping_add(s),
            &resolved.name,
            None,
        )?;
        let m = compress(&t)?;
        let best = best_candidate(&comparison_to_mean(&m), k, true)?;
        deltas.push(best.delta);
    }
    Ok(mean(&deltas))
}

/// Search sigma_noise (the only free knob at fixed leakage weights) until
/// the mean best delta over `seeds` runs lies in [target_lo, target_hi].
/// Monotone bisection: delta falls as noise grows.
pub fn calibrate(
    resolved: &ResolvedScenario,
    curve: &CurveParams,
    target_lo: f64,
    target_hi: f64,
    seeds: u64,
) -> Result<CalibrationResult, CalibrateError> {
    let sched = build_schedule();
    let k = resolved.scalar();
    let p = resolved.base_point(curve);
    let (_, log) = simulate_kp(&k, &p, curve, &sched).map_err(RunError::from)?;

    let mut steps = Vec::new();
    let eval = |sigma: f64, steps: &mut Vec<CalibrationStep>| -> Result<f64, CalibrateError> {
        let d = eval_sigma(&log, &k, &resolved.power, resolved, sigma, seeds)?;
        steps.push(CalibrationStep {
            sigma_noise: sigma,
            mean_delta: d,
        });
        Ok(d)
    };

    let explored = |steps: &[CalibrationStep]| {
        steps
            .iter()
            .map(|s| format!("sigma {:.1} -> {:.2}", s.sigma_noise, s.mean_delta))
            .collect::<Vec<_>>()
            .join(", ")
    };

    // Bracket: delta(0) should sit above the band, then grow sigma until
    // delta falls below the top of the band.
    let d0 = eval(0.0, &mut steps)?;
    if d0 < target_lo {
        return Err(CalibrateError::Unreachable {
            lo: target_lo,
            hi: target_hi,
            sigma_max: 0.0,
            explored: explored(&steps),
        });
    }
    if d0 <= target_hi {
        return Ok(CalibrationResult {
            sigma_noise: 0.0,
            mean_delta: d0,
            seeds: seeds as usize,
            steps,
        });
    }
    const SIGMA_MAX: f64 = 1.0e7;
    let mut lo = 0.0; // delta(lo) > target_hi
    let mut hi = if resolved.power.sigma_noise > 0.0 {
        resolved.power.sigma_noise
    } else {
        100.0
    };
    loop {
        let d = eval(hi, &mut steps)?;
        if d < target_lo {
            break; // bracketed: delta(hi) below band
        }
        if d <= target_hi {
            return Ok(CalibrationResult {
                sigma_noise: hi,
                mean_delta: d,
                seeds: seeds as usize,
                steps,
            });
        }
        lo = hi;
        hi *= 2.0;
        if hi > SIGMA_MAX {
            return Err(CalibrateError::Unreachable {
                lo: target_lo,
                hi: target_hi,
                sigma_max: SIGMA_MAX,
                explored: explored(&steps),
            });
        }
    }
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        let d = eval(mid, &mut steps)?;
        if d > target_hi {
            lo = mid;
        } else if d < target_lo {
            hi = mid;
        } else {
            return Ok(CalibrationResult {
                sigma_noise: mid,
                mean_delta: d,
                seeds: seeds as usize,
                steps,
            });
        }
    }
    Err(CalibrateError::Unreachable {
        lo: target_lo,
        hi: target_hi,
        sigma_max: SIGMA_MAX,
        explored: explored(&steps),
    })
}

/// Re-run the reference scenario under `n_days` fresh seeds (plus baseline
/// drift); returns the per-day best deltas.
pub fn day_variation(
    resolved: &ResolvedScenario,
    curve: &CurveParams,
    n_days: usize,
    drift: f64,
) -> Result<Vec<f64>, RunError> {
    let sched = build_schedule();
    let k = resolved.scalar();
    let p = resolved.base_point(curve);
    let (_, log) = simulate_kp(&k, &p, curve, &sched)?;
    let mut params = resolved.power.clone();
    params.drift = drift;
    let mut deltas = Vec::with_capacity(n_days);
    for day in 0..n_days {
        let t = synthesize_trace(
            &log,
            &params,
            &resolved.laser,
            &resolved.floorplan,
            resolved.seed.wrapping_add(1000 + day as u64),
            &resolved.name,
            None,
        )?;
        let m = compress(&t)?;
        let best = best_candidate(&comparison_to_mean(&m), &k, true)?;
        deltas.push(best.delta);
    }
    Ok(deltas)
}

/// Spread (max - min) of a delta list.
pub fn spread(deltas: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &d in deltas {
        lo = lo.min(d);
        hi = hi.max(d);
    }
    hi - lo
}

/// Spearman rank correlation between two equal-length series (average ranks
/// on ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(x);
    let ry = rank(y);
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..rx.len() {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    if dx == 0.0 || dy == 0.0 {
        return 0.0;
    }
    num / (dx * dy).sqrt()
}
