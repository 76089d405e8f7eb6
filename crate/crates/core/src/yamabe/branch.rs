use serde::Serialize;

use super::{is_critical, solve_subcritical, SubcriticalProblem, YamabeSolution, H_TOLERANCE};
use crate::error::{LabError, Result};
use crate::warped::{
    conformal_transform, max_abs_mean_curvature, volume, warped_curvature, RadialField,
    WarpedMetric,
};

/// A relative change rate of `u` above this multiple of `max(1, max |R|)` is
/// reported as a branch jump.
pub const DEFAULT_JUMP_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, Serialize)]
pub struct BranchPoint {
    pub t: f64,
    pub solution: YamabeSolution,
    /// `max |u_k - u_{k-1}| / (max |u_{k-1}| · |t_k - t_{k-1}|)`.
    pub jump_indicator: f64,
    pub jump: bool,
}

/// Solves along a metric family, seeding each solve with the previous solution.
pub fn continue_branch(
    family: &[(f64, WarpedMetric)],
    p: f64,
    seed: &RadialField,
    jump_factor: f64,
) -> Result<Vec<BranchPoint>> {
    let mut out: Vec<BranchPoint> = Vec::with_capacity(family.len());
    let mut prev_u = seed.clone();
    let mut prev_t: Option<f64> = None;
    for (t, wm) in family {
        let problem = SubcriticalProblem::new(wm.clone(), p)?;
        let solution = solve_subcritical(&problem, Some(&prev_u))?;
        let (indicator, jump) = match prev_t {
            None => (0.0, false),
            Some(t0) => {
                let diff = solution
                    .u
                    .iter()
                    .zip(prev_u.iter())
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let size = prev_u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let dt = (t - t0).abs();
                let indicator = if dt > 0.0 {
                    diff / (size * dt)
                } else if diff <= 1e-9 * size {
                    0.0
                } else {
                    f64::INFINITY
                };
                let r_max = warped_curvature(wm)?
                    .scalar
                    .iter()
                    .fold(1.0f64, |m, v| m.max(v.abs()));
                (indicator, indicator > jump_factor * r_max)
            }
        };
        if jump {
            log::warn!("branch jump at t = {t:.6e}: relative rate {indicator:.3e}");
        }
        prev_u = solution.u();
        prev_t = Some(*t);
        out.push(BranchPoint {
            t: *t,
            solution,
            jump_indicator: indicator,
            jump,
        });
    }
    Ok(out)
}

/// How far a metric is from being a Yamabe metric.
#[derive(Clone, Debug, Serialize)]
pub struct YamabeMetricDefects {
    pub volume_error: f64,
    /// `(max R - min R) / |mean R|`.
    pub scalar_spread: f64,
    pub mean_scalar: f64,
    pub max_mean_curvature: f64,
}

pub fn yamabe_metric_defects(wm: &WarpedMetric) -> Result<YamabeMetricDefects> {
    let r = warped_curvature(wm)?.scalar;
    let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    Ok(YamabeMetricDefects {
        volume_error: (volume(wm) - 1.0).abs(),
        scalar_spread: (hi - lo) / mean.abs().max(f64::MIN_POSITIVE),
        mean_scalar: mean,
        max_mean_curvature: max_abs_mean_curvature(wm),
    })
}

/// `u^{4/(n-2)} g` for a critical solution, checked to be a Yamabe metric:
/// unit volume within `1e-6`, scalar curvature equal to `Y` within
/// `scalar_tolerance` relative, and `|H| <= 1e-6`.
pub fn yamabe_metric(
    wm: &WarpedMetric,
    sol: &YamabeSolution,
    scalar_tolerance: f64,
) -> Result<WarpedMetric> {
    if !is_critical(wm.n(), sol.p) {
        return Err(LabError::NotYamabeMetric(format!(
            "solution exponent {} is not critical",
            sol.p
        )));
    }
    let out = conformal_transform(wm, &sol.u)?;
    let defects = yamabe_metric_defects(&out)?;
    if defects.volume_error > 1e-6 {
        return Err(LabError::NotYamabeMetric(format!(
            "volume differs from 1 by {:e}",
            defects.volume_error
        )));
    }
    let r = warped_curvature(&out)?.scalar;
    let dev = r.iter().fold(0.0f64, |m, v| m.max((v - sol.y).abs())) / sol.y.abs().max(1e-300);
    if dev > scalar_tolerance {
        return Err(LabError::NotYamabeMetric(format!(
            "scalar curvature deviates from Y by {dev:e} relative"
        )));
    }
    if defects.max_mean_curvature > H_TOLERANCE {
        return Err(LabError::NotYamabeMetric(format!(
            "boundary mean curvature {:e}",
            defects.max_mean_curvature
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_family_is_constant() {
        let wm = WarpedMetric::perturbed_cylinder(3, 64, 0.05).unwrap();
        let family: Vec<_> = (0..3).map(|k| (k as f64 * 1e-3, wm.clone())).collect();
        let seed = RadialField::constant(wm.len(), 1.0);
        let branch = continue_branch(&family, 3.0, &seed, DEFAULT_JUMP_FACTOR).unwrap();
        assert!(branch.iter().all(|b| !b.jump));
        assert!((branch[2].solution.y - branch[0].solution.y).abs() < 1e-10);
        assert!(branch[2].jump_indicator < 1e-6);
    }

    #[test]
    fn cylinder_is_its_own_yamabe_metric() {
        let wm = WarpedMetric::unit_volume_cylinder(3, 64, 1.0).unwrap();
        let sol =
            solve_subcritical(&SubcriticalProblem::new(wm.clone(), 5.0).unwrap(), None).unwrap();
        let out = yamabe_metric(&wm, &sol, 1e-5).unwrap();
        for (a, b) in out.f().iter().zip(wm.f()) {
            assert!((a - b).abs() < 1e-8);
        }
        let sub =
            solve_subcritical(&SubcriticalProblem::new(wm.clone(), 2.0).unwrap(), None).unwrap();
        assert!(matches!(
            yamabe_metric(&wm, &sub, 1e-5),
            Err(LabError::NotYamabeMetric(_))
        ));
    }
}
