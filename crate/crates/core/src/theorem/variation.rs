use serde::Serialize;

use super::lhs::{default_dt, lhs_finite_difference, LhsOptions};
use crate::error::{LabError, Result};
use crate::flow::{advance, flow_rhs, FlowParams, FlowState};
use crate::stencil::End;
use crate::warped::{
    curvature_with_policy, integrate_bulk, radial_laplacian, radial_laplacian_with, RadialField,
    WarpedMetric,
};
use crate::yamabe::{
    conformal_coefficient, continue_branch, critical_exponent, yamabe_metric_defects,
    DEFAULT_JUMP_FACTOR, H_TOLERANCE,
};

/// `2 ∫ |Ric^0|² dσ`, the critical rate at a Yamabe metric.
///
/// The metric must have unit volume within `1e-6`, scalar curvature constant
/// within `1e-5` relative and `|H| <= 1e-6`; then `u(0) = 1` is the critical
/// solution and `∂_ν h = 0` on the boundary.
pub fn yamabe_initial_rate(wm: &WarpedMetric) -> Result<f64> {
    let d = yamabe_metric_defects(wm)?;
    if d.volume_error > 1e-6 {
        return Err(LabError::NotYamabeMetric(format!(
            "volume differs from 1 by {:e}",
            d.volume_error
        )));
    }
    if d.scalar_spread > 1e-5 {
        return Err(LabError::NotYamabeMetric(format!(
            "scalar curvature varies by {:e} relative",
            d.scalar_spread
        )));
    }
    if d.max_mean_curvature > H_TOLERANCE {
        return Err(LabError::NotYamabeMetric(format!(
            "boundary mean curvature {:e}",
            d.max_mean_curvature
        )));
    }
    let c = curvature_with_policy(wm, End::Even)?;
    Ok(2.0 * integrate_bulk(wm, &c.tracefree_norm_sq))
}

#[derive(Clone, Debug)]
pub struct MonotonicityOptions {
    /// Time step of the rate difference; `1e-4 / max |R|` when absent.
    pub dt: Option<f64>,
    /// `|rate| <= rate_tolerance` counts as equality.
    pub rate_tolerance: f64,
    /// `max |Ric^0|² <= einstein` counts as Einstein.
    pub einstein: f64,
    pub lhs: LhsOptions,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        MonotonicityOptions {
            dt: None,
            rate_tolerance: 5e-3,
            einstein: 1e-8,
            lhs: LhsOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct YSample {
    pub t: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub jump: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    /// `2 ∫ |Ric^0|²`.
    pub rate_formula: f64,
    /// Finite-difference rate of `Y` at the critical exponent.
    pub rate_fd: f64,
    pub max_traceless_sq: f64,
    pub non_negative: bool,
    pub equality: bool,
    pub einstein: bool,
    /// `equality == einstein`.
    pub biconditional: bool,
    pub samples: Vec<YSample>,
    /// `max |Y(t) - Y(0)| / |Y(0)|` over the samples.
    pub max_relative_variation: f64,
    /// Number of sample intervals on which `Y` decreased by more than `1e-9` relative.
    pub decreases: usize,
    pub trusted: bool,
}

/// Sign and equality case of the critical rate at a Yamabe metric, plus the
/// critical constant sampled along the flow over `[0, horizon]`.
pub fn monotonicity_check(
    wm: &WarpedMetric,
    horizon: f64,
    samples: usize,
    opts: &MonotonicityOptions,
) -> Result<MonotonicityReport> {
    if samples == 0 || !(horizon >= 0.0) {
        return Err(LabError::invalid(
            "need at least one sample over a non-negative horizon",
        ));
    }
    let rate_formula = yamabe_initial_rate(wm)?;
    let p = critical_exponent(wm.n());
    let state = FlowState::new(wm.clone());
    let dt = match opts.dt {
        Some(dt) => dt,
        None => default_dt(&state)?,
    };
    let lhs = lhs_finite_difference(&state, p, dt, &opts.lhs)?;
    let max_traceless_sq = curvature_with_policy(wm, End::Even)?
        .tracefree_norm_sq
        .iter()
        .fold(0.0f64, |m, v| m.max(*v));

    let mut family = vec![(0.0, wm.clone())];
    let mut s = state;
    for k in 1..=samples {
        let t = horizon * k as f64 / samples as f64;
        s = advance(&s, t - s.t, &opts.lhs.flow)?;
        family.push((t, s.wm.clone()));
    }
    let branch = continue_branch(
        &family,
        p,
        &RadialField::constant(wm.len(), 1.0),
        opts.lhs.jump_factor,
    )?;
    let ys: Vec<YSample> = branch
        .iter()
        .map(|b| YSample {
            t: b.t,
            y: b.solution.y,
            jump: b.jump,
        })
        .collect();
    let y0 = ys[0].y;
    let max_relative_variation = ys.iter().fold(0.0f64, |m, s| m.max((s.y - y0).abs())) / y0.abs();
    let decreases = ys
        .windows(2)
        .filter(|w| w[1].y < w[0].y - 1e-9 * w[0].y.abs())
        .count();

    let equality = lhs.value.abs() <= opts.rate_tolerance;
    let einstein = max_traceless_sq <= opts.einstein;
    Ok(MonotonicityReport {
        rate_formula,
        rate_fd: lhs.value,
        max_traceless_sq,
        non_negative: lhs.value >= -opts.rate_tolerance,
        equality,
        einstein,
        biconditional: equality == einstein,
        trusted: lhs.trusted && ys.iter().all(|s| !s.jump),
        samples: ys,
        max_relative_variation,
        decreases,
    })
}

/// The first-variation identity and the constraint identity at `t + δt`.
#[derive(Clone, Debug, Serialize)]
pub struct FirstVariationReport {
    pub t: f64,
    pub dt: f64,
    /// Central difference of `∫ (a |∇u|² + R u²) dσ`.
    pub energy_rate_fd: f64,
    pub energy_rate_formula: f64,
    /// `energy_rate_fd - energy_rate_formula`.
    pub energy_defect: f64,
    /// `|energy_defect| / max(1, |energy_rate_formula|)`.
    pub residual: f64,
    /// `∫ u^p h dσ`.
    pub constraint_lhs: f64,
    /// `∫ u^{p+1} R dσ / (p + 1)`.
    pub constraint_rhs: f64,
    pub constraint_residual: f64,
    pub trusted: bool,
}

fn energy(wm: &WarpedMetric, u: &[f64], a: f64) -> Result<f64> {
    let r = curvature_with_policy(wm, End::Even)?.scalar;
    let g = radial_laplacian(wm, u).grad_sq;
    let e: Vec<f64> = (0..u.len())
        .map(|i| a * g[i] + r[i] * u[i] * u[i])
        .collect();
    Ok(integrate_bulk(wm, &e))
}

/// Differentiates the energy along the branch over `[t, t + 2δt]` and compares
/// with its first-variation formula at `t + δt`.
///
/// `h` is the central difference of `u` minus the gauge term `ξ u_r`, the
/// conformal velocity under the ungauged flow.
pub fn verify_first_variation(
    state0: &FlowState,
    p: f64,
    dt: f64,
    params: &FlowParams,
) -> Result<FirstVariationReport> {
    if !(dt > 0.0) {
        return Err(LabError::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let n = state0.wm.n();
    let a = conformal_coefficient(n);
    let s1 = advance(state0, dt, params)?;
    let s2 = advance(&s1, dt, params)?;
    let family = vec![
        (state0.t, state0.wm.clone()),
        (s1.t, s1.wm.clone()),
        (s2.t, s2.wm.clone()),
    ];
    let seed = RadialField::constant(state0.wm.len(), 1.0);
    let branch = continue_branch(&family, p, &seed, DEFAULT_JUMP_FACTOR)?;
    let (u0, u1, u2) = (
        &branch[0].solution.u,
        &branch[1].solution.u,
        &branch[2].solution.u,
    );
    let e0 = energy(&state0.wm, u0, a)?;
    let e2 = energy(&s2.wm, u2, a)?;
    let energy_rate_fd = (e2 - e0) / (2.0 * dt);

    let wm = &s1.wm;
    let c = curvature_with_policy(wm, End::Even)?;
    let xi = flow_rhs(wm)?.xi;
    let lu = radial_laplacian(wm, u1);
    let h: Vec<f64> = (0..u1.len())
        .map(|i| (u2[i] - u0[i]) / (2.0 * dt) - xi[i] * wm.h()[i] * lu.u_s[i])
        .collect();
    let h_s = radial_laplacian(wm, &h).u_s;
    let lap_r = radial_laplacian_with(wm, &c.scalar, End::Even).laplacian;
    let r = &c.scalar;
    let integrand: Vec<f64> = (0..u1.len())
        .map(|i| {
            let (u, us) = (u1[i], lu.u_s[i]);
            let grad = 2.0 * a * (c.lambda_radial[i] * us * us + us * h_s[i]);
            let zeroth = (lap_r[i] + 2.0 * c.ricci_norm_sq[i]) * u * u + 2.0 * r[i] * u * h[i];
            let volume = -(a * us * us + r[i] * u * u) * r[i];
            grad + zeroth + volume
        })
        .collect();
    let energy_rate_formula = integrate_bulk(wm, &integrand);
    let energy_defect = energy_rate_fd - energy_rate_formula;

    let up: Vec<f64> = (0..u1.len()).map(|i| u1[i].powf(p) * h[i]).collect();
    let upr: Vec<f64> = (0..u1.len()).map(|i| u1[i].powf(p + 1.0) * r[i]).collect();
    let constraint_lhs = integrate_bulk(wm, &up);
    let constraint_rhs = integrate_bulk(wm, &upr) / (p + 1.0);
    Ok(FirstVariationReport {
        t: s1.t,
        dt,
        energy_rate_fd,
        energy_rate_formula,
        energy_defect,
        residual: energy_defect.abs() / energy_rate_formula.abs().max(1.0),
        constraint_lhs,
        constraint_rhs,
        constraint_residual: (constraint_lhs - constraint_rhs).abs()
            / constraint_rhs.abs().max(1.0),
        trusted: branch.iter().all(|b| !b.jump),
    })
}
