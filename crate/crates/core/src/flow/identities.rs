use serde::Serialize;

use super::{advance, flow_rhs, FlowParams, FlowState};
use crate::error::Result;
use crate::stencil::{d1, End};
use crate::warped::{curvature_with_policy, integrate_bulk, radial_laplacian, volume, RadialField};
use crate::yamabe::{continue_branch, DEFAULT_JUMP_FACTOR};

/// Residuals of the evolution identities, each `max |lhs - rhs| / max(1, max |rhs|)`.
///
/// The flow carries the gauge term `L_X g`, so the pointwise identities gain
/// their Lie derivative terms: `X(R)` for the scalar curvature and
/// `-(L_X g)(∇u, ∇u)` for the gradient.
#[derive(Clone, Debug, Serialize)]
pub struct FlowIdentityReport {
    pub dt: f64,
    /// Time at which the central differences are taken.
    pub t: f64,
    /// `∂_t R = ΔR + 2 |Ric|² + X(R)`.
    pub scalar_residual: f64,
    /// `d/dt Vol = -∫ R dσ`.
    pub volume_residual: f64,
    /// `∂_t |∇u|² = 2 Ric(∇u, ∇u) + 2 <∇u, ∇h> - (L_X g)(∇u, ∇u)` along the
    /// solution branch, with `h = ∂_t u`.
    pub gradient_residual: Option<f64>,
    pub branch_trusted: bool,
}

fn relative(lhs: &[f64], rhs: &[f64]) -> f64 {
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    lhs.iter()
        .zip(rhs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / scale
}

/// Central differences over `[t, t + 2 dt]` along the forward flow, compared
/// with the identities evaluated at `t + dt`. With `branch_p`, the Yamabe
/// branch at that exponent supplies `u(t)` for the gradient identity.
pub fn verify_flow_identities(
    state: &FlowState,
    dt: f64,
    params: &FlowParams,
    branch_p: Option<f64>,
) -> Result<FlowIdentityReport> {
    let s0 = state.clone();
    let s1 = advance(&s0, dt, params)?;
    let s2 = advance(&s1, dt, params)?;
    let r0 = curvature_with_policy(&s0.wm, End::Even)?.scalar;
    let c1 = curvature_with_policy(&s1.wm, End::Even)?;
    let r2 = curvature_with_policy(&s2.wm, End::Even)?.scalar;

    let gauge = flow_rhs(&s1.wm)?;
    let lap = radial_laplacian(&s1.wm, &c1.scalar).laplacian;
    let r_r = d1(&c1.scalar, s1.wm.dr(), s1.wm.scalar_left(), End::Open);
    let lhs: Vec<f64> = r0
        .iter()
        .zip(&r2)
        .map(|(a, b)| (b - a) / (2.0 * dt))
        .collect();
    let rhs: Vec<f64> = (0..lap.len())
        .map(|i| lap[i] + 2.0 * c1.ricci_norm_sq[i] + gauge.xi[i] * r_r[i])
        .collect();
    let scalar_residual = relative(&lhs, &rhs);

    let dvol = (volume(&s2.wm) - volume(&s0.wm)) / (2.0 * dt);
    let total = -integrate_bulk(&s1.wm, &c1.scalar);
    let volume_residual = (dvol - total).abs() / total.abs().max(1.0);

    let mut gradient_residual = None;
    let mut branch_trusted = true;
    if let Some(p) = branch_p {
        let family = vec![
            (s0.t, s0.wm.clone()),
            (s1.t, s1.wm.clone()),
            (s2.t, s2.wm.clone()),
        ];
        let seed = RadialField::constant(s0.wm.len(), 1.0);
        let branch = continue_branch(&family, p, &seed, DEFAULT_JUMP_FACTOR)?;
        branch_trusted = branch.iter().all(|b| !b.jump);
        let grad_sq = |k: usize| radial_laplacian(&family[k].1, &branch[k].solution.u).grad_sq;
        let (g0, g2) = (grad_sq(0), grad_sq(2));
        let u1 = &branch[1].solution.u;
        let h: Vec<f64> = branch[0]
            .solution
            .u
            .iter()
            .zip(&branch[2].solution.u)
            .map(|(a, b)| (b - a) / (2.0 * dt))
            .collect();
        let u_s = radial_laplacian(&s1.wm, u1).u_s;
        let h_s = radial_laplacian(&s1.wm, &h).u_s;
        let lhs: Vec<f64> = g0
            .iter()
            .zip(&g2)
            .map(|(a, b)| (b - a) / (2.0 * dt))
            .collect();
        // (L_X g)(∂_s, ∂_s) = 2 (ξh)_r / h = 2 (σ + λ_r).
        let rhs: Vec<f64> = (0..u_s.len())
            .map(|i| {
                let lie = 2.0 * (gauge.sigma + c1.lambda_radial[i]);
                (2.0 * c1.lambda_radial[i] - lie) * u_s[i] * u_s[i] + 2.0 * u_s[i] * h_s[i]
            })
            .collect();
        gradient_residual = Some(relative(&lhs, &rhs));
    }

    Ok(FlowIdentityReport {
        dt,
        t: s1.t,
        scalar_residual,
        volume_residual,
        gradient_residual,
        branch_trusted,
    })
}
