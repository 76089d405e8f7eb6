use nalgebra::DMatrix;
use serde::Serialize;

use super::curvature::profile;
use super::{sphere_area, warped_curvature, Domain, RadialField, Side, WarpedMetric};
use crate::error::{LabError, Result};
use crate::stencil::{d1, d2, trapezoid_weights, End};

/// Quadrature weights for `int_W phi dsigma`.
///
/// Composite trapezoid against `omega f^{n-1} h dr`; on a cap the pole node
/// carries the volume of the half cell `[0, dr/2]`.
pub fn quadrature_weights(wm: &WarpedMetric) -> Vec<f64> {
    let omega = sphere_area(wm.n() - 1);
    let dr = wm.dr();
    let k = wm.n() as i32 - 1;
    let mut w: Vec<f64> = trapezoid_weights(wm.len(), dr)
        .into_iter()
        .zip(wm.h().iter().zip(wm.f()))
        .map(|(t, (h, f))| omega * t * f.powi(k) * h)
        .collect();
    if wm.domain() == Domain::Cap {
        let fr0 = wm.pole_slope();
        w[0] = omega * wm.h()[0] * fr0.powi(k) * (0.5 * dr).powi(k + 1) / (k + 1) as f64;
    }
    w
}

pub fn integrate_bulk(wm: &WarpedMetric, phi: &[f64]) -> f64 {
    assert_eq!(phi.len(), wm.len(), "field length does not match grid");
    quadrature_weights(wm)
        .iter()
        .zip(phi)
        .map(|(w, p)| w * p)
        .sum()
}

/// `int_M phi dsigma_g`, summed over all boundary spheres.
pub fn integrate_boundary(wm: &WarpedMetric, phi: &[f64]) -> f64 {
    assert_eq!(phi.len(), wm.len(), "field length does not match grid");
    let omega = sphere_area(wm.n() - 1);
    wm.boundaries()
        .iter()
        .map(|&(_, i)| omega * phi[i] * wm.f()[i].powi(wm.n() as i32 - 1))
        .sum()
}

pub fn volume(wm: &WarpedMetric) -> f64 {
    quadrature_weights(wm).iter().sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryDatum {
    pub side: Side,
    pub node: usize,
    /// Mean curvature with respect to the outward normal.
    pub mean_curvature: f64,
    /// Radius of the boundary sphere.
    pub radius: f64,
}

pub fn boundary_data(wm: &WarpedMetric) -> Vec<BoundaryDatum> {
    let p = profile(wm, End::Open);
    let n = wm.n() as f64;
    wm.boundaries()
        .into_iter()
        .map(|(side, i)| BoundaryDatum {
            side,
            node: i,
            mean_curvature: (n - 1.0) * side.outward_sign() * p.f_s[i] / wm.f()[i],
            radius: wm.f()[i],
        })
        .collect()
}

pub(crate) fn max_abs_mean_curvature(wm: &WarpedMetric) -> f64 {
    boundary_data(wm)
        .iter()
        .fold(0.0f64, |m, b| m.max(b.mean_curvature.abs()))
}

#[derive(Clone, Debug)]
pub struct RadialLaplacian {
    pub laplacian: Vec<f64>,
    /// Arclength derivative `u_s`.
    pub u_s: Vec<f64>,
    /// `|grad u|^2 = u_s^2`.
    pub grad_sq: Vec<f64>,
}

/// `Delta u = u_ss + (n-1) (f_s / f) u_s` for a radial function.
pub fn radial_laplacian(wm: &WarpedMetric, u: &[f64]) -> RadialLaplacian {
    radial_laplacian_with(wm, u, End::Open)
}

/// [`radial_laplacian`] with `boundary` deciding how `u` continues past
/// boundary spheres.
pub(crate) fn radial_laplacian_with(
    wm: &WarpedMetric,
    u: &[f64],
    boundary: End,
) -> RadialLaplacian {
    assert_eq!(u.len(), wm.len(), "field length does not match grid");
    let dr = wm.dr();
    let n = wm.n() as f64;
    let left = match wm.domain() {
        Domain::Tube => boundary,
        Domain::Cap => wm.scalar_left(),
    };
    let u_r = d1(u, dr, left, boundary);
    let u_rr = d2(u, dr, left, boundary);
    let h_r = d1(wm.h(), dr, wm.ends(End::Open).2, End::Open);
    let prof = profile(wm, End::Open);
    let (h, f) = (wm.h(), wm.f());
    let mut lap = vec![0.0; u.len()];
    let mut u_s = vec![0.0; u.len()];
    for i in 0..u.len() {
        u_s[i] = u_r[i] / h[i];
        let u_ss = (u_rr[i] - u_r[i] * h_r[i] / h[i]) / (h[i] * h[i]);
        lap[i] = if wm.domain() == Domain::Cap && i == 0 {
            n * u_ss
        } else {
            u_ss + (n - 1.0) * prof.f_s[i] / f[i] * u_s[i]
        };
    }
    let grad_sq = u_s.iter().map(|v| v * v).collect();
    RadialLaplacian {
        laplacian: lap,
        u_s,
        grad_sq,
    }
}

/// The metric `w^{4/(n-2)} g`.
///
/// Mean curvature transforms as `H' = w^{-2/(n-2)} H` when `d_nu w = 0`; a
/// non-zero normal derivative is logged.
pub fn conformal_transform(wm: &WarpedMetric, w: &[f64]) -> Result<WarpedMetric> {
    if w.len() != wm.len() {
        return Err(LabError::invalid(
            "conformal factor length does not match grid",
        ));
    }
    if let Some(i) = w.iter().position(|&v| !(v > 0.0)) {
        return Err(LabError::invalid(format!(
            "conformal factor must be positive, got {} at node {i}",
            w[i]
        )));
    }
    let w_s = radial_laplacian(wm, w).u_s;
    for (side, i) in wm.boundaries() {
        let rel = (w_s[i] / w[i]).abs();
        if rel > 1e-6 {
            log::warn!(
                "conformal factor has normal derivative {rel:.3e} at {side:?} boundary; H is not preserved"
            );
        }
    }
    let alpha = 2.0 / (wm.n() as f64 - 2.0);
    let scale: Vec<f64> = w.iter().map(|v| v.powf(alpha)).collect();
    WarpedMetric::from_profiles(
        wm.n(),
        wm.domain(),
        wm.h().iter().zip(&scale).map(|(a, b)| a * b).collect(),
        wm.f().iter().zip(&scale).map(|(a, b)| a * b).collect(),
    )
}

/// A conformal metric with `H = 0` on every boundary sphere, and its factor `w`.
///
/// `w = exp(phi)` with `phi` quadratic in `r`, chosen so that
/// `d_nu w / w = -(n-2) H / (2(n-1))` at each boundary.
pub fn normalize_zero_mean_curvature(wm: &WarpedMetric) -> Result<(WarpedMetric, RadialField)> {
    let n = wm.n() as f64;
    let k = (n - 2.0) / (2.0 * (n - 1.0));
    let mut alpha_outer = 0.0;
    let mut alpha_inner = 0.0;
    if max_abs_mean_curvature(wm) <= 1e-8 {
        return Ok((wm.clone(), RadialField::constant(wm.len(), 1.0)));
    }
    for b in boundary_data(wm) {
        let h = wm.h()[b.node];
        match b.side {
            Side::Outer => alpha_outer = -h * k * b.mean_curvature,
            Side::Inner => alpha_inner = -h * k * b.mean_curvature,
        }
    }
    let w = RadialField::from_fn(wm, |r| {
        (0.5 * alpha_outer * r * r + 0.5 * alpha_inner * (1.0 - r) * (1.0 - r)).exp()
    });
    let out = conformal_transform(wm, &w)?;
    Ok((out, w))
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityReport {
    /// Max Frobenius deviation `|Ric^T - f~ g^T|` over boundary spheres.
    pub residual: f64,
    /// Best proportionality factor `f~` per boundary sphere.
    pub proportionality: Vec<(Side, f64)>,
}

/// Tangential Ricci block against tangential metric block on each boundary sphere.
pub fn compatibility_residual(wm: &WarpedMetric) -> Result<CompatibilityReport> {
    let curv = warped_curvature(wm)?;
    let m = wm.n() - 1;
    let mut residual = 0.0f64;
    let mut prop = Vec::new();
    for (side, i) in wm.boundaries() {
        // Coordinate frame on the sphere scaled so that g_S = identity at the point.
        let f2 = wm.f()[i] * wm.f()[i];
        let g_t = DMatrix::<f64>::identity(m, m) * f2;
        let ric_t = DMatrix::<f64>::identity(m, m) * (curv.lambda_sphere[i] * f2);
        let g_inv = g_t
            .clone()
            .try_inverse()
            .ok_or_else(|| LabError::Singular("degenerate boundary metric".into()))?;
        let ftilde = (&ric_t * g_inv).trace() / m as f64;
        residual = residual.max((ric_t - g_t * ftilde).norm());
        prop.push((side, ftilde));
    }
    Ok(CompatibilityReport {
        residual,
        proportionality: prop,
    })
}
