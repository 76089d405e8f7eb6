use serde::Serialize;

use super::WarpedMetric;
use crate::error::{LabError, Result};
use crate::stencil::{d1, d2, end_slope, even_extrapolate, End};

/// Ricci eigenvalues and derived scalars of a warped metric, per node.
#[derive(Clone, Debug, Serialize)]
pub struct WarpedCurvature {
    /// Ricci eigenvalue on the radial unit vector, `-(n-1) f_ss / f`.
    pub lambda_radial: Vec<f64>,
    /// Ricci eigenvalue on unit vectors tangent to the spheres.
    pub lambda_sphere: Vec<f64>,
    pub scalar: Vec<f64>,
    /// `|Ric^0|^2` from the eigenvalue decomposition.
    pub tracefree_norm_sq: Vec<f64>,
    /// `|Ric|^2`.
    pub ricci_norm_sq: Vec<f64>,
    /// Arclength derivative `f_s`.
    pub f_s: Vec<f64>,
}

/// Arclength derivatives of the profile.
pub(crate) struct Profile {
    pub f_s: Vec<f64>,
    pub f_ss: Vec<f64>,
}

pub(crate) fn profile(wm: &WarpedMetric, boundary: End) -> Profile {
    let (fl, fr, hl) = wm.ends(boundary);
    let dr = wm.dr();
    let mut f_r = d1(wm.f(), dr, fl, fr);
    let mut f_rr = d2(wm.f(), dr, fl, fr);
    if wm.domain() == super::Domain::Cap {
        // On the pole half, differentiate the even quotient φ = f / r, whose
        // stencil errors vanish at the pole; the 1/f² in λ_sph would otherwise
        // amplify them next to it.
        let mut phi: Vec<f64> = wm.nodes().zip(wm.f()).map(|(r, f)| f / r).collect();
        phi[0] = wm.pole_slope();
        let phi_r = d1(&phi, dr, End::Even, End::Open);
        let phi_rr = d2(&phi, dr, End::Even, End::Open);
        for (i, r) in wm.nodes().enumerate().take(wm.len() / 2) {
            f_r[i] = phi[i] + r * phi_r[i];
            f_rr[i] = 2.0 * phi_r[i] + r * phi_rr[i];
        }
    }
    if boundary == End::Open {
        for (side, i) in wm.boundaries() {
            f_r[i] = end_slope(wm.f(), dr, side == super::Side::Outer);
        }
    }
    let h_r = d1(wm.h(), dr, hl, End::Open);
    let h = wm.h();
    let f_s = f_r.iter().zip(h).map(|(a, b)| a / b).collect();
    let f_ss = (0..h.len())
        .map(|i| (f_rr[i] - f_r[i] * h_r[i] / h[i]) / (h[i] * h[i]))
        .collect();
    Profile { f_s, f_ss }
}

/// Curvature with `boundary` deciding how `f` is continued past boundary spheres.
pub(crate) fn curvature_with_policy(wm: &WarpedMetric, boundary: End) -> Result<WarpedCurvature> {
    let n = wm.n() as f64;
    let Profile { f_s, f_ss } = profile(wm, boundary);
    let f = wm.f();
    let len = wm.len();
    let start = match wm.domain() {
        super::Domain::Tube => 0,
        super::Domain::Cap => 1,
    };
    let mut lr = vec![0.0; len];
    let mut ls = vec![0.0; len];
    for i in start..len {
        if !(f[i] > 0.0) {
            return Err(LabError::Singular(format!("f = {} at node {i}", f[i])));
        }
        lr[i] = -(n - 1.0) * f_ss[i] / f[i];
        ls[i] = (-f[i] * f_ss[i] - (n - 2.0) * f_s[i] * f_s[i] + (n - 2.0)) / (f[i] * f[i]);
    }
    if start == 1 {
        // Isotropic at a smooth pole; both eigenvalues are even in r.
        let a = even_extrapolate(lr[1], lr[2], lr[3]);
        let b = even_extrapolate(ls[1], ls[2], ls[3]);
        lr[0] = 0.5 * (a + b);
        ls[0] = lr[0];
    }
    let mut scalar = vec![0.0; len];
    let mut tf = vec![0.0; len];
    let mut rn = vec![0.0; len];
    for i in 0..len {
        let r = lr[i] + (n - 1.0) * ls[i];
        scalar[i] = r;
        tf[i] = (lr[i] - r / n).powi(2) + (n - 1.0) * (ls[i] - r / n).powi(2);
        rn[i] = lr[i] * lr[i] + (n - 1.0) * ls[i] * ls[i];
    }
    Ok(WarpedCurvature {
        lambda_radial: lr,
        lambda_sphere: ls,
        scalar,
        tracefree_norm_sq: tf,
        ricci_norm_sq: rn,
        f_s,
    })
}

/// Closed-form Ricci eigenvalues, scalar curvature and `|Ric^0|^2`.
///
/// Boundary nodes use one-sided stencils; a cap pole takes the isotropic limit.
pub fn warped_curvature(wm: &WarpedMetric) -> Result<WarpedCurvature> {
    curvature_with_policy(wm, End::Open)
}
