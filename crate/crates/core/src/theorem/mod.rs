//! Evolution of the sub-critical Yamabe constants along the boundary-value
//! Ricci flow: the term-by-term formula, its finite-difference counterpart and
//! the critical-exponent consequences.

mod case;
mod lhs;
mod variation;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::stencil::End;
use crate::warped::{
    curvature_with_policy, integrate_bulk, radial_laplacian, radial_laplacian_with, WarpedMetric,
};
use crate::yamabe::{conformal_coefficient, Discretization};

pub use case::{
    verify_theorem_b, write_summary_csv, Case, Geometry, TheoremBReport, Thresholds, VerifyOptions,
};
pub use lhs::{default_dt, lhs_finite_difference, LhsEstimate, LhsOptions};
pub use variation::{
    monotonicity_check, verify_first_variation, yamabe_initial_rate, FirstVariationReport,
    MonotonicityOptions, MonotonicityReport, YSample,
};

/// Largest `|∫ u^{p+1} dσ - 1|` accepted for a solution.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Largest Euler–Lagrange residual accepted, relative to `max(1, |Y|, max |R|)`.
pub const EL_TOLERANCE: f64 = 1e-8;
/// Largest measured `|∂_ν u|` accepted, relative to `max(1, max |u_s|)`.
pub const NEUMANN_TOLERANCE: f64 = 1e-5;
/// Largest boundary line accepted in the warped class.
pub const BOUNDARY_LINE_TOLERANCE: f64 = 1e-10;

/// `2/n - (p-1)/(p+1)`, exactly zero at the critical exponent.
pub fn coefficient_factor(n: usize, p: f64) -> f64 {
    if crate::yamabe::is_critical(n, p) {
        return 0.0;
    }
    2.0 / n as f64 - (p - 1.0) / (p + 1.0)
}

/// The four lines of the evolution formula for `d/dt Y_p`.
#[derive(Clone, Debug, Serialize)]
pub struct RhsTerms {
    /// `∫ 2a Ric^0(∇u, ∇u) + 2 |Ric^0|² u²` with `a = 4(n-1)/(n-2)`.
    pub ric0_terms: f64,
    pub factor: f64,
    /// `factor · ∫ (a R |∇u|² + R² u²)`.
    pub coefficient_line: f64,
    /// `∫ u² ΔR - a/(p+1) R Δu²`.
    pub laplacian_line: f64,
    /// `-2a ∫_M (2u Ric(∇u, ν) + u ∂_ν h)`.
    pub boundary_line: f64,
    pub total: f64,
    /// Largest pointwise boundary integrand.
    pub boundary_integrand: f64,
    pub max_traceless_sq: f64,
}

impl RhsTerms {
    pub fn sum(&self) -> f64 {
        self.ric0_terms + self.coefficient_line + self.laplacian_line + self.boundary_line
    }
}

/// Pointwise boundary integrand `2u Ric(∇u, ν) + u ∂_ν h` at one boundary sphere.
///
/// Ricci is assembled in an orthonormal frame `(e_1, ..., e_{n-1}, ν)` from the
/// warped eigenvalues. With `∂_ν u = 0`, `Ric(∇u, ν)` reduces to the sum of
/// `Ric(e_a, ν) du(e_a)` over tangential frame vectors, and `∂_ν h` to minus
/// twice that sum; `u` radial has `du(e_a) = 0`.
fn boundary_integrand(n: usize, lambda_radial: f64, lambda_sphere: f64, u: f64) -> f64 {
    let nu = DVector::from_fn(n, |i, _| if i == n - 1 { 1.0 } else { 0.0 });
    let mut ric = DMatrix::<f64>::identity(n, n) * lambda_sphere;
    ric[(n - 1, n - 1)] = lambda_radial;
    let du = DVector::<f64>::zeros(n);
    let tangential: f64 = (0..n - 1)
        .map(|a| {
            let e = DVector::from_fn(n, |i, _| if i == a { 1.0 } else { 0.0 });
            (e.transpose() * &ric * &nu)[(0, 0)] * e.dot(&du)
        })
        .sum();
    let normal_derivative_h = -2.0 * tangential;
    2.0 * u * tangential + u * normal_derivative_h
}

/// Right side of the evolution formula at a solved pair `(wm, u)` of exponent `p`.
pub fn rhs_theorem_b(wm: &WarpedMetric, u: &[f64], p: f64) -> Result<RhsTerms> {
    let n = wm.n();
    if u.len() != wm.len() {
        return Err(LabError::invalid("field length does not match grid"));
    }
    if let Some(i) = u.iter().position(|&v| !(v > 0.0)) {
        return Err(LabError::invalid(format!(
            "u must be positive, got {} at node {i}",
            u[i]
        )));
    }
    let disc = Discretization::new(wm, p)?;
    let norm = disc.norm(u);
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(LabError::invalid(format!("∫ u^(p+1) = {norm}, expected 1")));
    }
    let y = disc.quotient(u)?;
    let curv = curvature_with_policy(wm, End::Even)?;
    let r = &curv.scalar;
    let scale = r.iter().fold(1.0f64.max(y.abs()), |m, v| m.max(v.abs()));
    let el = disc
        .residual(u, y)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        / scale;
    if el > EL_TOLERANCE {
        return Err(LabError::invalid(format!(
            "Euler–Lagrange residual {el:e} exceeds {EL_TOLERANCE:e}"
        )));
    }
    let lap_u = radial_laplacian(wm, u);
    let slope_scale = lap_u.u_s.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let slope = wm
        .boundaries()
        .iter()
        .fold(0.0f64, |m, &(_, i)| m.max(lap_u.u_s[i].abs()));
    if slope > NEUMANN_TOLERANCE * slope_scale {
        return Err(LabError::NeumannViolated {
            measured: slope,
            tolerance: NEUMANN_TOLERANCE * slope_scale,
        });
    }

    let nf = n as f64;
    let a = conformal_coefficient(n);
    let len = u.len();
    let u_sq: Vec<f64> = u.iter().map(|v| v * v).collect();
    // The lab's metrics are restrictions of reflection-symmetric doubles, so
    // R and u² continue evenly past boundary spheres.
    let lap_r = radial_laplacian_with(wm, r, End::Even).laplacian;
    let lap_u_sq = radial_laplacian_with(wm, &u_sq, End::Even).laplacian;

    let ric0: Vec<f64> = (0..len)
        .map(|i| {
            let ric0_grad = (curv.lambda_radial[i] - r[i] / nf) * lap_u.grad_sq[i];
            2.0 * a * ric0_grad + 2.0 * curv.tracefree_norm_sq[i] * u_sq[i]
        })
        .collect();
    let coeff: Vec<f64> = (0..len)
        .map(|i| a * r[i] * lap_u.grad_sq[i] + r[i] * r[i] * u_sq[i])
        .collect();
    let lapl: Vec<f64> = (0..len)
        .map(|i| u_sq[i] * lap_r[i] - a / (p + 1.0) * r[i] * lap_u_sq[i])
        .collect();

    let omega = crate::warped::sphere_area(n - 1);
    let mut boundary_line = 0.0;
    let mut boundary_max = 0.0f64;
    for (_, i) in wm.boundaries() {
        let b = boundary_integrand(n, curv.lambda_radial[i], curv.lambda_sphere[i], u[i]);
        boundary_max = boundary_max.max(b.abs());
        boundary_line += omega * wm.f()[i].powi(n as i32 - 1) * b;
    }
    boundary_line *= -2.0 * a;
    if boundary_max > BOUNDARY_LINE_TOLERANCE {
        return Err(LabError::invalid(format!(
            "warped boundary integrand {boundary_max:e} does not vanish"
        )));
    }

    let factor = coefficient_factor(n, p);
    let mut terms = RhsTerms {
        ric0_terms: integrate_bulk(wm, &ric0),
        factor,
        coefficient_line: factor * integrate_bulk(wm, &coeff),
        laplacian_line: integrate_bulk(wm, &lapl),
        boundary_line,
        total: 0.0,
        boundary_integrand: boundary_max,
        max_traceless_sq: curv.tracefree_norm_sq.iter().fold(0.0f64, |m, v| m.max(*v)),
    };
    terms.total = terms.sum();
    Ok(terms)
}

/// Observed order from errors at two resolutions differing by `ratio`.
pub fn observed_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse.abs() / fine.abs()).ln() / ratio.ln()
}

/// Observed order from a quantity at three successive refinements, without
/// knowing its limit.
pub fn cauchy_order(q: [f64; 3], ratio: f64) -> f64 {
    observed_order(q[0] - q[1], q[1] - q[2], ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yamabe::{critical_exponent, solve_subcritical, SubcriticalProblem};

    #[test]
    fn factor_vanishes_at_critical_exponent() {
        for n in [3i64, 4, 5] {
            // 2/n - (p-1)/(p+1) with p = (n+2)/(n-2), in integers:
            // numerator 2(p+1) - n(p-1) scaled by (n-2).
            let (num, den) = (n + 2, n - 2);
            assert_eq!(2 * (num + den) - n * (num - den), 0);
            assert_eq!(
                coefficient_factor(n as usize, critical_exponent(n as usize)),
                0.0
            );
        }
        assert!(coefficient_factor(3, 2.0) > 0.0);
    }

    #[test]
    fn cylinder_terms() {
        let wm = WarpedMetric::unit_volume_cylinder(3, 64, 1.0).unwrap();
        for (p, coeff) in [(2.0, 4.0 / 3.0), (5.0, 0.0)] {
            let u = vec![1.0; wm.len()];
            let t = rhs_theorem_b(&wm, &u, p).unwrap();
            assert!((t.ric0_terms - 4.0 / 3.0).abs() < 1e-12, "{t:?}");
            assert!((t.coefficient_line - coeff).abs() < 1e-12, "{t:?}");
            assert!(t.laplacian_line.abs() < 1e-12);
            assert_eq!(t.boundary_line, 0.0);
            assert_eq!(t.total, t.sum());
        }
    }

    #[test]
    fn rejects_unsolved_fields() {
        let wm = WarpedMetric::perturbed_cylinder(3, 64, 0.05).unwrap();
        let u = vec![1.0; wm.len()];
        assert!(rhs_theorem_b(&wm, &u, 2.0).is_err());
        let sol =
            solve_subcritical(&SubcriticalProblem::new(wm.clone(), 2.0).unwrap(), None).unwrap();
        let t = rhs_theorem_b(&wm, &sol.u, 2.0).unwrap();
        assert!(t.boundary_integrand <= BOUNDARY_LINE_TOLERANCE);
        assert!((t.total - t.sum()).abs() <= 1e-12 * t.total.abs());
    }

    #[test]
    fn orders() {
        assert!((observed_order(4e-4, 1e-4, 2.0) - 2.0).abs() < 1e-12);
        assert!((cauchy_order([1.0 + 1.0, 1.0 + 0.25, 1.0 + 0.0625], 2.0) - 2.0).abs() < 1e-12);
    }
}
