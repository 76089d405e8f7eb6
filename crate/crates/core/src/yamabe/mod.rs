//! Sub-critical and critical relative Yamabe problems in the warped class.
//!
//! The energy is discretized as a sum over cell faces against the node weights
//! of [`quadrature_weights`], so the discrete Euler–Lagrange system is exactly
//! the stationarity condition of the discrete quotient and the Neumann
//! condition is natural.

mod branch;
mod solve;

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::warped::{
    max_abs_mean_curvature, quadrature_weights, radial_laplacian, sphere_area, warped_curvature,
    Domain, RadialField, WarpedMetric,
};

pub use branch::{
    continue_branch, yamabe_metric, yamabe_metric_defects, BranchPoint, YamabeMetricDefects,
    DEFAULT_JUMP_FACTOR,
};
pub use solve::{solve_subcritical, solve_subcritical_with, SolverOptions};

/// Largest `|H|` accepted for a problem metric.
pub const H_TOLERANCE: f64 = 1e-6;

/// `(n + 2) / (n - 2)`.
pub fn critical_exponent(n: usize) -> f64 {
    (n as f64 + 2.0) / (n as f64 - 2.0)
}

/// `4 (n - 1) / (n - 2)`.
pub fn conformal_coefficient(n: usize) -> f64 {
    4.0 * (n as f64 - 1.0) / (n as f64 - 2.0)
}

pub(crate) fn is_critical(n: usize, p: f64) -> bool {
    (p - critical_exponent(n)).abs() <= 1e-12 * critical_exponent(n)
}

/// A warped metric with minimal boundary and an exponent `1 < p <= (n+2)/(n-2)`.
#[derive(Clone, Debug)]
pub struct SubcriticalProblem {
    wm: WarpedMetric,
    p: f64,
}

impl SubcriticalProblem {
    pub fn new(wm: WarpedMetric, p: f64) -> Result<Self> {
        let crit = critical_exponent(wm.n());
        if !(p > 1.0 && p <= crit * (1.0 + 1e-12)) {
            return Err(LabError::invalid(format!(
                "exponent p = {p} outside (1, {crit}] for n = {}",
                wm.n()
            )));
        }
        let h = max_abs_mean_curvature(&wm);
        if h > H_TOLERANCE {
            return Err(LabError::invalid(format!(
                "boundary mean curvature {h:e} exceeds {H_TOLERANCE:e}"
            )));
        }
        Ok(SubcriticalProblem { wm, p })
    }

    pub fn metric(&self) -> &WarpedMetric {
        &self.wm
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// One face of the gradient energy: `coeff · (Σ_k weights[k] u[nodes[k]])²`.
#[derive(Clone, Debug)]
pub(crate) struct Face {
    pub nodes: [usize; 4],
    pub weights: [f64; 4],
    pub coeff: f64,
}

impl Face {
    /// Evaluated in difference form; the weights sum to zero.
    pub fn gradient(&self, u: &[f64]) -> f64 {
        let base = u[self.nodes[1]];
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&j, w)| w * (u[j] - base))
            .sum()
    }
}

/// Variational discretization shared by the quotient and the solver.
///
/// The gradient energy is a sum over cell faces of `ω (f^{n-1}/h) u_r² dr`.
/// On a tube the face gradient is the fourth-order four-point stencil with
/// even reflection at both ends, so every node sees the interior operator of
/// the doubled domain. A cap pole has no such reflection for the flux, and caps
/// use two-point faces (second order).
#[derive(Clone, Debug)]
pub(crate) struct Discretization {
    pub a: f64,
    pub p: f64,
    pub weights: Vec<f64>,
    pub faces: Vec<Face>,
    pub scalar: Vec<f64>,
}

impl Discretization {
    pub fn new(wm: &WarpedMetric, p: f64) -> Result<Self> {
        let omega = sphere_area(wm.n() - 1);
        let k = wm.n() as i32 - 1;
        let dr = wm.dr();
        let last = wm.intervals() as isize;
        let c: Vec<f64> = wm
            .h()
            .iter()
            .zip(wm.f())
            .map(|(h, f)| f.powi(k) / h)
            .collect();
        let reflect = |j: isize| -> usize {
            if j < 0 {
                (-j) as usize
            } else if j > last {
                (2 * last - j) as usize
            } else {
                j as usize
            }
        };
        let faces = (0..last)
            .map(|i| match wm.domain() {
                Domain::Tube => {
                    let nodes = [reflect(i - 1), reflect(i), reflect(i + 1), reflect(i + 2)];
                    let cf =
                        (-c[nodes[0]] + 9.0 * c[nodes[1]] + 9.0 * c[nodes[2]] - c[nodes[3]]) / 16.0;
                    let s = 1.0 / (24.0 * dr);
                    Face {
                        nodes,
                        weights: [s, -27.0 * s, 27.0 * s, -s],
                        coeff: omega * cf * dr,
                    }
                }
                Domain::Cap => {
                    let (i, j) = (i as usize, i as usize + 1);
                    let fm = 0.5 * (wm.f()[i] + wm.f()[j]);
                    let hm = 0.5 * (wm.h()[i] + wm.h()[j]);
                    Face {
                        nodes: [i, j, i, j],
                        weights: [-1.0 / dr, 1.0 / dr, 0.0, 0.0],
                        coeff: omega * fm.powi(k) / hm * dr,
                    }
                }
            })
            .collect();
        Ok(Discretization {
            a: conformal_coefficient(wm.n()),
            p,
            weights: quadrature_weights(wm),
            faces,
            scalar: warped_curvature(wm)?.scalar,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// `K u`, half the gradient of the face energy.
    pub fn stiffness(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for face in &self.faces {
            let g = face.coeff * face.gradient(u);
            for (&j, w) in face.nodes.iter().zip(&face.weights) {
                out[j] += g * w;
            }
        }
        out
    }

    /// The matrix of [`Self::stiffness`].
    pub fn stiffness_matrix(&self) -> DMatrix<f64> {
        let len = self.len();
        let mut k = DMatrix::zeros(len, len);
        for face in &self.faces {
            for (&i, wi) in face.nodes.iter().zip(&face.weights) {
                for (&j, wj) in face.nodes.iter().zip(&face.weights) {
                    k[(i, j)] += face.coeff * wi * wj;
                }
            }
        }
        k
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let grad: f64 = self
            .faces
            .iter()
            .map(|f| f.coeff * f.gradient(u).powi(2))
            .sum();
        let pot: f64 = (0..u.len())
            .map(|i| self.weights[i] * self.scalar[i] * u[i] * u[i])
            .sum();
        self.a * grad + pot
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        (0..u.len())
            .map(|i| self.weights[i] * u[i].powf(self.p + 1.0))
            .sum()
    }

    pub fn quotient(&self, u: &[f64]) -> Result<f64> {
        let norm = self.norm(u);
        if !(norm > 0.0) {
            return Err(LabError::invalid("field has zero L^{p+1} norm"));
        }
        Ok(self.energy(u) / norm.powf(2.0 / (self.p + 1.0)))
    }

    /// Euler–Lagrange residual `a K u / w + R u - Y u^p` per node.
    pub fn residual(&self, u: &[f64], y: f64) -> Vec<f64> {
        let ku = self.stiffness(u);
        (0..u.len())
            .map(|i| {
                self.a * ku[i] / self.weights[i] + self.scalar[i] * u[i] - y * u[i].powf(self.p)
            })
            .collect()
    }
}

/// `[∫ (a |∇u|² + R u²) dσ] / [∫ u^{p+1} dσ]^{2/(p+1)}` for a positive field.
pub fn yamabe_quotient(wm: &WarpedMetric, u: &[f64], p: f64) -> Result<f64> {
    if u.len() != wm.len() {
        return Err(LabError::invalid("field length does not match grid"));
    }
    if let Some(i) = u.iter().position(|&v| !(v > 0.0)) {
        return Err(LabError::invalid(format!(
            "field must be positive, got {} at node {i}",
            u[i]
        )));
    }
    Discretization::new(wm, p)?.quotient(u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub el: f64,
    pub neumann: f64,
    pub norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Gradient,
    Newton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub phase: Phase,
    pub el_residual: f64,
    pub norm_residual: f64,
    #[serde(rename = "Y")]
    pub y: f64,
}

/// A normalized positive solution of the Euler–Lagrange system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YamabeSolution {
    pub p: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub u: Vec<f64>,
    pub residuals: Residuals,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<HistoryEntry>,
}

impl YamabeSolution {
    pub fn u(&self) -> RadialField {
        RadialField::new(self.u.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Convergence history as CSV with columns `iter,phase,el_residual,norm_residual,Y`.
    pub fn write_history_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for entry in &self.history {
            w.serialize(entry)?;
        }
        w.flush().map_err(|e| LabError::io("<csv>", e))?;
        Ok(())
    }
}

pub(crate) fn boundary_slope(wm: &WarpedMetric, u: &[f64]) -> f64 {
    let u_s = radial_laplacian(wm, u).u_s;
    wm.boundaries()
        .iter()
        .fold(0.0f64, |m, &(_, i)| m.max(u_s[i].abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quotient_of_constants() {
        let cyl = WarpedMetric::unit_volume_cylinder(3, 64, 1.0).unwrap();
        let one = vec![1.0; cyl.len()];
        assert!((yamabe_quotient(&cyl, &one, 5.0).unwrap() - 2.0).abs() < 1e-12);
        let hemi = WarpedMetric::unit_volume_hemisphere(3, 256).unwrap();
        let one = vec![1.0; hemi.len()];
        let q = yamabe_quotient(&hemi, &one, 5.0).unwrap();
        assert!((q - 6.0 * PI.powf(4.0 / 3.0)).abs() < 1e-5, "{q}");
    }

    #[test]
    fn quotient_is_scale_invariant() {
        let wm = WarpedMetric::perturbed_cylinder(3, 64, 0.05).unwrap();
        let u: Vec<f64> = wm.nodes().map(|r| 1.0 + 0.2 * r * r).collect();
        let u2: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let a = yamabe_quotient(&wm, &u, 3.0).unwrap();
        let b = yamabe_quotient(&wm, &u2, 3.0).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs());
        assert!(yamabe_quotient(&wm, &vec![0.0; wm.len()], 3.0).is_err());
    }

    #[test]
    fn problem_validation() {
        let cyl = WarpedMetric::unit_volume_cylinder(3, 32, 1.0).unwrap();
        assert!(SubcriticalProblem::new(cyl.clone(), 1.0).is_err());
        assert!(SubcriticalProblem::new(cyl.clone(), 5.5).is_err());
        assert!(SubcriticalProblem::new(cyl, 5.0).is_ok());
        let cap = WarpedMetric::round_cap(3, 64, 1.0, PI / 3.0).unwrap();
        assert!(SubcriticalProblem::new(cap, 2.0).is_err());
    }

    #[test]
    fn stiffness_matches_energy_gradient() {
        let wm = WarpedMetric::perturbed_cylinder(3, 32, 0.05).unwrap();
        let d = Discretization::new(&wm, 3.0).unwrap();
        let u: Vec<f64> = wm.nodes().map(|r| 1.0 + 0.3 * (3.0 * r).sin()).collect();
        let ku = d.stiffness(&u);
        for i in [0, 7, 32] {
            let eps = 1e-6;
            let mut up = u.clone();
            up[i] += eps;
            let mut um = u.clone();
            um[i] -= eps;
            let fd = (d.energy(&up) - d.energy(&um)) / (2.0 * eps);
            let exact = 2.0 * d.a * ku[i] + 2.0 * d.weights[i] * d.scalar[i] * u[i];
            assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0));
        }
    }
}
