use nalgebra::{DMatrix, DVector};

use super::{
    boundary_slope, Discretization, HistoryEntry, Phase, Residuals, SubcriticalProblem,
    YamabeSolution,
};
use crate::error::{LabError, Result};
use crate::warped::{volume, RadialField};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Explicit gradient iterations before Newton.
    pub warm_iterations: usize,
    pub max_newton: usize,
    /// Target max-norm of the Euler–Lagrange residual, relative to
    /// `max(1, |Y|, max |R|)`.
    pub tolerance: f64,
    /// Largest residual accepted when Newton stalls at rounding level.
    pub accept: f64,
    /// Smallest Newton damping factor before giving up on positivity.
    pub damping_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            warm_iterations: 200,
            max_newton: 40,
            tolerance: 1e-12,
            accept: 1e-8,
            damping_floor: 2f64.powi(-20),
        }
    }
}

pub fn solve_subcritical(
    problem: &SubcriticalProblem,
    init: Option<&RadialField>,
) -> Result<YamabeSolution> {
    solve_subcritical_with(problem, init, &SolverOptions::default())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn normalize(d: &Discretization, u: &mut [f64]) {
    let s = d.norm(u).powf(-1.0 / (d.p + 1.0));
    u.iter_mut().for_each(|v| *v *= s);
}

/// Normalized gradient descent on the quotient, then damped Newton on the
/// Euler–Lagrange system extended by the normalization, with `Y` as unknown.
pub fn solve_subcritical_with(
    problem: &SubcriticalProblem,
    init: Option<&RadialField>,
    opts: &SolverOptions,
) -> Result<YamabeSolution> {
    let wm = problem.metric();
    let p = problem.p();
    let d = Discretization::new(wm, p)?;
    let len = d.len();
    let mut u: Vec<f64> = match init {
        Some(v) => {
            if v.len() != len {
                return Err(LabError::invalid(
                    "initial guess length does not match grid",
                ));
            }
            if let Some(i) = v.iter().position(|&x| !(x > 0.0)) {
                return Err(LabError::invalid(format!(
                    "initial guess must be positive at node {i}"
                )));
            }
            v.to_vec()
        }
        None => vec![volume(wm).powf(-1.0 / (p + 1.0)); len],
    };
    normalize(&d, &mut u);
    let mut y = d.quotient(&u)?;
    let mut history = Vec::new();
    let scale = 1f64.max(max_abs(&d.scalar));

    // Explicit descent, stable for steps below the inverse spectral radius.
    let kmat = d.stiffness_matrix();
    let diag_max = (0..len)
        .map(|i| d.a * kmat.row(i).iter().map(|v| v.abs()).sum::<f64>() / d.weights[i])
        .fold(0.0f64, f64::max);
    let tau = 0.5 / (diag_max + max_abs(&d.scalar) + p * y.abs());
    let mut el = max_abs(&d.residual(&u, y));
    history.push(HistoryEntry {
        iter: 0,
        phase: Phase::Gradient,
        el_residual: el,
        norm_residual: (d.norm(&u) - 1.0).abs(),
        y,
    });
    for iter in 1..=opts.warm_iterations {
        if el <= opts.tolerance * scale.max(y.abs()) {
            break;
        }
        let r = d.residual(&u, y);
        let trial: Vec<f64> = u.iter().zip(&r).map(|(v, g)| v - tau * g).collect();
        if trial.iter().any(|&v| !(v > 0.0)) {
            break;
        }
        u = trial;
        normalize(&d, &mut u);
        y = d.quotient(&u)?;
        el = max_abs(&d.residual(&u, y));
        history.push(HistoryEntry {
            iter,
            phase: Phase::Gradient,
            el_residual: el,
            norm_residual: (d.norm(&u) - 1.0).abs(),
            y,
        });
    }

    let merit = |u: &[f64], y: f64| {
        let el = max_abs(&d.residual(u, y));
        let nr = (d.norm(u) - 1.0).abs();
        (el, nr)
    };
    let (mut el, mut nr) = merit(&u, y);
    let mut stalls = 0;
    let mut iterations = 0;
    let tol = opts.tolerance * scale.max(y.abs());
    while !(el <= tol && nr <= 1e-13) {
        if iterations == opts.max_newton || stalls >= 3 {
            if el <= opts.accept && nr <= 1e-10 {
                break;
            }
            return Err(LabError::NotConverged {
                iterations,
                el_residual: el,
                norm_residual: nr,
            });
        }
        iterations += 1;
        let delta = newton_direction(&d, &kmat, &u, y)?;
        let mut lambda = 1.0;
        let (next_u, next_y) = loop {
            let cand: Vec<f64> = (0..len).map(|i| u[i] + lambda * delta[i]).collect();
            let cand_y = y + lambda * delta[len];
            if cand.iter().all(|&v| v > 0.0) {
                let (e, n) = merit(&cand, cand_y);
                if e + n < el + nr || lambda <= 1.0 / 64.0 {
                    break (cand, cand_y);
                }
            }
            lambda *= 0.5;
            if lambda < opts.damping_floor {
                return Err(LabError::PositivityLost {
                    iteration: iterations,
                });
            }
        };
        let (e, n) = merit(&next_u, next_y);
        if e + n >= 0.5 * (el + nr) {
            stalls += 1;
        } else {
            stalls = 0;
        }
        u = next_u;
        y = next_y;
        el = e;
        nr = n;
        history.push(HistoryEntry {
            iter: iterations,
            phase: Phase::Newton,
            el_residual: el,
            norm_residual: nr,
            y,
        });
    }

    Ok(YamabeSolution {
        p,
        y,
        residuals: Residuals {
            el,
            neumann: boundary_slope(wm, &u),
            norm: nr,
        },
        u,
        history,
    })
}

/// Solves the bordered Newton system for `(δu, δY)`.
fn newton_direction(
    d: &Discretization,
    kmat: &DMatrix<f64>,
    u: &[f64],
    y: f64,
) -> Result<Vec<f64>> {
    let len = d.len();
    let p = d.p;
    let mut j = DMatrix::<f64>::zeros(len + 1, len + 1);
    let mut rhs = DVector::<f64>::zeros(len + 1);
    let res = d.residual(u, y);
    for i in 0..len {
        let w = d.weights[i];
        for k in 0..len {
            j[(i, k)] = d.a * kmat[(i, k)] / w;
        }
        j[(i, i)] += d.scalar[i] - p * y * u[i].powf(p - 1.0);
        j[(i, len)] = -u[i].powf(p);
        j[(len, i)] = (p + 1.0) * w * u[i].powf(p);
        rhs[i] = -res[i];
    }
    rhs[len] = -(d.norm(u) - 1.0);
    j.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| LabError::Singular("Newton system is singular".into()))
}
