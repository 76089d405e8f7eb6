use serde::Serialize;

use crate::error::{LabError, Result};
use crate::flow::{advance, FlowParams, FlowState};
use crate::warped::{warped_curvature, RadialField};
use crate::yamabe::{continue_branch, BranchPoint, DEFAULT_JUMP_FACTOR};

#[derive(Clone, Debug)]
pub struct LhsOptions {
    /// Combine the `δt` and `δt/2` estimates to cancel the `δt²` term.
    pub richardson: bool,
    pub flow: FlowParams,
    pub jump_factor: f64,
}

impl Default for LhsOptions {
    fn default() -> Self {
        LhsOptions {
            richardson: true,
            flow: FlowParams::default(),
            jump_factor: DEFAULT_JUMP_FACTOR,
        }
    }
}

/// `d/dt Y_p` at the start of a flow, from a solution branch.
#[derive(Clone, Debug, Serialize)]
pub struct LhsEstimate {
    pub t: f64,
    pub dt: f64,
    /// Final estimate (extrapolated when requested).
    pub value: f64,
    /// One-sided second-order difference over `[t, t + 2δt]`.
    pub raw: f64,
    /// `(t, Y_p)` at every solve along the branch.
    pub samples: Vec<(f64, f64)>,
    pub max_jump_indicator: f64,
    pub trusted: bool,
    #[serde(skip)]
    pub branch: Vec<BranchPoint>,
}

/// `1e-4 / max |R|` at the state.
pub fn default_dt(state: &FlowState) -> Result<f64> {
    let r = warped_curvature(&state.wm)?
        .scalar
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(1e-4 / r.max(1.0))
}

fn one_sided(y0: f64, y1: f64, y2: f64, dt: f64) -> f64 {
    (-3.0 * y0 + 4.0 * y1 - y2) / (2.0 * dt)
}

/// Finite-difference derivative of `Y_p` along the flow from `state0`.
///
/// The flow cannot be run backwards, so the difference is one-sided:
/// `(-3 Y(t) + 4 Y(t+δt) - Y(t+2δt)) / 2δt`. With Richardson the same formula
/// at `δt/2` is combined as `(4 D(δt/2) - D(δt)) / 3`. Every solve is seeded by
/// continuation from the previous one; a branch jump marks the result untrusted.
pub fn lhs_finite_difference(
    state0: &FlowState,
    p: f64,
    dt: f64,
    opts: &LhsOptions,
) -> Result<LhsEstimate> {
    if !(dt > 0.0) {
        return Err(LabError::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    opts.flow.validate()?;
    let offsets: Vec<f64> = if opts.richardson {
        vec![0.0, 0.5 * dt, dt, 2.0 * dt]
    } else {
        vec![0.0, dt, 2.0 * dt]
    };
    let mut family = Vec::with_capacity(offsets.len());
    let mut s = state0.clone();
    let mut prev = 0.0;
    for &o in &offsets {
        s = advance(&s, o - prev, &opts.flow)?;
        prev = o;
        family.push((state0.t + o, s.wm.clone()));
    }
    let seed = RadialField::constant(state0.wm.len(), 1.0);
    let branch = continue_branch(&family, p, &seed, opts.jump_factor)?;
    let y: Vec<f64> = branch.iter().map(|b| b.solution.y).collect();
    let (raw, value) = if opts.richardson {
        let coarse = one_sided(y[0], y[2], y[3], dt);
        let fine = one_sided(y[0], y[1], y[2], 0.5 * dt);
        (coarse, (4.0 * fine - coarse) / 3.0)
    } else {
        let d = one_sided(y[0], y[1], y[2], dt);
        (d, d)
    };
    Ok(LhsEstimate {
        t: state0.t,
        dt,
        value,
        raw,
        samples: branch.iter().map(|b| (b.t, b.solution.y)).collect(),
        max_jump_indicator: branch.iter().fold(0.0f64, |m, b| m.max(b.jump_indicator)),
        trusted: branch.iter().all(|b| !b.jump),
        branch,
    })
}
