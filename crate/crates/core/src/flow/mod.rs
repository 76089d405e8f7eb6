//! Boundary-value Ricci flow in the warped class.
//!
//! The flow is integrated as `∂_t g = -2 Ric + L_X g` with the radial field
//! `X = ξ ∂_r` chosen so that `h` keeps its initial shape, `h(r, t) = s(t) h(r, 0)`.
//! This reads `∂_t h = σ h` and `∂_t f = -λ_sph f + ξ f_r` with
//! `ξ h = ∫_0^r (σ + λ_r) h` and `σ` fixed by `ξ = 0` at `r = 1`. The field
//! vanishes on boundary spheres and at a pole, so `g(t)` is the Ricci flow
//! pulled back by diffeomorphisms fixing the boundary. Without the gauge, `h`
//! has no smoothing and grid-scale modes grow at a cap pole.
//!
//! The boundary condition `f_s = 0` (equivalently `H = 0`)
//! enters through even reflection of `f` in the curvature stencils; the
//! boundary values of `f` are slaved to the interior by the discrete Neumann
//! condition at every stage, so the integrator acts on the interior unknowns.

mod identities;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::stencil::{cumulative_integral, d1, End};
use crate::warped::{
    boundary_data, curvature_with_policy, max_abs_mean_curvature, volume, Domain, Side,
    WarpedMetric,
};

pub use identities::{verify_flow_identities, FlowIdentityReport};

/// Largest boundary `|H|` accepted after a step.
pub const H_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4,
    ImplicitEuler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub cfl: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Record every this many accepted steps (the final state is always recorded).
    pub monitor_every: usize,
    /// Optional cap on the step below the CFL bound.
    pub max_dt: Option<f64>,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            cfl: 0.2,
            t_end: 0.0,
            scheme: Scheme::Rk4,
            monitor_every: 100,
            max_dt: None,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(LabError::invalid(format!(
                "cfl must lie in (0, 0.5], got {}",
                self.cfl
            )));
        }
        if !(self.t_end >= 0.0) {
            return Err(LabError::invalid("t_end must be non-negative"));
        }
        if self.monitor_every == 0 {
            return Err(LabError::invalid("monitor_every must be positive"));
        }
        if let Some(dt) = self.max_dt {
            if !(dt > 0.0) {
                return Err(LabError::invalid("max_dt must be positive"));
            }
        }
        Ok(())
    }

    /// `cfl · (min arclength spacing)²`, capped by `max_dt`.
    pub fn stable_dt(&self, wm: &WarpedMetric) -> f64 {
        let dt = self.cfl * wm.min_arclength_spacing().powi(2);
        self.max_dt.map_or(dt, |m| dt.min(m))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub wm: WarpedMetric,
    pub t: f64,
    pub dt_last: f64,
}

impl FlowState {
    pub fn new(wm: WarpedMetric) -> Self {
        FlowState {
            wm,
            t: 0.0,
            dt_last: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowRhs {
    /// Ricci velocity `∂_t f = -λ_sph f` in the fixed `r` gauge.
    pub f_t: Vec<f64>,
    /// Ricci velocity `∂_t h = -λ_r h` in the fixed `r` gauge.
    pub h_t: Vec<f64>,
    /// Gauge field `ξ`, the `∂_r` component of `X`.
    pub xi: Vec<f64>,
    /// Logarithmic rate `σ = ∂_t h / h` of the gauged flow.
    pub sigma: f64,
    /// Velocity of `f` under the gauged flow, `f_t + ξ f_r`.
    pub gauged_f_t: Vec<f64>,
    /// Velocity of `h` under the gauged flow, `σ h`.
    pub gauged_h_t: Vec<f64>,
}

/// Ricci velocity of `(f, h)` together with the gauge term the integrator adds.
pub fn flow_rhs(wm: &WarpedMetric) -> Result<FlowRhs> {
    let c = curvature_with_policy(wm, End::Even)?;
    let (f, h, dr) = (wm.f(), wm.h(), wm.dr());
    let f_t: Vec<f64> = f
        .iter()
        .zip(&c.lambda_sphere)
        .map(|(f, l)| -l * f)
        .collect();
    let h_t = h
        .iter()
        .zip(&c.lambda_radial)
        .map(|(h, l)| -l * h)
        .collect();
    let lh: Vec<f64> = c.lambda_radial.iter().zip(h).map(|(l, h)| l * h).collect();
    let q_l = cumulative_integral(&lh, dr);
    let q_h = cumulative_integral(h, dr);
    let last = f.len() - 1;
    let sigma = -q_l[last] / q_h[last];
    let mut xi: Vec<f64> = (0..f.len())
        .map(|i| (sigma * q_h[i] + q_l[i]) / h[i])
        .collect();
    for (_, i) in wm.boundaries() {
        xi[i] = 0.0;
    }
    let (fl, fr, _) = wm.ends(End::Even);
    let f_r = d1(f, dr, fl, fr);
    let gauged_f_t = (0..f.len()).map(|i| f_t[i] + xi[i] * f_r[i]).collect();
    let gauged_h_t = h.iter().map(|h| sigma * h).collect();
    Ok(FlowRhs {
        f_t,
        h_t,
        xi,
        sigma,
        gauged_f_t,
        gauged_h_t,
    })
}

fn singular(t: f64, e: LabError) -> LabError {
    match e {
        LabError::Singular(reason) => {
            let node = reason
                .rsplit(' ')
                .next()
                .and_then(|s| s.parse().ok())
                .unwrap_or(0);
            LabError::SingularTime { t, node, reason }
        }
        other => other,
    }
}

fn combine(wm: &WarpedMetric, f: Vec<f64>, h: Vec<f64>, t: f64) -> Result<WarpedMetric> {
    let start = usize::from(wm.domain() == Domain::Cap);
    if let Some(i) = (start..f.len()).find(|&i| !(f[i] > 0.0)) {
        return Err(LabError::SingularTime {
            t,
            node: i,
            reason: format!("f = {:e}", f[i]),
        });
    }
    if let Some(i) = h.iter().position(|&v| !(v > 0.0)) {
        return Err(LabError::SingularTime {
            t,
            node: i,
            reason: format!("h = {:e}", h[i]),
        });
    }
    let mut out = WarpedMetric::from_profiles(wm.n(), wm.domain(), h, f)?;
    out.project_pole();
    out.project_neumann();
    Ok(out)
}

fn axpy(wm: &WarpedMetric, k: &FlowRhs, a: f64, t: f64) -> Result<WarpedMetric> {
    let f = wm
        .f()
        .iter()
        .zip(&k.gauged_f_t)
        .map(|(v, d)| v + a * d)
        .collect();
    let h = wm
        .h()
        .iter()
        .zip(&k.gauged_h_t)
        .map(|(v, d)| v + a * d)
        .collect();
    combine(wm, f, h, t)
}

fn rk4(wm: &WarpedMetric, dt: f64, t: f64) -> Result<WarpedMetric> {
    let rhs = |m: &WarpedMetric| flow_rhs(m).map_err(|e| singular(t, e));
    let k1 = rhs(wm)?;
    let k2 = rhs(&axpy(wm, &k1, 0.5 * dt, t)?)?;
    let k3 = rhs(&axpy(wm, &k2, 0.5 * dt, t)?)?;
    let k4 = rhs(&axpy(wm, &k3, dt, t)?)?;
    let len = wm.len();
    let rk = |v: &[f64], d: fn(&FlowRhs) -> &Vec<f64>| -> Vec<f64> {
        (0..len)
            .map(|i| v[i] + dt / 6.0 * (d(&k1)[i] + 2.0 * d(&k2)[i] + 2.0 * d(&k3)[i] + d(&k4)[i]))
            .collect()
    };
    let f = rk(wm.f(), |k| &k.gauged_f_t);
    let h = rk(wm.h(), |k| &k.gauged_h_t);
    combine(wm, f, h, t + dt)
}

fn pack(wm: &WarpedMetric) -> DVector<f64> {
    DVector::from_iterator(2 * wm.len(), wm.f().iter().chain(wm.h()).copied())
}

fn unpack(wm: &WarpedMetric, x: &DVector<f64>, t: f64) -> Result<WarpedMetric> {
    let len = wm.len();
    combine(
        wm,
        x.rows(0, len).iter().copied().collect(),
        x.rows(len, len).iter().copied().collect(),
        t,
    )
}

fn implicit_residual(
    wm0: &WarpedMetric,
    x: &DVector<f64>,
    dt: f64,
    t: f64,
) -> Result<DVector<f64>> {
    let m = unpack(wm0, x, t)?;
    let k = flow_rhs(&m).map_err(|e| singular(t, e))?;
    let rhs = DVector::from_iterator(
        2 * m.len(),
        k.gauged_f_t.iter().chain(&k.gauged_h_t).copied(),
    );
    Ok(x - pack(wm0) - rhs * dt)
}

/// Backward Euler solved by Newton with a finite-difference Jacobian.
fn implicit_euler(wm: &WarpedMetric, dt: f64, t: f64) -> Result<WarpedMetric> {
    let x0 = pack(wm);
    let mut x = x0.clone();
    let dim = x.len();
    for _ in 0..20 {
        let r = implicit_residual(wm, &x, dt, t + dt)?;
        if r.amax() <= 1e-13 * x0.amax() {
            break;
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let eps = 1e-7 * x[j].abs().max(1e-3);
            let mut xp = x.clone();
            xp[j] += eps;
            let rp = implicit_residual(wm, &xp, dt, t + dt)?;
            jac.set_column(j, &((rp - &r) / eps));
        }
        let delta = jac
            .lu()
            .solve(&(-r))
            .ok_or_else(|| LabError::Singular("implicit Euler Jacobian is singular".into()))?;
        x += delta;
    }
    unpack(wm, &x, t + dt)
}

/// Advances by exactly `dt` (negative steps are allowed for RK4).
pub fn step_by(state: &FlowState, dt: f64, scheme: Scheme) -> Result<FlowState> {
    if dt == 0.0 {
        return Ok(FlowState {
            dt_last: 0.0,
            ..state.clone()
        });
    }
    let wm = match scheme {
        Scheme::Rk4 => rk4(&state.wm, dt, state.t)?,
        Scheme::ImplicitEuler => {
            if dt < 0.0 {
                return Err(LabError::invalid("implicit Euler cannot step backwards"));
            }
            implicit_euler(&state.wm, dt, state.t)?
        }
    };
    let t = state.t + dt;
    let h = max_abs_mean_curvature(&wm);
    if h > H_TOLERANCE {
        return Err(LabError::BoundaryDrift { t, h });
    }
    Ok(FlowState { wm, t, dt_last: dt })
}

/// One step of the CFL-limited size.
pub fn step(state: &FlowState, params: &FlowParams) -> Result<FlowState> {
    params.validate()?;
    step_by(state, params.stable_dt(&state.wm), params.scheme)
}

/// Integrates from `state` to exactly `state.t + duration` in equal substeps
/// no larger than the CFL bound.
pub fn advance(state: &FlowState, duration: f64, params: &FlowParams) -> Result<FlowState> {
    if duration == 0.0 {
        return Ok(state.clone());
    }
    let steps = (duration / params.stable_dt(&state.wm)).ceil().max(1.0) as usize;
    let dt = duration / steps as f64;
    let mut s = state.clone();
    for _ in 0..steps {
        s = step_by(&s, dt, params.scheme)?;
    }
    Ok(s)
}

/// Monitored quantities along a trajectory; `h_left` is absent on caps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub min_f: f64,
    pub max_f: f64,
    pub min_r: f64,
    pub max_r: f64,
    pub volume: f64,
    #[serde(rename = "H_left")]
    pub h_left: Option<f64>,
    #[serde(rename = "H_right")]
    pub h_right: f64,
}

impl TrajectoryRecord {
    pub fn of(state: &FlowState) -> Result<Self> {
        let wm = &state.wm;
        let r = curvature_with_policy(wm, End::Even)?.scalar;
        let start = usize::from(wm.domain() == Domain::Cap);
        let f = &wm.f()[start..];
        let mut rec = TrajectoryRecord {
            t: state.t,
            min_f: f.iter().copied().fold(f64::INFINITY, f64::min),
            max_f: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_r: r.iter().copied().fold(f64::INFINITY, f64::min),
            max_r: r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            volume: volume(wm),
            h_left: None,
            h_right: 0.0,
        };
        for b in boundary_data(wm) {
            match b.side {
                Side::Inner => rec.h_left = Some(b.mean_curvature),
                Side::Outer => rec.h_right = b.mean_curvature,
            }
        }
        Ok(rec)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    pub records: Vec<TrajectoryRecord>,
    /// Boundary sphere radii at every monitor time.
    pub boundary_radii: Vec<(f64, Vec<f64>)>,
    /// Largest `|H|` over every accepted step.
    pub max_mean_curvature: f64,
    pub steps: usize,
}

impl Trajectory {
    fn record(&mut self, state: &FlowState) -> Result<()> {
        let radii = state
            .wm
            .boundaries()
            .iter()
            .map(|&(_, i)| state.wm.f()[i])
            .collect();
        self.boundary_radii.push((state.t, radii));
        self.records.push(TrajectoryRecord::of(state)?);
        self.snapshots.push(state.clone());
        Ok(())
    }

    pub fn last(&self) -> Option<&FlowState> {
        self.snapshots.last()
    }

    /// Trajectory CSV with columns `t,min_f,max_f,min_r,max_r,volume,H_left,H_right`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| LabError::io("<csv>", e))?;
        Ok(())
    }
}

/// A failed integration together with everything recorded before the failure.
#[derive(Debug)]
pub struct FlowFailure {
    pub error: LabError,
    pub partial: Trajectory,
}

impl From<Box<FlowFailure>> for LabError {
    fn from(f: Box<FlowFailure>) -> Self {
        f.error
    }
}

/// Integrates to `params.t_end`, recording every `monitor_every` steps.
pub fn evolve(
    state: &FlowState,
    params: &FlowParams,
) -> std::result::Result<Trajectory, Box<FlowFailure>> {
    let mut traj = Trajectory::default();
    let fail = |error: LabError, partial: Trajectory| Box::new(FlowFailure { error, partial });
    if let Err(e) = params.validate() {
        return Err(fail(e, traj));
    }
    if let Err(e) = traj.record(state) {
        return Err(fail(e, traj));
    }
    traj.max_mean_curvature = max_abs_mean_curvature(&state.wm);
    let mut s = state.clone();
    while s.t < params.t_end {
        let remaining = params.t_end - s.t;
        let dt = params.stable_dt(&s.wm);
        let dt = if remaining <= dt * (1.0 + 1e-9) {
            remaining
        } else {
            dt
        };
        match step_by(&s, dt, params.scheme) {
            Ok(next) => s = next,
            Err(e) => {
                return Err(fail(e, traj));
            }
        }
        traj.steps += 1;
        traj.max_mean_curvature = traj.max_mean_curvature.max(max_abs_mean_curvature(&s.wm));
        let last = s.t >= params.t_end;
        if last || traj.steps % params.monitor_every == 0 {
            if last {
                s.t = params.t_end;
            }
            if let Err(e) = traj.record(&s) {
                return Err(fail(e, traj));
            }
        }
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactSolution {
    /// `[0, length] × S^{n-1}` with sphere radius `c0`.
    ShrinkingCylinder { c0: f64, length: f64 },
    /// Hemisphere of radius `a0`.
    ShrinkingCap { a0: f64 },
}

impl ExactSolution {
    pub fn singular_time(&self, n: usize) -> f64 {
        match *self {
            ExactSolution::ShrinkingCylinder { c0, .. } => c0 * c0 / (2.0 * (n as f64 - 2.0)),
            ExactSolution::ShrinkingCap { a0 } => a0 * a0 / (2.0 * (n as f64 - 1.0)),
        }
    }
}

/// The exact solution at time `t` sampled on `intervals` radial cells.
pub fn exact_solution(
    kind: ExactSolution,
    n: usize,
    intervals: usize,
    t: f64,
) -> Result<WarpedMetric> {
    if n < 3 {
        return Err(LabError::invalid("dimension must be at least 3"));
    }
    let tmax = kind.singular_time(n);
    if !(t >= 0.0 && t < tmax) {
        return Err(LabError::invalid(format!("t = {t} outside [0, {tmax})")));
    }
    let k = n as f64;
    match kind {
        ExactSolution::ShrinkingCylinder { c0, length } => {
            let c = (c0 * c0 - 2.0 * (k - 2.0) * t).sqrt();
            WarpedMetric::new(
                n,
                Domain::Tube,
                vec![length; intervals + 1],
                vec![c; intervals + 1],
            )
        }
        ExactSolution::ShrinkingCap { a0 } => {
            WarpedMetric::hemisphere(n, intervals, (a0 * a0 - 2.0 * (k - 1.0) * t).sqrt())
        }
    }
}
