use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::flow::{advance, exact_solution, step_by, ExactSolution, FlowParams, FlowState, Scheme};
use crate::kernel::{curvature_bundle, CoordinatePatch};
use crate::theorem::{observed_order, verify_theorem_b, Case, Geometry};
use crate::warped::{embed_to_patch, warped_curvature, Domain, EmbedOptions, WarpedMetric};

/// One refinement level of one quantity.
#[derive(Clone, Debug, Serialize)]
pub struct OrderRow {
    pub quantity: String,
    pub case: String,
    pub level: usize,
    /// Radial intervals, or the time step for temporal quantities.
    pub resolution: f64,
    /// Error against an exact value, or the difference to the next finer level.
    pub value: f64,
    /// Observed order between this level and the previous one.
    pub order: Option<f64>,
}

/// Coarsest radial resolution of the warped-vs-kernel comparison.
const KERNEL_BASE: usize = 16;

fn rows(quantity: &str, case: &str, resolution: &[f64], values: &[f64]) -> Vec<OrderRow> {
    values
        .iter()
        .enumerate()
        .map(|(k, &v)| OrderRow {
            quantity: quantity.into(),
            case: case.into(),
            level: k,
            resolution: resolution[k],
            value: v,
            order: (k > 0).then(|| {
                observed_order(
                    values[k - 1],
                    v,
                    (resolution[k] / resolution[k - 1]).max(resolution[k - 1] / resolution[k]),
                )
            }),
        })
        .collect()
}

/// Max difference between two grids on the nodes of the coarser one.
fn coarse_difference(coarse: &[f64], fine: &[f64]) -> f64 {
    let stride = (fine.len() - 1) / (coarse.len() - 1);
    coarse
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (i, c)| m.max((c - fine[i * stride]).abs()))
}

/// Exact scalar curvature when the case has one.
fn exact_scalar(case: &Case) -> Option<f64> {
    let n = case.n as f64;
    match case.geometry {
        Geometry::Cylinder { radius } => Some((n - 1.0) * (n - 2.0) / (radius * radius)),
        Geometry::Hemisphere => {
            let a = WarpedMetric::unit_volume_hemisphere_radius(case.n);
            Some(n * (n - 1.0) / (a * a))
        }
        _ => None,
    }
}

fn curvature_rows(case: &Case, grids: &[usize]) -> Result<Vec<OrderRow>> {
    let mut scalars = Vec::new();
    let mut errors = Vec::new();
    for &n in grids {
        let c = Case {
            intervals: n,
            ..case.clone()
        };
        let wm = c.build()?;
        let r = warped_curvature(&wm)?.scalar;
        if let Some(exact) = exact_scalar(case) {
            errors.push(r.iter().fold(0.0f64, |m, v| m.max((v - exact).abs())));
        }
        scalars.push(r);
    }
    let res: Vec<f64> = grids.iter().map(|&n| n as f64).collect();
    if errors.len() == grids.len() {
        return Ok(rows("curvature", &case.name(), &res, &errors));
    }
    let diffs: Vec<f64> = scalars
        .windows(2)
        .map(|w| coarse_difference(&w[0], &w[1]))
        .collect();
    Ok(rows("curvature", &case.name(), &res[..diffs.len()], &diffs))
}

/// Kernel scalar curvature on the embedded tube against the warped formula,
/// refining radial and angular spacing together. Errors are taken at the
/// trusted nodes of the coarsest patch, which every finer patch contains.
fn kernel_rows(case: &Case, levels: usize) -> Result<Vec<OrderRow>> {
    let mut res = Vec::new();
    let mut errs = Vec::new();
    let mut coarse: Option<CoordinatePatch> = None;
    for k in 0..levels {
        let n = KERNEL_BASE << k;
        let wm = Case {
            intervals: n,
            ..case.clone()
        }
        .build()?;
        let opts = EmbedOptions {
            angular_nodes: n / 4 + 1,
            ..EmbedOptions::default()
        };
        let m = embed_to_patch(&wm, &opts)?;
        let bundle = curvature_bundle(&m);
        let warped = warped_curvature(&wm)?.scalar;
        let patch = m.patch();
        let base = coarse.get_or_insert_with(|| patch.clone());
        let stride = 1usize << k;
        let err = (0..patch.node_count()).fold(0.0f64, |acc, i| {
            let idx = patch.multi_index(i);
            if idx.iter().any(|j| j % stride != 0) {
                return acc;
            }
            let c: Vec<usize> = idx.iter().map(|j| j / stride).collect();
            if !base.is_trusted(base.flat_index(&c)) {
                return acc;
            }
            acc.max((bundle.scalar[i] - warped[idx[2]]).abs())
        });
        res.push(n as f64);
        errs.push(err);
    }
    Ok(rows("kernel_cross", &case.name(), &res, &errs))
}

fn flow_rows(case: &Case, grids: &[usize], flow: &FlowParams) -> Result<Vec<OrderRow>> {
    let name = case.name();
    match case.geometry {
        Geometry::Cylinder { radius } => {
            // A cylinder has no spatial error, so the step is refined instead;
            // constant profiles are stable at any step.
            let length = Case {
                intervals: 8,
                ..case.clone()
            }
            .build()?
            .h()[0];
            let kind = ExactSolution::ShrinkingCylinder { c0: radius, length };
            let t_end = if flow.t_end > 0.0 {
                flow.t_end
            } else {
                0.4 * kind.singular_time(case.n)
            };
            let mut res = Vec::new();
            let mut errs = Vec::new();
            for k in 0..grids.len() {
                let steps = 4usize << k;
                let dt = t_end / steps as f64;
                let mut s = FlowState::new(exact_solution(kind, case.n, 8, 0.0)?);
                for _ in 0..steps {
                    s = step_by(&s, dt, Scheme::Rk4)?;
                }
                let exact = exact_solution(kind, case.n, 8, t_end)?;
                res.push(dt);
                errs.push((s.wm.f()[0] - exact.f()[0]).abs());
            }
            Ok(rows("flow_time", &name, &res, &errs))
        }
        Geometry::Hemisphere => {
            let a0 = WarpedMetric::unit_volume_hemisphere_radius(case.n);
            let kind = ExactSolution::ShrinkingCap { a0 };
            let t_end = if flow.t_end > 0.0 {
                flow.t_end
            } else {
                0.2 * kind.singular_time(case.n)
            };
            let mut errs = Vec::new();
            for &n in grids {
                let s = advance(
                    &FlowState::new(exact_solution(kind, case.n, n, 0.0)?),
                    t_end,
                    flow,
                )?;
                let exact = exact_solution(kind, case.n, n, t_end)?;
                let scale = exact.f().iter().fold(0.0f64, |m, v| m.max(*v));
                let e =
                    s.wm.f()
                        .iter()
                        .zip(exact.f())
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                errs.push(e / scale);
            }
            let res: Vec<f64> = grids.iter().map(|&n| n as f64).collect();
            Ok(rows("flow_space", &name, &res, &errs))
        }
        _ => {
            let t_end = if flow.t_end > 0.0 { flow.t_end } else { 0.01 };
            let mut profiles = Vec::new();
            for &n in grids {
                let wm = Case {
                    intervals: n,
                    ..case.clone()
                }
                .build()?;
                profiles.push(advance(&FlowState::new(wm), t_end, flow)?.wm.f().to_vec());
            }
            let diffs: Vec<f64> = profiles
                .windows(2)
                .map(|w| coarse_difference(&w[0], &w[1]))
                .collect();
            let res: Vec<f64> = grids[..diffs.len()].iter().map(|&n| n as f64).collect();
            Ok(rows("flow_space", &name, &res, &diffs))
        }
    }
}

fn theorem_rows(case: &Case, grids: &[usize], config: &ExperimentConfig) -> Result<Vec<OrderRow>> {
    let opts = config.verify_options();
    let dt = config.dt.unwrap_or(1e-4);
    let mut out = Vec::new();
    for &p in &config.p_list {
        let mut errs = Vec::new();
        let mut equality = false;
        for &n in grids {
            let c = Case {
                intervals: n,
                ..case.clone()
            };
            let r = verify_theorem_b(&c, p, Some(dt), &opts)?;
            // With rhs = 0 the relative error only measures the floor.
            equality |= r.equality_case;
            errs.push(if r.equality_case {
                (r.lhs_fd - r.rhs_total).abs()
            } else {
                r.rel_error
            });
        }
        let res: Vec<f64> = grids.iter().map(|&n| n as f64).collect();
        let kind = if equality { "abs_error" } else { "rel_error" };
        out.extend(rows(
            &format!("theorem_b_{kind}_p{p}"),
            &case.name(),
            &res,
            &errs,
        ));
    }
    Ok(out)
}

/// Observed orders over `levels` halvings ending at the configured resolution.
pub fn convergence_sweep(config: &ExperimentConfig, levels: usize) -> Result<Vec<OrderRow>> {
    if levels < 3 {
        return Err(LabError::Config(format!(
            "a sweep needs at least 3 levels, got {levels}"
        )));
    }
    config.validate()?;
    let coarsest = config.intervals >> (levels - 1);
    if coarsest < 8 || coarsest << (levels - 1) != config.intervals {
        return Err(LabError::Config(format!(
            "N = {} cannot be halved {} times down to at least 8",
            config.intervals,
            levels - 1
        )));
    }
    let grids: Vec<usize> = (0..levels).map(|k| coarsest << k).collect();
    let cases = config.cases()?;
    if cases
        .iter()
        .any(|c| matches!(c.geometry, Geometry::FromFile { .. }))
    {
        return Err(LabError::Config(
            "a metric file has a fixed resolution and cannot be swept".into(),
        ));
    }
    let per_case: Vec<Result<Vec<OrderRow>>> = cases
        .par_iter()
        .map(|case| {
            let mut out = curvature_rows(case, &grids)?;
            let wm = case.build()?;
            if case.n == 3 && wm.domain() == Domain::Tube {
                out.extend(kernel_rows(case, levels)?);
            }
            out.extend(flow_rows(case, &grids, &config.flow)?);
            out.extend(theorem_rows(case, &grids, config)?);
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_case {
        all.extend(r?);
    }
    Ok(all)
}

/// Order table with columns `quantity,case,level,resolution,value,order`.
pub fn write_orders_csv(rows: &[OrderRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| LabError::io("<csv>", e))?;
    Ok(())
}
