use super::{Domain, WarpedMetric};
use crate::error::{LabError, Result};
use crate::kernel::{BoundaryFace, CoordinatePatch, MetricField};

/// Smallest admissible `sin θ` on the embedded band.
pub const MIN_SIN_THETA: f64 = 0.25;

/// Angular window and radial range of an embedded patch.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedOptions {
    pub theta_min: f64,
    pub theta_max: f64,
    pub phi_span: f64,
    pub angular_nodes: usize,
    /// Radial nodes with `r < r_min` are dropped.
    pub r_min: f64,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions {
            theta_min: std::f64::consts::FRAC_PI_3,
            theta_max: 2.0 * std::f64::consts::FRAC_PI_3,
            phi_span: 1.0,
            angular_nodes: 9,
            r_min: 0.0,
        }
    }
}

/// Samples a three-dimensional tube metric in coordinates `(θ, φ, r)` on the
/// radial nodes of `wm`, with the face `r = 1` as boundary.
pub fn embed_to_patch(wm: &WarpedMetric, opts: &EmbedOptions) -> Result<MetricField> {
    if wm.n() != 3 {
        return Err(LabError::invalid("embedding is only available for n = 3"));
    }
    if wm.domain() != Domain::Tube {
        return Err(LabError::invalid("embedding is only available for tubes"));
    }
    if !(opts.theta_min < opts.theta_max) || opts.phi_span <= 0.0 {
        return Err(LabError::invalid("empty angular window"));
    }
    let sin_min = opts.theta_min.sin().min(opts.theta_max.sin());
    if opts.theta_min <= 0.0 || opts.theta_max >= std::f64::consts::PI || sin_min < MIN_SIN_THETA {
        return Err(LabError::invalid(format!(
            "theta band [{}, {}] too close to a coordinate pole (sin θ must stay >= {MIN_SIN_THETA})",
            opts.theta_min, opts.theta_max
        )));
    }
    let dr = wm.dr();
    let start = ((opts.r_min / dr) - 1e-9).ceil().max(0.0) as usize;
    let radial = wm.len().saturating_sub(start);
    let a = opts.angular_nodes.max(2) - 1;
    let patch = CoordinatePatch::new(
        vec![opts.theta_min, 0.0, start as f64 * dr],
        vec![
            (opts.theta_max - opts.theta_min) / a as f64,
            opts.phi_span / a as f64,
            dr,
        ],
        vec![opts.angular_nodes, opts.angular_nodes, radial],
        BoundaryFace::Upper,
    )?;
    let (h, f) = (wm.h(), wm.f());
    let mut g = Vec::with_capacity(patch.node_count() * 9);
    for node in 0..patch.node_count() {
        let idx = patch.multi_index(node);
        let theta = patch.coords(node)[0];
        let k = start + idx[2];
        let f2 = f[k] * f[k];
        g.extend_from_slice(&[
            f2,
            0.0,
            0.0,
            0.0,
            f2 * theta.sin().powi(2),
            0.0,
            0.0,
            0.0,
            h[k] * h[k],
        ]);
    }
    MetricField::new(patch, g)
}
