//! Rotationally symmetric metrics `h(r)^2 dr^2 + f(r)^2 g_{S^{n-1}}` on tubes and caps.
//!
//! The coordinate `r` runs over `[0, 1]` on a fixed uniform grid; arclength
//! derivatives are taken as `d/ds = (1/h) d/dr` so the grid never moves.

mod curvature;
mod embed;
mod ops;

use std::f64::consts::PI;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::stencil::{self, End};

pub use curvature::{warped_curvature, WarpedCurvature};
pub use embed::{embed_to_patch, EmbedOptions};
pub use ops::{
    boundary_data, compatibility_residual, conformal_transform, integrate_boundary, integrate_bulk,
    normalize_zero_mean_curvature, quadrature_weights, radial_laplacian, volume, BoundaryDatum,
    CompatibilityReport, RadialLaplacian,
};

pub(crate) use curvature::curvature_with_policy;
pub(crate) use ops::{max_abs_mean_curvature, radial_laplacian_with};

/// Relative tolerance on the pole regularity ratio `f_r(0) / h(0) = 1`.
pub const POLE_TOLERANCE: f64 = 1e-8;

/// Area of the unit sphere `S^{k}`.
pub fn sphere_area(k: usize) -> f64 {
    let m = (k + 1) as f64 / 2.0;
    2.0 * PI.powf(m) / statrs::function::gamma::gamma(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// `[0,1] x S^{n-1}`, boundary spheres at both ends.
    Tube,
    /// Disk with a smooth pole at `r = 0` and boundary sphere at `r = 1`.
    Cap,
}

/// One boundary sphere of a warped domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Inner,
    Outer,
}

impl Side {
    /// Sign of `d/ds` along the outward normal.
    pub fn outward_sign(self) -> f64 {
        match self {
            Side::Inner => -1.0,
            Side::Outer => 1.0,
        }
    }
}

/// Nodal values on the radial grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RadialField(Vec<f64>);

impl RadialField {
    pub fn new(values: Vec<f64>) -> Self {
        RadialField(values)
    }

    pub fn constant(len: usize, value: f64) -> Self {
        RadialField(vec![value; len])
    }

    /// Samples `g(r)` on the grid of `wm`.
    pub fn from_fn(wm: &WarpedMetric, g: impl Fn(f64) -> f64) -> Self {
        RadialField(wm.nodes().map(g).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Self {
        RadialField(self.0.iter().map(|&v| g(v)).collect())
    }
}

impl Deref for RadialField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RadialField {
    fn from(v: Vec<f64>) -> Self {
        RadialField(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WarpedMetricJson", into = "WarpedMetricJson")]
pub struct WarpedMetric {
    n: usize,
    domain: Domain,
    h: Vec<f64>,
    f: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WarpedMetricJson {
    n: usize,
    domain: Domain,
    #[serde(rename = "N")]
    intervals: usize,
    h: Vec<f64>,
    f: Vec<f64>,
}

impl TryFrom<WarpedMetricJson> for WarpedMetric {
    type Error = LabError;
    fn try_from(j: WarpedMetricJson) -> Result<Self> {
        if j.h.len() != j.intervals + 1 {
            return Err(LabError::invalid(format!(
                "N = {} but h has {} entries",
                j.intervals,
                j.h.len()
            )));
        }
        WarpedMetric::new(j.n, j.domain, j.h, j.f)
    }
}

impl From<WarpedMetric> for WarpedMetricJson {
    fn from(wm: WarpedMetric) -> Self {
        WarpedMetricJson {
            n: wm.n,
            domain: wm.domain,
            intervals: wm.intervals(),
            h: wm.h,
            f: wm.f,
        }
    }
}

impl WarpedMetric {
    /// Validated constructor, including pole regularity on caps.
    pub fn new(n: usize, domain: Domain, h: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let wm = Self::from_profiles(n, domain, h, f)?;
        if domain == Domain::Cap {
            let ratio = wm.pole_ratio();
            if (ratio - 1.0).abs() > POLE_TOLERANCE {
                return Err(LabError::invalid(format!(
                    "cap pole is not smooth: f_r(0)/h(0) = {ratio:.12}"
                )));
            }
        }
        Ok(wm)
    }

    /// Constructor checking only shape and positivity.
    pub(crate) fn from_profiles(
        n: usize,
        domain: Domain,
        h: Vec<f64>,
        f: Vec<f64>,
    ) -> Result<Self> {
        if n < 3 {
            return Err(LabError::invalid(format!(
                "dimension must be >= 3, got {n}"
            )));
        }
        if h.len() != f.len() {
            return Err(LabError::invalid("h and f have different lengths"));
        }
        if h.len() < stencil::MIN_INTERVALS + 1 {
            return Err(LabError::invalid(format!(
                "need at least {} intervals",
                stencil::MIN_INTERVALS
            )));
        }
        if let Some(i) = h.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(LabError::Singular(format!("h = {} at node {i}", h[i])));
        }
        let first = match domain {
            Domain::Tube => 0,
            Domain::Cap => {
                if f[0].abs() > 1e-14 * f.iter().fold(0.0f64, |m, v| m.max(v.abs())) {
                    return Err(LabError::invalid(format!(
                        "cap requires f(0) = 0, got {}",
                        f[0]
                    )));
                }
                1
            }
        };
        if let Some(i) = (first..f.len()).find(|&i| !(f[i] > 0.0) || !f[i].is_finite()) {
            return Err(LabError::Singular(format!("f = {} at node {i}", f[i])));
        }
        let mut f = f;
        if domain == Domain::Cap {
            f[0] = 0.0;
        }
        Ok(WarpedMetric { n, domain, h, f })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Number of grid intervals `N`.
    pub fn intervals(&self) -> usize {
        self.h.len() - 1
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn dr(&self) -> f64 {
        1.0 / self.intervals() as f64
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// Grid coordinates `r_i`.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let dr = self.dr();
        (0..self.len()).map(move |i| i as f64 * dr)
    }

    /// Boundary spheres with their node indices.
    pub fn boundaries(&self) -> Vec<(Side, usize)> {
        match self.domain {
            Domain::Tube => vec![(Side::Inner, 0), (Side::Outer, self.intervals())],
            Domain::Cap => vec![(Side::Outer, self.intervals())],
        }
    }

    /// Ends used for `f` and `h` by measurement stencils.
    pub(crate) fn ends(&self, boundary: End) -> (End, End, End) {
        // (f left, f right, h left)
        match self.domain {
            Domain::Tube => (boundary, boundary, End::Open),
            Domain::Cap => (End::Odd, boundary, End::Even),
        }
    }

    /// Left end used for even radial scalars.
    pub(crate) fn scalar_left(&self) -> End {
        match self.domain {
            Domain::Tube => End::Open,
            Domain::Cap => End::Even,
        }
    }

    /// Resets the boundary values of `f` so the discrete `f_s`, hence `H`,
    /// vanishes on every boundary sphere.
    pub(crate) fn project_neumann(&mut self) {
        for (side, i) in self.boundaries() {
            self.f[i] = stencil::neumann_end_value(&self.f, side == Side::Outer);
        }
    }

    /// Resets `f` next to a cap pole so that `f_r(0) = h(0)` holds exactly.
    pub(crate) fn project_pole(&mut self) {
        if self.domain == Domain::Cap {
            let dr = self.dr();
            self.f[1] = (30.0 * dr * self.h[0] + 9.0 * self.f[2] - self.f[3]) / 45.0;
        }
    }

    /// `f_r(0) / h(0)`; equals 1 for a smooth pole.
    pub fn pole_ratio(&self) -> f64 {
        self.pole_slope() / self.h[0]
    }

    /// `f_r(0)` from the odd extension, exact for quintic profiles.
    pub(crate) fn pole_slope(&self) -> f64 {
        (45.0 * self.f[1] - 9.0 * self.f[2] + self.f[3]) / (30.0 * self.dr())
    }

    /// Smallest arclength spacing `h_i dr`.
    pub fn min_arclength_spacing(&self) -> f64 {
        self.h.iter().fold(f64::INFINITY, |m, &v| m.min(v)) * self.dr()
    }

    /// Homothety `g -> k^2 g`.
    pub fn scaled(&self, k: f64) -> WarpedMetric {
        WarpedMetric {
            n: self.n,
            domain: self.domain,
            h: self.h.iter().map(|v| v * k).collect(),
            f: self.f.iter().map(|v| v * k).collect(),
        }
    }

    /// Homothetic rescaling to unit volume.
    pub fn with_unit_volume(&self) -> WarpedMetric {
        let vol = volume(self);
        self.scaled(vol.powf(-1.0 / self.n as f64))
    }

    /// `[0, L] x S^{n-1}(c)`.
    pub fn cylinder(n: usize, intervals: usize, radius: f64, length: f64) -> Result<Self> {
        Self::new(
            n,
            Domain::Tube,
            vec![length; intervals + 1],
            vec![radius; intervals + 1],
        )
    }

    /// Cylinder of the given radius whose length makes the volume one.
    pub fn unit_volume_cylinder(n: usize, intervals: usize, radius: f64) -> Result<Self> {
        let length = 1.0 / (sphere_area(n - 1) * radius.powi(n as i32 - 1));
        Self::cylinder(n, intervals, radius, length)
    }

    /// Geodesic ball of angular radius `theta_max` in the round sphere of radius `a`.
    pub fn round_cap(n: usize, intervals: usize, a: f64, theta_max: f64) -> Result<Self> {
        let dr = 1.0 / intervals as f64;
        let f = (0..=intervals)
            .map(|i| a * (theta_max * i as f64 * dr).sin())
            .collect();
        Self::new(n, Domain::Cap, vec![a * theta_max; intervals + 1], f)
    }

    pub fn hemisphere(n: usize, intervals: usize, a: f64) -> Result<Self> {
        Self::round_cap(n, intervals, a, PI / 2.0)
    }

    /// Radius of the round hemisphere of unit volume.
    pub fn unit_volume_hemisphere_radius(n: usize) -> f64 {
        (2.0 / sphere_area(n)).powf(1.0 / n as f64)
    }

    pub fn unit_volume_hemisphere(n: usize, intervals: usize) -> Result<Self> {
        Self::hemisphere(n, intervals, Self::unit_volume_hemisphere_radius(n))
    }

    /// Tube with `h = 1`, `f = 1 + amplitude cos(2 pi r)`, rescaled to unit volume.
    pub fn perturbed_cylinder(n: usize, intervals: usize, amplitude: f64) -> Result<Self> {
        let dr = 1.0 / intervals as f64;
        let f = (0..=intervals)
            .map(|i| 1.0 + amplitude * (2.0 * PI * i as f64 * dr).cos())
            .collect();
        let mut wm = Self::new(n, Domain::Tube, vec![1.0; intervals + 1], f)?;
        wm.project_neumann();
        Ok(wm.with_unit_volume())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
