//! Finite-difference tensor calculus on coordinate patches.
//!
//! A patch is a uniform grid in `n` coordinates. The last coordinate axis
//! carries the boundary: one of its two faces is the boundary `M`, every other
//! face is an artificial truncation. Derivatives are second-order central
//! differences, one-sided at faces; values within [`TRUST_RADIUS`] nodes of a
//! truncation face are flagged untrusted.

mod boundary;
mod curvature;
pub mod samples;

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{LabError, Result};

pub use boundary::{
    boundary_geometry, boundary_term_formulas, neumann_lift, verify_normal_evolution,
    BoundaryGeometry, BoundaryTerms, NormalEvolutionReport,
};
pub use curvature::{curvature_bundle, laplace_beltrami, CurvatureBundle, LaplaceBeltrami};

/// Nodes this close to a truncation face are untrusted (curvature composes two
/// first-derivative stencils).
pub const TRUST_RADIUS: usize = 2;

/// Smallest admissible eigenvalue of a nodal metric.
pub const SPD_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryFace {
    /// `x^n = min`, outward normal along `-grad x^n`.
    Lower,
    /// `x^n = max`, outward normal along `+grad x^n`.
    Upper,
}

impl BoundaryFace {
    pub fn outward_sign(self) -> f64 {
        match self {
            BoundaryFace::Lower => -1.0,
            BoundaryFace::Upper => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinatePatch {
    n: usize,
    extents: Vec<usize>,
    spacings: Vec<f64>,
    origin: Vec<f64>,
    boundary_face: BoundaryFace,
}

impl CoordinatePatch {
    pub fn new(
        origin: Vec<f64>,
        spacings: Vec<f64>,
        extents: Vec<usize>,
        boundary_face: BoundaryFace,
    ) -> Result<Self> {
        let n = extents.len();
        if n < 3 {
            return Err(LabError::invalid(format!(
                "patch dimension must be >= 3, got {n}"
            )));
        }
        if spacings.len() != n || origin.len() != n {
            return Err(LabError::invalid(
                "origin, spacings and extents must have equal length",
            ));
        }
        if let Some(e) = extents.iter().find(|&&e| e < 5) {
            return Err(LabError::invalid(format!(
                "every extent must be >= 5, got {e}"
            )));
        }
        if let Some(h) = spacings.iter().find(|&&h| !(h > 0.0)) {
            return Err(LabError::invalid(format!(
                "spacings must be positive, got {h}"
            )));
        }
        Ok(CoordinatePatch {
            n,
            extents,
            spacings,
            origin,
            boundary_face,
        })
    }

    /// Patch `[lo_a, hi_a]` per axis with `extent` nodes along every axis.
    pub fn from_bounds(lo: &[f64], hi: &[f64], extent: usize, face: BoundaryFace) -> Result<Self> {
        let spacings = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (b - a) / (extent - 1) as f64)
            .collect();
        Self::new(lo.to_vec(), spacings, vec![extent; lo.len()], face)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn boundary_face(&self) -> BoundaryFace {
        self.boundary_face
    }

    pub fn node_count(&self) -> usize {
        self.extents.iter().product()
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.extents[..axis].iter().product()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.extents
            .iter()
            .map(|&e| {
                let i = idx % e;
                idx /= e;
                i
            })
            .collect()
    }

    /// Inverse of [`CoordinatePatch::multi_index`].
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .enumerate()
            .map(|(a, &i)| i * self.stride(a))
            .sum()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacings[a])
            .collect()
    }

    /// Coordinate of the boundary face on the last axis.
    pub fn boundary_coordinate(&self) -> f64 {
        let a = self.n - 1;
        match self.boundary_face {
            BoundaryFace::Lower => self.origin[a],
            BoundaryFace::Upper => self.origin[a] + (self.extents[a] - 1) as f64 * self.spacings[a],
        }
    }

    fn boundary_layer(&self) -> usize {
        match self.boundary_face {
            BoundaryFace::Lower => 0,
            BoundaryFace::Upper => self.extents[self.n - 1] - 1,
        }
    }

    /// Node indices on the boundary face, in storage order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let layer = self.boundary_layer();
        (0..self.node_count())
            .filter(|&i| self.multi_index(i)[self.n - 1] == layer)
            .collect()
    }

    /// Whether a node is far enough from every truncation face.
    pub fn is_trusted(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        let last = self.n - 1;
        m.iter().enumerate().all(|(a, &i)| {
            let e = self.extents[a];
            let lo_ok =
                i >= TRUST_RADIUS || (a == last && self.boundary_face == BoundaryFace::Lower);
            let hi_ok =
                i + TRUST_RADIUS < e || (a == last && self.boundary_face == BoundaryFace::Upper);
            lo_ok && hi_ok
        })
    }

    /// Product trapezoid weights over all axes.
    pub(crate) fn trapezoid_weight(&self, idx: usize, skip_axis: Option<usize>) -> f64 {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .filter(|(a, _)| Some(*a) != skip_axis)
            .map(|(a, &i)| {
                let h = self.spacings[a];
                if i == 0 || i + 1 == self.extents[a] {
                    0.5 * h
                } else {
                    h
                }
            })
            .product()
    }

    /// Derivative along `axis` of every component of a field with `ncomp`
    /// components per node: central inside, second-order one-sided at faces.
    pub(crate) fn partial(&self, data: &[f64], ncomp: usize, axis: usize) -> Vec<f64> {
        let stride = self.stride(axis) * ncomp;
        let ext = self.extents[axis];
        let h = self.spacings[axis];
        let mut out = vec![0.0; data.len()];
        for node in 0..self.node_count() {
            let i = (node / self.stride(axis)) % ext;
            let base = node * ncomp;
            for c in 0..ncomp {
                let at = |k: isize| data[(base as isize + k * stride as isize) as usize + c];
                out[base + c] = if i == 0 {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                } else if i + 1 == ext {
                    (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
                } else {
                    (at(1) - at(-1)) / (2.0 * h)
                };
            }
        }
        out
    }

    /// Second derivative along `axis` of every component of a field with
    /// `ncomp` components per node: central inside, second-order one-sided at faces.
    pub(crate) fn second_partial(&self, data: &[f64], ncomp: usize, axis: usize) -> Vec<f64> {
        let stride = (self.stride(axis) * ncomp) as isize;
        let ext = self.extents[axis];
        let h2 = self.spacings[axis].powi(2);
        let mut out = vec![0.0; data.len()];
        for node in 0..self.node_count() {
            let i = (node / self.stride(axis)) % ext;
            let base = (node * ncomp) as isize;
            for c in 0..ncomp {
                let at = |k: isize| data[(base + k * stride) as usize + c];
                out[node * ncomp + c] = if i == 0 {
                    (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
                } else if i + 1 == ext {
                    (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / h2
                } else {
                    (at(1) - 2.0 * at(0) + at(-1)) / h2
                };
            }
        }
        out
    }
}

/// A symmetric positive definite metric tensor at every node of a patch.
#[derive(Clone, Debug)]
pub struct MetricField {
    patch: CoordinatePatch,
    g: Vec<f64>,
}

impl MetricField {
    /// `g` holds `n*n` row-major components per node.
    pub fn new(patch: CoordinatePatch, g: Vec<f64>) -> Result<Self> {
        let n = patch.n();
        if g.len() != patch.node_count() * n * n {
            return Err(LabError::invalid("metric array has the wrong length"));
        }
        for node in 0..patch.node_count() {
            let block = &g[node * n * n..(node + 1) * n * n];
            for i in 0..n {
                for j in 0..i {
                    let (a, b) = (block[i * n + j], block[j * n + i]);
                    if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                        return Err(LabError::invalid(format!(
                            "metric not symmetric at node {node}"
                        )));
                    }
                }
            }
            let m = DMatrix::from_row_slice(n, n, block);
            let min = SymmetricEigen::new(m).eigenvalues.min();
            if !(min > SPD_TOLERANCE) {
                return Err(LabError::NotPositiveDefinite { node });
            }
        }
        Ok(MetricField { patch, g })
    }

    /// Samples `g(x)`, given as `n*n` row-major components, at every node.
    pub fn from_fn(patch: CoordinatePatch, g: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let data = (0..patch.node_count())
            .flat_map(|i| g(&patch.coords(i)))
            .collect();
        Self::new(patch, data)
    }

    pub fn patch(&self) -> &CoordinatePatch {
        &self.patch
    }

    pub fn n(&self) -> usize {
        self.patch.n
    }

    pub fn components(&self) -> &[f64] {
        &self.g
    }

    pub fn at(&self, node: usize) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_row_slice(n, n, &self.g[node * n * n..(node + 1) * n * n])
    }

    /// Nodal inverse metrics, `n*n` row-major per node.
    pub(crate) fn inverse(&self) -> Vec<f64> {
        let n = self.n();
        (0..self.patch.node_count())
            .flat_map(|i| {
                let inv = self.at(i).cholesky().expect("validated SPD").inverse();
                (0..n * n)
                    .map(move |k| inv[(k / n, k % n)])
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    pub(crate) fn sqrt_det(&self, node: usize) -> f64 {
        self.at(node).determinant().sqrt()
    }

    /// Samples a scalar function at every node.
    pub fn sample(&self, u: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.patch.node_count())
            .map(|i| u(&self.patch.coords(i)))
            .collect()
    }

    /// Writes node indices and metric components as CSV.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let n = self.n();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..n).map(|a| format!("i{a}")).collect();
        for i in 0..n {
            for j in 0..n {
                header.push(format!("g{i}{j}"));
            }
        }
        w.write_record(&header)?;
        for node in 0..self.patch.node_count() {
            let mut row: Vec<String> = self
                .patch
                .multi_index(node)
                .iter()
                .map(|v| v.to_string())
                .collect();
            row.extend(
                self.g[node * n * n..(node + 1) * n * n]
                    .iter()
                    .map(|v| format!("{v:e}")),
            );
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| LabError::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Bulk,
    Boundary,
}

/// Composite trapezoid quadrature of `phi` against the volume or boundary area element.
pub fn integrate(m: &MetricField, phi: &[f64], region: Region) -> f64 {
    let p = m.patch();
    assert_eq!(
        phi.len(),
        p.node_count(),
        "field length does not match patch"
    );
    match region {
        Region::Bulk => (0..p.node_count())
            .map(|i| phi[i] * m.sqrt_det(i) * p.trapezoid_weight(i, None))
            .sum(),
        Region::Boundary => {
            let t = p.n() - 1;
            p.boundary_nodes()
                .into_iter()
                .map(|i| {
                    let g = m.at(i);
                    let area = g.view((0, 0), (t, t)).determinant().sqrt();
                    phi[i] * area * p.trapezoid_weight(i, Some(t))
                })
                .sum()
        }
    }
}

/// Writes node indices and one scalar column as CSV.
pub fn write_scalar_csv(
    patch: &CoordinatePatch,
    name: &str,
    values: &[f64],
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..patch.n()).map(|a| format!("i{a}")).collect();
    header.push(name.to_string());
    w.write_record(&header)?;
    for (node, v) in values.iter().enumerate() {
        let mut row: Vec<String> = patch
            .multi_index(node)
            .iter()
            .map(|v| v.to_string())
            .collect();
        row.push(format!("{v:e}"));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| LabError::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube(face: BoundaryFace) -> CoordinatePatch {
        CoordinatePatch::from_bounds(&[0.0; 3], &[1.0; 3], 5, face).unwrap()
    }

    #[test]
    fn patch_validation() {
        assert!(
            CoordinatePatch::new(vec![0.0; 2], vec![0.1; 2], vec![5; 2], BoundaryFace::Upper)
                .is_err()
        );
        assert!(CoordinatePatch::new(
            vec![0.0; 3],
            vec![0.1; 3],
            vec![5, 4, 5],
            BoundaryFace::Upper
        )
        .is_err());
        assert!(CoordinatePatch::new(
            vec![0.0; 3],
            vec![0.1, 0.0, 0.1],
            vec![5; 3],
            BoundaryFace::Upper
        )
        .is_err());
    }

    #[test]
    fn rejects_indefinite_metric() {
        let p = unit_cube(BoundaryFace::Upper);
        let r = MetricField::from_fn(p, |_| vec![1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(r, Err(LabError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn unit_cube_integrals() {
        let m = samples::euclidean(unit_cube(BoundaryFace::Upper)).unwrap();
        let ones = vec![1.0; m.patch().node_count()];
        assert!((integrate(&m, &ones, Region::Bulk) - 1.0).abs() < 1e-15);
        assert!((integrate(&m, &ones, Region::Boundary) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trust_excludes_truncation_faces_only() {
        let p = CoordinatePatch::from_bounds(&[0.0; 3], &[1.0; 3], 7, BoundaryFace::Upper).unwrap();
        let top_center = p.multi_index(0).len();
        assert_eq!(top_center, 3);
        let idx = |m: [usize; 3]| m[0] + 7 * (m[1] + 7 * m[2]);
        assert!(p.is_trusted(idx([3, 3, 6])));
        assert!(p.is_trusted(idx([3, 3, 2])));
        assert!(!p.is_trusted(idx([3, 3, 1])));
        assert!(!p.is_trusted(idx([1, 3, 6])));
        assert_eq!(p.boundary_nodes().len(), 49);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let m = samples::euclidean(unit_cube(BoundaryFace::Lower)).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "i0,i1,i2,g00,g01,g02,g10,g11,g12,g20,g21,g22"
        );
        assert_eq!(lines.count(), 125);
    }
}
