use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::curvature::curvature_bundle;
use super::{CoordinatePatch, MetricField};
use crate::error::{LabError, Result};

/// Tolerance on `|∂_ν u|` accepted by [`boundary_term_formulas`].
pub const NEUMANN_TOLERANCE: f64 = 1e-8;

/// Outward normal, mean curvature and induced metric on the boundary face.
/// Per-node arrays follow the order of `nodes`.
#[derive(Clone, Debug)]
pub struct BoundaryGeometry {
    pub nodes: Vec<usize>,
    /// Contravariant components, `n` per boundary node.
    pub normal: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    /// `(n-1)²` row-major components per boundary node.
    pub induced_metric: Vec<f64>,
    pub area_element: Vec<f64>,
    pub trusted: Vec<bool>,
}

impl BoundaryGeometry {
    pub fn normal_at(&self, k: usize, n: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.normal[k * n..(k + 1) * n])
    }
}

/// Unit normal to the level sets of the last coordinate, oriented outward at
/// the boundary face.
fn normal_from_inverse(ginv: &DMatrix<f64>, sign: f64) -> DVector<f64> {
    let l = ginv.nrows() - 1;
    let scale = sign / ginv[(l, l)].sqrt();
    ginv.column(l) * scale
}

/// Gram–Schmidt on `∂_1, …, ∂_{n-1}` followed by `ν`; columns are the frame vectors.
pub(crate) fn boundary_frame(g: &DMatrix<f64>, nu: &DVector<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let mut frame = DMatrix::zeros(n, n);
    for a in 0..n - 1 {
        let mut v = DVector::zeros(n);
        v[a] = 1.0;
        for b in 0..a {
            let e = frame.column(b).into_owned();
            let proj = (e.transpose() * g * &v)[(0, 0)];
            v -= e * proj;
        }
        let norm = (v.transpose() * g * &v)[(0, 0)].sqrt();
        frame.set_column(a, &(v / norm));
    }
    frame.set_column(n - 1, nu);
    frame
}

pub fn boundary_geometry(m: &MetricField) -> Result<BoundaryGeometry> {
    let p = m.patch();
    let n = p.n();
    let t = n - 1;
    let sign = p.boundary_face().outward_sign();
    let count = p.node_count();

    let mut flux = vec![0.0; count * n];
    for node in 0..count {
        let g = m.at(node);
        let ginv = g.clone().cholesky().expect("validated SPD").inverse();
        let nu = normal_from_inverse(&ginv, sign);
        let vol = g.determinant().sqrt();
        for i in 0..n {
            flux[node * n + i] = vol * nu[i];
        }
    }
    let dflux: Vec<Vec<f64>> = (0..n).map(|a| p.partial(&flux, n, a)).collect();

    let nodes = p.boundary_nodes();
    let mut geo = BoundaryGeometry {
        normal: Vec::with_capacity(nodes.len() * n),
        mean_curvature: Vec::with_capacity(nodes.len()),
        induced_metric: Vec::with_capacity(nodes.len() * t * t),
        area_element: Vec::with_capacity(nodes.len()),
        trusted: nodes.iter().map(|&i| p.is_trusted(i)).collect(),
        nodes,
    };
    for &node in &geo.nodes {
        let g = m.at(node);
        let induced = g.view((0, 0), (t, t)).into_owned();
        let det = induced.determinant();
        if !(det > 1e-14) {
            return Err(LabError::invalid(format!(
                "degenerate induced metric at boundary node {node}"
            )));
        }
        let vol = g.determinant().sqrt();
        let div: f64 = (0..n).map(|i| dflux[i][node * n + i]).sum();
        geo.mean_curvature.push(div / vol);
        geo.normal.extend_from_slice(
            &flux[node * n..(node + 1) * n]
                .iter()
                .map(|v| v / vol)
                .collect::<Vec<_>>(),
        );
        geo.induced_metric.extend(induced.transpose().iter());
        geo.area_element.push(det.sqrt());
    }
    Ok(geo)
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalEvolutionReport {
    pub dt: f64,
    /// Max over trusted boundary nodes of `|FD(∂_t ν) - formula|`, measured in `g`.
    pub residual: f64,
    pub residual_half: f64,
    /// `log2(residual / residual_half)`, absent when both sit at rounding level.
    pub order: Option<f64>,
    pub formula_max: f64,
}

/// Normal vectors at the boundary nodes for the metric `g - 2t Ric`.
fn normals_along_family(m: &MetricField, ricci: &[f64], t: f64) -> Result<Vec<DVector<f64>>> {
    let shifted: Vec<f64> = m
        .components()
        .iter()
        .zip(ricci)
        .map(|(g, r)| g - 2.0 * t * r)
        .collect();
    let mt = MetricField::new(m.patch().clone(), shifted).map_err(|e| match e {
        LabError::NotPositiveDefinite { node } => LabError::invalid(format!(
            "time step {t} too large: shifted metric not positive definite at node {node}"
        )),
        other => other,
    })?;
    let sign = m.patch().boundary_face().outward_sign();
    Ok(m.patch()
        .boundary_nodes()
        .into_iter()
        .map(|node| {
            let ginv = mt.at(node).cholesky().expect("validated SPD").inverse();
            normal_from_inverse(&ginv, sign)
        })
        .collect())
}

fn normal_evolution_residual(
    m: &MetricField,
    ricci: &[f64],
    formula: &[DVector<f64>],
    dt: f64,
) -> Result<f64> {
    let plus = normals_along_family(m, ricci, dt)?;
    let minus = normals_along_family(m, ricci, -dt)?;
    let p = m.patch();
    let mut worst = 0.0f64;
    for (k, &node) in p.boundary_nodes().iter().enumerate() {
        if !p.is_trusted(node) {
            continue;
        }
        let diff = (&plus[k] - &minus[k]) / (2.0 * dt) - &formula[k];
        let g = m.at(node);
        worst = worst.max((diff.transpose() * g * &diff)[(0, 0)].sqrt());
    }
    Ok(worst)
}

/// Compares the central time difference of `ν` along `g - 2t Ric` against
/// `2 Σ Ric(e_a, ν) e_a + Ric(ν, ν) ν` in the boundary frame.
pub fn verify_normal_evolution(m: &MetricField, dt: f64) -> Result<NormalEvolutionReport> {
    if !(dt > 0.0) {
        return Err(LabError::invalid("time step must be positive"));
    }
    let n = m.n();
    let curv = curvature_bundle(m);
    let geo = boundary_geometry(m)?;
    let mut formula = Vec::with_capacity(geo.nodes.len());
    let mut formula_max = 0.0f64;
    for (k, &node) in geo.nodes.iter().enumerate() {
        let g = m.at(node);
        let ric = curv.ricci_at(node);
        let nu = geo.normal_at(k, n);
        let frame = boundary_frame(&g, &nu);
        let mut v = &nu * (nu.transpose() * &ric * &nu)[(0, 0)];
        for a in 0..n - 1 {
            let e = frame.column(a);
            v += e * (2.0 * (e.transpose() * &ric * &nu)[(0, 0)]);
        }
        if geo.trusted[k] {
            formula_max = formula_max.max((v.transpose() * &g * &v)[(0, 0)].sqrt());
        }
        formula.push(v);
    }
    let residual = normal_evolution_residual(m, &curv.ricci, &formula, dt)?;
    let residual_half = normal_evolution_residual(m, &curv.ricci, &formula, dt / 2.0)?;
    let floor = 1e-13 * formula_max.max(1.0);
    let order =
        (residual > floor && residual_half > floor).then(|| (residual / residual_half).log2());
    Ok(NormalEvolutionReport {
        dt,
        residual,
        residual_half,
        order,
        formula_max,
    })
}

/// Pointwise boundary terms for a scalar field with vanishing normal derivative.
#[derive(Clone, Debug)]
pub struct BoundaryTerms {
    pub nodes: Vec<usize>,
    /// `∂_ν h = -2 Σ_{a} Ric(e_a, ν) du(e_a)` over tangential frame vectors.
    pub normal_derivative_h: Vec<f64>,
    /// `Ric(∇u, ν)`.
    pub ricci_grad_normal: Vec<f64>,
    /// `Σ_{a} Ric(e_a, ν) du(e_a)` over tangential frame vectors.
    pub tangential_sum: Vec<f64>,
    pub trusted: Vec<bool>,
    /// Max over trusted nodes of `|Ric(∇u, ν) - Σ Ric(e_a, ν) du(e_a)|`.
    pub identity_residual: f64,
    /// Max over trusted nodes of `|∂_ν u|`.
    pub neumann_measured: f64,
}

pub fn boundary_term_formulas(m: &MetricField, u: &[f64]) -> Result<BoundaryTerms> {
    let p = m.patch();
    let n = p.n();
    if u.len() != p.node_count() {
        return Err(LabError::invalid("field length does not match patch"));
    }
    let geo = boundary_geometry(m)?;
    let du: Vec<Vec<f64>> = (0..n).map(|a| p.partial(u, 1, a)).collect();
    let mut neumann = 0.0f64;
    for (k, &node) in geo.nodes.iter().enumerate() {
        if geo.trusted[k] {
            let dn: f64 = (0..n).map(|i| geo.normal[k * n + i] * du[i][node]).sum();
            neumann = neumann.max(dn.abs());
        }
    }
    if neumann > NEUMANN_TOLERANCE {
        return Err(LabError::NeumannViolated {
            measured: neumann,
            tolerance: NEUMANN_TOLERANCE,
        });
    }

    let curv = curvature_bundle(m);
    let mut terms = BoundaryTerms {
        nodes: geo.nodes.clone(),
        normal_derivative_h: Vec::with_capacity(geo.nodes.len()),
        ricci_grad_normal: Vec::with_capacity(geo.nodes.len()),
        tangential_sum: Vec::with_capacity(geo.nodes.len()),
        trusted: geo.trusted.clone(),
        identity_residual: 0.0,
        neumann_measured: neumann,
    };
    for (k, &node) in geo.nodes.iter().enumerate() {
        let g = m.at(node);
        let ric = curv.ricci_at(node);
        let nu = geo.normal_at(k, n);
        let frame = boundary_frame(&g, &nu);
        let d = DVector::from_iterator(n, (0..n).map(|i| du[i][node]));
        let grad = g.clone().cholesky().expect("validated SPD").solve(&d);
        let full = (grad.transpose() * &ric * &nu)[(0, 0)];
        let tangential: f64 = (0..n - 1)
            .map(|a| {
                let e = frame.column(a);
                (e.transpose() * &ric * &nu)[(0, 0)] * e.dot(&d)
            })
            .sum();
        terms.normal_derivative_h.push(-2.0 * tangential);
        terms.ricci_grad_normal.push(full);
        terms.tangential_sum.push(tangential);
        if geo.trusted[k] {
            terms.identity_residual = terms.identity_residual.max((full - tangential).abs());
        }
    }
    Ok(terms)
}

/// Extends a boundary trace `phi` (evaluated with the last coordinate pinned to
/// the boundary) linearly in the normal coordinate so that the discrete normal
/// derivative vanishes on the boundary face.
pub fn neumann_lift(m: &MetricField, phi: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let p: &CoordinatePatch = m.patch();
    let n = p.n();
    let b = p.boundary_coordinate();
    let sign = p.boundary_face().outward_sign();
    let trace: Vec<f64> = (0..p.node_count())
        .map(|i| {
            let mut x = p.coords(i);
            x[n - 1] = b;
            phi(&x)
        })
        .collect();
    let dtrace: Vec<Vec<f64>> = (0..n - 1).map(|a| p.partial(&trace, 1, a)).collect();
    let layer_stride = p.stride(n - 1);
    let mut slope = vec![0.0; layer_stride];
    for &node in &p.boundary_nodes() {
        let ginv = m.at(node).cholesky().expect("validated SPD").inverse();
        let nu = normal_from_inverse(&ginv, sign);
        let tangential: f64 = (0..n - 1).map(|a| nu[a] * dtrace[a][node]).sum();
        slope[node % layer_stride] = -tangential / nu[n - 1];
    }
    (0..p.node_count())
        .map(|i| trace[i] + (p.coords(i)[n - 1] - b) * slope[i % layer_stride])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{samples, BoundaryFace};

    fn cube(face: BoundaryFace) -> CoordinatePatch {
        CoordinatePatch::from_bounds(&[0.0; 3], &[1.0; 3], 7, face).unwrap()
    }

    #[test]
    fn half_space_face() {
        let m = samples::euclidean(cube(BoundaryFace::Upper)).unwrap();
        let geo = boundary_geometry(&m).unwrap();
        for k in 0..geo.nodes.len() {
            assert_eq!(&geo.normal[3 * k..3 * k + 3], &[0.0, 0.0, 1.0]);
            assert!(geo.mean_curvature[k].abs() < 1e-14);
            assert!((geo.area_element[k] - 1.0).abs() < 1e-15);
        }
        let lower =
            boundary_geometry(&samples::euclidean(cube(BoundaryFace::Lower)).unwrap()).unwrap();
        assert_eq!(&lower.normal[..3], &[0.0, 0.0, -1.0]);
    }

    #[test]
    fn random_metric_normal_is_orthonormal() {
        let m =
            samples::random_smooth_metric(cube(BoundaryFace::Upper), 0.05, samples::DEFAULT_SEED)
                .unwrap();
        let geo = boundary_geometry(&m).unwrap();
        for (k, &node) in geo.nodes.iter().enumerate() {
            let g = m.at(node);
            let nu = geo.normal_at(k, 3);
            assert!(((nu.transpose() * &g * &nu)[(0, 0)] - 1.0).abs() <= 1e-10);
            for a in 0..2 {
                assert!((g.row(a) * &nu)[(0, 0)].abs() <= 1e-10);
            }
            assert!(nu[2] > 0.0);
        }
    }

    #[test]
    fn flat_normal_does_not_evolve() {
        let m = samples::euclidean(cube(BoundaryFace::Upper)).unwrap();
        let r = verify_normal_evolution(&m, 1e-3).unwrap();
        assert!(r.residual <= 1e-12);
        assert!(r.formula_max <= 1e-12);
        assert!(r.order.is_none());
    }

    #[test]
    fn constant_field_gives_zero_terms() {
        let m = samples::random_smooth_metric(cube(BoundaryFace::Lower), 0.05, 7).unwrap();
        let u = vec![2.5; m.patch().node_count()];
        let t = boundary_term_formulas(&m, &u).unwrap();
        assert!(t
            .normal_derivative_h
            .iter()
            .chain(&t.ricci_grad_normal)
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_nonzero_normal_derivative() {
        let m = samples::euclidean(cube(BoundaryFace::Upper)).unwrap();
        let u = m.sample(|x| x[2]);
        assert!(matches!(
            boundary_term_formulas(&m, &u),
            Err(LabError::NeumannViolated { .. })
        ));
    }
}
