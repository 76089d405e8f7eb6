use super::MetricField;

/// Curvature tensors at every node. Tensors are stored row-major per node:
/// Christoffels as `[k][i][j]` (n³ entries), Ricci as `[i][j]` (n² entries).
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub n: usize,
    pub christoffels: Vec<f64>,
    pub ricci: Vec<f64>,
    pub scalar: Vec<f64>,
    pub traceless_ricci: Vec<f64>,
    pub traceless_norm_sq: Vec<f64>,
    pub ricci_norm_sq: Vec<f64>,
    pub trusted: Vec<bool>,
}

impl CurvatureBundle {
    pub fn ricci_at(&self, node: usize) -> nalgebra::DMatrix<f64> {
        let n = self.n;
        nalgebra::DMatrix::from_row_slice(n, n, &self.ricci[node * n * n..(node + 1) * n * n])
    }

    /// Maximum of `|v - target|` over trusted nodes.
    pub fn max_trusted_deviation(&self, values: &[f64], target: f64) -> f64 {
        values
            .iter()
            .zip(&self.trusted)
            .filter(|(_, &t)| t)
            .map(|(v, _)| (v - target).abs())
            .fold(0.0, f64::max)
    }
}

/// First-kind symbols `[l][i][j] = (∂_i g_jl + ∂_j g_il - ∂_l g_ij) / 2` from
/// the metric partials `dg[a]`.
fn first_kind(n: usize, dg: &[Vec<f64>], o: usize, l: usize, i: usize, j: usize) -> f64 {
    0.5 * (dg[i][o + j * n + l] + dg[j][o + i * n + l] - dg[l][o + i * n + j])
}

pub(crate) fn christoffels(m: &MetricField, ginv: &[f64]) -> Vec<f64> {
    let p = m.patch();
    let n = p.n();
    let nn = n * n;
    let dg: Vec<Vec<f64>> = (0..n).map(|a| p.partial(m.components(), nn, a)).collect();
    let mut gamma = vec![0.0; p.node_count() * n * nn];
    for node in 0..p.node_count() {
        let o = node * nn;
        let gi = &ginv[o..o + nn];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v: f64 = (0..n)
                        .map(|l| gi[k * n + l] * first_kind(n, &dg, o, l, i, j))
                        .sum();
                    gamma[node * n * nn + k * nn + i * n + j] = v;
                    gamma[node * n * nn + k * nn + j * n + i] = v;
                }
            }
        }
    }
    gamma
}

/// `∂_a Γ^k_ij` for every `a`, assembled from first and second metric partials.
///
/// Differentiating the discrete Christoffels directly would mix the one-sided
/// face stencil with the central one next to it and lose an order at faces.
fn christoffel_partials(m: &MetricField, ginv: &[f64]) -> Vec<Vec<f64>> {
    let p = m.patch();
    let n = p.n();
    let nn = n * n;
    let g = m.components();
    let dg: Vec<Vec<f64>> = (0..n).map(|a| p.partial(g, nn, a)).collect();
    // ddg[a][b] for a <= b.
    let mut ddg: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n]; n];
    for a in 0..n {
        ddg[a][a] = p.second_partial(g, nn, a);
        for b in a + 1..n {
            ddg[a][b] = p.partial(&dg[a], nn, b);
        }
    }
    let dd = |a: usize, b: usize| if a <= b { &ddg[a][b] } else { &ddg[b][a] };
    let mut out = vec![vec![0.0; p.node_count() * n * nn]; n];
    for node in 0..p.node_count() {
        let o = node * nn;
        let gi = &ginv[o..o + nn];
        for (a, da) in out.iter_mut().enumerate() {
            // ∂_a g^{kl} = -g^{km} ∂_a g_mq g^{ql}
            let mut dginv = vec![0.0; nn];
            for k in 0..n {
                for l in 0..n {
                    let mut v = 0.0;
                    for mm in 0..n {
                        for q in 0..n {
                            v -= gi[k * n + mm] * dg[a][o + mm * n + q] * gi[q * n + l];
                        }
                    }
                    dginv[k * n + l] = v;
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let v: f64 = (0..n)
                            .map(|l| {
                                let d_first = 0.5
                                    * (dd(a, i)[o + j * n + l] + dd(a, j)[o + i * n + l]
                                        - dd(a, l)[o + i * n + j]);
                                dginv[k * n + l] * first_kind(n, &dg, o, l, i, j)
                                    + gi[k * n + l] * d_first
                            })
                            .sum();
                        da[node * n * nn + k * nn + i * n + j] = v;
                        da[node * n * nn + k * nn + j * n + i] = v;
                    }
                }
            }
        }
    }
    out
}

/// Christoffel symbols, Ricci tensor, scalar curvature and the traceless
/// decomposition at every node.
pub fn curvature_bundle(m: &MetricField) -> CurvatureBundle {
    let p = m.patch();
    let n = p.n();
    let nn = n * n;
    let nnn = nn * n;
    let ginv = m.inverse();
    let gamma = christoffels(m, &ginv);
    let dgamma = christoffel_partials(m, &ginv);

    let count = p.node_count();
    let mut ricci = vec![0.0; count * nn];
    let mut scalar = vec![0.0; count];
    let mut traceless = vec![0.0; count * nn];
    let mut traceless_norm_sq = vec![0.0; count];
    let mut ricci_norm_sq = vec![0.0; count];

    for node in 0..count {
        let go = node * nnn;
        let g = |k: usize, i: usize, j: usize| gamma[go + k * nn + i * n + j];
        let dg = |a: usize, k: usize, i: usize, j: usize| dgamma[a][go + k * nn + i * n + j];
        let ric = &mut ricci[node * nn..(node + 1) * nn];
        for i in 0..n {
            for j in i..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += dg(k, k, i, j) - dg(j, k, i, k);
                    for l in 0..n {
                        v += g(k, k, l) * g(l, i, j) - g(k, j, l) * g(l, i, k);
                    }
                }
                ric[i * n + j] = v;
                ric[j * n + i] = v;
            }
        }
        let gi = &ginv[node * nn..(node + 1) * nn];
        let gm = &m.components()[node * nn..(node + 1) * nn];
        let s: f64 = (0..nn).map(|k| gi[k] * ric[k]).sum();
        scalar[node] = s;
        let t = &mut traceless[node * nn..(node + 1) * nn];
        for k in 0..nn {
            t[k] = ric[k] - s / n as f64 * gm[k];
        }
        traceless_norm_sq[node] = norm_sq(t, gi, n);
        ricci_norm_sq[node] = norm_sq(ric, gi, n);
    }

    CurvatureBundle {
        n,
        christoffels: gamma,
        ricci,
        scalar,
        traceless_ricci: traceless,
        traceless_norm_sq,
        ricci_norm_sq,
        trusted: (0..count).map(|i| p.is_trusted(i)).collect(),
    }
}

fn norm_sq(t: &[f64], gi: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s += gi[i * n + k] * gi[j * n + l] * t[i * n + j] * t[k * n + l];
                }
            }
        }
    }
    s
}

/// Laplace–Beltrami operator with the differential and squared gradient of `u`.
#[derive(Clone, Debug)]
pub struct LaplaceBeltrami {
    pub laplacian: Vec<f64>,
    /// Coordinate partials `∂_i u`, `n` per node.
    pub differential: Vec<f64>,
    /// Gradient vector `g^{ij} ∂_j u`, `n` per node.
    pub gradient: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub trusted: Vec<bool>,
}

pub fn laplace_beltrami(m: &MetricField, u: &[f64]) -> LaplaceBeltrami {
    let p = m.patch();
    let n = p.n();
    let nn = n * n;
    let count = p.node_count();
    assert_eq!(u.len(), count, "field length does not match patch");
    let ginv = m.inverse();
    let gamma = christoffels(m, &ginv);
    let du: Vec<Vec<f64>> = (0..n).map(|a| p.partial(u, 1, a)).collect();
    let mut hess: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        hess[i][i] = p.second_partial(u, 1, i);
        for j in i + 1..n {
            hess[i][j] = p.partial(&du[i], 1, j);
        }
    }

    let mut laplacian = vec![0.0; count];
    let mut differential = vec![0.0; count * n];
    let mut gradient = vec![0.0; count * n];
    let mut grad_sq = vec![0.0; count];
    for node in 0..count {
        let gi = &ginv[node * nn..(node + 1) * nn];
        let mut lap = 0.0;
        for i in 0..n {
            for j in 0..n {
                let h = if i <= j {
                    hess[i][j][node]
                } else {
                    hess[j][i][node]
                };
                let conn: f64 = (0..n)
                    .map(|k| gamma[node * n * nn + k * nn + i * n + j] * du[k][node])
                    .sum();
                lap += gi[i * n + j] * (h - conn);
            }
        }
        laplacian[node] = lap;
        for i in 0..n {
            differential[node * n + i] = du[i][node];
            let gv: f64 = (0..n).map(|j| gi[i * n + j] * du[j][node]).sum();
            gradient[node * n + i] = gv;
            grad_sq[node] += gv * du[i][node];
        }
    }
    LaplaceBeltrami {
        laplacian,
        differential,
        gradient,
        grad_sq,
        trusted: (0..count).map(|i| p.is_trusted(i)).collect(),
    }
}
