//! Fourth-order finite differences on a uniform 1D grid with ghost extensions.
//!
//! Each end of the grid is either extended by parity (pole regularity or
//! Neumann reflection) or treated with skewed one-sided stencils.

/// How a nodal array is continued past one end of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    /// `v(-x) = -v(x)` about the end node.
    Odd,
    /// `v(-x) = v(x)` about the end node.
    Even,
    /// No extension; skewed one-sided stencils.
    Open,
}

const D1_CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D2_CENTRAL: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D1_SKEW0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_SKEW1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
const D2_SKEW0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_SKEW1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

/// Minimum number of intervals the stencils need.
pub const MIN_INTERVALS: usize = 8;

fn ghost(v: &[f64], i: isize, left: End, right: End) -> Option<f64> {
    let n = v.len() as isize - 1;
    if i < 0 {
        match left {
            End::Odd => Some(-v[(-i) as usize]),
            End::Even => Some(v[(-i) as usize]),
            End::Open => None,
        }
    } else if i > n {
        let m = (2 * n - i) as usize;
        match right {
            End::Odd => Some(2.0 * v[n as usize] - v[m]),
            End::Even => Some(v[m]),
            End::Open => None,
        }
    } else {
        Some(v[i as usize])
    }
}

// Stencil weights sum to zero, so sums are taken over differences from the
// centre value; constant data then differentiates to exactly zero.
fn central(v: &[f64], i: usize, w: &[f64; 5], left: End, right: End) -> Option<f64> {
    let mut acc = 0.0;
    for (k, c) in w.iter().enumerate() {
        let j = i as isize + k as isize - 2;
        acc += c * (ghost(v, j, left, right)? - v[i]);
    }
    Some(acc)
}

fn skew<const K: usize>(v: &[f64], i: usize, w0: &[f64; K], w1: &[f64; K], odd: bool) -> f64 {
    // Mirror the right end onto the left-end formulas.
    let n = v.len() - 1;
    let (offset, from_right) = if i <= 1 { (i, false) } else { (n - i, true) };
    let w = if offset == 0 { w0 } else { w1 };
    let mut acc = 0.0;
    for (k, c) in w.iter().enumerate() {
        let val = if from_right { v[n - k] } else { v[k] };
        acc += c * (val - v[i]);
    }
    if from_right && odd {
        -acc
    } else {
        acc
    }
}

/// First derivative at every node, fourth-order accurate.
pub fn d1(v: &[f64], dx: f64, left: End, right: End) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            central(v, i, &D1_CENTRAL, left, right)
                .unwrap_or_else(|| skew(v, i, &D1_SKEW0, &D1_SKEW1, true))
                / (12.0 * dx)
        })
        .collect()
}

/// Second derivative at every node, fourth-order accurate.
pub fn d2(v: &[f64], dx: f64, left: End, right: End) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            central(v, i, &D2_CENTRAL, left, right)
                .unwrap_or_else(|| skew(v, i, &D2_SKEW0, &D2_SKEW1, false))
                / (12.0 * dx * dx)
        })
        .collect()
}

/// Sixth-order one-sided first derivative at an end node, times `60 dx`.
const D1_END6: [f64; 7] = [-147.0, 360.0, -450.0, 400.0, -225.0, 72.0, -10.0];

/// First derivative at the left (or right) end node, sixth-order accurate.
pub fn end_slope(v: &[f64], dx: f64, right: bool) -> f64 {
    let n = v.len() - 1;
    let at = |k: usize| if right { v[n - k] } else { v[k] };
    let end = at(0);
    let acc: f64 = D1_END6[1..]
        .iter()
        .enumerate()
        .map(|(k, c)| c * (at(k + 1) - end))
        .sum();
    if right {
        -acc / (60.0 * dx)
    } else {
        acc / (60.0 * dx)
    }
}

/// End value that makes [`end_slope`] vanish at that end.
pub fn neumann_end_value(v: &[f64], right: bool) -> f64 {
    let n = v.len() - 1;
    let at = |k: usize| if right { v[n - k] } else { v[k] };
    // Difference form leaves constant data untouched exactly.
    let end = at(0);
    end - D1_END6[1..]
        .iter()
        .enumerate()
        .map(|(k, c)| c * (at(k + 1) - end))
        .sum::<f64>()
        / D1_END6[0]
}

/// Value at `x = 0` of an even function from its samples at `dx, 2dx, 3dx`.
pub fn even_extrapolate(v1: f64, v2: f64, v3: f64) -> f64 {
    (15.0 * v1 - 6.0 * v2 + v3) / 10.0
}

/// Running integral `∫_0^{x_i} v dx`, fourth-order accurate, from local cubic
/// interpolants.
pub fn cumulative_integral(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len() - 1;
    let mut out = vec![0.0; v.len()];
    for i in 1..=n {
        let cell = if i == 1 {
            9.0 * v[0] + 19.0 * v[1] - 5.0 * v[2] + v[3]
        } else if i == n {
            9.0 * v[n] + 19.0 * v[n - 1] - 5.0 * v[n - 2] + v[n - 3]
        } else {
            -v[i - 2] + 13.0 * v[i - 1] + 13.0 * v[i] - v[i + 1]
        };
        out[i] = out[i - 1] + cell * dx / 24.0;
    }
    out
}

/// Composite trapezoid weights for a uniform grid.
pub fn trapezoid_weights(len: usize, dx: f64) -> Vec<f64> {
    let mut w = vec![dx; len];
    w[0] *= 0.5;
    w[len - 1] *= 0.5;
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumann_projection_zeroes_end_slope() {
        let mut v: Vec<f64> = (0..12).map(|i| (0.3 * i as f64).sin() + 2.0).collect();
        let last = v.len() - 1;
        v[0] = neumann_end_value(&v, false);
        v[last] = neumann_end_value(&v, true);
        assert!(end_slope(&v, 0.1, false).abs() < 1e-12);
        assert!(end_slope(&v, 0.1, true).abs() < 1e-12);
    }

    fn poly(x: f64, deg: i32) -> f64 {
        (0..=deg).map(|k| (k as f64 + 1.0) * x.powi(k)).sum()
    }
    fn dpoly(x: f64, deg: i32) -> f64 {
        (1..=deg)
            .map(|k| (k as f64 + 1.0) * k as f64 * x.powi(k - 1))
            .sum()
    }
    fn ddpoly(x: f64, deg: i32) -> f64 {
        (2..=deg)
            .map(|k| (k as f64 + 1.0) * (k * (k - 1)) as f64 * x.powi(k - 2))
            .sum()
    }

    #[test]
    fn open_stencils_exact_on_quartics() {
        let dx = 0.1;
        let xs: Vec<f64> = (0..=10).map(|i| 0.3 + i as f64 * dx).collect();
        let v: Vec<f64> = xs.iter().map(|&x| poly(x, 4)).collect();
        let g = d1(&v, dx, End::Open, End::Open);
        let gg = d2(&v, dx, End::Open, End::Open);
        for (i, &x) in xs.iter().enumerate() {
            assert!((g[i] - dpoly(x, 4)).abs() < 1e-9, "d1 at {i}");
            assert!((gg[i] - ddpoly(x, 4)).abs() < 1e-7, "d2 at {i}");
        }
    }

    #[test]
    fn skewed_second_derivative_exact_on_quintics() {
        let dx = 0.05;
        let xs: Vec<f64> = (0..=12).map(|i| -0.2 + i as f64 * dx).collect();
        let v: Vec<f64> = xs.iter().map(|&x| poly(x, 5)).collect();
        let gg = d2(&v, dx, End::Open, End::Open);
        for &i in &[0usize, 1, 11, 12] {
            assert!((gg[i] - ddpoly(xs[i], 5)).abs() < 1e-6, "node {i}");
        }
    }

    #[test]
    fn parity_ghosts_match_smooth_extensions() {
        let n = 32;
        let dx = 1.0 / n as f64;
        let sinv: Vec<f64> = (0..=n).map(|i| (i as f64 * dx).sin()).collect();
        let g = d1(&sinv, dx, End::Odd, End::Open);
        assert!((g[0] - 1.0).abs() < 1e-7);
        let cosv: Vec<f64> = (0..=n)
            .map(|i| (std::f64::consts::PI * i as f64 * dx).cos())
            .collect();
        let gg = d2(&cosv, dx, End::Even, End::Even);
        let k2 = std::f64::consts::PI.powi(2);
        assert!((gg[0] + k2).abs() < 1e-4);
        assert!((gg[n] - k2).abs() < 1e-4);
    }

    #[test]
    fn end_slope_exact_on_sextics() {
        let dx = 0.1;
        let xs: Vec<f64> = (0..=10).map(|i| 0.3 + i as f64 * dx).collect();
        let v: Vec<f64> = xs.iter().map(|&x| poly(x, 6)).collect();
        assert!((end_slope(&v, dx, false) - dpoly(xs[0], 6)).abs() < 1e-8);
        assert!((end_slope(&v, dx, true) - dpoly(xs[10], 6)).abs() < 1e-8);
    }

    #[test]
    fn cumulative_integral_exact_on_cubics() {
        let dx = 0.1;
        let v: Vec<f64> = (0..=10).map(|i| poly(i as f64 * dx, 3)).collect();
        let q = cumulative_integral(&v, dx);
        let antideriv = |x: f64| (0..=3).map(|k| x.powi(k + 1)).sum::<f64>();
        for (i, qi) in q.iter().enumerate() {
            assert!((qi - antideriv(i as f64 * dx)).abs() < 1e-13, "node {i}");
        }
    }

    #[test]
    fn even_extrapolation_kills_quadratic_and_quartic_terms() {
        let f = |x: f64| 2.0 - 3.0 * x * x + 5.0 * x.powi(4);
        let v = even_extrapolate(f(0.1), f(0.2), f(0.3));
        assert!((v - 2.0).abs() < 1e-12);
    }
}
