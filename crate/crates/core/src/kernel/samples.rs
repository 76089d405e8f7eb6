//! Analytic test metrics sampled onto patches.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CoordinatePatch, MetricField};
use crate::error::Result;

/// Seed used by the randomized metric tests.
pub const DEFAULT_SEED: u64 = 0x5EED_2018;

pub fn euclidean(patch: CoordinatePatch) -> Result<MetricField> {
    let n = patch.n();
    MetricField::from_fn(patch, |_| {
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            g[i * n + i] = 1.0;
        }
        g
    })
}

/// Unit round 3-sphere in coordinates `(x1, x2, t)` where the embedding is
/// `(x1, x2, rho cos t, rho sin t)` with `rho² = 1 - x1² - x2²`.
/// The face `t = 0` is a totally geodesic equator.
pub fn round_sphere3(patch: CoordinatePatch) -> Result<MetricField> {
    MetricField::from_fn(patch, |x| {
        let (a, b) = (x[0], x[1]);
        let rho2 = 1.0 - a * a - b * b;
        vec![
            1.0 + a * a / rho2,
            a * b / rho2,
            0.0,
            a * b / rho2,
            1.0 + b * b / rho2,
            0.0,
            0.0,
            0.0,
            rho2,
        ]
    })
}

/// `δ + amplitude · Σ A_m sin(k_m · x + φ_m)` over three random modes with
/// symmetric coefficient matrices in `[-1, 1]` and wave vectors in `[-π, π]ⁿ`.
pub fn random_smooth_metric(
    patch: CoordinatePatch,
    amplitude: f64,
    seed: u64,
) -> Result<MetricField> {
    let n = patch.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..3)
        .map(|_| {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = rng.random_range(-1.0..1.0);
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            let k = (0..n)
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect();
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (a, k, phase)
        })
        .collect();
    MetricField::from_fn(patch, |x| {
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            g[i * n + i] = 1.0;
        }
        for (a, k, phase) in &modes {
            let s = (k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + phase).sin();
            for (gij, aij) in g.iter_mut().zip(a) {
                *gij += amplitude * aij * s;
            }
        }
        g
    })
}
