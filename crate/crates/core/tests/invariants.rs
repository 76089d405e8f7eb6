use proptest::prelude::*;

use yamabe_lab::flow::{exact_solution, step_by, ExactSolution, FlowState, Scheme};
use yamabe_lab::stencil::{cumulative_integral, d1, End};
use yamabe_lab::theorem::{cauchy_order, coefficient_factor, observed_order, Geometry};
use yamabe_lab::warped::{volume, warped_curvature, RadialField, WarpedMetric};
use yamabe_lab::yamabe::{critical_exponent, yamabe_quotient};

fn positive_field(wm: &WarpedMetric, c: [f64; 3]) -> Vec<f64> {
    RadialField::from_fn(wm, |r| {
        1.0 + 0.3 * c[0] * (std::f64::consts::PI * r).cos()
            + 0.2 * c[1] * (2.0 * std::f64::consts::PI * r).cos()
            + 0.1 * c[2] * r * r
    })
    .into_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quotient_is_invariant_under_scaling_the_field(
        amp in -0.2f64..0.2,
        p in 1.1f64..5.0,
        k in 0.01f64..100.0,
        c in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let wm = WarpedMetric::perturbed_cylinder(3, 32, amp).unwrap();
        let u = positive_field(&wm, c);
        let ku: Vec<f64> = u.iter().map(|v| k * v).collect();
        let q = yamabe_quotient(&wm, &u, p).unwrap();
        let qk = yamabe_quotient(&wm, &ku, p).unwrap();
        prop_assert!((q - qk).abs() <= 1e-10 * q.abs().max(1.0));
    }

    #[test]
    fn quotient_scales_with_homothety(
        n in 3usize..7,
        amp in -0.2f64..0.2,
        s in 0.9f64..1.0,
        k in 0.2f64..5.0,
        c in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let wm = WarpedMetric::perturbed_cylinder(n, 32, amp).unwrap();
        let u = positive_field(&wm, c);
        let crit = critical_exponent(n);
        let p = 1.0 + s * (crit - 1.0);
        let q = yamabe_quotient(&wm, &u, p).unwrap();
        let qk = yamabe_quotient(&wm.scaled(k), &u, p).unwrap();
        let nf = n as f64;
        let power = nf - 2.0 - 2.0 * nf / (p + 1.0);
        prop_assert!((qk - k.powf(power) * q).abs() <= 1e-10 * q.abs().max(1.0));
        let qc = yamabe_quotient(&wm, &u, crit).unwrap();
        let qck = yamabe_quotient(&wm.scaled(k), &u, crit).unwrap();
        prop_assert!((qc - qck).abs() <= 1e-10 * qc.abs().max(1.0));
    }

    #[test]
    fn warped_curvature_trace_identities(n in 3usize..8, amp in -0.25f64..0.25) {
        let wm = WarpedMetric::perturbed_cylinder(n, 48, amp).unwrap();
        let c = warped_curvature(&wm).unwrap();
        let m = (n - 1) as f64;
        for i in 0..wm.len() {
            let (lr, ls) = (c.lambda_radial[i], c.lambda_sphere[i]);
            let scale = c.ricci_norm_sq[i].max(1.0);
            prop_assert!((c.scalar[i] - (lr + m * ls)).abs() <= 1e-10 * scale);
            prop_assert!((c.ricci_norm_sq[i] - (lr * lr + m * ls * ls)).abs() <= 1e-10 * scale);
            let tf = c.ricci_norm_sq[i] - c.scalar[i].powi(2) / n as f64;
            prop_assert!((c.tracefree_norm_sq[i] - tf).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn homothety_rescales_curvature_and_volume(n in 3usize..7, amp in -0.2f64..0.2, k in 0.3f64..3.0) {
        let wm = WarpedMetric::perturbed_cylinder(n, 32, amp).unwrap();
        let g = wm.scaled(k);
        let (r, rk) = (warped_curvature(&wm).unwrap().scalar, warped_curvature(&g).unwrap().scalar);
        for (a, b) in r.iter().zip(&rk) {
            prop_assert!((a - k * k * b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        prop_assert!((volume(&g) - k.powi(n as i32) * volume(&wm)).abs() <= 1e-12);
    }

    #[test]
    fn open_stencils_are_exact_on_quartics(coef in prop::array::uniform5(-2.0f64..2.0), len in 8usize..40) {
        let dx = 1.0 / (len - 1) as f64;
        let poly = |x: f64| coef.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let dpoly = |x: f64| (1..5).rev().fold(0.0, |acc, k| acc * x + k as f64 * coef[k]);
        let v: Vec<f64> = (0..len).map(|i| poly(i as f64 * dx)).collect();
        let d = d1(&v, dx, End::Open, End::Open);
        for (i, di) in d.iter().enumerate() {
            prop_assert!((di - dpoly(i as f64 * dx)).abs() <= 1e-9);
        }
    }

    #[test]
    fn running_integral_is_exact_on_cubics(coef in prop::array::uniform4(-2.0f64..2.0), len in 5usize..40) {
        let dx = 1.0 / (len - 1) as f64;
        let poly = |x: f64| coef.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let prim = |x: f64| (0..4).rev().fold(0.0, |acc, k| acc * x + coef[k] / (k + 1) as f64) * x;
        let v: Vec<f64> = (0..len).map(|i| poly(i as f64 * dx)).collect();
        let s = cumulative_integral(&v, dx);
        for (i, si) in s.iter().enumerate() {
            prop_assert!((si - prim(i as f64 * dx)).abs() <= 1e-12);
        }
    }

    #[test]
    fn orders_recover_geometric_rates(q in 0.5f64..6.0, c in 1e-2f64..1e3, limit in -10.0f64..10.0) {
        prop_assert!((observed_order(c, c * 2f64.powf(-q), 2.0) - q).abs() <= 1e-9);
        let seq = [limit + c, limit + c * 2f64.powf(-q), limit + c * 4f64.powf(-q)];
        prop_assert!((cauchy_order(seq, 2.0) - q).abs() <= 1e-6);
    }

    #[test]
    fn constant_cylinders_flow_exactly(n in 3usize..7, c0 in 0.5f64..2.0, frac in 0.05f64..0.3) {
        let kind = ExactSolution::ShrinkingCylinder { c0, length: 1.0 };
        let t = frac * kind.singular_time(n);
        let s = step_by(&FlowState::new(exact_solution(kind, n, 8, 0.0).unwrap()), t / 8.0, Scheme::Rk4).unwrap();
        let exact = exact_solution(kind, n, 8, t / 8.0).unwrap();
        for (a, b) in s.wm.f().iter().zip(exact.f()) {
            prop_assert!((a - b).abs() <= 1e-8 * b);
        }
    }

    #[test]
    fn geometry_json_round_trips(amp in 0.0f64..0.3, radius in 0.1f64..10.0) {
        for g in [Geometry::PerturbedCylinder { amplitude: amp }, Geometry::Cylinder { radius }, Geometry::Hemisphere] {
            let s = serde_json::to_string(&g).unwrap();
            prop_assert_eq!(serde_json::from_str::<Geometry>(&s).unwrap(), g);
        }
    }
}

#[test]
fn critical_factor_vanishes() {
    for n in 3..16 {
        assert_eq!(coefficient_factor(n, critical_exponent(n)), 0.0, "n = {n}");
    }
}
