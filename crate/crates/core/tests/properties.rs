//! Property tests over random inputs.

use std::f64::consts::PI;

use proptest::prelude::*;

use seeley_core::bundle::{ComplexExpr, GaugeFields};
use seeley_core::expr::parse_expression;
use seeley_core::geodesic::{integrate_flow, shoot_bvp, BvpOptions};
use seeley_core::geometry::{catalog, MetricField};
use seeley_core::hadamard::{seeley_dewitt, HadamardOptions, RayExpansion};
use seeley_core::linalg::Mat;
use seeley_core::synge::{eikonal_defect, van_vleck, world_function};
use seeley_core::{Complex64, Jet, Layout, Scalar};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn sphere_point() -> impl Strategy<Value = Vec<f64>> {
    (0.9f64..2.2, -1.0f64..1.0).prop_map(|(a, b)| vec![a, b])
}

/// Away from the coordinate poles, where RK4 in this chart loses accuracy.
fn equatorial_point() -> impl Strategy<Value = Vec<f64>> {
    (1.2f64..1.9, -1.0f64..1.0).prop_map(|(a, b)| vec![a, b])
}

fn hyperbolic_point() -> impl Strategy<Value = Vec<f64>> {
    (0.9f64..1.8, -1.0f64..1.0).prop_map(|(a, b)| vec![a, b])
}

fn lorentz_point() -> impl Strategy<Value = Vec<f64>> {
    (-0.6f64..0.6, -1.0f64..1.0).prop_map(|(a, b)| vec![a, b])
}

/// Velocity of Euclidean length `len` at angle `ang`.
fn velocity(ang: f64, len: f64) -> Vec<f64> {
    vec![len * ang.cos(), len * ang.sin()]
}

fn inner(m: &MetricField, x: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let g = m.metric_at(x).unwrap().g;
    let mut s = 0.0;
    for a in 0..u.len() {
        for b in 0..v.len() {
            s += g[(a, b)] * u[a] * v[b];
        }
    }
    s
}

fn zero_gauge_with_potential(b: &str) -> GaugeFields {
    let a = vec![vec![ComplexExpr::zero()], vec![ComplexExpr::zero()]];
    GaugeFields::new(2, 1, a, vec![ComplexExpr::parse(b, "0", 2).unwrap()]).unwrap()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn jet_exp_is_a_homomorphism(a in -1.0f64..1.0, b in -1.0f64..1.0, order in 1usize..5) {
        let lay = Layout::new(2, order);
        let x = Jet::variable(&lay, a, 0);
        let y = Jet::variable(&lay, b, 1);
        let lhs = (x.clone() + &y).exp();
        let rhs = x.exp() * &y.exp();
        for (p, q) in lhs.coeffs().iter().zip(rhs.coeffs()) {
            prop_assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn jet_pythagoras_and_product_rule(a in -2.0f64..2.0, order in 2usize..6) {
        let lay = Layout::new(1, order);
        let x = Jet::variable(&lay, a, 0);
        let one = x.sin().square() + &x.cos().square();
        prop_assert!((one.value() - 1.0).abs() < 1e-14);
        prop_assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
        // (x sin x)' = sin x + x cos x
        let d = (x.clone() * &x.sin()).derivative(0);
        prop_assert!((d.value() - (a.sin() + a * a.cos())).abs() < 1e-13);
    }

    #[test]
    fn expression_derivative_matches_difference(a in 0.3f64..2.0, b in -1.0f64..1.0) {
        let e = parse_expression("sin(x0)^2 * exp(0.3*x1) + x0*x1", 2).unwrap();
        let de = e.diff(0);
        let h = 1e-5;
        let f = |x: f64| e.eval(&[x, b]).unwrap();
        let fd = (f(a + h) - f(a - h)) / (2.0 * h);
        prop_assert!((de.eval(&[a, b]).unwrap() - fd).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn hamiltonian_is_conserved(x in equatorial_point(), ang in 0.0f64..(2.0 * PI), len in 0.2f64..0.8) {
        let m = catalog::sphere2(1.0);
        let sol = integrate_flow(&m, &x, &velocity(ang, len), 200).unwrap();
        let h = sol.hamiltonian(&m).unwrap();
        let spread = h.iter().fold(0.0f64, |a, v| a.max((v - h[0]).abs()));
        prop_assert!(spread < 1e-9 * h[0].abs().max(1.0), "spread {spread}");
    }

    #[test]
    fn rk4_converges_at_fourth_order(x in hyperbolic_point(), ang in 0.0f64..(2.0 * PI)) {
        let m = catalog::hyperbolic2(1.0);
        let v = velocity(ang, 0.8);
        let end = |n| integrate_flow(&m, &x, &v, n).unwrap().x_end_numeric();
        let (a, b, c) = (end(20), end(40), end(640));
        let e1 = (a[0] - c[0]).hypot(a[1] - c[1]);
        let e2 = (b[0] - c[0]).hypot(b[1] - c[1]);
        prop_assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn variational_flow_matches_differences(x in sphere_point(), ang in 0.0f64..(2.0 * PI)) {
        let m = catalog::sphere2(1.0);
        let v = velocity(ang, 0.9);
        let sol = integrate_flow(&m, &x, &v, 200).unwrap();
        let phi = sol.propagator.last().unwrap();
        let g0 = m.metric_at(&x).unwrap().g;
        let h = 1e-6;
        for j in 0..2 {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[j] += h;
            vm[j] -= h;
            let xp = integrate_flow(&m, &x, &vp, 200).unwrap().x_end_numeric();
            let xm = integrate_flow(&m, &x, &vm, 200).unwrap().x_end_numeric();
            for i in 0..2 {
                let fd = (xp[i] - xm[i]) / (2.0 * h);
                // δp0 = g(x0) δv
                let jet = (0..2).map(|k| phi[(i, 2 + k)] * g0[(k, j)]).sum::<f64>();
                prop_assert!((fd - jet).abs() < 1e-7, "{fd} vs {jet}");
            }
        }
    }

    #[test]
    fn flow_is_reversible(x in lorentz_point(), ang in 0.0f64..(2.0 * PI), len in 0.2f64..1.0) {
        let m = catalog::desitter2(1.0);
        let sol = integrate_flow(&m, &x, &velocity(ang, len), 200).unwrap();
        let (x1, p1) = sol.nodes.last().unwrap().clone();
        let ginv = m.metric_at(&x1).unwrap().ginv;
        let v1: Vec<f64> = ginv.mul_vec(&p1).iter().map(|v| -v).collect();
        let back = integrate_flow(&m, &x1, &v1, 200).unwrap().x_end_numeric();
        prop_assert!((back[0] - x[0]).abs() < 1e-10 && (back[1] - x[1]).abs() < 1e-10);
    }

    #[test]
    fn world_function_is_symmetric(x in equatorial_point(), ang in 0.0f64..(2.0 * PI), len in 0.2f64..0.8) {
        let m = catalog::sphere2(1.0);
        let v = velocity(ang, len);
        let y = integrate_flow(&m, &x, &v, 200).unwrap().x_end_numeric();
        let bvp = BvpOptions::default();
        let fwd = shoot_bvp(&m, &x, &y, Some(&v), &bvp).unwrap();
        let rev = shoot_bvp(&m, &y, &x, None, &bvp).unwrap();
        let (wf, wr) = (world_function(&fwd).unwrap(), world_function(&rev).unwrap());
        prop_assert!((wf.sigma - wr.sigma).abs() < 1e-11, "{} vs {}", wf.sigma, wr.sigma);
        let df = van_vleck(&m, &wf, &y, &x).unwrap().delta;
        let dr = van_vleck(&m, &wr, &x, &y).unwrap().delta;
        prop_assert!((df - dr).abs() < 1e-8, "{df} vs {dr}");
        prop_assert!(eikonal_defect(&m, &wf, &y).unwrap() < 1e-9);
        // σ = ½ g(v, v) for the velocity at the start
        prop_assert!((wf.sigma - 0.5 * inner(&m, &x, &v, &v)).abs() < 1e-10);
    }

    #[test]
    fn lorentzian_delta_has_the_signature_sign(x in lorentz_point(), ang in 0.0f64..(2.0 * PI), len in 0.3f64..1.0) {
        let m = catalog::desitter2(1.0);
        let v = velocity(ang, len);
        prop_assume!(inner(&m, &x, &v, &v).abs() > 0.05 * len * len);
        let y = integrate_flow(&m, &x, &v, 200).unwrap().x_end_numeric();
        let sol = shoot_bvp(&m, &x, &y, Some(&v), &BvpOptions::default()).unwrap();
        let vv = van_vleck(&m, &world_function(&sol).unwrap(), &y, &x).unwrap();
        prop_assert_eq!(vv.sign, -1);
    }
}

fn quick() -> HadamardOptions {
    HadamardOptions {
        steps: 100,
        quad_nodes: 8,
        ..HadamardOptions::default()
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn real_scalar_coefficients_are_real(x in sphere_point(), ang in 0.0f64..(2.0 * PI), len in 0.3f64..1.0) {
        let m = catalog::sphere2(1.0);
        let g = zero_gauge_with_potential("-0.5 + 0.2*cos(x0)*x1");
        let y = integrate_flow(&m, &x, &velocity(ang, len), 100).unwrap().x_end_numeric();
        let t = seeley_dewitt(&m, &g, &y, &x, 2, &quick()).unwrap();
        for f in &t.f {
            prop_assert!(f[(0, 0)].im.abs() < 1e-12);
        }
    }

    #[test]
    fn seeding_is_linear(x in hyperbolic_point(), ang in 0.0f64..(2.0 * PI), re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let m = catalog::hyperbolic2(1.0);
        let a0 = vec![
            ComplexExpr::parse("0", "0.3*x1", 2).unwrap(),
            ComplexExpr::parse("0.2", "0.1*x0", 2).unwrap(),
            ComplexExpr::parse("-0.2", "0.1*x0", 2).unwrap(),
            ComplexExpr::parse("0", "-0.1", 2).unwrap(),
        ];
        let a1 = vec![ComplexExpr::zero(), ComplexExpr::zero(), ComplexExpr::zero(), ComplexExpr::parse("0", "0.2*sin(x0)", 2).unwrap()];
        let b = vec![
            ComplexExpr::parse("-1", "0", 2).unwrap(),
            ComplexExpr::parse("0.1*x1", "0", 2).unwrap(),
            ComplexExpr::parse("0.1*x1", "0", 2).unwrap(),
            ComplexExpr::parse("0.3", "0", 2).unwrap(),
        ];
        let g = GaugeFields::new(2, 2, vec![a0, a1], b).unwrap();
        let y = integrate_flow(&m, &x, &velocity(ang, 0.6), 100).unwrap().x_end_numeric();
        let mut ray = RayExpansion::new(&m, &g, &y, &x, 2, 0, &quick()).unwrap();
        let base = ray.g_values().unwrap();
        let c = Mat::from_vec(2, 2, vec![
            Complex64::new(re, im), Complex64::new(0.3, -re),
            Complex64::new(im, 0.5), Complex64::new(-0.7, re * im),
        ]);
        ray.set_seed(c.clone());
        let seeded = ray.g_values().unwrap();
        for (a, s) in base.iter().zip(&seeded) {
            prop_assert!((&(a * &c) - s).frobenius() < 1e-12);
        }
    }

    #[test]
    fn quadrature_refinement_is_consistent(x in equatorial_point(), ang in 0.0f64..(2.0 * PI), len in 0.3f64..0.8) {
        let m = catalog::sphere2(1.0);
        let g = zero_gauge_with_potential("-1 + 0.3*sin(x1)");
        let y = integrate_flow(&m, &x, &velocity(ang, len), 100).unwrap().x_end_numeric();
        let o = HadamardOptions::default();
        let coarse = seeley_dewitt(&m, &g, &y, &x, 2, &HadamardOptions { quad_nodes: 12, ..o }).unwrap();
        let fine = seeley_dewitt(&m, &g, &y, &x, 2, &HadamardOptions { quad_nodes: 20, ..o }).unwrap();
        for (a, b) in coarse.f.iter().zip(&fine.f) {
            prop_assert!(a.max_abs_diff(b) < 1e-7, "{}", a.max_abs_diff(b));
        }
    }
}
