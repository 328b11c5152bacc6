use mixedsolve_core::functions::builtin;
use mixedsolve_core::geometry::CharCurve;
use mixedsolve_core::greens::*;
use mixedsolve_core::rhs::{strip_integral, ForcingField, Smoothness};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Sine-series form of the strip Green's function.
fn green_eigen(x: f64, y: f64, y1: f64) -> f64 {
    (1..400)
        .map(|k| {
            let kp = k as f64 * PI;
            2.0 * (-kp * kp * x).exp() * (kp * y).sin() * (kp * y1).sin()
        })
        .sum()
}

#[test]
fn image_series_matches_eigenfunction_series() {
    let t = SeriesTruncation::default();
    for &(x, y, y1) in &[(0.01, 0.3, 0.35), (0.2, 0.5, 0.1), (1.0, 0.9, 0.2), (0.05, 0.02, 0.98)] {
        let a = green_g(x, y, y1, &t).unwrap();
        let b = green_eigen(x, y, y1);
        assert!((a - b).abs() < 1e-10, "({x},{y},{y1}): {a} vs {b}");
        assert!((a - green_g(x, y1, y, &t).unwrap()).abs() < 1e-14);
    }
    assert!(green_g(0.3, 0.0, 0.4, &t).unwrap().abs() < 1e-14);
    assert!(green_g(0.3, 1.0, 0.4, &t).unwrap().abs() < 1e-14);
    assert!(green_g(0.0, 0.5, 0.5, &t).is_err());
}

#[test]
fn trace_kernel_is_the_normal_derivative() {
    let t = SeriesTruncation::default();
    let (x, y1, d) = (0.1, 0.4, 1e-6);
    let fd = green_g(x, d, y1, &t).unwrap() / d;
    assert!((green_gy_trace(x, y1, &t).unwrap() - fd).abs() < 1e-5);
}

#[test]
fn theta_kernel_matches_its_poisson_dual() {
    let t = SeriesTruncation::default();
    for x in [0.01, 0.1, 0.5, 1.0] {
        let dual = 1.0 + 2.0 * (1..200).map(|k| (-(k * k) as f64 * PI * PI * x).exp()).sum::<f64>();
        let k = kernel_k(x, &t).unwrap();
        assert!((k - dual).abs() < 1e-10 * dual, "x={x}: {k} vs {dual}");
    }
}

#[test]
fn step_response_integrates_the_trace_kernel() {
    let (s, y) = (0.3f64, 0.25);
    let m = 200_000;
    // Midpoint rule in v = sqrt(sigma) to soften the start.
    let r = s.sqrt();
    let q: f64 = (0..m)
        .map(|k| {
            let v = (k as f64 + 0.5) / m as f64 * r;
            2.0 * v * trace_d(v * v, y, 20) * r / m as f64
        })
        .sum();
    assert!((trace_step(s, y) - q).abs() < 1e-8);
}

#[test]
fn strip_integral_of_a_constant() {
    let c = 3.0;
    let mut p = BTreeMap::new();
    p.insert("c".to_string(), c);
    let f = ForcingField::new(builtin("constant", &p).unwrap(), Smoothness::L2Only).unwrap();
    let curve = CharCurve::linear(0.75).unwrap();
    for eta in [0.2, 0.6, 1.0] {
        let exact = 0.25 * c * (eta - curve.lambda(eta));
        assert!((strip_integral(&f, &curve, eta) - exact).abs() < 1e-12);
    }
}

mod rhs {
    use mixedsolve_core::engine::{abel_invert, Grid1D};
    use mixedsolve_core::functions::{FieldRef, Poly2};
    use mixedsolve_core::geometry::CharCurve;
    use mixedsolve_core::greens::{GluingParams, SeriesTruncation};
    use mixedsolve_core::rhs::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn poly(c: Vec<Vec<f64>>) -> ForcingField {
        ForcingField::new(Arc::new(Poly2::new(c)), Smoothness::L2Only).unwrap()
    }

    fn params(alpha: f64, beta: f64) -> GluingParams {
        let one: FieldRef = Arc::new(Poly2::new(vec![vec![1.0]]));
        GluingParams::new(alpha, beta, one).unwrap()
    }

    fn degenerate() -> CharCurve {
        CharCurve::new(mixedsolve_core::geometry::CurveShape::Degenerate, true).unwrap()
    }

    #[test]
    fn f0_of_parabolic_profile_matches_sine_series() {
        // f = y (1 - y): F0 = sum_{k odd} 8 (1 - exp(-k^2 pi^2 x)) / (k pi)^4.
        let f = poly(vec![vec![0.0, 1.0, -1.0]]);
        let g = Grid1D::uniform(256);
        let f0 = compute_f0(&f, &g, &SeriesTruncation::default()).unwrap();
        assert_eq!(f0.values[0], 0.0);
        for (x, v) in g.nodes.iter().zip(&f0.values) {
            let exact: f64 = (0..2000)
                .map(|m| {
                    let kp = (2 * m + 1) as f64 * PI;
                    8.0 * (1.0 - (-kp * kp * x).exp()) / kp.powi(4)
                })
                .sum();
            assert!((v - exact).abs() < 1e-6, "x={x}: {v} vs {exact}");
        }
    }

    #[test]
    fn f1_for_unit_forcing_on_the_characteristic_curve() {
        // lambda = 0, so the strip term is 2 x / 4 = x / 2, and
        // F0 = 1/2 - sum_{k odd} 4 exp(-k^2 pi^2 x) / (k pi)^2.
        let f = poly(vec![vec![1.0]]);
        let g = Grid1D::uniform(64);
        let curve = degenerate();
        let f0 = compute_f0(&f, &g, &SeriesTruncation::default()).unwrap();
        let f1 = compute_f1(&f, &f0, &params(1.0, 0.0), &curve).unwrap();
        for (i, &x) in g.nodes.iter().enumerate().skip(1) {
            let tail: f64 = (0..5000)
                .map(|m| {
                    let kp = (2 * m + 1) as f64 * PI;
                    4.0 * (-kp * kp * x).exp() / (kp * kp)
                })
                .sum();
            assert!((f0.values[i] - (0.5 - tail)).abs() < 1e-8);
            assert!((f1.values[i] - f0.values[i] - 0.5 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn first_kind_memory_term_and_its_abel_inverse() {
        // Q = 1, f = 1, lambda = 0: 2 beta integral_0^x t/4 dt = beta x^2 / 4,
        // whose Abel inverse is beta 2 x^{3/2} / (3 pi).
        let beta = 1.5;
        let f = poly(vec![vec![1.0]]);
        let g = Grid1D::uniform(512);
        let f0 = compute_f0(&f, &g, &SeriesTruncation::default()).unwrap();
        let rhs = first_kind_rhs(&f, &f0, &params(0.0, beta), &degenerate());
        let memory: Vec<f64> = rhs.iter().zip(&f0.values).map(|(a, b)| a - b).collect();
        for (x, m) in g.nodes.iter().zip(&memory) {
            assert!((m - beta * x * x / 4.0).abs() < 1e-12);
        }
        let phi = abel_invert(&memory, &g).unwrap();
        // The starting cells assume phi linear, which is only O(h^{3/2})
        // accurate for this x^{3/2} profile; the error dies out downstream.
        for (x, p) in g.nodes.iter().zip(&phi) {
            let e = (p - beta * 2.0 * x.powf(1.5) / (3.0 * PI)).abs();
            assert!(e < if *x < 0.02 { 1e-4 } else { 1e-6 }, "x={x} err {e:e}");
        }
    }

    #[test]
    fn assemblers_are_linear_and_vanish_at_zero() {
        let g = Grid1D::uniform(32);
        let t = SeriesTruncation::default();
        let curve = CharCurve::linear(0.75).unwrap();
        let a = poly(vec![vec![0.0, 1.0], vec![1.0]]);
        let b = poly(vec![vec![0.0, 0.0, 2.0], vec![0.0, -1.0]]);
        let sum = poly(vec![vec![0.0, 2.0, -6.0], vec![2.0, 3.0]]);
        for p in [params(1.0, 0.5), params(0.0, 1.0)] {
            let fa = compute_f_dispatch(&a, &p, &curve, &g, &t).unwrap();
            let fb = compute_f_dispatch(&b, &p, &curve, &g, &t).unwrap();
            let fs = compute_f_dispatch(&sum, &p, &curve, &g, &t).unwrap();
            assert_eq!(fs.variant, if p.alpha == 0.0 { RhsVariant::F2 } else { RhsVariant::F1 });
            for i in 0..g.n() {
                assert!((fs.values[i] - 2.0 * fa.values[i] + 3.0 * fb.values[i]).abs() < 1e-10);
            }
            if p.alpha != 0.0 {
                assert_eq!(fs.values[0], 0.0);
            }
        }
    }

    #[test]
    fn f2_start_value_vanishes_under_refinement() {
        // Here F2 ~ sqrt(x) near 0, so the extrapolated F2(0) is O(sqrt(h)).
        let f = poly(vec![vec![0.0, 2.0, -6.0], vec![2.0, 3.0]]);
        let curve = CharCurve::linear(0.75).unwrap();
        let start = |n| {
            let g = Grid1D::uniform(n);
            compute_f_dispatch(&f, &params(0.0, 1.0), &curve, &g, &SeriesTruncation::default()).unwrap().values[0]
        };
        let (a, b) = (start(32).abs(), start(512).abs());
        assert!(b < 0.3 * a, "{a} -> {b}");
    }

    #[test]
    fn variant_preconditions() {
        let g = Grid1D::uniform(16);
        let f = poly(vec![vec![0.0, 1.0]]);
        let f0 = compute_f0(&f, &g, &SeriesTruncation::default()).unwrap();
        assert!(compute_f1(&f, &f0, &params(0.0, 1.0), &CharCurve::linear(0.75).unwrap()).is_err());
        let zero = poly(vec![vec![0.0]]);
        let z = compute_f0(&zero, &g, &SeriesTruncation::default()).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }
}
