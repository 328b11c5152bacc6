use mixedsolve_core::analysis::*;
use mixedsolve_core::geometry::CharCurve;
use mixedsolve_core::num_complex::Complex64;
use std::f64::consts::PI;

/// n points on a horizontal line with midpoint weights 1/n.
fn line_points(n: usize) -> Vec<SamplePoint> {
    (0..n).map(|i| SamplePoint { x: (i as f64 + 0.5) / n as f64, y: 0.5, weight: 1.0 / n as f64 }).collect()
}

fn abel_stack(n: usize) -> IteratedKernelStack {
    let pts = line_points(n);
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            k[i * n + j] = 1.0 / (pts[i].x - pts[j].x).sqrt();
        }
    }
    IteratedKernelStack::from_samples(pts, k)
}

#[test]
fn second_iterate_of_abel_kernel_is_pi() {
    // integral_t^x dz / sqrt((x - z)(z - t)) = pi for every t < x.
    // The midpoint sum skips O(sqrt(h)) singular end contributions.
    let err = |n: usize| {
        let mut st = abel_stack(n);
        iterate_kernels(&mut st, 2);
        (st.k(2)[(7 * n / 8) * n + n / 8] - PI).abs()
    };
    let (coarse, fine) = (err(100), err(400));
    assert!(fine < 0.07 * PI, "{fine}");
    assert!(fine < 0.6 * coarse, "{coarse} -> {fine}");
}

#[test]
fn abel_kernel_meets_iterate_bound_with_equality_at_first_order() {
    let mut st = abel_stack(60);
    assert!((st.m() - 1.0).abs() < 1e-12);
    iterate_kernels(&mut st, 6);
    let rows = check_iterate_bounds(&st);
    assert_eq!(rows.len(), 6);
    assert!((rows[0].min_slack - 1.0).abs() < 1e-9);
    for r in &rows {
        assert_eq!(r.violations, 0, "{r:?}");
        assert_eq!(r.causality_breaks, 0);
    }
}

#[test]
fn zero_kernel_is_trivially_nilpotent() {
    let pts = line_points(20);
    let mut st = IteratedKernelStack::from_samples(pts, vec![0.0; 400]);
    iterate_kernels(&mut st, 4);
    let nr = quasinilpotency_trend(&st);
    assert!(nr.norms.iter().all(|v| *v == 0.0));
    let f: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let s = solve_spectral(&st, Complex64::new(5.0, -1.0), &f).unwrap();
    assert!(s.u.iter().zip(&f).all(|(u, g)| (u - g).norm() == 0.0));
}

#[test]
fn spectral_solve_matches_direct_inverse_on_small_system() {
    let n = 30;
    let st = abel_stack(n);
    let f: Vec<f64> = st.points.iter().map(|p| p.x.sin()).collect();
    let lam = Complex64::new(-3.0, 2.0);
    let s = solve_spectral(&st, lam, &f).unwrap();
    // u_i - lambda sum_j K_ij w_j u_j = f_i.
    let w = 1.0 / n as f64;
    for (i, row) in st.k(1).chunks(n).enumerate() {
        let acc: Complex64 = row.iter().zip(&s.u).map(|(k, u)| k * w * u).sum();
        assert!((s.u[i] - lam * acc - f[i]).norm() < 1e-9);
    }
}

#[test]
fn leading_block_norm_is_far_below_the_bound() {
    let b = b_block_norm_sq();
    let series = b_block_norm_sq_series(20000);
    assert!((b - series).abs() < 1e-3, "{b} vs {series}");
    assert!(b < 1.0 / PI.sqrt());
}

#[test]
fn sample_points_cover_both_subdomains() {
    let c = CharCurve::linear(0.75).unwrap();
    let pts = sample_points(&c, 8);
    assert_eq!(pts.len(), 128);
    let upper: f64 = pts.iter().filter(|p| p.y > 0.0).map(|p| p.weight).sum();
    let lower: f64 = pts.iter().filter(|p| p.y < 0.0).map(|p| p.weight).sum();
    assert!((upper - 1.0).abs() < 1e-12);
    assert!(lower > 0.0 && lower < 0.25);
}

#[test]
fn bound_curve_decays_superexponentially() {
    let b: Vec<f64> = (1..=30).map(|n| bound_curve(1.0, n).powf(1.0 / n as f64)).collect();
    assert!(b[29] < b[9] && b[9] < b[4]);
}
