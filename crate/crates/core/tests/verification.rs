use mixedsolve_core::config::ProblemConfig;
use mixedsolve_core::manufactured::ManufacturedCase;
use mixedsolve_core::solver::*;
use mixedsolve_core::verification::*;
use std::f64::consts::PI;

fn spec(alpha: f64, beta: f64, forcing: &str, n: usize) -> ProblemSpec {
    ProblemConfig::default_with(alpha, beta, forcing, n).build().unwrap()
}

fn report_for(s: &ProblemSpec, u: &dyn FieldEvaluator) -> ResidualReport {
    let (nx, ny) = s.field_resolution;
    let field = SolutionField::sample(u, &s.curve, nx, ny, MethodTag::Direct);
    residuals(s, &field, u).unwrap()
}

struct Perturbed<'a> {
    base: &'a DirectSolution,
    eps: f64,
}

impl FieldEvaluator for Perturbed<'_> {
    fn u(&self, x: f64, y: f64) -> f64 {
        let bump = if y > 0.0 { (PI * x).sin().powi(2) * (PI * y).sin().powi(2) } else { 0.0 };
        self.base.u(x, y) + self.eps * bump
    }
}

#[test]
fn residuals_detect_a_perturbed_solution() {
    let s = spec(1.0, 0.0, "lib_sin_mix", 128);
    let sol = DirectSolution::solve(&s).unwrap();
    let clean = report_for(&s, &sol);
    let dirty = report_for(&s, &Perturbed { base: &sol, eps: 0.01 });
    // The bump adds 0.01 (u_x - u_yy) of order 0.1 in the interior.
    assert!(dirty.sup(HEAT_PDE) > 0.05, "{}", dirty.sup(HEAT_PDE));
    assert!(dirty.sup(HEAT_PDE) > 10.0 * clean.sup(HEAT_PDE));
    // It is flat to first order at y = 0; only the one-sided stencil's
    // truncation error reaches the gluing check.
    let shift = (dirty.sup(GLUING) - clean.sup(GLUING)).abs();
    assert!(shift < 0.05 * dirty.sup(HEAT_PDE), "{shift}");
}

#[test]
fn wrong_gluing_coefficient_leaves_a_gap() {
    // Solve with alpha = 1, check against alpha = 1.1: the gluing residual
    // stalls at a size independent of h.
    let (mut gaps, mut own) = (vec![], vec![]);
    for n in [128usize, 512] {
        let solved = spec(1.0, 0.0, "lib_sin_mix", n);
        let sol = DirectSolution::solve(&solved).unwrap();
        let checked = spec(1.1, 0.0, "lib_sin_mix", n);
        gaps.push(report_for(&checked, &sol).sup(GLUING));
        own.push(report_for(&solved, &sol).sup(GLUING));
    }
    assert!(gaps[1] > 0.5 * gaps[0], "{gaps:?}");
    assert!(own[1] < 0.25 * own[0] && own[1] < 0.2 * gaps[1], "{own:?} vs {gaps:?}");
}

#[test]
fn order_fit_recovers_known_rates() {
    let grids = [64, 128, 256];
    let v: Vec<f64> = grids.iter().map(|&n| 3.0 / (n * n) as f64).collect();
    let f = OrderFit::new("synthetic", &grids, v.clone(), v);
    assert!((f.order.unwrap() - 2.0).abs() < 1e-12);
    assert!(f.spread.abs() < 1e-12 && f.monotone() && f.order_at_least(1.9));
    let exact = OrderFit::new("exact", &grids, vec![0.0; 3], vec![0.0; 3]);
    assert!(exact.order.is_none() && exact.order_at_least(5.0));
}

#[test]
fn convergence_needs_three_grids() {
    let s = spec(1.0, 0.0, "lib_xy", 32);
    assert!(convergence(&s, &[32, 64], None).unwrap_err().is_config());
}

#[test]
fn manufactured_study_reports_errors() {
    let s = spec(1.0, 0.0, "zero", 32);
    let case = ManufacturedCase::standard(&s.params, &s.curve).unwrap();
    let r = manufactured_check(&s, &case).unwrap();
    assert!(r.sup_error < 1e-3);
    assert_eq!(r.residuals.conditions.len(), 6);
    let st = convergence(&s, &[32, 64, 128], Some(&case)).unwrap();
    assert!(st.errors.as_ref().unwrap().order.unwrap() > 1.5);
    assert!(st.fit(BOUNDARY_ZERO).unwrap().order.is_none());
}
