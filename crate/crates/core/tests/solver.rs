use mixedsolve_core::config::ProblemConfig;
use mixedsolve_core::functions::{builtin, Poly2};
use mixedsolve_core::geometry::{to_characteristic, CharCurve, CurveShape};
use mixedsolve_core::greens::GluingParams;
use mixedsolve_core::manufactured::{ManufacturedCase, Poly1};
use mixedsolve_core::solver::*;
use mixedsolve_core::Error;
use std::collections::BTreeMap;

fn spec(alpha: f64, beta: f64, forcing: &str, n: usize) -> ProblemSpec {
    ProblemConfig::default_with(alpha, beta, forcing, n).build().unwrap()
}

const PROBES: [(f64, f64); 7] =
    [(0.5, 0.5), (0.25, 0.1), (0.9, 0.7), (0.6, -0.2), (0.3, -0.1), (0.8, 0.0), (0.99, 0.01)];

#[test]
fn zero_forcing_gives_zero_solution() {
    for (a, b) in [(1.0, 0.0), (0.0, 1.0), (2.0, 1.0)] {
        let s = spec(a, b, "zero", 64);
        let sol = DirectSolution::solve(&s).unwrap();
        let f = SolutionField::sample(&sol, &s.curve, 8, 8, MethodTag::Direct);
        assert!(f.max_abs() < 1e-14);
    }
}

#[test]
fn manufactured_solutions_are_reproduced() {
    for (a, b, tol) in [(1.0, 0.0, 2e-5), (0.0, 1.0, 5e-5), (2.0, 1.0, 2e-5)] {
        let base = spec(a, b, "zero", 128);
        let case = ManufacturedCase::standard(&base.params, &base.curve).unwrap();
        let mut s = base.clone();
        s.forcing = case.forcing();
        let sol = DirectSolution::solve(&s).unwrap();
        let e = PROBES.iter().map(|&(x, y)| (sol.u(x, y) - case.u(x, y)).abs()).fold(0.0, f64::max);
        assert!(e < tol, "({a},{b}): {e:e}");
    }
}

#[test]
fn traces_satisfy_their_own_gluing_relation() {
    for (a, b) in [(1.0, 0.0), (0.0, 1.0)] {
        let s = spec(a, b, "lib_sin_mix", 128);
        let ts = solve_trace_full(&s).unwrap();
        assert!(ts.gluing_defect <= 10.0 * s.grid.h, "{}", ts.gluing_defect);
        assert_eq!(ts.traces.tau[0], 0.0);
    }
}

#[test]
fn hyperbolic_formulas_agree() {
    let s = spec(1.0, 1.0, "lib_exp_mix", 64);
    let sol = DirectSolution::solve(&s).unwrap();
    for &(x, y) in &[(0.6, -0.2), (0.3, -0.1), (0.5, -0.05)] {
        let p = to_characteristic(x, y);
        let d = (sol.hyperbolic(p.xi, p.eta) - sol.hyperbolic_cauchy(p.xi, p.eta)).abs();
        assert!(d < 1e-6, "{d:e}");
    }
}

#[test]
fn both_pipelines_agree_and_refine() {
    let mut prev = f64::INFINITY;
    for n in [32usize, 64] {
        let s = spec(2.0, 1.0, "lib_sin_mix", n);
        let d = DirectSolution::solve(&s).unwrap();
        let k = apply_linv_kernel(&ClosedKernel::build(&s).unwrap()).unwrap();
        let e = PROBES.iter().map(|&(x, y)| (d.u(x, y) - k.u(x, y)).abs()).fold(0.0, f64::max);
        assert!(e < 0.05 / n as f64 && e < prev, "n={n}: {e:e}");
        prev = e;
    }
}

#[test]
fn closed_kernel_is_causal() {
    let s = spec(1.0, 0.0, "zero", 32);
    let k = ClosedKernel::build(&s).unwrap();
    assert_eq!(k.eval(0.3, 0.5, 0.6, 0.2).unwrap(), 0.0);
    assert_eq!(k.eval(0.3, -0.05, 0.5, -0.1).unwrap(), 0.0);
    assert!(k.eval(0.6, 0.5, 0.3, 0.2).unwrap() != 0.0);
}

#[test]
fn field_csv_has_headers_and_regions() {
    let s = spec(1.0, 0.0, "lib_xy", 32);
    let sol = DirectSolution::solve(&s).unwrap();
    let f = SolutionField::sample(&sol, &s.curve, 8, 8, MethodTag::Direct);
    let csv = f.to_csv();
    assert!(csv.starts_with("x,y,u,region\n"));
    assert!(csv.contains(",hyperbolic\n") && csv.contains(",parabolic\n") && csv.contains(",type_line\n"));
    assert_eq!(f.parabolic_csv().lines().count() + f.hyperbolic_csv().lines().count() - 1, csv.lines().count());
    assert!(sol.traces.to_csv().starts_with("x,"));
}

#[test]
fn manufactured_family_rejects_unsupported_data() {
    let q = builtin("q_default", &BTreeMap::new()).unwrap();
    let p = GluingParams::new(1.0, 0.0, q).unwrap();
    let line = CharCurve::linear(0.75).unwrap();
    let f1 = Poly2::new(vec![vec![0.0, 1.0]]);
    // tau'(0) != 0 is inconsistent with alpha != 0.
    let r = ManufacturedCase::new(&p, &line, Poly1(vec![0.0, 1.0]), f1.clone());
    assert!(matches!(r, Err(Error::Construction(_))));
    let curved = CharCurve::new(CurveShape::Power { l: 0.75, p: 1.5 }, false).unwrap();
    assert!(matches!(ManufacturedCase::new(&p, &curved, Poly1(vec![0.0, 0.0, 1.0]), f1), Err(Error::Construction(_))));
}

#[test]
fn invalid_problems_are_config_errors() {
    assert!(ProblemConfig::default_with(0.0, 0.0, "zero", 32).build().unwrap_err().is_config());
    assert!(ProblemConfig::default_with(1.0, 0.0, "no_such_field", 32).build().unwrap_err().is_config());
    let mut c = ProblemConfig::default_with(1.0, 0.0, "zero", 32);
    c.curve = CurveShape::Degenerate;
    assert!(c.build().unwrap_err().is_config());
}

#[test]
fn sequential_and_parallel_modes_agree_bitwise() {
    use mixedsolve_core::exec::{set_mode, ExecMode};
    let s = spec(0.0, 1.0, "lib_bump", 64);
    let run = |m| {
        set_mode(m);
        let sol = DirectSolution::solve(&s).unwrap();
        SolutionField::sample(&sol, &s.curve, 8, 8, MethodTag::Direct).to_csv()
    };
    let seq = run(ExecMode::Sequential);
    let par = run(ExecMode::Parallel);
    assert_eq!(seq, par);
}
