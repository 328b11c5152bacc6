//! One function per subcommand. Each fills `Output` with artifacts and
//! named checks; numeric failures propagate as errors.

use crate::output::Output;
use crate::run_config::RunConfig;
use mixedsolve_core::analysis::{
    b_block_norm_sq, check_apriori_fields, check_iterate_bounds, iterate_kernels, library, linv_at_points,
    quasinilpotency_trend, sample_closed_kernel, solve_spectral,
};
use mixedsolve_core::functions::{builtin, Poly2};
use mixedsolve_core::manufactured::ManufacturedCase;
use mixedsolve_core::num_complex::Complex64;
use mixedsolve_core::rhs::ForcingField;
use mixedsolve_core::solver::{ClosedKernel, DirectSolution, MethodTag, ProblemSpec, SolutionField};
use mixedsolve_core::verification::{at_resolution, convergence, residuals, ConvergenceStudy};
use mixedsolve_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn solve(spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let sol = DirectSolution::solve(spec)?;
    out.mark("trace_solve");
    let (nx, ny) = spec.field_resolution;
    let field = SolutionField::sample(&sol, &spec.curve, nx, ny, MethodTag::Direct);
    out.mark("reconstruct");
    let report = residuals(spec, &field, &sol)?;
    out.mark("residuals");

    out.write("omega0.csv", &field.parabolic_csv())?;
    out.write("omega1.csv", &field.hyperbolic_csv())?;
    out.write("traces.csv", &sol.traces.to_csv())?;
    out.write("lambda.csv", &spec.curve.lambda_csv())?;
    for c in &report.conditions {
        out.write(&format!("residual_{}.csv", c.name), &c.to_csv())?;
    }
    out.write_json("residuals.json", &report)?;

    let max_abs = field.max_abs();
    out.note("max_abs_u", max_abs);
    out.note("gluing_defect", sol.solve.gluing_defect);
    out.note("cells", spec.grid.cells());
    out.note("field_resolution", [nx, ny]);
    out.note("residual_sup", report.conditions.iter().map(|c| (c.name, c.sup)).collect::<Vec<_>>());
    out.check("finite_field", max_abs.is_finite(), format!("max |u| = {max_abs}"));
    Ok(())
}

fn write_study(out: &mut Output, study: &ConvergenceStudy) -> std::io::Result<()> {
    let mut csv = String::from("condition,n,sup,l2\n");
    for f in study.fits.iter().chain(study.errors.iter()) {
        for (k, n) in study.grids.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{}\n", f.name, n, f.sup[k], f.l2[k]));
        }
    }
    out.write("convergence.csv", &csv)?;
    out.write_json("convergence.json", study)
}

pub fn verify(cfg: &RunConfig, spec: &ProblemSpec, grids: &[usize], out: &mut Output) -> Result<()> {
    let study = convergence(spec, grids, None)?;
    out.mark("convergence");
    write_study(out, &study)?;
    let p = cfg.verify.min_order;
    for f in &study.fits {
        // Residual orders are fitted on L2 norms; sup norms are reported.
        let passed = f.order_l2.map_or(true, |o| o >= p);
        let detail = match f.order_l2 {
            Some(o) => format!("L2 order {o:.3} (sup order {:.3}), need >= {p}", f.order.unwrap_or(f64::NAN)),
            None => "exact to rounding".to_string(),
        };
        out.check(format!("order_{}", f.name), passed, detail);
    }
    out.note("grids", grids);
    Ok(())
}

pub fn converge(cfg: &RunConfig, spec: &ProblemSpec, grids: &[usize], out: &mut Output) -> Result<()> {
    let case = ManufacturedCase::standard(&spec.params, &spec.curve)?;
    let study = convergence(spec, grids, Some(&case))?;
    out.mark("convergence");
    write_study(out, &study)?;
    let p = cfg.verify.min_order;
    if let Some(e) = &study.errors {
        let o = e.order.unwrap_or(f64::INFINITY);
        out.check("solution_error_order", o >= p, format!("sup error {:?}, order {o:.3}, need >= {p}", e.sup));
        let last = *e.sup.last().unwrap_or(&f64::NAN);
        out.check("solution_error_decreases", e.sup.first().is_some_and(|f| last < *f), format!("{last:e}"));
    }
    out.note("grids", grids);
    Ok(())
}

/// Random cubic polynomials with f(0, 0) = 0, drawn from the run seed.
pub fn random_forcings(seed: u64, count: usize, spec: &ProblemSpec) -> Result<Vec<(String, ForcingField)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Vec::new();
    for k in 0..count {
        let mut c = vec![vec![0.0; 4]; 4];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                if i + j > 0 && i + j <= 3 {
                    *x = rng.gen_range(-1.0..1.0);
                }
            }
        }
        v.push((format!("random_{k}"), ForcingField::new(Arc::new(Poly2::new(c)), spec.forcing.smoothness)?));
    }
    Ok(v)
}

pub fn analyze(cfg: &RunConfig, spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let a = &cfg.analyze;
    let kernel = ClosedKernel::build(&at_resolution(spec, a.kernel_cells))?;
    let mut stack = sample_closed_kernel(&kernel, a.n4)?;
    out.mark("sample_kernel");
    iterate_kernels(&mut stack, a.n_max);
    out.mark("iterate_kernels");
    let rows = check_iterate_bounds(&stack);
    let trend = quasinilpotency_trend(&stack);
    let violations: usize = rows.iter().map(|r| r.violations + r.causality_breaks).sum();
    let min_slack = rows.iter().map(|r| r.min_slack).fold(f64::INFINITY, f64::min);
    out.check("iterate_bound", violations == 0, format!("{violations} violations, min slack {min_slack:.4}"));
    out.check("quasinilpotent_trend", trend.eventually_decreasing(), format!("roots {:?}", trend.roots));
    out.check("below_bound_curve", trend.below_bound_from(3.min(a.n_max)), "n >= 3");
    out.write_json("iterate_bounds.json", &rows)?;
    out.write_json("norms.json", &trend)?;
    out.write("norms.csv", &trend.to_csv())?;

    let b = b_block_norm_sq();
    out.check("b_block_norm", b <= a.b_norm_limit, format!("||B||^2 = {b:.6}, limit {}", a.b_norm_limit));
    out.note("b_block_norm_sq", b);
    out.note("m_measured", stack.m_measured);
    out.note("m_widened", stack.m_widened);
    out.mark("bounds");

    let mut forcings = Vec::new();
    for name in library() {
        forcings
            .push((name.to_string(), ForcingField::new(builtin(name, &Default::default())?, spec.forcing.smoothness)?));
    }
    forcings.extend(random_forcings(cfg.seed, a.random_forcings, spec)?);
    let apriori = check_apriori_fields(spec, &forcings, &a.apriori_grids)?;
    out.mark("apriori");
    let mut csv = String::from("forcing,n,rhs_ratio,sobolev_ratio\n");
    for r in &apriori {
        for (k, n) in r.grids.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{}\n", r.forcing, n, r.rhs_ratio[k], r.sobolev_ratio[k]));
        }
        let s = r.spread();
        out.check(
            format!("apriori_{}", r.forcing),
            s.is_finite() && s < a.max_apriori_spread,
            format!("spread {s:.4}"),
        );
    }
    out.write("apriori.csv", &csv)?;
    Ok(())
}

pub fn spectral(cfg: &RunConfig, spec: &ProblemSpec, lambdas: &[[f64; 2]], out: &mut Output) -> Result<()> {
    let s = &cfg.spectral;
    let kernel = ClosedKernel::build(&at_resolution(spec, s.kernel_cells))?;
    let stack = sample_closed_kernel(&kernel, s.n4)?;
    let linv_f = linv_at_points(&kernel, &stack.points)?;
    out.mark("sample_kernel");
    let mut sols = Vec::new();
    let mut csv = String::from("lambda_re,lambda_im,x,y,u_re,u_im\n");
    for &[re, im] in lambdas {
        let sol = solve_spectral(&stack, Complex64::new(re, im), &linv_f)?;
        out.check(
            format!("spectral_{re}_{im}"),
            sol.residual <= s.max_residual,
            format!("{:?}, {} iterations, residual {:e}", sol.method, sol.iterations, sol.residual),
        );
        for (p, u) in stack.points.iter().zip(&sol.u) {
            csv.push_str(&format!("{re},{im},{},{},{},{}\n", p.x, p.y, u.re, u.im));
        }
        sols.push(sol);
    }
    out.mark("spectral_solves");
    out.write_json("spectral.json", &sols)?;
    out.write("spectral_u.csv", &csv)?;
    Ok(())
}
