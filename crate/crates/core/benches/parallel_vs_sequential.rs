use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixedsolve_core::config::ProblemConfig;
use mixedsolve_core::exec::{set_mode, ExecMode};
use mixedsolve_core::solver::{ClosedKernel, DirectSolution, MethodTag, SolutionField};

fn modes(c: &mut Criterion) {
    let spec = ProblemConfig::default_with(1.0, 0.0, "lib_sin_mix", 128).build().unwrap();
    let sol = DirectSolution::solve(&spec).unwrap();
    let mut g = c.benchmark_group("reconstruct_field");
    g.sample_size(10);
    for (name, mode) in [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)] {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            set_mode(m);
            b.iter(|| SolutionField::sample(&sol, &spec.curve, 32, 32, MethodTag::Direct));
        });
    }
    g.finish();

    let small = ProblemConfig::default_with(1.0, 0.0, "lib_sin_mix", 48).build().unwrap();
    let mut g = c.benchmark_group("closed_kernel_build");
    g.sample_size(10);
    for (name, mode) in [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)] {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            set_mode(m);
            b.iter(|| ClosedKernel::build(&small).unwrap());
        });
    }
    g.finish();
    set_mode(ExecMode::Parallel);
}

criterion_group!(benches, modes);
criterion_main!(benches);
