use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use spiraldim::{
    box_count, build_profile, fit_dimension_with, sausage_area, to_polar, FitModel, Method,
    WindowPolicy,
};
use spiraldim::boxdim::DEFAULT_GRID_FACTOR;
use spiraldim_bench::{damped_curve, damped_trajectory, power_spiral};

fn integration(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrate");
    group.sample_size(10);
    for t_end in [1e3, 1e4] {
        group.bench_with_input(BenchmarkId::from_parameter(t_end), &t_end, |b, &t| {
            b.iter(|| damped_trajectory(1.0, black_box(t)))
        });
    }
    group.finish();

    let traj = damped_trajectory(1.0, 1e4);
    c.bench_function("to_polar t_end=1e4", |b| b.iter(|| to_polar(black_box(&traj), true).unwrap()));
}

fn measurement(c: &mut Criterion) {
    let spiral = power_spiral(0.5, 2000.0);
    let mut group = c.benchmark_group("sausage_area");
    group.sample_size(10);
    for eps in [1e-2, 1e-3] {
        group.bench_with_input(BenchmarkId::from_parameter(eps), &eps, |b, &e| {
            b.iter(|| sausage_area(&spiral, black_box(e), DEFAULT_GRID_FACTOR).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("box_count");
    group.sample_size(10);
    for eps in [1e-2, 1e-3] {
        group.bench_with_input(BenchmarkId::from_parameter(eps), &eps, |b, &e| {
            b.iter(|| box_count(&spiral, black_box(e)).unwrap())
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let curve = damped_curve(4.0 / 3.0, 1e4);
    let mut group = c.benchmark_group("profile_and_fit");
    group.sample_size(10);
    for method in [Method::SausageGrid, Method::BoxCount] {
        group.bench_function(method.to_string(), |b| {
            b.iter(|| {
                let p = build_profile(&curve, 0.1, 2e-3, method).unwrap();
                fit_dimension_with(&p, WindowPolicy::AutoPlateau, FitModel::HeadCorrected).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, integration, measurement, pipeline);
criterion_main!(benches);
