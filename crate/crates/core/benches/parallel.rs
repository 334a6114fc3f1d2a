use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pathcalc_core::frechet::estimate_riesz_measure;
use pathcalc_core::functional::{Product, QuadraticIntegral, Weight};
use pathcalc_core::sfde::{simulate_map, NoisePlan, SfdeModel};
use pathcalc_core::{Exec, RampFamily, StoppedPath, TimeGrid};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn ensemble(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let model = SfdeModel::builtin("tanh-pd", 1.0).unwrap();
    let start = StoppedPath::constant(grid, &[1.0]).stopped_at(0).unwrap();
    let mut g = c.benchmark_group("ensemble_2000x256");
    for (name, exec) in MODES {
        let plan = NoisePlan::new(1, 2000).with_exec(exec);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_map(&model, &start, 1.0, &plan, |_, x| Ok(x.endpoint(0))).unwrap())
        });
    }
    g.finish();
}

fn riesz(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0, 512).unwrap();
    let p = StoppedPath::from_fn(grid, |s| (4.0 * s).sin());
    let ramps = RampFamily::default();
    let mut g = c.benchmark_group("riesz_512");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("product", name), |b| {
            b.iter(|| estimate_riesz_measure(&Product, &p.view(), &ramps, None, exec).unwrap())
        });
        g.bench_function(BenchmarkId::new("quadratic-integral", name), |b| {
            b.iter(|| estimate_riesz_measure(&QuadraticIntegral(Weight::One), &p.view(), &ramps, None, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ensemble, riesz);
criterion_main!(benches);
