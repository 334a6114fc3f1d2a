use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use pathcalc_core::exec::with_threads;
use pathcalc_core::functional::tampered;
use pathcalc_core::sfde::{euler_solve, simulate_map, solve_path, NoisePlan, PathNoise, SfdeModel};
use pathcalc_core::{Exec, StoppedPath, TimeGrid};
use proptest::prelude::*;

const N: usize = 64;

fn grid() -> TimeGrid {
    TimeGrid::new(1.0, N).unwrap()
}

/// Bounded model mixing the endpoint and running integral.
fn random_model(c: [f64; 4]) -> SfdeModel {
    SfdeModel::new(
        "random",
        1,
        1,
        move |_, p, o| o[0] = c[0] * (c[1] * p.endpoint(0) + p.left_sum(0) * p.dt()).tanh(),
        move |_, p, o| o[0] = 0.5 + c[2] * (c[3] * p.endpoint(0)).sin().abs(),
        10.0,
        10.0,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn solutions_ignore_initial_storage_past_the_stop(
        c in prop::array::uniform4(-1.0..1.0f64),
        k in 1..N / 2,
        seed in any::<u64>(),
    ) {
        let model = random_model(c);
        let start = StoppedPath::from_fn(grid(), |s| (3.0 * s).cos()).stopped_at(k).unwrap();
        let dirty = tampered(&start, k + 1..=N, seed);
        let a = solve_path(&model, &start.view(), 1.0, seed, 0, 1).unwrap();
        let b = solve_path(&model, &dirty.view(), 1.0, seed, 0, 1).unwrap();
        prop_assert_eq!(a.node_values(), b.node_values());
    }
}

#[test]
fn coefficients_never_see_the_future() {
    let leaked = Arc::new(AtomicBool::new(false));
    let flag = leaked.clone();
    let model = SfdeModel::new(
        "probe",
        1,
        1,
        move |_, p, o| {
            if p.raw_sample(p.stop_index() + 1, 0).is_some() {
                flag.store(true, Ordering::Relaxed);
            }
            o[0] = p.endpoint(0);
        },
        |_, _, o| o[0] = 1.0,
        1.0,
        1.0,
    )
    .unwrap();
    let start = StoppedPath::constant(grid(), &[1.0]).stopped_at(0).unwrap();
    solve_path(&model, &start.view(), 1.0, 3, 0, 1).unwrap();
    assert!(!leaked.load(Ordering::Relaxed));
}

#[test]
fn worker_count_does_not_change_results() {
    let model = SfdeModel::builtin("linear-pd", 1.0).unwrap();
    let start = StoppedPath::constant(grid(), &[1.0]).stopped_at(0).unwrap();
    let plan = NoisePlan::new(11, 300).with_exec(Exec::Parallel);
    let run = || simulate_map(&model, &start, 1.0, &plan, |_, x| Ok(x.node_values())).unwrap();
    let one = with_threads(1, run);
    let three = with_threads(3, run);
    let seq = simulate_map(&model, &start, 1.0, &plan.with_exec(Exec::Sequential), |_, x| Ok(x.node_values())).unwrap();
    assert_eq!(one, three);
    assert_eq!(one, seq);
}

#[test]
fn zero_noise_is_the_explicit_euler_recursion() {
    let model = SfdeModel::new("decay", 1, 1, |_, p, o| o[0] = -p.endpoint(0), |_, _, o| o[0] = 0.0, 1.0, 1.0).unwrap();
    let start = StoppedPath::constant(grid(), &[2.0]).stopped_at(0).unwrap();
    let x = solve_path(&model, &start.view(), 1.0, 5, 0, 1).unwrap();
    let dt = grid().dt();
    let mut expect = 2.0;
    for i in 0..=N {
        assert_eq!(x.value(i, 0), expect, "node {i}");
        expect += -expect * dt;
    }
    let zero = SfdeModel::builtin("drift1", 1.0).unwrap();
    let y = euler_solve(&zero, &start.view(), 0.5, &mut |o| o[0] = 0.0).unwrap();
    assert!((y.endpoint(0) - 2.5).abs() < 1e-12);
}

#[test]
fn coarse_increments_sum_fine_ones() {
    let fine_dt = 1.0 / 64.0;
    let mut fine = PathNoise::new(9, 4, 1, fine_dt, 1, 0);
    let mut coarse = PathNoise::new(9, 4, 1, fine_dt, 4, 0);
    for _ in 0..8 {
        let mut sum = 0.0;
        for _ in 0..4 {
            let mut o = [0.0];
            fine.next_increment(&mut o);
            sum += o[0];
        }
        let mut c = [0.0];
        coarse.next_increment(&mut c);
        assert!((sum - c[0]).abs() < 1e-15);
    }
}
