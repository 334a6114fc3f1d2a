//! Euler–Maruyama for path-dependent SDEs with non-anticipative
//! coefficients, Monte Carlo expectations and sampled assumption checks.
//!
//! Coefficients receive a view that physically ends at the current node,
//! so a coefficient cannot read the future even by accident.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::functional::{evaluate, Functional};
use crate::path::{PathView, StoppedPath, TimeGrid};
use crate::stats::{fit_line, McEstimate};

/// `(s, path stopped at s, out)`; writes the coefficient into `out`.
pub type Coefficient = Arc<dyn Fn(f64, &PathView<'_>, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct SfdeModel {
    pub name: String,
    /// State dimension n.
    pub state_dim: usize,
    /// Noise dimension d.
    pub noise_dim: usize,
    /// Drift, length n.
    pub b: Coefficient,
    /// Diffusion, n x d row-major.
    pub sigma: Coefficient,
    pub lipschitz_c: f64,
    pub bound_k: f64,
}

impl fmt::Debug for SfdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SfdeModel")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("lipschitz_c", &self.lipschitz_c)
            .field("bound_k", &self.bound_k)
            .finish()
    }
}

pub const MODEL_IDS: [&str; 5] = ["zero", "drift1", "bm", "linear-pd", "tanh-pd"];

/// Clipping radius for the linear path-dependent model.
pub const LINEAR_PD_CLIP: f64 = 10.0;

fn left_integral(p: &PathView<'_>, j: usize) -> f64 {
    p.left_sum(j) * p.dt()
}

impl SfdeModel {
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        noise_dim: usize,
        b: impl Fn(f64, &PathView<'_>, &mut [f64]) + Send + Sync + 'static,
        sigma: impl Fn(f64, &PathView<'_>, &mut [f64]) + Send + Sync + 'static,
        lipschitz_c: f64,
        bound_k: f64,
    ) -> Result<Self> {
        if state_dim == 0 || noise_dim == 0 {
            return Err(Error::Domain("model dimensions must be positive".into()));
        }
        if !(lipschitz_c > 0.0 && bound_k > 0.0) {
            return Err(Error::Domain("declared Lipschitz constant and bound must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            state_dim,
            noise_dim,
            b: Arc::new(b),
            sigma: Arc::new(sigma),
            lipschitz_c,
            bound_k,
        })
    }

    /// Scalar model with constant coefficients.
    pub fn constant(name: &str, b: f64, sigma: f64) -> Self {
        let k = (b.abs() + sigma.abs()).max(1.0);
        Self::new(name, 1, 1, move |_, _, o| o[0] = b, move |_, _, o| o[0] = sigma, 1.0, k).expect("valid constants")
    }

    /// Built-in scalar models. `horizon` enters the declared Lipschitz
    /// constant of the integral-dependent ones.
    pub fn builtin(id: &str, horizon: f64) -> Result<Self> {
        match id {
            "zero" => Ok(Self::constant("zero", 0.0, 0.0)),
            "drift1" => Ok(Self::constant("drift1", 1.0, 0.0)),
            "bm" => Ok(Self::constant("bm", 0.0, 1.0)),
            "tanh-pd" => Self::new(
                "tanh-pd",
                1,
                1,
                |_, p, o| o[0] = left_integral(p, 0).tanh(),
                |_, _, o| o[0] = 1.0,
                horizon,
                2.0,
            ),
            "linear-pd" => {
                let r = LINEAR_PD_CLIP;
                Self::new(
                    "linear-pd",
                    1,
                    1,
                    move |_, p, o| o[0] = left_integral(p, 0).clamp(-r, r),
                    move |_, p, o| o[0] = p.endpoint(0).clamp(-r, r),
                    horizon + 1.0,
                    2.0 * r,
                )
            }
            _ => Err(Error::Parse(format!("unknown model '{id}'; valid ids: {}", MODEL_IDS.join(", ")))),
        }
    }

    pub fn drift(&self, s: f64, p: &PathView<'_>) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        (self.b)(s, p, &mut out);
        out
    }

    pub fn diffusion(&self, s: f64, p: &PathView<'_>) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim * self.noise_dim];
        (self.sigma)(s, p, &mut out);
        out
    }
}

/// Ensemble parameters. Path `j` draws from its own stream of the seed, so
/// results do not depend on how paths are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoisePlan {
    pub seed: u64,
    pub n_paths: usize,
    pub exec: Exec,
}

impl NoisePlan {
    pub fn new(seed: u64, n_paths: usize) -> Self {
        Self { seed, n_paths, exec: Exec::default() }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

/// Brownian increments of one path, keyed by `(seed, path, fine step)`.
///
/// Each fine step consumes a fixed number of generator words, so the
/// increment at a step can be located without drawing the earlier ones.
/// A coarse increment is the sum of `substeps` consecutive fine ones,
/// which keeps resolutions driven by the same Brownian path.
pub struct PathNoise {
    rng: ChaCha8Rng,
    dim: usize,
    substeps: usize,
    scale: f64,
    buf: Vec<f64>,
}

impl PathNoise {
    pub fn new(seed: u64, path: usize, dim: usize, fine_dt: f64, substeps: usize, start_step: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path as u64);
        let words_per_step = 4 * dim.div_ceil(2) as u128;
        rng.set_word_pos(words_per_step * (start_step * substeps) as u128);
        Self { rng, dim, substeps: substeps.max(1), scale: fine_dt.sqrt(), buf: vec![0.0; dim + 1] }
    }

    fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `dim` standard normals by Box–Muller, always consuming whole pairs.
    fn standard_normals(&mut self) {
        let mut j = 0;
        while j < self.dim {
            let r = (-2.0 * self.uniform_open().ln()).sqrt();
            let theta = std::f64::consts::TAU * self.uniform_open();
            self.buf[j] = r * theta.cos();
            self.buf[j + 1] = r * theta.sin();
            j += 2;
        }
    }

    pub fn next_increment(&mut self, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for _ in 0..self.substeps {
            self.standard_normals();
            for (o, z) in out.iter_mut().zip(&self.buf) {
                *o += z * self.scale;
            }
        }
    }
}

fn check_initial(model: &SfdeModel, initial: &PathView<'_>, until: f64) -> Result<usize> {
    if initial.dim() != model.state_dim {
        return Err(Error::Dimension { expected: model.state_dim, got: initial.dim() });
    }
    let end = initial.grid().index_of(until)?;
    if end < initial.stop_index() {
        return Err(Error::Domain(format!("cannot solve backwards from {} to {until}", initial.time())));
    }
    Ok(end)
}

/// Solves from the stop time of `initial` to `until`. `noise` fills the
/// increment for each step in order.
pub fn euler_solve(
    model: &SfdeModel,
    initial: &PathView<'_>,
    until: f64,
    noise: &mut dyn FnMut(&mut [f64]),
) -> Result<StoppedPath> {
    let end = check_initial(model, initial, until)?;
    let grid = *initial.grid();
    let n = model.state_dim;
    let d = model.noise_dim;
    let k = initial.stop_index();
    let dt = grid.dt();

    let mut x = vec![0.0; (end + 1) * n];
    let mut prefix = vec![0.0; (end + 1) * n];
    for i in 0..=k {
        for j in 0..n {
            x[i * n + j] = initial.value(i, j);
            if i > 0 {
                prefix[i * n + j] = prefix[(i - 1) * n + j] + x[(i - 1) * n + j];
            }
        }
    }

    let mut b = vec![0.0; n];
    let mut s = vec![0.0; n * d];
    let mut dw = vec![0.0; d];
    for i in k..end {
        let t = grid.node(i);
        {
            let view = PathView::over(grid, n, &x[..(i + 1) * n], &prefix[..(i + 1) * n], i);
            (model.b)(t, &view, &mut b);
            (model.sigma)(t, &view, &mut s);
        }
        noise(&mut dw);
        for a in 0..n {
            let mut step = b[a] * dt;
            for c in 0..d {
                step += s[a * d + c] * dw[c];
            }
            let next = x[i * n + a] + step;
            if !next.is_finite() {
                return Err(Error::BlowUp { node: i + 1 });
            }
            x[(i + 1) * n + a] = next;
            prefix[(i + 1) * n + a] = prefix[i * n + a] + x[i * n + a];
        }
    }
    Ok(StoppedPath::from_parts(grid, n, x, prefix, end))
}

/// Solves path `j` of the plan on the grid of `initial`, with increments
/// aggregated from a grid `substeps` times finer.
pub fn solve_path(
    model: &SfdeModel,
    initial: &PathView<'_>,
    until: f64,
    seed: u64,
    path: usize,
    substeps: usize,
) -> Result<StoppedPath> {
    let fine_dt = initial.dt() / substeps as f64;
    let mut noise = PathNoise::new(seed, path, model.noise_dim, fine_dt, substeps, initial.stop_index());
    euler_solve(model, initial, until, &mut |out| noise.next_increment(out))
}

/// Simulates every path of the plan and maps it through `g`, returning the
/// results in path order. Paths are dropped after mapping.
pub fn simulate_map<T, G>(
    model: &SfdeModel,
    initial: &StoppedPath,
    until: f64,
    plan: &NoisePlan,
    g: G,
) -> Result<Vec<T>>
where
    T: Send,
    G: Fn(usize, &StoppedPath) -> Result<T> + Sync + Send,
{
    check_initial(model, &initial.view(), until)?;
    plan.exec
        .try_map(plan.n_paths, |j| {
            let x = solve_path(model, &initial.view(), until, plan.seed, j, 1)?;
            g(j, &x)
        })
        .map_err(|(path, e)| Error::Ensemble { path, source: Box::new(e) })
}

pub fn simulate_ensemble(
    model: &SfdeModel,
    initial: &StoppedPath,
    until: f64,
    plan: &NoisePlan,
) -> Result<Vec<StoppedPath>> {
    simulate_map(model, initial, until, plan, |_, x| Ok(x.clone()))
}

pub fn mc_expectation(
    f: &dyn Functional,
    model: &SfdeModel,
    initial: &StoppedPath,
    at: f64,
    plan: &NoisePlan,
) -> Result<McEstimate> {
    let values = simulate_map(model, initial, at, plan, |_, x| evaluate(f, &x.view()))?;
    Ok(McEstimate::from_samples(&values))
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongLevel {
    pub steps: usize,
    pub error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongReport {
    pub reference_steps: usize,
    pub levels: Vec<StrongLevel>,
    /// Slope of `log2(error)` against `log2(dt)`.
    pub fitted_order: f64,
}

/// Mean absolute terminal error of each resolution against a finer
/// reference driven by the same Brownian path.
pub fn strong_convergence(
    model: &SfdeModel,
    x0: &[f64],
    horizon: f64,
    resolutions: &[usize],
    reference_steps: usize,
    plan: &NoisePlan,
) -> Result<StrongReport> {
    for &r in resolutions {
        if r == 0 || !reference_steps.is_multiple_of(r) {
            return Err(Error::Domain(format!("{r} steps do not divide the reference {reference_steps}")));
        }
    }
    let fine = TimeGrid::new(horizon, reference_steps)?;
    let start_fine = StoppedPath::constant(fine, x0).stopped_at(0)?;
    let starts = resolutions
        .iter()
        .map(|&r| StoppedPath::constant(TimeGrid::new(horizon, r)?, x0).stopped_at(0))
        .collect::<Result<Vec<_>>>()?;
    let errors = plan
        .exec
        .try_map(plan.n_paths, |j| {
            let reference = solve_path(model, &start_fine.view(), horizon, plan.seed, j, 1)?;
            let target = reference.endpoint_vec();
            starts
                .iter()
                .zip(resolutions)
                .map(|(s, &r)| {
                    let x = solve_path(model, &s.view(), horizon, plan.seed, j, reference_steps / r)?;
                    let e = x.endpoint_vec();
                    Ok(e.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .map_err(|(path, e)| Error::Ensemble { path, source: Box::new(e) })?;
    let levels: Vec<StrongLevel> = resolutions
        .iter()
        .enumerate()
        .map(|(l, &steps)| {
            let col: Vec<f64> = errors.iter().map(|e| e[l]).collect();
            let est = McEstimate::from_samples(&col);
            StrongLevel { steps, error: est.mean, stderr: est.stderr }
        })
        .collect();
    let xs: Vec<f64> = resolutions.iter().map(|&r| (horizon / r as f64).log2()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.error.log2()).collect();
    let (_, slope) = fit_line(&xs, &ys);
    Ok(StrongReport { reference_steps, levels, fitted_order: slope })
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub declared: f64,
    pub max_observed: f64,
    pub samples: usize,
    pub pass: bool,
}

const CHECK_STEPS: usize = 32;

/// Random test path: a level in `(-10, 10)` plus a random walk.
fn random_path(rng: &mut ChaCha8Rng, grid: TimeGrid, dim: usize, spread: f64) -> StoppedPath {
    let mut samples = Vec::with_capacity((grid.steps() + 1) * dim);
    let mut level: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
    for _ in 0..=grid.steps() {
        for x in level.iter_mut() {
            samples.push(*x);
            *x += spread * rng.random_range(-1.0..1.0);
        }
    }
    StoppedPath::new(grid, dim, samples).expect("finite path")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_grid(horizon: f64) -> TimeGrid {
    TimeGrid::new(horizon, CHECK_STEPS).expect("positive horizon")
}

/// Largest sampled `(|b1 - b2| + |s1 - s2|) / ||x1 - x2||_s` over random
/// pairs, including nearby pairs.
pub fn check_lipschitz(model: &SfdeModel, horizon: f64, samples: usize, seed: u64) -> AssumptionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = check_grid(horizon);
    let n = model.state_dim;
    let mut worst = 0.0_f64;
    for m in 0..samples {
        let x1 = random_path(&mut rng, grid, n, 0.5);
        let x2 = if m % 2 == 0 {
            random_path(&mut rng, grid, n, 0.5)
        } else {
            let eps = 10f64.powf(rng.random_range(-4.0..0.0));
            let shift = random_path(&mut rng, grid, n, 0.5);
            let vals: Vec<f64> =
                x1.node_values().iter().zip(shift.node_values()).map(|(a, b)| a + eps * b / 10.0).collect();
            StoppedPath::new(grid, n, vals).expect("finite path")
        };
        let k = rng.random_range(0..=CHECK_STEPS);
        let (v1, v2) = (x1.stopped_at(k).expect("on grid"), x2.stopped_at(k).expect("on grid"));
        let (p1, p2) = (v1.view(), v2.view());
        let s = grid.node(k);
        let db = norm(&diff(&model.drift(s, &p1), &model.drift(s, &p2)));
        let ds = norm(&diff(&model.diffusion(s, &p1), &model.diffusion(s, &p2)));
        let dist = (0..=k).map(|i| norm(&diff(&row(&p1, i), &row(&p2, i)))).fold(0.0, f64::max);
        if dist > 0.0 {
            worst = worst.max((db + ds) / dist);
        }
    }
    AssumptionReport {
        declared: model.lipschitz_c,
        max_observed: worst,
        samples,
        pass: worst <= model.lipschitz_c * (1.0 + 1e-9),
    }
}

/// Largest sampled `|b| + |sigma|`.
pub fn check_bounded(model: &SfdeModel, horizon: f64, samples: usize, seed: u64) -> AssumptionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = check_grid(horizon);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let x = random_path(&mut rng, grid, model.state_dim, 0.5);
        let k = rng.random_range(0..=CHECK_STEPS);
        let v = x.stopped_at(k).expect("on grid");
        let s = grid.node(k);
        let size = norm(&model.drift(s, &v.view())) + norm(&model.diffusion(s, &v.view()));
        worst = worst.max(size);
    }
    AssumptionReport {
        declared: model.bound_k,
        max_observed: worst,
        samples,
        pass: worst <= model.bound_k * (1.0 + 1e-9),
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn row(p: &PathView<'_>, i: usize) -> Vec<f64> {
    (0..p.dim()).map(|j| p.value(i, j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{Constant, Endpoint, ScalarFn};

    fn start(n: usize, x: f64) -> StoppedPath {
        StoppedPath::constant(TimeGrid::new(1.0, n).unwrap(), &[x]).stopped_at(0).unwrap()
    }

    #[test]
    fn degenerate_dynamics() {
        let zero = SfdeModel::builtin("zero", 1.0).unwrap();
        let x = euler_solve(&zero, &start(16, 0.7).view(), 1.0, &mut |o| o[0] = 1.0).unwrap();
        assert!(x.node_values().iter().all(|&v| v == 0.7));

        let drift = SfdeModel::builtin("drift1", 1.0).unwrap();
        let x = euler_solve(&drift, &start(64, 0.0).view(), 1.0, &mut |o| o[0] = 0.3).unwrap();
        assert_eq!(x.endpoint(0), 1.0);

        let bm = SfdeModel::builtin("bm", 1.0).unwrap();
        let x = euler_solve(&bm, &start(16, 2.0).view(), 1.0, &mut |o| o[0] = 0.0).unwrap();
        assert!(x.node_values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn solve_respects_stop_and_grid() {
        let bm = SfdeModel::builtin("bm", 1.0).unwrap();
        let g = TimeGrid::new(1.0, 8).unwrap();
        let init = StoppedPath::from_fn(g, |t| t).stopped_at(4).unwrap();
        let x = solve_path(&bm, &init.view(), 0.75, 1, 0, 1).unwrap();
        assert_eq!(x.stop_index(), 6);
        for i in 0..=4 {
            assert_eq!(x.value(i, 0), g.node(i));
        }
        assert!(matches!(solve_path(&bm, &init.view(), 0.25, 1, 0, 1), Err(Error::Domain(_))));
        assert!(matches!(solve_path(&bm, &init.view(), 0.3, 1, 0, 1), Err(Error::GridAlignment { .. })));
    }

    #[test]
    fn blow_up_is_reported() {
        let m = SfdeModel::new("wild", 1, 1, |_, p, o| o[0] = p.endpoint(0).powi(8), |_, _, o| o[0] = 0.0, 1.0, 1.0)
            .unwrap();
        let r = euler_solve(&m, &start(64, 10.0).view(), 1.0, &mut |o| o[0] = 0.0);
        assert!(matches!(r, Err(Error::BlowUp { .. })));
    }

    #[test]
    fn coarse_increments_sum_fine_ones() {
        let mut fine = PathNoise::new(9, 3, 1, 0.25, 1, 0);
        let mut coarse = PathNoise::new(9, 3, 1, 0.25, 4, 0);
        let mut a = [0.0];
        let mut total = 0.0;
        for _ in 0..4 {
            fine.next_increment(&mut a);
            total += a[0];
        }
        coarse.next_increment(&mut a);
        assert!((a[0] - total).abs() < 1e-15);

        let mut skip = PathNoise::new(9, 3, 1, 0.25, 1, 2);
        let mut seq = PathNoise::new(9, 3, 1, 0.25, 1, 0);
        seq.next_increment(&mut a);
        seq.next_increment(&mut a);
        seq.next_increment(&mut a);
        let mut b = [0.0];
        skip.next_increment(&mut b);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn ensembles_are_reproducible_and_ordered() {
        let bm = SfdeModel::builtin("bm", 1.0).unwrap();
        let init = start(32, 0.0);
        let plan = NoisePlan::new(11, 8);
        let a = simulate_ensemble(&bm, &init, 1.0, &plan).unwrap();
        let b = simulate_ensemble(&bm, &init, 1.0, &plan.with_exec(Exec::Sequential)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.node_values(), y.node_values());
        }
        assert_ne!(a[0].node_values(), a[1].node_values());

        let drift = SfdeModel::builtin("drift1", 1.0).unwrap();
        let c = simulate_ensemble(&drift, &init, 1.0, &plan).unwrap();
        assert!(c.iter().all(|x| x.node_values() == c[0].node_values()));
    }

    #[test]
    fn brownian_terminal_mean() {
        let bm = SfdeModel::builtin("bm", 1.0).unwrap();
        let e = mc_expectation(&Endpoint(ScalarFn::Identity), &bm, &start(16, 0.0), 1.0, &NoisePlan::new(5, 10_000))
            .unwrap();
        assert!(e.mean.abs() < 4.0 / 100.0);
        assert!((e.stderr - 0.01).abs() < 1e-3);
    }

    #[test]
    fn expectation_examples() {
        let bm = SfdeModel::builtin("bm", 1.0).unwrap();
        let eps = 1.0 / 16.0;
        let e =
            mc_expectation(&Endpoint(ScalarFn::Square), &bm, &start(64, 0.0), eps, &NoisePlan::new(1, 20_000)).unwrap();
        assert!((e.mean - eps).abs() < 3.0 * e.stderr);

        let drift = SfdeModel::builtin("drift1", 1.0).unwrap();
        let e = mc_expectation(&Endpoint(ScalarFn::Identity), &drift, &start(64, 0.0), eps, &NoisePlan::new(1, 10))
            .unwrap();
        assert_eq!(e.mean, eps);

        let e = mc_expectation(&Constant(2.5), &bm, &start(64, 0.0), eps, &NoisePlan::new(1, 10)).unwrap();
        assert_eq!((e.mean, e.stderr), (2.5, 0.0));
    }

    #[test]
    fn assumption_checks() {
        let sin =
            SfdeModel::new("sin", 1, 1, |_, _, o| o[0] = 0.0, |_, p, o| o[0] = p.endpoint(0).sin(), 1.0, 1.0).unwrap();
        assert!(check_lipschitz(&sin, 1.0, 2000, 1).pass);
        let sq =
            SfdeModel::new("sq", 1, 1, |_, p, o| o[0] = p.endpoint(0).powi(2), |_, _, o| o[0] = 0.0, 1.0, 1.0).unwrap();
        let r = check_lipschitz(&sq, 1.0, 2000, 1);
        assert!(!r.pass && r.max_observed > 5.0);
        let c = SfdeModel::constant("c", 0.3, 0.2);
        assert_eq!(check_lipschitz(&c, 1.0, 100, 1).max_observed, 0.0);

        assert!(check_bounded(&SfdeModel::builtin("bm", 1.0).unwrap(), 1.0, 500, 2).pass);
        assert!(check_bounded(&SfdeModel::builtin("tanh-pd", 1.0).unwrap(), 1.0, 500, 2).pass);
        let lin = SfdeModel::new("x", 1, 1, |_, p, o| o[0] = p.endpoint(0), |_, _, o| o[0] = 0.0, 1.0, 1.0).unwrap();
        assert!(!check_bounded(&lin, 1.0, 500, 2).pass);
        for id in MODEL_IDS {
            let m = SfdeModel::builtin(id, 1.0).unwrap();
            assert!(check_lipschitz(&m, 1.0, 500, 3).pass, "{id}");
            assert!(check_bounded(&m, 1.0, 500, 3).pass, "{id}");
        }
        assert!(SfdeModel::builtin("nope", 1.0).is_err());
    }
}
