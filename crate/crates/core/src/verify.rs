//! Numerical checks of the functional Itô formula, the generator identity
//! in both derivative forms, and the coherence of Dupire and Fréchet
//! derivatives.

use serde::Serialize;

use crate::dupire::{horizontal_derivative, numerical_dupire_jet, vertical_derivative, vertical_hessian, FdConfig};
use crate::error::{Error, Result};
use crate::frechet::{atom_at_t, bilinear_atom, bilinear_ramp_limit, ramp_limit_along, time_derivative, RampFamily};
use crate::functional::{evaluate, Functional};
use crate::matrix::Matrix;
use crate::path::{PathView, StoppedPath, TimeGrid};
use crate::sfde::{solve_path, NoisePlan, SfdeModel};
use crate::stats::{fit_line, lagrange_weights, McEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    /// Resolution (steps) or epsilon, depending on the study.
    pub level: f64,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub levels: Vec<Level>,
    /// Least-squares slope of `log2(error)` against `log2(step)`; `None`
    /// when every error is at round-off.
    pub fitted_order: Option<f64>,
    pub intercept: f64,
    pub intercept_stderr: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum QvMode<'a> {
    /// `(dX_i)(dX_i)^T`.
    Realized,
    /// `sigma sigma^T dt` from the model.
    Dt(&'a SfdeModel),
}

/// Errors below this are treated as round-off when fitting orders.
const ROUNDOFF: f64 = 1e-12;

fn fitted_order(steps: &[f64], errors: &[f64]) -> Option<f64> {
    if errors.iter().any(|&e| !(e > ROUNDOFF)) || errors.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = steps.iter().map(|s| s.log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    Some(fit_line(&xs, &ys).1)
}

/// `u(X_T) - u(X_0)` minus the discretized right side of the functional
/// Itô formula along the full path `x`.
pub fn ito_residual(f: &dyn Functional, x: &StoppedPath, cfg: &FdConfig, qv: QvMode<'_>) -> Result<f64> {
    let n = x.stop_index();
    let d = x.dim();
    let dt = x.dt();
    let base = x.view();
    let at = |i: usize| base.stopped_at(i);
    let lhs = evaluate(f, &at(n)?)? - evaluate(f, &at(0)?)?;
    let mut ds = 0.0;
    let mut dx = 0.0;
    let mut qv_term = 0.0;
    let mut inc = vec![0.0; d];
    for i in 0..n {
        let p = at(i)?;
        let wrap = |e: Error| Error::Evaluation(format!("node {i}: {e}"));
        ds += horizontal_derivative(f, &p, cfg).map_err(wrap)? * dt;
        let grad = vertical_derivative(f, &p, cfg).map_err(wrap)?;
        let hess = vertical_hessian(f, &p, cfg).map_err(wrap)?;
        for (j, x) in inc.iter_mut().enumerate() {
            *x = base.value(i + 1, j) - base.value(i, j);
        }
        dx += grad.iter().zip(&inc).map(|(g, h)| g * h).sum::<f64>();
        qv_term += match qv {
            QvMode::Realized => hess.quadratic(&inc),
            QvMode::Dt(model) => {
                let s = model.diffusion(x.grid().node(i), &p);
                hess.contract_outer(&s, model.noise_dim) * dt
            }
        };
    }
    Ok(lhs - (ds + dx + 0.5 * qv_term))
}

/// RMS Itô residual over an ensemble at each resolution. All resolutions
/// are driven by the same Brownian path per ensemble member, generated on
/// the finest grid and summed onto coarser ones.
#[allow(clippy::too_many_arguments)]
pub fn ito_convergence_study(
    f: &dyn Functional,
    model: &SfdeModel,
    x0: &[f64],
    horizon: f64,
    resolutions: &[usize],
    plan: &NoisePlan,
    cfg: &FdConfig,
    realized: bool,
) -> Result<ConvergenceReport> {
    let finest = *resolutions.iter().max().ok_or_else(|| Error::Domain("no resolutions".into()))?;
    for &r in resolutions {
        if !r.is_power_of_two() {
            return Err(Error::Domain(format!("resolution {r} is not a power of two")));
        }
    }
    let starts = resolutions
        .iter()
        .map(|&r| StoppedPath::constant(TimeGrid::new(horizon, r)?, x0).stopped_at(0))
        .collect::<Result<Vec<_>>>()?;
    let residuals = plan
        .exec
        .try_map(plan.n_paths, |j| {
            starts
                .iter()
                .zip(resolutions)
                .map(|(s, &r)| {
                    let x = solve_path(model, &s.view(), horizon, plan.seed, j, finest / r)?;
                    let qv = if realized { QvMode::Realized } else { QvMode::Dt(model) };
                    ito_residual(f, &x, cfg, qv)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .map_err(|(path, e)| Error::Ensemble { path, source: Box::new(e) })?;

    let mut levels = Vec::with_capacity(resolutions.len());
    for (l, &r) in resolutions.iter().enumerate() {
        let sq: Vec<f64> = residuals.iter().map(|v| v[l] * v[l]).collect();
        let ms = McEstimate::from_samples(&sq);
        let rms = ms.mean.sqrt();
        let stderr = if rms > 0.0 { ms.stderr / (2.0 * rms) } else { 0.0 };
        levels.push(Level { level: r as f64, value: rms, reference: 0.0, error: rms, stderr });
    }
    let steps: Vec<f64> = resolutions.iter().map(|&r| horizon / r as f64).collect();
    let errors: Vec<f64> = levels.iter().map(|l| l.error).collect();
    let order = fitted_order(&steps, &errors);
    let intercept = match order {
        Some(_) => {
            let xs: Vec<f64> = steps.iter().map(|s| s.log2()).collect();
            let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
            fit_line(&xs, &ys).0
        }
        None => 0.0,
    };
    Ok(ConvergenceReport { levels, fitted_order: order, intercept, intercept_stderr: 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Extrapolation {
    /// Line through the two smallest epsilons.
    Linear,
    /// Interpolating polynomial through every epsilon.
    Polynomial,
}

/// Monte Carlo difference quotients `(E[Phi(t + eps, X)] - Phi(t, x)) / eps`
/// with common random numbers across epsilons, and their extrapolation to
/// `eps = 0`. The extrapolation is formed path by path, so its standard
/// error is exact under the common noise.
pub fn generator_lhs(
    f: &dyn Functional,
    model: &SfdeModel,
    initial: &StoppedPath,
    epsilons: &[f64],
    plan: &NoisePlan,
    extrapolation: Extrapolation,
) -> Result<ConvergenceReport> {
    if epsilons.len() < 2 {
        return Err(Error::Domain("need at least two epsilons".into()));
    }
    let grid = *initial.grid();
    let k = initial.stop_index();
    let steps = epsilons.iter().map(|&e| grid.steps_in(e)).collect::<Result<Vec<_>>>()?;
    let eps: Vec<f64> = steps.iter().map(|&m| m as f64 * grid.dt()).collect();
    let top = *steps.iter().max().expect("non-empty");
    if k + top > grid.steps() {
        return Err(Error::Domain("largest epsilon runs past the horizon".into()));
    }
    let base = evaluate(f, &initial.view())?;
    let weights = match extrapolation {
        Extrapolation::Polynomial => lagrange_weights(&eps, 0.0),
        Extrapolation::Linear => {
            let mut order: Vec<usize> = (0..eps.len()).collect();
            order.sort_by(|&a, &b| eps[a].total_cmp(&eps[b]));
            let (a, b) = (order[0], order[1]);
            let w = lagrange_weights(&[eps[a], eps[b]], 0.0);
            let mut full = vec![0.0; eps.len()];
            full[a] = w[0];
            full[b] = w[1];
            full
        }
    };
    let until = grid.node(k + top);
    let view = initial.view();
    let per_path = plan
        .exec
        .try_map(plan.n_paths, |j| {
            let x = solve_path(model, &view, until, plan.seed, j, 1)?;
            let xv = x.view();
            let q = steps
                .iter()
                .zip(&eps)
                .map(|(&m, &e)| Ok((evaluate(f, &xv.stopped_at(k + m)?)? - base) / e))
                .collect::<Result<Vec<f64>>>()?;
            let extrap: f64 = q.iter().zip(&weights).map(|(a, w)| a * w).sum();
            Ok::<_, Error>((q, extrap))
        })
        .map_err(|(path, e)| Error::Ensemble { path, source: Box::new(e) })?;

    let intercept = McEstimate::from_samples(&per_path.iter().map(|(_, e)| *e).collect::<Vec<_>>());
    let levels: Vec<Level> = eps
        .iter()
        .enumerate()
        .map(|(l, &e)| {
            let est = McEstimate::from_samples(&per_path.iter().map(|(q, _)| q[l]).collect::<Vec<_>>());
            Level {
                level: e,
                value: est.mean,
                reference: intercept.mean,
                error: (est.mean - intercept.mean).abs(),
                stderr: est.stderr,
            }
        })
        .collect();
    let errors: Vec<f64> = levels.iter().map(|l| l.error).collect();
    Ok(ConvergenceReport {
        fitted_order: fitted_order(&eps, &errors),
        levels,
        intercept: intercept.mean,
        intercept_stderr: intercept.stderr,
    })
}

/// `D_t Phi + <D_x Phi, b> + 1/2 <D_xx Phi sigma, sigma>` from the
/// numerical Dupire jet.
pub fn generator_rhs_dupire(f: &dyn Functional, model: &SfdeModel, p: &PathView<'_>, cfg: &FdConfig) -> Result<f64> {
    if p.is_bumped() {
        return Err(Error::Domain("generator needs a bump-free path".into()));
    }
    let jet = numerical_dupire_jet(f, p, cfg)?;
    let t = p.time();
    let b = model.drift(t, p);
    let s = model.diffusion(t, p);
    let drift: f64 = jet.dx.iter().zip(&b).map(|(g, b)| g * b).sum();
    Ok(jet.dt + drift + 0.5 * jet.dxx.contract_outer(&s, model.noise_dim))
}

/// `D_t Phi + D_x Phi(b 1_t) + 1/2 sum_j D_xx Phi(sigma e_j 1_t, sigma e_j 1_t)`,
/// with the point-mass terms taken as ramp limits.
pub fn generator_rhs_frechet(
    f: &dyn Functional,
    model: &SfdeModel,
    p: &PathView<'_>,
    cfg: &FdConfig,
    ramps: &RampFamily,
    h: Option<f64>,
) -> Result<f64> {
    let t = p.time();
    let dt = time_derivative(f, p, cfg)?;
    let b = model.drift(t, p);
    let s = model.diffusion(t, p);
    let (n, d) = (model.state_dim, model.noise_dim);
    let (linear, _) = ramp_limit_along(f, p, ramps, &b, h)?;
    let mut quad = 0.0;
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|a| s[a * d + j]).collect();
        if col.iter().all(|&c| c == 0.0) {
            continue;
        }
        quad += bilinear_ramp_limit(f, p, ramps, &col, &col, h)?.0;
    }
    Ok(dt + linear + 0.5 * quad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub dt_frechet: f64,
    pub dt_dupire: f64,
    pub atom_mu: Vec<f64>,
    pub dx_dupire: Vec<f64>,
    pub atom_lambda: Matrix,
    pub dxx_dupire: Matrix,
    pub max_abs_gap: f64,
}

/// Both sides of `D_t = D_t`, `mu({t}) = D_x`, `lambda({t}) = D_xx`.
pub fn coherence_report(
    f: &dyn Functional,
    p: &PathView<'_>,
    cfg: &FdConfig,
    ramps: &RampFamily,
) -> Result<CoherenceReport> {
    let dt_frechet = time_derivative(f, p, cfg)?;
    let atom_mu = atom_at_t(f, p, ramps, None)?;
    let atom_lambda = bilinear_atom(f, p, ramps, None)?;
    let jet = numerical_dupire_jet(f, p, cfg)?;
    let mut gap = (dt_frechet - jet.dt).abs();
    for (a, b) in atom_mu.iter().zip(&jet.dx) {
        gap = gap.max((a - b).abs());
    }
    gap = gap.max(atom_lambda.max_abs_diff(&jet.dxx));
    Ok(CoherenceReport {
        dt_frechet,
        dt_dupire: jet.dt,
        atom_mu,
        dx_dupire: jet.dx,
        atom_lambda,
        dxx_dupire: jet.dxx,
        max_abs_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{Constant, Endpoint, RunningIntegral, ScalarFn};

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    fn brownian(n: usize, seed: u64) -> StoppedPath {
        let bm = SfdeModel::builtin("bm", 1.0).unwrap();
        let init = StoppedPath::constant(grid(n), &[0.3]).stopped_at(0).unwrap();
        solve_path(&bm, &init.view(), 1.0, seed, 0, 1).unwrap()
    }

    #[test]
    fn ito_residual_examples() {
        let x = brownian(512, 4);
        let cfg = FdConfig::default().with_h(0.5);
        let r = ito_residual(&Endpoint(ScalarFn::Square), &x, &cfg, QvMode::Realized).unwrap();
        assert!(r.abs() <= 1e-10, "{r}");
        let r = ito_residual(&RunningIntegral(ScalarFn::Identity), &x, &FdConfig::default(), QvMode::Realized).unwrap();
        assert!(r.abs() <= 1e-12, "{r}");
        let r = ito_residual(&Constant(1.0), &x, &FdConfig::default(), QvMode::Realized).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn generator_examples() {
        let bm = SfdeModel::builtin("bm", 1.0).unwrap();
        let drift = SfdeModel::builtin("drift1", 1.0).unwrap();
        let cfg = FdConfig::default();
        let ramps = RampFamily::default();
        let zero = StoppedPath::constant(grid(256), &[0.0]).stopped_at(128).unwrap();
        let sq = Endpoint(ScalarFn::Square);
        let d = generator_rhs_dupire(&sq, &bm, &zero.view(), &cfg).unwrap();
        let f = generator_rhs_frechet(&sq, &bm, &zero.view(), &cfg, &ramps, None).unwrap();
        assert!((d - 1.0).abs() < 1e-6 && (f - 1.0).abs() < 1e-6, "{d} {f}");

        let c = StoppedPath::constant(grid(256), &[1.5]).stopped_at(128).unwrap();
        let ri = RunningIntegral(ScalarFn::Identity);
        let d = generator_rhs_dupire(&ri, &drift, &c.view(), &cfg).unwrap();
        let f = generator_rhs_frechet(&ri, &drift, &c.view(), &cfg, &ramps, None).unwrap();
        assert!((d - 1.5).abs() < 1e-9 && (f - 1.5).abs() < 1e-6, "{d} {f}");

        let k = Constant(3.0);
        assert_eq!(generator_rhs_dupire(&k, &bm, &c.view(), &cfg).unwrap(), 0.0);
        assert_eq!(generator_rhs_frechet(&k, &bm, &c.view(), &cfg, &ramps, None).unwrap(), 0.0);
    }

    #[test]
    fn generator_lhs_deterministic_quotients() {
        let drift = SfdeModel::builtin("drift1", 1.0).unwrap();
        let c = StoppedPath::constant(grid(256), &[1.5]).stopped_at(64).unwrap();
        let eps = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let plan = NoisePlan::new(1, 2);
        let r = generator_lhs(&RunningIntegral(ScalarFn::Identity), &drift, &c, &eps, &plan, Extrapolation::Linear)
            .unwrap();
        let dt = 1.0 / 256.0;
        for l in &r.levels {
            assert!((l.value - (1.5 + l.level / 2.0 - dt / 2.0)).abs() < 1e-12);
            assert_eq!(l.stderr, 0.0);
        }
        assert!((r.intercept - (1.5 - dt / 2.0)).abs() < 1e-12);

        let r = generator_lhs(&Constant(2.0), &drift, &c, &eps, &plan, Extrapolation::Polynomial).unwrap();
        assert!(r.levels.iter().all(|l| l.value == 0.0));
        assert_eq!(r.intercept, 0.0);
    }

    #[test]
    fn generator_lhs_gaussian_moment() {
        let bm = SfdeModel::builtin("bm", 1.0).unwrap();
        let zero = StoppedPath::constant(grid(256), &[0.0]).stopped_at(128).unwrap();
        let eps = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let r = generator_lhs(
            &Endpoint(ScalarFn::Square),
            &bm,
            &zero,
            &eps,
            &NoisePlan::new(3, 20_000),
            Extrapolation::Linear,
        )
        .unwrap();
        for l in &r.levels {
            assert!((l.value - 1.0).abs() < 3.0 * l.stderr, "{l:?}");
        }
        assert!((r.intercept - 1.0).abs() < 3.0 * r.intercept_stderr);
    }

    #[test]
    fn coherence_examples() {
        let cfg = FdConfig::default();
        let ramps = RampFamily::default();
        let one = StoppedPath::constant(grid(256), &[1.0]).stopped_at(128).unwrap();
        let r = coherence_report(&Endpoint(ScalarFn::Square), &one.view(), &cfg, &ramps).unwrap();
        assert!((r.atom_mu[0] - 2.0).abs() < 1e-6 && (r.atom_lambda.get(0, 0) - 2.0).abs() < 1e-3);
        assert_eq!((r.dt_frechet, r.dt_dupire), (0.0, 0.0));
        assert!(r.max_abs_gap <= 1e-3);

        let three = StoppedPath::constant(grid(256), &[3.0]).stopped_at(128).unwrap();
        let r = coherence_report(&RunningIntegral(ScalarFn::Identity), &three.view(), &cfg, &ramps).unwrap();
        assert!(r.atom_mu[0].abs() < 1e-6 && r.dx_dupire[0] == 0.0);
        assert!((r.dt_frechet - 3.0).abs() < 1e-12 && (r.dt_dupire - 3.0).abs() < 1e-12);

        let r = coherence_report(&Constant(1.0), &three.view(), &cfg, &ramps).unwrap();
        assert_eq!(r.max_abs_gap, 0.0);
    }
}
