//! Fréchet derivatives along continuous directions, recovery of the
//! representing measure on `[0, t]`, and the ramp-sequence limits that
//! extend the derivative to point masses at `t`.

use serde::Serialize;

use crate::dupire::{dyadic, FdConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::functional::{evaluate, Functional};
use crate::matrix::Matrix;
use crate::path::{PathView, StoppedPath, TimeGrid};
use crate::stats::richardson;

/// Discrete measure `sum_i w_i delta_{t_i} + atom * delta_t`, stored node
/// major: `weights[i * dim + j]` for nodes `0..=t_index`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RieszRepresentation {
    #[serde(skip)]
    pub grid: TimeGrid,
    pub t_index: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub atom: Vec<f64>,
    /// Atom-atom block of the second derivative, when computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom_block: Option<Matrix>,
    pub ramp_trace: Vec<RampPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RampPoint {
    pub k: u32,
    pub coord: usize,
    pub value: f64,
}

impl RieszRepresentation {
    pub fn new(grid: TimeGrid, t_index: usize, weights: Vec<f64>, atom: Vec<f64>) -> Self {
        let dim = atom.len();
        debug_assert_eq!(weights.len(), (t_index + 1) * dim);
        Self { grid, t_index, dim, weights, atom, atom_block: None, ramp_trace: Vec::new() }
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.dim + j]
    }

    /// Total mass of the nodal part, per coordinate.
    pub fn nodal_mass(&self) -> Vec<f64> {
        (0..self.dim).map(|j| (0..=self.t_index).map(|i| self.weight(i, j)).sum()).collect()
    }
}

/// Ramps `xi_k(s) = (k (s - t) + 1) * upsilon` on `[t - 1/k, t]`, zero
/// before.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RampFamily {
    ks: Vec<u32>,
}

impl Default for RampFamily {
    fn default() -> Self {
        Self { ks: vec![8, 16, 32, 64] }
    }
}

impl RampFamily {
    pub fn new(mut ks: Vec<u32>) -> Result<Self> {
        if ks.len() < 2 {
            return Err(Error::Domain("a ramp family needs at least two k values".into()));
        }
        if ks.contains(&0) {
            return Err(Error::Domain("ramp k values must be positive".into()));
        }
        ks.sort_unstable();
        ks.dedup();
        if ks.len() < 2 {
            return Err(Error::Domain("ramp k values must be distinct".into()));
        }
        Ok(Self { ks })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let ks = s
            .split(',')
            .map(|k| k.trim().parse::<u32>().map_err(|e| Error::Parse(format!("ramp '{k}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ks)
    }

    pub fn ks(&self) -> &[u32] {
        &self.ks
    }

    /// Ramp widths in grid steps, checking alignment and support in `[0, t]`.
    pub fn widths(&self, p: &PathView<'_>) -> Result<Vec<usize>> {
        self.ks
            .iter()
            .map(|&k| {
                let m = p.grid().steps_in(1.0 / k as f64)?;
                if m > p.stop_index() {
                    return Err(Error::Domain(format!("ramp of width 1/{k} does not fit in [0, {}]", p.time())));
                }
                Ok(m)
            })
            .collect()
    }
}

/// The ramp of width `m` steps ending at the stop node of `p`, with height
/// `upsilon`, frozen after `t`.
pub fn ramp_path(p: &PathView<'_>, m: usize, upsilon: &[f64]) -> Result<StoppedPath> {
    if upsilon.len() != p.dim() {
        return Err(Error::Dimension { expected: p.dim(), got: upsilon.len() });
    }
    let d = p.dim();
    let n = p.grid().steps();
    let k = p.stop_index();
    let start = k.checked_sub(m).ok_or_else(|| Error::Domain("ramp starts before 0".into()))?;
    let mut samples = vec![0.0; (n + 1) * d];
    for i in start..=n {
        let s = (i.min(k) - start) as f64 / m as f64;
        for j in 0..d {
            samples[i * d + j] = s * upsilon[j];
        }
    }
    StoppedPath::new(*p.grid(), d, samples)
}

/// Nodal hat function at node `i` along coordinate `j`.
pub fn hat_path(grid: TimeGrid, dim: usize, i: usize, j: usize) -> StoppedPath {
    let mut samples = vec![0.0; (grid.steps() + 1) * dim];
    samples[i * dim + j] = 1.0;
    StoppedPath::new(grid, dim, samples).expect("finite hat")
}

fn sup_on(eta: &PathView<'_>, stop: usize) -> f64 {
    (0..=stop).map(|i| eta.norm_at(i)).fold(0.0, f64::max)
}

pub fn default_step(p: &PathView<'_>, etas: &[&PathView<'_>]) -> f64 {
    let s = etas.iter().map(|e| sup_on(e, p.stop_index())).fold(0.0, f64::max);
    dyadic(1e-4 / (1.0 + s))
}

fn check_direction(p: &PathView<'_>, eta: &PathView<'_>) -> Result<()> {
    if eta.grid() != p.grid() {
        return Err(Error::Domain("direction lives on a different grid".into()));
    }
    if eta.dim() != p.dim() {
        return Err(Error::Dimension { expected: p.dim(), got: eta.dim() });
    }
    Ok(())
}

fn eval_perturbed(f: &dyn Functional, p: &PathView<'_>, dirs: &[(&PathView<'_>, f64)]) -> Result<f64> {
    let q = p.perturbed(dirs)?;
    evaluate(f, &q.view())
}

/// Central difference of `f` along `eta` on `[0, t]`.
pub fn directional_derivative(f: &dyn Functional, p: &PathView<'_>, eta: &PathView<'_>, h: Option<f64>) -> Result<f64> {
    check_direction(p, eta)?;
    let h = h.unwrap_or_else(|| default_step(p, &[eta]));
    let up = eval_perturbed(f, p, &[(eta, h)])?;
    let down = eval_perturbed(f, p, &[(eta, -h)])?;
    Ok((up - down) / (2.0 * h))
}

/// Four-point mixed difference of `f` along `eta1`, `eta2`.
pub fn second_directional_derivative(
    f: &dyn Functional,
    p: &PathView<'_>,
    eta1: &PathView<'_>,
    eta2: &PathView<'_>,
    h: Option<f64>,
) -> Result<f64> {
    check_direction(p, eta1)?;
    check_direction(p, eta2)?;
    let h = h.unwrap_or_else(|| default_step(p, &[eta1, eta2]));
    let pp = eval_perturbed(f, p, &[(eta1, h), (eta2, h)])?;
    let pm = eval_perturbed(f, p, &[(eta1, h), (eta2, -h)])?;
    let mp = eval_perturbed(f, p, &[(eta1, -h), (eta2, h)])?;
    let mm = eval_perturbed(f, p, &[(eta1, -h), (eta2, -h)])?;
    Ok((pp - pm - mp + mm) / (4.0 * h * h))
}

/// Limit of a ramp sequence `d_k` as the ramp width shrinks to one grid
/// step, from a line in `1/k` through the two largest `k`.
///
/// Left-point sums see a ramp of width `1/k` as mass `(1/k - dt)/2`, so
/// the line is evaluated at `1/k = dt`, the narrowest ramp the grid can
/// carry, rather than at 0. The extrapolations from the two finest and the
/// next pair must agree within `1e-3 * (1 + |limit|)`.
pub fn extrapolate_ramps(ks: &[u32], values: &[f64], dt: f64) -> Option<f64> {
    let n = ks.len();
    let line = |a: usize, b: usize| {
        let (xa, xb) = (1.0 / ks[a] as f64, 1.0 / ks[b] as f64);
        let slope = (values[b] - values[a]) / (xb - xa);
        values[b] + slope * (dt - xb)
    };
    let limit = line(n - 2, n - 1);
    if n >= 3 {
        let coarse = line(n - 3, n - 2);
        if (coarse - limit).abs() > 1e-3 * (1.0 + limit.abs()) {
            return None;
        }
    }
    limit.is_finite().then_some(limit)
}

fn trace_of(ks: &[u32], values: &[f64]) -> Vec<(u32, f64)> {
    ks.iter().copied().zip(values.iter().copied()).collect()
}

/// Ramp limit of the first derivative along `xi_k * upsilon`; returns the
/// limit and the raw `d_k`.
pub fn ramp_limit_along(
    f: &dyn Functional,
    p: &PathView<'_>,
    ramps: &RampFamily,
    upsilon: &[f64],
    h: Option<f64>,
) -> Result<(f64, Vec<f64>)> {
    let widths = ramps.widths(p)?;
    let values = widths
        .iter()
        .map(|&m| {
            let xi = ramp_path(p, m, upsilon)?;
            directional_derivative(f, p, &xi.view(), h)
        })
        .collect::<Result<Vec<f64>>>()?;
    let limit = extrapolate_ramps(ramps.ks(), &values, p.dt())
        .ok_or_else(|| Error::RampDivergence { trace: trace_of(ramps.ks(), &values) })?;
    Ok((limit, values))
}

/// Ramp limit of the second derivative along `(xi_k * u1, xi_k * u2)`.
pub fn bilinear_ramp_limit(
    f: &dyn Functional,
    p: &PathView<'_>,
    ramps: &RampFamily,
    u1: &[f64],
    u2: &[f64],
    h: Option<f64>,
) -> Result<(f64, Vec<f64>)> {
    let widths = ramps.widths(p)?;
    let values = widths
        .iter()
        .map(|&m| {
            let a = ramp_path(p, m, u1)?;
            let b = ramp_path(p, m, u2)?;
            second_directional_derivative(f, p, &a.view(), &b.view(), h)
        })
        .collect::<Result<Vec<f64>>>()?;
    let limit = extrapolate_ramps(ramps.ks(), &values, p.dt())
        .ok_or_else(|| Error::RampDivergence { trace: trace_of(ramps.ks(), &values) })?;
    Ok((limit, values))
}

fn unit(d: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[j] = 1.0;
    e
}

/// Mass of the representing measure at `{t}`, one entry per coordinate,
/// together with the ramp trace.
pub fn atom_with_trace(
    f: &dyn Functional,
    p: &PathView<'_>,
    ramps: &RampFamily,
    h: Option<f64>,
) -> Result<(Vec<f64>, Vec<RampPoint>)> {
    let d = p.dim();
    let mut atom = Vec::with_capacity(d);
    let mut trace = Vec::new();
    for j in 0..d {
        let (limit, values) = ramp_limit_along(f, p, ramps, &unit(d, j), h)?;
        atom.push(limit);
        trace.extend(ramps.ks().iter().zip(&values).map(|(&k, &value)| RampPoint { k, coord: j, value }));
    }
    Ok((atom, trace))
}

pub fn atom_at_t(f: &dyn Functional, p: &PathView<'_>, ramps: &RampFamily, h: Option<f64>) -> Result<Vec<f64>> {
    atom_with_trace(f, p, ramps, h).map(|(a, _)| a)
}

/// Atom-atom block of the second derivative: entry `(a, b)` is the ramp
/// limit along `(xi_k e_a, xi_k e_b)`.
pub fn bilinear_atom(f: &dyn Functional, p: &PathView<'_>, ramps: &RampFamily, h: Option<f64>) -> Result<Matrix> {
    let d = p.dim();
    let mut m = Matrix::zeros(d);
    for a in 0..d {
        for b in 0..=a {
            let (v, _) = bilinear_ramp_limit(f, p, ramps, &unit(d, a), &unit(d, b), h)?;
            m.set(a, b, v);
            m.set(b, a, v);
        }
    }
    Ok(m)
}

/// Recovers nodal masses from derivatives along the hat basis. The hat at
/// the stop node mixes the top-node mass with the atom; the ramp limit
/// separates them.
pub fn estimate_riesz_measure(
    f: &dyn Functional,
    p: &PathView<'_>,
    ramps: &RampFamily,
    h: Option<f64>,
    exec: Exec,
) -> Result<RieszRepresentation> {
    if p.is_bumped() {
        return Err(Error::Domain("measure recovery requires a bump-free path".into()));
    }
    let d = p.dim();
    let k = p.stop_index();
    let grid = *p.grid();
    // Every hat has sup norm 1.
    let h = h.unwrap_or_else(|| dyadic(1e-4 / 2.0));
    let mut weights = exec
        .try_map((k + 1) * d, |idx| {
            let hat = hat_path(grid, d, idx / d, idx % d);
            directional_derivative(f, p, &hat.view(), Some(h))
        })
        .map_err(|(_, e)| e)?;
    let (atom, trace) = atom_with_trace(f, p, ramps, Some(h))?;
    for j in 0..d {
        weights[k * d + j] -= atom[j];
    }
    let mut rep = RieszRepresentation::new(grid, k, weights, atom);
    rep.ramp_trace = trace;
    Ok(rep)
}

/// Applies the representation to `phi + upsilon 1_{t}`: nodal masses
/// against `phi` on `[0, t]`, the atom against `phi(t) + upsilon`.
pub fn apply_extended_derivative(rep: &RieszRepresentation, phi: &PathView<'_>, upsilon: &[f64]) -> Result<f64> {
    if *phi.grid() != rep.grid {
        return Err(Error::Domain("test path lives on a different grid".into()));
    }
    if phi.dim() != rep.dim {
        return Err(Error::Dimension { expected: rep.dim, got: phi.dim() });
    }
    if upsilon.len() != rep.dim {
        return Err(Error::Dimension { expected: rep.dim, got: upsilon.len() });
    }
    let mut acc = 0.0;
    for i in 0..=rep.t_index {
        for j in 0..rep.dim {
            acc += phi.value(i, j) * rep.weight(i, j);
        }
    }
    for (j, (a, u)) in rep.atom.iter().zip(upsilon).enumerate() {
        acc += a * (phi.value(rep.t_index, j) + u);
    }
    Ok(acc)
}

/// Forward quotient in time on the frozen path: `Phi(t + m dt, x_t)`
/// against `Phi(t, x_t)`, with the same Richardson schedule as the
/// horizontal derivative.
pub fn time_derivative(f: &dyn Functional, p: &PathView<'_>, cfg: &FdConfig) -> Result<f64> {
    cfg.validate()?;
    if p.is_bumped() {
        return Err(Error::Domain("time derivative requires a bump-free path".into()));
    }
    let n = p.grid().steps();
    let k = p.stop_index();
    if k >= n {
        return Err(Error::Boundary("time derivative is undefined at the horizon".into()));
    }
    let base = evaluate(f, p)?;
    let quotient = |m: usize| -> Result<f64> {
        if k + m > n {
            return Err(Error::Boundary(format!("step of {m} nodes from node {k} leaves the grid")));
        }
        let later = evaluate(f, &p.stopped_at(k + m)?)?;
        Ok((later - base) / (m as f64 * p.dt()))
    };
    let mut m = cfg.horizontal_steps(p)?;
    let mut seq = vec![quotient(m)?];
    while seq.len() < cfg.richardson_levels && m % 2 == 0 {
        m /= 2;
        seq.push(quotient(m)?);
    }
    Ok(richardson(&seq, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{
        Constant, Endpoint, Product, QuadraticIntegral, RunningIntegral, ScalarFn, Weight, WeightedIntegral,
    };

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    fn stopped(n: usize, k: usize, f: impl Fn(f64) -> f64) -> StoppedPath {
        StoppedPath::from_fn(grid(n), f).stopped_at(k).unwrap()
    }

    #[test]
    fn directional_examples() {
        let p = stopped(64, 64, |t| (4.0 * t).cos());
        let one = StoppedPath::constant(grid(64), &[1.0]);
        let v = directional_derivative(&RunningIntegral(ScalarFn::Identity), &p.view(), &one.view(), None).unwrap();
        assert!((v - 1.0).abs() < 1e-9);

        let q = stopped(64, 32, |_| 2.0);
        let eta = StoppedPath::from_fn(grid(64), |t| 2.0 * t);
        let v = directional_derivative(&Endpoint(ScalarFn::Square), &q.view(), &eta.view(), None).unwrap();
        assert!((v - 4.0).abs() < 1e-8);

        let zero = StoppedPath::constant(grid(64), &[0.0]);
        let v = directional_derivative(&Endpoint(ScalarFn::Exp), &q.view(), &zero.view(), Some(1e-3)).unwrap();
        assert_eq!(v, 0.0);

        let other = StoppedPath::constant(grid(32), &[1.0]);
        assert!(directional_derivative(&Product, &q.view(), &other.view(), None).is_err());
    }

    #[test]
    fn second_directional_examples() {
        let p = StoppedPath::constant(grid(64), &[0.0]);
        let one = StoppedPath::constant(grid(64), &[1.0]);
        let v =
            second_directional_derivative(&QuadraticIntegral(Weight::One), &p.view(), &one.view(), &one.view(), None)
                .unwrap();
        assert!((v - 2.0).abs() < 1e-6);
        let v = second_directional_derivative(&Endpoint(ScalarFn::Square), &p.view(), &one.view(), &one.view(), None)
            .unwrap();
        assert!((v - 2.0).abs() < 1e-6);
        let zero = StoppedPath::constant(grid(64), &[0.0]);
        let v = second_directional_derivative(&Endpoint(ScalarFn::Square), &p.view(), &zero.view(), &one.view(), None)
            .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ramps_are_grid_aligned_and_fit() {
        let p = stopped(256, 128, |t| t);
        let r = RampFamily::default();
        assert_eq!(r.widths(&p.view()).unwrap(), vec![32, 16, 8, 4]);
        let early = stopped(256, 16, |t| t);
        assert!(r.widths(&early.view()).is_err());
        let coarse = stopped(100, 50, |t| t);
        assert!(matches!(r.widths(&coarse.view()), Err(Error::GridAlignment { .. })));
        assert!(RampFamily::new(vec![8]).is_err());
        assert!(RampFamily::new(vec![0, 8]).is_err());
        assert_eq!(RampFamily::parse("16, 8,32").unwrap().ks(), &[8, 16, 32]);

        let xi = ramp_path(&p.view(), 4, &[2.0]).unwrap();
        let vals: Vec<f64> = (123..=130).map(|i| xi.value(i, 0)).collect();
        assert_eq!(vals, vec![0.0, 0.0, 0.5, 1.0, 1.5, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn atom_examples() {
        let r = RampFamily::default();
        let p = stopped(256, 128, |_| 1.0);
        let a = atom_at_t(&Endpoint(ScalarFn::Square), &p.view(), &r, None).unwrap();
        assert!((a[0] - 2.0).abs() < 1e-8);
        let a = atom_at_t(&RunningIntegral(ScalarFn::Identity), &p.view(), &r, None).unwrap();
        assert!(a[0].abs() < 1e-8);
        let full = stopped(256, 256, |_| 1.0);
        let a = atom_at_t(&Product, &full.view(), &r, None).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn running_integral_ramp_values_are_exact_triangles() {
        let r = RampFamily::default();
        let p = stopped(256, 256, |t| t * t);
        let (_, d) = ramp_limit_along(&RunningIntegral(ScalarFn::Identity), &p.view(), &r, &[1.0], None).unwrap();
        for (&k, v) in r.ks().iter().zip(d) {
            let exact = (1.0 / k as f64 - 1.0 / 256.0) / 2.0;
            assert!((v - exact).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn divergent_ramps_are_reported() {
        let ks = [8, 16, 32, 64];
        let wild = [0.0, 1.0, 0.0, 5.0];
        assert!(extrapolate_ramps(&ks, &wild, 1.0 / 256.0).is_none());
        let flat = [2.0; 4];
        assert_eq!(extrapolate_ramps(&ks, &flat, 1.0 / 256.0), Some(2.0));
    }

    #[test]
    fn riesz_recovery_examples() {
        let r = RampFamily::default();
        let g = grid(256);
        let p = StoppedPath::from_fn(g, |t| 1.0 + t * t);
        let rep =
            estimate_riesz_measure(&WeightedIntegral(Weight::Linear), &p.view(), &r, None, Exec::default()).unwrap();
        // The ramp pairings carry a small quadratic term in 1/k here.
        assert!(rep.atom[0].abs() < 1e-4, "{}", rep.atom[0]);
        for i in 0..256 {
            assert!((rep.weight(i, 0) - (g.node(i) + 0.5 * g.dt()) * g.dt()).abs() < 1e-9);
        }
        assert!((rep.weight(256, 0) + rep.atom[0]).abs() < 1e-9);

        let q = stopped(256, 128, |_| 1.0);
        let rep = estimate_riesz_measure(&Endpoint(ScalarFn::Square), &q.view(), &r, None, Exec::Sequential).unwrap();
        assert!((rep.atom[0] - 2.0).abs() < 1e-8);
        assert!(rep.weights.iter().all(|w| w.abs() < 1e-8));

        let rep = estimate_riesz_measure(&Constant(4.0), &q.view(), &r, None, Exec::Sequential).unwrap();
        assert!(rep.weights.iter().all(|&w| w == 0.0));
        assert_eq!(rep.atom, vec![0.0]);
        assert_eq!(rep.ramp_trace.len(), 4);
    }

    #[test]
    fn extended_derivative_examples() {
        let r = RampFamily::default();
        let q = stopped(256, 128, |_| 1.0);
        let rep = estimate_riesz_measure(&Endpoint(ScalarFn::Square), &q.view(), &r, None, Exec::Sequential).unwrap();
        let zero = StoppedPath::constant(grid(256), &[0.0]);
        let v = apply_extended_derivative(&rep, &zero.view(), &[0.75]).unwrap();
        assert!((v - 1.5).abs() < 1e-7);

        let phi = StoppedPath::from_fn(grid(256), |t| (3.0 * t).sin());
        let plain = apply_extended_derivative(&rep, &phi.view(), &[0.0]).unwrap();
        let dd = directional_derivative(&Endpoint(ScalarFn::Square), &q.view(), &phi.view(), None).unwrap();
        assert!((plain - dd).abs() < 1e-7);

        let f = RunningIntegral(ScalarFn::Identity);
        let rep = estimate_riesz_measure(&f, &q.view(), &r, None, Exec::Sequential).unwrap();
        let with = apply_extended_derivative(&rep, &phi.view(), &[10.0]).unwrap();
        let without = apply_extended_derivative(&rep, &phi.view(), &[0.0]).unwrap();
        assert!((with - without).abs() < 1e-8);

        let other = StoppedPath::constant(grid(128), &[0.0]);
        assert!(apply_extended_derivative(&rep, &other.view(), &[0.0]).is_err());
    }

    #[test]
    fn time_derivative_matches_horizontal_derivative() {
        let cfg = crate::dupire::FdConfig::default();
        let p = stopped(256, 100, |t| (2.0 * t).sin());
        for f in crate::functional::catalog() {
            let a = time_derivative(f.as_ref(), &p.view(), &cfg).unwrap();
            let b = crate::dupire::horizontal_derivative(f.as_ref(), &p.view(), &cfg).unwrap();
            assert!((a - b).abs() <= 1e-12, "{}", f.id());
        }
    }
}
