//! Non-anticipative path functionals and the analytic catalog.
//!
//! Every catalog entry acts coordinatewise and sums over coordinates, so it
//! is defined for paths of any dimension. Integrals use the left-point rule
//! `sum_{i<k} g(x_i) dt`, which never reads the endpoint and is therefore
//! exactly blind to a vertical bump.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frechet::RieszRepresentation;
use crate::matrix::Matrix;
use crate::path::{prefix_sums, PathView, StoppedPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Smoothness {
    /// Once horizontally and twice vertically differentiable, with an
    /// analytic jet available.
    C12,
    Unknown,
}

/// `(D_t u, D_x u, D_xx u)` at a stopped path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DupireJet {
    pub dt: f64,
    pub dx: Vec<f64>,
    pub dxx: Matrix,
}

pub trait Functional: Send + Sync {
    fn eval(&self, path: &PathView<'_>) -> f64;

    fn smoothness(&self) -> Smoothness {
        Smoothness::Unknown
    }

    fn analytic_jet(&self, _path: &PathView<'_>) -> Option<DupireJet> {
        None
    }

    fn analytic_riesz(&self, _path: &PathView<'_>) -> Option<RieszRepresentation> {
        None
    }

    fn id(&self) -> String {
        "user".into()
    }
}

pub type SharedFunctional = Arc<dyn Functional>;

/// Evaluates `f`, turning panics and non-finite results into errors.
pub fn evaluate(f: &dyn Functional, path: &PathView<'_>) -> Result<f64> {
    let v = catch_unwind(AssertUnwindSafe(|| f.eval(path))).map_err(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Error::Evaluation(msg)
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { context: f.id(), offset: path.bump().to_vec() })
    }
}

pub fn analytic_dupire_jet(f: &dyn Functional, path: &PathView<'_>) -> Result<DupireJet> {
    f.analytic_jet(path).ok_or_else(|| Error::Unsupported(format!("{} has no analytic jet", f.id())))
}

pub fn analytic_frechet_representation(f: &dyn Functional, path: &PathView<'_>) -> Result<RieszRepresentation> {
    f.analytic_riesz(path).ok_or_else(|| Error::Unsupported(format!("{} has no analytic representation", f.id())))
}

/// Copy of `path` whose raw storage past the live node is replaced by
/// random values in `nodes`.
pub fn tampered(path: &StoppedPath, nodes: std::ops::RangeInclusive<usize>, seed: u64) -> StoppedPath {
    let d = path.dim();
    let n = path.grid().steps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<f64> =
        (0..=n).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| path.raw_sample(i, j).unwrap_or(0.0)).collect();
    for i in nodes {
        if i > path.stop_index() && i <= n {
            for j in 0..d {
                samples[i * d + j] = rng.random_range(-100.0..100.0);
            }
        }
    }
    let prefix = prefix_sums(&samples, d);
    let mut out = StoppedPath::from_parts(*path.grid(), d, samples, prefix, path.stop_index());
    if path.is_bumped() {
        out = out.bumped(path.bump()).expect("same dimension");
    }
    out
}

/// Evaluates `f` on `path` and on a copy with randomized post-`t` samples;
/// true iff the values agree bitwise.
pub fn check_non_anticipative(f: &dyn Functional, path: &StoppedPath, tamper_seed: u64) -> bool {
    check_non_anticipative_on(f, path, path.stop_index() + 1..=path.grid().steps(), tamper_seed)
}

pub fn check_non_anticipative_on(
    f: &dyn Functional,
    path: &StoppedPath,
    nodes: std::ops::RangeInclusive<usize>,
    tamper_seed: u64,
) -> bool {
    let base = path_with_plain_storage(path);
    let other = tampered(&base, nodes, tamper_seed);
    f.eval(&base.view()).to_bits() == f.eval(&other.view()).to_bits()
}

// Materializes the represented values so raw storage past the stop equals
// the frozen continuation before tampering.
fn path_with_plain_storage(path: &StoppedPath) -> StoppedPath {
    let values = path.node_values();
    let prefix = prefix_sums(&values, path.dim());
    let out = StoppedPath::from_parts(*path.grid(), path.dim(), values, prefix, path.stop_index());
    if path.is_bumped() {
        out.bumped(path.bump()).expect("same dimension")
    } else {
        out
    }
}

/// Scalar building blocks with closed-form first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarFn {
    Identity,
    Square,
    Quartic,
    Sin,
    Exp,
}

impl ScalarFn {
    pub fn value(self, x: f64) -> f64 {
        match self {
            ScalarFn::Identity => x,
            ScalarFn::Square => x * x,
            ScalarFn::Quartic => x.powi(4),
            ScalarFn::Sin => x.sin(),
            ScalarFn::Exp => x.exp(),
        }
    }

    pub fn d1(self, x: f64) -> f64 {
        match self {
            ScalarFn::Identity => 1.0,
            ScalarFn::Square => 2.0 * x,
            ScalarFn::Quartic => 4.0 * x.powi(3),
            ScalarFn::Sin => x.cos(),
            ScalarFn::Exp => x.exp(),
        }
    }

    pub fn d2(self, x: f64) -> f64 {
        match self {
            ScalarFn::Identity => 0.0,
            ScalarFn::Square => 2.0,
            ScalarFn::Quartic => 12.0 * x * x,
            ScalarFn::Sin => -x.sin(),
            ScalarFn::Exp => x.exp(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "identity" | "linear" => ScalarFn::Identity,
            "square" => ScalarFn::Square,
            "quartic" | "x4" => ScalarFn::Quartic,
            "sin" => ScalarFn::Sin,
            "exp" => ScalarFn::Exp,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarFn::Identity => "identity",
            ScalarFn::Square => "square",
            ScalarFn::Quartic => "quartic",
            ScalarFn::Sin => "sin",
            ScalarFn::Exp => "exp",
        }
    }
}

/// Integration weights `w(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    One,
    Linear,
}

impl Weight {
    pub fn at(self, s: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Linear => s,
        }
    }

    /// Mean of `w` over the grid cell `[s, s + dt)`. Integrals weight each
    /// left sample by this, which is exact for the step interpolation.
    pub fn cell_mean(self, s: f64, dt: f64) -> f64 {
        self.at(s + 0.5 * dt)
    }
}

/// Time factors `tau(t)` for time-dependent endpoint functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    Linear,
    Exp,
}

impl Clock {
    pub fn at(self, t: f64) -> f64 {
        match self {
            Clock::Linear => t,
            Clock::Exp => t.exp(),
        }
    }

    pub fn rate(self, t: f64) -> f64 {
        match self {
            Clock::Linear => 1.0,
            Clock::Exp => t.exp(),
        }
    }
}

fn zero_weights(path: &PathView<'_>) -> Vec<f64> {
    vec![0.0; (path.stop_index() + 1) * path.dim()]
}

fn density_weights(path: &PathView<'_>, rho: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let d = path.dim();
    let dt = path.dt();
    let mut w = zero_weights(path);
    for i in 0..path.stop_index() {
        for j in 0..d {
            w[i * d + j] = rho(i, j) * dt;
        }
    }
    w
}

/// `sum_j f(x_j(t))`.
#[derive(Debug, Clone, Copy)]
pub struct Endpoint(pub ScalarFn);

impl Functional for Endpoint {
    fn eval(&self, p: &PathView<'_>) -> f64 {
        (0..p.dim()).map(|j| self.0.value(p.endpoint(j))).sum()
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C12
    }

    fn analytic_jet(&self, p: &PathView<'_>) -> Option<DupireJet> {
        let end = p.endpoint_vec();
        Some(DupireJet {
            dt: 0.0,
            dx: end.iter().map(|&x| self.0.d1(x)).collect(),
            dxx: Matrix::from_diag(&end.iter().map(|&x| self.0.d2(x)).collect::<Vec<_>>()),
        })
    }

    fn analytic_riesz(&self, p: &PathView<'_>) -> Option<RieszRepresentation> {
        let end = p.endpoint_vec();
        Some(RieszRepresentation::new(
            *p.grid(),
            p.stop_index(),
            zero_weights(p),
            end.iter().map(|&x| self.0.d1(x)).collect(),
        ))
    }

    fn id(&self) -> String {
        format!("endpoint:{}", self.0.name())
    }
}

/// `sum_j int_0^t g(x_j(s)) ds`.
#[derive(Debug, Clone, Copy)]
pub struct RunningIntegral(pub ScalarFn);

impl Functional for RunningIntegral {
    fn eval(&self, p: &PathView<'_>) -> f64 {
        let dt = p.dt();
        (0..p.dim())
            .map(|j| match self.0 {
                ScalarFn::Identity => p.left_sum(j) * dt,
                g => p.left_quadrature(j, |_, x| g.value(x)),
            })
            .sum()
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C12
    }

    fn analytic_jet(&self, p: &PathView<'_>) -> Option<DupireJet> {
        let d = p.dim();
        Some(DupireJet {
            dt: (0..d).map(|j| self.0.value(p.endpoint(j))).sum(),
            dx: vec![0.0; d],
            dxx: Matrix::zeros(d),
        })
    }

    fn analytic_riesz(&self, p: &PathView<'_>) -> Option<RieszRepresentation> {
        let w = density_weights(p, |i, j| self.0.d1(p.value(i, j)));
        Some(RieszRepresentation::new(*p.grid(), p.stop_index(), w, vec![0.0; p.dim()]))
    }

    fn id(&self) -> String {
        format!("integral:{}", self.0.name())
    }
}

/// `sum_j int_0^t w(s) x_j(s) ds`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedIntegral(pub Weight);

impl Functional for WeightedIntegral {
    fn eval(&self, p: &PathView<'_>) -> f64 {
        let (w, dt) = (self.0, p.dt());
        (0..p.dim()).map(|j| p.left_quadrature(j, |s, x| w.cell_mean(s, dt) * x)).sum()
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C12
    }

    fn analytic_jet(&self, p: &PathView<'_>) -> Option<DupireJet> {
        let d = p.dim();
        let wt = self.0.at(p.time());
        Some(DupireJet { dt: (0..d).map(|j| wt * p.endpoint(j)).sum(), dx: vec![0.0; d], dxx: Matrix::zeros(d) })
    }

    fn analytic_riesz(&self, p: &PathView<'_>) -> Option<RieszRepresentation> {
        let g = *p.grid();
        let w = density_weights(p, |i, _| self.0.cell_mean(g.node(i), g.dt()));
        Some(RieszRepresentation::new(g, p.stop_index(), w, vec![0.0; p.dim()]))
    }

    fn id(&self) -> String {
        match self.0 {
            Weight::One => "weighted:one".into(),
            Weight::Linear => "weighted:linear".into(),
        }
    }
}

/// `sum_j x_j(t) * int_0^t x_j(s) ds`.
#[derive(Debug, Clone, Copy)]
pub struct Product;

impl Functional for Product {
    fn eval(&self, p: &PathView<'_>) -> f64 {
        let dt = p.dt();
        (0..p.dim()).map(|j| p.endpoint(j) * p.left_sum(j) * dt).sum()
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C12
    }

    fn analytic_jet(&self, p: &PathView<'_>) -> Option<DupireJet> {
        let d = p.dim();
        let dt = p.dt();
        Some(DupireJet {
            dt: (0..d).map(|j| p.endpoint(j).powi(2)).sum(),
            dx: (0..d).map(|j| p.left_sum(j) * dt).collect(),
            dxx: Matrix::zeros(d),
        })
    }

    fn analytic_riesz(&self, p: &PathView<'_>) -> Option<RieszRepresentation> {
        let dt = p.dt();
        let w = density_weights(p, |_, j| p.endpoint(j));
        let atom = (0..p.dim()).map(|j| p.left_sum(j) * dt).collect();
        Some(RieszRepresentation::new(*p.grid(), p.stop_index(), w, atom))
    }

    fn id(&self) -> String {
        "product".into()
    }
}

/// `sum_j (int_0^t w(s) x_j(s) ds)^2`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticIntegral(pub Weight);

impl QuadraticIntegral {
    fn inner(&self, p: &PathView<'_>, j: usize) -> f64 {
        match self.0 {
            Weight::One => p.left_sum(j) * p.dt(),
            w => {
                let dt = p.dt();
                p.left_quadrature(j, |s, x| w.cell_mean(s, dt) * x)
            }
        }
    }
}

impl Functional for QuadraticIntegral {
    fn eval(&self, p: &PathView<'_>) -> f64 {
        (0..p.dim()).map(|j| self.inner(p, j).powi(2)).sum()
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C12
    }

    fn analytic_jet(&self, p: &PathView<'_>) -> Option<DupireJet> {
        let d = p.dim();
        let wt = self.0.at(p.time());
        Some(DupireJet {
            dt: (0..d).map(|j| 2.0 * wt * p.endpoint(j) * self.inner(p, j)).sum(),
            dx: vec![0.0; d],
            dxx: Matrix::zeros(d),
        })
    }

    fn analytic_riesz(&self, p: &PathView<'_>) -> Option<RieszRepresentation> {
        let g = *p.grid();
        let inner: Vec<f64> = (0..p.dim()).map(|j| self.inner(p, j)).collect();
        let w = density_weights(p, |i, j| 2.0 * inner[j] * self.0.cell_mean(g.node(i), g.dt()));
        Some(RieszRepresentation::new(g, p.stop_index(), w, vec![0.0; p.dim()]))
    }

    fn id(&self) -> String {
        match self.0 {
            Weight::One => "quadratic-integral".into(),
            Weight::Linear => "quadratic-integral:linear".into(),
        }
    }
}

/// `tau(t) * sum_j f(x_j(t))`.
#[derive(Debug, Clone, Copy)]
pub struct EndpointTimesTime {
    pub f: ScalarFn,
    pub clock: Clock,
}

impl Functional for EndpointTimesTime {
    fn eval(&self, p: &PathView<'_>) -> f64 {
        self.clock.at(p.time()) * (0..p.dim()).map(|j| self.f.value(p.endpoint(j))).sum::<f64>()
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C12
    }

    fn analytic_jet(&self, p: &PathView<'_>) -> Option<DupireJet> {
        let t = p.time();
        let tau = self.clock.at(t);
        let end = p.endpoint_vec();
        Some(DupireJet {
            dt: self.clock.rate(t) * end.iter().map(|&x| self.f.value(x)).sum::<f64>(),
            dx: end.iter().map(|&x| tau * self.f.d1(x)).collect(),
            dxx: Matrix::from_diag(&end.iter().map(|&x| tau * self.f.d2(x)).collect::<Vec<_>>()),
        })
    }

    fn analytic_riesz(&self, p: &PathView<'_>) -> Option<RieszRepresentation> {
        let tau = self.clock.at(p.time());
        let atom = p.endpoint_vec().iter().map(|&x| tau * self.f.d1(x)).collect();
        Some(RieszRepresentation::new(*p.grid(), p.stop_index(), zero_weights(p), atom))
    }

    fn id(&self) -> String {
        match self.clock {
            Clock::Linear => format!("endpoint-time:{}", self.f.name()),
            Clock::Exp => format!("endpoint-exptime:{}", self.f.name()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Functional for Constant {
    fn eval(&self, _p: &PathView<'_>) -> f64 {
        self.0
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C12
    }

    fn analytic_jet(&self, p: &PathView<'_>) -> Option<DupireJet> {
        Some(DupireJet { dt: 0.0, dx: vec![0.0; p.dim()], dxx: Matrix::zeros(p.dim()) })
    }

    fn analytic_riesz(&self, p: &PathView<'_>) -> Option<RieszRepresentation> {
        Some(RieszRepresentation::new(*p.grid(), p.stop_index(), zero_weights(p), vec![0.0; p.dim()]))
    }

    fn id(&self) -> String {
        format!("constant:{}", self.0)
    }
}

/// A user-supplied evaluator. Carries no analytic derivatives and is never
/// assumed smooth.
pub struct FnFunctional<F> {
    name: String,
    f: F,
}

impl<F> FnFunctional<F>
where
    F: Fn(&PathView<'_>) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> Functional for FnFunctional<F>
where
    F: Fn(&PathView<'_>) -> f64 + Send + Sync,
{
    fn eval(&self, p: &PathView<'_>) -> f64 {
        (self.f)(p)
    }

    fn id(&self) -> String {
        self.name.clone()
    }
}

impl<F> fmt::Debug for FnFunctional<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnFunctional").field("name", &self.name).finish()
    }
}

/// The six ground-truth entries used by the acceptance matrix.
pub const CATALOG_IDS: [&str; 6] = [
    "endpoint:square",
    "integral:identity",
    "weighted:linear",
    "product",
    "quadratic-integral",
    "endpoint-time:square",
];

pub fn catalog() -> Vec<SharedFunctional> {
    CATALOG_IDS.iter().map(|id| parse_functional(id).expect("catalog id")).collect()
}

/// Resolves a functional id such as `endpoint:square` or `product`.
pub fn parse_functional(id: &str) -> Result<SharedFunctional> {
    let unknown =
        || Error::Parse(format!("unknown functional '{id}'; valid ids: {}", valid_functional_ids().join(", ")));
    let (head, arg) = match id.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (id, None),
    };
    let scalar = |a: Option<&str>| a.and_then(ScalarFn::parse).ok_or_else(unknown);
    let f: SharedFunctional = match head {
        "endpoint" => Arc::new(Endpoint(scalar(arg)?)),
        "integral" => Arc::new(RunningIntegral(scalar(arg)?)),
        "weighted" => match arg {
            Some("linear") => Arc::new(WeightedIntegral(Weight::Linear)),
            Some("one") => Arc::new(WeightedIntegral(Weight::One)),
            _ => return Err(unknown()),
        },
        "product" if arg.is_none() => Arc::new(Product),
        "quadratic-integral" => match arg {
            None | Some("one") => Arc::new(QuadraticIntegral(Weight::One)),
            Some("linear") => Arc::new(QuadraticIntegral(Weight::Linear)),
            _ => return Err(unknown()),
        },
        "endpoint-time" => Arc::new(EndpointTimesTime { f: scalar(arg)?, clock: Clock::Linear }),
        "endpoint-exptime" => Arc::new(EndpointTimesTime { f: scalar(arg)?, clock: Clock::Exp }),
        "constant" => {
            let c = arg.and_then(|a| a.parse::<f64>().ok()).ok_or_else(unknown)?;
            Arc::new(Constant(c))
        }
        _ => return Err(unknown()),
    };
    Ok(f)
}

pub fn valid_functional_ids() -> Vec<String> {
    let scalars = ["identity", "square", "quartic", "sin", "exp"];
    let mut ids = Vec::new();
    for head in ["endpoint", "integral", "endpoint-time", "endpoint-exptime"] {
        ids.extend(scalars.iter().map(|s| format!("{head}:{s}")));
    }
    ids.extend(
        [
            "weighted:linear",
            "weighted:one",
            "product",
            "quadratic-integral",
            "quadratic-integral:linear",
            "constant:<c>",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    ids
}
