//! Discrete stopped paths on a uniform time grid.
//!
//! A [`Path`] represents an element of the space of stopped paths: node
//! values up to a stop index, frozen (flat) afterwards, plus an optional
//! vertical displacement of the endpoint. The endpoint displacement is an
//! overlay and never touches the sample storage, so left-point quadratures
//! over `[0, t)` cannot see it.
//!
//! Storage is generic: [`StoppedPath`] owns its buffers behind an `Arc` and
//! clones cheaply, while [`PathView`] borrows them. Every derived path
//! (stopped earlier, bumped, extended) shares the parent's storage; only the
//! stop bookkeeping changes.

use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Per-coordinate endpoint offsets. Inline for dimensions up to four.
pub type Offset = SmallVec<[f64; 4]>;

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::Domain("grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps N; nodes are `0..=N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            self.horizon * i as f64 / self.steps as f64
        }
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        if !t.is_finite() || t < -ALIGN_TOL * self.dt() {
            return Err(Error::Domain(format!("time {t} is outside [0, {}]", self.horizon)));
        }
        let r = t / self.dt();
        let i = r.round();
        if (r - i).abs() > ALIGN_TOL * r.abs().max(1.0) {
            return Err(Error::GridAlignment { time: t, dt: self.dt() });
        }
        let i = i as usize;
        if i > self.steps {
            return Err(Error::Domain(format!("time {t} exceeds the horizon {}", self.horizon)));
        }
        Ok(i)
    }

    /// Converts a positive duration into a whole number of steps.
    pub fn steps_in(&self, duration: f64) -> Result<usize> {
        if !(duration > 0.0) {
            return Err(Error::Domain(format!("duration must be positive, got {duration}")));
        }
        let r = duration / self.dt();
        let m = r.round();
        if (r - m).abs() > ALIGN_TOL * r.max(1.0) || m < 1.0 {
            return Err(Error::GridAlignment { time: duration, dt: self.dt() });
        }
        Ok(m as usize)
    }
}

/// A stopped path with storage `S`.
///
/// Node values: `samples[i]` for `i < live`; `samples[live] + carry` on
/// `[live, stop]`, with `bump` added at `stop` only. Beyond `stop` the path
/// continues flat at `samples[live] + carry`.
#[derive(Debug, Clone)]
pub struct Path<S> {
    grid: TimeGrid,
    dim: usize,
    samples: S,
    prefix: S,
    live: usize,
    stop: usize,
    carry: Offset,
    bump: Offset,
}

pub type StoppedPath = Path<Arc<[f64]>>;
pub type PathView<'a> = Path<&'a [f64]>;

/// Running left-point sums: `out[i*dim + j] = sum_{m < i} samples[m*dim + j]`.
pub fn prefix_sums(samples: &[f64], dim: usize) -> Vec<f64> {
    let nodes = samples.len() / dim;
    let mut out = vec![0.0; samples.len()];
    for i in 1..nodes {
        for j in 0..dim {
            out[i * dim + j] = out[(i - 1) * dim + j] + samples[(i - 1) * dim + j];
        }
    }
    out
}

impl StoppedPath {
    /// A path with `(N+1)*dim` node-major samples, stopped at the horizon.
    pub fn new(grid: TimeGrid, dim: usize, samples: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        let expected = (grid.steps() + 1) * dim;
        if samples.len() != expected {
            return Err(Error::Dimension { expected, got: samples.len() });
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        let prefix = prefix_sums(&samples, dim);
        Ok(Self::from_parts(grid, dim, samples, prefix, grid.steps()))
    }

    pub fn scalar(grid: TimeGrid, samples: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, samples)
    }

    /// Samples a scalar function of time at the nodes.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let samples = (0..=grid.steps()).map(|i| f(grid.node(i))).collect();
        Self::new(grid, 1, samples).expect("sampled function must be finite")
    }

    pub fn constant(grid: TimeGrid, value: &[f64]) -> Self {
        let samples = (0..=grid.steps()).flat_map(|_| value.iter().copied()).collect();
        Self::new(grid, value.len(), samples).expect("finite constant")
    }

    /// Builds a path from storage that may end at the live node. Used by the
    /// solver, whose output only holds nodes up to the final time.
    pub(crate) fn from_parts(grid: TimeGrid, dim: usize, samples: Vec<f64>, prefix: Vec<f64>, stop: usize) -> Self {
        debug_assert!(samples.len() >= (stop + 1) * dim);
        debug_assert_eq!(samples.len(), prefix.len());
        Self {
            grid,
            dim,
            samples: samples.into(),
            prefix: prefix.into(),
            live: stop,
            stop,
            carry: zeros(dim),
            bump: zeros(dim),
        }
    }

    pub fn view(&self) -> PathView<'_> {
        Path {
            grid: self.grid,
            dim: self.dim,
            samples: &self.samples,
            prefix: &self.prefix,
            live: self.live,
            stop: self.stop,
            carry: self.carry.clone(),
            bump: self.bump.clone(),
        }
    }
}

impl<'a> PathView<'a> {
    /// A bump-free view over solver storage, stopped at `stop`.
    pub(crate) fn over(grid: TimeGrid, dim: usize, samples: &'a [f64], prefix: &'a [f64], stop: usize) -> Self {
        Path { grid, dim, samples, prefix, live: stop, stop, carry: zeros(dim), bump: zeros(dim) }
    }

    /// Copies the view into an owned path with the same represented values.
    pub fn to_owned_path(&self) -> StoppedPath {
        let n = (self.live + 1) * self.dim;
        Path {
            grid: self.grid,
            dim: self.dim,
            samples: self.samples[..n].into(),
            prefix: self.prefix[..n].into(),
            live: self.live,
            stop: self.stop,
            carry: self.carry.clone(),
            bump: self.bump.clone(),
        }
    }
}

pub(crate) fn zeros(dim: usize) -> Offset {
    SmallVec::from_elem(0.0, dim)
}

impl<S: AsRef<[f64]> + Clone> Path<S> {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stop_index(&self) -> usize {
        self.stop
    }

    /// Stop time t of the represented element.
    pub fn time(&self) -> f64 {
        self.grid.node(self.stop)
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn bump(&self) -> &[f64] {
        &self.bump
    }

    pub fn is_bumped(&self) -> bool {
        self.bump.iter().any(|&b| b != 0.0)
    }

    fn base(&self, j: usize) -> f64 {
        self.samples.as_ref()[self.live * self.dim + j] + self.carry[j]
    }

    /// Coordinate `j` of the represented value at node `i`. Nodes past the
    /// stop index return the frozen continuation, which excludes the bump.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        if i < self.live {
            self.samples.as_ref()[i * self.dim + j]
        } else if i == self.stop {
            self.base(j) + self.bump[j]
        } else {
            self.base(j)
        }
    }

    /// Value at the stop time, bump included.
    #[inline]
    pub fn endpoint(&self, j: usize) -> f64 {
        self.base(j) + self.bump[j]
    }

    pub fn endpoint_vec(&self) -> Vec<f64> {
        (0..self.dim).map(|j| self.endpoint(j)).collect()
    }

    /// Value at `min(i, stop)`.
    pub fn clamped(&self, i: usize, j: usize) -> f64 {
        self.value(i.min(self.stop), j)
    }

    /// `sum_{i < stop} value(i, j)` in O(1) from the stored running sums.
    pub fn left_sum(&self, j: usize) -> f64 {
        self.prefix.as_ref()[self.live * self.dim + j] + (self.stop - self.live) as f64 * self.base(j)
    }

    /// Left-point Riemann sum of `g(t_i, x_i)` over `[0, t)`.
    pub fn left_quadrature(&self, j: usize, g: impl Fn(f64, f64) -> f64) -> f64 {
        let dt = self.dt();
        let mut acc = 0.0;
        for i in 0..self.stop {
            acc += g(self.grid.node(i), self.value(i, j));
        }
        acc * dt
    }

    /// Raw storage access, ignoring stop bookkeeping. Reading past the stop
    /// index breaks non-anticipativity; this exists for probing that.
    pub fn raw_sample(&self, i: usize, j: usize) -> Option<f64> {
        self.samples.as_ref().get(i * self.dim + j).copied()
    }

    /// Euclidean norm of the represented value at node `i`.
    pub fn norm_at(&self, i: usize) -> f64 {
        (0..self.dim).map(|j| self.value(i, j).powi(2)).sum::<f64>().sqrt()
    }

    /// Sup norm over `[0, t]`, endpoint bump included.
    pub fn sup_norm(&self) -> f64 {
        (0..=self.stop).map(|i| self.norm_at(i)).fold(0.0, f64::max)
    }

    /// All represented node values `0..=N`, node-major, bump excluded.
    pub fn node_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity((self.grid.steps() + 1) * self.dim);
        for i in 0..=self.grid.steps() {
            for j in 0..self.dim {
                out.push(if i < self.live { self.value(i, j) } else { self.base(j) });
            }
        }
        out
    }

    /// Adds `x` to the endpoint bump (the path `gamma_t^x`).
    pub fn bumped(&self, x: &[f64]) -> Result<Self> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        let mut out = self.clone();
        for (b, xi) in out.bump.iter_mut().zip(x) {
            *b += xi;
        }
        Ok(out)
    }

    /// Bump along a single coordinate; avoids building a full vector.
    pub fn bumped_axis(&self, j: usize, h: f64) -> Self {
        let mut out = self.clone();
        out.bump[j] += h;
        out
    }

    pub fn bumped_axes(&self, i: usize, hi: f64, j: usize, hj: f64) -> Self {
        let mut out = self.clone();
        out.bump[i] += hi;
        out.bump[j] += hj;
        out
    }

    /// Flat extension to node `s`: the bump is folded into the endpoint first,
    /// so nodes in `(t, s]` carry the bumped value.
    pub fn extended(&self, s: usize) -> Result<Self> {
        if s < self.stop {
            return Err(Error::Domain(format!("cannot extend backwards from node {} to {s}", self.stop)));
        }
        if s > self.grid.steps() {
            return Err(Error::Domain(format!("node {s} is beyond the horizon")));
        }
        if s == self.stop || !self.is_bumped() {
            let mut out = self.clone();
            for (c, b) in out.carry.iter_mut().zip(out.bump.iter_mut()) {
                *c += *b;
                *b = 0.0;
            }
            out.stop = s;
            return Ok(out);
        }
        if self.live == self.stop {
            let mut out = self.clone();
            for (c, b) in out.carry.iter_mut().zip(out.bump.iter_mut()) {
                *c += *b;
                *b = 0.0;
            }
            out.stop = s;
            return Ok(out);
        }
        Err(Error::Unsupported("extending a bumped path that was already extended needs an owned copy".into()))
    }

    /// The same underlying path stopped at node `k` (flat continuation when
    /// `k` lies past the current stop). The bump must be zero.
    pub fn stopped_at(&self, k: usize) -> Result<Self> {
        if self.is_bumped() {
            return Err(Error::Domain("stop_at requires a bump-free path".into()));
        }
        if k > self.grid.steps() {
            return Err(Error::Domain(format!("node {k} is beyond the horizon")));
        }
        let mut out = self.clone();
        if k < self.live {
            out.live = k;
            out.carry = zeros(self.dim);
        }
        out.stop = k;
        Ok(out)
    }

    /// Nodewise `value + sum_m c_m * eta_m` on `[0, t]`, frozen afterwards.
    /// Requires a bump-free path.
    pub fn perturbed(&self, directions: &[(&PathView<'_>, f64)]) -> Result<StoppedPath> {
        if self.is_bumped() {
            return Err(Error::Domain("perturbation requires a bump-free path".into()));
        }
        for (eta, _) in directions {
            if eta.grid != self.grid {
                return Err(Error::Domain("direction lives on a different grid".into()));
            }
            if eta.dim != self.dim {
                return Err(Error::Dimension { expected: self.dim, got: eta.dim });
            }
        }
        let d = self.dim;
        let mut samples = Vec::with_capacity((self.stop + 1) * d);
        for i in 0..=self.stop {
            for j in 0..d {
                let mut x = self.value(i, j);
                for (eta, c) in directions {
                    x += c * eta.value(i, j);
                }
                samples.push(x);
            }
        }
        let prefix = prefix_sums(&samples, d);
        Ok(StoppedPath::from_parts(self.grid, d, samples, prefix, self.stop))
    }
}

/// Owned version of [`Path::stopped_at`] that writes the frozen
/// continuation into storage, so raw samples past `t` equal the endpoint.
pub fn stop_at(path: &StoppedPath, t: f64) -> Result<StoppedPath> {
    let k = path.grid().index_of(t)?;
    let stopped = path.stopped_at(k)?;
    let samples = stopped.node_values();
    let prefix = prefix_sums(&samples, path.dim());
    Ok(StoppedPath::from_parts(*path.grid(), path.dim(), samples, prefix, k))
}

pub fn vertical_bump(path: &StoppedPath, x: &[f64]) -> Result<StoppedPath> {
    path.bumped(x)
}

pub fn horizontal_extend(path: &StoppedPath, s: f64) -> Result<StoppedPath> {
    let k = path.grid().index_of(s)?;
    if k < path.stop_index() {
        return Err(Error::Domain(format!("extension time {s} precedes the stop time {}", path.time())));
    }
    match path.extended(k) {
        Err(Error::Unsupported(_)) => {
            let mut values = path.node_values();
            let d = path.dim();
            let stop = path.stop_index();
            for j in 0..d {
                let v = path.endpoint(j);
                for i in stop..=path.grid().steps() {
                    values[i * d + j] = v;
                }
            }
            let prefix = prefix_sums(&values, d);
            let mut out = StoppedPath::from_parts(*path.grid(), d, values, prefix, stop);
            out.stop = k;
            Ok(out)
        }
        other => other,
    }
}

/// `sup_s |p(s ^ t) - q(s ^ t')| + |t - t'|` over nodes up to `max(t, t')`.
pub fn d_infinity<S1, S2>(p: &Path<S1>, q: &Path<S2>) -> Result<f64>
where
    S1: AsRef<[f64]> + Clone,
    S2: AsRef<[f64]> + Clone,
{
    if p.dim() != q.dim() {
        return Err(Error::Dimension { expected: p.dim(), got: q.dim() });
    }
    if p.grid() != q.grid() {
        return Err(Error::Domain("paths live on different grids".into()));
    }
    let top = p.stop_index().max(q.stop_index());
    let mut sup = 0.0_f64;
    for i in 0..=top {
        let diff = (0..p.dim()).map(|j| (p.clamped(i, j) - q.clamped(i, j)).powi(2)).sum::<f64>().sqrt();
        sup = sup.max(diff);
    }
    Ok(sup + (p.time() - q.time()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(n as f64, n).unwrap()
    }

    #[test]
    fn grid_nodes_hit_horizon_exactly() {
        let g = TimeGrid::new(0.1, 3).unwrap();
        assert_eq!(g.node(3), 0.1);
        assert_eq!(g.index_of(0.1).unwrap(), 3);
        assert!(matches!(g.index_of(0.05), Err(Error::GridAlignment { .. })));
        assert!(matches!(g.index_of(0.2), Err(Error::Domain(_))));
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn stop_at_freezes_later_nodes() {
        let p = StoppedPath::scalar(grid(3), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = stop_at(&p, 1.0).unwrap();
        assert_eq!(s.stop_index(), 1);
        assert_eq!(s.node_values(), vec![1.0, 2.0, 2.0, 2.0]);
        assert_eq!(s.raw_sample(3, 0), Some(2.0));

        let full = stop_at(&p, 3.0).unwrap();
        assert_eq!(full.node_values(), p.node_values());

        let c = StoppedPath::scalar(grid(2), vec![5.0, 7.0, 9.0]).unwrap();
        assert_eq!(stop_at(&c, 0.0).unwrap().node_values(), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn stop_at_errors() {
        let p = StoppedPath::scalar(grid(3), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(stop_at(&p, 1.5), Err(Error::GridAlignment { .. })));
        assert!(matches!(stop_at(&p, 4.0), Err(Error::Domain(_))));
        let b = vertical_bump(&p, &[1.0]).unwrap();
        assert!(stop_at(&b, 1.0).is_err());
    }

    #[test]
    fn vertical_bump_is_an_overlay() {
        let p = stop_at(&StoppedPath::scalar(grid(3), vec![1.0, 3.0, 5.0, 8.0]).unwrap(), 2.0).unwrap();
        let b = vertical_bump(&p, &[2.0]).unwrap();
        assert_eq!(b.endpoint(0), 7.0);
        assert_eq!(b.value(0, 0), 1.0);
        assert_eq!(b.value(1, 0), 3.0);
        assert_eq!(b.node_values(), p.node_values());
        assert_eq!(b.left_sum(0), p.left_sum(0));

        let zero = vertical_bump(&p, &[0.0]).unwrap();
        assert_eq!(zero.endpoint(0), p.endpoint(0));
        let back = vertical_bump(&b, &[-2.0]).unwrap();
        assert_eq!(back.endpoint(0), 5.0);
        assert!(!back.is_bumped());
        assert!(matches!(vertical_bump(&p, &[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn horizontal_extend_is_flat() {
        let g = grid(4);
        let p = stop_at(&StoppedPath::scalar(g, vec![1.0, 2.0, 5.0, 9.0, 9.0]).unwrap(), 2.0).unwrap();
        let e = horizontal_extend(&p, 4.0).unwrap();
        assert_eq!(e.stop_index(), 4);
        assert_eq!(e.value(3, 0), 5.0);
        assert_eq!(e.value(4, 0), 5.0);

        let same = horizontal_extend(&p, 2.0).unwrap();
        assert_eq!(same.node_values(), p.node_values());

        let b = vertical_bump(&p, &[1.0]).unwrap();
        let eb = horizontal_extend(&b, 3.0).unwrap();
        assert_eq!(eb.value(2, 0), 6.0);
        assert_eq!(eb.value(3, 0), 6.0);
        assert!(!eb.is_bumped());
        assert_eq!(eb.left_sum(0), 1.0 + 2.0 + 6.0);

        assert!(matches!(horizontal_extend(&p, 1.0), Err(Error::Domain(_))));
        assert!(horizontal_extend(&p, 5.0).is_err());
    }

    #[test]
    fn re_extending_a_bumped_extension_materializes() {
        let g = grid(4);
        let p = stop_at(&StoppedPath::scalar(g, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap(), 1.0).unwrap();
        let e = horizontal_extend(&p, 2.0).unwrap();
        let b = vertical_bump(&e, &[10.0]).unwrap();
        assert!(b.extended(4).is_err());
        let x = horizontal_extend(&b, 4.0).unwrap();
        let vals: Vec<f64> = (0..=4).map(|i| x.value(i, 0)).collect();
        assert_eq!(vals, vec![0.0, 1.0, 11.0, 11.0, 11.0]);
    }

    #[test]
    fn sup_norm_includes_bump() {
        let g = grid(2);
        let p = StoppedPath::scalar(g, vec![1.0, -3.0, 2.0]).unwrap();
        assert_eq!(p.sup_norm(), 3.0);
        assert_eq!(StoppedPath::constant(g, &[0.0]).sup_norm(), 0.0);
        let q = StoppedPath::scalar(g, vec![4.0, 1.0, 2.0]).unwrap();
        assert_eq!(vertical_bump(&q, &[3.0]).unwrap().sup_norm(), 5.0);
    }

    #[test]
    fn d_infinity_examples() {
        let g = grid(2);
        let z = StoppedPath::constant(g, &[0.0]);
        let z1 = stop_at(&z, 1.0).unwrap();
        assert_eq!(d_infinity(&z1, &z).unwrap(), 1.0);
        assert_eq!(d_infinity(&z, &z).unwrap(), 0.0);
        let three = stop_at(&StoppedPath::constant(g, &[3.0]), 1.0).unwrap();
        assert_eq!(d_infinity(&z1, &three).unwrap(), 3.0);
        let two = StoppedPath::constant(g, &[0.0, 0.0]);
        assert!(matches!(d_infinity(&z, &two), Err(Error::Dimension { .. })));
    }

    #[test]
    fn left_sum_matches_direct_quadrature() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let p = StoppedPath::from_fn(g, |t| (3.0 * t).sin());
        for k in 0..=8 {
            let s = p.stopped_at(k).unwrap();
            let direct: f64 = (0..k).map(|i| s.value(i, 0)).sum();
            assert!((s.left_sum(0) - direct).abs() < 1e-14);
            let e = s.extended(8).unwrap();
            let direct: f64 = (0..8).map(|i| e.value(i, 0)).sum();
            assert!((e.left_sum(0) - direct).abs() < 1e-14);
        }
    }
}
