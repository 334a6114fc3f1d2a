//! Finite-difference estimators of the Dupire derivatives.
//!
//! Vertical derivatives bump the endpoint only (central differences, even
//! error expansion in h). The horizontal derivative extends the path flat
//! and is strictly one-sided forward, since the limit is only defined for
//! `s >= t`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{evaluate, DupireJet, Functional};
use crate::matrix::Matrix;
use crate::path::PathView;
use crate::stats::richardson;

pub const MAX_RICHARDSON: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdConfig {
    /// Vertical bump size; `None` uses `1e-4 * (1 + |x(t)|)`.
    pub h_vertical: Option<f64>,
    /// Horizontal step in time units; `None` uses one grid step.
    pub eps_horizontal: Option<f64>,
    pub richardson_levels: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { h_vertical: None, eps_horizontal: None, richardson_levels: 1 }
    }
}

impl FdConfig {
    pub fn with_h(mut self, h: f64) -> Self {
        self.h_vertical = Some(h);
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps_horizontal = Some(eps);
        self
    }

    pub fn with_richardson(mut self, levels: usize) -> Self {
        self.richardson_levels = levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.h_vertical {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Domain(format!("h_vertical must be positive, got {h}")));
            }
        }
        if !(1..=MAX_RICHARDSON).contains(&self.richardson_levels) {
            return Err(Error::Domain(format!(
                "richardson_levels must be in 1..={MAX_RICHARDSON}, got {}",
                self.richardson_levels
            )));
        }
        Ok(())
    }

    /// The bump size actually used: the requested or default step rounded
    /// down to a power of two.
    pub fn vertical_step(&self, p: &PathView<'_>) -> f64 {
        dyadic(self.h_vertical.unwrap_or_else(|| {
            let end = (0..p.dim()).map(|j| p.endpoint(j).powi(2)).sum::<f64>().sqrt();
            1e-4 * (1.0 + end)
        }))
    }

    /// Horizontal step in whole grid steps.
    pub fn horizontal_steps(&self, p: &PathView<'_>) -> Result<usize> {
        match self.eps_horizontal {
            None => Ok(1),
            Some(eps) => p.grid().steps_in(eps),
        }
    }
}

/// Largest power of two not above `h`. With a dyadic step, `x + h` and `x - h` are
/// symmetric about `x` in floating point for moderate `x`, and central
/// differences of quadratics come out exact.
pub fn dyadic(h: f64) -> f64 {
    2f64.powi(h.log2().floor() as i32)
}

fn eval_at(f: &dyn Functional, p: &PathView<'_>) -> Result<f64> {
    evaluate(f, p)
}

fn central_gradient(f: &dyn Functional, p: &PathView<'_>, h: f64) -> Result<Vec<f64>> {
    (0..p.dim())
        .map(|i| {
            let up = eval_at(f, &p.bumped_axis(i, h))?;
            let down = eval_at(f, &p.bumped_axis(i, -h))?;
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

pub fn vertical_derivative(f: &dyn Functional, p: &PathView<'_>, cfg: &FdConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let h0 = cfg.vertical_step(p);
    let levels: Vec<Vec<f64>> =
        (0..cfg.richardson_levels).map(|l| central_gradient(f, p, h0 / 2f64.powi(l as i32))).collect::<Result<_>>()?;
    Ok((0..p.dim())
        .map(|i| {
            let seq: Vec<f64> = levels.iter().map(|g| g[i]).collect();
            richardson(&seq, 2)
        })
        .collect())
}

fn second_differences(f: &dyn Functional, p: &PathView<'_>, h: f64) -> Result<Matrix> {
    let d = p.dim();
    let centre = eval_at(f, p)?;
    let mut m = Matrix::zeros(d);
    for i in 0..d {
        let up = eval_at(f, &p.bumped_axis(i, h))?;
        let down = eval_at(f, &p.bumped_axis(i, -h))?;
        m.set(i, i, (up - 2.0 * centre + down) / (h * h));
        for j in 0..i {
            let pp = eval_at(f, &p.bumped_axes(i, h, j, h))?;
            let pm = eval_at(f, &p.bumped_axes(i, h, j, -h))?;
            let mp = eval_at(f, &p.bumped_axes(i, -h, j, h))?;
            let mm = eval_at(f, &p.bumped_axes(i, -h, j, -h))?;
            let ij = (pp - pm - mp + mm) / (4.0 * h * h);
            let pp = eval_at(f, &p.bumped_axes(j, h, i, h))?;
            let pm = eval_at(f, &p.bumped_axes(j, h, i, -h))?;
            let mp = eval_at(f, &p.bumped_axes(j, -h, i, h))?;
            let mm = eval_at(f, &p.bumped_axes(j, -h, i, -h))?;
            let ji = (pp - pm - mp + mm) / (4.0 * h * h);
            let sym = 0.5 * (ij + ji);
            m.set(i, j, sym);
            m.set(j, i, sym);
        }
    }
    Ok(m)
}

pub fn vertical_hessian(f: &dyn Functional, p: &PathView<'_>, cfg: &FdConfig) -> Result<Matrix> {
    cfg.validate()?;
    let h0 = cfg.vertical_step(p);
    let levels: Vec<Matrix> = (0..cfg.richardson_levels)
        .map(|l| second_differences(f, p, h0 / 2f64.powi(l as i32)))
        .collect::<Result<_>>()?;
    let d = p.dim();
    let mut out = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            let seq: Vec<f64> = levels.iter().map(|m| m.get(i, j)).collect();
            let v = richardson(&seq, 2);
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

/// Forward quotient `(f(x_{t, t+m dt}) - f(x_t)) / (m dt)` on the flat
/// extension.
pub fn horizontal_quotient(f: &dyn Functional, p: &PathView<'_>, m: usize) -> Result<f64> {
    let n = p.grid().steps();
    if p.stop_index() >= n {
        return Err(Error::Boundary("horizontal derivative is undefined at the horizon".into()));
    }
    if p.stop_index() + m > n {
        return Err(Error::Boundary(format!("extension by {m} steps from node {} leaves the grid", p.stop_index())));
    }
    let base = eval_at(f, p)?;
    let ext = eval_at(f, &p.extended(p.stop_index() + m)?)?;
    Ok((ext - base) / (m as f64 * p.dt()))
}

pub fn horizontal_derivative(f: &dyn Functional, p: &PathView<'_>, cfg: &FdConfig) -> Result<f64> {
    cfg.validate()?;
    let m0 = cfg.horizontal_steps(p)?;
    let mut seq = vec![horizontal_quotient(f, p, m0)?];
    let mut m = m0;
    // Halve the step while it stays on the grid.
    while seq.len() < cfg.richardson_levels && m % 2 == 0 {
        m /= 2;
        seq.push(horizontal_quotient(f, p, m)?);
    }
    Ok(richardson(&seq, 1))
}

pub fn numerical_dupire_jet(f: &dyn Functional, p: &PathView<'_>, cfg: &FdConfig) -> Result<DupireJet> {
    Ok(DupireJet {
        dt: horizontal_derivative(f, p, cfg)?,
        dx: vertical_derivative(f, p, cfg)?,
        dxx: vertical_hessian(f, p, cfg)?,
    })
}

/// Estimates under repeated halving of the vertical step, with the ratios
/// of successive differences. For user functionals without known error
/// bounds, a ratio near 4 indicates the asymptotic regime.
#[derive(Debug, Clone, Serialize)]
pub struct HalvingDiagnostic {
    pub steps: Vec<f64>,
    pub estimates: Vec<f64>,
    pub ratios: Vec<f64>,
}

pub fn vertical_halving_diagnostic(
    f: &dyn Functional,
    p: &PathView<'_>,
    axis: usize,
    h0: f64,
    halvings: usize,
) -> Result<HalvingDiagnostic> {
    let steps: Vec<f64> = (0..=halvings).map(|l| h0 / 2f64.powi(l as i32)).collect();
    let estimates = steps
        .iter()
        .map(|&h| {
            let up = eval_at(f, &p.bumped_axis(axis, h))?;
            let down = eval_at(f, &p.bumped_axis(axis, -h))?;
            Ok((up - down) / (2.0 * h))
        })
        .collect::<Result<Vec<f64>>>()?;
    let diffs: Vec<f64> = estimates.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let ratios = diffs.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(HalvingDiagnostic { steps, estimates, ratios })
}
