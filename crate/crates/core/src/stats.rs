//! Deterministic reductions, Monte Carlo summaries and small fits.

use serde::Serialize;

/// Pairwise (cascade) summation in fixed index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let m = mean(xs);
        let stderr = if n < 2 {
            0.0
        } else {
            let sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
            (pairwise_sum(&sq) / (n - 1) as f64 / n as f64).sqrt()
        };
        Self { mean: m, stderr, n_paths: n }
    }
}

/// Ordinary least squares line `y = a + b x`; returns `(a, b)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Weights `w` with `p(x0) = sum w_i y_i` for the interpolating polynomial
/// through `(xs_i, y_i)`.
pub fn lagrange_weights(xs: &[f64], x0: f64) -> Vec<f64> {
    (0..xs.len())
        .map(|i| xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &xj)| (x0 - xj) / (xs[i] - xj)).product())
        .collect()
}

/// Richardson table on a sequence computed with the step halved at each
/// entry, for an error expansion in powers `step, 2*step, ...` of h.
pub fn richardson(values: &[f64], step: i32) -> f64 {
    let mut table = values.to_vec();
    for level in 1..table.len() {
        let factor = 2f64.powi(step * level as i32);
        for i in (level..table.len()).rev() {
            table[i] = table[i] + (table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    *table.last().expect("at least one value")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 45.0);
        let big: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert!((pairwise_sum(&big) - 249_750.0).abs() < 1e-9);
    }

    #[test]
    fn estimate_of_constant_has_zero_stderr() {
        let e = McEstimate::from_samples(&[2.5; 17]);
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.n_paths, 17);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 - 2.0 * x).collect();
        let (a, b) = fit_line(&xs, &ys);
        assert!((a - 0.5).abs() < 1e-12 && (b + 2.0).abs() < 1e-12);
    }

    #[test]
    fn lagrange_extrapolation_is_exact_for_cubics() {
        let xs = [0.5, 0.25, 0.125, 0.0625];
        let p = |x: f64| 1.0 - 3.0 * x + 2.0 * x * x + 5.0 * x * x * x;
        let w = lagrange_weights(&xs, 0.0);
        let v: f64 = w.iter().zip(&xs).map(|(w, &x)| w * p(x)).sum();
        assert!((v - 1.0).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_cancels_leading_terms() {
        let f = |h: f64| 2.0 + 3.0 * h * h + 7.0 * h.powi(4);
        let vals: Vec<f64> = (0..3).map(|l| f(0.1 / 2f64.powi(l))).collect();
        assert!((richardson(&vals, 2) - 2.0).abs() < 1e-13);
        let g = |h: f64| 1.0 + h;
        assert!((richardson(&[g(0.2), g(0.1)], 1) - 1.0).abs() < 1e-14);
    }
}
