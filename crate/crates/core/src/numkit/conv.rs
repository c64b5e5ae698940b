use alloc::vec;
use alloc::vec::Vec;

use super::TimeGrid;
use crate::Result;

/// A gridded causal kernel with an optional instantaneous part:
/// `f(t) = delta · δ(t) + values(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridKernel {
    pub delta: f64,
    pub values: Vec<f64>,
}

impl GridKernel {
    pub fn regular(values: Vec<f64>) -> Self {
        Self { delta: 0.0, values }
    }

    pub fn delta_only(weight: f64, len: usize) -> Self {
        Self { delta: weight, values: vec![0.0; len] }
    }
}

/// `(f ∗ g)(t_n)` by the trapezoidal rule plus `f.delta · g(t_n)`.
pub fn grid_convolve(f: &GridKernel, g: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
    grid.check_len(f.values.len())?;
    grid.check_len(g.len())?;
    let mut out = trapezoid_convolve(&f.values, g, grid.step());
    if f.delta != 0.0 {
        for (o, &x) in out.iter_mut().zip(g) {
            *o += f.delta * x;
        }
    }
    Ok(out)
}

/// Trapezoidal `∫₀^{t_n} f(t_n - τ) g(τ) dτ` for equally long samples.
pub fn trapezoid_convolve(f: &[f64], g: &[f64], h: f64) -> Vec<f64> {
    assert_eq!(f.len(), g.len(), "convolution operands must share a grid");
    ReversedKernel::new(f).convolve(g, h)
}

/// Cumulative trapezoid `∫₀^{t_n} f`; equals `trapezoid_convolve(1, f)`.
pub fn cumulative_trapezoid(f: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in f.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(f.len());
    out
}

/// A kernel stored back to front so that every convolution sum is a
/// contiguous dot product.
#[derive(Debug, Clone)]
pub(crate) struct ReversedKernel {
    rev: Vec<f64>,
    zero: bool,
}

impl ReversedKernel {
    pub(crate) fn new(f: &[f64]) -> Self {
        Self { rev: f.iter().rev().copied().collect(), zero: f.iter().all(|&x| x == 0.0) }
    }

    pub(crate) fn len(&self) -> usize {
        self.rev.len()
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.zero
    }

    /// `f(t_n)`.
    pub(crate) fn at(&self, n: usize) -> f64 {
        self.rev[self.rev.len() - 1 - n]
    }

    /// `Σ_{m=lo}^{hi} f_{n-m} g_m` with `n` the index paired with `g[lo]`
    /// through `f_{n-lo}`.
    pub(crate) fn partial_sum(&self, n: usize, g: &[f64], lo: usize, hi: usize) -> f64 {
        if hi < lo {
            return 0.0;
        }
        let last = self.rev.len() - 1;
        // f_{n-m} sits at rev[last - n + m]
        let start = last - n + lo;
        dot(&self.rev[start..start + (hi - lo + 1)], &g[lo..=hi])
    }

    pub(crate) fn convolve(&self, g: &[f64], h: f64) -> Vec<f64> {
        let len = self.len();
        assert_eq!(g.len(), len);
        let mut out = vec![0.0; len];
        if self.zero || len == 0 {
            return out;
        }
        let f0 = self.at(0);
        for n in 1..len {
            let full = self.partial_sum(n, g, 0, n);
            out[n] = h * (full - 0.5 * (self.at(n) * g[0] + f0 * g[n]));
        }
        out
    }
}

/// Dot product with a fixed association order (eight interleaved partial
/// sums), so results are reproducible and the loop vectorizes.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let x = &a[8 * c..8 * c + 8];
        let y = &b[8 * c..8 * c + 8];
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for k in 8 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}
