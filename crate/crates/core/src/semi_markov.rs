//! Semi-Markov jump kernels `q_ij(t)` (density of a jump `j → i` after a
//! sojourn of length `t` in `j`), their waiting-time and survival
//! functions, the stochastic matrix `T(t)` obtained from the renewal
//! series, and the equivalent convolution rate kernel `W_ij(t)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{abs, exp};
use crate::numkit::{cumulative_trapezoid, RMatrix, ReversedKernel, TimeGrid};
use crate::volterra::{ExpTerm, GriddedMatrixFn, MatrixKernel, RegularPart};
use crate::{Error, Result};

/// Slack allowed on column masses before a kernel is rejected.
const MASS_TOLERANCE: f64 = 1e-12;

/// Default truncation threshold for [`build_t_series`].
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;

/// Hard cap on the number of series terms.
pub const MAX_SERIES_TERMS: usize = 10_000;

/// Semi-Markov matrix `q_ij(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpKernel {
    /// `q_ij(t) = κ_ij e^{-γ_ij t}`. Entries of `gamma` are ignored where
    /// `κ_ij = 0`.
    Exponential { kappa: RMatrix, gamma: RMatrix },
    /// Per-pair samples on a grid, linearly interpolated in between and
    /// zero beyond the last node.
    Tabulated(GriddedMatrixFn),
}

impl JumpKernel {
    pub fn exponential(kappa: RMatrix, gamma: RMatrix) -> Result<Self> {
        if !kappa.is_square() {
            return Err(Error::DimensionMismatch { expected: kappa.rows(), found: kappa.cols() });
        }
        if gamma.rows() != kappa.rows() || gamma.cols() != kappa.cols() {
            return Err(Error::DimensionMismatch { expected: kappa.rows(), found: gamma.rows() });
        }
        Ok(Self::Exponential { kappa, gamma })
    }

    /// Exponential kernel sharing one decay rate across all pairs.
    pub fn exponential_uniform(kappa: RMatrix, gamma: f64) -> Result<Self> {
        let g = RMatrix::from_fn(kappa.rows(), kappa.cols(), |_, _| gamma);
        Self::exponential(kappa, g)
    }

    pub fn tabulated(samples: GriddedMatrixFn) -> Self {
        Self::Tabulated(samples)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Exponential { kappa, .. } => kappa.rows(),
            Self::Tabulated(g) => g.dim(),
        }
    }

    fn has_channel(&self, i: usize, j: usize) -> bool {
        match self {
            Self::Exponential { kappa, .. } => kappa[(i, j)] != 0.0,
            Self::Tabulated(g) => g.entry(i, j).iter().any(|&x| x != 0.0),
        }
    }

    /// `q_ij(t)`.
    pub fn density(&self, i: usize, j: usize, t: f64) -> f64 {
        match self {
            Self::Exponential { kappa, gamma } => {
                let k = kappa[(i, j)];
                if k == 0.0 {
                    0.0
                } else {
                    k * exp(-gamma[(i, j)] * t)
                }
            }
            Self::Tabulated(g) => interpolate(g.grid(), g.entry(i, j), t),
        }
    }

    /// Waiting-time density `f_j(t) = Σ_i q_ij(t)`.
    pub fn waiting_density(&self, j: usize, t: f64) -> f64 {
        (0..self.dim()).map(|i| self.density(i, j, t)).sum()
    }

    /// `∫₀^∞ f_j`, the probability that the process ever leaves `j`.
    pub fn column_mass(&self, j: usize) -> f64 {
        match self {
            Self::Exponential { kappa, gamma } => (0..kappa.rows())
                .filter(|&i| kappa[(i, j)] != 0.0)
                .map(|i| kappa[(i, j)] / gamma[(i, j)])
                .sum(),
            Self::Tabulated(g) => {
                let f = tabulated_column(g, j);
                cumulative_trapezoid(&f, g.grid().step()).last().copied().unwrap_or(0.0)
            }
        }
    }

    /// Exact survival `g_j(t) = 1 − ∫₀ᵗ f_j`, with piecewise-linear
    /// densities integrated exactly for tabulated kernels.
    pub fn survival(&self, j: usize, t: f64) -> f64 {
        match self {
            Self::Exponential { kappa, gamma } => {
                1.0 - (0..kappa.rows())
                    .filter(|&i| kappa[(i, j)] != 0.0)
                    .map(|i| {
                        let g = gamma[(i, j)];
                        kappa[(i, j)] * (1.0 - exp(-g * t)) / g
                    })
                    .sum::<f64>()
            }
            Self::Tabulated(g) => {
                let f = tabulated_column(g, j);
                1.0 - integrate_linear(g.grid(), &f, t)
            }
        }
    }

    /// Samples `q_ij(t_n)` for every pair, `out[i * d + j]`.
    fn sample(&self, grid: &TimeGrid) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        match self {
            Self::Exponential { .. } => Ok((0..d * d)
                .map(|e| grid.nodes().map(|t| self.density(e / d, e % d, t)).collect())
                .collect()),
            Self::Tabulated(g) => {
                if g.grid() != grid {
                    return Err(Error::GridMismatch { expected: grid.len(), found: g.grid().len() });
                }
                Ok((0..d * d).map(|e| g.entry(e / d, e % d).to_vec()).collect())
            }
        }
    }
}

fn tabulated_column(g: &GriddedMatrixFn, j: usize) -> Vec<f64> {
    let mut f = vec![0.0; g.grid().len()];
    for i in 0..g.dim() {
        for (a, b) in f.iter_mut().zip(g.entry(i, j)) {
            *a += b;
        }
    }
    f
}

fn interpolate(grid: &TimeGrid, v: &[f64], t: f64) -> f64 {
    if !(t >= 0.0) || t > grid.t_max() {
        return 0.0;
    }
    let x = t / grid.step();
    let n = (x as usize).min(grid.steps() - 1);
    let w = x - n as f64;
    v[n] * (1.0 - w) + v[n + 1] * w
}

fn integrate_linear(grid: &TimeGrid, v: &[f64], t: f64) -> f64 {
    let h = grid.step();
    let t = t.clamp(0.0, grid.t_max());
    let x = t / h;
    let n = (x as usize).min(grid.steps() - 1);
    let whole: f64 = (0..n).map(|m| 0.5 * h * (v[m] + v[m + 1])).sum();
    let s = t - n as f64 * h;
    let slope = (v[n + 1] - v[n]) / h;
    whole + v[n] * s + 0.5 * slope * s * s
}

/// One reason a kernel is not a valid semi-Markov matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeAmplitude { i: usize, j: usize, kappa: f64 },
    NonPositiveDecay { i: usize, j: usize, gamma: f64 },
    NonFinite { i: usize, j: usize },
    NegativeSample { i: usize, j: usize, t: f64, value: f64 },
    NonZeroDiagonal { j: usize },
    ExcessMass { j: usize, mass: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::NegativeAmplitude { i, j, kappa } => write!(f, "kappa[{i}][{j}] = {kappa} < 0"),
            Self::NonPositiveDecay { i, j, gamma } => write!(f, "gamma[{i}][{j}] = {gamma} <= 0"),
            Self::NonFinite { i, j } => write!(f, "entry ({i}, {j}) is not finite"),
            Self::NegativeSample { i, j, t, value } => {
                write!(f, "q[{i}][{j}]({t}) = {value:e} < 0")
            }
            Self::NonZeroDiagonal { j } => write!(f, "diagonal entry q[{j}][{j}] is not zero"),
            Self::ExcessMass { j, mass } => write!(f, "column {j} has jump mass {mass} > 1"),
        }
    }
}

/// Outcome of [`validate_jump_kernel`]; empty means accepted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
    /// `∫₀^∞ f_j` per column.
    pub column_masses: Vec<f64>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidJumpKernel(self))
        }
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (n, v) in self.violations.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_jump_kernel(q: &JumpKernel) -> ValidityReport {
    let d = q.dim();
    let mut violations = Vec::new();
    match q {
        JumpKernel::Exponential { kappa, gamma } => {
            for i in 0..d {
                for j in 0..d {
                    let (k, g) = (kappa[(i, j)], gamma[(i, j)]);
                    if !k.is_finite() || (k != 0.0 && !g.is_finite()) {
                        violations.push(Violation::NonFinite { i, j });
                    } else if i == j && k != 0.0 {
                        violations.push(Violation::NonZeroDiagonal { j });
                    } else if k < 0.0 {
                        violations.push(Violation::NegativeAmplitude { i, j, kappa: k });
                    } else if k > 0.0 && !(g > 0.0) {
                        violations.push(Violation::NonPositiveDecay { i, j, gamma: g });
                    }
                }
            }
        }
        JumpKernel::Tabulated(g) => {
            let grid = g.grid();
            for i in 0..d {
                for j in 0..d {
                    let e = g.entry(i, j);
                    if i == j && e.iter().any(|&x| x != 0.0) {
                        violations.push(Violation::NonZeroDiagonal { j });
                        continue;
                    }
                    if let Some((n, &value)) = e.iter().enumerate().find(|(_, &x)| x < 0.0) {
                        violations.push(Violation::NegativeSample { i, j, t: grid.node(n), value });
                    }
                }
            }
        }
    }
    let column_masses: Vec<f64> = (0..d).map(|j| q.column_mass(j)).collect();
    if violations.is_empty() {
        for (j, &mass) in column_masses.iter().enumerate() {
            if !(mass <= 1.0 + MASS_TOLERANCE) {
                violations.push(Violation::ExcessMass { j, mass });
            }
        }
    }
    ValidityReport { violations, column_masses }
}

/// Gridded `f_j` and `g_j`, indexed `[j][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingFunctions {
    pub grid: TimeGrid,
    pub waiting: Vec<Vec<f64>>,
    pub survival: Vec<Vec<f64>>,
}

/// `f_j` on the grid and `g_j = 1 − ∫₀ᵗ f_j` by the cumulative trapezoid
/// rule, the same quadrature the series convolutions use, which keeps the
/// columns of `T` summing to one to rounding accuracy.
pub fn survival_and_waiting(q: &JumpKernel, grid: &TimeGrid) -> Result<WaitingFunctions> {
    validate_jump_kernel(q).into_result()?;
    let d = q.dim();
    let samples = q.sample(grid)?;
    let h = grid.step();
    let mut waiting = Vec::with_capacity(d);
    let mut survival = Vec::with_capacity(d);
    for j in 0..d {
        let mut f = vec![0.0; grid.len()];
        for i in 0..d {
            for (a, b) in f.iter_mut().zip(&samples[i * d + j]) {
                *a += b;
            }
        }
        let g = cumulative_trapezoid(&f, h).into_iter().map(|c| (1.0 - c).clamp(0.0, 1.0)).collect();
        waiting.push(f);
        survival.push(g);
    }
    Ok(WaitingFunctions { grid: *grid, waiting, survival })
}

/// `T(t_n)` as the sum `n + n∗q + n∗q∗q + …` with `n = diag(g)`, stopping
/// once the newest term drops below `tol` in sup-norm.
pub fn build_t_series(q: &JumpKernel, grid: &TimeGrid, tol: f64) -> Result<Vec<RMatrix>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter { name: "tol", reason: "must be positive".into() });
    }
    let wf = survival_and_waiting(q, grid)?;
    let d = q.dim();
    let h = grid.step();
    let len = grid.len();
    let samples = q.sample(grid)?;
    let channels: Vec<Option<ReversedKernel>> = (0..d * d)
        .map(|e| {
            let (i, j) = (e / d, e % d);
            (i != j && q.has_channel(i, j)).then(|| ReversedKernel::new(&samples[e]))
        })
        .collect();

    let mut term: Vec<Option<Vec<f64>>> =
        (0..d * d).map(|e| (e / d == e % d).then(|| wf.survival[e % d].clone())).collect();
    let mut total: Vec<Vec<f64>> =
        term.iter().map(|t| t.clone().unwrap_or_else(|| vec![0.0; len])).collect();

    let mut terms = 1;
    loop {
        let mut next: Vec<Option<Vec<f64>>> = vec![None; d * d];
        let mut residual = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut acc: Option<Vec<f64>> = None;
                for k in 0..d {
                    let (Some(tik), Some(qkj)) = (&term[i * d + k], &channels[k * d + j]) else {
                        continue;
                    };
                    let c = qkj.convolve(tik, h);
                    match &mut acc {
                        None => acc = Some(c),
                        Some(a) => a.iter_mut().zip(&c).for_each(|(x, y)| *x += y),
                    }
                }
                if let Some(a) = &acc {
                    residual = a.iter().fold(residual, |r, x| r.max(abs(*x)));
                    total[i * d + j].iter_mut().zip(a).for_each(|(x, y)| *x += y);
                }
                next[i * d + j] = acc;
            }
        }
        terms += 1;
        if residual < tol {
            break;
        }
        if terms >= MAX_SERIES_TERMS {
            return Err(Error::SeriesNotConverged { terms, residual });
        }
        term = next;
    }

    Ok((0..len).map(|n| RMatrix::from_fn(d, d, |i, j| total[i * d + j][n])).collect())
}

/// Convolution rate kernel `W_ij(t) = W⁰_ij δ(t) + W^reg_ij(t)` for `i ≠ j`.
/// Diagonal entries are forced to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RateKernel {
    rates: MatrixKernel,
}

impl RateKernel {
    pub fn new(delta: RMatrix, regular: RegularPart) -> Result<Self> {
        let rates = MatrixKernel::new(delta, regular)?.map_matrices(zero_diagonal)?;
        let d = rates.dim();
        for i in 0..d {
            for j in 0..d {
                let w = rates.delta()[(i, j)];
                if w < 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "delta rates",
                        reason: alloc::format!("W0[{i}][{j}] = {w} is negative"),
                    });
                }
            }
        }
        Ok(Self { rates })
    }

    /// Purely instantaneous kernel, i.e. constant Markov rates.
    pub fn markov(rates: RMatrix) -> Result<Self> {
        Self::new(rates, RegularPart::Zero)
    }

    pub fn zero(dim: usize) -> Self {
        Self { rates: MatrixKernel::zero(dim) }
    }

    pub fn dim(&self) -> usize {
        self.rates.dim()
    }

    pub fn delta(&self) -> &RMatrix {
        self.rates.delta()
    }

    pub fn regular(&self) -> &RegularPart {
        self.rates.regular()
    }

    pub fn as_matrix_kernel(&self) -> &MatrixKernel {
        &self.rates
    }

    /// Delta weights of the escape rates `w_k = Σ_{i≠k} W_ik`.
    pub fn escape_delta(&self) -> Vec<f64> {
        column_sums(self.rates.delta())
    }

    /// Kernel of the population master equation, `W − diag(w)`.
    pub fn master_kernel(&self) -> Result<MatrixKernel> {
        self.rates.map_matrices(|m| {
            let mut out = m.clone();
            for (k, s) in column_sums(m).into_iter().enumerate() {
                out[(k, k)] = -s;
            }
            out
        })
    }

    /// Scalar kernel `−½(w_k + w_l)` driving the coherence factor `λ_kl`.
    pub fn coherence_kernel(&self, k: usize, l: usize) -> Result<MatrixKernel> {
        self.rates.map_matrices(|m| {
            let w = column_sums(m);
            RMatrix::from_fn(1, 1, |_, _| -0.5 * (w[k] + w[l]))
        })
    }
}

fn zero_diagonal(m: &RMatrix) -> RMatrix {
    let mut out = m.clone();
    for k in 0..m.rows().min(m.cols()) {
        out[(k, k)] = 0.0;
    }
    out
}

fn column_sums(m: &RMatrix) -> Vec<f64> {
    (0..m.cols()).map(|j| (0..m.rows()).filter(|&i| i != j).map(|i| m[(i, j)]).sum()).collect()
}

/// Rate kernel with `W̃_ij(s) = q̃_ij(s) / g̃_j(s)`.
///
/// For exponential columns sharing a decay rate `γ` and total amplitude
/// `κ_j` this is `W_ij(t) = κ_ij δ(t) − κ_ij (γ − κ_j) e^{-(γ−κ_j)t}`.
/// For tabulated kernels the resolvent `R = q + R ∗ f_j` is solved on the
/// kernel grid and `W = R(0) δ + R'`.
pub fn rates_from_jump_kernel(q: &JumpKernel) -> Result<RateKernel> {
    validate_jump_kernel(q).into_result()?;
    match q {
        JumpKernel::Exponential { kappa, gamma } => exponential_rates(kappa, gamma),
        JumpKernel::Tabulated(g) => tabulated_rates(g),
    }
}

fn exponential_rates(kappa: &RMatrix, gamma: &RMatrix) -> Result<RateKernel> {
    let d = kappa.rows();
    let mut delta = RMatrix::zeros(d, d);
    let mut terms: Vec<ExpTerm> = Vec::new();
    for j in 0..d {
        let rows: Vec<usize> = (0..d).filter(|&i| i != j && kappa[(i, j)] != 0.0).collect();
        let Some(&first) = rows.first() else { continue };
        let g = gamma[(first, j)];
        if rows.iter().any(|&i| gamma[(i, j)] != g) {
            return Err(Error::Unsupported(
                "closed-form rates need one decay rate per column; tabulate the kernel instead",
            ));
        }
        let total: f64 = rows.iter().map(|&i| kappa[(i, j)]).sum();
        let rate = g - total;
        for &i in &rows {
            delta[(i, j)] = kappa[(i, j)];
        }
        if rate <= 0.0 {
            continue;
        }
        let pos = match terms.iter().position(|t| t.rate == rate) {
            Some(p) => p,
            None => {
                terms.push(ExpTerm { rate, weights: RMatrix::zeros(d, d) });
                terms.len() - 1
            }
        };
        for &i in &rows {
            terms[pos].weights[(i, j)] = -kappa[(i, j)] * rate;
        }
    }
    let regular = if terms.is_empty() { RegularPart::Zero } else { RegularPart::ExpSum(terms) };
    RateKernel::new(delta, regular)
}

fn tabulated_rates(q: &GriddedMatrixFn) -> Result<RateKernel> {
    let grid = *q.grid();
    let d = q.dim();
    let h = grid.step();
    let len = grid.len();
    let mut delta = RMatrix::zeros(d, d);
    let mut entries = vec![vec![0.0; len]; d * d];
    for j in 0..d {
        let f = tabulated_column(q, j);
        let mass = cumulative_trapezoid(&f, h).last().copied().unwrap_or(0.0);
        if mass <= 0.0 {
            continue;
        }
        let peak = f.iter().copied().fold(0.0, f64::max);
        let max_step = mass / (20.0 * peak);
        if h > max_step {
            return Err(Error::GridTooCoarse { step: h, max_step });
        }
        let pivot = 1.0 - 0.5 * h * f[0];
        if pivot < 0.5 {
            return Err(Error::IllConditioned {
                column: j,
                reason: alloc::format!("trapezoid pivot {pivot} below 0.5"),
            });
        }
        let rev = ReversedKernel::new(&f);
        for i in (0..d).filter(|&i| i != j) {
            let qij = q.entry(i, j);
            if qij.iter().all(|&x| x == 0.0) {
                continue;
            }
            let mut r = Vec::with_capacity(len);
            r.push(qij[0]);
            for n in 1..len {
                let memory = rev.partial_sum(n, &r, 0, n - 1) - 0.5 * f[n] * r[0];
                let value = (qij[n] + h * memory) / pivot;
                if !(abs(value) <= 1e12) {
                    return Err(Error::IllConditioned {
                        column: j,
                        reason: resolvent_blowup(grid.node(n)),
                    });
                }
                r.push(value);
            }
            delta[(i, j)] = r[0];
            entries[i * d + j] = derivative(&r, h);
        }
    }
    RateKernel::new(delta, RegularPart::Gridded(GriddedMatrixFn::new(grid, d, entries)?))
}

fn resolvent_blowup(t: f64) -> String {
    alloc::format!("resolvent exceeds 1e12 at t = {t}")
}

/// Second-order finite-difference derivative, one-sided at the ends.
fn derivative(r: &[f64], h: f64) -> Vec<f64> {
    let n = r.len();
    if n < 3 {
        let s = if n == 2 { (r[1] - r[0]) / h } else { 0.0 };
        return vec![s; n];
    }
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * h);
    for k in 1..n - 1 {
        out[k] = (r[k + 1] - r[k - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * r[n - 1] - 4.0 * r[n - 2] + r[n - 3]) / (2.0 * h);
    out
}
