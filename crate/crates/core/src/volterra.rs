//! Convolution Volterra integro-differential systems
//!
//! ```text
//! ẋ(t) = L₀ x(t) + K⁰ x(t) + ∫₀ᵗ K(t − τ) x(τ) dτ
//! ```
//!
//! with two independent solvers: a trapezoidal convolution-quadrature
//! predictor-corrector for arbitrary sampled kernels, and an exact linear
//! embedding for exponential-sum kernels integrated with classical RK4.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{exp, sqrt};
use crate::numkit::{RMatrix, ReversedKernel, TimeGrid};
use crate::{Error, Result};

/// Growth factor of the state norm (relative to the initial norm) beyond
/// which a solve is declared unstable.
const MAX_GROWTH: f64 = 1e12;

/// One term `weights · e^{-rate · t}` of an exponential-sum kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub rate: f64,
    pub weights: RMatrix,
}

/// Matrix-valued function sampled on a grid, stored entry by entry.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedMatrixFn {
    grid: TimeGrid,
    dim: usize,
    entries: Vec<Vec<f64>>,
}

impl GriddedMatrixFn {
    /// `entries[i * dim + j]` holds the samples of entry `(i, j)`.
    pub fn new(grid: TimeGrid, dim: usize, entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        for e in &entries {
            grid.check_len(e.len())?;
            if e.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "kernel samples",
                    reason: "samples must be finite".into(),
                });
            }
        }
        Ok(Self { grid, dim, entries })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i * self.dim + j]
    }

    pub fn at_node(&self, n: usize) -> RMatrix {
        RMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j)[n])
    }
}

/// Regular (non-instantaneous) part of a convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum RegularPart {
    Zero,
    ExpSum(Vec<ExpTerm>),
    Gridded(GriddedMatrixFn),
}

/// `K(t) = delta · δ(t) + regular(t)`, square matrix valued.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixKernel {
    delta: RMatrix,
    regular: RegularPart,
}

impl MatrixKernel {
    pub fn new(delta: RMatrix, regular: RegularPart) -> Result<Self> {
        if !delta.is_square() {
            return Err(Error::DimensionMismatch { expected: delta.rows(), found: delta.cols() });
        }
        let dim = delta.rows();
        if delta.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta part",
                reason: "entries must be finite".into(),
            });
        }
        match &regular {
            RegularPart::Zero => {}
            RegularPart::ExpSum(terms) => {
                for term in terms {
                    if !(term.rate.is_finite() && term.rate > 0.0) {
                        return Err(Error::InvalidParameter {
                            name: "exponential rate",
                            reason: alloc::format!("rates must be positive, got {}", term.rate),
                        });
                    }
                    if term.weights.rows() != dim || term.weights.cols() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: term.weights.rows(),
                        });
                    }
                    if term.weights.as_slice().iter().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidParameter {
                            name: "exponential weights",
                            reason: "entries must be finite".into(),
                        });
                    }
                }
            }
            RegularPart::Gridded(g) => {
                if g.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: g.dim() });
                }
            }
        }
        Ok(Self { delta, regular })
    }

    pub fn zero(dim: usize) -> Self {
        Self { delta: RMatrix::zeros(dim, dim), regular: RegularPart::Zero }
    }

    pub fn dim(&self) -> usize {
        self.delta.rows()
    }

    pub fn delta(&self) -> &RMatrix {
        &self.delta
    }

    pub fn regular(&self) -> &RegularPart {
        &self.regular
    }

    /// Applies `f` to the delta part and to every regular component
    /// (exponential weights or gridded samples at each node).
    pub fn map_matrices(&self, mut f: impl FnMut(&RMatrix) -> RMatrix) -> Result<Self> {
        let delta = f(&self.delta);
        let regular = match &self.regular {
            RegularPart::Zero => RegularPart::Zero,
            RegularPart::ExpSum(terms) => RegularPart::ExpSum(
                terms.iter().map(|t| ExpTerm { rate: t.rate, weights: f(&t.weights) }).collect(),
            ),
            RegularPart::Gridded(g) => {
                let mapped: Vec<RMatrix> = (0..g.grid.len()).map(|n| f(&g.at_node(n))).collect();
                let dim = mapped.first().map_or(0, RMatrix::rows);
                let entries = (0..dim * dim)
                    .map(|e| mapped.iter().map(|m| m[(e / dim, e % dim)]).collect())
                    .collect();
                RegularPart::Gridded(GriddedMatrixFn::new(g.grid, dim, entries)?)
            }
        };
        Self::new(delta, regular)
    }

    /// Regular-part samples on `grid`, `out[i * dim + j][n]`.
    pub fn sample_regular(&self, grid: &TimeGrid) -> Result<Vec<Vec<f64>>> {
        let dim = self.dim();
        match &self.regular {
            RegularPart::Zero => Ok(vec![vec![0.0; grid.len()]; dim * dim]),
            RegularPart::ExpSum(terms) => {
                let mut out = vec![vec![0.0; grid.len()]; dim * dim];
                for term in terms {
                    let decay: Vec<f64> = grid.nodes().map(|t| exp(-term.rate * t)).collect();
                    for e in 0..dim * dim {
                        let w = term.weights.as_slice()[e];
                        if w != 0.0 {
                            for (o, d) in out[e].iter_mut().zip(&decay) {
                                *o += w * d;
                            }
                        }
                    }
                }
                Ok(out)
            }
            RegularPart::Gridded(g) => {
                if g.grid != *grid {
                    return Err(Error::GridMismatch { expected: grid.len(), found: g.grid.len() });
                }
                Ok(g.entries.clone())
            }
        }
    }
}

/// `ẋ = L₀x + ∫₀ᵗ K(t−τ)x(τ)dτ` with `x(0)` given.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraProblem {
    constant: RMatrix,
    kernel: MatrixKernel,
    initial: Vec<f64>,
}

impl VolterraProblem {
    pub fn new(constant: RMatrix, kernel: MatrixKernel, initial: Vec<f64>) -> Result<Self> {
        let m = kernel.dim();
        if constant.rows() != m || constant.cols() != m {
            return Err(Error::DimensionMismatch { expected: m, found: constant.rows() });
        }
        if initial.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: initial.len() });
        }
        Ok(Self { constant, kernel, initial })
    }

    /// Pure memory-kernel problem (`L₀ = 0`).
    pub fn memory_only(kernel: MatrixKernel, initial: Vec<f64>) -> Result<Self> {
        let m = kernel.dim();
        Self::new(RMatrix::zeros(m, m), kernel, initial)
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn kernel(&self) -> &MatrixKernel {
        &self.kernel
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// `L₀ + K⁰`.
    fn local_generator(&self) -> RMatrix {
        &self.constant + self.kernel.delta()
    }
}

/// Sampled solution `states[n][i] = x_i(t_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[i]).collect()
    }
}

/// Which solver to use for a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Exponential embedding when the kernel allows it, quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
    Embedding,
}

pub fn solve(p: &VolterraProblem, grid: &TimeGrid, backend: Backend) -> Result<Trajectory> {
    match resolve_backend(p.kernel(), backend) {
        Backend::Embedding => solve_expsum_embedding(p, grid),
        _ => solve_quadrature(p, grid),
    }
}

pub(crate) fn resolve_backend(kernel: &MatrixKernel, backend: Backend) -> Backend {
    match backend {
        Backend::Auto => match kernel.regular() {
            RegularPart::Gridded(_) => Backend::Quadrature,
            _ => Backend::Embedding,
        },
        b => b,
    }
}

/// Second-order solve: trapezoidal convolution quadrature for the memory
/// term, explicit-Euler predictor and a single trapezoidal corrector.
pub fn solve_quadrature(p: &VolterraProblem, grid: &TimeGrid) -> Result<Trajectory> {
    QuadratureSolver::new(p.local_generator(), p.kernel(), grid)?.solve(&p.initial)
}

pub(crate) struct QuadratureSolver {
    grid: TimeGrid,
    local: RMatrix,
    kernel: Vec<ReversedKernel>,
    dim: usize,
}

impl QuadratureSolver {
    pub(crate) fn new(local: RMatrix, kernel: &MatrixKernel, grid: &TimeGrid) -> Result<Self> {
        let samples = kernel.sample_regular(grid)?;
        Ok(Self {
            grid: *grid,
            local,
            kernel: samples.iter().map(|s| ReversedKernel::new(s)).collect(),
            dim: kernel.dim(),
        })
    }

    pub(crate) fn solve(&self, x0: &[f64]) -> Result<Trajectory> {
        let m = self.dim;
        let h = self.grid.step();
        let len = self.grid.len();
        // history per component, contiguous for the convolution dots
        let mut hist: Vec<Vec<f64>> = (0..m).map(|i| {
            let mut v = Vec::with_capacity(len);
            v.push(x0[i]);
            v
        }).collect();
        let scale = norm(x0).max(f64::MIN_POSITIVE);
        let k0 = RMatrix::from_fn(m, m, |i, k| self.kernel[i * m + k].at(0));

        let rhs = |x: &[f64], memory: &[f64]| -> Vec<f64> {
            let local = self.local.matvec(x);
            let endpoint = k0.matvec(x);
            (0..m).map(|i| local[i] + h * (memory[i] + 0.5 * endpoint[i])).collect()
        };

        let mut x = x0.to_vec();
        let mut f = self.local.matvec(&x);
        for n in 0..len - 1 {
            // ½K_{n+1}x_0 + Σ_{j=1}^{n} K_{n+1-j} x_j
            let memory: Vec<f64> = (0..m)
                .map(|i| {
                    (0..m)
                        .filter(|&k| !self.kernel[i * m + k].is_zero())
                        .map(|k| {
                            let kr = &self.kernel[i * m + k];
                            0.5 * kr.at(n + 1) * hist[k][0] + kr.partial_sum(n + 1, &hist[k], 1, n)
                        })
                        .sum()
                })
                .collect();
            let predicted: Vec<f64> = (0..m).map(|i| x[i] + h * f[i]).collect();
            let f_pred = rhs(&predicted, &memory);
            let next: Vec<f64> = (0..m).map(|i| x[i] + 0.5 * h * (f[i] + f_pred[i])).collect();
            let growth = norm(&next) / scale;
            if !(growth <= MAX_GROWTH) {
                return Err(Error::SolverUnstable { step: n + 1, growth });
            }
            f = rhs(&next, &memory);
            for (hk, &v) in hist.iter_mut().zip(&next) {
                hk.push(v);
            }
            x = next;
        }
        let states = (0..len).map(|n| hist.iter().map(|c| c[n]).collect()).collect();
        Ok(Trajectory { grid: self.grid, states })
    }
}

/// Fourth-order solve of an exponential-sum problem through the auxiliary
/// variables `y_r(t) = ∫₀ᵗ e^{-γ_r(t-τ)} x(τ) dτ`, which obey
/// `ẏ_r = -γ_r y_r + x`. The enlarged system is linear with constant
/// coefficients, so one RK4 step is the fixed propagator
/// `Σ_{k≤4} (hM)^k / k!`.
pub fn solve_expsum_embedding(p: &VolterraProblem, grid: &TimeGrid) -> Result<Trajectory> {
    EmbeddingSolver::new(p.local_generator(), p.kernel(), grid)?.solve(&p.initial)
}

pub(crate) struct EmbeddingSolver {
    grid: TimeGrid,
    dim: usize,
    propagator: RMatrix,
}

impl EmbeddingSolver {
    pub(crate) fn new(local: RMatrix, kernel: &MatrixKernel, grid: &TimeGrid) -> Result<Self> {
        let terms: &[ExpTerm] = match kernel.regular() {
            RegularPart::Zero => &[],
            RegularPart::ExpSum(terms) => terms,
            RegularPart::Gridded(_) => {
                return Err(Error::Unsupported("embedding solver needs an exponential-sum kernel"))
            }
        };
        let m = kernel.dim();
        let size = m * (1 + terms.len());
        let mut big = RMatrix::zeros(size, size);
        for i in 0..m {
            for k in 0..m {
                big[(i, k)] = local[(i, k)];
            }
        }
        for (r, term) in terms.iter().enumerate() {
            let off = m * (r + 1);
            for i in 0..m {
                for k in 0..m {
                    big[(i, off + k)] = term.weights[(i, k)];
                }
                big[(off + i, off + i)] = -term.rate;
                big[(off + i, i)] = 1.0;
            }
        }
        let hm = big.scale(grid.step());
        let mut propagator = RMatrix::identity(size);
        let mut power = RMatrix::identity(size);
        for k in 1..=4 {
            power = power.matmul(&hm).scale(1.0 / k as f64);
            propagator = &propagator + &power;
        }
        Ok(Self { grid: *grid, dim: m, propagator })
    }

    pub(crate) fn solve(&self, x0: &[f64]) -> Result<Trajectory> {
        let m = self.dim;
        let size = self.propagator.rows();
        let mut z = vec![0.0; size];
        z[..m].copy_from_slice(x0);
        let scale = norm(x0).max(f64::MIN_POSITIVE);
        let mut states = Vec::with_capacity(self.grid.len());
        states.push(x0.to_vec());
        for n in 1..self.grid.len() {
            z = self.propagator.matvec(&z);
            let growth = norm(&z[..m]) / scale;
            if !(growth <= MAX_GROWTH) {
                return Err(Error::SolverUnstable { step: n, growth });
            }
            states.push(z[..m].to_vec());
        }
        Ok(Trajectory { grid: self.grid, states })
    }
}

fn norm(x: &[f64]) -> f64 {
    sqrt(x.iter().map(|v| v * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{abs, cos, sin};
    use crate::numkit::semigroup_exp;

    /// `ẋ = -∫ e^{-(t-τ)} x`, `x(0) = 1`; Laplace transform
    /// `(s + 1) / (s² + s + 1)`.
    fn scalar_problem() -> VolterraProblem {
        let kernel = MatrixKernel::new(
            RMatrix::zeros(1, 1),
            RegularPart::ExpSum(vec![ExpTerm { rate: 1.0, weights: RMatrix::identity(1).scale(-1.0) }]),
        )
        .unwrap();
        VolterraProblem::memory_only(kernel, vec![1.0]).unwrap()
    }

    fn scalar_exact(t: f64) -> f64 {
        let w = sqrt(3.0) / 2.0;
        exp(-t / 2.0) * (cos(w * t) + sin(w * t) / sqrt(3.0))
    }

    fn sup_error(traj: &Trajectory, exact: impl Fn(f64) -> f64) -> f64 {
        traj.grid
            .nodes()
            .zip(&traj.states)
            .map(|(t, x)| abs(x[0] - exact(t)))
            .fold(0.0, f64::max)
    }

    #[test]
    fn trivial_problem_is_constant() {
        let p = VolterraProblem::memory_only(MatrixKernel::zero(2), vec![0.3, 0.7]).unwrap();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        for traj in [solve_quadrature(&p, &grid).unwrap(), solve_expsum_embedding(&p, &grid).unwrap()] {
            assert!(traj.states.iter().all(|x| x == &[0.3, 0.7]));
        }
    }

    #[test]
    fn quadrature_matches_laplace_oracle() {
        let grid = TimeGrid::new(5.0, 5000).unwrap();
        let traj = solve_quadrature(&scalar_problem(), &grid).unwrap();
        assert_eq!(traj.states[0], [1.0]);
        assert!(sup_error(&traj, scalar_exact) < 1e-6);
    }

    #[test]
    fn embedding_matches_laplace_oracle() {
        let grid = TimeGrid::new(5.0, 5000).unwrap();
        let traj = solve_expsum_embedding(&scalar_problem(), &grid).unwrap();
        assert!(sup_error(&traj, scalar_exact) < 1e-9);
    }

    #[test]
    fn delta_only_kernel_is_a_semigroup() {
        let l = RMatrix::from_rows(&[vec![-2.0, 0.5], vec![2.0, -0.5]]).unwrap();
        let kernel = MatrixKernel::new(l.clone(), RegularPart::Zero).unwrap();
        let grid = TimeGrid::new(3.0, 3000).unwrap();
        let exact = semigroup_exp(&l, &grid).unwrap();
        for j in 0..2 {
            let mut x0 = vec![0.0; 2];
            x0[j] = 1.0;
            let p = VolterraProblem::memory_only(kernel.clone(), x0).unwrap();
            let traj = solve_expsum_embedding(&p, &grid).unwrap();
            for (x, e) in traj.states.iter().zip(&exact) {
                for i in 0..2 {
                    assert!(abs(x[i] - e[(i, j)]) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn two_exponential_kernel_cross_solver() {
        let kernel = MatrixKernel::new(
            RMatrix::zeros(1, 1),
            RegularPart::ExpSum(vec![
                ExpTerm { rate: 2.0, weights: RMatrix::identity(1).scale(-1.5) },
                ExpTerm { rate: 0.5, weights: RMatrix::identity(1).scale(-0.4) },
            ]),
        )
        .unwrap();
        let p = VolterraProblem::memory_only(kernel, vec![1.0]).unwrap();
        let grid = TimeGrid::new(5.0, 5000).unwrap();
        let a = solve_quadrature(&p, &grid).unwrap();
        let b = solve_expsum_embedding(&p, &grid).unwrap();
        let sup = a.states.iter().zip(&b.states).map(|(x, y)| abs(x[0] - y[0])).fold(0.0, f64::max);
        assert!(sup <= 1e-5, "sup discrepancy {sup:e}");
    }

    #[test]
    fn richardson_order_two() {
        let p = scalar_problem();
        let err = |steps: usize| {
            let grid = TimeGrid::new(2.0, steps).unwrap();
            let q = solve_quadrature(&p, &grid).unwrap();
            let e = solve_expsum_embedding(&p, &grid).unwrap();
            q.states.iter().zip(&e.states).map(|(x, y)| abs(x[0] - y[0])).fold(0.0, f64::max)
        };
        let e1 = err(200);
        let e2 = err(400);
        let order = libm::log2(e1 / e2);
        assert!((order - 2.0).abs() < 0.3, "measured order {order}");
    }

    #[test]
    fn gridded_kernel_needs_matching_grid() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let other = TimeGrid::new(1.0, 20).unwrap();
        let g = GriddedMatrixFn::new(grid, 1, vec![vec![0.0; 11]]).unwrap();
        let kernel = MatrixKernel::new(RMatrix::zeros(1, 1), RegularPart::Gridded(g)).unwrap();
        let p = VolterraProblem::memory_only(kernel, vec![1.0]).unwrap();
        assert!(solve_quadrature(&p, &grid).is_ok());
        assert!(matches!(solve_quadrature(&p, &other), Err(Error::GridMismatch { .. })));
        assert!(matches!(solve_expsum_embedding(&p, &grid), Err(Error::Unsupported(_))));
    }

    #[test]
    fn blow_up_is_reported() {
        let kernel = MatrixKernel::new(RMatrix::identity(1).scale(50.0), RegularPart::Zero).unwrap();
        let p = VolterraProblem::memory_only(kernel, vec![1.0]).unwrap();
        let grid = TimeGrid::new(2.0, 200).unwrap();
        assert!(matches!(solve_quadrature(&p, &grid), Err(Error::SolverUnstable { .. })));
    }

    #[test]
    fn rejects_non_positive_rates() {
        let bad = MatrixKernel::new(
            RMatrix::zeros(1, 1),
            RegularPart::ExpSum(vec![ExpTerm { rate: 0.0, weights: RMatrix::identity(1) }]),
        );
        assert!(bad.is_err());
    }
}
