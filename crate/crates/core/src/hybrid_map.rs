//! The hybrid dynamical map `Λ_t = U_t ∘ Φ^diss_t ∘ Φ^dec_t`.
//!
//! In the energy eigenbasis all three factors act element-wise on a density
//! matrix: populations are mixed by the stochastic matrix `T(t)`, and each
//! coherence `ρ_kl` is multiplied by a Hamiltonian phase `e^{-iω_kl t}`, a
//! dissipative factor `λ_kl(t)` and a decoherence factor `μ_kl(t)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::math::{abs, exp};
use crate::numkit::{hermitian_min_eig, CMatrix, HermitianMatrix, RMatrix, TimeGrid};
use crate::semi_markov::{
    build_t_series, rates_from_jump_kernel, validate_jump_kernel, JumpKernel, RateKernel,
    DEFAULT_SERIES_TOL,
};
use crate::volterra::{solve, Backend, VolterraProblem};
use crate::{Error, Result};

/// Tolerance used for density-matrix checks.
pub const STATE_TOL: f64 = 1e-10;

/// Allowed gap between the Choi-matrix minimal eigenvalue and the witness.
pub const CHOI_AGREEMENT_TOL: f64 = 1e-8;

/// How populations relax.
#[derive(Debug, Clone, PartialEq)]
pub enum Dissipation {
    /// Master equation with convolution rates `W_kl(t)`.
    Rates(RateKernel),
    /// Semi-Markov process; `T` from the renewal series, `λ` from the
    /// equivalent rate kernel.
    SemiMarkov(JumpKernel),
}

impl Dissipation {
    pub fn dim(&self) -> usize {
        match self {
            Self::Rates(w) => w.dim(),
            Self::SemiMarkov(q) => q.dim(),
        }
    }
}

/// Markovian pure decoherence.
#[derive(Debug, Clone, PartialEq)]
pub enum DecoherenceModel {
    /// `L^dec ρ = Σ_kl D_kl (P_k ρ P_l − ½{P_l P_k, ρ})` with `D ≥ 0`.
    Gkls(HermitianMatrix),
    /// White-noise energy fluctuations with per-level strengths `γ_k`.
    Noise(Vec<f64>),
    /// Pairwise dephasing rates `Γ_kl = Γ_lk`; the diagonal is ignored.
    Direct(RMatrix),
}

impl DecoherenceModel {
    pub fn none(dim: usize) -> Self {
        Self::Direct(RMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gkls(d) => d.dim(),
            Self::Noise(g) => g.len(),
            Self::Direct(g) => g.rows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        match self {
            Self::Gkls(d) => {
                if d.matrix().as_slice().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                    return bad("D", "entries must be finite");
                }
                let min_eig = hermitian_min_eig(d);
                if min_eig < -STATE_TOL {
                    return Err(Error::NotPositiveSemidefinite { min_eig });
                }
            }
            Self::Noise(g) => {
                if g.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                    return bad("noise rates", "must be finite and nonnegative");
                }
            }
            Self::Direct(g) => {
                if !g.is_square() {
                    return Err(Error::DimensionMismatch { expected: g.rows(), found: g.cols() });
                }
                for k in 0..g.rows() {
                    for l in 0..g.rows() {
                        if k == l {
                            continue;
                        }
                        if !(g[(k, l)].is_finite() && g[(k, l)] >= 0.0) {
                            return bad("dephasing rates", "must be finite and nonnegative");
                        }
                        if g[(k, l)] != g[(l, k)] {
                            return bad("dephasing rates", "must be symmetric");
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Complex rate `r_kl` with `μ_kl(t) = e^{-r_kl t}`.
    pub fn pair_rate(&self, k: usize, l: usize) -> Complex64 {
        match self {
            Self::Gkls(d) => {
                let m = d.matrix();
                let dkl = m[(k, l)];
                Complex64::new(0.5 * (m[(k, k)].re + m[(l, l)].re) - dkl.re, -dkl.im)
            }
            Self::Noise(g) => Complex64::new(0.5 * (g[k] + g[l]), 0.0),
            Self::Direct(g) => Complex64::new(g[(k, l)], 0.0),
        }
    }
}

/// Everything needed to build the map.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridGeneratorSpec {
    energies: Vec<f64>,
    dissipation: Dissipation,
    decoherence: DecoherenceModel,
    backend: Backend,
    series_tol: f64,
}

impl HybridGeneratorSpec {
    pub fn new(
        energies: Vec<f64>,
        dissipation: Dissipation,
        decoherence: DecoherenceModel,
    ) -> Result<Self> {
        let d = energies.len();
        if d < 2 {
            return Err(Error::InvalidParameter {
                name: "energies",
                reason: format!("need at least two levels, got {d}"),
            });
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "energies",
                reason: "must be finite".into(),
            });
        }
        if dissipation.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: dissipation.dim() });
        }
        if decoherence.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: decoherence.dim() });
        }
        decoherence.validate()?;
        if let Dissipation::SemiMarkov(q) = &dissipation {
            validate_jump_kernel(q).into_result()?;
        }
        Ok(Self {
            energies,
            dissipation,
            decoherence,
            backend: Backend::Auto,
            series_tol: DEFAULT_SERIES_TOL,
        })
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_series_tol(mut self, tol: f64) -> Self {
        self.series_tol = tol;
        self
    }

    pub fn with_decoherence(mut self, decoherence: DecoherenceModel) -> Result<Self> {
        if decoherence.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: decoherence.dim() });
        }
        decoherence.validate()?;
        self.decoherence = decoherence;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dissipation(&self) -> &Dissipation {
        &self.dissipation
    }

    pub fn decoherence(&self) -> &DecoherenceModel {
        &self.decoherence
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    fn rate_kernel(&self) -> Result<RateKernel> {
        match &self.dissipation {
            Dissipation::Rates(w) => Ok(w.clone()),
            Dissipation::SemiMarkov(q) => rates_from_jump_kernel(q),
        }
    }
}

/// `T(t_n)`, column-stochastic. Entries may be negative in rates mode.
pub fn population_trajectory(spec: &HybridGeneratorSpec, grid: &TimeGrid) -> Result<Vec<RMatrix>> {
    let d = spec.dim();
    match &spec.dissipation {
        Dissipation::SemiMarkov(q) => build_t_series(q, grid, spec.series_tol),
        Dissipation::Rates(w) => {
            let kernel = w.master_kernel()?;
            let mut columns = Vec::with_capacity(d);
            for j in 0..d {
                let mut x0 = vec![0.0; d];
                x0[j] = 1.0;
                let p = VolterraProblem::memory_only(kernel.clone(), x0)?;
                columns.push(solve(&p, grid, spec.backend)?);
            }
            Ok((0..grid.len())
                .map(|n| RMatrix::from_fn(d, d, |i, j| columns[j].states[n][i]))
                .collect())
        }
    }
}

/// `λ_kl(t_n)` as symmetric matrices with unit diagonal.
pub fn coherence_trajectory(spec: &HybridGeneratorSpec, grid: &TimeGrid) -> Result<Vec<RMatrix>> {
    let d = spec.dim();
    let w = spec.rate_kernel()?;
    let mut out = vec![RMatrix::identity(d); grid.len()];
    for k in 0..d {
        for l in k + 1..d {
            let p = VolterraProblem::memory_only(w.coherence_kernel(k, l)?, vec![1.0])?;
            let traj = solve(&p, grid, spec.backend)?;
            for (m, x) in out.iter_mut().zip(&traj.states) {
                m[(k, l)] = x[0];
                m[(l, k)] = x[0];
            }
        }
    }
    Ok(out)
}

/// `μ_kl(t_n)` with unit diagonal and `μ_lk = conj(μ_kl)`.
pub fn decoherence_factors(model: &DecoherenceModel, grid: &TimeGrid) -> Result<Vec<CMatrix>> {
    model.validate()?;
    let d = model.dim();
    Ok(grid
        .nodes()
        .map(|t| {
            hermitian_from_upper(d, |k, l| {
                let r = model.pair_rate(k, l);
                (-r * t).exp()
            })
        })
        .collect())
}

/// Builds a matrix with unit diagonal from its strict upper triangle,
/// mirroring by conjugation.
fn hermitian_from_upper(d: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> CMatrix {
    let mut m = CMatrix::identity(d);
    for k in 0..d {
        for l in k + 1..d {
            let z = f(k, l);
            m[(k, l)] = z;
            m[(l, k)] = z.conj();
        }
    }
    m
}

/// Sampled ingredients of `Λ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapTrajectory {
    pub grid: TimeGrid,
    pub energies: Vec<f64>,
    pub populations: Vec<RMatrix>,
    pub coherences: Vec<RMatrix>,
    pub decoherence: Vec<CMatrix>,
}

impl MapTrajectory {
    pub fn build(spec: &HybridGeneratorSpec, grid: &TimeGrid) -> Result<Self> {
        Ok(Self {
            grid: *grid,
            energies: spec.energies.clone(),
            populations: population_trajectory(spec, grid)?,
            coherences: coherence_trajectory(spec, grid)?,
            decoherence: decoherence_factors(&spec.decoherence, grid)?,
        })
    }

    pub fn from_parts(
        grid: TimeGrid,
        energies: Vec<f64>,
        populations: Vec<RMatrix>,
        coherences: Vec<RMatrix>,
        decoherence: Vec<CMatrix>,
    ) -> Result<Self> {
        let d = energies.len();
        for v in [populations.len(), coherences.len(), decoherence.len()] {
            grid.check_len(v)?;
        }
        let dims_ok = populations.iter().all(|m| m.rows() == d && m.cols() == d)
            && coherences.iter().all(|m| m.rows() == d && m.cols() == d)
            && decoherence.iter().all(|m| m.rows() == d && m.cols() == d);
        if !dims_ok {
            return Err(Error::DimensionMismatch { expected: d, found: 0 });
        }
        Ok(Self { grid, energies, populations, coherences, decoherence })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Copy with every `μ_kl` multiplied by `e^{-γ_z t}`.
    pub fn with_extra_dephasing(&self, gamma_z: f64) -> Self {
        let mut out = self.clone();
        for (n, m) in out.decoherence.iter_mut().enumerate() {
            let f = exp(-gamma_z * self.grid.node(n));
            for k in 0..m.rows() {
                for l in 0..m.cols() {
                    if k != l {
                        m[(k, l)] *= f;
                    }
                }
            }
        }
        out
    }

    /// Copy with the decoherence factors replaced.
    pub fn with_decoherence_factors(&self, decoherence: Vec<CMatrix>) -> Result<Self> {
        Self::from_parts(
            self.grid,
            self.energies.clone(),
            self.populations.clone(),
            self.coherences.clone(),
            decoherence,
        )
    }

    /// `e^{-i(E_k − E_l)t_n}`.
    pub fn phase(&self, k: usize, l: usize, n: usize) -> Complex64 {
        if k > l {
            return self.phase(l, k, n).conj();
        }
        let omega = self.energies[k] - self.energies[l];
        Complex64::from_polar(1.0, -omega * self.grid.node(n))
    }

    /// `λ_kl μ_kl` at node `n`, without the Hamiltonian phase.
    pub fn coherence_factor(&self, k: usize, l: usize, n: usize) -> Complex64 {
        self.decoherence[n][(k, l)] * self.coherences[n][(k, l)]
    }

    /// Unitary factor `U_t`.
    pub fn apply_unitary(&self, rho: &CMatrix, n: usize) -> CMatrix {
        self.elementwise(rho, |k, l| self.phase(k, l, n))
    }

    /// Dissipative factor: `T` on the diagonal, `λ` on coherences.
    pub fn apply_dissipative(&self, rho: &CMatrix, n: usize) -> CMatrix {
        let mut out = self.elementwise(rho, |k, l| Complex64::new(self.coherences[n][(k, l)], 0.0));
        let d = self.dim();
        let t = &self.populations[n];
        for k in 0..d {
            out[(k, k)] = Complex64::new((0..d).map(|l| t[(k, l)] * rho[(l, l)].re).sum(), 0.0);
        }
        out
    }

    /// Decoherence factor `Φ^dec_t`.
    pub fn apply_decoherence(&self, rho: &CMatrix, n: usize) -> CMatrix {
        self.elementwise(rho, |k, l| self.decoherence[n][(k, l)])
    }

    fn elementwise(&self, rho: &CMatrix, f: impl Fn(usize, usize) -> Complex64) -> CMatrix {
        let d = self.dim();
        let mut out = rho.clone();
        for k in 0..d {
            for l in k + 1..d {
                let z = f(k, l) * rho[(k, l)];
                out[(k, l)] = z;
                out[(l, k)] = z.conj();
            }
        }
        out
    }

    /// `Λ_{t_n}(ρ)` for an arbitrary matrix, without state checks.
    pub fn apply_unchecked(&self, rho: &CMatrix, n: usize) -> CMatrix {
        let d = self.dim();
        let t = &self.populations[n];
        CMatrix::from_fn(d, d, |k, l| {
            if k == l {
                (0..d).map(|m| rho[(m, m)] * t[(k, m)]).sum()
            } else {
                self.phase(k, l, n) * self.coherence_factor(k, l, n) * rho[(k, l)]
            }
        })
    }

    /// `Λ_{t_n}(ρ₀)` for a density matrix.
    pub fn apply(&self, rho0: &CMatrix, n: usize) -> Result<CMatrix> {
        validate_density(rho0, self.dim())?;
        if n >= self.grid.len() {
            return Err(Error::GridMismatch { expected: self.grid.len(), found: n + 1 });
        }
        let d = self.dim();
        let t = &self.populations[n];
        let mut out = self.elementwise(rho0, |k, l| self.phase(k, l, n) * self.coherence_factor(k, l, n));
        for k in 0..d {
            out[(k, k)] = Complex64::new((0..d).map(|l| t[(k, l)] * rho0[(l, l)].re).sum(), 0.0);
        }
        Ok(out)
    }

    /// Phase-stripped witness matrix `C(t_n)`.
    pub fn witness_matrix(&self, n: usize) -> CMatrix {
        let d = self.dim();
        let mut c = hermitian_from_upper(d, |k, l| self.coherence_factor(k, l, n));
        for k in 0..d {
            c[(k, k)] = Complex64::new(self.populations[n][(k, k)], 0.0);
        }
        c
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ Λ(|i⟩⟨j|)`, row index `i·d + a`.
    pub fn choi_matrix(&self, n: usize) -> CMatrix {
        let d = self.dim();
        let mut choi = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for a in 0..d {
                choi[(i * d + a, i * d + a)] = Complex64::new(self.populations[n][(a, i)], 0.0);
            }
            for j in 0..d {
                if i != j {
                    let z = if i < j {
                        self.phase(i, j, n) * self.coherence_factor(i, j, n)
                    } else {
                        (self.phase(j, i, n) * self.coherence_factor(j, i, n)).conj()
                    };
                    choi[(i * d + i, j * d + j)] = z;
                }
            }
        }
        choi
    }
}

/// Accepts Hermitian, unit-trace, positive semidefinite `d × d` matrices
/// within [`STATE_TOL`].
pub fn validate_density(rho: &CMatrix, d: usize) -> Result<()> {
    if rho.rows() != d || rho.cols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho.rows() });
    }
    if rho.as_slice().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidState("entries must be finite".into()));
    }
    let dev = rho.hermitian_deviation();
    if dev > STATE_TOL {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
    }
    let tr = rho.trace();
    if abs(tr.re - 1.0) > STATE_TOL || abs(tr.im) > STATE_TOL {
        return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
    }
    let mut sym = rho.clone();
    for k in 0..d {
        for l in k + 1..d {
            sym[(l, k)] = sym[(k, l)].conj();
        }
        sym[(k, k)].im = 0.0;
    }
    let min_eig = hermitian_min_eig(&HermitianMatrix::new(sym)?);
    if min_eig < -STATE_TOL {
        return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
    }
    Ok(())
}

/// Per-node CP diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CpWitness {
    pub grid: TimeGrid,
    /// `C(t_n)`.
    pub matrices: Vec<HermitianMatrix>,
    /// Minimal eigenvalue of `C(t_n)`.
    pub min_eigs: Vec<f64>,
    /// Smallest off-diagonal entry of `T(t_n)`.
    pub min_offdiag_t: Vec<f64>,
    /// Minimal eigenvalue of the full Choi matrix.
    pub choi_min_eigs: Vec<f64>,
    pub global_min: f64,
    pub argmin: usize,
}

impl CpWitness {
    /// Whether both the witness and the population map are nonnegative
    /// within `tol` at every node.
    pub fn is_cp(&self, tol: f64) -> bool {
        self.min_eigs.iter().chain(&self.min_offdiag_t).all(|&x| x >= -tol)
    }
}

pub fn cp_witness(traj: &MapTrajectory) -> Result<CpWitness> {
    let d = traj.dim();
    let len = traj.grid.len();
    let mut matrices = Vec::with_capacity(len);
    let mut min_eigs = Vec::with_capacity(len);
    let mut min_offdiag_t = Vec::with_capacity(len);
    let mut choi_min_eigs = Vec::with_capacity(len);
    for n in 0..len {
        let c = HermitianMatrix::new(traj.witness_matrix(n))?;
        let witness = hermitian_min_eig(&c);
        let t = &traj.populations[n];
        let offdiag = (0..d)
            .flat_map(|k| (0..d).filter(move |&l| l != k).map(move |l| (k, l)))
            .map(|kl| t[kl])
            .fold(f64::INFINITY, f64::min);
        let choi = hermitian_min_eig(&HermitianMatrix::new(traj.choi_matrix(n))?);
        let expected = witness.min(offdiag);
        if !(abs(choi - expected) <= CHOI_AGREEMENT_TOL) {
            return Err(Error::WitnessMismatch { node: n, choi, witness: expected });
        }
        matrices.push(c);
        min_eigs.push(witness);
        min_offdiag_t.push(offdiag);
        choi_min_eigs.push(choi);
    }
    let (argmin, global_min) = min_eigs
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (n, x)| if x < best.1 { (n, x) } else { best });
    Ok(CpWitness { grid: traj.grid, matrices, min_eigs, min_offdiag_t, choi_min_eigs, global_min, argmin })
}

/// `det C(t_n) = T₀₀T₁₁ − |λ₀₁μ₀₁|²` for a qubit trajectory.
pub fn qubit_det_c(traj: &MapTrajectory) -> Result<Vec<f64>> {
    if traj.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: traj.dim() });
    }
    Ok((0..traj.grid.len())
        .map(|n| {
            let t = &traj.populations[n];
            t[(0, 0)] * t[(1, 1)] - traj.coherence_factor(0, 1, n).norm_sqr()
        })
        .collect())
}
