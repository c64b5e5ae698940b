//! Closed-form qubit reference.
//!
//! For the kernels `k_±(t) = κ_± e^{-γt}` (`W₀₁ = k₊`, `W₁₀ = k₋`) the
//! rates-mode populations and coherence factor are
//!
//! ```text
//! T₀₀(t) = κ₊/K + (κ₋/K) B(t; d²)      T₁₁(t) = κ₋/K + (κ₊/K) B(t; d²)
//! λ₀₁(t) = B(t; d̄²)
//! B(t; x²) = e^{-γt/2} [cosh(xt/2) + (γ/x) sinh(xt/2)]
//! ```
//!
//! with `K = κ₊ + κ₋`, `d² = γ² − 4K`, `d̄² = γ² − 2K`, continued to
//! trigonometric functions when `x² < 0`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::hybrid_map::{DecoherenceModel, Dissipation, HybridGeneratorSpec};
use crate::math::{cos, cosh, exp, sin, sinh, sqrt};
use crate::numkit::{CMatrix, HermitianMatrix, RMatrix, TimeGrid};
use crate::semi_markov::{JumpKernel, RateKernel};
use crate::volterra::{ExpTerm, RegularPart};
use crate::{Error, Result};

/// Dephasing rates plotted in the reference figure.
pub const FIG1_GAMMA_Z: [f64; 3] = [0.0, 0.1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitParams {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub gamma: f64,
    pub gamma_z: f64,
    /// `E₁ − E₀`.
    pub omega: f64,
}

impl QubitParams {
    /// `γ = 5`, `κ₊ = 1`, `κ₋ = 3`.
    pub fn fig1(gamma_z: f64) -> Self {
        Self { kappa_plus: 1.0, kappa_minus: 3.0, gamma: 5.0, gamma_z, omega: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 5] = [
            ("kappa_plus", self.kappa_plus, self.kappa_plus >= 0.0),
            ("kappa_minus", self.kappa_minus, self.kappa_minus >= 0.0),
            ("gamma", self.gamma, self.gamma > 0.0),
            ("gamma_z", self.gamma_z, self.gamma_z >= 0.0),
            ("omega", self.omega, true),
        ];
        for (name, value, ok) in checks {
            if !(value.is_finite() && ok) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: alloc::format!("value {value} out of range"),
                });
            }
        }
        Ok(())
    }

    pub fn total_rate(&self) -> f64 {
        self.kappa_plus + self.kappa_minus
    }

    /// `d² = γ² − 4(κ₊ + κ₋)`.
    pub fn d_squared(&self) -> f64 {
        self.gamma * self.gamma - 4.0 * self.total_rate()
    }

    /// `d̄² = γ² − 2(κ₊ + κ₋)`.
    pub fn dbar_squared(&self) -> f64 {
        self.gamma * self.gamma - 2.0 * self.total_rate()
    }

    pub fn regime(&self) -> Regime {
        let g2 = self.gamma * self.gamma;
        Regime {
            real_d: self.d_squared() >= 0.0,
            real_dbar: self.dbar_squared() >= 0.0,
            gamma_dominates_each_rate: g2 >= 4.0 * self.kappa_plus.max(self.kappa_minus),
        }
    }

    /// Rates-mode kernel `W₀₁ = κ₊e^{-γt}`, `W₁₀ = κ₋e^{-γt}`.
    pub fn rate_kernel(&self) -> Result<RateKernel> {
        let w = RMatrix::from_rows(&[vec![0.0, self.kappa_plus], vec![self.kappa_minus, 0.0]])
            .expect("2x2");
        RateKernel::new(
            RMatrix::zeros(2, 2),
            RegularPart::ExpSum(vec![ExpTerm { rate: self.gamma, weights: w }]),
        )
    }

    /// Semi-Markov kernel `q = [[0, k₊], [k₋, 0]]`.
    pub fn jump_kernel(&self) -> Result<JumpKernel> {
        let kappa = RMatrix::from_rows(&[vec![0.0, self.kappa_plus], vec![self.kappa_minus, 0.0]])
            .expect("2x2");
        JumpKernel::exponential_uniform(kappa, self.gamma)
    }

    /// `L^dec ρ = (γ_z/2)(σ_z ρ σ_z − ρ)` as a GKLS matrix.
    pub fn decoherence(&self) -> DecoherenceModel {
        let h = 0.5 * self.gamma_z;
        let m = CMatrix::from_fn(2, 2, |k, l| Complex64::new(if k == l { h } else { -h }, 0.0));
        DecoherenceModel::Gkls(HermitianMatrix::new(m).expect("real symmetric"))
    }

    pub fn rates_spec(&self) -> Result<HybridGeneratorSpec> {
        self.validate()?;
        HybridGeneratorSpec::new(
            vec![0.0, self.omega],
            Dissipation::Rates(self.rate_kernel()?),
            self.decoherence(),
        )
    }

    pub fn semi_markov_spec(&self) -> Result<HybridGeneratorSpec> {
        self.validate()?;
        HybridGeneratorSpec::new(
            vec![0.0, self.omega],
            Dissipation::SemiMarkov(self.jump_kernel()?),
            self.decoherence(),
        )
    }
}


/// Which parameter regime a qubit sits in; reported, never enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regime {
    pub real_d: bool,
    pub real_dbar: bool,
    /// `γ² ≥ max(4κ₊, 4κ₋)`.
    pub gamma_dominates_each_rate: bool,
}

/// `e^{-γt/2}[cosh(xt/2) + (γ/x) sinh(xt/2)]` for `x² = x_squared`, with
/// the trigonometric continuation for `x² < 0` and the limit `1 + γt/2` at
/// `x = 0`.
pub fn relaxation_factor(gamma: f64, x_squared: f64, t: f64) -> f64 {
    let envelope = exp(-0.5 * gamma * t);
    let bracket = if x_squared > 0.0 {
        let x = sqrt(x_squared);
        cosh(0.5 * x * t) + gamma / x * sinh(0.5 * x * t)
    } else if x_squared < 0.0 {
        let y = sqrt(-x_squared);
        cos(0.5 * y * t) + gamma / y * sin(0.5 * y * t)
    } else {
        1.0 + 0.5 * gamma * t
    };
    envelope * bracket
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForms {
    pub grid: TimeGrid,
    pub t00: Vec<f64>,
    pub t11: Vec<f64>,
    pub lambda: Vec<f64>,
    pub det_c: Vec<f64>,
}

pub fn closed_forms(p: &QubitParams, grid: &TimeGrid) -> Result<ClosedForms> {
    p.validate()?;
    let k = p.total_rate();
    let len = grid.len();
    let (mut t00, mut t11, mut lambda, mut det_c) =
        (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
    for t in grid.nodes() {
        let (a, b, l) = if k == 0.0 {
            (1.0, 1.0, 1.0)
        } else {
            let relax = relaxation_factor(p.gamma, p.d_squared(), t);
            (
                p.kappa_plus / k + p.kappa_minus / k * relax,
                p.kappa_minus / k + p.kappa_plus / k * relax,
                relaxation_factor(p.gamma, p.dbar_squared(), t),
            )
        };
        t00.push(a);
        t11.push(b);
        lambda.push(l);
        det_c.push(a * b - l * l * exp(-2.0 * p.gamma_z * t));
    }
    Ok(ClosedForms { grid: *grid, t00, t11, lambda, det_c })
}

/// `det C(t)` for the three reference dephasing rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Dataset {
    pub grid: TimeGrid,
    pub gamma_z: [f64; 3],
    pub det_c: [Vec<f64>; 3],
}

pub fn fig1_dataset(grid: &TimeGrid) -> Result<Fig1Dataset> {
    let curve = |gz| closed_forms(&QubitParams::fig1(gz), grid).map(|c| c.det_c);
    Ok(Fig1Dataset {
        grid: *grid,
        gamma_z: FIG1_GAMMA_Z,
        det_c: [curve(FIG1_GAMMA_Z[0])?, curve(FIG1_GAMMA_Z[1])?, curve(FIG1_GAMMA_Z[2])?],
    })
}
