//! Cross-checks of the solvers against closed forms and an independent
//! GKLS semigroup.

use hybridmap_core::hybrid_map::{
    cp_witness, DecoherenceModel, Dissipation, HybridGeneratorSpec, MapTrajectory,
};
use hybridmap_core::numkit::expm;
use hybridmap_core::qubit_ref::{closed_forms, QubitParams};
use hybridmap_core::semi_markov::{build_t_series, DEFAULT_SERIES_TOL};
use hybridmap_core::volterra::Backend;
use hybridmap_core::{CMatrix, Complex64, HermitianMatrix, RMatrix, TimeGrid};

fn sup(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn rates_mode_matches_closed_forms_on_both_backends() {
    let p = QubitParams::fig1(0.0);
    let grid = TimeGrid::new(5.0, 5000).unwrap();
    let exact = closed_forms(&p, &grid).unwrap();
    for backend in [Backend::Quadrature, Backend::Embedding] {
        let spec = p.rates_spec().unwrap().with_backend(backend);
        let traj = MapTrajectory::build(&spec, &grid).unwrap();
        let t00 = traj.populations.iter().map(|m| m[(0, 0)]);
        let t11 = traj.populations.iter().map(|m| m[(1, 1)]);
        let lam = traj.coherences.iter().map(|m| m[(0, 1)]);
        assert!(sup(t00, exact.t00.iter().copied()) <= 1e-6, "{backend:?}");
        assert!(sup(t11, exact.t11.iter().copied()) <= 1e-6, "{backend:?}");
        assert!(sup(lam, exact.lambda.iter().copied()) <= 1e-6, "{backend:?}");
    }
}

#[test]
fn imaginary_d_regime_matches_closed_forms() {
    let p = QubitParams { kappa_plus: 4.0, kappa_minus: 5.0, gamma: 1.0, gamma_z: 0.2, omega: 1.0 };
    let grid = TimeGrid::new(5.0, 5000).unwrap();
    let exact = closed_forms(&p, &grid).unwrap();
    let traj = MapTrajectory::build(&p.rates_spec().unwrap(), &grid).unwrap();
    let det = hybridmap_core::hybrid_map::qubit_det_c(&traj).unwrap();
    assert!(sup(det, exact.det_c.iter().copied()) <= 1e-8);
}

#[test]
fn semi_markov_mode_population_matches_laplace_stationary_value() {
    let p = QubitParams::fig1(0.0);
    let grid = TimeGrid::new(12.0, 6000).unwrap();
    let t = build_t_series(&p.jump_kernel().unwrap(), &grid, DEFAULT_SERIES_TOL).unwrap();
    // T̃₀₀ = (s+γ−κ₋)(s+γ) / (s[(s+γ)² − κ₊κ₋]) → (γ−κ₋)γ/(γ²−κ₊κ₋)
    assert!((t.last().unwrap()[(0, 0)] - 10.0 / 22.0).abs() < 1e-5);
}

/// `L(ρ) = −i[H, ρ] + Σ_{i≠j} W_ij (A ρ A† − ½{A†A, ρ})`, `A = |i⟩⟨j|`,
/// plus `Σ_kl D_kl (P_k ρ P_l − ½{P_l P_k, ρ})`.
fn gkls(energies: &[f64], w: &RMatrix, dmat: &CMatrix, rho: &CMatrix) -> CMatrix {
    let d = energies.len();
    let i = Complex64::new(0.0, 1.0);
    let h = CMatrix::from_fn(d, d, |a, b| if a == b { Complex64::new(energies[a], 0.0) } else { Complex64::new(0.0, 0.0) });
    let mut out = (&h.matmul(rho) - &rho.matmul(&h)).scale(-i);
    let unit = |a: usize, b: usize| CMatrix::from_fn(d, d, |x, y| Complex64::new(f64::from(u8::from(x == a && y == b)), 0.0));
    for a in 0..d {
        for b in 0..d {
            if a == b || w[(a, b)] == 0.0 {
                continue;
            }
            let op = unit(a, b);
            let opd = op.adjoint();
            let ntn = opd.matmul(&op);
            let term = &op.matmul(rho).matmul(&opd) - &(&ntn.matmul(rho) + &rho.matmul(&ntn)).scale(Complex64::new(0.5, 0.0));
            out = &out + &term.scale(Complex64::new(w[(a, b)], 0.0));
        }
    }
    for k in 0..d {
        for l in 0..d {
            let (pk, pl) = (unit(k, k), unit(l, l));
            let plpk = pl.matmul(&pk);
            let term = &pk.matmul(rho).matmul(&pl) - &(&plpk.matmul(rho) + &rho.matmul(&plpk)).scale(Complex64::new(0.5, 0.0));
            out = &out + &term.scale(dmat[(k, l)]);
        }
    }
    out
}

#[test]
fn markov_limit_equals_gkls_semigroup() {
    let energies = [0.0, 0.7, 1.9];
    let w = RMatrix::from_rows(&[vec![0.0, 0.4, 0.1], vec![0.8, 0.0, 0.3], vec![0.2, 0.5, 0.0]]).unwrap();
    let c = |re, im| Complex64::new(re, im);
    let dmat = CMatrix::from_rows(&[
        vec![c(0.6, 0.0), c(0.1, 0.2), c(0.0, -0.1)],
        vec![c(0.1, -0.2), c(0.5, 0.0), c(0.2, 0.0)],
        vec![c(0.0, 0.1), c(0.2, 0.0), c(0.4, 0.0)],
    ])
    .unwrap();
    let d = energies.len();
    let spec = HybridGeneratorSpec::new(
        energies.to_vec(),
        Dissipation::Rates(hybridmap_core::semi_markov::RateKernel::markov(w.clone()).unwrap()),
        DecoherenceModel::Gkls(HermitianMatrix::new(dmat.clone()).unwrap()),
    )
    .unwrap();
    let grid = TimeGrid::new(3.0, 3000).unwrap();
    let traj = MapTrajectory::build(&spec, &grid).unwrap();

    let dim = d * d;
    let liouvillian = CMatrix::from_fn(dim, dim, |row, col| {
        let basis = CMatrix::from_fn(d, d, |a, b| c(f64::from(u8::from(a * d + b == col)), 0.0));
        gkls(&energies, &w, &dmat, &basis).as_slice()[row]
    });
    for n in (0..grid.len()).step_by(300) {
        let prop = expm(&liouvillian.scale(c(grid.node(n), 0.0)));
        for col in 0..dim {
            let basis = CMatrix::from_fn(d, d, |a, b| c(f64::from(u8::from(a * d + b == col)), 0.0));
            let ours = traj.apply_unchecked(&basis, n);
            for row in 0..dim {
                let diff = (ours.as_slice()[row] - prop[(row, col)]).norm();
                assert!(diff <= 1e-8, "node {n} element ({row}, {col}): {diff:e}");
            }
        }
    }
    assert!(cp_witness(&traj).unwrap().is_cp(1e-10));
}
