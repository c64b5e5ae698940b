//! Invariant suite behind `hybridmap validate`.

use hybridmap_core::hybrid_map::{cp_witness, qubit_det_c, HybridGeneratorSpec, MapTrajectory};
use hybridmap_core::qubit_ref::{closed_forms, QubitParams, FIG1_GAMMA_Z};
use hybridmap_core::{CMatrix, Complex64, TimeGrid};

use crate::config::Validated;
use crate::error::CliError;

const TRACE_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;
const CLOSED_FORM_TOL: f64 = 1e-6;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, value: f64, tol: f64) {
        let ok = value <= tol;
        if !ok {
            self.failures += 1;
        }
        println!("{} {name}: {value:.3e} (tolerance {tol:.0e})", if ok { "PASS" } else { "FAIL" });
    }

    fn error(&mut self, name: &str, e: impl std::fmt::Display) {
        self.failures += 1;
        println!("FAIL {name}: {e}");
    }
}

fn max_over<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn check_map(report: &mut Report, label: &str, spec: &HybridGeneratorSpec, grid: &TimeGrid, rho0: &CMatrix) -> Option<MapTrajectory> {
    let traj = match MapTrajectory::build(spec, grid) {
        Ok(t) => t,
        Err(e) => {
            report.error(&format!("{label} build"), e);
            return None;
        }
    };
    let d = traj.dim();
    let len = grid.len();

    let stochastic = max_over(traj.populations.iter().flat_map(|t| {
        (0..d).map(move |j| ((0..d).map(|i| t[(i, j)]).sum::<f64>() - 1.0).abs())
    }));
    report.check(&format!("{label} column sums of T"), stochastic, TRACE_TOL);

    let mut trace = 0.0_f64;
    let mut herm = 0.0_f64;
    for n in 0..len {
        let rho = traj.apply_unchecked(rho0, n);
        trace = trace.max((rho.trace() - 1.0).norm());
        herm = herm.max(rho.hermitian_deviation());
    }
    report.check(&format!("{label} trace of output state"), trace, TRACE_TOL);
    report.check(&format!("{label} Hermiticity of output state"), herm, SYMMETRY_TOL);

    let identity = {
        let t0 = &traj.populations[0];
        let pop = max_over((0..d).flat_map(|i| (0..d).map(move |j| (t0[(i, j)] - f64::from(u8::from(i == j))).abs())));
        let coh = max_over(
            (0..d).flat_map(|k| (0..d).filter(move |&l| l != k).map(move |l| (k, l)))
                .map(|kl| (traj.coherence_factor(kl.0, kl.1, 0) - Complex64::new(1.0, 0.0)).norm()),
        );
        pop.max(coh)
    };
    report.check(&format!("{label} identity at t = 0"), identity, SYMMETRY_TOL);

    let swap = max_over((0..len).flat_map(|n| {
        let traj = &traj;
        (0..d).flat_map(move |k| {
            (k + 1..d).map(move |l| {
                let lam = (traj.coherences[n][(k, l)] - traj.coherences[n][(l, k)]).abs();
                let mu = (traj.decoherence[n][(k, l)] - traj.decoherence[n][(l, k)].conj()).norm();
                lam.max(mu)
            })
        })
    }));
    report.check(&format!("{label} swap symmetry of coherence factors"), swap, SYMMETRY_TOL);

    match cp_witness(&traj) {
        Ok(w) => {
            let gap = max_over(
                (0..len).map(|n| (w.choi_min_eigs[n] - w.min_eigs[n].min(w.min_offdiag_t[n])).abs()),
            );
            report.check(&format!("{label} Choi spectrum vs witness"), gap, 1e-8);
            println!(
                "info {label}: min eig C = {:.6e} at t = {}, completely positive: {}",
                w.global_min,
                grid.node(w.argmin),
                w.is_cp(TRACE_TOL)
            );
        }
        Err(e) => report.error(&format!("{label} Choi spectrum vs witness"), e),
    }
    Some(traj)
}

fn reference_suite(report: &mut Report) {
    let grid = TimeGrid::new(5.0, 5000).expect("valid grid");
    let rho0 = CMatrix::from_fn(2, 2, |_, _| Complex64::new(0.5, 0.0));
    for gz in FIG1_GAMMA_Z {
        let label = format!("reference qubit gamma_z={gz}");
        let p = QubitParams::fig1(gz);
        let spec = match p.rates_spec() {
            Ok(s) => s,
            Err(e) => return report.error(&label, e),
        };
        let Some(traj) = check_map(report, &label, &spec, &grid, &rho0) else { continue };
        let exact = match closed_forms(&p, &grid) {
            Ok(c) => c,
            Err(e) => return report.error(&label, e),
        };
        let det = qubit_det_c(&traj).expect("qubit trajectory");
        let err = max_over((0..grid.len()).map(|n| {
            let t = &traj.populations[n];
            [
                t[(0, 0)] - exact.t00[n],
                t[(1, 1)] - exact.t11[n],
                traj.coherences[n][(0, 1)] - exact.lambda[n],
                det[n] - exact.det_c[n],
            ]
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max)
        }));
        report.check(&format!("{label} closed forms"), err, CLOSED_FORM_TOL);
    }
}

pub fn run(cfg: Option<&Validated>) -> Result<(), CliError> {
    let mut report = Report { failures: 0 };
    match cfg {
        Some(cfg) => {
            check_map(&mut report, "config", &cfg.spec, &cfg.grid, &cfg.initial_state);
        }
        None => reference_suite(&mut report),
    }
    if report.failures == 0 {
        println!("all checks passed");
        Ok(())
    } else {
        Err(CliError::ValidationFailed(report.failures))
    }
}
