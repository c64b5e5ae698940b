//! Restoring complete positivity with extra decoherence.
//!
//! Two constructions are provided: the smallest uniform dephasing rate
//! `γ_z*` such that `μ_kl(t) e^{-γ_z* t}` makes the map CP on the grid, and
//! the time-dependent schedule that keeps every coherence as large as the
//! populations allow.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::hybrid_map::{HybridGeneratorSpec, MapTrajectory};
use crate::math::{abs, exp, log};
use crate::numkit::{hermitian_min_eig, CMatrix, HermitianMatrix, RMatrix, TimeGrid};
use crate::{Error, Result};

/// Feasibility threshold on the witness minimal eigenvalue.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Number of probe rates on each side of `γ_z*` in the monotonicity sweep.
const SWEEP_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RestorationResult {
    pub gamma_star: f64,
    /// Worst witness eigenvalue at `γ_z*` on a twice-refined grid, from a
    /// fresh simulation.
    pub margin_at_star: f64,
    /// Worst witness eigenvalue at `max(0, γ_z* − 10·tol)`, or `None` when
    /// `γ_z* = 0`.
    pub margin_below: Option<f64>,
    pub iterations: usize,
    /// Final bracket `[infeasible, feasible]`.
    pub bracket: (f64, f64),
    /// Outcome of the monotonicity sweep, run only for `d > 2`.
    pub monotone: Option<bool>,
}

impl RestorationResult {
    /// Whether the re-simulated certificate holds on both sides.
    pub fn certified(&self) -> bool {
        self.margin_at_star >= -FEASIBILITY_TOL
            && self.margin_below.is_none_or(|m| m < -FEASIBILITY_TOL)
            && self.monotone != Some(false)
    }
}

/// Witness matrices of a trajectory, stored once so that many dephasing
/// rates can be probed cheaply.
struct Probe {
    times: Vec<f64>,
    base: Vec<CMatrix>,
}

impl Probe {
    fn new(traj: &MapTrajectory) -> Result<Self> {
        for (n, t) in traj.populations.iter().enumerate() {
            let min_entry = t.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            if min_entry < -FEASIBILITY_TOL {
                return Err(Error::PopulationsNotPositive { node: n, min_entry });
            }
        }
        Ok(Self {
            times: traj.grid.nodes().collect(),
            base: (0..traj.grid.len()).map(|n| traj.witness_matrix(n)).collect(),
        })
    }

    /// Minimum over nodes of `min-eig C(t; γ_z)`.
    fn margin(&self, gamma_z: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.base)
            .map(|(&t, c)| node_margin(c, exp(-gamma_z * t)))
            .fold(f64::INFINITY, f64::min)
    }

    fn feasible(&self, gamma_z: f64) -> bool {
        self.margin(gamma_z) >= -FEASIBILITY_TOL
    }
}

fn node_margin(c: &CMatrix, factor: f64) -> f64 {
    let d = c.rows();
    if d == 2 {
        // closed form for the 2×2 Hermitian case
        let (a, b) = (c[(0, 0)].re, c[(1, 1)].re);
        let off = c[(0, 1)].norm() * factor;
        let half = 0.5 * (a - b);
        return 0.5 * (a + b) - libm::hypot(half, off);
    }
    let scaled = CMatrix::from_fn(d, d, |k, l| if k == l { c[(k, l)] } else { c[(k, l)] * factor });
    hermitian_min_eig(&HermitianMatrix::new(scaled).expect("scaled witness stays Hermitian"))
}

/// Smallest `γ_z ∈ [0, γ_max]` (to within `tol`) for which the map with
/// `μ_kl → μ_kl e^{-γ_z t}` is CP at every grid node.
pub fn minimal_uniform_dephasing(
    spec: &HybridGeneratorSpec,
    grid: &TimeGrid,
    tol: f64,
    gamma_max: f64,
) -> Result<RestorationResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter { name: "tol", reason: "must be positive".into() });
    }
    if !(gamma_max >= 0.0 && gamma_max.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "gamma_max",
            reason: "must be finite and nonnegative".into(),
        });
    }
    let traj = MapTrajectory::build(spec, grid)?;
    let probe = Probe::new(&traj)?;

    let (mut lo, mut hi) = (0.0, gamma_max);
    let mut iterations = 0;
    if probe.feasible(0.0) {
        hi = 0.0;
    } else {
        let margin = probe.margin(gamma_max);
        if margin < -FEASIBILITY_TOL {
            return Err(Error::InfeasibleBracket { gamma_max, margin });
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if probe.feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            iterations += 1;
        }
    }

    // certificate from an independent, finer simulation
    let fine_grid = grid.refined(2);
    let fine = Probe::new(&MapTrajectory::build(spec, &fine_grid)?)?;
    if !fine.feasible(hi) {
        // inter-node violation: continue the search on the fine grid
        let mut flo = hi;
        let mut fhi = gamma_max;
        if !fine.feasible(fhi) {
            return Err(Error::InfeasibleBracket { gamma_max, margin: fine.margin(fhi) });
        }
        while fhi - flo > tol {
            let mid = 0.5 * (flo + fhi);
            if fine.feasible(mid) {
                fhi = mid;
            } else {
                flo = mid;
            }
            iterations += 1;
        }
        lo = flo;
        hi = fhi;
    }
    let gamma_star = hi;
    let margin_at_star = fine.margin(gamma_star);
    let margin_below = (gamma_star > 0.0).then(|| probe.margin((gamma_star - 10.0 * tol).max(0.0)));

    let monotone = (traj.dim() > 2).then(|| {
        let above = (1..=SWEEP_POINTS)
            .map(|k| gamma_star + (gamma_max - gamma_star) * k as f64 / SWEEP_POINTS as f64)
            .all(|g| probe.feasible(g));
        let below = (0..SWEEP_POINTS)
            .map(|k| lo * k as f64 / SWEEP_POINTS as f64)
            .filter(|_| gamma_star > 0.0)
            .all(|g| !probe.feasible(g));
        above && below
    });

    Ok(RestorationResult {
        gamma_star,
        margin_at_star,
        margin_below,
        iterations,
        bracket: (lo, hi),
        monotone,
    })
}

/// Node at which the clamp `D_kl ≥ 0` was active for pair `(k, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClampEvent {
    pub k: usize,
    pub l: usize,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSchedule {
    pub k: usize,
    pub l: usize,
    /// `D_kl(t_n)` after clamping.
    pub rates: Vec<f64>,
    /// `d/dt ln(|λ_kl| / √(T_kk T_ll))`.
    pub rates_unclamped: Vec<f64>,
    /// `μ_kl(t_n)` realized by the clamped schedule.
    pub mu: Vec<f64>,
    /// `μ_kl(t_n)` saturating `|λ_kl μ_kl| = √(T_kk T_ll)`.
    pub mu_unclamped: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceSchedule {
    pub grid: TimeGrid,
    pub pairs: Vec<PairSchedule>,
    pub clamp_events: Vec<ClampEvent>,
}

impl CoherenceSchedule {
    /// Decoherence factors to plug into a [`MapTrajectory`].
    pub fn decoherence_factors(&self, d: usize, clamped: bool) -> Vec<CMatrix> {
        (0..self.grid.len())
            .map(|n| {
                let mut m = CMatrix::identity(d);
                for p in &self.pairs {
                    let mu = if clamped { p.mu[n] } else { p.mu_unclamped[n] };
                    m[(p.k, p.l)] = Complex64::new(mu, 0.0);
                    m[(p.l, p.k)] = Complex64::new(mu, 0.0);
                }
                m
            })
            .collect()
    }
}

/// Maximal-coherence decoherence schedule from populations `T` and
/// dissipative coherence factors `λ`.
///
/// With `Φ_kl = ln|λ_kl| − ½ ln(T_kk T_ll)` the saturating factor is
/// `μ = e^{-Φ}`. The clamped schedule accumulates only the increases of
/// `Φ`, so its `μ` never exceeds the saturating one.
pub fn max_coherence_schedule(
    populations: &[RMatrix],
    coherences: &[RMatrix],
    grid: &TimeGrid,
) -> Result<CoherenceSchedule> {
    grid.check_len(populations.len())?;
    grid.check_len(coherences.len())?;
    let d = populations.first().map_or(0, RMatrix::rows);
    let h = grid.step();
    let mut pairs = Vec::new();
    let mut clamp_events = Vec::new();
    for k in 0..d {
        for l in k + 1..d {
            let mut phi = Vec::with_capacity(grid.len());
            for (n, (t, lam)) in populations.iter().zip(coherences).enumerate() {
                let (a, b) = (t[(k, k)], t[(l, l)]);
                if !(a > 0.0 && b > 0.0) {
                    return Err(Error::SingularSchedule { k, l, node: n, reason: "population vanished" });
                }
                let c = abs(lam[(k, l)]);
                if !(c > 0.0) {
                    return Err(Error::SingularSchedule {
                        k,
                        l,
                        node: n,
                        reason: "coherence factor vanished",
                    });
                }
                phi.push(log(c) - 0.5 * (log(a) + log(b)));
            }
            let shift = phi[0];
            phi.iter_mut().for_each(|x| *x -= shift);
            let mut psi = vec![0.0; phi.len()];
            for n in 1..phi.len() {
                let step = phi[n] - phi[n - 1];
                if step < 0.0 {
                    clamp_events.push(ClampEvent { k, l, node: n });
                }
                psi[n] = psi[n - 1] + step.max(0.0);
            }
            let rates_unclamped = derivative(&phi, h);
            pairs.push(PairSchedule {
                k,
                l,
                rates: rates_unclamped.iter().map(|&r| r.max(0.0)).collect(),
                rates_unclamped,
                mu: psi.iter().map(|&x| exp(-x)).collect(),
                mu_unclamped: phi.iter().map(|&x| exp(-x)).collect(),
            });
        }
    }
    Ok(CoherenceSchedule { grid: *grid, pairs, clamp_events })
}

fn derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    if n < 3 {
        let s = if n == 2 { (v[1] - v[0]) / h } else { 0.0 };
        return vec![s; n];
    }
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    for k in 1..n - 1 {
        out[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid_map::{cp_witness, qubit_det_c, DecoherenceModel, Dissipation};
    use crate::qubit_ref::QubitParams;
    use crate::semi_markov::RateKernel;

    fn demo(kp: f64, km: f64, gamma: f64) -> HybridGeneratorSpec {
        QubitParams { kappa_plus: kp, kappa_minus: km, gamma, gamma_z: 0.0, omega: 0.5 }
            .rates_spec()
            .unwrap()
    }

    #[test]
    fn markov_kernel_needs_no_dephasing() {
        let w = RateKernel::markov(RMatrix::from_rows(&[vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap()).unwrap();
        let spec = HybridGeneratorSpec::new(vec![0.0, 1.0], Dissipation::Rates(w), DecoherenceModel::none(2)).unwrap();
        let r = minimal_uniform_dephasing(&spec, &TimeGrid::new(5.0, 500).unwrap(), 1e-3, 5.0).unwrap();
        assert_eq!(r.gamma_star, 0.0);
        assert!(r.certified());
    }

    #[test]
    fn non_cp_kernel_has_certified_threshold() {
        let spec = demo(4.0, 5.0, 1.0);
        let grid = TimeGrid::new(5.0, 1000).unwrap();
        let r = minimal_uniform_dephasing(&spec, &grid, 1e-3, 5.0).unwrap();
        assert!(r.gamma_star > 0.3 && r.gamma_star < 1.0, "{}", r.gamma_star);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-3);
        assert!(r.certified(), "{r:?}");
        let again = minimal_uniform_dephasing(&spec, &grid, 1e-3, 2.0 * r.gamma_star).unwrap();
        assert!(abs(again.gamma_star - r.gamma_star) <= 1e-3);
    }

    #[test]
    fn exhausted_bracket_is_reported() {
        let r = minimal_uniform_dephasing(&demo(4.0, 5.0, 1.0), &TimeGrid::new(5.0, 500).unwrap(), 1e-3, 0.05);
        assert!(matches!(r, Err(Error::InfeasibleBracket { gamma_max, .. }) if gamma_max == 0.05));
    }

    #[test]
    fn negative_populations_cannot_be_repaired() {
        let r = minimal_uniform_dephasing(&demo(1.0, 3.0, 1.0), &TimeGrid::new(5.0, 500).unwrap(), 1e-3, 10.0);
        assert!(matches!(r, Err(Error::PopulationsNotPositive { .. })));
    }

    #[test]
    fn witness_monotone_in_dephasing() {
        let spec = demo(4.0, 5.0, 1.0);
        let grid = TimeGrid::new(5.0, 200).unwrap();
        let probe = Probe::new(&MapTrajectory::build(&spec, &grid).unwrap()).unwrap();
        for n in 0..grid.len() {
            let mut last = f64::NEG_INFINITY;
            for g in 0..20 {
                let m = node_margin(&probe.base[n], exp(-0.1 * g as f64 * probe.times[n]));
                assert!(m >= last - 1e-15);
                last = m;
            }
        }
    }

    #[test]
    fn zero_kernel_schedule_is_zero() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let pops = vec![RMatrix::identity(3); 11];
        let lam = vec![RMatrix::from_fn(3, 3, |_, _| 1.0); 11];
        let s = max_coherence_schedule(&pops, &lam, &grid).unwrap();
        assert_eq!(s.pairs.len(), 3);
        assert!(s.pairs.iter().all(|p| p.rates.iter().all(|&r| r == 0.0)));
        assert!(s.clamp_events.is_empty());
    }

    #[test]
    fn saturating_schedule_zeroes_minors_and_clamped_is_cp() {
        let spec = demo(4.0, 5.0, 1.0);
        let grid = TimeGrid::new(5.0, 1000).unwrap();
        let traj = MapTrajectory::build(&spec, &grid).unwrap();
        let s = max_coherence_schedule(&traj.populations, &traj.coherences, &grid).unwrap();
        let sat = traj.with_decoherence_factors(s.decoherence_factors(2, false)).unwrap();
        assert!(qubit_det_c(&sat).unwrap().iter().all(|x| abs(*x) <= 1e-8));
        let clamped = traj.with_decoherence_factors(s.decoherence_factors(2, true)).unwrap();
        assert!(cp_witness(&clamped).unwrap().global_min >= -1e-8);
        assert!(s.pairs[0].rates.iter().all(|r| r.is_finite() && *r >= 0.0));
    }

    #[test]
    fn vanishing_population_is_singular() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let pops = vec![RMatrix::identity(2), RMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap()];
        let lam = vec![RMatrix::from_fn(2, 2, |_, _| 1.0); 2];
        assert!(matches!(
            max_coherence_schedule(&pops, &lam, &grid),
            Err(Error::SingularSchedule { node: 1, .. })
        ));
    }
}
