//! Monte Carlo checks: semi-Markov jump trajectories and white-noise
//! dephasing averages.
//!
//! Every trajectory draws from its own ChaCha8 stream selected by
//! `(seed, trajectory index)`, so a batch is reproducible regardless of the
//! order in which trajectories are generated.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::math::{ceil, log, sqrt};
use crate::numkit::TimeGrid;
use crate::semi_markov::{validate_jump_kernel, JumpKernel};
use crate::{Error, Result};

/// Relative tolerance of the inverse-CDF root search (times `t_max`).
const ROOT_TOL: f64 = 1e-10;

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Jump history of one trajectory. `states[0]` is the initial state and
/// `states[m + 1]` the state entered at `times[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub times: Vec<f64>,
    pub states: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub seed: u64,
    pub count: usize,
    pub initial_state: usize,
    pub grid: TimeGrid,
    pub records: Vec<JumpRecord>,
    /// `occupancy[n][k]`: trajectories in state `k` at node `n`.
    pub occupancy: Vec<Vec<u64>>,
}

impl TrajectoryBatch {
    /// Empirical `T̂_kj₀(t_n)`.
    pub fn frequency(&self, n: usize, k: usize) -> f64 {
        self.occupancy[n][k] as f64 / self.count as f64
    }

    /// Binomial standard error `√(p(1−p)/N)` of [`Self::frequency`].
    pub fn standard_error(&self, n: usize, k: usize) -> f64 {
        let p = self.frequency(n, k);
        sqrt(p * (1.0 - p) / self.count as f64)
    }

    /// Empirical column `T̂_·j₀(t_n)`.
    pub fn column(&self, n: usize) -> Vec<f64> {
        (0..self.occupancy[n].len()).map(|k| self.frequency(n, k)).collect()
    }
}

/// Simulates `count` trajectories started in `initial_state`.
pub fn sample_semi_markov(
    q: &JumpKernel,
    initial_state: usize,
    grid: &TimeGrid,
    count: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    validate_jump_kernel(q).into_result()?;
    let d = q.dim();
    if initial_state >= d {
        return Err(Error::InvalidParameter {
            name: "initial_state",
            reason: alloc::format!("state {initial_state} outside 0..{d}"),
        });
    }
    if count == 0 {
        return Err(Error::InvalidParameter { name: "count", reason: "must be positive".into() });
    }
    let masses: Vec<f64> = (0..d).map(|j| q.column_mass(j)).collect();
    let t_max = grid.t_max();
    let len = grid.len();
    // occupancy difference array: +1 at the first node of a sojourn, −1 after its last
    let mut diff = vec![vec![0i64; d]; len + 1];
    let mut records = Vec::with_capacity(count);
    for index in 0..count {
        let mut rng = stream(seed, index as u64);
        let mut record = JumpRecord { times: Vec::new(), states: vec![initial_state] };
        let mut now = 0.0;
        let mut state = initial_state;
        let mut first_node = 0;
        loop {
            let Some(tau) = draw_sojourn(q, state, masses[state], t_max - now, &mut rng) else {
                break;
            };
            let next_time = now + tau;
            if next_time <= now {
                break;
            }
            let next = draw_destination(q, state, tau, &mut rng);
            let boundary = first_node_at_or_after(grid, next_time);
            diff[first_node][state] += 1;
            diff[boundary][state] -= 1;
            first_node = boundary;
            record.times.push(next_time);
            record.states.push(next);
            now = next_time;
            state = next;
        }
        diff[first_node][state] += 1;
        diff[len][state] -= 1;
        records.push(record);
    }
    let mut occupancy = Vec::with_capacity(len);
    let mut running = vec![0i64; d];
    for row in diff.iter().take(len) {
        for (r, v) in running.iter_mut().zip(row) {
            *r += v;
        }
        occupancy.push(running.iter().map(|&x| x as u64).collect());
    }
    Ok(TrajectoryBatch { seed, count, initial_state, grid: *grid, records, occupancy })
}

/// Sojourn length in `j`, or `None` when no jump happens within `horizon`.
fn draw_sojourn(q: &JumpKernel, j: usize, mass: f64, horizon: f64, rng: &mut ChaCha8Rng) -> Option<f64> {
    let u: f64 = rng.random();
    if u >= mass || horizon <= 0.0 {
        return None;
    }
    let cdf = |t: f64| 1.0 - q.survival(j, t);
    if cdf(horizon) < u {
        return None;
    }
    let (mut lo, mut hi) = (0.0, horizon);
    let tol = ROOT_TOL * horizon.max(1e-300);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

fn draw_destination(q: &JumpKernel, j: usize, tau: f64, rng: &mut ChaCha8Rng) -> usize {
    let d = q.dim();
    let weights: Vec<f64> = (0..d).map(|i| if i == j { 0.0 } else { q.density(i, j, tau).max(0.0) }).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // density vanishes at this instant; fall back to the channel with the largest mass
        return (0..d)
            .filter(|&i| i != j)
            .max_by(|&a, &b| q.density(a, j, 0.0).total_cmp(&q.density(b, j, 0.0)))
            .unwrap_or(j);
    }
    let v: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = j;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            acc += w;
            last = i;
            if v < acc {
                return i;
            }
        }
    }
    last
}

fn first_node_at_or_after(grid: &TimeGrid, t: f64) -> usize {
    let len = grid.len();
    if t > grid.t_max() {
        return len;
    }
    let mut n = (ceil(t / grid.step()) as usize).min(len - 1);
    while n > 0 && grid.node(n - 1) >= t {
        n -= 1;
    }
    while n < len && grid.node(n) < t {
        n += 1;
    }
    n
}

/// Empirical `μ̂_kl(t_n) = ⟨e^{-i∫(ξ_k − ξ_l)}⟩` with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingAverage {
    pub grid: TimeGrid,
    pub samples: usize,
    pub mean: Vec<Complex64>,
    pub se_re: Vec<f64>,
    pub se_im: Vec<f64>,
    /// Least-squares rate of `|μ̂| ≈ e^{-rt}` through the origin, using nodes
    /// where `|μ̂|` exceeds five standard errors. `None` if no node
    /// qualifies.
    pub fitted_rate: Option<f64>,
}

pub fn average_dephasing_noise(
    rates: &[f64],
    k: usize,
    l: usize,
    grid: &TimeGrid,
    samples: usize,
    seed: u64,
) -> Result<DephasingAverage> {
    let d = rates.len();
    if k >= d || l >= d || k == l {
        return Err(Error::InvalidParameter {
            name: "pair",
            reason: alloc::format!("need distinct levels below {d}, got ({k}, {l})"),
        });
    }
    if rates.iter().any(|&g| !(g.is_finite() && g >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "noise rates",
            reason: "must be finite and nonnegative".into(),
        });
    }
    if samples < 2 {
        return Err(Error::InvalidParameter { name: "samples", reason: "need at least 2".into() });
    }
    let h = grid.step();
    let (sk, sl) = (sqrt(rates[k] * h), sqrt(rates[l] * h));
    let len = grid.len();
    let mut sum = vec![Complex64::new(0.0, 0.0); len];
    let mut sum_sq_re = vec![0.0; len];
    let mut sum_sq_im = vec![0.0; len];
    for index in 0..samples {
        let mut rng = stream(seed, index as u64);
        let mut phase = 0.0;
        for n in 0..len {
            if n > 0 {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                phase += sk * a - sl * b;
            }
            let z = Complex64::from_polar(1.0, -phase);
            sum[n] += z;
            sum_sq_re[n] += z.re * z.re;
            sum_sq_im[n] += z.im * z.im;
        }
    }
    let nf = samples as f64;
    let mean: Vec<Complex64> = sum.iter().map(|s| s / nf).collect();
    let se = |sq: &[f64], part: fn(&Complex64) -> f64| -> Vec<f64> {
        sq.iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = ((s / nf) - part(m) * part(m)).max(0.0) * nf / (nf - 1.0);
                sqrt(var / nf)
            })
            .collect()
    };
    let se_re = se(&sum_sq_re, |z| z.re);
    let se_im = se(&sum_sq_im, |z| z.im);
    let (mut num, mut den) = (0.0, 0.0);
    for n in 1..len {
        let m = mean[n].norm();
        let band = sqrt(se_re[n] * se_re[n] + se_im[n] * se_im[n]);
        if m > 5.0 * band {
            let t = grid.node(n);
            num += t * log(m);
            den += t * t;
        }
    }
    let fitted_rate = (den > 0.0).then(|| -num / den);
    Ok(DephasingAverage { grid: *grid, samples, mean, se_re, se_im, fitted_rate })
}
