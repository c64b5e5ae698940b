use std::path::Path;

use hybridmap_core::cp_restore::minimal_uniform_dephasing;
use hybridmap_core::hybrid_map::{cp_witness, qubit_det_c, DecoherenceModel, Dissipation, MapTrajectory};
use hybridmap_core::qubit_ref::fig1_dataset;
use hybridmap_core::sampler::{average_dephasing_noise, sample_semi_markov};
use hybridmap_core::semi_markov::{build_t_series, DEFAULT_SERIES_TOL};
use hybridmap_core::TimeGrid;

use crate::config::Validated;
use crate::error::CliError;
use crate::output::{num, Table};

fn pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |k| (k + 1..d).map(move |l| (k, l)))
}

pub fn simulate(cfg: &Validated, output: Option<&Path>) -> Result<(), CliError> {
    let d = cfg.spec.dim();
    let traj = MapTrajectory::build(&cfg.spec, &cfg.grid).map_err(CliError::numerical("hybrid_map"))?;
    let witness = cp_witness(&traj).map_err(CliError::numerical("hybrid_map"))?;
    let det = if d == 2 { Some(qubit_det_c(&traj).map_err(CliError::numerical("hybrid_map"))?) } else { None };

    let mut header = vec!["t".to_string()];
    header.extend((0..d).flat_map(|i| (0..d).map(move |j| format!("T_{i}{j}"))));
    header.extend(pairs(d).map(|(k, l)| format!("lambda_{k}{l}_abs")));
    header.extend(pairs(d).map(|(k, l)| format!("mu_{k}{l}_abs")));
    header.push("mineig_C".into());
    if det.is_some() {
        header.push("detC".into());
    }
    header.push("trace_error".into());

    let mut table = Table::new(header);
    for n in 0..cfg.grid.len() {
        let t = &traj.populations[n];
        let rho = traj.apply_unchecked(&cfg.initial_state, n);
        let mut row = vec![cfg.grid.node(n)];
        row.extend((0..d).flat_map(|i| (0..d).map(move |j| t[(i, j)])));
        row.extend(pairs(d).map(|kl| traj.coherences[n][kl].abs()));
        row.extend(pairs(d).map(|kl| traj.decoherence[n][kl].norm()));
        row.push(witness.min_eigs[n]);
        if let Some(det) = &det {
            row.push(det[n]);
        }
        row.push((rho.trace() - 1.0).norm());
        table.push_numbers(row);
    }
    table.save(output)
}

pub fn restore_cp(cfg: &Validated, tol: f64, gamma_max: f64, output: Option<&Path>) -> Result<(), CliError> {
    let r = minimal_uniform_dephasing(&cfg.spec, &cfg.grid, tol, gamma_max)
        .map_err(CliError::numerical("cp_restore"))?;
    let summary = format!(
        "gamma_star = {} (bracket [{}, {}], {} iterations, certified: {})",
        r.gamma_star,
        r.bracket.0,
        r.bracket.1,
        r.iterations,
        r.certified()
    );
    if output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    let mut table = Table::new(
        ["gamma_star", "margin_at_star", "margin_below", "iterations", "bracket_lo", "bracket_hi", "monotone"]
            .map(String::from)
            .to_vec(),
    );
    table.push(vec![
        num(r.gamma_star),
        num(r.margin_at_star),
        r.margin_below.map(num).unwrap_or_default(),
        r.iterations.to_string(),
        num(r.bracket.0),
        num(r.bracket.1),
        r.monotone.map(|m| m.to_string()).unwrap_or_default(),
    ]);
    table.save(output)
}

pub fn fig1(t_max: f64, steps: usize, output: Option<&Path>) -> Result<(), CliError> {
    let grid = TimeGrid::new(t_max, steps).map_err(|e| CliError::Config(format!("--t-max/--steps: {e}")))?;
    let data = fig1_dataset(&grid).map_err(CliError::numerical("qubit_ref"))?;
    let mut table = Table::new(["t", "detC_gz0", "detC_gz0p1", "detC_gz1"].map(String::from).to_vec());
    for n in 0..grid.len() {
        table.push_numbers([grid.node(n), data.det_c[0][n], data.det_c[1][n], data.det_c[2][n]]);
    }
    table.save(output)
}

pub fn sample(
    cfg: &Validated,
    trajectories: usize,
    initial_level: usize,
    noise_samples: usize,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let Dissipation::SemiMarkov(q) = cfg.spec.dissipation() else {
        return Err(CliError::Config("config.kernel.mode: sampling needs a semi-markov kernel".into()));
    };
    let d = q.dim();
    if initial_level >= d {
        return Err(CliError::Config(format!("--initial-level: must be below {d}")));
    }
    if trajectories == 0 {
        return Err(CliError::Config("--trajectories: must be positive".into()));
    }
    let batch = sample_semi_markov(q, initial_level, &cfg.grid, trajectories, cfg.seed)
        .map_err(CliError::numerical("sampler"))?;
    let series = build_t_series(q, &cfg.grid, DEFAULT_SERIES_TOL).map_err(CliError::numerical("semi_markov"))?;

    let noise = match cfg.spec.decoherence() {
        DecoherenceModel::Noise(rates) if noise_samples > 0 => pairs(d)
            .map(|(k, l)| average_dephasing_noise(rates, k, l, &cfg.grid, noise_samples, cfg.seed))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::numerical("sampler"))?,
        _ => Vec::new(),
    };

    let mut header = vec!["t".to_string()];
    for k in 0..d {
        let j = initial_level;
        header.extend([format!("T_hat_{k}{j}"), format!("se_{k}{j}"), format!("T_{k}{j}")]);
    }
    for (k, l) in pairs(d).take(noise.len()) {
        header.extend(["re", "im", "se_re", "se_im"].map(|p| format!("mu_hat_{k}{l}_{p}")));
    }
    let mut table = Table::new(header);
    for n in 0..cfg.grid.len() {
        let mut row = vec![cfg.grid.node(n)];
        for k in 0..d {
            row.extend([batch.frequency(n, k), batch.standard_error(n, k), series[n][(k, initial_level)]]);
        }
        for avg in &noise {
            row.extend([avg.mean[n].re, avg.mean[n].im, avg.se_re[n], avg.se_im[n]]);
        }
        table.push_numbers(row);
    }
    for ((k, l), avg) in pairs(d).zip(&noise) {
        if let Some(rate) = avg.fitted_rate {
            eprintln!("fitted dephasing rate ({k},{l}) = {rate}");
        }
    }
    table.save(output)
}
