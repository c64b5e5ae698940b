//! JSON run configuration and its translation into core types.

use std::path::Path;

use hybridmap_core::hybrid_map::{validate_density, DecoherenceModel, Dissipation, HybridGeneratorSpec};
use hybridmap_core::semi_markov::{JumpKernel, RateKernel};
use hybridmap_core::volterra::{Backend, ExpTerm, GriddedMatrixFn, RegularPart};
use hybridmap_core::{CMatrix, Complex64, HermitianMatrix, RMatrix, TimeGrid};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub levels: usize,
    pub energies: Vec<f64>,
    pub kernel: KernelConfig,
    pub decoherence: DecoherenceConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub initial_state: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Rates,
    SemiMarkov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Exponential,
    Tabulated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GammaConfig {
    Uniform(f64),
    PerPair(Vec<Vec<f64>>),
}

/// `W_ij(t)` (rates mode) or `q_ij(t)` (semi-Markov mode).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub mode: Mode,
    pub family: Family,
    #[serde(default)]
    pub kappa: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub gamma: Option<GammaConfig>,
    /// Per-pair samples on the run grid, `samples[i][j][n]`.
    #[serde(default)]
    pub samples: Option<Vec<Vec<Vec<f64>>>>,
    /// Instantaneous rates `W⁰_ij` (rates mode only).
    #[serde(default)]
    pub delta: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecoherenceConfig {
    /// Complex matrix `D_kl` given as `[re, im]` pairs.
    Gkls { matrix: Vec<Vec<[f64; 2]>> },
    Noise { rates: Vec<f64> },
    Direct { rates: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendConfig {
    #[default]
    Auto,
    Quadrature,
    Embedding,
}

impl From<BackendConfig> for Backend {
    fn from(b: BackendConfig) -> Self {
        match b {
            BackendConfig::Auto => Backend::Auto,
            BackendConfig::Quadrature => Backend::Quadrature,
            BackendConfig::Embedding => Backend::Embedding,
        }
    }
}

/// A configuration checked against every invariant of the core types.
#[derive(Debug, Clone)]
pub struct Validated {
    pub spec: HybridGeneratorSpec,
    pub grid: TimeGrid,
    pub initial_state: CMatrix,
    pub seed: u64,
}

fn schema(path: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {message}"))
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "config".to_string() } else { format!("config.{path}") };
        schema(&path, e.into_inner())
    })
}

fn matrix(path: &str, rows: &[Vec<f64>], d: usize) -> Result<RMatrix, CliError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(schema(path, format!("expected a {d}x{d} matrix")));
    }
    for (i, r) in rows.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            if !x.is_finite() {
                return Err(schema(&format!("{path}[{i}][{j}]"), "must be finite"));
            }
        }
    }
    Ok(RMatrix::from_rows(rows).expect("shape checked"))
}

fn nonnegative(path: &str, m: &RMatrix) -> Result<(), CliError> {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j && m[(i, j)] < 0.0 {
                return Err(schema(&format!("{path}[{i}][{j}]"), "must be nonnegative"));
            }
        }
    }
    Ok(())
}

fn gridded(path: &str, samples: &[Vec<Vec<f64>>], d: usize, grid: TimeGrid) -> Result<GriddedMatrixFn, CliError> {
    if samples.len() != d || samples.iter().any(|r| r.len() != d) {
        return Err(schema(path, format!("expected {d}x{d} sample arrays")));
    }
    let mut entries = Vec::with_capacity(d * d);
    for (i, row) in samples.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            let p = format!("{path}[{i}][{j}]");
            if s.len() != grid.len() {
                return Err(schema(&p, format!("expected {} samples (steps + 1), found {}", grid.len(), s.len())));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(schema(&p, "samples must be finite"));
            }
            entries.push(s.clone());
        }
    }
    GriddedMatrixFn::new(grid, d, entries).map_err(|e| schema(path, e))
}

fn gamma_matrix(path: &str, gamma: &GammaConfig, d: usize) -> Result<RMatrix, CliError> {
    let g = match gamma {
        GammaConfig::Uniform(g) => RMatrix::from_fn(d, d, |_, _| *g),
        GammaConfig::PerPair(rows) => matrix(path, rows, d)?,
    };
    if g.as_slice().iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(schema(path, "decay rates must be positive and finite"));
    }
    Ok(g)
}

impl RunConfig {
    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.grid.t_max, self.grid.steps).map_err(|e| schema("config.grid", e))
    }

    fn dissipation(&self, grid: TimeGrid) -> Result<Dissipation, CliError> {
        let d = self.levels;
        let k = &self.kernel;
        let required = |name: &str| schema(&format!("config.kernel.{name}"), "required for this kernel family");
        let forbid = |present: bool, name: &str, why: &str| {
            if present {
                Err(schema(&format!("config.kernel.{name}"), why))
            } else {
                Ok(())
            }
        };
        match k.family {
            Family::Exponential => forbid(k.samples.is_some(), "samples", "only valid for the tabulated family")?,
            Family::Tabulated => {
                forbid(k.kappa.is_some(), "kappa", "only valid for the exponential family")?;
                forbid(k.gamma.is_some(), "gamma", "only valid for the exponential family")?;
            }
        }
        match k.mode {
            Mode::Rates => {
                let delta = match &k.delta {
                    Some(rows) => {
                        let m = matrix("config.kernel.delta", rows, d)?;
                        nonnegative("config.kernel.delta", &m)?;
                        m
                    }
                    None => RMatrix::zeros(d, d),
                };
                let regular = match k.family {
                    Family::Exponential => {
                        let kappa = matrix("config.kernel.kappa", k.kappa.as_ref().ok_or_else(|| required("kappa"))?, d)?;
                        nonnegative("config.kernel.kappa", &kappa)?;
                        let gamma = gamma_matrix("config.kernel.gamma", k.gamma.as_ref().ok_or_else(|| required("gamma"))?, d)?;
                        let mut terms: Vec<ExpTerm> = Vec::new();
                        for i in 0..d {
                            for j in (0..d).filter(|&j| j != i) {
                                if kappa[(i, j)] == 0.0 {
                                    continue;
                                }
                                let rate = gamma[(i, j)];
                                let pos = match terms.iter().position(|t| t.rate == rate) {
                                    Some(p) => p,
                                    None => {
                                        terms.push(ExpTerm { rate, weights: RMatrix::zeros(d, d) });
                                        terms.len() - 1
                                    }
                                };
                                terms[pos].weights[(i, j)] = kappa[(i, j)];
                            }
                        }
                        if terms.is_empty() {
                            RegularPart::Zero
                        } else {
                            RegularPart::ExpSum(terms)
                        }
                    }
                    Family::Tabulated => RegularPart::Gridded(gridded(
                        "config.kernel.samples",
                        k.samples.as_ref().ok_or_else(|| required("samples"))?,
                        d,
                        grid,
                    )?),
                };
                Ok(Dissipation::Rates(RateKernel::new(delta, regular).map_err(|e| schema("config.kernel", e))?))
            }
            Mode::SemiMarkov => {
                forbid(k.delta.is_some(), "delta", "instantaneous rates are only valid in rates mode")?;
                let q = match k.family {
                    Family::Exponential => {
                        let kappa = matrix("config.kernel.kappa", k.kappa.as_ref().ok_or_else(|| required("kappa"))?, d)?;
                        nonnegative("config.kernel.kappa", &kappa)?;
                        let gamma = gamma_matrix("config.kernel.gamma", k.gamma.as_ref().ok_or_else(|| required("gamma"))?, d)?;
                        JumpKernel::exponential(kappa, gamma).map_err(|e| schema("config.kernel", e))?
                    }
                    Family::Tabulated => JumpKernel::tabulated(gridded(
                        "config.kernel.samples",
                        k.samples.as_ref().ok_or_else(|| required("samples"))?,
                        d,
                        grid,
                    )?),
                };
                Ok(Dissipation::SemiMarkov(q))
            }
        }
    }

    fn decoherence_model(&self) -> Result<DecoherenceModel, CliError> {
        let d = self.levels;
        match &self.decoherence {
            DecoherenceConfig::Gkls { matrix } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return Err(schema("config.decoherence.matrix", format!("expected a {d}x{d} matrix")));
                }
                let m = CMatrix::from_fn(d, d, |k, l| Complex64::new(matrix[k][l][0], matrix[k][l][1]));
                let h = HermitianMatrix::new(m).map_err(|e| schema("config.decoherence.matrix", e))?;
                Ok(DecoherenceModel::Gkls(h))
            }
            DecoherenceConfig::Noise { rates } => {
                if rates.len() != d {
                    return Err(schema("config.decoherence.rates", format!("expected {d} rates")));
                }
                Ok(DecoherenceModel::Noise(rates.clone()))
            }
            DecoherenceConfig::Direct { rates } => {
                Ok(DecoherenceModel::Direct(matrix("config.decoherence.rates", rates, d)?))
            }
        }
    }

    fn initial(&self) -> Result<CMatrix, CliError> {
        let d = self.levels;
        let rho = match &self.initial_state {
            None => CMatrix::from_fn(d, d, |_, _| Complex64::new(1.0 / d as f64, 0.0)),
            Some(v) => {
                if v.len() != d * d {
                    return Err(schema("config.initial_state", format!("expected {} complex entries", d * d)));
                }
                CMatrix::from_fn(d, d, |k, l| Complex64::new(v[k * d + l][0], v[k * d + l][1]))
            }
        };
        validate_density(&rho, d).map_err(|e| schema("config.initial_state", e))?;
        Ok(rho)
    }

    /// Checks the whole configuration; `seed_override` wins over the
    /// configured seed.
    pub fn validate(&self, seed_override: Option<u64>) -> Result<Validated, CliError> {
        if self.levels < 2 {
            return Err(schema("config.levels", "need at least two levels"));
        }
        if self.energies.len() != self.levels {
            return Err(schema("config.energies", format!("expected {} energies", self.levels)));
        }
        if let Some(i) = self.energies.iter().position(|e| !e.is_finite()) {
            return Err(schema(&format!("config.energies[{i}]"), "must be finite"));
        }
        let grid = self.grid()?;
        let dissipation = self.dissipation(grid)?;
        let decoherence = self.decoherence_model()?;
        let spec = HybridGeneratorSpec::new(self.energies.clone(), dissipation, decoherence)
            .map_err(|e| {
                let path = match e {
                    hybridmap_core::Error::InvalidJumpKernel(_) => "config.kernel",
                    hybridmap_core::Error::NotPositiveSemidefinite { .. }
                    | hybridmap_core::Error::InvalidParameter { .. } => "config.decoherence",
                    _ => "config",
                };
                schema(path, e)
            })?
            .with_backend(self.backend.into());
        let initial_state = self.initial()?;
        let seed = seed_override.or(self.seed).unwrap_or(0);
        Ok(Validated { spec, grid, initial_state, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"{
        "levels": 2,
        "energies": [0.0, 1.0],
        "kernel": {"mode": "rates", "family": "exponential", "kappa": [[0, 1], [3, 0]], "gamma": 5},
        "decoherence": {"model": "gkls", "matrix": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]},
        "grid": {"t_max": 5, "steps": 500}
    }"#;

    #[test]
    fn bundled_shape_parses() {
        let v = parse(FIG1).unwrap().validate(None).unwrap();
        assert_eq!(v.grid.len(), 501);
        assert_eq!(v.seed, 0);
    }

    #[test]
    fn errors_carry_paths() {
        let bad = FIG1.replace("\"steps\": 500", "\"steps\": \"many\"");
        let msg = parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("config.grid.steps"), "{msg}");

        let bad = FIG1.replace("[[0, 1], [3, 0]]", "[[0, 1], [-3, 0]]");
        let msg = parse(&bad).unwrap().validate(None).unwrap_err().to_string();
        assert!(msg.contains("config.kernel.kappa[1][0]"), "{msg}");

        let bad = FIG1.replace("\"gkls\"", "\"gauss\"");
        let msg = parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("config.decoherence"), "{msg}");
    }

    #[test]
    fn seed_override_wins() {
        let with_seed = FIG1.replace("\"levels\": 2", "\"levels\": 2, \"seed\": 9");
        assert_eq!(parse(&with_seed).unwrap().validate(None).unwrap().seed, 9);
        assert_eq!(parse(&with_seed).unwrap().validate(Some(4)).unwrap().seed, 4);
    }

    #[test]
    fn excess_mass_is_a_config_error() {
        let bad = FIG1.replace("\"rates\"", "\"semi-markov\"").replace("[[0, 1], [3, 0]]", "[[0, 1], [6, 0]]");
        let msg = parse(&bad).unwrap().validate(None).unwrap_err().to_string();
        assert!(msg.starts_with("config.kernel"), "{msg}");
    }
}
