//! Run configuration: one TOML file, with `--set key=value` and named flags
//! layered on top before deserialization.

use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use optomech_tomo::io::{ResultFile, StateFile};
use optomech_tomo::oracle::{
    ContinuumDiscretization, OracleSettings, PhotonInput, DEFAULT_MAX_DIMENSION, DEFAULT_TOLERANCE,
};
use optomech_tomo::params::{LorentzianPacket, SystemParams};
use optomech_tomo::reconstruct::{
    admissible_state, general_plan, random_plan, sideband_plan, PlanRule, SamplePlan, SolveOptions,
    DEFAULT_CONDITION_CAP, DEFAULT_SCAN_TOLERANCE,
};
use optomech_tomo::state::{DensityMatrix, MechanicalState, PhononDistribution};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub input: InputSection,
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

/// Either the ratios `g0 / omega_m`, `gamma_c / omega_m` or the raw triple.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub g0_over_omega_m: Option<f64>,
    pub gamma_c_over_omega_m: Option<f64>,
    pub g0: Option<f64>,
    pub gamma_c: Option<f64>,
    pub omega_m: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSection {
    #[default]
    Emission,
    /// Lorentzian packet; `center` and `width` in units of omega_m.
    Scattering { center: f64, width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Thermal { mean_occupation: f64, dim: usize },
    MaximallyMixed { support: usize, dim: Option<usize> },
    Fock { n: usize, dim: Option<usize>, density: Option<bool> },
    /// Pure state with the given Fock amplitudes (normalized on load).
    Superposition { re: Vec<f64>, im: Option<Vec<f64>> },
    /// JSON state file, relative paths resolved against the config file.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Diagonal,
    General,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Analytic,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanSpec {
    /// Sideband peaks (diagonal) or the sideband grid (general).
    Sideband,
    Random { low: f64, high: f64, seed: u64 },
    Explicit { points: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Summation dimension of the kernel model.
    pub n_d: usize,
    /// Summation dimension used to synthesize spectra.
    pub synth_n_d: usize,
    /// Truncation `N` of the reconstructed state.
    pub truncation: usize,
    pub mode: Mode,
    pub engine: Engine,
    pub plan: PlanSpec,
    pub condition_cap: f64,
    pub project: bool,
    pub scan_tolerance: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            n_d: 48,
            synth_n_d: 60,
            truncation: 8,
            mode: Mode::Diagonal,
            engine: Engine::Analytic,
            plan: PlanSpec::Sideband,
            condition_cap: DEFAULT_CONDITION_CAP,
            project: false,
            scan_tolerance: DEFAULT_SCAN_TOLERANCE,
        }
    }
}

/// Detunings written by `synth`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// The reconstruction plan's points.
    #[default]
    Plan,
    Uniform { low: f64, high: f64, points: usize },
    Explicit { points: Vec<f64> },
    /// The oracle's native lattice inside `[low, high]`.
    Oracle { low: f64, high: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    /// Half-width `W` of the continuum band.
    pub window: f64,
    /// Mode spacing `dk`; `modes` takes precedence when given.
    pub spacing: f64,
    pub modes: Option<usize>,
    pub n_d: usize,
    pub t_final: Option<f64>,
    pub tol: f64,
    pub max_dimension: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            window: 60.0,
            spacing: 0.01,
            modes: None,
            n_d: 40,
            t_final: None,
            tol: DEFAULT_TOLERANCE,
            max_dimension: DEFAULT_MAX_DIMENSION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub low: f64,
    pub high: f64,
    pub threshold: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            low: -8.0,
            high: 4.0,
            threshold: 0.03,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Loads `path` (or an empty config), applies `key=value` overrides and
/// deserializes. Relative state-file paths are resolved against `path`.
pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for (key, raw) in overrides {
        set_path(&mut value, key, parse_scalar(raw))?;
    }
    // round-trip through text so deserialization errors quote the offending entry
    let text = toml::to_string(&value).map_err(|e| usage(format!("config: {e}")))?;
    let mut config: RunConfig =
        toml::from_str(&text).map_err(|e| usage(format!("config: {}", e.to_string().trim())))?;
    if let (Some(StateSpec::File { path: state }), Some(base)) =
        (&mut config.state, path.and_then(Path::parent))
    {
        if state.is_relative() {
            *state = base.join(&*state);
        }
    }
    config.params()?;
    Ok(config)
}

fn parse_scalar(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| usage(format!("bad key {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| usage(format!("{key}: {p} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn params(&self) -> Result<SystemParams<f64>, CliError> {
        let s = &self.system;
        let ratios = s.g0_over_omega_m.is_some() || s.gamma_c_over_omega_m.is_some();
        let raw = s.g0.is_some() || s.gamma_c.is_some() || s.omega_m.is_some();
        let params = match (ratios, raw) {
            (true, true) => {
                return Err(usage(
                    "system: give either the ratios (g0_over_omega_m, gamma_c_over_omega_m) or raw g0, gamma_c, omega_m, not both",
                ))
            }
            (false, true) => {
                let need = |v: Option<f64>, name: &str| v.ok_or_else(|| usage(format!("system.{name} is required")));
                SystemParams::from_raw(need(s.g0, "g0")?, need(s.gamma_c, "gamma_c")?, need(s.omega_m, "omega_m")?)
            }
            _ => SystemParams::from_ratios(
                s.g0_over_omega_m.unwrap_or(2.0),
                s.gamma_c_over_omega_m.unwrap_or(0.1),
            ),
        };
        params.map_err(|e| usage(format!("system: {e}")))
    }

    pub fn photon_input(&self) -> Result<PhotonInput<f64>, CliError> {
        Ok(match self.input {
            InputSection::Emission => PhotonInput::Emission,
            InputSection::Scattering { center, width } => PhotonInput::Scattering(
                LorentzianPacket::new(center, width).map_err(|e| usage(format!("input: {e}")))?,
            ),
        })
    }

    /// Whether spectra and kernels come from the time-domain oracle.
    pub fn uses_oracle(&self) -> bool {
        self.numerics.engine == Engine::Oracle || matches!(self.input, InputSection::Scattering { .. })
    }

    pub fn state(&self) -> Result<MechanicalState<f64>, CliError> {
        let spec = self
            .state
            .as_ref()
            .ok_or_else(|| usage("state: a state specification is required"))?;
        let bad = |e: optomech_tomo::Error| usage(format!("state: {e}"));
        Ok(match spec {
            StateSpec::Thermal { mean_occupation, dim } => {
                PhononDistribution::thermal(*mean_occupation, *dim).map_err(bad)?.into()
            }
            StateSpec::MaximallyMixed { support, dim } => {
                PhononDistribution::maximally_mixed(*support, dim.unwrap_or(*support))
                    .map_err(bad)?
                    .into()
            }
            StateSpec::Fock { n, dim, density } => {
                let dim = dim.unwrap_or(n + 1);
                if density.unwrap_or(false) {
                    DensityMatrix::fock(*n, dim).map_err(bad)?.into()
                } else {
                    PhononDistribution::fock(*n, dim).map_err(bad)?.into()
                }
            }
            StateSpec::Superposition { re, im } => {
                let im = im.clone().unwrap_or_else(|| vec![0.0; re.len()]);
                if im.len() != re.len() {
                    return Err(usage("state: re and im must have the same length"));
                }
                let c: Vec<Complex<f64>> = re.iter().zip(&im).map(|(&a, &b)| Complex::new(a, b)).collect();
                DensityMatrix::superposed_fock(&c).map_err(bad)?.into()
            }
            StateSpec::File { path } => read_state(path)?,
        })
    }

    pub fn plan(&self, truncation: usize) -> Result<SamplePlan<f64>, CliError> {
        let params = self.params()?;
        let size = match self.numerics.mode {
            Mode::Diagonal => truncation,
            Mode::General => truncation * truncation,
        };
        let plan = match (&self.numerics.plan, self.numerics.mode) {
            (PlanSpec::Sideband, Mode::Diagonal) => sideband_plan(truncation, &params),
            (PlanSpec::Sideband, Mode::General) => general_plan(truncation, &params),
            (PlanSpec::Random { low, high, seed }, _) => random_plan(size, *low, *high, *seed),
            (PlanSpec::Explicit { points }, _) => {
                if points.len() != size {
                    return Err(usage(format!(
                        "numerics.plan: {} explicit points for a problem of size {size}",
                        points.len()
                    )));
                }
                SamplePlan::explicit(points.clone())
            }
        };
        plan.map_err(|e| usage(format!("numerics.plan: {e}")))
    }

    pub fn plan_rule(&self) -> Result<PlanRule<f64>, CliError> {
        match &self.numerics.plan {
            PlanSpec::Sideband => Ok(PlanRule::Sideband(self.params()?)),
            PlanSpec::Random { low, high, seed } => Ok(PlanRule::RandomUniform {
                low: *low,
                high: *high,
                seed: *seed,
            }),
            PlanSpec::Explicit { .. } => Err(usage("numerics.plan: scans need a sideband or random plan")),
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            condition_cap: self.numerics.condition_cap,
            project: self.numerics.project,
        }
    }

    pub fn discretization(&self) -> Result<ContinuumDiscretization<f64>, CliError> {
        let o = &self.oracle;
        let d = match o.modes {
            Some(m) => ContinuumDiscretization::new(o.window, m),
            None => ContinuumDiscretization::with_spacing(o.window, o.spacing),
        };
        d.map_err(|e| usage(format!("oracle: {e}")))
    }

    pub fn oracle_settings(&self) -> OracleSettings<f64> {
        OracleSettings {
            n_d: self.oracle.n_d,
            t_final: self.oracle.t_final,
            tol: self.oracle.tol,
            max_dimension: self.oracle.max_dimension,
        }
    }
}

/// Reads a state file, or the solution of a reconstruction result file
/// made admissible the same way reconstructions are scored.
pub fn read_state(path: &Path) -> Result<MechanicalState<f64>, CliError> {
    let value: serde_json::Value = optomech_tomo::io::read_json(path)?;
    let bad = |e: &dyn std::fmt::Display| CliError::Io(format!("{}: {e}", path.display()));
    if value.get("solution").is_some() {
        let result: ResultFile = serde_json::from_value(value).map_err(|e| bad(&e))?;
        let solution = result.solution.to_state_unchecked().map_err(|e| bad(&e))?;
        return Ok(admissible_state(&solution));
    }
    let file: StateFile = serde_json::from_value(value).map_err(|e| bad(&e))?;
    file.to_state().map_err(|e| usage(format!("{}: {e}", path.display())))
}
