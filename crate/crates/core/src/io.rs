//! On-disk formats. Spectra are plain columns with a `# key = value` header;
//! states and results are JSON. All quantities are dimensionless ratios
//! (detuning / omega_m, S * omega_m).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reconstruct::{Diagnostics, PlanStrategy, ReconstructionResult};
use crate::spectrum::Spectrum;
use crate::state::{DensityMatrix, MechanicalState, PhononDistribution};

/// Header key whose line is excluded when comparing runs.
pub const TIMESTAMP_KEY: &str = "generated_at";

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumFile {
    /// Header entries in file order.
    pub header: Vec<(String, String)>,
    /// Rows sorted by detuning.
    pub spectrum: Spectrum<f64>,
}

impl SpectrumFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn format_spectrum(header: &[(String, String)], spectrum: &Spectrum<f64>) -> String {
    let mut out = String::new();
    for (k, v) in header {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let sigma = spectrum.sigma();
    let _ = writeln!(
        out,
        "# columns = detuning/omega_m S*omega_m{}",
        if sigma.is_some() { " sigma*omega_m" } else { "" }
    );
    for (i, (d, v)) in spectrum.detunings().iter().zip(spectrum.values()).enumerate() {
        match sigma {
            Some(s) => {
                let _ = writeln!(out, "{d:e} {v:e} {:e}", s[i]);
            }
            None => {
                let _ = writeln!(out, "{d:e} {v:e}");
            }
        }
    }
    out
}

/// Parses a spectrum file. Rows may come in any order; they are sorted.
/// Duplicate detunings, negative values and ragged rows are rejected.
pub fn parse_spectrum(text: &str) -> Result<SpectrumFile> {
    let mut header = Vec::new();
    let mut rows: Vec<(f64, f64, Option<f64>)> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                let key = k.trim();
                if key != "columns" {
                    header.push((key.to_string(), v.trim().to_string()));
                }
            }
            continue;
        }
        let fields: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Io(format!("line {}: {e}", lineno + 1)))?;
        if !(2..=3).contains(&fields.len()) || *width.get_or_insert(fields.len()) != fields.len() {
            return Err(Error::Io(format!(
                "line {}: expected a consistent 2 or 3 columns",
                lineno + 1
            )));
        }
        if fields[1] < 0.0 {
            return Err(Error::Io(format!("line {}: negative spectrum value", lineno + 1)));
        }
        rows.push((fields[0], fields[1], fields.get(2).copied()));
    }
    if rows.is_empty() {
        return Err(Error::Io("spectrum file has no data rows".into()));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Io(format!("duplicate detuning {}", w[0].0)));
    }
    let spectrum = Spectrum::new(
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
    )
    .map_err(|e| Error::Io(e.to_string()))?;
    let spectrum = if width == Some(3) {
        spectrum
            .with_sigma(rows.iter().map(|r| r.2.unwrap()).collect())
            .map_err(|e| Error::Io(e.to_string()))?
    } else {
        spectrum
    };
    Ok(SpectrumFile { header, spectrum })
}

pub fn read_spectrum(path: &Path) -> Result<SpectrumFile> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_spectrum(&text).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// JSON form of a mechanical state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateFile {
    Distribution { probabilities: Vec<f64> },
    /// Row-major `rho[m][n]`.
    Density { real: Vec<Vec<f64>>, imag: Vec<Vec<f64>> },
}

impl StateFile {
    pub fn from_state(state: &MechanicalState<f64>) -> Self {
        match state {
            MechanicalState::Diagonal(p) => StateFile::Distribution {
                probabilities: p.values().to_vec(),
            },
            MechanicalState::General(rho) => {
                let e = rho.elements();
                let rows = |f: fn(&Complex<f64>) -> f64| {
                    (0..e.nrows())
                        .map(|m| (0..e.ncols()).map(|n| f(&e[(m, n)])).collect())
                        .collect()
                };
                StateFile::Density {
                    real: rows(|z| z.re),
                    imag: rows(|z| z.im),
                }
            }
        }
    }

    /// Checked conversion (probabilities or density-matrix invariants).
    pub fn to_state(&self) -> Result<MechanicalState<f64>> {
        Ok(match self {
            StateFile::Distribution { probabilities } => {
                PhononDistribution::new(probabilities.clone())?.into()
            }
            StateFile::Density { .. } => DensityMatrix::new(self.matrix()?)?.into(),
        })
    }

    /// Unchecked conversion, for reconstructed solutions.
    pub fn to_state_unchecked(&self) -> Result<MechanicalState<f64>> {
        Ok(match self {
            StateFile::Distribution { probabilities } => {
                PhononDistribution::unchecked(probabilities.clone()).into()
            }
            StateFile::Density { .. } => DensityMatrix::unchecked(self.matrix()?).into(),
        })
    }

    fn matrix(&self) -> Result<DMatrix<Complex<f64>>> {
        let StateFile::Density { real, imag } = self else {
            unreachable!()
        };
        let dim = real.len();
        let square = |m: &Vec<Vec<f64>>| m.len() == dim && m.iter().all(|r| r.len() == dim);
        if dim == 0 || !square(real) || !square(imag) {
            return Err(Error::InvalidInput(
                "density matrix must be square with matching real and imag parts".into(),
            ));
        }
        Ok(DMatrix::from_fn(dim, dim, |m, n| Complex::new(real[m][n], imag[m][n])))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub strategy: PlanStrategy,
    pub points: Vec<f64>,
}

/// JSON form of a reconstruction. `provenance` carries whatever the caller
/// needs to re-run (parameters, engine settings, input file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub engine: String,
    pub plan: PlanRecord,
    pub solution: StateFile,
    pub raw: StateFile,
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

impl ResultFile {
    pub fn new(result: &ReconstructionResult<f64>, provenance: serde_json::Value) -> Self {
        Self {
            engine: result.engine.clone(),
            plan: PlanRecord {
                strategy: result.plan.strategy().clone(),
                points: result.plan.points().to_vec(),
            },
            solution: StateFile::from_state(&result.solution),
            raw: StateFile::from_state(&result.raw),
            diagnostics: result.diagnostics.clone(),
            provenance,
        }
    }
}
