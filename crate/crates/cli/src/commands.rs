use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use optomech_tomo::fidelity::{fidelity_density_padded, fidelity_distribution_padded};
use optomech_tomo::io::{format_spectrum, read_spectrum, write_json, write_text, ResultFile, TIMESTAMP_KEY};
use optomech_tomo::oracle::{Oracle, PhotonInput};
use optomech_tomo::reconstruct::{
    build_diagonal_problem, build_general_problem, convergence_scan, solve_diagonal, solve_general,
    SamplePlan,
};
use optomech_tomo::spectra::{uniform_grid, EmissionModel, LambdaSource};
use optomech_tomo::spectrum::{relative_l1, relative_linf, Spectrum};
use optomech_tomo::state::{MechanicalState, PhononDistribution};

use crate::config::{self, GridSpec, Mode, RunConfig};
use crate::{CliError, Common};

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut overrides = Vec::new();
    for item in &common.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    let mut named = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            overrides.push((key.to_string(), v));
        }
    };
    named("system.g0_over_omega_m", common.g0.map(|v| format!("{v:?}")));
    named("system.gamma_c_over_omega_m", common.gamma_c.map(|v| format!("{v:?}")));
    named("numerics.n_d", common.n_d.map(|v| v.to_string()));
    named("numerics.truncation", common.truncation.map(|v| v.to_string()));
    named("numerics.plan.seed", common.seed.map(|v| v.to_string()));
    named("numerics.engine", common.engine.map(|e| format!("{:?}", enum_name(&e))));
    named("numerics.mode", common.mode.map(|m| format!("{:?}", enum_name(&m))));
    config::load(common.config.as_deref(), &overrides)
}

fn enum_name<V: serde::Serialize>(v: &V) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|x| x.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn emit(common: &Common, text: &str) -> Result<(), CliError> {
    match &common.out {
        Some(p) => Ok(write_text(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<V: serde::Serialize>(common: &Common, value: &V) -> Result<(), CliError> {
    match &common.out {
        Some(p) => Ok(write_json(p, value)?),
        None => {
            println!("{}", serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?);
            Ok(())
        }
    }
}

fn config_json(config: &RunConfig) -> serde_json::Value {
    serde_json::to_value(config).unwrap_or(serde_json::Value::Null)
}

fn oracle(config: &RunConfig, input: PhotonInput<f64>) -> Result<Oracle<f64>, CliError> {
    Ok(Oracle::new(
        &config.params()?,
        &config.discretization()?,
        input,
        &config.oracle_settings(),
    )?)
}

/// Kernel source for reconstruction: the oracle for scattering or when
/// requested, the closed form otherwise.
fn kernel_source(config: &RunConfig) -> Result<Box<dyn LambdaSource<f64>>, CliError> {
    if config.uses_oracle() {
        Ok(Box::new(oracle(config, config.photon_input()?)?))
    } else {
        Ok(Box::new(EmissionModel::new(config.params()?, config.numerics.n_d)?))
    }
}

fn synthesize(
    config: &RunConfig,
    state: &MechanicalState<f64>,
    grid: &[f64],
    oracle_engine: Option<&Oracle<f64>>,
) -> Result<Spectrum<f64>, CliError> {
    match oracle_engine {
        Some(o) => Ok(o.spectrum(state, Some(grid))?),
        None => Ok(EmissionModel::new(config.params()?, config.numerics.synth_n_d)?.spectrum(state, grid)?),
    }
}

fn spectrum_header(config: &RunConfig, engine: &str, provenance: &str) -> Vec<(String, String)> {
    let p = config.params().expect("validated on load");
    let n_d = if config.uses_oracle() {
        config.oracle.n_d
    } else {
        config.numerics.synth_n_d
    };
    vec![
        (
            TIMESTAMP_KEY.to_string(),
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        ),
        ("provenance".into(), provenance.into()),
        ("engine".into(), engine.into()),
        ("units".into(), "detuning/omega_m, S*omega_m".into()),
        ("g0_over_omega_m".into(), format!("{:?}", p.g0())),
        ("gamma_c_over_omega_m".into(), format!("{:?}", p.gamma_c())),
        ("n_d".into(), n_d.to_string()),
        ("config".into(), config_json(config).to_string()),
    ]
}

pub fn synth(common: &Common) -> Result<(), CliError> {
    let config = load(common)?;
    let state = config.state()?;
    let oracle_engine = if config.uses_oracle() {
        Some(oracle(&config, config.photon_input()?)?)
    } else {
        None
    };
    let grid: Vec<f64> = match &config.grid {
        GridSpec::Plan => config.plan(config.numerics.truncation)?.points().to_vec(),
        GridSpec::Uniform { low, high, points } => uniform_grid(*low, *high, *points),
        GridSpec::Explicit { points } => points.clone(),
        GridSpec::Oracle { low, high } => {
            let o = oracle_engine
                .as_ref()
                .ok_or_else(|| CliError::Usage("grid: the oracle lattice needs numerics.engine = \"oracle\" or a scattering input".into()))?;
            o.grid().into_iter().filter(|x| x >= low && x <= high).collect()
        }
    };
    let mut sorted = grid.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let spectrum = synthesize(&config, &state, &sorted, oracle_engine.as_ref())?;
    let (engine, provenance) = match &oracle_engine {
        Some(o) => (o.engine(), "oracle"),
        None => (format!("analytic(n_d={})", config.numerics.synth_n_d), "analytic"),
    };
    let mut header = spectrum_header(&config, &engine, provenance);
    if let Some(o) = &oracle_engine {
        header.push(("oracle_report".into(), serde_json::to_string(&o.report()).unwrap_or_default()));
    }
    emit(common, &format_spectrum(&header, &spectrum))
}

pub fn reconstruct(common: &Common, spectrum_path: &Path, reference: Option<&Path>) -> Result<(), CliError> {
    let config = load(common)?;
    let file = read_spectrum(spectrum_path)?;
    let plan = config.plan(config.numerics.truncation)?;
    let (values, sigma) = file.spectrum.lookup(plan.points())?;
    let source = kernel_source(&config)?;
    let options = config.solve_options();
    let mut result = match config.numerics.mode {
        Mode::Diagonal => {
            let problem = build_diagonal_problem(&plan, &values, sigma.as_deref(), source.as_ref())?;
            solve_diagonal(&problem, &options)?
        }
        Mode::General => {
            let problem = build_general_problem(&plan, &values, sigma.as_deref(), source.as_ref())?;
            solve_general(&problem, &options)?
        }
    };
    if let Some(r) = reference {
        result = result.with_reference(&config::read_state(r)?);
    }
    let header: serde_json::Map<String, serde_json::Value> = file
        .header
        .iter()
        .filter(|(k, _)| k != TIMESTAMP_KEY)
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    let provenance = json!({
        "config": config_json(&config),
        "spectrum_file": spectrum_path.display().to_string(),
        "spectrum_header": header,
        "reference": reference.map(|r| r.display().to_string()),
    });
    let d = &result.diagnostics;
    eprintln!(
        "condition number {:.3e}, residual {:.3e}{}",
        d.condition_number,
        d.residual_norm,
        d.fidelity.map(|f| format!(", fidelity {f:.6}")).unwrap_or_default()
    );
    emit_json(common, &ResultFile::new(&result, provenance))
}

pub fn validate(common: &Common) -> Result<(), CliError> {
    let config = load(common)?;
    if !matches!(config.photon_input()?, PhotonInput::Emission) {
        return Err(CliError::Usage("validate compares emission spectra; set input.kind = \"emission\"".into()));
    }
    let state = match config.state {
        Some(_) => config.state()?,
        None => PhononDistribution::fock(0, 1)?.into(),
    };
    let o = oracle(&config, PhotonInput::Emission)?;
    let v = &config.validate;
    let grid: Vec<f64> = o.grid().into_iter().filter(|x| *x >= v.low && *x <= v.high).collect();
    if grid.is_empty() {
        return Err(CliError::Usage("validate: no oracle lattice points in [low, high]".into()));
    }
    let oracle_spectrum = o.spectrum(&state, Some(&grid))?;
    let model = EmissionModel::new(config.params()?, config.numerics.synth_n_d)?;
    let analytic = model.spectrum(&state, &grid)?;
    let linf = relative_linf(analytic.values(), oracle_spectrum.values());
    let l1 = relative_l1(analytic.values(), oracle_spectrum.values());
    let pass = linf <= v.threshold;
    let report = json!({
        "pass": pass,
        "linf_relative": linf,
        "l1_relative": l1,
        "threshold": v.threshold,
        "window": [v.low, v.high],
        "points": grid.len(),
        "analytic_engine": model.engine(),
        "oracle_engine": o.engine(),
        "oracle": o.report(),
        "config": config_json(&config),
    });
    eprintln!(
        "L-inf {:.4}%, L1 {:.4}%, threshold {:.2}%: {}",
        linf * 100.0,
        l1 * 100.0,
        v.threshold * 100.0,
        if pass { "pass" } else { "FAIL" }
    );
    emit_json(common, &report)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed(format!("oracle deviation {linf:e} above threshold {}", v.threshold)))
    }
}

pub fn scan(common: &Common, n_min: usize, n_max: usize, spectrum_path: Option<&Path>) -> Result<(), CliError> {
    let config = load(common)?;
    if config.numerics.mode == Mode::General {
        return Err(CliError::Usage("scan reconstructs phonon distributions; use numerics.mode = \"diagonal\"".into()));
    }
    let rule = config.plan_rule()?;
    let source = kernel_source(&config)?;
    let reference = match config.state {
        Some(_) => Some(config.state()?),
        None => None,
    };
    let file = spectrum_path.map(read_spectrum).transpose()?;
    let synth_oracle = if file.is_none() && config.uses_oracle() {
        Some(oracle(&config, config.photon_input()?)?)
    } else {
        None
    };
    let provider = |plan: &SamplePlan<f64>| -> optomech_tomo::Result<Vec<f64>> {
        if let Some(f) = &file {
            return Ok(f.spectrum.lookup(plan.points())?.0);
        }
        let state = reference.as_ref().expect("checked below");
        let s = match &synth_oracle {
            Some(o) => o.spectrum(state, Some(plan.points()))?,
            None => EmissionModel::new(config.params().expect("validated"), config.numerics.synth_n_d)?
                .spectrum(state, plan.points())?,
        };
        Ok(s.values().to_vec())
    };
    if file.is_none() && reference.is_none() {
        return Err(CliError::Usage("scan needs either --spectrum or a state to synthesize from".into()));
    }
    let tol = config.numerics.scan_tolerance;
    let report = convergence_scan(
        provider,
        (n_min, n_max),
        &rule,
        tol,
        source.as_ref(),
        &config.solve_options(),
        reference.as_ref(),
    )?;

    let mut out = String::new();
    let _ = writeln!(out, "# engine = {}", source.engine());
    let _ = writeln!(out, "# tolerance = {tol:e}");
    let _ = writeln!(
        out,
        "# converged_n = {}",
        report.converged_n.map(|n| n.to_string()).unwrap_or_else(|| "none".into())
    );
    if let Some(p) = spectrum_path {
        let _ = writeln!(out, "# spectrum_file = {}", p.display());
    }
    let _ = writeln!(out, "# config = {}", config_json(&config));
    let _ = writeln!(out, "# columns = N converged l1_to_previous fidelity condition_number P_0 .. P_(N-1)");
    for step in &report.history {
        let flag = report.is_converged_at(step.n, tol).map(|c| c.to_string()).unwrap_or_else(|| "unknown".into());
        let l1 = step.l1_to_previous.map(|v| format!("{v:e}")).unwrap_or_else(|| "nan".into());
        match &step.outcome {
            Ok(res) => {
                let fid = res.diagnostics.fidelity.map(|f| format!("{f:e}")).unwrap_or_else(|| "nan".into());
                let p = res.distribution().expect("diagonal scan");
                let values: Vec<String> = p.values().iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(
                    out,
                    "{} {flag} {l1} {fid} {:e} {}",
                    step.n,
                    res.diagnostics.condition_number,
                    values.join(" ")
                );
            }
            Err(msg) => {
                let _ = writeln!(out, "{} {flag} {l1} nan nan # {msg}", step.n);
            }
        }
    }
    emit(common, &out)?;
    match report.converged_n {
        Some(n) => {
            eprintln!("converged at N = {n}");
            Ok(())
        }
        None => Err(CliError::NotConverged(format!(
            "no convergence for N in {n_min}..={n_max} at tolerance {tol:e}"
        ))),
    }
}

pub fn fidelity(a: &Path, b: &Path) -> Result<(), CliError> {
    let (x, y) = (config::read_state(a)?, config::read_state(b)?);
    let f = match (&x, &y) {
        (MechanicalState::Diagonal(p), MechanicalState::Diagonal(q)) => fidelity_distribution_padded(p, q),
        _ => fidelity_density_padded(&x.to_density(), &y.to_density()),
    };
    println!("{f}");
    Ok(())
}
