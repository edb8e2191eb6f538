//! Executes a [`RunConfig`]: computes every curve or sweep row, then writes
//! the CSV tables and `manifest.json` from a single writer.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{dc_rate_prediction, gdm_rate_prediction, sweep_echo, sweep_purity, PurityModel, SweepRow};
use crate::config::{ConfigError, Mode, ModelName, RunConfig};
use crate::decoherence::{evolve_purity, Channel};
use crate::dynamics::{lyapunov_closed_form, Propagator};
use crate::echo::{averaged_le, default_t_max, PerturbationSpec};
use crate::hilbert::Space;
use crate::selftest;

pub const CURVE_HEADER: &str = "t,value,minus_ln_value";
pub const SWEEP_HEADER: &str = "control,gamma,stderr,window_t1,window_t2,n_points,prediction";
pub const PREDICT_HEADER: &str = "epsilon,gdm_rate,dc_rate,lyapunov";

/// Purity horizon when the config leaves `t_max` unset.
pub const DEFAULT_PURITY_T_MAX: usize = 200;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
    #[error("refusing to run: {0}")]
    Resource(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Runtime(_) | RunError::Io { .. } => 2,
            RunError::Resource(_) => 3,
        }
    }
}

impl From<crate::Error> for RunError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::UnsupportedParameters(m) => RunError::Config(ConfigError::Unsupported {
                key: "a/b".into(),
                reason: m,
            }),
            other => RunError::Runtime(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowStatus {
    pub label: String,
    pub control: Option<f64>,
    pub ok: bool,
    pub message: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub rows: Vec<RowStatus>,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn failed_rows(&self) -> impl Iterator<Item = &RowStatus> {
        self.rows.iter().filter(|r| !r.ok)
    }

    /// 0 when every row succeeded, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed_rows().next().is_none() {
            0
        } else {
            2
        }
    }
}

/// Floats in CSV output: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn curve_csv(values: &[f64]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for (t, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{t},{},{}", fmt_float(*v), fmt_float(-v.ln()));
    }
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for row in rows {
        let prediction = row.prediction.map(fmt_float).unwrap_or_default();
        match &row.fit {
            Ok(f) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{prediction}",
                    fmt_float(row.control),
                    fmt_float(f.gamma),
                    fmt_float(f.stderr),
                    f.window.0,
                    f.window.1,
                    f.n_points
                );
            }
            Err(_) => {
                let _ = writeln!(s, "{},,,,,,{prediction}", fmt_float(row.control));
            }
        }
    }
    s
}

fn sweep_status(rows: &[SweepRow]) -> Vec<RowStatus> {
    rows.iter()
        .map(|r| RowStatus {
            label: fmt_float(r.control),
            control: Some(r.control),
            ok: r.fit.is_ok(),
            message: r.fit.as_ref().err().map(|e| e.to_string()),
        })
        .collect()
}

fn ok_row(label: String, control: Option<f64>) -> RowStatus {
    RowStatus {
        label,
        control,
        ok: true,
        message: None,
    }
}

pub fn purity_model(config: &RunConfig) -> Option<PurityModel> {
    config.model.map(|m| match m {
        ModelName::Gdm => PurityModel::Gaussian,
        ModelName::Dc => PurityModel::Depolarizing,
        ModelName::Ldm => PurityModel::Lorentz {
            cutoff: config.ldm_cutoff,
        },
        ModelName::Mixture => PurityModel::Mixture {
            weight: config.mixture_weight,
            cutoff: config.ldm_cutoff,
        },
    })
}

/// Estimated peak working set in bytes.
pub fn memory_estimate(config: &RunConfig) -> f64 {
    let n = config.n as f64;
    let workers = rayon::current_num_threads() as f64;
    match config.mode {
        // state pair plus FFT scratch per ensemble worker, phase tables
        Mode::LeCurve | Mode::LeSweep => 16.0 * n * (6.0 * workers.min(config.n_states as f64) + 4.0),
        // density matrix, its image, chord array and multiplier per row
        Mode::PurityCurve | Mode::PuritySweep => {
            let concurrent = workers.min(config.epsilon.len().max(1) as f64);
            72.0 * n * n * concurrent + 8.0 * n * n
        }
        Mode::Predict | Mode::Selftest => 0.0,
    }
}

fn check_memory(config: &RunConfig) -> Result<(), RunError> {
    let need = memory_estimate(config);
    let cap = config.memory_cap_gib * (1u64 << 30) as f64;
    if need > cap {
        return Err(RunError::Resource(format!(
            "estimated working set {:.2} GiB exceeds memory_cap_gib = {} (N = {})",
            need / (1u64 << 30) as f64,
            config.memory_cap_gib,
            config.n
        )));
    }
    Ok(())
}

/// Computed tables, keyed by file name, plus row status.
struct Tables {
    files: Vec<(String, String)>,
    rows: Vec<RowStatus>,
}

fn compute(config: &RunConfig) -> Result<Tables, RunError> {
    if config.mode == Mode::Selftest {
        let checks = selftest::run_all();
        let mut csv = String::from("check,passed,detail\n");
        for c in &checks {
            let _ = writeln!(csv, "\"{}\",{},\"{}\"", c.name, c.passed, c.detail);
        }
        let rows = checks
            .into_iter()
            .map(|c| RowStatus {
                ok: c.passed,
                message: (!c.passed).then(|| c.detail.clone()),
                label: c.name,
                control: None,
            })
            .collect();
        return Ok(Tables {
            files: vec![("selftest.csv".into(), csv)],
            rows,
        });
    }

    let space = Space::new(config.n)?;
    let params = config.map_params();
    params.check_quantizable()?;
    let fit = config.fit_options();
    match config.mode {
        Mode::LeCurve => {
            let t_max = match config.t_max {
                Some(t) => t,
                None => default_t_max(&space, &params)?,
            };
            let mut files = Vec::new();
            let mut rows = Vec::new();
            for (i, &s) in config.sigma_over_hbar.iter().enumerate() {
                let pert = PerturbationSpec::from_sigma_over_hbar(&space, params.k, s);
                let curve = averaged_le(&space, &params, &pert, t_max, config.n_states, config.seed)?;
                let name = format!("le_curve_{i}.csv");
                files.push((name.clone(), curve_csv(&curve.values)));
                rows.push(ok_row(name, Some(s)));
            }
            Ok(Tables { files, rows })
        }
        Mode::LeSweep => {
            let t_max = match config.t_max {
                Some(t) => t,
                None => default_t_max(&space, &params)?,
            };
            let rows = sweep_echo(&space, &params, &config.sigma_over_hbar, t_max, config.n_states, config.seed, &fit)?;
            Ok(Tables {
                files: vec![("le_sweep.csv".into(), sweep_csv(&rows))],
                rows: sweep_status(&rows),
            })
        }
        Mode::PurityCurve => {
            let model = purity_model(config).ok_or_else(|| ConfigError::Missing("model".into()))?;
            let t_max = config.t_max.unwrap_or(DEFAULT_PURITY_T_MAX);
            let prop = Propagator::new(space, params)?;
            let rho0 = crate::analysis::purity_initial_state(&space, config.seed)?;
            let mut files = Vec::new();
            let mut rows = Vec::new();
            for (i, &eps) in config.epsilon.iter().enumerate() {
                let channel = Channel::from_kernel(&model.kernel(&space, eps)?)?;
                let values = evolve_purity(&rho0, &prop, &channel, t_max, None)?;
                let name = format!("purity_curve_{i}.csv");
                files.push((name.clone(), curve_csv(&values)));
                rows.push(ok_row(name, Some(eps)));
            }
            Ok(Tables { files, rows })
        }
        Mode::PuritySweep => {
            let model = purity_model(config).ok_or_else(|| ConfigError::Missing("model".into()))?;
            let t_max = config.t_max.unwrap_or(DEFAULT_PURITY_T_MAX);
            let rows = sweep_purity(&space, &params, &model, &config.epsilon, t_max, config.seed, &fit)?;
            Ok(Tables {
                files: vec![(format!("purity_sweep_{}.csv", model.tag()), sweep_csv(&rows))],
                rows: sweep_status(&rows),
            })
        }
        Mode::Predict => {
            let lambda = lyapunov_closed_form(params.a, params.b)?;
            let mut csv = String::from(PREDICT_HEADER);
            csv.push('\n');
            for &eps in &config.epsilon {
                let dc = if eps <= 1.0 { fmt_float(dc_rate_prediction(eps)) } else { String::new() };
                let _ = writeln!(
                    csv,
                    "{},{},{dc},{}",
                    fmt_float(eps),
                    fmt_float(gdm_rate_prediction(eps, config.n)),
                    fmt_float(lambda)
                );
            }
            let rows = config.epsilon.iter().map(|&e| ok_row(fmt_float(e), Some(e))).collect();
            Ok(Tables {
                files: vec![("predict.csv".into(), csv)],
                rows,
            })
        }
        Mode::Selftest => unreachable!("handled above"),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Runs `config` and writes its outputs under `config.out_dir`. Row-level
/// failures do not abort the run; they are reported in the manifest.
pub fn run(config: &RunConfig) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    check_memory(config)?;
    let tables = compute(config)?;
    fs::create_dir_all(&config.out_dir).map_err(|e| RunError::Io {
        path: config.out_dir.clone(),
        message: e.to_string(),
    })?;
    let mut outputs = Vec::new();
    for (name, contents) in &tables.files {
        write_file(&config.out_dir.join(name), contents)?;
        outputs.push(name.clone());
    }
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        rows: tables.rows,
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Runtime(e.to_string()))?;
    write_file(&config.out_dir.join("manifest.json"), &json)?;
    Ok(manifest)
}

/// Selftest without touching the filesystem.
pub fn selftest_table() -> (String, bool) {
    let checks = selftest::run_all();
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in &checks {
        let _ = writeln!(out, "{:width$}  {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    let all = checks.iter().all(|c| c.passed);
    (out, all)
}
