//! Run configuration: a flat TOML document of `key = value` pairs, with
//! command-line `key=value` overrides applied before validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

use crate::analysis::FitOptions;
use crate::dynamics::MapParams;
use crate::decoherence::LDM_DEFAULT_CUTOFF;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}` has the wrong type: expected {expected}, found {found}")]
    Type {
        key: String,
        expected: &'static str,
        found: String,
    },
    #[error("key `{key}` is invalid: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unsupported parameters for key `{key}`: {reason}")]
    Unsupported { key: String, reason: String },
    #[error("key `{0}` must be a non-empty list")]
    EmptyList(String),
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LeCurve,
    LeSweep,
    PurityCurve,
    PuritySweep,
    Predict,
    Selftest,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::LeCurve,
        Mode::LeSweep,
        Mode::PurityCurve,
        Mode::PuritySweep,
        Mode::Predict,
        Mode::Selftest,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::LeCurve => "le-curve",
            Mode::LeSweep => "le-sweep",
            Mode::PurityCurve => "purity-curve",
            Mode::PuritySweep => "purity-sweep",
            Mode::Predict => "predict",
            Mode::Selftest => "selftest",
        }
    }

    pub fn is_echo(&self) -> bool {
        matches!(self, Mode::LeCurve | Mode::LeSweep)
    }

    pub fn is_purity(&self) -> bool {
        matches!(self, Mode::PurityCurve | Mode::PuritySweep)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> ConfigResult<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ConfigError::Invalid {
                key: "mode".into(),
                reason: format!("`{s}` is not one of le-curve, le-sweep, purity-curve, purity-sweep, predict, selftest"),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Gdm,
    Dc,
    Ldm,
    Mixture,
}

impl FromStr for ModelName {
    type Err = ConfigError;

    fn from_str(s: &str) -> ConfigResult<Self> {
        match s {
            "gdm" => Ok(ModelName::Gdm),
            "dc" => Ok(ModelName::Dc),
            "ldm" => Ok(ModelName::Ldm),
            "mixture" => Ok(ModelName::Mixture),
            _ => Err(ConfigError::Invalid {
                key: "model".into(),
                reason: format!("`{s}` is not one of gdm, dc, ldm, mixture"),
            }),
        }
    }
}

/// Validated run configuration with defaults applied.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(rename = "N")]
    pub n: usize,
    pub a: i64,
    pub b: i64,
    pub k: f64,
    pub sigma_over_hbar: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub model: Option<ModelName>,
    /// GDM weight of a mixture; the LDM gets the rest.
    pub mixture_weight: f64,
    pub ldm_cutoff: usize,
    /// `None` picks a mode-dependent horizon at run time.
    pub t_max: Option<usize>,
    pub n_states: usize,
    pub seed: u64,
    pub transient_skip: usize,
    pub floor_factor: f64,
    pub out_dir: PathBuf,
    pub memory_cap_gib: f64,
}

impl RunConfig {
    pub fn map_params(&self) -> MapParams {
        // validated at parse time
        MapParams::new(self.a, self.b, self.k).expect("validated map parameters")
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            transient_skip: self.transient_skip,
            floor_factor: self.floor_factor,
        }
    }

    /// Configuration for `torus-echo selftest`, which reads no file.
    pub fn selftest(out_dir: PathBuf) -> Self {
        RunConfig {
            mode: Mode::Selftest,
            n: 8,
            a: 2,
            b: 2,
            k: 0.0,
            sigma_over_hbar: Vec::new(),
            epsilon: Vec::new(),
            model: None,
            mixture_weight: 0.5,
            ldm_cutoff: LDM_DEFAULT_CUTOFF,
            t_max: None,
            n_states: 1,
            seed: 0,
            transient_skip: 2,
            floor_factor: 3.0,
            out_dir,
            memory_cap_gib: 8.0,
        }
    }
}

const KEYS: [&str; 18] = [
    "mode",
    "N",
    "a",
    "b",
    "k",
    "sigma_over_hbar",
    "epsilon",
    "model",
    "mixture_weight",
    "ldm_cutoff",
    "t_max",
    "n_states",
    "seed",
    "transient_skip",
    "floor_factor",
    "out_dir",
    "memory_cap_gib",
    "comment",
];

pub const DEFAULT_ECHO_K: f64 = 0.0002;
pub const DEFAULT_PURITY_K: f64 = 0.01;
pub const DEFAULT_MEMORY_CAP_GIB: f64 = 8.0;

pub fn parse_config(text: &str) -> ConfigResult<RunConfig> {
    parse_config_with::<&str>(text, None, &[])
}

/// Parses `text`, applies `overrides` (`key=value`, value in TOML syntax or a
/// bare string) and, when given, forces the mode.
pub fn parse_config_with<S: AsRef<str>>(text: &str, mode: Option<Mode>, overrides: &[S]) -> ConfigResult<RunConfig> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    for o in overrides {
        let (key, value) = parse_override(o.as_ref())?;
        table.insert(key, value);
    }
    if let Some(m) = mode {
        table.insert("mode".into(), Value::String(m.as_str().into()));
    }
    from_table(&table)
}

pub fn parse_override(s: &str) -> ConfigResult<(String, Value)> {
    let (key, raw) = s.split_once('=').ok_or_else(|| ConfigError::BadOverride(s.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::BadOverride(s.into()));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.into()));
    Ok((key.into(), value))
}

fn type_error(key: &str, expected: &'static str, v: &Value) -> ConfigError {
    ConfigError::Type {
        key: key.into(),
        expected,
        found: v.type_str().into(),
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

struct Reader<'a> {
    table: &'a Table,
}

impl<'a> Reader<'a> {
    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.get(key)
    }

    fn required<T>(&self, key: &str, f: impl Fn(&Self, &str) -> ConfigResult<Option<T>>) -> ConfigResult<T> {
        f(self, key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn int(&self, key: &str) -> ConfigResult<Option<i64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i)),
            Some(v) => Err(type_error(key, "integer", v)),
        }
    }

    fn count(&self, key: &str) -> ConfigResult<Option<usize>> {
        match self.int(key)? {
            None => Ok(None),
            Some(i) if i >= 0 => Ok(Some(i as usize)),
            Some(i) => Err(invalid(key, format!("must be non-negative, got {i}"))),
        }
    }

    fn real(&self, key: &str) -> ConfigResult<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => as_real(v).map(Some).ok_or_else(|| type_error(key, "number", v)),
        }
    }

    fn string(&self, key: &str) -> ConfigResult<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(type_error(key, "string", v)),
        }
    }

    /// A list of numbers; a single number is taken as a one-element list.
    fn reals(&self, key: &str) -> ConfigResult<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| as_real(v).ok_or_else(|| type_error(key, "list of numbers", v)))
                .collect::<ConfigResult<Vec<_>>>()
                .map(Some),
            Some(v) => as_real(v)
                .map(|x| Some(vec![x]))
                .ok_or_else(|| type_error(key, "list of numbers", v)),
        }
    }

    fn seed(&self, key: &str) -> ConfigResult<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(Value::Integer(i)) => Err(invalid(key, format!("must be non-negative, got {i}"))),
            // seeds above i64::MAX do not fit a TOML integer
            Some(Value::String(s)) => s
                .parse::<u64>()
                .map(Some)
                .map_err(|_| invalid(key, format!("`{s}` is not an unsigned 64-bit integer"))),
            Some(v) => Err(type_error(key, "unsigned integer", v)),
        }
    }
}

fn as_real(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn check_list(key: &str, list: &[f64], upper: Option<f64>) -> ConfigResult<()> {
    if list.is_empty() {
        return Err(ConfigError::EmptyList(key.into()));
    }
    for &x in list {
        if !(x > 0.0 && x.is_finite()) {
            return Err(invalid(key, format!("entries must be positive and finite, got {x}")));
        }
        if let Some(u) = upper {
            if x > u {
                return Err(invalid(key, format!("entries must be at most {u}, got {x}")));
            }
        }
    }
    Ok(())
}

fn from_table(table: &Table) -> ConfigResult<RunConfig> {
    if let Some(key) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(key.clone()));
    }
    let r = Reader { table };
    let mode: Mode = r.required("mode", Reader::string)?.parse()?;

    let n = match r.required("N", Reader::int)? {
        n if n <= 0 => return Err(invalid("N", format!("must be positive, got {n}"))),
        n => n as usize,
    };
    let a = r.required("a", Reader::int)?;
    let b = r.required("b", Reader::int)?;
    for (key, v) in [("a", a), ("b", b)] {
        if v <= 0 || v % 2 != 0 {
            return Err(ConfigError::Unsupported {
                key: key.into(),
                reason: format!("must be a positive even integer for the quantized map, got {v}"),
            });
        }
    }
    let default_k = if mode.is_echo() { DEFAULT_ECHO_K } else { DEFAULT_PURITY_K };
    let k = r.real("k")?.unwrap_or(default_k);
    if !(k >= 0.0 && k.is_finite()) {
        return Err(invalid("k", format!("must be finite and non-negative, got {k}")));
    }

    let sigma_over_hbar = r.reals("sigma_over_hbar")?;
    let epsilon = r.reals("epsilon")?;
    let model = r.string("model")?.map(str::parse::<ModelName>).transpose()?;
    if mode.is_echo() {
        let list = sigma_over_hbar.as_deref().ok_or_else(|| ConfigError::Missing("sigma_over_hbar".into()))?;
        check_list("sigma_over_hbar", list, None)?;
    } else if let Some(list) = &sigma_over_hbar {
        check_list("sigma_over_hbar", list, None)?;
    }
    if mode.is_purity() || mode == Mode::Predict {
        let list = epsilon.as_deref().ok_or_else(|| ConfigError::Missing("epsilon".into()))?;
        check_list("epsilon", list, None)?;
    } else if let Some(list) = &epsilon {
        check_list("epsilon", list, None)?;
    }
    if mode.is_purity() && model.is_none() {
        return Err(ConfigError::Missing("model".into()));
    }
    if model == Some(ModelName::Dc) {
        if let Some(list) = &epsilon {
            check_list("epsilon", list, Some(1.0))?;
        }
    }

    let mixture_weight = r.real("mixture_weight")?.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&mixture_weight) {
        return Err(invalid("mixture_weight", format!("must lie in [0, 1], got {mixture_weight}")));
    }
    let ldm_cutoff = r.count("ldm_cutoff")?.unwrap_or(LDM_DEFAULT_CUTOFF);
    if ldm_cutoff < 10 {
        return Err(invalid("ldm_cutoff", format!("must be at least 10, got {ldm_cutoff}")));
    }
    let t_max = r.count("t_max")?;
    if t_max == Some(0) {
        return Err(invalid("t_max", "must be at least 1"));
    }
    let n_states = r.count("n_states")?.unwrap_or(16);
    if n_states == 0 {
        return Err(invalid("n_states", "must be at least 1"));
    }
    let seed = r.seed("seed")?.unwrap_or(0);
    let defaults = FitOptions::default();
    let transient_skip = r.count("transient_skip")?.unwrap_or(defaults.transient_skip);
    let floor_factor = r.real("floor_factor")?.unwrap_or(defaults.floor_factor);
    if !(floor_factor > 0.0 && floor_factor.is_finite()) {
        return Err(invalid("floor_factor", format!("must be positive, got {floor_factor}")));
    }
    let out_dir = PathBuf::from(r.string("out_dir")?.unwrap_or("out"));
    let memory_cap_gib = r.real("memory_cap_gib")?.unwrap_or(DEFAULT_MEMORY_CAP_GIB);
    if !(memory_cap_gib > 0.0) {
        return Err(invalid("memory_cap_gib", format!("must be positive, got {memory_cap_gib}")));
    }
    r.string("comment")?;

    Ok(RunConfig {
        mode,
        n,
        a,
        b,
        k,
        sigma_over_hbar: sigma_over_hbar.unwrap_or_default(),
        epsilon: epsilon.unwrap_or_default(),
        model,
        mixture_weight,
        ldm_cutoff,
        t_max,
        n_states,
        seed,
        transient_skip,
        floor_factor,
        out_dir,
        memory_cap_gib,
    })
}
