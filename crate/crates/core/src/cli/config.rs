//! TOML run configuration.
//!
//! Text is parsed into a shadow structure whose optional fields record what
//! the user wrote, then resolved into [`RunConfig`] with every default logged.
//! A serialized `RunConfig` spells out all fields, so it reparses unchanged.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bath::{BathParams, KernelConfig};
use crate::engine::PhononMode;
use crate::model::{EmitterParams, SensorParams};
use crate::spectra::{linspace, merge_axes, SensorSpec, SpectrumGrid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid `{field}`: {constraint}")]
    Validation { field: String, constraint: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self::Validation { field: field.into(), constraint: constraint.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

/// `"auto"` or a positive count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workers {
    Auto,
    Count(usize),
}

impl Workers {
    pub fn resolve(self) -> usize {
        match self {
            Workers::Auto => crate::sweep::available_workers(),
            Workers::Count(n) => n,
        }
    }
}

impl Serialize for Workers {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Workers::Auto => s.serialize_str("auto"),
            Workers::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Workers {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(i64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) if s == "auto" => Ok(Workers::Auto),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("workers must be \"auto\" or a count, got `{s}`"))),
            Raw::Count(n) if n >= 1 => Ok(Workers::Count(n as usize)),
            Raw::Count(n) => Err(serde::de::Error::custom(format!("workers must be at least 1, got {n}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    pub gamma: f64,
    pub rabi: f64,
    pub detuning: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub alpha: f64,
    pub nu_c: f64,
    #[serde(rename = "temperature_K")]
    pub temperature_k: f64,
    pub mode: PhononMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub linewidth: f64,
    pub coupling: f64,
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis1: AxisSpec,
    /// Second axis for two-sensor runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<AxisSpec>,
    /// Dense windows merged into every axis.
    pub windows: Vec<AxisSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub format: Format,
    /// Output directory; when absent the CLI decides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// File stem.
    pub name: String,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub workers: Workers,
    pub emitter: EmitterSection,
    pub bath: BathSection,
    pub sensors: Vec<SensorSection>,
    pub sweep: SweepSection,
    pub quadrature: KernelConfig,
    pub output: OutputSection,
}

// Shadow structures: what the user actually wrote.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmitter {
    gamma: Option<f64>,
    rabi: Option<f64>,
    detuning: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBath {
    alpha: Option<f64>,
    nu_c: Option<f64>,
    #[serde(rename = "temperature_K")]
    temperature_k: Option<f64>,
    mode: Option<PhononMode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis1: Option<AxisSpec>,
    axis2: Option<AxisSpec>,
    windows: Option<Vec<AxisSpec>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawQuadrature {
    tau_max: Option<f64>,
    tolerance: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    format: Option<Format>,
    path: Option<PathBuf>,
    name: Option<String>,
    svg: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    workers: Option<Workers>,
    emitter: Option<RawEmitter>,
    bath: Option<RawBath>,
    sensors: Option<Vec<SensorSection>>,
    sweep: Option<RawSweep>,
    quadrature: Option<RawQuadrature>,
    output: Option<RawOutput>,
}

/// Bath used when the config has no `[bath]` entries: phonons switched off.
pub const DEFAULT_BATH: BathSection = BathSection { alpha: 0.0, nu_c: 2.2, temperature_k: 4.0, mode: PhononMode::Joint };

fn or_default<T: fmt::Debug>(value: Option<T>, field: &str, default: T) -> T {
    value.unwrap_or_else(|| {
        log::info!("default applied: {field} = {default:?}");
        default
    })
}

fn required<T>(value: Option<T>, field: &str) -> Result<T, ConfigError> {
    value.ok_or_else(|| ConfigError::invalid(field, "is required"))
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parse, apply defaults and validate.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Parse { line, column, message: e.message().trim().to_string() }
    })?;

    let emitter = required(raw.emitter, "emitter")?;
    let emitter = EmitterSection {
        gamma: required(emitter.gamma, "emitter.gamma")?,
        rabi: required(emitter.rabi, "emitter.rabi")?,
        detuning: or_default(emitter.detuning, "emitter.detuning", 0.0),
    };
    let bath = match raw.bath {
        None => or_default(None, "bath", DEFAULT_BATH),
        Some(b) => BathSection {
            alpha: or_default(b.alpha, "bath.alpha", DEFAULT_BATH.alpha),
            nu_c: or_default(b.nu_c, "bath.nu_c", DEFAULT_BATH.nu_c),
            temperature_k: or_default(b.temperature_k, "bath.temperature_K", DEFAULT_BATH.temperature_k),
            mode: or_default(b.mode, "bath.mode", DEFAULT_BATH.mode),
        },
    };
    let sensors = required(raw.sensors, "sensors")?;
    let sweep = required(raw.sweep, "sweep")?;
    let axis1 = required(sweep.axis1, "sweep.axis1")?;
    let axis2 = match (sensors.len(), sweep.axis2) {
        (2, None) => Some(or_default(None, "sweep.axis2", axis1)),
        (_, axis2) => axis2,
    };
    let sweep = SweepSection { axis1, axis2, windows: or_default(sweep.windows, "sweep.windows", Vec::new()) };
    let q = raw.quadrature.unwrap_or_default();
    let defaults = KernelConfig::default();
    let quadrature = KernelConfig {
        tau_max: or_default(q.tau_max, "quadrature.tau_max", defaults.tau_max),
        tolerance: or_default(q.tolerance, "quadrature.tolerance", defaults.tolerance),
    };
    let o = raw.output.unwrap_or_default();
    let output = OutputSection {
        format: or_default(o.format, "output.format", Format::Csv),
        path: o.path,
        name: or_default(o.name, "output.name", "spectrum".to_string()),
        svg: or_default(o.svg, "output.svg", false),
    };
    let config = RunConfig {
        workers: or_default(raw.workers, "workers", Workers::Auto),
        emitter,
        bath,
        sensors,
        sweep,
        quadrature,
        output,
    };
    config.validate()?;
    Ok(config)
}

fn engine_error(section: &str, e: crate::Error) -> ConfigError {
    match e {
        crate::Error::InvalidParameter { name, reason } => ConfigError::invalid(format!("{section}.{name}"), reason),
        other => ConfigError::invalid(section, other.to_string()),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.sensors.len() {
            0 => return Err(ConfigError::invalid("sensors", "at least one sensor")),
            1 | 2 => {}
            n => return Err(ConfigError::invalid("sensors", format!("sweeps support one or two sensors, got {n}"))),
        }
        if self.sensors.len() == 1 && self.sweep.axis2.is_some() {
            return Err(ConfigError::invalid("sweep.axis2", "only allowed with two sensors"));
        }
        if let Workers::Count(0) = self.workers {
            return Err(ConfigError::invalid("workers", "must be at least 1"));
        }
        if self.output.name.is_empty() || self.output.name.contains(['/', '\\']) {
            return Err(ConfigError::invalid("output.name", "must be a non-empty file stem"));
        }
        let axes = [("sweep.axis1", Some(&self.sweep.axis1)), ("sweep.axis2", self.sweep.axis2.as_ref())];
        for (field, axis) in axes.into_iter().filter_map(|(f, a)| a.map(|a| (f.to_string(), a))).chain(
            self.sweep.windows.iter().enumerate().map(|(k, w)| (format!("sweep.windows[{k}]"), w)),
        ) {
            if axis.points == 0 {
                return Err(ConfigError::invalid(field, "points must be at least 1"));
            }
            if !(axis.start.is_finite() && axis.stop.is_finite()) {
                return Err(ConfigError::invalid(field, "bounds must be finite"));
            }
            if axis.points > 1 && axis.start >= axis.stop {
                return Err(ConfigError::invalid(field, "start must be below stop"));
            }
        }
        let q = &self.quadrature;
        if !(q.tau_max > 0.0 && q.tau_max.is_finite()) {
            return Err(ConfigError::invalid("quadrature.tau_max", "must be > 0"));
        }
        if !(q.tolerance > 0.0 && q.tolerance < 1e-2) {
            return Err(ConfigError::invalid("quadrature.tolerance", "must lie in (0, 1e-2)"));
        }
        self.emitter_params().validate().map_err(|e| engine_error("emitter", e))?;
        self.bath_params()?;
        for (k, s) in self.sensors.iter().enumerate() {
            SensorParams { detuning: 0.0, linewidth: s.linewidth, coupling: s.coupling }
                .validate()
                .map_err(|e| engine_error(&format!("sensors[{k}]"), e))?;
        }
        self.grid().map_err(|e| engine_error("sweep", e))?;
        Ok(())
    }

    pub fn emitter_params(&self) -> EmitterParams {
        EmitterParams::new(self.emitter.detuning, self.emitter.rabi, self.emitter.gamma)
    }

    pub fn bath_params(&self) -> Result<BathParams, ConfigError> {
        BathParams::new(self.bath.alpha, self.bath.nu_c, self.bath.temperature_k).map_err(|e| engine_error("bath", e))
    }

    pub fn sensor_specs(&self) -> Vec<SensorSpec> {
        self.sensors.iter().map(|s| SensorSpec { linewidth: s.linewidth, coupling: s.coupling }).collect()
    }

    fn axis(&self, spec: &AxisSpec) -> Vec<f64> {
        let mut parts = vec![spec.values()];
        parts.extend(self.sweep.windows.iter().map(AxisSpec::values));
        merge_axes(&parts)
    }

    pub fn grid(&self) -> crate::Result<SpectrumGrid> {
        let specs = self.sensor_specs();
        let axis1 = self.axis(&self.sweep.axis1);
        match (specs.as_slice(), &self.sweep.axis2) {
            ([s], _) => SpectrumGrid::one_photon(axis1, *s),
            ([a, b], Some(axis2)) => SpectrumGrid::two_photon(axis1, self.axis(axis2), [*a, *b]),
            ([a, b], None) => SpectrumGrid::two_photon(axis1.clone(), axis1, [*a, *b]),
            _ => Err(crate::Error::TooManySensors(specs.len())),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 over the canonical TOML of everything that determines the data:
    /// the output section and the worker count are excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = Workers::Auto;
        canonical.output = OutputSection { format: Format::Csv, path: None, name: String::new(), svg: false };
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
