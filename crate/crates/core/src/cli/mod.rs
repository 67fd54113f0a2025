//! Command-line plumbing: configuration, presets, sweeps and file output.
//!
//! All computation finishes before anything is written; files are then
//! produced by a single writer in a fixed order.

pub mod config;
pub mod output;
pub mod presets;
pub mod svg;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bath::BathKernel;
use crate::spectra::{single_photon_spectrum, two_photon_correlation_map, PointFailure, SpectrumResult};
use config::{Format, RunConfig};
use presets::{PresetPlan, Render};
use svg::ColorScale;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SENSOR_SPECTRA_OUT_DIR";

/// Output directory: explicit flag, then the config, then the environment, then `out`.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Evaluate one configuration. One sensor gives S^(1); two give S^(2) and g².
pub fn run_config(config: &RunConfig, workers: usize) -> crate::Result<SpectrumResult> {
    let bath = config.bath_params().map_err(|e| crate::Error::InvalidParameter { name: "bath", reason: e.to_string() })?;
    let kernel = BathKernel::new(bath, config.quadrature)?;
    if kernel.truncation_warning() {
        log::warn!("bath memory not fully captured by tau_max = {}", config.quadrature.tau_max);
    }
    let grid = config.grid()?;
    let emitter = config.emitter_params();
    let started = std::time::Instant::now();
    let mut result = if grid.is_two_photon() {
        two_photon_correlation_map(&emitter, &kernel, config.bath.mode, &grid, workers)?
    } else {
        single_photon_spectrum(&emitter, &kernel, config.bath.mode, &grid, workers)?
    };
    log::info!("{} grid points in {:.1?} on {workers} worker(s)", grid.len(), started.elapsed());
    result.provenance.config_hash = Some(config.hash());
    Ok(result)
}

/// Outcome of one labeled run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub label: String,
    pub config: RunConfig,
    pub result: Result<SpectrumResult, String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        match &self.result {
            Ok(r) => !r.is_complete(),
            Err(_) => true,
        }
    }
}

pub fn execute(runs: &[(String, RunConfig)], workers: usize) -> Vec<RunRecord> {
    runs.iter()
        .map(|(label, config)| {
            log::info!("run `{label}` (config {})", &config.hash()[..12]);
            let result = run_config(config, workers).map_err(|e| e.to_string());
            if let Err(e) = &result {
                log::error!("run `{label}` failed: {e}");
            }
            RunRecord { label: label.clone(), config: config.clone(), result }
        })
        .collect()
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    label: &'a str,
    config_hash: String,
    error: Option<&'a str>,
    failures: &'a [PointFailure],
}

#[derive(Serialize)]
struct Manifest<'a> {
    engine_version: &'a str,
    runs: Vec<ManifestEntry<'a>>,
}

fn manifest(records: &[RunRecord]) -> String {
    let runs = records
        .iter()
        .filter(|r| r.failed())
        .map(|r| ManifestEntry {
            label: &r.label,
            config_hash: r.config.hash(),
            error: r.result.as_ref().err().map(String::as_str),
            failures: r.result.as_ref().map(|x| x.failures.as_slice()).unwrap_or(&[]),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&Manifest { engine_version: crate::ENGINE_VERSION, runs }).expect("manifest serializes");
    text.push('\n');
    text
}

fn stem(name: &str, label: &str, single: bool) -> String {
    if single {
        name.to_string()
    } else {
        format!("{name}_{label}")
    }
}

/// Renders for the successful runs, per `render`.
fn renders(name: &str, title: &str, records: &[RunRecord], render: Render) -> Vec<(String, String)> {
    let ok: Vec<(&str, &SpectrumResult)> = records.iter().filter_map(|r| r.result.as_ref().ok().map(|x| (r.label.as_str(), x))).collect();
    if ok.is_empty() {
        return vec![];
    }
    let single = records.len() == 1;
    let heatmaps = |scale: ColorScale| {
        ok.iter()
            .map(|(label, r)| {
                let heading = if single { title.to_string() } else { format!("{title}: {label}") };
                (format!("{}.svg", stem(name, label, single)), svg::heatmap(r, scale, &heading))
            })
            .collect()
    };
    match render {
        Render::Lines => vec![(format!("{name}.svg"), svg::line_plot(&ok, title))],
        Render::Heatmaps(scale) => heatmaps(scale),
        Render::SharedSymLog => {
            let all: Vec<&SpectrumResult> = ok.iter().map(|(_, r)| *r).collect();
            heatmaps(ColorScale::symlog_covering(&all))
        }
    }
}

/// Files produced for a finished set of runs, in write order.
pub fn artifacts(name: &str, title: &str, records: &[RunRecord], format: Format, render: Option<Render>) -> Vec<(String, String)> {
    let single = records.len() == 1;
    let mut files: Vec<(String, String)> = records
        .iter()
        .filter_map(|r| {
            let result = r.result.as_ref().ok()?;
            Some((format!("{}.{}", stem(name, &r.label, single), format.extension()), output::render(result, &r.label, format)))
        })
        .collect();
    if let Some(render) = render {
        files.extend(renders(name, title, records, render));
    }
    if records.iter().any(RunRecord::failed) {
        files.push((format!("{name}_failures.json"), manifest(records)));
    }
    files
}

pub fn write_artifacts(dir: &Path, files: &[(String, String)]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|(file, text)| {
            let path = dir.join(file);
            fs::write(&path, text)?;
            Ok(path)
        })
        .collect()
}

/// Default render for a plain `run`.
pub fn run_render(config: &RunConfig) -> Render {
    if config.sensors.len() == 2 {
        Render::Heatmaps(ColorScale::default())
    } else {
        Render::Lines
    }
}

pub fn preset_artifacts(plan: &PresetPlan, records: &[RunRecord], format: Format, svg: bool) -> Vec<(String, String)> {
    artifacts(plan.preset.as_str(), plan.title, records, format, svg.then_some(plan.render))
}
