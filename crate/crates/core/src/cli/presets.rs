//! Figure presets: fixed configurations for the published parameter sets.

use std::fmt;
use std::str::FromStr;

use super::config::{AxisSpec, BathSection, EmitterSection, Format, OutputSection, RunConfig, SensorSection, SweepSection, Workers};
use super::svg::ColorScale;
use crate::bath::KernelConfig;
use crate::engine::PhononMode;

pub const GAMMA: f64 = 1.0 / 700.0;
pub const RABI: f64 = 0.05;
pub const ALPHA: f64 = 0.027;
pub const NU_C: f64 = 2.2;
pub const TEMPERATURE: f64 = 4.0;
pub const FIG2_LINEWIDTH: f64 = 1e-4;
pub const SENSOR_COUPLING: f64 = 1e-6;
/// Default PSB probe detuning for the two-photon cuts, ps⁻¹.
pub const PSB_PROBE: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig3a,
    Fig3b,
    FigS2,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig2, Preset::Fig3a, Preset::Fig3b, Preset::FigS2];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::FigS2 => "figS2",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset `{s}` (expected fig2, fig3a, fig3b or figS2)"))
    }
}

/// How a preset's results are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Render {
    /// All runs as labeled series in one log-scale plot.
    Lines,
    /// One heatmap per run on a fixed scale.
    Heatmaps(ColorScale),
    /// One heatmap per run on a symmetric-log scale covering every run.
    SharedSymLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetPlan {
    pub preset: Preset,
    pub runs: Vec<(String, RunConfig)>,
    pub render: Render,
    pub title: &'static str,
}

fn emitter() -> EmitterSection {
    EmitterSection { gamma: GAMMA, rabi: RABI, detuning: 0.0 }
}

fn bath(alpha: f64, mode: PhononMode) -> BathSection {
    BathSection { alpha, nu_c: NU_C, temperature_k: TEMPERATURE, mode }
}

fn output(name: &str) -> OutputSection {
    OutputSection { format: Format::Csv, path: None, name: name.to_string(), svg: false }
}

/// Single-photon configuration at the published drive and bath.
pub fn fig2_config(mode: PhononMode) -> RunConfig {
    RunConfig {
        workers: Workers::Auto,
        emitter: emitter(),
        bath: bath(ALPHA, mode),
        sensors: vec![SensorSection { linewidth: FIG2_LINEWIDTH, coupling: SENSOR_COUPLING }],
        sweep: SweepSection {
            axis1: AxisSpec { start: -2.5, stop: 2.5, points: 2001 },
            axis2: None,
            windows: vec![AxisSpec { start: -0.1, stop: 0.1, points: 2001 }],
        },
        quadrature: KernelConfig::default(),
        output: output("fig2"),
    }
}

/// Two-photon map with Γ = 2γ on both sensors; `alpha = 0` disables the bath.
pub fn fig3_config(alpha: f64) -> RunConfig {
    let sensor = SensorSection { linewidth: 2.0 * GAMMA, coupling: SENSOR_COUPLING };
    let axis = AxisSpec { start: -1.0, stop: 1.0, points: 301 };
    RunConfig {
        workers: Workers::Auto,
        emitter: emitter(),
        bath: bath(alpha, PhononMode::Joint),
        sensors: vec![sensor, sensor],
        sweep: SweepSection {
            axis1: axis,
            axis2: Some(axis),
            windows: vec![
                AxisSpec { start: -0.1, stop: 0.1, points: 81 },
                AxisSpec { start: PSB_PROBE - 0.1, stop: PSB_PROBE + 0.1, points: 81 },
            ],
        },
        quadrature: KernelConfig::default(),
        output: output(if alpha == 0.0 { "fig3a" } else { "fig3b" }),
    }
}

pub fn plan(preset: Preset) -> PresetPlan {
    match preset {
        Preset::Fig2 => PresetPlan {
            preset,
            runs: PhononMode::ALL.iter().map(|&m| (m.as_str().to_string(), fig2_config(m))).collect(),
            render: Render::Lines,
            title: "Single-photon spectrum",
        },
        Preset::Fig3a => PresetPlan {
            preset,
            runs: vec![("map".into(), fig3_config(0.0))],
            render: Render::Heatmaps(ColorScale::default()),
            title: "Two-photon correlations without phonons",
        },
        Preset::Fig3b => PresetPlan {
            preset,
            runs: vec![("map".into(), fig3_config(ALPHA))],
            render: Render::Heatmaps(ColorScale::default()),
            title: "Two-photon correlations with phonons",
        },
        Preset::FigS2 => PresetPlan {
            preset,
            runs: vec![("fig3a".into(), fig3_config(0.0)), ("fig3b".into(), fig3_config(ALPHA))],
            render: Render::SharedSymLog,
            title: "Two-photon correlations, logarithmic scale",
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.as_str().parse::<Preset>().unwrap(), p);
        }
        assert!("fig4".parse::<Preset>().is_err());
    }

    #[test]
    fn fig2_matches_published_parameters() {
        let c = fig2_config(PhononMode::Joint);
        assert_eq!(c.emitter.gamma, 1.0 / 700.0);
        assert_eq!(c.emitter.rabi, 0.05);
        assert_eq!((c.bath.alpha, c.bath.temperature_k, c.bath.nu_c), (0.027, 4.0, 2.2));
        assert_eq!((c.sensors[0].linewidth, c.sensors[0].coupling), (1e-4, 1e-6));
        c.validate().unwrap();
        let labels: Vec<String> = plan(Preset::Fig2).runs.into_iter().map(|(l, _)| l).collect();
        assert_eq!(labels, ["joint", "additive", "off"]);
    }

    #[test]
    fn fig3_presets_use_two_gamma_sensors() {
        let a = &plan(Preset::Fig3a).runs[0].1;
        let b = &plan(Preset::Fig3b).runs[0].1;
        assert_eq!(a.bath.alpha, 0.0);
        assert_eq!(b.bath.alpha, ALPHA);
        for c in [a, b] {
            assert!(c.sensors.iter().all(|s| s.linewidth == 2.0 * GAMMA));
            c.validate().unwrap();
            let g = c.grid().unwrap();
            assert!(g.axis1.iter().any(|x| (x - PSB_PROBE).abs() < 1e-12));
            assert!(g.axis1.len() > 301);
        }
    }

    #[test]
    fn presets_serialize_as_valid_configs() {
        for p in Preset::ALL {
            for (_, c) in plan(p).runs {
                assert_eq!(super::super::config::parse_config(&c.to_toml()).unwrap(), c);
            }
        }
    }
}
