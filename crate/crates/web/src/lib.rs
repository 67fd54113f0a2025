//! Browser bindings: spectra and bath-kernel curves for the demo page.
//!
//! Failed grid points come back as NaN.

use wasm_bindgen::prelude::*;

use sensor_spectra::spectra::{linspace, single_photon_spectrum, two_photon_correlation_map, SensorSpec, SpectrumGrid};
use sensor_spectra::{BathKernel, BathParams, EmitterParams, KernelConfig, PhononMode};

const GAMMA: f64 = 1.0 / 700.0;
const NU_C: f64 = 2.2;
const TEMPERATURE: f64 = 4.0;
const COUPLING: f64 = 1e-6;

fn js<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

fn kernel(alpha: f64) -> Result<BathKernel, JsError> {
    let params = BathParams::new(alpha, NU_C, TEMPERATURE).map_err(js)?;
    BathKernel::new(params, KernelConfig::default()).map_err(js)
}

fn values(v: &[Option<f64>]) -> Vec<f64> {
    v.iter().map(|x| x.unwrap_or(f64::NAN)).collect()
}

/// Evenly spaced detunings, for labeling the returned curves.
#[wasm_bindgen]
pub fn axis(start: f64, stop: f64, points: usize) -> Vec<f64> {
    linspace(start, stop, points)
}

/// Single-photon spectrum S(ω) of the driven emitter seen by one sensor.
///
/// `mode` is "joint", "additive" or "off".
#[wasm_bindgen]
pub fn spectrum(rabi: f64, alpha: f64, mode: &str, linewidth: f64, start: f64, stop: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let mode: PhononMode = mode.parse().map_err(js)?;
    let grid = SpectrumGrid::one_photon(linspace(start, stop, points), SensorSpec { linewidth, coupling: COUPLING }).map_err(js)?;
    let r = single_photon_spectrum(&EmitterParams::new(0.0, rabi, GAMMA), &kernel(alpha)?, mode, &grid, 1).map_err(js)?;
    Ok(values(&r.s1))
}

/// g²(ω₁, ω₂) with ω₁ fixed and ω₂ swept, joint phonon treatment.
#[wasm_bindgen]
pub fn g2_cut(rabi: f64, alpha: f64, linewidth: f64, omega1: f64, start: f64, stop: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let sensor = SensorSpec { linewidth, coupling: COUPLING };
    let grid = SpectrumGrid::two_photon(vec![omega1], linspace(start, stop, points), [sensor, sensor]).map_err(js)?;
    let r = two_photon_correlation_map(&EmitterParams::new(0.0, rabi, GAMMA), &kernel(alpha)?, PhononMode::Joint, &grid, 1)
        .map_err(js)?;
    Ok(values(&r.g2))
}

/// Half-sided bath transform F(λ): real parts followed by imaginary parts.
#[wasm_bindgen]
pub fn bath_kernel(alpha: f64, temperature: f64, start: f64, stop: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let params = BathParams::new(alpha, NU_C, temperature).map_err(js)?;
    let k = BathKernel::new(params, KernelConfig::default()).map_err(js)?;
    let f = linspace(start, stop, points).into_iter().map(|l| k.half_fourier(l)).collect::<Result<Vec<_>, _>>().map_err(js)?;
    Ok(f.iter().map(|z| z.re).chain(f.iter().map(|z| z.im)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_curve_has_both_parts() {
        let f = bath_kernel(0.027, 4.0, -1.0, 1.0, 5).unwrap();
        assert_eq!(f.len(), 10);
        assert!(f[..5].iter().all(|x| *x > 0.0));
    }

    #[test]
    fn spectrum_is_positive() {
        let s = spectrum(0.05, 0.0, "off", 1e-3, -0.1, 0.1, 5).unwrap();
        assert!(s.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn g2_cut_bunches_on_the_diagonal() {
        let g = g2_cut(0.05, 0.027, 2.0 * GAMMA, -0.5, -0.5, -0.5, 1).unwrap();
        assert!(g[0] > 1.2);
    }
}
