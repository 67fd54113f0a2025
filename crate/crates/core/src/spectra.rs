//! Sensor-method spectra, normalized two-photon correlations, the
//! regression-theorem reference spectrum and peak analysis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bath::{BathKernel, BathParams, KernelConfig};
use crate::engine::{build_liouvillian, steady_state, PhononMode};
use crate::error::{Error, Result};
use crate::linalg::{devec, trace_product, vec_op, Operator, C64};
use crate::model::{build_composite, sensor_bit, CompositeModel, EmitterParams, SensorParams};
use crate::sweep::parallel_map;

/// S^(1) values at or below this are treated as underflow when normalizing.
pub const S1_FLOOR: f64 = 1e-300;

/// Minimum prominence of a spectral peak relative to the global maximum.
pub const PEAK_PROMINENCE: f64 = 0.01;

/// Linewidth and coupling of one sensor; its detuning is set by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub linewidth: f64,
    pub coupling: f64,
}

impl SensorSpec {
    pub fn at(&self, detuning: f64) -> SensorParams {
        SensorParams { detuning, linewidth: self.linewidth, coupling: self.coupling }
    }
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![start],
        _ => {
            let last = (points - 1) as f64;
            (0..points)
                .map(|i| if i + 1 == points { stop } else { start + (stop - start) * (i as f64 / last) })
                .collect()
        }
    }
}

/// Sorted union of several axes; points closer than 1e-12 are merged.
pub fn merge_axes(axes: &[Vec<f64>]) -> Vec<f64> {
    let mut all: Vec<f64> = axes.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|b, a| (*b - *a).abs() <= 1e-12);
    all
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::AxisMismatch(format!("{name} is empty")));
    }
    if axis.iter().any(|x| !x.is_finite()) {
        return Err(Error::AxisMismatch(format!("{name} has non-finite values")));
    }
    if let Some(w) = axis.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::AxisMismatch(format!("{name} is not strictly increasing at {} -> {}", w[0], w[1])));
    }
    Ok(())
}

/// Detunings `ω − ω_L` (ps⁻¹) swept by each sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub axis1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<Vec<f64>>,
    pub sensors: Vec<SensorSpec>,
}

impl SpectrumGrid {
    pub fn one_photon(axis: Vec<f64>, sensor: SensorSpec) -> Result<Self> {
        let grid = Self { axis1: axis, axis2: None, sensors: vec![sensor] };
        grid.validate()?;
        Ok(grid)
    }

    pub fn two_photon(axis1: Vec<f64>, axis2: Vec<f64>, sensors: [SensorSpec; 2]) -> Result<Self> {
        let grid = Self { axis1, axis2: Some(axis2), sensors: sensors.to_vec() };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("axis1", &self.axis1)?;
        if let Some(axis2) = &self.axis2 {
            check_axis("axis2", axis2)?;
        }
        let expected = if self.axis2.is_some() { 2 } else { 1 };
        if self.sensors.len() != expected {
            return Err(Error::InvalidParameter {
                name: "sensors",
                reason: format!("grid with {expected} axes needs {expected} sensors, got {}", self.sensors.len()),
            });
        }
        for s in &self.sensors {
            s.at(0.0).validate()?;
        }
        Ok(())
    }

    pub fn is_two_photon(&self) -> bool {
        self.axis2.is_some()
    }

    /// Number of grid cells.
    pub fn len(&self) -> usize {
        self.axis1.len() * self.axis2.as_ref().map_or(1, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Detunings of cell `index` in row-major order (axis1 outer).
    pub fn point(&self, index: usize) -> Vec<f64> {
        match &self.axis2 {
            None => vec![self.axis1[index]],
            Some(axis2) => vec![self.axis1[index / axis2.len()], axis2[index % axis2.len()]],
        }
    }

    fn sensor_params(&self, index: usize) -> Vec<SensorParams> {
        self.point(index).iter().zip(&self.sensors).map(|(&w, s)| s.at(w)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine_version: String,
    /// `sensor` for the joint master equation, `qrt` for the reference spectrum.
    pub method: String,
    pub mode: PhononMode,
    pub emitter: EmitterParams,
    pub bath: BathParams,
    pub quadrature: KernelConfig,
    pub sensors: Vec<SensorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl Provenance {
    fn new(method: &str, mode: PhononMode, emitter: &EmitterParams, kernel: &BathKernel, sensors: &[SensorSpec]) -> Self {
        Self {
            engine_version: crate::ENGINE_VERSION.to_string(),
            method: method.to_string(),
            mode,
            emitter: *emitter,
            bath: *kernel.params(),
            quadrature: *kernel.config(),
            sensors: sensors.to_vec(),
            config_hash: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    pub detunings: Vec<f64>,
    pub error: String,
}

/// Spectrum values per grid cell; `None` marks a failed or invalid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub grid: SpectrumGrid,
    pub mode: PhononMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s1: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s2: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub g2: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<PointFailure>,
    pub provenance: Provenance,
}

impl SpectrumResult {
    /// The series holding this result's primary values.
    pub fn values(&self) -> &[Option<f64>] {
        if self.grid.is_two_photon() {
            &self.s2
        } else {
            &self.s1
        }
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `⟨ς_{i₁}† … ς_{i_k}† ς_{i_k} … ς_{i₁}⟩` for distinct 0-based sensor indices.
///
/// Distinct two-level sensors commute, so this is the expectation of the
/// product of their (diagonal) number operators.
pub fn normal_ordered_moment(rho: &Operator, model: &CompositeModel, sensor_indices: &[usize]) -> Result<f64> {
    let n = model.sensor_count();
    for (k, &m) in sensor_indices.iter().enumerate() {
        if m >= n {
            return Err(Error::SensorIndexOutOfRange { index: m, count: n });
        }
        if sensor_indices[..k].contains(&m) {
            return Err(Error::DuplicateSensorIndex(m));
        }
    }
    if rho.nrows() != model.dim || rho.ncols() != model.dim {
        return Err(Error::DimensionMismatch { left: rho.nrows(), right: model.dim });
    }
    Ok((0..model.dim)
        .filter(|&i| sensor_indices.iter().all(|&m| sensor_bit(i, m, n) == 1))
        .map(|i| rho[(i, i)].re)
        .sum())
}

/// Physical N-photon spectrum `Π_m Γ_m/(2π ε_m²) · ⟨:n₁…n_N:⟩` at one set of
/// sensor detunings. A dark sensor (ε = 0) gives 0.
pub fn physical_spectrum(
    emitter: &EmitterParams,
    sensors: &[SensorParams],
    kernel: &BathKernel,
    mode: PhononMode,
) -> Result<f64> {
    let model = build_composite(*emitter, sensors)?;
    if sensors.iter().any(|s| s.coupling == 0.0) {
        return Ok(0.0);
    }
    let l = build_liouvillian(&model, mode, kernel)?;
    let rho = steady_state(&l)?;
    let indices: Vec<usize> = (0..sensors.len()).collect();
    let moment = normal_ordered_moment(&rho, &model, &indices)?;
    let prefactor: f64 = sensors.iter().map(|s| s.linewidth / (2.0 * PI * s.coupling * s.coupling)).product();
    Ok(prefactor * moment)
}

/// `g²(ω₁, ω₂)` at one cell, normalized by dedicated single-sensor runs.
pub fn g2_point(emitter: &EmitterParams, sensors: [SensorParams; 2], kernel: &BathKernel, mode: PhononMode) -> Result<f64> {
    let s2 = physical_spectrum(emitter, &sensors, kernel, mode)?;
    let a = physical_spectrum(emitter, &sensors[..1], kernel, mode)?;
    let b = physical_spectrum(emitter, &sensors[1..], kernel, mode)?;
    if a <= S1_FLOOR || b <= S1_FLOOR {
        return Err(Error::SingularSolve(format!("single-photon spectrum underflow ({a:e}, {b:e})")));
    }
    Ok(s2 / (a * b))
}

fn sweep(
    emitter: &EmitterParams,
    kernel: &BathKernel,
    mode: PhononMode,
    grid: &SpectrumGrid,
    workers: usize,
) -> (Vec<Option<f64>>, Vec<PointFailure>) {
    let outcomes = parallel_map(grid.len(), workers, |i| physical_spectrum(emitter, &grid.sensor_params(i), kernel, mode));
    let mut values = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(v) => values.push(Some(v)),
            Err(e) => {
                failures.push(PointFailure { index, detunings: grid.point(index), error: e.to_string() });
                values.push(None);
            }
        }
    }
    let negative = values.iter().flatten().filter(|v| **v < 0.0).count();
    if negative > 0 {
        log::warn!("{negative} grid points returned a negative spectrum value");
    }
    if !failures.is_empty() {
        log::warn!("{} of {} grid points failed", failures.len(), grid.len());
    }
    (values, failures)
}

fn precheck(emitter: &EmitterParams, grid: &SpectrumGrid, two_photon: bool) -> Result<()> {
    emitter.validate()?;
    grid.validate()?;
    if grid.is_two_photon() != two_photon {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: if two_photon { "two-photon spectrum needs two axes".into() } else { "single-photon spectrum needs one axis".into() },
        });
    }
    Ok(())
}

/// `S^(1)_Γ(ω)` on `grid.axis1`. Failed points are recorded, not fatal.
pub fn single_photon_spectrum(
    emitter: &EmitterParams,
    kernel: &BathKernel,
    mode: PhononMode,
    grid: &SpectrumGrid,
    workers: usize,
) -> Result<SpectrumResult> {
    precheck(emitter, grid, false)?;
    let (s1, failures) = sweep(emitter, kernel, mode, grid, workers);
    Ok(SpectrumResult {
        grid: grid.clone(),
        mode,
        s1,
        s2: vec![],
        g2: vec![],
        failures,
        provenance: Provenance::new("sensor", mode, emitter, kernel, &grid.sensors),
    })
}

/// `S^(2)_{Γ₁Γ₂}(ω₁, ω₂)` on the row-major grid; `g2` is left empty.
pub fn two_photon_spectrum(
    emitter: &EmitterParams,
    kernel: &BathKernel,
    mode: PhononMode,
    grid: &SpectrumGrid,
    workers: usize,
) -> Result<SpectrumResult> {
    precheck(emitter, grid, true)?;
    let (s2, failures) = sweep(emitter, kernel, mode, grid, workers);
    Ok(SpectrumResult {
        grid: grid.clone(),
        mode,
        s1: vec![],
        s2,
        g2: vec![],
        failures,
        provenance: Provenance::new("sensor", mode, emitter, kernel, &grid.sensors),
    })
}

fn same_axis(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// `g² = S^(2) / (S^(1)(ω₁) S^(1)(ω₂))` cell by cell.
pub fn g2_normalize(s2: &SpectrumResult, s1_axis1: &SpectrumResult, s1_axis2: &SpectrumResult) -> Result<SpectrumResult> {
    let axis2 = s2.grid.axis2.as_ref().ok_or_else(|| Error::AxisMismatch("S2 result has no second axis".into()))?;
    if s1_axis1.grid.is_two_photon() || s1_axis2.grid.is_two_photon() {
        return Err(Error::AxisMismatch("normalization needs single-photon results".into()));
    }
    if !same_axis(&s2.grid.axis1, &s1_axis1.grid.axis1) || !same_axis(axis2, &s1_axis2.grid.axis1) {
        return Err(Error::AxisMismatch("S1 axes differ from the S2 axes".into()));
    }
    for (k, s1) in [s1_axis1, s1_axis2].iter().enumerate() {
        if s1.grid.sensors[0].linewidth != s2.grid.sensors[k].linewidth {
            return Err(Error::AxisMismatch(format!("S1 for axis {} uses a different sensor linewidth", k + 1)));
        }
    }
    let n2 = axis2.len();
    let g2 = s2
        .s2
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let a = s1_axis1.s1[idx / n2]?;
            let b = s1_axis2.s1[idx % n2]?;
            if a <= S1_FLOOR || b <= S1_FLOOR {
                return None;
            }
            v.map(|v| v / (a * b))
        })
        .collect();
    let mut out = s2.clone();
    out.g2 = g2;
    Ok(out)
}

/// S^(2) plus the dedicated single-sensor runs, normalized to g².
pub fn two_photon_correlation_map(
    emitter: &EmitterParams,
    kernel: &BathKernel,
    mode: PhononMode,
    grid: &SpectrumGrid,
    workers: usize,
) -> Result<SpectrumResult> {
    let s2 = two_photon_spectrum(emitter, kernel, mode, grid, workers)?;
    let axis2 = grid.axis2.clone().expect("checked by two_photon_spectrum");
    let first = SpectrumGrid::one_photon(grid.axis1.clone(), grid.sensors[0])?;
    let s1a = single_photon_spectrum(emitter, kernel, mode, &first, workers)?;
    let s1b = if same_axis(&grid.axis1, &axis2) && grid.sensors[0] == grid.sensors[1] {
        s1a.clone()
    } else {
        single_photon_spectrum(emitter, kernel, mode, &SpectrumGrid::one_photon(axis2, grid.sensors[1])?, workers)?
    };
    let mut out = g2_normalize(&s2, &s1a, &s1b)?;
    for (k, s1) in [&s1a, &s1b].into_iter().enumerate() {
        for f in &s1.failures {
            log::warn!("single-photon normalization failed on axis {} at {:?}: {}", k + 1, f.detunings, f.error);
        }
    }
    out.failures.extend(s1a.failures.iter().chain(&s1b.failures).map(|f| PointFailure {
        index: usize::MAX,
        detunings: f.detunings.clone(),
        error: format!("normalization: {}", f.error),
    }));
    Ok(out)
}

/// Reference spectrum from the quantum regression theorem.
///
/// `S(ω) = (1/π) Re ∫₀^∞ e^{−(Γ/2 + iω)τ} ⟨σ†(τ)σ(0)⟩ dτ`, with the
/// correlation propagated under the emitter-only generator. The damped
/// transform of `e^{Lτ}` is evaluated exactly as the resolvent
/// `(Γ/2 + iω − L)⁻¹`.
pub fn qrt_reference_spectrum(
    emitter: &EmitterParams,
    kernel: &BathKernel,
    mode: PhononMode,
    grid: &SpectrumGrid,
) -> Result<SpectrumResult> {
    if mode == PhononMode::Joint {
        return Err(Error::UnsupportedMode(mode));
    }
    precheck(emitter, grid, false)?;
    let model = build_composite(*emitter, &[])?;
    let l = build_liouvillian(&model, mode, kernel)?;
    let rho = steady_state(&l)?;
    let start = vec_op(&(&model.sigma * &rho));
    let sigma_dag = model.sigma.adjoint();
    let lm = l.matrix().matrix();
    let n = lm.nrows();
    let half_width = grid.sensors[0].linewidth / 2.0;

    let mut s1 = Vec::with_capacity(grid.axis1.len());
    let mut failures = Vec::new();
    for (index, &w) in grid.axis1.iter().enumerate() {
        let s = C64::new(half_width, w);
        let resolvent = DMatrix::from_fn(n, n, |r, c| if r == c { s - lm[(r, c)] } else { -lm[(r, c)] });
        match resolvent.lu().solve(&start) {
            Some(x) => s1.push(Some(trace_product(&sigma_dag, &devec(&x, model.dim)).re / PI)),
            None => {
                failures.push(PointFailure { index, detunings: vec![w], error: "singular resolvent".into() });
                s1.push(None);
            }
        }
    }
    Ok(SpectrumResult {
        grid: grid.clone(),
        mode,
        s1,
        s2: vec![],
        g2: vec![],
        failures,
        provenance: Provenance::new("qrt", mode, emitter, kernel, &grid.sensors),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakAnalysis {
    /// Refined positions of every peak above the prominence floor.
    pub peaks: Vec<f64>,
    pub central: f64,
    pub sidepeaks: [f64; 2],
    /// Mean distance from the sidepeaks to the central peak.
    pub omega_r: f64,
    /// Largest grid step around the three peaks; the uncertainty of `omega_r`.
    pub resolution: f64,
}

fn prominence(values: &[Option<f64>], i: usize) -> f64 {
    let peak = values[i].expect("peak is valid");
    let walk = |range: &mut dyn Iterator<Item = usize>| {
        let mut lowest = peak;
        for j in range {
            match values[j] {
                Some(v) if v > peak => break,
                Some(v) => lowest = lowest.min(v),
                None => break,
            }
        }
        lowest
    };
    let left = walk(&mut (0..i).rev());
    let right = walk(&mut (i + 1..values.len()));
    peak - left.max(right)
}

/// Vertex of the parabola through three points.
fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if !(curvature < 0.0) {
        return x[1];
    }
    (0.5 * (x[0] + x[1]) - d1 / (2.0 * curvature)).clamp(x[0], x[2])
}

/// Central peak and the most prominent peak on either side of it.
pub fn extract_sidepeak_separation(result: &SpectrumResult) -> Result<PeakAnalysis> {
    if result.grid.is_two_photon() {
        return Err(Error::InvalidParameter { name: "result", reason: "peak analysis needs a single-photon result".into() });
    }
    let x = &result.grid.axis1;
    let v = &result.s1;
    let global = v.iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !(global > 0.0) {
        return Err(Error::PeaksNotFound { found: 0 });
    }

    struct Peak {
        index: usize,
        height: f64,
        prominence: f64,
        position: f64,
    }
    let mut peaks = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        let (Some(a), Some(b), Some(c)) = (v[i - 1], v[i], v[i + 1]) else { continue };
        if b > a && b > c {
            let p = prominence(v, i);
            if p >= PEAK_PROMINENCE * global {
                peaks.push(Peak {
                    index: i,
                    height: b,
                    prominence: p,
                    position: parabolic_vertex([x[i - 1], x[i], x[i + 1]], [a, b, c]),
                });
            }
        }
    }
    if peaks.len() < 3 {
        return Err(Error::PeaksNotFound { found: peaks.len() });
    }
    let central = peaks.iter().max_by(|a, b| a.height.total_cmp(&b.height)).expect("nonempty");
    let side = |left: bool| {
        peaks
            .iter()
            .filter(|p| if left { p.index < central.index } else { p.index > central.index })
            .max_by(|a, b| a.prominence.total_cmp(&b.prominence))
    };
    let (Some(lower), Some(upper)) = (side(true), side(false)) else {
        return Err(Error::PeaksNotFound { found: peaks.len() });
    };
    let step_at = |i: usize| (x[i] - x[i - 1]).max(x[i + 1] - x[i]);
    Ok(PeakAnalysis {
        peaks: peaks.iter().map(|p| p.position).collect(),
        central: central.position,
        sidepeaks: [lower.position, upper.position],
        omega_r: 0.5 * ((central.position - lower.position) + (upper.position - central.position)),
        resolution: step_at(lower.index).max(step_at(central.index)).max(step_at(upper.index)),
    })
}

/// Trapezoidal weight of a single-photon result over `lo ≤ |ω| ≤ hi`,
/// returned as `(red, blue)` for `ω < 0` and `ω > 0`.
pub fn band_weight(result: &SpectrumResult, lo: f64, hi: f64) -> (f64, f64) {
    let x = &result.grid.axis1;
    let v = &result.s1;
    let inside = |w: f64| (lo..=hi).contains(&w.abs());
    let (mut red, mut blue) = (0.0, 0.0);
    for i in 1..x.len() {
        let (Some(a), Some(b)) = (v[i - 1], v[i]) else { continue };
        if !(inside(x[i - 1]) && inside(x[i])) || x[i - 1].signum() != x[i].signum() {
            continue;
        }
        let area = 0.5 * (a + b) * (x[i] - x[i - 1]);
        if x[i] < 0.0 {
            red += area;
        } else {
            blue += area;
        }
    }
    (red, blue)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::time_evolve_oracle;
    use crate::linalg::{hermitian_part, max_norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(alpha: f64) -> BathKernel {
        BathKernel::new(BathParams::new(alpha, 2.2, 4.0).unwrap(), KernelConfig::default()).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Operator {
        let a = Operator::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rho = &a * a.adjoint();
        let t = rho.trace();
        rho.unscale(t.re)
    }

    #[test]
    fn linspace_and_merge() {
        let a = linspace(-1.0, 1.0, 5);
        assert_eq!(a, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let merged = merge_axes(&[a, linspace(-0.25, 0.25, 3)]);
        assert_eq!(merged, vec![-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0]);
        assert_eq!(linspace(0.3, 2.0, 1), vec![0.3]);
    }

    #[test]
    fn grid_validation() {
        let s = SensorSpec { linewidth: 1e-4, coupling: 1e-6 };
        assert!(SpectrumGrid::one_photon(vec![0.0, 0.0], s).is_err());
        assert!(SpectrumGrid::one_photon(vec![], s).is_err());
        let g = SpectrumGrid::two_photon(vec![0.0, 1.0], vec![-1.0, 0.0, 1.0], [s, s]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(4), vec![1.0, 0.0]);
    }

    #[test]
    fn moment_of_vacuum_and_single_sensor() {
        let sensors = [
            SensorParams { detuning: 0.0, linewidth: 0.1, coupling: 0.01 },
            SensorParams { detuning: 0.1, linewidth: 0.1, coupling: 0.01 },
        ];
        let model = build_composite(EmitterParams::new(0.0, 0.1, 0.1), &sensors).unwrap();
        let mut vacuum = Operator::zeros(8, 8);
        vacuum[(0, 0)] = C64::new(1.0, 0.0);
        assert_eq!(normal_ordered_moment(&vacuum, &model, &[0, 1]).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_state(&mut rng, 8);
        let n0 = model.sensor_number(0);
        let n1 = model.sensor_number(1);
        let one = normal_ordered_moment(&rho, &model, &[0]).unwrap();
        assert!((one - trace_product(&rho, &n0).re).abs() < 1e-14);
        let two = normal_ordered_moment(&rho, &model, &[0, 1]).unwrap();
        assert!((two - trace_product(&rho, &(&n0 * &n1)).re).abs() < 1e-12);
        assert!(matches!(normal_ordered_moment(&rho, &model, &[1, 1]), Err(Error::DuplicateSensorIndex(1))));
        assert!(matches!(normal_ordered_moment(&rho, &model, &[2]), Err(Error::SensorIndexOutOfRange { .. })));
    }

    #[test]
    fn normal_ordering_matches_operator_product() {
        let sensors = [SensorParams { detuning: 0.0, linewidth: 0.1, coupling: 0.01 }; 2];
        let model = build_composite(EmitterParams::new(0.0, 0.1, 0.1), &sensors).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = random_state(&mut rng, 8);
        let (s1, s2) = (&model.sensor_lowering[0], &model.sensor_lowering[1]);
        let ordered = s1.adjoint() * s2.adjoint() * s2 * s1;
        let direct = trace_product(&rho, &ordered).re;
        assert!((normal_ordered_moment(&rho, &model, &[0, 1]).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn dark_sensor_gives_zero() {
        let emitter = EmitterParams::new(0.0, 0.05, 1.0 / 700.0);
        let sensors = [
            SensorParams { detuning: 0.05, linewidth: 2.0 / 700.0, coupling: 0.0 },
            SensorParams { detuning: -0.05, linewidth: 2.0 / 700.0, coupling: 1e-6 },
        ];
        assert_eq!(physical_spectrum(&emitter, &sensors, &kernel(0.0), PhononMode::Off).unwrap(), 0.0);
    }

    #[test]
    fn g2_of_product_is_one() {
        let s = SensorSpec { linewidth: 1e-3, coupling: 1e-6 };
        let axis = vec![-0.1, 0.0, 0.2];
        let emitter = EmitterParams::new(0.0, 0.05, 1.0 / 700.0);
        let k = kernel(0.0);
        let one = SpectrumGrid::one_photon(axis.clone(), s).unwrap();
        let mut s1 = single_photon_spectrum(&emitter, &k, PhononMode::Off, &one, 1).unwrap();
        s1.s1 = vec![Some(2.0), Some(0.5), Some(4.0)];
        let two = SpectrumGrid::two_photon(axis.clone(), axis.clone(), [s, s]).unwrap();
        let mut s2 = two_photon_spectrum(&emitter, &k, PhononMode::Off, &two, 1).unwrap();
        s2.s2 = (0..9).map(|i| Some(s1.s1[i / 3].unwrap() * s1.s1[i % 3].unwrap())).collect();
        let g2 = g2_normalize(&s2, &s1, &s1).unwrap();
        assert!(g2.g2.iter().all(|g| (g.unwrap() - 1.0).abs() < 1e-15));

        s1.s1[1] = Some(0.0);
        let g2 = g2_normalize(&s2, &s1, &s1).unwrap();
        assert_eq!(g2.g2[1], None);
        assert_eq!(g2.g2[3], None);

        let other = SpectrumGrid::one_photon(vec![-0.1, 0.0, 0.3], s).unwrap();
        let wrong = single_photon_spectrum(&emitter, &k, PhononMode::Off, &other, 1).unwrap();
        assert!(matches!(g2_normalize(&s2, &s1, &wrong), Err(Error::AxisMismatch(_))));
    }

    #[test]
    fn two_photon_map_is_symmetric_for_equal_linewidths() {
        let gamma = 1.0 / 700.0;
        let s = SensorSpec { linewidth: 2.0 * gamma, coupling: 1e-6 };
        let axis = vec![-0.6, -0.05, 0.0, 0.05];
        let grid = SpectrumGrid::two_photon(axis.clone(), axis, [s, s]).unwrap();
        let out = two_photon_correlation_map(&EmitterParams::new(0.0, 0.05, gamma), &kernel(0.027), PhononMode::Joint, &grid, 2).unwrap();
        assert!(out.is_complete());
        for i in 0..4 {
            for j in 0..4 {
                let a = out.g2[i * 4 + j].unwrap();
                let b = out.g2[j * 4 + i].unwrap();
                assert!(a >= 0.0);
                assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{i} {j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn qrt_rejects_joint_mode() {
        let s = SensorSpec { linewidth: 1e-4, coupling: 1e-6 };
        let grid = SpectrumGrid::one_photon(vec![0.0], s).unwrap();
        let r = qrt_reference_spectrum(&EmitterParams::new(0.0, 0.05, 0.1), &kernel(0.0), PhononMode::Joint, &grid);
        assert!(matches!(r, Err(Error::UnsupportedMode(PhononMode::Joint))));
    }

    /// Time-domain regression theorem: propagate σρ with RK4 and integrate
    /// the damped correlation with composite Simpson.
    #[test]
    fn qrt_resolvent_matches_time_domain() {
        let emitter = EmitterParams::new(0.02, 0.4, 0.3);
        let k = kernel(0.027);
        let linewidth = 0.2;
        let axis = vec![-0.3, -0.2, 0.0, 0.17, 0.45];
        let grid = SpectrumGrid::one_photon(axis.clone(), SensorSpec { linewidth, coupling: 1e-6 }).unwrap();
        let reference = qrt_reference_spectrum(&emitter, &k, PhononMode::Additive, &grid).unwrap();

        let model = build_composite(emitter, &[]).unwrap();
        let l = build_liouvillian(&model, PhononMode::Additive, &k).unwrap();
        let rho = steady_state(&l).unwrap();
        let dt = 0.01;
        let steps = 32_000;
        let mut state = &model.sigma * &rho;
        let mut g = Vec::with_capacity(steps + 1);
        for s in 0..=steps {
            if s > 0 {
                state = time_evolve_oracle(&l, &state, dt, dt).unwrap();
            }
            g.push(trace_product(&model.sigma.adjoint(), &state));
        }
        for (i, &w) in axis.iter().enumerate() {
            let mut integral = C64::new(0.0, 0.0);
            for (s, gs) in g.iter().enumerate() {
                let tau = s as f64 * dt;
                let weight = if s == 0 || s == steps { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
                integral += gs * C64::new(-linewidth / 2.0 * tau, -w * tau).exp() * (weight * dt / 3.0);
            }
            let expected = integral.re / PI;
            let got = reference.s1[i].unwrap();
            assert!((got - expected).abs() < 1e-8 * expected.abs().max(1e-3), "{w}: {got} vs {expected}");
        }
    }

    #[test]
    fn qrt_matches_mollow_sensor_spectrum() {
        let gamma = 1.0 / 700.0;
        let emitter = EmitterParams::new(0.0, 0.05, gamma);
        let k = kernel(0.0);
        let grid = SpectrumGrid::one_photon(linspace(-0.08, 0.08, 33), SensorSpec { linewidth: 1e-3, coupling: 1e-6 }).unwrap();
        let qrt = qrt_reference_spectrum(&emitter, &k, PhononMode::Off, &grid).unwrap();
        let sensor = single_photon_spectrum(&emitter, &k, PhononMode::Off, &grid, 1).unwrap();
        for (a, b) in qrt.s1.iter().zip(&sensor.s1) {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert!((a - b).abs() <= 1e-4 * a.abs().max(1e-6), "{a} vs {b}");
        }
    }

    #[test]
    fn weak_drive_incoherent_line() {
        // Ω ≪ γ: incoherent emission is the squared Lorentzian γ³/(ω² + γ²/4)²
        // up to O(Ω²/γ²); convolving with the Γ filter is done numerically.
        let gamma = 1.0;
        let linewidth = 0.07;
        let emitter = EmitterParams::new(0.0, gamma / 10.0, gamma);
        let k = kernel(0.0);
        let axis = linspace(0.0, 1.5, 61);
        let grid = SpectrumGrid::one_photon(axis.clone(), SensorSpec { linewidth, coupling: 1e-6 }).unwrap();
        let qrt = qrt_reference_spectrum(&emitter, &k, PhononMode::Off, &grid).unwrap();

        let model = build_composite(emitter, &[]).unwrap();
        let rho = steady_state(&build_liouvillian(&model, PhononMode::Off, &k).unwrap()).unwrap();
        let coherent = trace_product(&model.sigma, &rho).norm_sqr();
        let coherent_line = |w: f64| coherent * (linewidth / 2.0) / (PI * (w * w + linewidth * linewidth / 4.0));

        let squared = |w: f64| 1.0 / (w * w + gamma * gamma / 4.0).powi(2);
        let filter = |w: f64| (linewidth / 2.0) / (PI * (w * w + linewidth * linewidth / 4.0));
        let convolved = |w: f64| {
            let (v, _) = crate::quadrature::integrate_real(|u| squared(u) * filter(w - u), -60.0, 60.0, crate::quadrature::Tolerance {
                initial_panels: 240,
                ..Default::default()
            })
            .unwrap();
            v
        };
        let incoherent: Vec<f64> = axis.iter().zip(&qrt.s1).map(|(&w, s)| s.unwrap() - coherent_line(w)).collect();
        let oracle: Vec<f64> = axis.iter().map(|&w| convolved(w)).collect();
        let scale = incoherent[0] / oracle[0];
        for (a, b) in incoherent.iter().zip(&oracle) {
            assert!((a - scale * b).abs() < 0.03 * incoherent[0], "{a} vs {}", scale * b);
        }
        let half = incoherent[0] / 2.0;
        let crossing = axis.windows(2).zip(incoherent.windows(2)).find(|(_, v)| v[1] < half).map(|(x, v)| {
            x[0] + (x[1] - x[0]) * (v[0] - half) / (v[0] - v[1])
        });
        let fwhm = 2.0 * crossing.unwrap();
        assert!(fwhm > 0.6 * gamma && fwhm < 0.8 * gamma, "fwhm {fwhm}");
    }

    #[test]
    fn peak_extraction_on_synthetic_triplet() {
        let x = linspace(-1.0, 1.0, 401);
        let lorentz = |w: f64, c: f64, h: f64| h * 0.01 / ((w - c).powi(2) + 0.01);
        let v: Vec<Option<f64>> = x.iter().map(|&w| Some(lorentz(w, 0.0, 3.0) + lorentz(w, -0.5, 1.0) + lorentz(w, 0.5, 1.0) + 1e-4 * (40.0 * w).sin().abs())).collect();
        let k = kernel(0.0);
        let grid = SpectrumGrid::one_photon(x, SensorSpec { linewidth: 0.1, coupling: 1e-3 }).unwrap();
        let result = SpectrumResult {
            s1: v,
            s2: vec![],
            g2: vec![],
            failures: vec![],
            mode: PhononMode::Off,
            provenance: Provenance::new("sensor", PhononMode::Off, &EmitterParams::new(0.0, 0.5, 0.1), &k, &grid.sensors),
            grid,
        };
        let p = extract_sidepeak_separation(&result).unwrap();
        assert!(p.central.abs() < p.resolution);
        assert!((p.omega_r - 0.5).abs() < 2.0 * p.resolution, "{:?}", p);
        assert_eq!(p.peaks.len(), 3);

        let mut flat = result.clone();
        flat.s1 = flat.s1.iter().map(|_| Some(1.0)).collect();
        assert!(matches!(extract_sidepeak_separation(&flat), Err(Error::PeaksNotFound { found: 0 })));
    }

    #[test]
    fn parabola_vertex_is_exact_for_quadratics() {
        let f = |x: f64| -2.0 * (x - 0.137).powi(2) + 1.0;
        let xs = [0.1, 0.13, 0.2];
        assert!((parabolic_vertex(xs, xs.map(f)) - 0.137).abs() < 1e-12);
    }

    #[test]
    fn band_weight_splits_by_sign() {
        let k = kernel(0.0);
        let grid = SpectrumGrid::one_photon(vec![-2.0, -1.0, -0.2, 0.2, 1.0, 2.0], SensorSpec { linewidth: 0.1, coupling: 1e-3 }).unwrap();
        let result = SpectrumResult {
            s1: vec![Some(1.0), Some(1.0), Some(5.0), Some(5.0), Some(2.0), Some(2.0)],
            s2: vec![],
            g2: vec![],
            failures: vec![],
            mode: PhononMode::Off,
            provenance: Provenance::new("sensor", PhononMode::Off, &EmitterParams::new(0.0, 0.5, 0.1), &k, &grid.sensors),
            grid,
        };
        assert_eq!(band_weight(&result, 0.5, 2.0), (1.0, 2.0));
    }

    #[test]
    fn hermitian_random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_state(&mut rng, 4);
        assert!(max_norm(&(hermitian_part(&rho) - &rho)) < 1e-15);
    }
}
