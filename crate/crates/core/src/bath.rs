//! Phonon bath kernels.
//!
//! Units: frequencies and rates in ps⁻¹, times in ps, coupling α in ps².
//! The correlation function is
//! `C(τ) = ∫₀^∞ dν J(ν) [coth(βν/2) cos ντ − i sin ντ]`
//! and the rate operator needs its one-sided transform
//! `F(λ) = ∫₀^∞ dτ e^{iλτ} C(τ)`, evaluated here in the time domain up to
//! `tau_max`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::quadrature::{self, gk21_nodes, gk21_weights, Tolerance};

/// k_B/ħ in ps⁻¹ K⁻¹.
pub const KB_OVER_HBAR: f64 = 0.1309;

/// Gaussian cutoff is negligible (e^{-64}) beyond this many multiples of ν_c.
const CUTOFF_MULTIPLE: f64 = 8.0;

/// Initial number of uniform τ panels in the fixed rule for F(λ).
const TAU_PANELS: usize = 32;

const MAX_TAU_PANELS: usize = 1024;

/// λ values the fixed τ rule is validated on, ps⁻¹.
const PROBE_LAMBDAS: [f64; 11] = [0.0, -0.5, 0.5, -1.0, 1.0, -2.0, 2.0, -4.0, 4.0, -8.0, 8.0];


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    /// Coupling strength α, ps².
    pub alpha: f64,
    /// Cutoff frequency ν_c, ps⁻¹.
    pub nu_c: f64,
    /// Temperature, K.
    pub temperature: f64,
}

impl BathParams {
    pub fn new(alpha: f64, nu_c: f64, temperature: f64) -> Result<Self> {
        let p = Self { alpha, nu_c, temperature };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha", reason: format!("{} must be >= 0", self.alpha) });
        }
        if !(self.nu_c > 0.0 && self.nu_c.is_finite()) {
            return Err(Error::InvalidParameter { name: "nu_c", reason: format!("{} must be > 0", self.nu_c) });
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "temperature",
                reason: format!("{} must be > 0", self.temperature),
            });
        }
        Ok(())
    }

    /// k_B T / ħ in ps⁻¹.
    pub fn beta_inv(&self) -> f64 {
        KB_OVER_HBAR * self.temperature
    }

    pub fn is_coupled(&self) -> bool {
        self.alpha > 0.0
    }
}

/// A bath spectral density `J(ν)` for ν ≥ 0.
pub trait SpectralDensity: Send + Sync + fmt::Debug {
    fn density(&self, nu: f64) -> f64;

    /// Frequency beyond which `J` is negligible.
    fn upper_limit(&self) -> f64;
}

/// `J(ν) = α ν³ exp(−ν²/ν_c²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperOhmic {
    pub alpha: f64,
    pub nu_c: f64,
}

impl SpectralDensity for SuperOhmic {
    fn density(&self, nu: f64) -> f64 {
        self.alpha * nu.powi(3) * (-(nu * nu) / (self.nu_c * self.nu_c)).exp()
    }

    fn upper_limit(&self) -> f64 {
        CUTOFF_MULTIPLE * self.nu_c
    }
}

pub fn spectral_density(nu: f64, params: &BathParams) -> Result<f64> {
    if nu < 0.0 {
        return Err(Error::NegativeFrequency(nu));
    }
    Ok(SuperOhmic { alpha: params.alpha, nu_c: params.nu_c }.density(nu))
}

/// Bose–Einstein occupation `1/(e^{ν/k_BT} − 1)`.
pub fn bose_occupation(nu: f64, beta_inv: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::NonPositiveFrequency(nu));
    }
    Ok(1.0 / (nu / beta_inv).exp_m1())
}

/// Closed-form polaron shift `δ_P = −α √π ν_c³ / 4` of the super-Ohmic density.
pub fn polaron_shift(params: &BathParams) -> f64 {
    -params.alpha * PI.sqrt() * params.nu_c.powi(3) / 4.0
}

fn thermal_weight(nu: f64, beta_inv: f64) -> f64 {
    1.0 / (0.5 * nu / beta_inv).tanh()
}

fn correlation_integrand(density: &dyn SpectralDensity, nu: f64, tau: f64, beta_inv: f64) -> C64 {
    if nu == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let j = density.density(nu);
    let (s, c) = (nu * tau).sin_cos();
    C64::new(j * thermal_weight(nu, beta_inv) * c, -j * s)
}

/// `∫ J(ν) coth(βν/2) dν = Re C(0)`, the natural scale of the kernel.
fn correlation_scale(density: &dyn SpectralDensity, beta_inv: f64, rel_tol: f64) -> Result<f64> {
    let tol = Tolerance { rel_tol, initial_panels: 4, ..Default::default() };
    let (v, _) = quadrature::integrate_real(
        |nu| correlation_integrand(density, nu, 0.0, beta_inv).re,
        0.0,
        density.upper_limit(),
        tol,
    )?;
    Ok(v)
}

fn correlation_with_scale(density: &dyn SpectralDensity, tau: f64, beta_inv: f64, rel_tol: f64, scale: f64) -> Result<C64> {
    let upper = density.upper_limit();
    let periods = (upper * tau / (2.0 * PI)).ceil() as usize;
    let tol = Tolerance {
        rel_tol,
        abs_tol: rel_tol * scale,
        initial_panels: 4 + periods,
        max_intervals: 8000,
    };
    let r = quadrature::integrate(|nu| Ok(correlation_integrand(density, nu, tau, beta_inv)), 0.0, upper, tol)?;
    let mut value = r.value;
    if tau == 0.0 {
        value.im = 0.0;
    }
    Ok(value)
}

/// Bath correlation function `C(τ)` for the super-Ohmic density, by adaptive
/// quadrature over ν with relative tolerance `rel_tol`.
pub fn bath_correlation(tau: f64, params: &BathParams, rel_tol: f64) -> Result<C64> {
    if tau < 0.0 {
        return Err(Error::InvalidParameter { name: "tau", reason: format!("{tau} must be >= 0") });
    }
    let density = SuperOhmic { alpha: params.alpha, nu_c: params.nu_c };
    let scale = correlation_scale(&density, params.beta_inv(), rel_tol)?;
    correlation_with_scale(&density, tau, params.beta_inv(), rel_tol, scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// Memory cutoff of the τ integral, ps.
    pub tau_max: f64,
    /// Relative tolerance of both the ν and τ quadratures.
    pub tolerance: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { tau_max: 15.0, tolerance: 1e-10 }
    }
}

/// Tabulating evaluator for `C(τ)` and `F(λ)`.
///
/// Both caches are safe under concurrent readers and concurrent insertion of
/// the same key: values are pure functions of the key, so a racing insert
/// writes the same number.
pub struct BathKernel {
    params: BathParams,
    config: KernelConfig,
    density: Arc<dyn SpectralDensity>,
    scale: f64,
    l1_norm: f64,
    truncation_ratio: f64,
    rule: Option<TauRule>,
    correlations: RwLock<HashMap<u64, C64>>,
    increments: RwLock<HashMap<u64, C64>>,
}

/// `e^{iθ} − 1` without cancellation for small θ.
fn exp_i_m1(theta: f64) -> C64 {
    let half = (0.5 * theta).sin();
    C64::new(-2.0 * half * half, theta.sin())
}

/// Fixed composite Gauss–Kronrod rule for `∫₀^{tau_max} e^{iλτ} C(τ) dτ`.
///
/// With one node set for every λ, F is an exact exponential sum and so a
/// smooth function of λ; adaptive refinement per λ would add steps of the
/// size of the tolerance, far larger than F(λ) − F(0) at the tiny eigenvalue
/// gaps the joint Hamiltonian produces.
struct TauRule {
    centers: Vec<f64>,
    /// Node offsets from the panel center, in `gk21_nodes` order.
    offsets: [f64; 21],
    /// Kronrod weight × C(τ) per node, panel-major.
    kronrod: Vec<C64>,
    /// Gauss weight × C(τ) per node, panel-major.
    gauss: Vec<C64>,
    f0: C64,
}

impl TauRule {
    fn new(kernel: &BathKernel, panels: usize) -> Result<Self> {
        let tau_max = kernel.config.tau_max;
        let width = tau_max / panels as f64;
        let (wk, wg) = gk21_weights();
        let mut offsets = [0.0; 21];
        for (o, x) in offsets.iter_mut().zip(gk21_nodes(-0.5 * width, 0.5 * width)) {
            *o = x;
        }
        let mut centers = Vec::with_capacity(panels);
        let mut kronrod = Vec::with_capacity(21 * panels);
        let mut gauss = Vec::with_capacity(21 * panels);
        for p in 0..panels {
            let (a, b) = (width * p as f64, if p + 1 == panels { tau_max } else { width * (p + 1) as f64 });
            centers.push(0.5 * (a + b));
            for (k, tau) in gk21_nodes(a, b).into_iter().enumerate() {
                let c = kernel.correlation(tau)? * (0.5 * (b - a));
                kronrod.push(c * wk[k]);
                gauss.push(c * wg[k]);
            }
        }
        let f0 = kronrod.iter().sum();
        Ok(Self { centers, offsets, kronrod, gauss, f0 })
    }

    /// `F(λ) − F(0)` and the summed Kronrod–Gauss error estimate of `F(λ)`.
    fn increment(&self, lambda: f64) -> (C64, f64) {
        let inner: Vec<C64> = self.offsets.iter().map(|&o| exp_i_m1(lambda * o)).collect();
        let mut total = C64::new(0.0, 0.0);
        let mut error = 0.0;
        for (p, &c) in self.centers.iter().enumerate() {
            let outer = exp_i_m1(lambda * c);
            let mut kronrod = C64::new(0.0, 0.0);
            let mut spread = C64::new(0.0, 0.0);
            for (k, &e) in inner.iter().enumerate() {
                // e^{iλ(c+o)} − 1 = (e^{iλc} − 1) e^{iλo} + (e^{iλo} − 1)
                let shift = outer * (e + 1.0) + e;
                let (wk, wg) = (self.kronrod[21 * p + k], self.gauss[21 * p + k]);
                kronrod += wk * shift;
                spread += (wk - wg) * (shift + 1.0);
            }
            total += kronrod;
            error += spread.norm();
        }
        (total, error)
    }

    /// `F⁽ⁿ⁾(λ) = ∫ (iτ)ⁿ e^{iλτ} C(τ) dτ` and its Kronrod–Gauss error estimate.
    fn derivative(&self, lambda: f64, order: u32) -> (C64, f64) {
        let inner: Vec<C64> = self.offsets.iter().map(|&o| C64::new(0.0, lambda * o).exp()).collect();
        let mut total = C64::new(0.0, 0.0);
        let mut error = 0.0;
        for (p, &c) in self.centers.iter().enumerate() {
            let outer = C64::new(0.0, lambda * c).exp();
            let mut kronrod = C64::new(0.0, 0.0);
            let mut spread = C64::new(0.0, 0.0);
            for (k, (&e, &o)) in inner.iter().zip(&self.offsets).enumerate() {
                let factor = C64::new(0.0, c + o).powu(order) * outer * e;
                let (wk, wg) = (self.kronrod[21 * p + k], self.gauss[21 * p + k]);
                kronrod += wk * factor;
                spread += (wk - wg) * factor;
            }
            total += kronrod;
            error += spread.norm();
        }
        (total, error)
    }

    fn target(&self, value: C64, tolerance: f64, l1_norm: f64) -> f64 {
        (tolerance * value.norm()).max(tolerance * l1_norm)
    }
}

impl fmt::Debug for BathKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BathKernel")
            .field("params", &self.params)
            .field("config", &self.config)
            .field("density", &self.density)
            .field("cached_transforms", &self.cached_len())
            .finish()
    }
}

impl BathKernel {
    pub fn new(params: BathParams, config: KernelConfig) -> Result<Self> {
        let density = Arc::new(SuperOhmic { alpha: params.alpha, nu_c: params.nu_c });
        Self::with_density(params, density, config)
    }

    /// Kernel for an arbitrary spectral density; `params` supplies the
    /// temperature (its α and ν_c are kept only for provenance).
    pub fn with_density(params: BathParams, density: Arc<dyn SpectralDensity>, config: KernelConfig) -> Result<Self> {
        params.validate()?;
        if !(config.tau_max > 0.0) {
            return Err(Error::InvalidParameter { name: "tau_max", reason: format!("{} must be > 0", config.tau_max) });
        }
        if !(config.tolerance > 0.0 && config.tolerance < 1e-2) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                reason: format!("{} must lie in (0, 1e-2)", config.tolerance),
            });
        }
        let scale = correlation_scale(density.as_ref(), params.beta_inv(), config.tolerance)?;
        let mut kernel = Self {
            params,
            config,
            density,
            scale,
            l1_norm: 0.0,
            truncation_ratio: 0.0,
            rule: None,
            correlations: RwLock::new(HashMap::new()),
            increments: RwLock::new(HashMap::new()),
        };
        if scale > 0.0 {
            let tail = kernel.correlation(config.tau_max)?.norm();
            let head = kernel.correlation(0.0)?.norm();
            kernel.truncation_ratio = tail / head;
            if kernel.truncation_ratio > 1e-3 {
                log::warn!(
                    "bath correlation not decayed at tau_max = {} ps: |C(tau_max)|/|C(0)| = {:.3e}",
                    config.tau_max,
                    kernel.truncation_ratio
                );
            }
            let tol = Tolerance { rel_tol: 1e-6, initial_panels: TAU_PANELS, ..Default::default() };
            let l1 = quadrature::integrate(
                |t| Ok(C64::new(kernel.correlation(t)?.norm(), 0.0)),
                0.0,
                config.tau_max,
                tol,
            )?;
            kernel.l1_norm = l1.value.re;
            kernel.rule = Some(kernel.build_rule()?);
        }
        Ok(kernel)
    }

    pub fn params(&self) -> &BathParams {
        &self.params
    }

    /// `∫₀^{tau_max} |C(τ)| dτ`.
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    /// True when `|C(tau_max)| > 1e-3 |C(0)|`.
    pub fn truncation_warning(&self) -> bool {
        self.truncation_ratio > 1e-3
    }

    pub fn truncation_ratio(&self) -> f64 {
        self.truncation_ratio
    }

    /// Memoized `C(τ)`.
    pub fn correlation(&self, tau: f64) -> Result<C64> {
        if self.scale == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let key = tau.to_bits();
        if let Some(v) = self.correlations.read().expect("correlation cache poisoned").get(&key) {
            return Ok(*v);
        }
        let v = correlation_with_scale(
            self.density.as_ref(),
            tau,
            self.params.beta_inv(),
            self.config.tolerance,
            self.scale,
        )?;
        self.correlations.write().expect("correlation cache poisoned").insert(key, v);
        Ok(v)
    }

    /// Refine the fixed τ rule until it meets the tolerance on every probe λ.
    fn build_rule(&self) -> Result<TauRule> {
        let mut panels = TAU_PANELS;
        loop {
            let rule = TauRule::new(self, panels)?;
            let worst = PROBE_LAMBDAS
                .iter()
                .map(|&l| {
                    let (inc, err) = rule.increment(l);
                    err / rule.target(rule.f0 + inc, self.config.tolerance, self.l1_norm)
                })
                .fold(0.0, f64::max);
            if worst <= 1.0 {
                return Ok(rule);
            }
            if panels >= MAX_TAU_PANELS {
                log::warn!("fixed tau rule misses tolerance by a factor {worst:.2}; using adaptive fallback where needed");
                return Ok(rule);
            }
            panels *= 2;
        }
    }

    /// Number of panels in the fixed τ rule (0 for an uncoupled bath).
    pub fn tau_panels(&self) -> usize {
        self.rule.as_ref().map_or(0, |r| r.centers.len())
    }

    /// `F(λ) = ∫₀^{tau_max} e^{iλτ} C(τ) dτ`.
    pub fn half_fourier(&self, lambda: f64) -> Result<C64> {
        match &self.rule {
            None => Ok(C64::new(0.0, 0.0)),
            Some(rule) => Ok(rule.f0 + self.half_fourier_increment(lambda)?),
        }
    }

    /// `F(λ) − F(0)`, accurate relative to its own size as λ → 0. Cached on the
    /// exact value of λ.
    pub fn half_fourier_increment(&self, lambda: f64) -> Result<C64> {
        let Some(rule) = &self.rule else { return Ok(C64::new(0.0, 0.0)) };
        if lambda == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let key = lambda.to_bits();
        if let Some(v) = self.increments.read().expect("transform cache poisoned").get(&key) {
            return Ok(*v);
        }
        let (inc, err) = rule.increment(lambda);
        let v = if err <= rule.target(rule.f0 + inc, self.config.tolerance, self.l1_norm) {
            inc
        } else {
            log::debug!("fixed tau rule too coarse at lambda = {lambda}; integrating adaptively");
            self.adaptive_transform(lambda)? - rule.f0
        };
        self.increments.write().expect("transform cache poisoned").insert(key, v);
        Ok(v)
    }

    /// `dⁿF/dλⁿ = ∫₀^{tau_max} (iτ)ⁿ e^{iλτ} C(τ) dτ`; order 0 is [`Self::half_fourier`].
    pub fn half_fourier_derivative(&self, lambda: f64, order: u32) -> Result<C64> {
        let Some(rule) = &self.rule else { return Ok(C64::new(0.0, 0.0)) };
        if order == 0 {
            return self.half_fourier(lambda);
        }
        let (value, err) = rule.derivative(lambda, order);
        let scale = self.config.tau_max.powi(order as i32);
        if err <= rule.target(value, self.config.tolerance, self.l1_norm * scale) {
            return Ok(value);
        }
        let tol = Tolerance {
            rel_tol: self.config.tolerance,
            abs_tol: self.config.tolerance * self.l1_norm * scale,
            initial_panels: self.tau_panels().max(TAU_PANELS),
            max_intervals: 8000,
        };
        let r = quadrature::integrate(
            |t| Ok(self.correlation(t)? * C64::new(0.0, lambda * t).exp() * C64::new(0.0, t).powu(order)),
            0.0,
            self.config.tau_max,
            tol,
        )?;
        Ok(r.value)
    }

    fn adaptive_transform(&self, lambda: f64) -> Result<C64> {
        let tol = Tolerance {
            rel_tol: self.config.tolerance,
            abs_tol: self.config.tolerance * self.l1_norm,
            initial_panels: self.tau_panels().max(TAU_PANELS),
            max_intervals: 8000,
        };
        let r = quadrature::integrate(
            |t| Ok(self.correlation(t)? * C64::new(0.0, lambda * t).exp()),
            0.0,
            self.config.tau_max,
            tol,
        )?;
        Ok(r.value)
    }

    pub fn cached_len(&self) -> usize {
        self.increments.read().map(|m| m.len()).unwrap_or(0)
    }

    /// Snapshot of the cached `(λ, F(λ))` pairs, sorted by λ.
    pub fn cached_transforms(&self) -> Vec<(f64, C64)> {
        let f0 = self.rule.as_ref().map_or(C64::new(0.0, 0.0), |r| r.f0);
        let map = self.increments.read().expect("transform cache poisoned");
        let mut out: Vec<_> = map.iter().map(|(&k, &v)| (f64::from_bits(k), f0 + v)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}

/// Free-function form of [`BathKernel::half_fourier`].
pub fn half_fourier(lambda: f64, kernel: &BathKernel) -> Result<C64> {
    kernel.half_fourier(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_bath() -> BathParams {
        BathParams::new(0.027, 2.2, 4.0).unwrap()
    }

    /// Composite Simpson on a uniform grid; deliberately unrelated to the
    /// adaptive Gauss–Kronrod path.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    /// Re F(λ) from the frequency domain: π J(|λ|)(n(|λ|) + 1) for λ > 0,
    /// π J(|λ|) n(|λ|) for λ < 0.
    fn detailed_balance(lambda: f64, p: &BathParams) -> f64 {
        let nu = lambda.abs();
        let j = spectral_density(nu, p).unwrap();
        let n = 1.0 / (nu / p.beta_inv()).exp_m1();
        PI * j * if lambda > 0.0 { n + 1.0 } else { n }
    }

    #[test]
    fn spectral_density_cases() {
        let p = reference_bath();
        assert_eq!(spectral_density(0.0, &p).unwrap(), 0.0);
        let off = BathParams::new(0.0, 2.2, 4.0).unwrap();
        assert_eq!(spectral_density(1.3, &off).unwrap(), 0.0);
        let expected = 0.027 * 2.2f64.powi(3) * (-1.0f64).exp();
        assert!((spectral_density(2.2, &p).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.1058).abs() < 1e-4);
        assert!(matches!(spectral_density(-1.0, &p), Err(Error::NegativeFrequency(_))));
    }

    #[test]
    fn bose_occupation_cases() {
        assert!((bose_occupation(2f64.ln(), 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(bose_occupation(60.0, 1.0).unwrap() < 1e-25);
        assert!((bose_occupation(0.1, 1.0).unwrap() - 9.508331944775044).abs() < 1e-12);
        assert!(matches!(bose_occupation(0.0, 1.0), Err(Error::NonPositiveFrequency(_))));
    }

    #[test]
    fn beta_inv_uses_fixed_conversion() {
        assert!((reference_bath().beta_inv() - 4.0 * 0.1309).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(BathParams::new(-1.0, 2.2, 4.0).is_err());
        assert!(BathParams::new(0.1, 0.0, 4.0).is_err());
        assert!(BathParams::new(0.1, 2.2, 0.0).is_err());
    }

    #[test]
    fn polaron_shift_value() {
        assert_eq!(polaron_shift(&BathParams::new(0.0, 2.2, 4.0).unwrap()), 0.0);
        assert!((polaron_shift(&reference_bath()) + 0.127).abs() < 1e-3);
    }

    #[test]
    fn polaron_shift_matches_quadrature() {
        for &(alpha, nu_c) in &[(0.027, 2.2), (0.01, 1.0), (0.1, 3.5), (0.05, 0.7)] {
            let p = BathParams::new(alpha, nu_c, 4.0).unwrap();
            let j_over_nu = |nu: f64| alpha * nu * nu * (-(nu * nu) / (nu_c * nu_c)).exp();
            let numeric = -simpson(j_over_nu, 0.0, 12.0 * nu_c, 20000);
            let closed = polaron_shift(&p);
            assert!(((closed - numeric) / closed).abs() < 1e-8, "{closed} vs {numeric}");
        }
    }

    #[test]
    fn correlation_zero_coupling() {
        let p = BathParams::new(0.0, 2.2, 4.0).unwrap();
        for tau in [0.0, 0.5, 3.0] {
            assert_eq!(bath_correlation(tau, &p, 1e-10).unwrap(), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn correlation_at_origin_matches_brute_force() {
        let p = reference_bath();
        let c0 = bath_correlation(0.0, &p, 1e-10).unwrap();
        assert_eq!(c0.im, 0.0);
        let b = p.beta_inv();
        let oracle = simpson(
            |nu| if nu == 0.0 { 0.0 } else { 0.027 * nu.powi(3) * (-(nu * nu) / 4.84).exp() / (0.5 * nu / b).tanh() },
            0.0,
            30.0,
            200_000,
        );
        assert!(((c0.re - oracle) / oracle).abs() < 1e-6, "{} vs {oracle}", c0.re);
    }

    #[test]
    fn correlation_conjugate_symmetry() {
        // C(τ)* equals the defining integral with the sine term's sign flipped.
        let p = reference_bath();
        let b = p.beta_inv();
        for tau in [0.3, 1.0, 2.5] {
            let c = bath_correlation(tau, &p, 1e-10).unwrap();
            let flipped = simpson(
                |nu| {
                    if nu == 0.0 {
                        return 0.0;
                    }
                    let j = 0.027 * nu.powi(3) * (-(nu * nu) / 4.84).exp();
                    j * (nu * tau).sin()
                },
                0.0,
                20.0,
                100_000,
            );
            let cos_part = simpson(
                |nu| {
                    if nu == 0.0 {
                        return 0.0;
                    }
                    let j = 0.027 * nu.powi(3) * (-(nu * nu) / 4.84).exp();
                    j * (nu * tau).cos() / (0.5 * nu / b).tanh()
                },
                0.0,
                20.0,
                100_000,
            );
            assert!((c.conj() - C64::new(cos_part, flipped)).norm() < 1e-8);
        }
    }

    #[test]
    fn kernel_zero_coupling_transform_is_zero() {
        let k = BathKernel::new(BathParams::new(0.0, 2.2, 4.0).unwrap(), KernelConfig::default()).unwrap();
        assert_eq!(k.half_fourier(0.3).unwrap(), C64::new(0.0, 0.0));
        assert!(!k.truncation_warning());
    }

    #[test]
    fn transform_imaginary_part_at_zero_is_polaron_shift() {
        let p = reference_bath();
        let k = BathKernel::new(p, KernelConfig::default()).unwrap();
        let f0 = k.half_fourier(0.0).unwrap();
        let dp = polaron_shift(&p);
        assert!(((f0.im - dp) / dp).abs() < 1e-6, "{} vs {dp}", f0.im);
        assert!(f0.re.abs() < 1e-8);
    }

    #[test]
    fn transform_real_part_obeys_detailed_balance() {
        let p = reference_bath();
        let k = BathKernel::new(p, KernelConfig::default()).unwrap();
        for lambda in [0.05, 0.5, 1.0, -0.05, -0.5, -1.0] {
            let f = k.half_fourier(lambda).unwrap();
            let oracle = detailed_balance(lambda, &p);
            assert!(((f.re - oracle) / oracle).abs() < 1e-5, "λ={lambda}: {} vs {oracle}", f.re);
            assert!(f.re >= 0.0);
        }
    }

    #[test]
    fn cache_is_reproducible() {
        let k = BathKernel::new(reference_bath(), KernelConfig::default()).unwrap();
        let first = k.half_fourier(0.731).unwrap();
        assert_eq!(k.cached_len(), 1);
        assert_eq!(k.half_fourier(0.731).unwrap(), first);
        assert_eq!(k.cached_len(), 1);
        let fresh = BathKernel::new(reference_bath(), KernelConfig::default()).unwrap();
        assert_eq!(fresh.half_fourier(0.731).unwrap(), first);
    }

    #[test]
    fn increment_is_smooth_near_zero() {
        // F(λ) − F(0) ≈ λ F'(0) with F'(0) = i ∫ τ C(τ) dτ; ratios expose any
        // noise at the 1e-11 scale.
        let k = BathKernel::new(reference_bath(), KernelConfig::default()).unwrap();
        let a = k.half_fourier_increment(1e-11).unwrap();
        let b = k.half_fourier_increment(2e-11).unwrap();
        let c = k.half_fourier_increment(-1e-11).unwrap();
        assert!((b / a - 2.0).norm() < 1e-8);
        assert!((c / a + 1.0).norm() < 1e-8);
        let adaptive = k.adaptive_transform(0.2).unwrap() - k.half_fourier(0.0).unwrap();
        assert!((k.half_fourier_increment(0.2).unwrap() - adaptive).norm() < 1e-10 * k.l1_norm);
        assert!(k.tau_panels() >= TAU_PANELS);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = BathKernel::new(reference_bath(), KernelConfig::default()).unwrap();
        let h = 1e-3;
        for lambda in [-0.7, 0.0, 0.3] {
            let d1 = k.half_fourier_derivative(lambda, 1).unwrap();
            let d2 = k.half_fourier_derivative(lambda, 2).unwrap();
            let (fm, f0, fp) = (k.half_fourier(lambda - h).unwrap(), k.half_fourier(lambda).unwrap(), k.half_fourier(lambda + h).unwrap());
            assert!(((fp - fm) / (2.0 * h) - d1).norm() < 1e-6 * d1.norm().max(1.0));
            assert!(((fp - 2.0 * f0 + fm) / (h * h) - d2).norm() < 1e-4 * d2.norm().max(1.0));
        }
        assert_eq!(k.half_fourier_derivative(0.4, 0).unwrap(), k.half_fourier(0.4).unwrap());
    }

    #[test]
    fn halving_tolerance_is_monotone() {
        let p = reference_bath();
        let tol = 1e-8;
        let coarse = BathKernel::new(p, KernelConfig { tolerance: tol, ..Default::default() }).unwrap();
        let fine = BathKernel::new(p, KernelConfig { tolerance: tol / 2.0, ..Default::default() }).unwrap();
        for lambda in [-2.0, -0.3, 0.0, 0.05, 0.4, 1.7] {
            coarse.half_fourier(lambda).unwrap();
        }
        for (lambda, value) in coarse.cached_transforms() {
            let refined = fine.half_fourier(lambda).unwrap();
            assert!((refined - value).norm() < tol * value.norm().max(coarse.l1_norm));
        }
    }

    #[test]
    fn truncation_warning_for_short_memory() {
        let k = BathKernel::new(reference_bath(), KernelConfig { tau_max: 0.2, tolerance: 1e-10 }).unwrap();
        assert!(k.truncation_warning());
        let k = BathKernel::new(reference_bath(), KernelConfig::default()).unwrap();
        assert!(!k.truncation_warning());
    }

    #[test]
    fn concurrent_readers_agree() {
        let k = Arc::new(BathKernel::new(reference_bath(), KernelConfig::default()).unwrap());
        let lambdas: Vec<f64> = (0..8).map(|i| -1.0 + 0.25 * i as f64).collect();
        let serial: Vec<C64> = {
            let solo = BathKernel::new(reference_bath(), KernelConfig::default()).unwrap();
            lambdas.iter().map(|&l| solo.half_fourier(l).unwrap()).collect()
        };
        std::thread::scope(|s| {
            for _ in 0..4 {
                let k = Arc::clone(&k);
                let lambdas = lambdas.clone();
                let serial = serial.clone();
                s.spawn(move || {
                    for (l, expected) in lambdas.iter().zip(&serial) {
                        assert_eq!(k.half_fourier(*l).unwrap(), *expected);
                    }
                });
            }
        });
    }
}
