//! Joint emitter–sensor system in the frame rotating at the laser frequency.
//!
//! Tensor ordering is emitter ⊗ sensor₁ ⊗ … ⊗ sensor_N with the emitter as the
//! most significant factor; on every factor index 0 is the ground state.

use serde::{Deserialize, Serialize};

use crate::bath::{self, BathParams};
use crate::error::{Error, Result};
use crate::linalg::{self, identity, kron, lowering, Operator};

pub const MAX_SENSORS: usize = 3;

/// Sensors satisfy `ε² / (Γ γ)` below this ratio in the weak-sensor regime.
pub const WEAK_SENSOR_RATIO: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// δ = ω₀′ − ω_L, ps⁻¹.
    pub detuning: f64,
    /// Ω, ps⁻¹.
    pub rabi: f64,
    /// Radiative decay rate γ, ps⁻¹.
    pub gamma: f64,
    /// Polaron-shifted gap ω₀′ when known; only used for axis labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifted_gap: Option<f64>,
}

impl EmitterParams {
    pub fn new(detuning: f64, rabi: f64, gamma: f64) -> Self {
        Self { detuning, rabi, gamma, shifted_gap: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter { name: "gamma", reason: format!("{} must be > 0", self.gamma) });
        }
        if !self.rabi.is_finite() || !self.detuning.is_finite() {
            return Err(Error::InvalidParameter { name: "rabi", reason: "drive parameters must be finite".into() });
        }
        Ok(())
    }
}

/// Resonant drive of the polaron-shifted transition: δ = 0 and
/// `ω₀′ = ω₀ + δ_P` recorded for labelling.
pub fn resonant_drive(emitter_gap: f64, rabi: f64, gamma: f64, bath: &BathParams) -> EmitterParams {
    EmitterParams {
        detuning: 0.0,
        rabi,
        gamma,
        shifted_gap: Some(emitter_gap + bath::polaron_shift(bath)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    /// ω_m − ω_L, ps⁻¹.
    pub detuning: f64,
    /// Γ_m, ps⁻¹.
    pub linewidth: f64,
    /// ε_m, ps⁻¹.
    pub coupling: f64,
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth > 0.0 && self.linewidth.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "linewidth",
                reason: format!("{} must be > 0", self.linewidth),
            });
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "coupling",
                reason: format!("{} must be >= 0", self.coupling),
            });
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter { name: "detuning", reason: "must be finite".into() });
        }
        Ok(())
    }

    /// `ε² / (Γ γ)`.
    pub fn back_action_ratio(&self, gamma: f64) -> f64 {
        self.coupling * self.coupling / (self.linewidth * gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeModel {
    pub emitter: EmitterParams,
    pub sensors: Vec<SensorParams>,
    pub dim: usize,
    /// H′_S on the joint space.
    pub h_prime: Operator,
    /// Bare emitter Hamiltonian H_S on the two-level space.
    pub h_emitter: Operator,
    /// σ lifted to the joint space.
    pub sigma: Operator,
    /// Phonon coupling A = σ†σ lifted to the joint space.
    pub coupling: Operator,
    /// ς_m lifted to the joint space, in sensor order.
    pub sensor_lowering: Vec<Operator>,
}

/// Lift a single-factor operator into slot `slot` of `factors` two-level factors.
pub fn lift(op: &Operator, slot: usize, factors: usize) -> Operator {
    (0..factors).fold(identity(1), |acc, k| {
        if k == slot {
            kron(&acc, op)
        } else {
            kron(&acc, &identity(2))
        }
    })
}

/// Occupation bit of sensor `m` (0-based) in joint basis state `index`.
pub fn sensor_bit(index: usize, m: usize, sensors: usize) -> usize {
    (index >> (sensors - 1 - m)) & 1
}

pub fn build_composite(emitter: EmitterParams, sensors: &[SensorParams]) -> Result<CompositeModel> {
    emitter.validate()?;
    if sensors.len() > MAX_SENSORS {
        return Err(Error::TooManySensors(sensors.len()));
    }
    for s in sensors {
        s.validate()?;
        let ratio = s.back_action_ratio(emitter.gamma);
        if ratio >= WEAK_SENSOR_RATIO {
            log::warn!("sensor outside weak-coupling regime: eps^2/(Gamma gamma) = {ratio:.3e}");
        }
    }
    let factors = sensors.len() + 1;
    let dim = 1 << factors;

    let sm = lowering();
    let a2 = sm.adjoint() * &sm;
    let h_emitter = a2.scale(emitter.detuning) + linalg::pauli_x().scale(emitter.rabi / 2.0);

    let sigma = lift(&sm, 0, factors);
    let coupling = lift(&a2, 0, factors);
    let mut h_prime = lift(&h_emitter, 0, factors);
    let mut sensor_lowering = Vec::with_capacity(sensors.len());
    for (m, s) in sensors.iter().enumerate() {
        let vs = lift(&sm, m + 1, factors);
        let n = vs.adjoint() * &vs;
        let exchange = sigma.adjoint() * &vs + &sigma * vs.adjoint();
        h_prime += n.scale(s.detuning) + exchange.scale(s.coupling);
        sensor_lowering.push(vs);
    }
    Ok(CompositeModel {
        emitter,
        sensors: sensors.to_vec(),
        dim,
        h_prime,
        h_emitter,
        sigma,
        coupling,
        sensor_lowering,
    })
}

impl CompositeModel {
    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    /// Collapse operators with their rates: `(σ, γ)` then `(ς_m, Γ_m)`.
    pub fn collapse_operators(&self) -> Vec<(&Operator, f64)> {
        let mut out = vec![(&self.sigma, self.emitter.gamma)];
        for (op, s) in self.sensor_lowering.iter().zip(&self.sensors) {
            out.push((op, s.linewidth));
        }
        out
    }

    /// Number operator `ς_m† ς_m` for 0-based sensor `m`.
    pub fn sensor_number(&self, m: usize) -> Operator {
        self.sensor_lowering[m].adjoint() * &self.sensor_lowering[m]
    }

    /// Per-basis-state magnitude `Π_m s_m^{n_m}` with `s_m = ε_m/Γ_m`, the
    /// expected order of amplitudes carrying `n_m` sensor excitations.
    pub fn excitation_scales(&self) -> Vec<f64> {
        let n = self.sensor_count();
        let ratios: Vec<f64> = self
            .sensors
            .iter()
            .map(|s| if s.coupling > 0.0 { (s.coupling / s.linewidth).clamp(1e-8, 1.0) } else { 1.0 })
            .collect();
        (0..self.dim)
            .map(|i| (0..n).filter(|&m| sensor_bit(i, m, n) == 1).map(|m| ratios[m]).product())
            .collect()
    }
}
