//! Frequency-resolved photon spectra of a driven two-level emitter coupled
//! to a super-Ohmic phonon bath, computed with weakly coupled sensor qubits.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bath;
pub mod cli;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod spectra;
pub mod sweep;

pub use bath::{BathKernel, BathParams, KernelConfig};
pub use engine::{build_liouvillian, steady_state, Liouvillian, PhononMode};
pub use error::{Error, Result};
pub use model::{build_composite, CompositeModel, EmitterParams, SensorParams};
pub use spectra::{SensorSpec, SpectrumGrid, SpectrumResult};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
