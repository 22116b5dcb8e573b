//! Manakov propagation by the symmetric split-step Fourier method.
//!
//! Implemented equation, per polarization, with `P = |Ax|^2 + |Ay|^2`:
//!
//! ```text
//! dA/dz = -j (beta2/2) d²A/dt² + j gamma (8/9) P A - (alpha/2) A
//! ```
//!
//! In the frequency domain the dispersive operator is the multiplier
//! `exp(+j (beta2/2) w² dz)`. Ideal distributed amplification is zero net
//! loss plus white ASE injected once per step.

mod spec;
mod ssfm;
mod steps;

pub use spec::{AmpSpec, FiberSpec, PLANCK};
pub use ssfm::{split_step, ssfm_propagate, PropagationRecord, StepNoise};
pub use steps::{
    apply_dispersion, ase_injection, dispersion_multiplier, dispersive_step, nonlinear_step,
    MANAKOV_FACTOR,
};
