//! Nonlinear fiber channel simulation and achievable-information-rate
//! estimation for dual-polarization Nyquist-WDM systems.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod airmetrics;
mod error;
pub mod fft;
pub mod fiberchan;
pub mod rxdsp;
pub mod scalar;
pub mod seed;
pub mod seqshape;
pub mod sigkit;
pub mod xprunner;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Signal = sigkit::DualPolSignal<f64>;
pub type Signal32 = sigkit::DualPolSignal<f32>;
pub type Block = sigkit::SymbolBlock<f64>;
pub type Block32 = sigkit::SymbolBlock<f32>;
pub type Law = sigkit::InputLaw<f64>;
pub type Library = seqshape::SequenceLibrary<f64>;
