//! Grids, symbol generation, Nyquist pulse shaping and WDM multiplexing.
//!
//! All filtering is circular: a block of `n` symbols is treated as one period
//! of a periodic waveform, so shaping, dispersion and their inverses are exact.

mod grid;
mod shaping;
mod symbols;
mod wdm;

pub use grid::{DualPolSignal, Grid};
pub use shaping::{
    matched_filter_downsample, nyquist_shape, raised_cosine, rrc_amplitude, shape_subcarriers,
    SubcarrierPlan,
};
pub use symbols::{draw_symbols, mb_probabilities, qam_points, InputLaw, SymbolBlock};
pub use wdm::{channel_offset_bins, wdm_demux, wdm_mux};

pub(crate) use shaping::demodulate_stream;
