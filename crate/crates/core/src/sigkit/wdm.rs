use num_complex::Complex;

use super::{DualPolSignal, Grid};
use crate::error::{Error, Result};
use crate::fft::{bin_index, signed_bin, FftPair};
use crate::scalar::Real;

/// Channel spacing expressed in composite-grid bins.
///
/// Spacing is snapped to the nearest bin so frequency shifts stay circular.
pub fn channel_offset_bins(spacing_hz: f64, composite: &Grid) -> isize {
    (spacing_hz / composite.df()).round() as isize
}

fn centered_index(index: usize, n_channels: usize) -> isize {
    index as isize - (n_channels / 2) as isize
}

/// Half-width, in channel-grid bins, of the slot each channel owns.
fn slot_half_bins(
    n_channels: usize,
    offset_bins: isize,
    channel: &Grid,
    composite: &Grid,
) -> isize {
    let n_ch = channel.total_samples() as isize;
    if n_channels == 1 {
        return n_ch / 2;
    }
    // Offsets are on the composite grid; convert to channel-grid bins.
    let ratio = channel.df() / composite.df();
    let half = (offset_bins as f64 / ratio / 2.0).floor() as isize;
    half.min(n_ch / 2)
}

fn check_fit(
    n_channels: usize,
    offset_bins: isize,
    channel: &Grid,
    composite: &Grid,
) -> Result<()> {
    if (channel.df() - composite.df()).abs() > 1e-9 * composite.df() {
        return Err(Error::InvalidArgument(
            "channel and composite grids must span the same block duration".into(),
        ));
    }
    let n_comp = composite.total_samples() as isize;
    let n_ch = channel.total_samples() as isize;
    let edge = if n_channels == 1 {
        n_ch / 2
    } else {
        (n_channels as isize / 2) * offset_bins + offset_bins / 2
    };
    if n_channels > 1 && offset_bins <= 0 {
        return Err(Error::Aliasing("channel spacing must be positive".into()));
    }
    if edge > n_comp / 2 {
        return Err(Error::Aliasing(format!(
            "{n_channels} channels at {offset_bins}-bin spacing need {} bins, composite grid has {n_comp}",
            2 * edge
        )));
    }
    Ok(())
}

/// Places each channel at `k * spacing` (k centered on zero) on the composite grid.
///
/// Each channel contributes only the bins of its own slot (`±spacing/2`).
pub fn wdm_mux<T: Real>(
    channels: &[DualPolSignal<T>],
    spacing_hz: f64,
    composite: Grid,
) -> Result<DualPolSignal<T>> {
    let first = channels
        .first()
        .ok_or_else(|| Error::InvalidArgument("no channels to multiplex".into()))?;
    let grid = first.grid;
    if channels.iter().any(|c| c.grid != grid) {
        return Err(Error::InvalidArgument(
            "channels must share one grid".into(),
        ));
    }
    let m = channels.len();
    let offset = channel_offset_bins(spacing_hz, &composite);
    check_fit(m, offset, &grid, &composite)?;

    let n_ch = grid.total_samples();
    let n_comp = composite.total_samples();
    let half = slot_half_bins(m, offset, &grid, &composite);
    let scale = T::lit(n_comp as f64 / n_ch as f64);
    let mut fft_ch = FftPair::<T>::new(n_ch);
    let mut out = DualPolSignal::zeros(composite);
    let mut acc_x = vec![Complex::<T>::default(); n_comp];
    let mut acc_y = vec![Complex::<T>::default(); n_comp];
    for (i, ch) in channels.iter().enumerate() {
        let shift = centered_index(i, m) * offset;
        let mut sx = ch.x.clone();
        let mut sy = ch.y.clone();
        fft_ch.forward(&mut sx);
        fft_ch.forward(&mut sy);
        for k in 0..n_ch {
            let b = signed_bin(k, n_ch);
            if b.abs() > half {
                continue;
            }
            let dst = bin_index(b + shift, n_comp);
            acc_x[dst] += sx[k] * scale;
            acc_y[dst] += sy[k] * scale;
        }
    }
    let mut fft = FftPair::<T>::new(n_comp);
    fft.inverse(&mut acc_x);
    fft.inverse(&mut acc_y);
    out.x = acc_x;
    out.y = acc_y;
    Ok(out)
}

/// Extracts channel `index` (0-based, center channel at `n_channels / 2`) to
/// baseband on `channel_grid`, brick-wall filtered to its `±spacing/2` slot.
pub fn wdm_demux<T: Real>(
    composite: &DualPolSignal<T>,
    index: usize,
    n_channels: usize,
    spacing_hz: f64,
    channel_grid: Grid,
) -> Result<DualPolSignal<T>> {
    if index >= n_channels {
        return Err(Error::ChannelIndex {
            index: index as isize,
            n_channels,
        });
    }
    let cgrid = composite.grid;
    let offset = channel_offset_bins(spacing_hz, &cgrid);
    check_fit(n_channels, offset, &channel_grid, &cgrid)?;
    let n_ch = channel_grid.total_samples();
    let n_comp = cgrid.total_samples();
    let half = slot_half_bins(n_channels, offset, &channel_grid, &cgrid);
    let shift = centered_index(index, n_channels) * offset;
    let scale = T::lit(n_ch as f64 / n_comp as f64);

    let mut fft = FftPair::<T>::new(n_comp);
    let mut sx = composite.x.clone();
    let mut sy = composite.y.clone();
    fft.forward(&mut sx);
    fft.forward(&mut sy);
    let mut ox = vec![Complex::<T>::default(); n_ch];
    let mut oy = vec![Complex::<T>::default(); n_ch];
    for k in 0..n_ch {
        let b = signed_bin(k, n_ch);
        if b.abs() > half {
            continue;
        }
        let src = bin_index(b + shift, n_comp);
        ox[k] = sx[src] * scale;
        oy[k] = sy[src] * scale;
    }
    let mut fft_ch = FftPair::<T>::new(n_ch);
    fft_ch.inverse(&mut ox);
    fft_ch.inverse(&mut oy);
    let mut out = DualPolSignal::from_samples(channel_grid, ox, oy)?;
    out.center_frequency_offset = shift as f64 * cgrid.df();
    Ok(out)
}
