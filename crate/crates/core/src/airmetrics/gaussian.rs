use num_complex::Complex;

use super::AirEstimate;
use crate::error::{invalid, Error, Result};
use crate::rxdsp::cpe_align;
use crate::scalar::Real;
use crate::sigkit::SymbolBlock;

const SUB_BLOCKS: usize = 8;

fn check_pair<T: Real>(tx: &SymbolBlock<T>, rx: &SymbolBlock<T>) -> Result<()> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            actual: rx.len(),
        });
    }
    if tx.len() < SUB_BLOCKS {
        return Err(invalid(format!(
            "need at least {SUB_BLOCKS} symbols, got {}",
            tx.len()
        )));
    }
    if tx.len() < 1000 {
        log::warn!("AIR from only {} symbols", tx.len());
    }
    Ok(())
}

/// Per-polarization effective SNR `|h|^2 P / sigma^2` with `h` from
/// [`cpe_align`] and `sigma^2 = mean |rx - h tx|^2`.
pub fn effective_snr<T: Real>(tx: &SymbolBlock<T>, rx: &SymbolBlock<T>) -> Result<[f64; 2]> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            actual: rx.len(),
        });
    }
    let est = cpe_align(rx, tx)?;
    let scale = tx.per_pol_power.sqrt();
    let snr = |t: &[Complex<T>], r: &[Complex<T>], h: Complex<f64>| {
        let mut sig = 0.0;
        let mut err = 0.0;
        for (a, b) in t.iter().zip(r) {
            let a = Complex::new(a.re.f64(), a.im.f64()) * scale;
            let b = Complex::new(b.re.f64(), b.im.f64());
            sig += a.norm_sqr();
            err += (b - h * a).norm_sqr();
        }
        if err == 0.0 {
            f64::INFINITY
        } else {
            h.norm_sqr() * sig / err
        }
    };
    Ok([snr(&tx.x, &rx.x, est.h[0]), snr(&tx.y, &rx.y, est.h[1])])
}

fn air_closed_form<T: Real>(tx: &SymbolBlock<T>, rx: &SymbolBlock<T>) -> Result<f64> {
    let [sx, sy] = effective_snr(tx, rx)?;
    Ok(0.5 * ((1.0 + sx).log2() + (1.0 + sy).log2()))
}

fn slice<T: Real>(b: &SymbolBlock<T>, lo: usize, hi: usize) -> SymbolBlock<T> {
    SymbolBlock {
        x: b.x[lo..hi].to_vec(),
        y: b.y[lo..hi].to_vec(),
        per_pol_power: b.per_pol_power,
    }
}

/// AIR of the memoryless Gaussian metric, `mean_pol log2(1 + SNR_eff)`.
///
/// The standard error is the spread over 8 contiguous sub-blocks, each with
/// its own fitted gain and variance.
pub fn air_gaussian<T: Real>(tx: &SymbolBlock<T>, rx: &SymbolBlock<T>) -> Result<AirEstimate> {
    check_pair(tx, rx)?;
    let air = air_closed_form(tx, rx)?;
    if !air.is_finite() {
        return Err(invalid("noise-free data: AIR is unbounded"));
    }
    let n = tx.len();
    let size = n / SUB_BLOCKS;
    let subs: Vec<f64> = (0..SUB_BLOCKS)
        .map(|i| {
            air_closed_form(
                &slice(tx, i * size, (i + 1) * size),
                &slice(rx, i * size, (i + 1) * size),
            )
            .unwrap_or(0.0)
        })
        .collect();
    let m = subs.iter().sum::<f64>() / SUB_BLOCKS as f64;
    let var = subs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (SUB_BLOCKS - 1) as f64;
    Ok(AirEstimate {
        air,
        std_err: (var / SUB_BLOCKS as f64).sqrt(),
        n_symbols_used: n,
    }
    .clamped())
}
