//! Thin wrapper over `rustfft` with the crate's normalization and frequency
//! conventions.
//!
//! Forward transforms are unscaled, inverse transforms carry the `1/N`.
//! Bin `k` maps to `k * fs / N`, wrapped into `(-fs/2, fs/2]`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Real;

pub struct FftPair<T: Real> {
    len: usize,
    forward: Arc<dyn rustfft::Fft<T>>,
    inverse: Arc<dyn rustfft::Fft<T>>,
    scratch: Vec<Complex<T>>,
    scale: T,
}

impl<T: Real> FftPair<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        FftPair {
            len,
            forward,
            inverse,
            scratch: vec![Complex::default(); scratch_len],
            scale: T::one() / T::lit(len as f64),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&mut self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let s = self.scale;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }

    /// Inverse transform without the `1/N` factor.
    pub fn inverse_unscaled(&mut self, buf: &mut [Complex<T>]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
    }
}

/// Signed bin index of bin `k` in an `n`-point transform, `(-n/2, n/2]`.
#[inline]
pub fn signed_bin(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Storage index of signed bin `b` in an `n`-point transform.
#[inline]
pub fn bin_index(b: isize, n: usize) -> usize {
    b.rem_euclid(n as isize) as usize
}

/// Frequency in Hz of each bin.
pub fn frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / n as f64;
    (0..n).map(|k| signed_bin(k, n) as f64 * df).collect()
}

/// Angular frequency in rad/s of each bin.
pub fn angular_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    frequencies(n, sample_rate)
        .into_iter()
        .map(|f| 2.0 * std::f64::consts::PI * f)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_wrap_to_half_open_interval() {
        let f = frequencies(8, 8.0);
        assert_eq!(f, vec![0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0]);
        for k in 0..8 {
            assert_eq!(bin_index(signed_bin(k, 8), 8), k);
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let mut fft = FftPair::<f64>::new(16);
        let orig: Vec<_> = (0..16)
            .map(|i| Complex::new(i as f64, (i * i) as f64 * 0.1))
            .collect();
        let mut buf = orig.clone();
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
