//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, RemAssign, SubAssign};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the simulation can run in: `f32` or `f64`.
///
/// Monte Carlo estimators always accumulate in `f64`, whatever the
/// waveform precision.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + RemAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or parameter.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 value representable in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("scalar representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `exp(j * phase)`
#[inline]
/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn cis<T: Real>(phase: T) -> Complex<T> {
    let (s, c) = phase.sin_cos();
    Complex::new(c, s)
}

/// Mean of `|z|^2` over a slice, accumulated in `f64`. Zero for an empty slice.
pub fn mean_power<T: Real>(samples: &[Complex<T>]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|z| z.norm_sqr().f64()).sum::<f64>() / samples.len() as f64
}

/// `sqrt(sum |a-b|^2 / sum |b|^2)`; returns the absolute RMS when `b` is all zeros.
pub fn relative_rms_error<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_rms_error: length mismatch");
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - y).norm_sqr().f64();
        den += y.norm_sqr().f64();
    }
    if den == 0.0 {
        (num / a.len().max(1) as f64).sqrt()
    } else {
        (num / den).sqrt()
    }
}
