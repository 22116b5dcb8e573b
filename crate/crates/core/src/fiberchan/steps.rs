use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::AmpSpec;
use crate::fft::FftPair;
use crate::scalar::{cis, Real};
use crate::sigkit::{DualPolSignal, Grid};

/// Manakov average of the Kerr nonlinearity over random birefringence.
pub const MANAKOV_FACTOR: f64 = 8.0 / 9.0;

/// Per-bin multiplier `exp(+j (beta2/2) w² dz) * exp(-(alpha/2) dz)`.
pub fn dispersion_multiplier<T: Real>(
    grid: &Grid,
    beta2_s2_per_km: f64,
    alpha_lin_per_km: f64,
    dz_km: f64,
) -> Vec<Complex<T>> {
    let amp = (-0.5 * alpha_lin_per_km * dz_km).exp();
    grid.angular_frequencies()
        .into_iter()
        .map(|w| {
            let (s, c) = (0.5 * beta2_s2_per_km * w * w * dz_km).sin_cos();
            Complex::new(T::lit(amp * c), T::lit(amp * s))
        })
        .collect()
}

/// Lossless dispersive step on frequency-domain samples of both polarizations.
pub fn dispersive_step<T: Real>(
    spec_x: &mut [Complex<T>],
    spec_y: &mut [Complex<T>],
    grid: &Grid,
    beta2_s2_per_km: f64,
    dz_km: f64,
) {
    let h = dispersion_multiplier::<T>(grid, beta2_s2_per_km, 0.0, dz_km);
    for ((a, b), m) in spec_x.iter_mut().zip(spec_y.iter_mut()).zip(&h) {
        *a *= m;
        *b *= m;
    }
}

/// Time-domain convenience: transform, [`dispersive_step`], transform back.
pub fn apply_dispersion<T: Real>(signal: &mut DualPolSignal<T>, beta2_s2_per_km: f64, dz_km: f64) {
    if dz_km == 0.0 {
        return;
    }
    let mut fft = FftPair::new(signal.len());
    fft.forward(&mut signal.x);
    fft.forward(&mut signal.y);
    let grid = signal.grid;
    dispersive_step(&mut signal.x, &mut signal.y, &grid, beta2_s2_per_km, dz_km);
    fft.inverse(&mut signal.x);
    fft.inverse(&mut signal.y);
}

/// Manakov nonlinear phase rotation, common to both polarizations.
///
/// Returns the summed instantaneous power, which callers use as a cheap
/// finiteness probe.
pub fn nonlinear_step<T: Real>(
    x: &mut [Complex<T>],
    y: &mut [Complex<T>],
    gamma_per_w_km: f64,
    dz_eff_km: f64,
) -> T {
    let k = T::lit(gamma_per_w_km * MANAKOV_FACTOR * dz_eff_km);
    let mut total = T::zero();
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let p = a.norm_sqr() + b.norm_sqr();
        total += p;
        if k != T::zero() {
            let r = cis(k * p);
            *a *= r;
            *b *= r;
        }
    }
    total
}

/// Fills `buf` with circular complex Gaussian samples of variance `var`.
pub(crate) fn add_circular_noise<T: Real, R: Rng + ?Sized>(
    buf: &mut [Complex<T>],
    var: f64,
    rng: &mut R,
) {
    let sd = (0.5 * var).sqrt();
    for z in buf.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z += Complex::new(T::lit(sd * re), T::lit(sd * im));
    }
}

/// Adds the ASE accumulated over `dz_km`: white circular Gaussian noise of
/// variance `nsp h nu alpha dz fs` per sample and polarization.
pub fn ase_injection<T: Real, R: Rng + ?Sized>(
    signal: &mut DualPolSignal<T>,
    amp: &AmpSpec,
    dz_km: f64,
    rng: &mut R,
) {
    if amp.is_noiseless() {
        return;
    }
    let var = amp.psd(dz_km) * signal.grid.sample_rate;
    add_circular_noise(&mut signal.x, var, rng);
    add_circular_noise(&mut signal.y, var, rng);
}
