//! Receiver-side processing: dispersion compensation, digital backpropagation,
//! subcarrier demultiplexing and average-phase alignment.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::FftPair;
use crate::fiberchan::{apply_dispersion, split_step, FiberSpec};
use crate::scalar::Real;
use crate::sigkit::{DualPolSignal, SubcarrierPlan, SymbolBlock};

/// Backpropagation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbpSpec {
    /// Absolute step; `None` mirrors the forward step grid ("ideal" DBP).
    #[serde(default)]
    pub step_km: Option<f64>,
    /// Multiplier on the nominal nonlinear coefficient.
    #[serde(default = "one")]
    pub gamma_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl DbpSpec {
    pub fn ideal() -> Self {
        DbpSpec {
            step_km: None,
            gamma_scale: 1.0,
        }
    }
}

impl Default for DbpSpec {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Ideal electronic dispersion compensation over the full link.
pub fn edc<T: Real>(signal: &DualPolSignal<T>, fiber: &FiberSpec) -> DualPolSignal<T> {
    let mut out = signal.clone();
    apply_dispersion(&mut out, -fiber.beta2_s2_per_km(), fiber.length_km);
    out
}

/// Digital backpropagation: symmetric SSFM with negated beta2, gamma and
/// loss, traversing the step grid in reverse.
pub fn dbp<T: Real>(
    signal: &DualPolSignal<T>,
    fiber: &FiberSpec,
    spec: &DbpSpec,
) -> Result<DualPolSignal<T>> {
    let mut grid_fiber = *fiber;
    if let Some(step) = spec.step_km {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(format!("DBP step must be positive, got {step}")));
        }
        grid_fiber.step_km = step;
    }
    grid_fiber.validate()?;
    let mut steps = grid_fiber.step_grid();
    steps.reverse();
    let (out, _) = split_step(
        signal,
        &steps,
        -fiber.beta2_s2_per_km(),
        -fiber.gamma_per_w_km * spec.gamma_scale,
        -fiber.alpha_lin_per_km(),
        None,
    )?;
    Ok(out)
}

/// Splits the channel into its digital subcarriers, matched-filters each and
/// samples at the subcarrier symbol rate.
///
/// Stream `j` comes back in physical units, `sqrt(P a_j)` times the
/// transmitted symbols on a clean channel.
pub fn subcarrier_demux<T: Real>(
    signal: &DualPolSignal<T>,
    rolloff: f64,
    plan: &SubcarrierPlan,
) -> Result<Vec<SymbolBlock<T>>> {
    let n = signal.grid.n_symbols;
    let n_sc = plan.n_subcarriers;
    if !n.is_multiple_of(n_sc) {
        return Err(invalid(format!(
            "{n} symbols not divisible into {n_sc} subcarriers"
        )));
    }
    let m = n / n_sc;
    let mut fft = FftPair::new(signal.len());
    let mut sx = signal.x.clone();
    let mut sy = signal.y.clone();
    fft.forward(&mut sx);
    fft.forward(&mut sy);
    let amp = (n_sc as f64).sqrt();
    plan.center_bins()
        .into_iter()
        .map(|c| {
            SymbolBlock::new(
                crate::sigkit::demodulate_stream(&sx, m, rolloff, c, amp),
                crate::sigkit::demodulate_stream(&sy, m, rolloff, c, amp),
            )
        })
        .collect()
}

/// One complex gain per polarization, `<tx* rx> / <|tx|^2>`, on physical
/// amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpeEstimate {
    pub h: [Complex<f64>; 2],
}

/// Estimates the average complex gain of `rx` relative to `tx`. The block
/// itself is not modified; per-symbol tracking is left to the PPN metric.
pub fn cpe_align<T: Real>(rx: &SymbolBlock<T>, tx: &SymbolBlock<T>) -> Result<CpeEstimate> {
    if rx.len() != tx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            actual: rx.len(),
        });
    }
    let scale = tx.per_pol_power.sqrt();
    let est = |r: &[Complex<T>], t: &[Complex<T>]| -> Result<Complex<f64>> {
        let mut num = Complex::new(0.0, 0.0);
        let mut den = 0.0;
        for (a, b) in r.iter().zip(t) {
            let b = Complex::new(b.re.f64(), b.im.f64()) * scale;
            num += b.conj() * Complex::new(a.re.f64(), a.im.f64());
            den += b.norm_sqr();
        }
        if den == 0.0 {
            return Err(Error::ZeroPower(
                "cpe_align: transmitted block has zero power",
            ));
        }
        Ok(num / den)
    };
    Ok(CpeEstimate {
        h: [est(&rx.x, &tx.x)?, est(&rx.y, &tx.y)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiberchan::{ssfm_propagate, AmpSpec};
    use crate::scalar::relative_rms_error;
    use crate::sigkit::{
        draw_symbols, matched_filter_downsample, nyquist_shape, shape_subcarriers, Grid, InputLaw,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn block(n: usize, seed: u64) -> SymbolBlock<f64> {
        draw_symbols(
            &InputLaw::IidGaussian,
            n,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    fn shaped(n: usize, power: f64, rolloff: f64, seed: u64) -> DualPolSignal<f64> {
        nyquist_shape(
            &block(n, seed).with_power(power),
            Grid::new(10e9, 2, n).unwrap(),
            rolloff,
        )
        .unwrap()
    }

    #[test]
    fn edc_inverts_dispersion_only_channel() {
        let s = shaped(512, 1e-3, 0.05, 1);
        let mut fiber = FiberSpec::standard_smf(1000.0, 10.0);
        fiber.gamma_per_w_km = 0.0;
        let (rx, _) = ssfm_propagate(&s, &fiber, &AmpSpec::noiseless(), 0).unwrap();
        assert!(relative_rms_error(&rx.x, &s.x) > 0.1);
        let back = edc(&rx, &fiber);
        assert!(relative_rms_error(&back.x, &s.x) < 1e-12);
        assert!(relative_rms_error(&back.y, &s.y) < 1e-12);
        // EDC for a negative length undoes EDC.
        let mut neg = fiber;
        neg.length_km = -fiber.length_km;
        let twice = edc(&edc(&s, &fiber), &neg);
        assert!(relative_rms_error(&twice.x, &s.x) < 1e-12);
        // Zero-length fiber.
        neg.length_km = 0.0;
        assert_eq!(edc(&s, &neg), s);
    }

    #[test]
    fn edc_leaves_nonlinear_residual() {
        let s = shaped(256, 10f64.powf(-0.1) * 1e-3, 0.05, 2); // -1 dBm
        let fiber = FiberSpec::standard_smf(200.0, 1.0);
        let (rx, _) = ssfm_propagate(&s, &fiber, &AmpSpec::noiseless(), 0).unwrap();
        let out = edc(&rx, &fiber);
        assert!(relative_rms_error(&out.x, &s.x) > 1e-4);
    }

    #[test]
    fn ideal_dbp_inverts_noiseless_forward_run() {
        for &(rho, power, step) in &[(0.05, 1e-2, 1.0), (0.2, 3e-3, 2.5), (0.0, 2e-2, 0.7)] {
            let s = shaped(256, power, rho, 3);
            let fiber = FiberSpec::standard_smf(150.0, step);
            let (rx, _) = ssfm_propagate(&s, &fiber, &AmpSpec::noiseless(), 0).unwrap();
            let back = dbp(&rx, &fiber, &DbpSpec::ideal()).unwrap();
            assert!(relative_rms_error(&back.x, &s.x) < 1e-9, "rho {rho}");
            assert!(relative_rms_error(&back.y, &s.y) < 1e-9);
        }
    }

    #[test]
    fn dbp_with_zero_gamma_is_edc() {
        let s = shaped(128, 1e-2, 0.05, 4);
        let fiber = FiberSpec::standard_smf(100.0, 3.0);
        let spec = DbpSpec {
            step_km: None,
            gamma_scale: 0.0,
        };
        let a = dbp(&s, &fiber, &spec).unwrap();
        let b = edc(&s, &fiber);
        assert!(relative_rms_error(&a.x, &b.x) < 1e-12);
        let bad = DbpSpec {
            step_km: Some(0.0),
            gamma_scale: 1.0,
        };
        assert!(dbp(&s, &fiber, &bad).is_err());
    }

    #[test]
    fn subcarrier_roundtrip() {
        let n = 1024;
        let rho = 0.05;
        let grid = Grid::new(10e9, 2, n).unwrap();
        let b = block(n, 5).with_power(2e-3);
        let plan = SubcarrierPlan::new(4, n, rho).unwrap();
        let sig = shape_subcarriers(&b, grid, rho, &plan).unwrap();
        let streams = subcarrier_demux(&sig, rho, &plan).unwrap();
        let tx = b.to_physical().deinterleave(4).unwrap();
        let mut p_sum = 0.0;
        for (r, t) in streams.iter().zip(&tx) {
            assert!(relative_rms_error(&r.x, &t.x) < 1e-6);
            assert!(relative_rms_error(&r.y, &t.y) < 1e-6);
            let (px, py) = r.mean_powers();
            p_sum += 0.5 * (px + py) / 4.0;
        }
        // Subcarrier j occupies power P a_j / n_sc of the channel.
        assert!((p_sum / sig.per_pol_power() - 1.0).abs() < 5e-3);

        // Single subcarrier equals the plain matched filter.
        let s1 = nyquist_shape(&b, grid, rho).unwrap();
        let one = subcarrier_demux(&s1, rho, &SubcarrierPlan::single()).unwrap();
        let mf = matched_filter_downsample(&s1, rho).unwrap();
        assert_eq!(one[0], mf);
    }

    #[test]
    fn cpe_recovers_rotation() {
        let tx = block(1000, 6).with_power(1e-3);
        let phi = 0.7;
        let mut rx = tx.to_physical();
        let r = Complex::from_polar(1.0, phi);
        rx.x.iter_mut().chain(rx.y.iter_mut()).for_each(|z| *z *= r);
        let est = cpe_align(&rx, &tx).unwrap();
        for h in est.h {
            assert!((h.arg() - phi).abs() < 1e-6);
            assert!((h.norm() - 1.0).abs() < 1e-6);
        }
        let same = cpe_align(&tx.to_physical(), &tx.to_physical()).unwrap();
        assert_eq!(same.h, [Complex::new(1.0, 0.0); 2]);
        assert!(cpe_align(&tx, &SymbolBlock::zeros(1000)).is_err());
    }

    #[test]
    fn cpe_uncorrelated_is_small() {
        let tx = block(100_000, 7);
        let rx = block(100_000, 8);
        let est = cpe_align(&rx, &tx).unwrap();
        assert!(est.h[0].norm() < 0.02 && est.h[1].norm() < 0.02);
    }
}
