use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::steps::{add_circular_noise, dispersion_multiplier, nonlinear_step};
use super::{AmpSpec, FiberSpec};
use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::scalar::Real;
use crate::sigkit::{DualPolSignal, Grid};

/// Bookkeeping for reproducibility audits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropagationRecord {
    pub steps: usize,
    /// Standard-normal draws consumed by noise injection.
    pub rng_draws: u64,
    pub launch_power: f64,
    pub exit_power: f64,
}

/// ASE injection at the end of every step.
pub struct StepNoise<'a> {
    pub amp: &'a AmpSpec,
    pub seed: u64,
}

/// Cache of dispersion multipliers keyed by step length.
struct LinearOps<T: Real> {
    grid: Grid,
    beta2: f64,
    alpha: f64,
    cache: Vec<(f64, Vec<Complex<T>>)>,
}

impl<T: Real> LinearOps<T> {
    fn apply(&mut self, dz: f64, sx: &mut [Complex<T>], sy: &mut [Complex<T>]) {
        if dz == 0.0 {
            return;
        }
        let idx = match self.cache.iter().position(|(d, _)| *d == dz) {
            Some(i) => i,
            None => {
                self.cache.push((
                    dz,
                    dispersion_multiplier(&self.grid, self.beta2, self.alpha, dz),
                ));
                self.cache.len() - 1
            }
        };
        let h = &self.cache[idx].1;
        for ((a, b), m) in sx.iter_mut().zip(sy.iter_mut()).zip(h) {
            *a *= m;
            *b *= m;
        }
    }
}

/// Symmetric split-step integration over an explicit step grid.
///
/// Each step is half linear, full nonlinear, half linear, then noise.
/// Adjacent linear half-steps are fused into one multiplier. Noise is added in
/// the frequency domain before the trailing half-step; white circular noise is
/// invariant in law under the phase-only dispersive multiplier, so this is
/// equivalent to injection at the step end.
pub fn split_step<T: Real>(
    signal: &DualPolSignal<T>,
    steps: &[f64],
    beta2_s2_per_km: f64,
    gamma_per_w_km: f64,
    alpha_lin_per_km: f64,
    noise: Option<StepNoise<'_>>,
) -> Result<(DualPolSignal<T>, PropagationRecord)> {
    let n = signal.len();
    let mut record = PropagationRecord {
        steps: steps.len(),
        launch_power: signal.power(),
        ..Default::default()
    };
    let mut out = signal.clone();
    if steps.is_empty() {
        record.exit_power = record.launch_power;
        return Ok((out, record));
    }
    let mut fft = FftPair::<T>::new(n);
    let mut ops = LinearOps {
        grid: signal.grid,
        beta2: beta2_s2_per_km,
        alpha: alpha_lin_per_km,
        cache: Vec::new(),
    };
    let noise = noise.filter(|nz| !nz.amp.is_noiseless());
    let mut rng = noise.as_ref().map(|nz| ChaCha8Rng::seed_from_u64(nz.seed));

    let (sx, sy) = (&mut out.x, &mut out.y);
    fft.forward(sx);
    fft.forward(sy);
    let mut pending = 0.0;
    for (i, &dz) in steps.iter().enumerate() {
        ops.apply(pending + 0.5 * dz, sx, sy);
        fft.inverse(sx);
        fft.inverse(sy);
        let total = nonlinear_step(sx, sy, gamma_per_w_km, dz);
        if !total.is_finite() {
            return Err(Error::NonFinite {
                step: i + 1,
                steps: steps.len(),
                context: "split-step propagation",
            });
        }
        fft.forward(sx);
        fft.forward(sy);
        if let (Some(nz), Some(rng)) = (&noise, rng.as_mut()) {
            // Unnormalized forward FFT scales the per-bin variance by n.
            let var = nz.amp.psd(dz) * signal.grid.sample_rate * n as f64;
            add_circular_noise(sx, var, rng);
            add_circular_noise(sy, var, rng);
            record.rng_draws += 4 * n as u64;
        }
        pending = 0.5 * dz;
    }
    ops.apply(pending, sx, sy);
    fft.inverse(sx);
    fft.inverse(sy);
    if !out.is_finite() {
        return Err(Error::NonFinite {
            step: steps.len(),
            steps: steps.len(),
            context: "split-step propagation",
        });
    }
    record.exit_power = out.power();
    Ok((out, record))
}

/// Forward propagation through `fiber` with distributed ASE from `amp`.
pub fn ssfm_propagate<T: Real>(
    signal: &DualPolSignal<T>,
    fiber: &FiberSpec,
    amp: &AmpSpec,
    seed: u64,
) -> Result<(DualPolSignal<T>, PropagationRecord)> {
    fiber.validate()?;
    split_step(
        signal,
        &fiber.step_grid(),
        fiber.beta2_s2_per_km(),
        fiber.gamma_per_w_km,
        fiber.alpha_lin_per_km(),
        Some(StepNoise { amp, seed }),
    )
}
