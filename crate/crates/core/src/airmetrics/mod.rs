//! Achievable information rates under mismatched detection metrics.
//!
//! All rates are in bits per symbol per polarization.

mod gaussian;
mod ppn;
mod tune;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use gaussian::{air_gaussian, effective_snr};
pub use ppn::{air_ppn, air_ppn_detailed, PpnOutcome, PpnParams};
pub use tune::{tune_ppn_params, PpnGrid};

/// Auxiliary detection metric `q(y|x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectionMetric {
    /// Memoryless Gaussian with variance fit to the data.
    Awgn,
    /// Phase-and-polarization-noise particle metric.
    Ppn(PpnParams),
}

/// Monte Carlo AIR estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AirEstimate {
    pub air: f64,
    pub std_err: f64,
    pub n_symbols_used: usize,
}

impl AirEstimate {
    /// Clamps `air` at zero; a negative mismatched bound carries no information.
    pub fn clamped(mut self) -> Self {
        if self.air < 0.0 {
            self.air = 0.0;
        }
        self
    }

    /// Average of independent estimates of the same quantity.
    ///
    /// With two or more parts the standard error is the spread of the part
    /// means; a single part keeps its own.
    pub fn combine(parts: &[AirEstimate]) -> AirEstimate {
        let n = parts.len();
        if n == 0 {
            return AirEstimate::default();
        }
        let mean = parts.iter().map(|p| p.air).sum::<f64>() / n as f64;
        let std_err = if n >= 2 {
            let var = parts.iter().map(|p| (p.air - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            parts[0].std_err
        };
        AirEstimate {
            air: mean,
            std_err,
            n_symbols_used: parts.iter().map(|p| p.n_symbols_used).sum(),
        }
    }

    /// Subtracts a deterministic rate penalty and re-clamps.
    pub fn minus(self, bits: f64) -> Self {
        AirEstimate {
            air: self.air - bits,
            ..self
        }
        .clamped()
    }
}

/// `log2(1 + snr)`.
pub fn linear_capacity(snr: f64) -> Result<f64> {
    if snr.is_nan() || snr < 0.0 {
        return Err(invalid(format!("snr must be >= 0, got {snr}")));
    }
    Ok((1.0 + snr).log2())
}

/// Mean and batch-means standard error of a per-symbol series.
pub(crate) fn batch_mean(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = batches.min(n);
    if b < 2 {
        return (mean, 0.0);
    }
    let size = n / b;
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let chunk = &values[i * size..(i + 1) * size];
            chunk.iter().sum::<f64>() / size as f64
        })
        .collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}


#[cfg(test)]
pub(crate) mod testutil {
    use num_complex::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use crate::sigkit::{draw_symbols, InputLaw, SymbolBlock};

    /// Gaussian input through Wiener phase noise, a Wiener polarization
    /// rotation and AWGN at the given SNR. Transmit power 1 mW per pol.
    pub fn impaired(
        n: usize,
        snr: f64,
        phase_var: f64,
        pol_var: f64,
        seed: u64,
    ) -> (SymbolBlock<f64>, SymbolBlock<f64>) {
        let p = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tx = draw_symbols(&InputLaw::IidGaussian, n, &mut rng)
            .unwrap()
            .with_power(p);
        let noise = draw_symbols::<f64, _>(&InputLaw::IidGaussian, n, &mut rng).unwrap();
        let sd_n = (p / snr).sqrt();
        let phys = tx.to_physical();
        let mut rx = phys.clone();
        let (mut theta, mut phi) = (0.3, 0.0);
        for k in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            theta += phase_var.sqrt() * a;
            phi += pol_var.sqrt() * b;
            let r = Complex::from_polar(1.0, theta);
            let (s, c) = phi.sin_cos();
            let (x, y) = (phys.x[k], phys.y[k]);
            rx.x[k] = r * (x * c - y * s) + noise.x[k] * sd_n;
            rx.y[k] = r * (x * s + y * c) + noise.y[k] * sd_n;
        }
        (tx, rx)
    }
}
