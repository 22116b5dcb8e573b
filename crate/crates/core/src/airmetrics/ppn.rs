//! Phase-and-polarization-noise metric.
//!
//! Auxiliary channel, per dual-polarization symbol `k`:
//!
//! ```text
//! y_k = g e^{j theta_k} R(phi_k) x_k + n_k,   R(phi) = [[cos, -sin], [sin, cos]]
//! theta_k = theta_{k-1} + N(0, q_theta),      phi_k = phi_{k-1} + N(0, q_phi)
//! n_k ~ CN(0, sigma^2 I)
//! ```
//!
//! `q(y_k | y^{k-1}, x^k)` comes from a particle filter over `(theta, phi)`.
//! With an isotropic Gaussian input the output law does not depend on the
//! state, so the denominator `q(y_k | y^{k-1})` is the memoryless
//! `CN(0, (g^2 P + sigma^2) I)`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{batch_mean, AirEstimate};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::sigkit::SymbolBlock;

/// Half-width of the data-aided window used to fit `g` and `sigma^2`.
const FIT_HALF_WINDOW: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpnParams {
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    /// Wiener increment variance of the common phase, rad²/symbol.
    pub phase_step_var: f64,
    /// Wiener increment variance of the polarization rotation angle, rad²/symbol.
    pub pol_step_var: f64,
    /// Multiplier on the fitted noise variance.
    #[serde(default = "one")]
    pub noise_scale: f64,
    #[serde(default = "one_usize")]
    pub n_subcarriers: usize,
    /// Leading symbols used to initialize the filter and excluded from the average.
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_particles() -> usize {
    64
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_burn_in() -> usize {
    64
}

impl Default for PpnParams {
    fn default() -> Self {
        PpnParams {
            n_particles: default_particles(),
            phase_step_var: 1e-4,
            pol_step_var: 1e-5,
            noise_scale: 1.0,
            n_subcarriers: 1,
            burn_in: default_burn_in(),
            seed: 0,
        }
    }
}

impl PpnParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("n_particles must be >= 1"));
        }
        if !(self.phase_step_var >= 0.0 && self.pol_step_var >= 0.0) {
            return Err(invalid("PPN step variances must be >= 0"));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(invalid("noise_scale must be positive"));
        }
        if self.n_subcarriers == 0 {
            return Err(invalid("n_subcarriers must be >= 1"));
        }
        Ok(())
    }
}

/// Full output of [`air_ppn_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct PpnOutcome {
    pub estimate: AirEstimate,
    /// Per-subcarrier estimates.
    pub per_stream: Vec<AirEstimate>,
    pub resamples: usize,
    /// Steps whose effective sample size fell below 1% of the particles.
    pub degenerate_steps: usize,
    /// Set when degenerate steps exceed 10% of the filtered symbols.
    pub degenerate: bool,
}

struct Fit {
    gain: f64,
    noise_var: f64,
    power: f64,
}

fn to_c64<T: Real>(z: &Complex<T>) -> Complex<f64> {
    Complex::new(z.re.f64(), z.im.f64())
}

/// Data-aided fit of the common gain `g`, noise variance and input power
/// using a sliding window short enough to follow slow phase drifts.
fn fit_stream(tx: &[[Complex<f64>; 2]], rx: &[[Complex<f64>; 2]]) -> Result<Fit> {
    let n = tx.len();
    let w = FIT_HALF_WINDOW.min((n.saturating_sub(1)) / 2).max(1);
    let span = 2 * w + 1;
    let power = tx
        .iter()
        .map(|s| s[0].norm_sqr() + s[1].norm_sqr())
        .sum::<f64>()
        / (2 * n) as f64;
    if power == 0.0 {
        return Err(Error::ZeroPower(
            "air_ppn: transmitted stream has zero power",
        ));
    }
    let mut res = 0.0;
    let mut gain2 = 0.0;
    for p in 0..2 {
        // Circular sliding sums of y x* and |x|^2.
        let mut num = Complex::new(0.0, 0.0);
        let mut den = 0.0;
        for d in 0..span {
            let j = (d + n - w) % n;
            num += rx[j][p] * tx[j][p].conj();
            den += tx[j][p].norm_sqr();
        }
        for k in 0..n {
            let h = if den > 0.0 {
                num / den
            } else {
                Complex::new(0.0, 0.0)
            };
            res += (rx[k][p] - h * tx[k][p]).norm_sqr();
            gain2 += h.norm_sqr();
            let out = (k + n - w) % n;
            let inn = (k + w + 1) % n;
            num += rx[inn][p] * tx[inn][p].conj() - rx[out][p] * tx[out][p].conj();
            den += tx[inn][p].norm_sqr() - tx[out][p].norm_sqr();
        }
    }
    // One complex parameter fit per window.
    let noise_var = res / (2 * n) as f64 * span as f64 / (span - 1) as f64;
    let gain2 = gain2 / (2 * n) as f64 - noise_var / (power * span as f64);
    if noise_var.is_nan() || noise_var <= 0.0 {
        return Err(invalid("air_ppn: noise-free data"));
    }
    Ok(Fit {
        gain: gain2.max(0.0).sqrt(),
        noise_var,
        power,
    })
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct StreamResult {
    values: Vec<f64>,
    resamples: usize,
    degenerate_steps: usize,
}

fn filter_stream(
    tx: &[[Complex<f64>; 2]],
    rx: &[[Complex<f64>; 2]],
    params: &PpnParams,
    seed: u64,
) -> Result<StreamResult> {
    let n = tx.len();
    let fit = fit_stream(tx, rx)?;
    let sigma2 = fit.noise_var * params.noise_scale;
    let g = fit.gain;
    let np = params.n_particles;
    let burn_in = params.burn_in.min(n / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Initial phase from the burn-in segment; spread matched to its accuracy.
    let init_len = burn_in.max(1);
    let c: Complex<f64> = (0..init_len)
        .map(|k| rx[k][0] * tx[k][0].conj() + rx[k][1] * tx[k][1].conj())
        .sum();
    let theta0 = c.arg();
    let snr = (g * g * fit.power / sigma2).max(1e-3);
    let init_var = 1.0 / (4.0 * snr * init_len as f64);
    let sd_theta0 = (init_var + params.phase_step_var * init_len as f64).sqrt();
    let sd_phi0 = (init_var + params.pol_step_var * init_len as f64).sqrt();
    let mut theta: Vec<f64> = (0..np)
        .map(|_| theta0 + sd_theta0 * gauss(&mut rng))
        .collect();
    let mut phi: Vec<f64> = (0..np).map(|_| sd_phi0 * gauss(&mut rng)).collect();
    let mut logw = vec![-(np as f64).ln(); np];
    let mut ll = vec![0.0; np];
    let mut tmp = vec![0.0; np];

    let sd_theta = params.phase_step_var.sqrt();
    let sd_phi = params.pol_step_var.sqrt();
    let norm_num = -2.0 * (std::f64::consts::PI * sigma2).ln();
    let s2 = g * g * fit.power + sigma2;
    let norm_den = -2.0 * (std::f64::consts::PI * s2).ln();
    let inv_ln2x2 = 1.0 / (2.0 * std::f64::consts::LN_2);

    let mut values = Vec::with_capacity(n - burn_in);
    let mut resamples = 0;
    let mut degenerate_steps = 0;
    let mut idx_buf = vec![0usize; np];

    for k in 0..n {
        let [x1, x2] = tx[k];
        let [y1, y2] = rx[k];
        for i in 0..np {
            if sd_theta > 0.0 {
                theta[i] += sd_theta * gauss(&mut rng);
            }
            if sd_phi > 0.0 {
                phi[i] += sd_phi * gauss(&mut rng);
            }
            let (sp, cp) = phi[i].sin_cos();
            let rot = Complex::from_polar(g, theta[i]);
            let m1 = rot * (x1 * cp - x2 * sp);
            let m2 = rot * (x1 * sp + x2 * cp);
            ll[i] = -((y1 - m1).norm_sqr() + (y2 - m2).norm_sqr()) / sigma2;
        }
        for i in 0..np {
            tmp[i] = logw[i] + ll[i];
        }
        let log_num = log_sum_exp(&tmp) - log_sum_exp(&logw) + norm_num;
        if !log_num.is_finite() {
            return Err(invalid("air_ppn: particle likelihoods underflowed"));
        }
        let log_den = norm_den - (y1.norm_sqr() + y2.norm_sqr()) / s2;
        if k >= burn_in {
            values.push((log_num - log_den) * inv_ln2x2);
        }

        // Weight update and normalization.
        let lse = log_sum_exp(&tmp);
        let mut sum_w2 = 0.0;
        for i in 0..np {
            logw[i] = tmp[i] - lse;
            let w = logw[i].exp();
            sum_w2 += w * w;
        }
        let ess = 1.0 / sum_w2;
        if ess < 0.01 * np as f64 {
            degenerate_steps += 1;
        }
        if ess < 0.5 * np as f64 {
            // Systematic resampling.
            let u0: f64 = rng.gen::<f64>() / np as f64;
            let mut cum = 0.0;
            let mut j = 0;
            for (i, slot) in idx_buf.iter_mut().enumerate() {
                let u = u0 + i as f64 / np as f64;
                while j < np - 1 && cum + logw[j].exp() < u {
                    cum += logw[j].exp();
                    j += 1;
                }
                *slot = j;
            }
            let t: Vec<f64> = idx_buf.iter().map(|&j| theta[j]).collect();
            let p: Vec<f64> = idx_buf.iter().map(|&j| phi[j]).collect();
            theta = t;
            phi = p;
            logw.iter_mut().for_each(|w| *w = -(np as f64).ln());
            resamples += 1;
        }
    }
    Ok(StreamResult {
        values,
        resamples,
        degenerate_steps,
    })
}

fn pack<T: Real>(b: &SymbolBlock<T>, scale: f64) -> Vec<[Complex<f64>; 2]> {
    b.x.iter()
        .zip(&b.y)
        .map(|(a, c)| [to_c64(a) * scale, to_c64(c) * scale])
        .collect()
}

/// PPN-metric AIR with diagnostics; one stream per subcarrier.
pub fn air_ppn_detailed<T: Real>(
    tx: &[SymbolBlock<T>],
    rx: &[SymbolBlock<T>],
    params: &PpnParams,
) -> Result<PpnOutcome> {
    params.validate()?;
    if tx.len() != params.n_subcarriers || rx.len() != params.n_subcarriers {
        return Err(invalid(format!(
            "metric expects {} subcarrier streams, got {} tx / {} rx",
            params.n_subcarriers,
            tx.len(),
            rx.len()
        )));
    }
    let mut per_stream = Vec::with_capacity(tx.len());
    let mut resamples = 0;
    let mut degenerate_steps = 0;
    let mut filtered = 0;
    for (j, (t, r)) in tx.iter().zip(rx).enumerate() {
        if t.len() != r.len() {
            return Err(Error::LengthMismatch {
                expected: t.len(),
                actual: r.len(),
            });
        }
        if t.len() < 16 {
            return Err(invalid(format!(
                "stream {j} too short: {} symbols",
                t.len()
            )));
        }
        let tp = pack(t, t.per_pol_power.sqrt());
        let rp = pack(r, r.per_pol_power.sqrt());
        let seed = params
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(j as u64 + 1);
        let res = filter_stream(&tp, &rp, params, seed)?;
        let (mean, se) = batch_mean(&res.values, 8);
        per_stream.push(AirEstimate {
            air: mean,
            std_err: se,
            n_symbols_used: res.values.len(),
        });
        resamples += res.resamples;
        degenerate_steps += res.degenerate_steps;
        filtered += t.len();
    }
    let k = per_stream.len() as f64;
    let estimate = AirEstimate {
        air: per_stream.iter().map(|e| e.air).sum::<f64>() / k,
        std_err: per_stream
            .iter()
            .map(|e| e.std_err.powi(2))
            .sum::<f64>()
            .sqrt()
            / k,
        n_symbols_used: per_stream.iter().map(|e| e.n_symbols_used).sum(),
    }
    .clamped();
    let degenerate = degenerate_steps as f64 > 0.1 * filtered as f64;
    if degenerate {
        log::warn!("PPN filter degenerate on {degenerate_steps} of {filtered} steps");
    }
    Ok(PpnOutcome {
        estimate,
        per_stream,
        resamples,
        degenerate_steps,
        degenerate,
    })
}

/// PPN-metric AIR averaged over subcarriers.
pub fn air_ppn<T: Real>(
    tx: &[SymbolBlock<T>],
    rx: &[SymbolBlock<T>],
    params: &PpnParams,
) -> Result<AirEstimate> {
    Ok(air_ppn_detailed(tx, rx, params)?.estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airmetrics::testutil::impaired;
    use crate::airmetrics::{air_gaussian, linear_capacity};

    fn params(q_theta: f64, q_phi: f64) -> PpnParams {
        PpnParams {
            phase_step_var: q_theta,
            pol_step_var: q_phi,
            seed: 7,
            ..PpnParams::default()
        }
    }

    fn one(tx: SymbolBlock<f64>, rx: SymbolBlock<f64>, p: &PpnParams) -> AirEstimate {
        air_ppn(&[tx], &[rx], p).unwrap()
    }

    #[test]
    fn matches_gaussian_without_phase_noise() {
        let (tx, rx) = impaired(20_000, 10f64.powf(1.5), 0.0, 0.0, 1);
        let g = air_gaussian(&tx, &rx).unwrap();
        let p = one(tx, rx, &params(1e-7, 1e-8));
        assert!((p.air - g.air).abs() < 0.05, "ppn {p:?} gauss {g:?}");
    }

    #[test]
    fn gains_under_wiener_phase_noise() {
        let snr = 10f64.powf(1.5);
        let (tx, rx) = impaired(20_000, snr, 1e-3, 0.0, 2);
        let g = air_gaussian(&tx, &rx).unwrap();
        let p = one(tx, rx, &params(1e-3, 1e-7));
        assert!(p.air - g.air >= 0.3, "ppn {p:?} gauss {g:?}");
        assert!(p.air <= linear_capacity(snr).unwrap() + 2.0 * p.std_err);
    }

    #[test]
    fn tracks_polarization_drift() {
        let snr = 10f64.powf(1.5);
        let (tx, rx) = impaired(20_000, snr, 1e-5, 1e-4, 3);
        let with = one(tx.clone(), rx.clone(), &params(1e-5, 1e-4));
        let without = one(tx, rx, &params(1e-5, 0.0));
        assert!(with.air > without.air + 0.1, "{with:?} vs {without:?}");
    }

    #[test]
    fn particle_count_converged() {
        let (tx, rx) = impaired(20_000, 10f64.powf(1.5), 1e-4, 1e-5, 4);
        let a = one(tx.clone(), rx.clone(), &params(1e-4, 1e-5));
        let b = one(
            tx,
            rx,
            &PpnParams {
                n_particles: 128,
                ..params(1e-4, 1e-5)
            },
        );
        let sigma = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        assert!((a.air - b.air).abs() < 2.0 * sigma, "{a:?} {b:?}");
    }

    #[test]
    fn below_capacity() {
        for (i, snr_db) in [0.0, 10.0, 20.0].iter().enumerate() {
            let snr = 10f64.powf(snr_db / 10.0);
            let (tx, rx) = impaired(10_000, snr, 0.0, 0.0, 20 + i as u64);
            let p = one(tx, rx, &params(1e-6, 1e-7));
            assert!(
                p.air <= linear_capacity(snr).unwrap() + 2.0 * p.std_err,
                "{snr_db}: {p:?}"
            );
        }
    }

    #[test]
    fn global_phase_invariance() {
        let (tx, rx) = impaired(4096, 30.0, 1e-4, 0.0, 5);
        let a = one(tx.clone(), rx.clone(), &params(1e-4, 1e-6));
        let r = Complex::from_polar(1.0, 2.0);
        let mut rx2 = rx;
        rx2.x
            .iter_mut()
            .chain(rx2.y.iter_mut())
            .for_each(|z| *z *= r);
        let b = one(tx, rx2, &params(1e-4, 1e-6));
        assert!((a.air - b.air).abs() < 1e-6, "{a:?} {b:?}");
    }

    #[test]
    fn deterministic_for_seed() {
        let (tx, rx) = impaired(4096, 30.0, 1e-4, 1e-5, 6);
        let a = one(tx.clone(), rx.clone(), &params(1e-4, 1e-5));
        let b = one(tx, rx, &params(1e-4, 1e-5));
        assert_eq!(a, b);
    }

    #[test]
    fn subcarrier_average_and_checks() {
        let (t1, r1) = impaired(4096, 30.0, 1e-4, 0.0, 8);
        let (t2, r2) = impaired(4096, 10.0, 1e-4, 0.0, 9);
        let p = PpnParams {
            n_subcarriers: 2,
            ..params(1e-4, 1e-6)
        };
        let out = air_ppn_detailed(&[t1.clone(), t2.clone()], &[r1.clone(), r2], &p).unwrap();
        let mean = 0.5 * (out.per_stream[0].air + out.per_stream[1].air);
        assert!((out.estimate.air - mean).abs() < 1e-12);
        assert!(out.per_stream[0].air > out.per_stream[1].air);
        assert!(!out.degenerate);
        assert!(air_ppn(std::slice::from_ref(&t1), std::slice::from_ref(&r1), &p).is_err());
        assert!(air_ppn(
            std::slice::from_ref(&t1),
            &[r1.trimmed(1)],
            &params(1e-4, 0.0)
        )
        .is_err());
        assert!(air_ppn(
            &[t1],
            &[r1],
            &PpnParams {
                n_particles: 0,
                ..params(1e-4, 0.0)
            }
        )
        .is_err());
    }

    #[test]
    fn params_json_defaults() {
        let p: PpnParams =
            serde_json::from_str(r#"{"phase_step_var":1e-4,"pol_step_var":1e-6}"#).unwrap();
        assert_eq!(p.n_particles, 64);
        assert_eq!(p.noise_scale, 1.0);
        assert_eq!(p.burn_in, 64);
    }
}
