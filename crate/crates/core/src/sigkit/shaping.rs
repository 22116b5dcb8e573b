use num_complex::Complex;

use super::{DualPolSignal, Grid, SymbolBlock};
use crate::error::{invalid, Error, Result};
use crate::fft::{bin_index, FftPair};
use crate::scalar::Real;

/// Raised-cosine spectrum with unit passband gain.
///
/// Satisfies `sum_k RC(f + k Rs) = 1` for every `f`, including `rolloff = 0`
/// where the band edge takes the value 1/2.
pub fn raised_cosine(f: f64, symbol_rate: f64, rolloff: f64) -> f64 {
    let af = f.abs();
    let half = 0.5 * symbol_rate;
    let tol = 1e-12 * symbol_rate;
    if rolloff <= 0.0 {
        return if af < half - tol {
            1.0
        } else if af <= half + tol {
            0.5
        } else {
            0.0
        };
    }
    let lo = (1.0 - rolloff) * half;
    let hi = (1.0 + rolloff) * half;
    if af <= lo {
        1.0
    } else if af >= hi {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI / (rolloff * symbol_rate) * (af - lo)).cos())
    }
}

/// Root-raised-cosine amplitude response, `sqrt(RC(f))`.
pub fn rrc_amplitude(f: f64, symbol_rate: f64, rolloff: f64) -> f64 {
    raised_cosine(f, symbol_rate, rolloff).sqrt()
}

fn check_rolloff(rolloff: f64) -> Result<()> {
    if (0.0..1.0).contains(&rolloff) {
        Ok(())
    } else {
        Err(invalid(format!("rolloff must be in [0, 1), got {rolloff}")))
    }
}

/// Frequency layout of digital subcarriers inside one channel.
///
/// Subcarrier `j` carries every `n_subcarriers`-th symbol of the channel block
/// (see [`SymbolBlock::deinterleave`]) at `symbol_rate / n_subcarriers`, with
/// its own RRC of the channel rolloff. Centers sit on the FFT bin grid,
/// `spacing_bins` apart, so circular frequency shifts stay exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierPlan {
    pub n_subcarriers: usize,
    pub spacing_bins: usize,
    /// Relative per-subcarrier power, mean 1.
    pub power_factors: Vec<f64>,
}

impl SubcarrierPlan {
    pub fn single() -> Self {
        SubcarrierPlan {
            n_subcarriers: 1,
            spacing_bins: 0,
            power_factors: vec![1.0],
        }
    }

    /// Layout for a channel block of `n_symbols`; the guard between adjacent
    /// subcarriers is the rolloff excess bandwidth.
    pub fn new(n_subcarriers: usize, n_symbols: usize, rolloff: f64) -> Result<Self> {
        check_rolloff(rolloff)?;
        if !matches!(n_subcarriers, 1 | 2 | 4 | 8) {
            return Err(invalid(format!(
                "unsupported subcarrier count {n_subcarriers} (expected 1, 2, 4 or 8)"
            )));
        }
        if !n_symbols.is_multiple_of(n_subcarriers) {
            return Err(invalid(format!(
                "{n_symbols} symbols cannot be split into {n_subcarriers} subcarriers"
            )));
        }
        if n_subcarriers == 1 {
            return Ok(Self::single());
        }
        let per_sc = (n_symbols / n_subcarriers) as f64;
        let mut spacing = (per_sc * (1.0 + rolloff) - 1e-9).ceil() as usize;
        if spacing % 2 == 1 {
            spacing += 1;
        }
        Ok(SubcarrierPlan {
            n_subcarriers,
            spacing_bins: spacing,
            power_factors: vec![1.0; n_subcarriers],
        })
    }

    /// Replaces the power factors; they are rescaled to mean 1.
    pub fn with_power_factors(mut self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.n_subcarriers {
            return Err(Error::LengthMismatch {
                expected: self.n_subcarriers,
                actual: factors.len(),
            });
        }
        if factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(invalid("subcarrier power factors must be positive"));
        }
        let mean = factors.iter().sum::<f64>() / factors.len() as f64;
        self.power_factors = factors.iter().map(|f| f / mean).collect();
        Ok(self)
    }

    /// Signed center bin of each subcarrier relative to the channel center.
    pub fn center_bins(&self) -> Vec<isize> {
        let n = self.n_subcarriers as isize;
        let half = self.spacing_bins as isize / 2;
        (0..n).map(|j| (2 * j - (n - 1)) * half).collect()
    }

    /// One-sided extent of the occupied band, in bins, for a channel block of `n_symbols`.
    pub fn half_extent_bins(&self, n_symbols: usize, rolloff: f64) -> f64 {
        let per_sc = (n_symbols / self.n_subcarriers) as f64;
        let max_c = self
            .center_bins()
            .iter()
            .map(|c| c.unsigned_abs())
            .max()
            .unwrap_or(0) as f64;
        max_c + 0.5 * per_sc * (1.0 + rolloff)
    }
}

/// Adds one RRC-shaped stream, shifted by `offset` bins, to spectrum `spec`.
fn add_shaped_stream<T: Real>(
    spec: &mut [Complex<T>],
    stream: &[Complex<T>],
    rolloff: f64,
    offset: isize,
    amplitude: f64,
) {
    let n_total = spec.len();
    let m = stream.len();
    let sps = n_total / m;
    let mut sym = stream.to_vec();
    FftPair::new(m).forward(&mut sym);
    // Bin units: the stream's symbol rate spans `m` bins.
    let reach = ((1.0 + rolloff) * 0.5 * m as f64).floor() as isize;
    for b in -reach..=reach {
        let g = rrc_amplitude(b as f64, m as f64, rolloff);
        if g == 0.0 {
            continue;
        }
        let gain = T::lit(sps as f64 * g * amplitude);
        let src = sym[bin_index(b, m)];
        spec[bin_index(b + offset, n_total)] += src * gain;
    }
}

/// Matched filter and symbol-instant sampling of the stream centered at `offset` bins.
pub(crate) fn demodulate_stream<T: Real>(
    spec: &[Complex<T>],
    m: usize,
    rolloff: f64,
    offset: isize,
    amplitude: f64,
) -> Vec<Complex<T>> {
    let n_total = spec.len();
    let sps = n_total / m;
    let mut acc = vec![Complex::<T>::default(); m];
    let reach = ((1.0 + rolloff) * 0.5 * m as f64).floor() as isize;
    for b in -reach..=reach {
        let g = rrc_amplitude(b as f64, m as f64, rolloff);
        if g == 0.0 {
            continue;
        }
        let gain = T::lit(g * amplitude / sps as f64);
        acc[bin_index(b, m)] += spec[bin_index(b + offset, n_total)] * gain;
    }
    FftPair::new(m).inverse(&mut acc);
    acc
}

/// Shapes the block as `plan.n_subcarriers` RRC subcarriers on `grid`.
///
/// Per-pol output power is `per_pol_power` times the mean symbol power.
pub fn shape_subcarriers<T: Real>(
    block: &SymbolBlock<T>,
    grid: Grid,
    rolloff: f64,
    plan: &SubcarrierPlan,
) -> Result<DualPolSignal<T>> {
    check_rolloff(rolloff)?;
    if grid.n_symbols != block.len() {
        return Err(Error::LengthMismatch {
            expected: grid.n_symbols,
            actual: block.len(),
        });
    }
    let n_total = grid.total_samples();
    if plan.half_extent_bins(block.len(), rolloff) > (n_total / 2) as f64 {
        return Err(Error::Aliasing(format!(
            "shaped band exceeds the grid: {} samples/symbol, rolloff {rolloff}",
            grid.samples_per_symbol
        )));
    }
    let streams = block.deinterleave(plan.n_subcarriers)?;
    let centers = plan.center_bins();
    let mut sx = vec![Complex::<T>::default(); n_total];
    let mut sy = vec![Complex::<T>::default(); n_total];
    for ((s, &c), &a) in streams.iter().zip(&centers).zip(&plan.power_factors) {
        let amp = (block.per_pol_power * a / plan.n_subcarriers as f64).sqrt();
        add_shaped_stream(&mut sx, &s.x, rolloff, c, amp);
        add_shaped_stream(&mut sy, &s.y, rolloff, c, amp);
    }
    let mut fft = FftPair::new(n_total);
    fft.inverse(&mut sx);
    fft.inverse(&mut sy);
    DualPolSignal::from_samples(grid, sx, sy)
}

/// Single-carrier root-raised-cosine shaping.
pub fn nyquist_shape<T: Real>(
    block: &SymbolBlock<T>,
    grid: Grid,
    rolloff: f64,
) -> Result<DualPolSignal<T>> {
    shape_subcarriers(block, grid, rolloff, &SubcarrierPlan::single())
}

/// Conjugate RRC filtering and sampling at symbol instants.
///
/// Output symbols are in physical units (sqrt(W)) with `per_pol_power = 1`.
pub fn matched_filter_downsample<T: Real>(
    signal: &DualPolSignal<T>,
    rolloff: f64,
) -> Result<SymbolBlock<T>> {
    check_rolloff(rolloff)?;
    let n = signal.grid.n_symbols;
    let mut fft = FftPair::new(signal.len());
    let mut sx = signal.x.clone();
    let mut sy = signal.y.clone();
    fft.forward(&mut sx);
    fft.forward(&mut sy);
    SymbolBlock::new(
        demodulate_stream(&sx, n, rolloff, 0, 1.0),
        demodulate_stream(&sy, n, rolloff, 0, 1.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::relative_rms_error;
    use crate::sigkit::{draw_symbols, InputLaw};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(n: usize, seed: u64) -> SymbolBlock<f64> {
        draw_symbols(
            &InputLaw::IidGaussian,
            n,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn raised_cosine_folds_to_one() {
        for &rho in &[0.0, 0.05, 0.3, 0.9] {
            for i in 0..200 {
                let f = -0.5 + i as f64 / 200.0;
                let s: f64 = (-3..=3)
                    .map(|k| raised_cosine(f + k as f64, 1.0, rho))
                    .sum();
                assert!((s - 1.0).abs() < 1e-12, "rho {rho} f {f}: {s}");
            }
        }
    }

    #[test]
    fn shape_matched_filter_roundtrip() {
        for &rho in &[0.0, 0.05, 0.1, 0.3] {
            let b = gaussian(256, 11).with_power(2.5e-3);
            let grid = Grid::new(10e9, 2, 256).unwrap();
            let sig = nyquist_shape(&b, grid, rho).unwrap();
            let rx = matched_filter_downsample(&sig, rho).unwrap();
            let tx = b.to_physical();
            assert!(relative_rms_error(&rx.x, &tx.x) < 1e-9);
            assert!(relative_rms_error(&rx.y, &tx.y) < 1e-9);
        }
    }

    #[test]
    fn shaped_power_equals_symbol_power() {
        let mut b = gaussian(512, 12);
        let (px, py) = b.mean_powers();
        b.x.iter_mut().for_each(|z| *z /= px.sqrt());
        b.y.iter_mut().for_each(|z| *z /= py.sqrt());
        let b = b.with_power(1e-3);
        let sig = nyquist_shape(&b, Grid::new(10e9, 8, 512).unwrap(), 0.05).unwrap();
        assert!((sig.per_pol_power() / 1e-3 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_block_gives_zero_signal() {
        let b = SymbolBlock::<f64>::zeros(64);
        let sig = nyquist_shape(&b, Grid::new(1e9, 4, 64).unwrap(), 0.1).unwrap();
        assert!(sig.x.iter().chain(&sig.y).all(|z| z.norm() == 0.0));
        let rx = matched_filter_downsample(&sig, 0.1).unwrap();
        assert!(rx.x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn matched_filtered_pulse_is_nyquist() {
        for rolloff in [0.0, 0.3] {
            let mut b = SymbolBlock::<f64>::zeros(64);
            b.x[0] = Complex::new(1.0, 0.0);
            let sps = 4;
            let sig = nyquist_shape(&b, Grid::new(1e9, sps, 64).unwrap(), rolloff).unwrap();
            // Between instants the transmitted pulse is nonzero.
            assert!(sig.x[sps / 2].norm() > 0.1);
            let rx = matched_filter_downsample(&sig, rolloff).unwrap();
            assert!((rx.x[0].re - 1.0).abs() < 1e-12, "{}", rx.x[0]);
            for k in 1..64 {
                assert!(rx.x[k].norm() < 1e-12, "k={k}: {}", rx.x[k]);
            }
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let b = gaussian(16, 1);
        assert!(nyquist_shape(&b, Grid::new(1e9, 2, 32).unwrap(), 0.1).is_err());
        assert!(nyquist_shape(&b, Grid::new(1e9, 2, 16).unwrap(), 1.0).is_err());
    }

    #[test]
    fn subcarrier_layout_is_on_even_bins() {
        let plan = SubcarrierPlan::new(4, 4096, 0.05).unwrap();
        assert_eq!(plan.spacing_bins, 1076);
        assert_eq!(plan.center_bins(), vec![-1614, -538, 538, 1614]);
        assert!(SubcarrierPlan::new(3, 4096, 0.05).is_err());
        assert!(SubcarrierPlan::new(4, 4094, 0.05).is_err());
    }

    #[test]
    fn matched_filter_output_noise_is_white() {
        // 1e5 symbols of white noise through the matched filter.
        let n = 100_000;
        let grid = Grid::new(1e9, 2, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let noise = draw_symbols::<f64, _>(&InputLaw::IidGaussian, 2 * n, &mut rng).unwrap();
        let sig = DualPolSignal::from_samples(grid, noise.x, noise.y).unwrap();
        let rx = matched_filter_downsample(&sig, 0.1).unwrap();
        let p0: f64 = rx.x.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        // Input variance 1 per sample, 2 samples/symbol: output variance 1/2.
        assert!((p0 - 0.5).abs() < 0.01, "{p0}");
        for lag in 1..4 {
            let c: Complex<f64> = (0..n)
                .map(|k| rx.x[k] * rx.x[(k + lag) % n].conj())
                .sum::<Complex<f64>>()
                / (n as f64 * p0);
            // Normalized autocorrelation has standard deviation ~ 1/sqrt(n).
            assert!(c.norm() < 3.0 / (n as f64).sqrt(), "lag {lag}: {c}");
        }
    }
}
