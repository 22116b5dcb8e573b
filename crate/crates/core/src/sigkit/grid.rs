use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::fft;
use crate::scalar::{mean_power, Real};

/// Uniform sampling grid for one circular block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    /// Samples per second.
    pub sample_rate: f64,
    pub samples_per_symbol: usize,
    pub n_symbols: usize,
}

impl Grid {
    pub fn new(symbol_rate: f64, samples_per_symbol: usize, n_symbols: usize) -> Result<Self> {
        if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
            return Err(invalid(format!(
                "symbol rate must be positive, got {symbol_rate}"
            )));
        }
        if samples_per_symbol == 0 || n_symbols == 0 {
            return Err(invalid("samples_per_symbol and n_symbols must be positive"));
        }
        if !(samples_per_symbol * n_symbols).is_multiple_of(2) {
            return Err(invalid(format!(
                "total samples {} must be even",
                samples_per_symbol * n_symbols
            )));
        }
        Ok(Grid {
            sample_rate: symbol_rate * samples_per_symbol as f64,
            samples_per_symbol,
            n_symbols,
        })
    }

    pub fn symbol_rate(&self) -> f64 {
        self.sample_rate / self.samples_per_symbol as f64
    }

    pub fn total_samples(&self) -> usize {
        self.samples_per_symbol * self.n_symbols
    }

    /// Sampling interval in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Frequency bin spacing in Hz.
    pub fn df(&self) -> f64 {
        self.sample_rate / self.total_samples() as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        fft::frequencies(self.total_samples(), self.sample_rate)
    }

    pub fn angular_frequencies(&self) -> Vec<f64> {
        fft::angular_frequencies(self.total_samples(), self.sample_rate)
    }

    /// Sample times centered on zero, `t_i = (i - N/2) dt`.
    pub fn times_centered(&self) -> Vec<f64> {
        let n = self.total_samples();
        (0..n)
            .map(|i| (i as f64 - (n / 2) as f64) * self.dt())
            .collect()
    }
}

/// Dual-polarization field on a [`Grid`], amplitudes in sqrt(W).
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolSignal<T: Real> {
    pub grid: Grid,
    pub x: Vec<Complex<T>>,
    pub y: Vec<Complex<T>>,
    /// Center frequency relative to the simulation band center, Hz.
    pub center_frequency_offset: f64,
}

impl<T: Real> DualPolSignal<T> {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.total_samples();
        DualPolSignal {
            grid,
            x: vec![Complex::default(); n],
            y: vec![Complex::default(); n],
            center_frequency_offset: 0.0,
        }
    }

    pub fn from_samples(grid: Grid, x: Vec<Complex<T>>, y: Vec<Complex<T>>) -> Result<Self> {
        let n = grid.total_samples();
        for len in [x.len(), y.len()] {
            if len != n {
                return Err(crate::Error::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        Ok(DualPolSignal {
            grid,
            x,
            y,
            center_frequency_offset: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Mean of `|x|^2 + |y|^2`, W.
    pub fn power(&self) -> f64 {
        mean_power(&self.x) + mean_power(&self.y)
    }

    pub fn per_pol_power(&self) -> f64 {
        0.5 * self.power()
    }

    /// Sum of `|x|^2 + |y|^2` over all samples.
    pub fn energy(&self) -> f64 {
        self.power() * self.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(&self.y)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Applies the real 2x2 rotation `[[c, -s], [s, c]]` to every sample.
    pub fn rotate_polarization(&mut self, angle: f64) {
        let (s, c) = angle.sin_cos();
        let (s, c) = (Complex::new(s, 0.0), Complex::new(c, 0.0));
        self.apply_jones([[c, -s], [s, c]]);
    }

    /// Multiplies every `(x, y)` sample pair by the 2x2 matrix `m`.
    pub fn apply_jones(&mut self, m: [[Complex<f64>; 2]; 2]) {
        let m = m.map(|row| row.map(|z| Complex::new(T::lit(z.re), T::lit(z.im))));
        for (a, b) in self.x.iter_mut().zip(self.y.iter_mut()) {
            let (ax, by) = (*a, *b);
            *a = m[0][0] * ax + m[0][1] * by;
            *b = m[1][0] * ax + m[1][1] * by;
        }
    }
}
