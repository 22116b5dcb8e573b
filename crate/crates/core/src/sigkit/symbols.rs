use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{mean_power, Real};

/// Dual-polarization symbol sequence.
///
/// `x` and `y` hold normalized symbols; the physical amplitude is
/// `sqrt(per_pol_power) * symbol` in sqrt(W). Receiver outputs are already in
/// physical units and carry `per_pol_power = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SymbolBlock<T: Real> {
    pub x: Vec<Complex<T>>,
    pub y: Vec<Complex<T>>,
    pub per_pol_power: f64,
}

impl<T: Real> SymbolBlock<T> {
    pub fn new(x: Vec<Complex<T>>, y: Vec<Complex<T>>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        Ok(SymbolBlock {
            x,
            y,
            per_pol_power: 1.0,
        })
    }

    pub fn zeros(n: usize) -> Self {
        SymbolBlock {
            x: vec![Complex::default(); n],
            y: vec![Complex::default(); n],
            per_pol_power: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn with_power(mut self, per_pol_power: f64) -> Self {
        self.per_pol_power = per_pol_power;
        self
    }

    /// Empirical `(mean |x|^2, mean |y|^2)` of the stored symbols.
    pub fn mean_powers(&self) -> (f64, f64) {
        (mean_power(&self.x), mean_power(&self.y))
    }

    /// Same block with `per_pol_power` folded into the symbols.
    pub fn to_physical(&self) -> Self {
        let a = T::lit(self.per_pol_power.sqrt());
        SymbolBlock {
            x: self.x.iter().map(|z| z * a).collect(),
            y: self.y.iter().map(|z| z * a).collect(),
            per_pol_power: 1.0,
        }
    }

    /// Multiplies every symbol by `factor`.
    pub fn scale(&mut self, factor: f64) {
        let f = T::lit(factor);
        for z in self.x.iter_mut().chain(self.y.iter_mut()) {
            *z *= f;
        }
    }

    /// Drops `guard` symbols from each end.
    pub fn trimmed(&self, guard: usize) -> Self {
        let n = self.len();
        let (lo, hi) = if 2 * guard < n {
            (guard, n - guard)
        } else {
            (0, n)
        };
        SymbolBlock {
            x: self.x[lo..hi].to_vec(),
            y: self.y[lo..hi].to_vec(),
            per_pol_power: self.per_pol_power,
        }
    }

    /// Splits into `n_streams` blocks, symbol `i` going to stream `i % n_streams`.
    pub fn deinterleave(&self, n_streams: usize) -> Result<Vec<Self>> {
        if n_streams == 0 || !self.len().is_multiple_of(n_streams) {
            return Err(invalid(format!(
                "block length {} not divisible into {n_streams} streams",
                self.len()
            )));
        }
        let mut out: Vec<Self> = (0..n_streams)
            .map(|_| SymbolBlock {
                x: Vec::with_capacity(self.len() / n_streams),
                y: Vec::with_capacity(self.len() / n_streams),
                per_pol_power: self.per_pol_power,
            })
            .collect();
        for (i, (a, b)) in self.x.iter().zip(&self.y).enumerate() {
            out[i % n_streams].x.push(*a);
            out[i % n_streams].y.push(*b);
        }
        Ok(out)
    }

    /// Inverse of [`SymbolBlock::deinterleave`].
    pub fn interleave(streams: &[Self]) -> Result<Self> {
        let first = streams
            .first()
            .ok_or_else(|| invalid("no streams to interleave"))?;
        let m = first.len();
        if streams.iter().any(|s| s.len() != m) {
            return Err(invalid("streams have different lengths"));
        }
        let mut out = SymbolBlock {
            x: Vec::with_capacity(m * streams.len()),
            y: Vec::with_capacity(m * streams.len()),
            per_pol_power: first.per_pol_power,
        };
        for k in 0..m {
            for s in streams {
                out.x.push(s.x[k]);
                out.y.push(s.y[k]);
            }
        }
        Ok(out)
    }

    pub fn concat(blocks: &[Self]) -> Self {
        let mut out = SymbolBlock::zeros(0);
        if let Some(b) = blocks.first() {
            out.per_pol_power = b.per_pol_power;
        }
        for b in blocks {
            out.x.extend_from_slice(&b.x);
            out.y.extend_from_slice(&b.y);
        }
        out
    }
}

/// Statistical law of the transmitted symbols.
#[derive(Debug, Clone)]
pub enum InputLaw<T: Real> {
    /// Circularly-symmetric unit-variance complex Gaussian, independent per polarization.
    IidGaussian,
    /// QAM with `P(c) ∝ exp(-lambda |c|^2)`, `c` on the odd-integer lattice
    /// before normalization to unit mean power.
    MaxwellBoltzmannQam { order: usize, lambda: f64 },
    /// Uniform draws with replacement from a library of equal-length blocks.
    SelectedSequences(Arc<Vec<SymbolBlock<T>>>),
}

/// Points of a square QAM on the odd-integer lattice `{±1, ±3, ...}²`.
pub fn qam_points(order: usize) -> Result<Vec<Complex<f64>>> {
    let side = match order {
        16 => 4,
        64 => 8,
        256 => 16,
        _ => return Err(Error::UnsupportedQamOrder(order)),
    };
    let level = |i: usize| (2 * i) as f64 - (side - 1) as f64;
    Ok((0..side)
        .flat_map(|i| (0..side).map(move |q| Complex::new(level(i), level(q))))
        .collect())
}

/// Maxwell–Boltzmann probabilities over [`qam_points`].
pub fn mb_probabilities(order: usize, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let pts = qam_points(order)?;
    // Offset by the minimum energy so large lambda cannot underflow every weight.
    let e_min = pts
        .iter()
        .map(|c| c.norm_sqr())
        .fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = pts
        .iter()
        .map(|c| (-lambda * (c.norm_sqr() - e_min)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / z).collect())
}

fn gaussian_symbol<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(
        T::lit(re * std::f64::consts::FRAC_1_SQRT_2),
        T::lit(im * std::f64::consts::FRAC_1_SQRT_2),
    )
}

pub fn draw_symbols<T: Real, R: Rng + ?Sized>(
    law: &InputLaw<T>,
    n: usize,
    rng: &mut R,
) -> Result<SymbolBlock<T>> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    match law {
        InputLaw::IidGaussian => {
            let x = (0..n).map(|_| gaussian_symbol(rng)).collect();
            let y = (0..n).map(|_| gaussian_symbol(rng)).collect();
            SymbolBlock::new(x, y)
        }
        InputLaw::MaxwellBoltzmannQam { order, lambda } => {
            let pts = qam_points(*order)?;
            let probs = mb_probabilities(*order, *lambda)?;
            let energy: f64 = pts.iter().zip(&probs).map(|(c, p)| p * c.norm_sqr()).sum();
            let norm = energy.sqrt().recip();
            let pts: Vec<Complex<T>> = pts
                .iter()
                .map(|c| Complex::new(T::lit(c.re * norm), T::lit(c.im * norm)))
                .collect();
            let dist = WeightedIndex::new(&probs).map_err(|e| invalid(e.to_string()))?;
            let x = (0..n).map(|_| pts[dist.sample(rng)]).collect();
            let y = (0..n).map(|_| pts[dist.sample(rng)]).collect();
            SymbolBlock::new(x, y)
        }
        InputLaw::SelectedSequences(library) => {
            let first = library
                .first()
                .ok_or_else(|| invalid("sequence library is empty"))?;
            let len = first.len();
            if len == 0 || !n.is_multiple_of(len) {
                return Err(invalid(format!(
                    "library block length {len} does not divide n = {n}"
                )));
            }
            let picks: Vec<SymbolBlock<T>> = (0..n / len)
                .map(|_| library[rng.gen_range(0..library.len())].clone())
                .collect();
            Ok(SymbolBlock::concat(&picks).with_power(1.0))
        }
    }
}
