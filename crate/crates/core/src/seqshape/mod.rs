//! Sequence-selection shaping.
//!
//! Candidate blocks are drawn i.i.d. Gaussian, scored by the intrachannel
//! NLI they generate on a noiseless single-channel surrogate link, and only
//! the lowest-cost fraction is kept for transmission. Restricting the input
//! to `selection_rate` of the block space costs
//! `log2(1/selection_rate) / (2 block_len)` bits per symbol per polarization.

use std::path::Path;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fiberchan::{ssfm_propagate, AmpSpec, FiberSpec};
use crate::rxdsp::{cpe_align, dbp, edc, subcarrier_demux, DbpSpec};
use crate::scalar::{dbm_to_watts, Real};
use crate::seed::derive_seed;
use crate::sigkit::{draw_symbols, shape_subcarriers, Grid, InputLaw, SubcarrierPlan, SymbolBlock};

/// Receiver processing ahead of the cost measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Edc,
    Dbp(DbpSpec),
}

/// Noiseless single-channel link on which candidates are scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub fiber: FiberSpec,
    /// Launch power per polarization.
    pub launch_power_dbm: f64,
    pub symbol_rate: f64,
    #[serde(default = "default_sps")]
    pub samples_per_symbol: usize,
    pub rolloff: f64,
    #[serde(default = "one")]
    pub n_subcarriers: usize,
    #[serde(default = "default_termination")]
    pub termination: Termination,
}

fn default_sps() -> usize {
    2
}
fn one() -> usize {
    1
}
fn default_termination() -> Termination {
    Termination::Edc
}
fn default_block_len() -> usize {
    256
}
fn default_rate() -> f64 {
    0.002
}

impl Surrogate {
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            return Err(invalid("surrogate symbol_rate must be positive"));
        }
        if !self.launch_power_dbm.is_finite() {
            return Err(invalid("surrogate launch power must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default = "default_rate")]
    pub selection_rate: f64,
    pub surrogate: Surrogate,
}

impl SelectionSpec {
    pub fn validate(&self) -> Result<()> {
        check_rate(self.selection_rate)?;
        if self.block_len < 2 {
            return Err(invalid(format!(
                "block_len must be >= 2, got {}",
                self.block_len
            )));
        }
        self.surrogate.validate()
    }

    pub fn candidates_per_keep(&self) -> usize {
        ((1.0 / self.selection_rate).round() as usize).max(1)
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(invalid(format!(
            "selection_rate must be in (0, 1], got {rate}"
        )));
    }
    Ok(())
}

/// Kept sequences, lowest cost first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SequenceLibrary<T: Real> {
    pub spec: SelectionSpec,
    pub seed: u64,
    /// Unit mean per-polarization power over the whole library.
    pub blocks: Vec<SymbolBlock<T>>,
    /// NLI cost of each kept block as scored, in W.
    pub costs: Vec<f64>,
    /// Mean cost over all scored candidates, in W.
    pub population_mean_cost: f64,
    pub n_candidates: usize,
    pub n_failed: usize,
    /// Amplitude factor applied to the kept blocks to restore unit power.
    pub renormalization: f64,
}

impl<T: Real> SequenceLibrary<T> {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn mean_cost(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len().max(1) as f64
    }

    /// Transmission law drawing kept blocks uniformly with replacement.
    pub fn law(&self) -> InputLaw<T> {
        InputLaw::SelectedSequences(std::sync::Arc::new(self.blocks.clone()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let lib: Self = serde_json::from_reader(file)?;
        lib.check()?;
        Ok(lib)
    }

    fn check(&self) -> Result<()> {
        if self.blocks.len() != self.costs.len() {
            return Err(Error::LengthMismatch {
                expected: self.blocks.len(),
                actual: self.costs.len(),
            });
        }
        if self.blocks.iter().any(|b| b.len() != self.spec.block_len) {
            return Err(invalid("library blocks differ from the spec block length"));
        }
        if self.costs.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("library costs are not sorted"));
        }
        Ok(())
    }
}

/// Intrachannel NLI variance of `block` on the surrogate link, in W.
///
/// The block is launched at the surrogate power, propagated without noise,
/// EDC- or DBP-terminated, matched-filtered per subcarrier and compared with
/// the transmitted symbols after a per-polarization complex gain fit.
pub fn nli_cost<T: Real>(block: &SymbolBlock<T>, surrogate: &Surrogate) -> Result<f64> {
    surrogate.validate()?;
    let (px, py) = block.mean_powers();
    if px + py == 0.0 {
        return Ok(0.0);
    }
    let power = dbm_to_watts(surrogate.launch_power_dbm);
    let tx = block.clone().with_power(power);
    let grid = Grid::new(
        surrogate.symbol_rate,
        surrogate.samples_per_symbol,
        block.len(),
    )?;
    let plan = SubcarrierPlan::new(surrogate.n_subcarriers, block.len(), surrogate.rolloff)?;
    let sig = shape_subcarriers(&tx, grid, surrogate.rolloff, &plan)?;
    let (out, _) = ssfm_propagate(&sig, &surrogate.fiber, &AmpSpec::noiseless(), 0)?;
    let processed = match &surrogate.termination {
        Termination::Edc => edc(&out, &surrogate.fiber),
        Termination::Dbp(spec) => dbp(&out, &surrogate.fiber, spec)?,
    };
    let rx = subcarrier_demux(&processed, surrogate.rolloff, &plan)?;
    let tx_streams = tx.deinterleave(plan.n_subcarriers)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (r, t) in rx.iter().zip(&tx_streams) {
        let phys = t.to_physical();
        let (tpx, tpy) = phys.mean_powers();
        let h = if tpx > 0.0 && tpy > 0.0 {
            cpe_align(r, t)?.h
        } else {
            [Complex::new(1.0, 0.0); 2]
        };
        for (p, (rs, ts)) in [(&r.x, &phys.x), (&r.y, &phys.y)].into_iter().enumerate() {
            for (a, b) in rs.iter().zip(ts) {
                let a = Complex::new(a.re.f64(), a.im.f64());
                let b = Complex::new(b.re.f64(), b.im.f64());
                total += (a - h[p] * b).norm_sqr();
            }
            count += rs.len();
        }
    }
    let cost = total / count as f64;
    if !cost.is_finite() {
        return Err(invalid("nli_cost: non-finite cost"));
    }
    Ok(cost)
}

/// Indices of the `n_keep` smallest costs, ascending by cost, ties by index.
pub fn keep_lowest(costs: &[f64], n_keep: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..costs.len()).collect();
    idx.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    idx.truncate(n_keep);
    idx
}

fn candidate<T: Real>(spec: &SelectionSpec, seed: u64, index: usize) -> Result<SymbolBlock<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[index as u64]));
    draw_symbols(&InputLaw::IidGaussian, spec.block_len, &mut rng)
}

/// Draws `n_keep * candidates_per_keep` Gaussian candidates, scores them in
/// parallel and keeps the `n_keep` lowest-cost blocks.
///
/// Candidate `i` depends only on `(seed, i)`, so the result is independent
/// of the worker count. Candidates whose propagation fails are logged and
/// replaced by fresh ones.
pub fn select_sequences<T: Real>(
    spec: &SelectionSpec,
    n_keep: usize,
    seed: u64,
) -> Result<SequenceLibrary<T>> {
    spec.validate()?;
    if n_keep == 0 {
        return Err(invalid("n_keep must be >= 1"));
    }
    let target = n_keep * spec.candidates_per_keep();
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(target);
    let mut n_failed = 0;
    let mut next = 0usize;
    while scored.len() < target {
        let need = target - scored.len();
        if n_failed > 10 * target {
            return Err(invalid(format!(
                "sequence selection: {n_failed} candidate propagations failed"
            )));
        }
        let batch: Vec<(usize, Result<f64>)> = (next..next + need)
            .into_par_iter()
            .map(|i| {
                (
                    i,
                    candidate::<T>(spec, seed, i).and_then(|b| nli_cost(&b, &spec.surrogate)),
                )
            })
            .collect();
        next += need;
        for (i, r) in batch {
            match r {
                Ok(c) => scored.push((i, c)),
                Err(e) => {
                    log::warn!("candidate {i} skipped: {e}");
                    n_failed += 1;
                }
            }
        }
    }
    let costs: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let population_mean_cost = costs.iter().sum::<f64>() / costs.len() as f64;
    let kept = keep_lowest(&costs, n_keep);
    let mut blocks = kept
        .iter()
        .map(|&k| candidate::<T>(spec, seed, scored[k].0))
        .collect::<Result<Vec<_>>>()?;
    let mean_pow = blocks
        .iter()
        .map(|b| {
            let (px, py) = b.mean_powers();
            0.5 * (px + py)
        })
        .sum::<f64>()
        / blocks.len() as f64;
    if mean_pow <= 0.0 {
        return Err(Error::ZeroPower("select_sequences: kept blocks"));
    }
    let renormalization = mean_pow.sqrt().recip();
    blocks.iter_mut().for_each(|b| b.scale(renormalization));
    log::info!(
        "selected {n_keep} of {target} candidates: mean cost {:.3e} W vs population {:.3e} W",
        kept.iter().map(|&k| costs[k]).sum::<f64>() / n_keep as f64,
        population_mean_cost
    );
    Ok(SequenceLibrary {
        spec: spec.clone(),
        seed,
        blocks,
        costs: kept.iter().map(|&k| costs[k]).collect(),
        population_mean_cost,
        n_candidates: target,
        n_failed,
        renormalization,
    })
}

/// Rate cost of the selection, bits per symbol per polarization.
pub fn shaping_penalty(spec: &SelectionSpec) -> Result<f64> {
    penalty_bits(spec.selection_rate, spec.block_len)
}

/// `log2(1/selection_rate) / (2 block_len)`.
pub fn penalty_bits(selection_rate: f64, block_len: usize) -> Result<f64> {
    check_rate(selection_rate)?;
    if block_len == 0 {
        return Err(invalid("block_len must be >= 1"));
    }
    Ok((1.0 / selection_rate).log2() / (2 * block_len) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surrogate(power_dbm: f64, gamma: f64) -> Surrogate {
        let mut fiber = FiberSpec::standard_smf(200.0, 5.0);
        fiber.gamma_per_w_km = gamma;
        Surrogate {
            fiber,
            launch_power_dbm: power_dbm,
            symbol_rate: 10e9,
            samples_per_symbol: 2,
            rolloff: 0.05,
            n_subcarriers: 1,
            termination: Termination::Edc,
        }
    }

    fn spec(rate: f64) -> SelectionSpec {
        SelectionSpec {
            block_len: 64,
            selection_rate: rate,
            surrogate: surrogate(6.0, 1.27),
        }
    }

    fn gaussian(n: usize, seed: u64) -> SymbolBlock<f64> {
        draw_symbols(
            &InputLaw::IidGaussian,
            n,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn linear_surrogate_has_zero_cost() {
        let c = nli_cost(&gaussian(256, 1), &surrogate(10.0, 0.0)).unwrap();
        assert!(c < 1e-18, "{c}");
    }

    #[test]
    fn zero_block_zero_cost() {
        assert_eq!(
            nli_cost(&SymbolBlock::<f64>::zeros(256), &surrogate(10.0, 1.27)).unwrap(),
            0.0
        );
    }

    #[test]
    fn cost_superlinear_in_power() {
        let b = gaussian(256, 2);
        let c1 = nli_cost(&b, &surrogate(-6.0, 1.27)).unwrap();
        let c2 = nli_cost(&b, &surrogate(-6.0 + 10.0 * 2f64.log10(), 1.27)).unwrap();
        let ratio = c2 / c1;
        assert!(ratio > 2.0, "ratio {ratio}");
        // First-order NLI field scales as P^{3/2}, so its variance in W goes as P^3.
        assert!(ratio > 6.0 && ratio < 10.0, "ratio {ratio}");
    }

    #[test]
    fn invariant_to_phase_and_pol_swap() {
        let b = gaussian(128, 3);
        let s = surrogate(8.0, 1.27);
        let c0 = nli_cost(&b, &s).unwrap();
        let mut rot = b.clone();
        let r = Complex::from_polar(1.0, 0.9);
        rot.x
            .iter_mut()
            .chain(rot.y.iter_mut())
            .for_each(|z| *z *= r);
        let mut swap = b.clone();
        std::mem::swap(&mut swap.x, &mut swap.y);
        assert!((nli_cost(&rot, &s).unwrap() / c0 - 1.0).abs() < 1e-9);
        assert!((nli_cost(&swap, &s).unwrap() / c0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dbp_termination_reduces_cost() {
        let b = gaussian(128, 4);
        let s = surrogate(8.0, 1.27);
        let d = Surrogate {
            termination: Termination::Dbp(DbpSpec::ideal()),
            ..s.clone()
        };
        assert!(nli_cost(&b, &d).unwrap() < 1e-3 * nli_cost(&b, &s).unwrap());
    }

    #[test]
    fn penalty_values() {
        assert!((penalty_bits(0.002, 256).unwrap() - 0.01751).abs() < 5e-5);
        assert!((penalty_bits(0.002, 256).unwrap() - 500f64.log2() / 512.0).abs() < 1e-15);
        assert_eq!(penalty_bits(1.0, 256).unwrap(), 0.0);
        assert_eq!(penalty_bits(0.5, 1).unwrap(), 0.5);
        assert!(penalty_bits(0.0, 256).is_err());
        assert!(shaping_penalty(&spec(0.002)).is_ok());
    }

    #[test]
    fn full_rate_keeps_everything() {
        let lib = select_sequences::<f64>(&spec(1.0), 6, 5).unwrap();
        assert_eq!(lib.len(), 6);
        assert_eq!(lib.n_candidates, 6);
        assert!(
            (lib.mean_cost() - lib.population_mean_cost).abs() < 1e-12 * lib.population_mean_cost
        );
    }

    #[test]
    fn selection_keeps_lowest_and_renormalizes() {
        let lib = select_sequences::<f64>(&spec(0.1), 3, 6).unwrap();
        assert_eq!(lib.n_candidates, 30);
        assert!(lib.costs.windows(2).all(|w| w[0] <= w[1]));
        assert!(lib.mean_cost() < lib.population_mean_cost);
        // The kept maximum is at most the 10%-quantile boundary of the population.
        let mut all: Vec<f64> = (0..30)
            .map(|i| {
                nli_cost(
                    &candidate::<f64>(&lib.spec, 6, i).unwrap(),
                    &lib.spec.surrogate,
                )
                .unwrap()
            })
            .collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(*lib.costs.last().unwrap(), all[2]);
        let p: f64 = lib
            .blocks
            .iter()
            .map(|b| {
                let (x, y) = b.mean_powers();
                0.5 * (x + y)
            })
            .sum::<f64>()
            / 3.0;
        assert!((p - 1.0).abs() < 1e-12);
        assert!(lib.renormalization > 0.0);
    }

    #[test]
    fn deterministic_and_roundtrips() {
        let a = select_sequences::<f64>(&spec(0.25), 2, 9).unwrap();
        let b = select_sequences::<f64>(&spec(0.25), 2, 9).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lib.json");
        a.save(&path).unwrap();
        let back = SequenceLibrary::<f64>::load(&path).unwrap();
        assert_eq!(a, back);
        for (p, q) in a.blocks.iter().zip(&back.blocks) {
            for (u, v) in p.x.iter().zip(&q.x) {
                assert_eq!(u.re.to_bits(), v.re.to_bits());
                assert_eq!(u.im.to_bits(), v.im.to_bits());
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(select_sequences::<f64>(&spec(0.0), 1, 0).is_err());
        assert!(select_sequences::<f64>(&spec(1.5), 1, 0).is_err());
        assert!(select_sequences::<f64>(&spec(0.5), 0, 0).is_err());
        let mut s = spec(0.5);
        s.block_len = 1;
        assert!(select_sequences::<f64>(&s, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn smaller_rate_never_raises_kept_mean(
            costs in prop::collection::vec(0.0f64..1.0, 1..200),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let k = |r: f64| ((r * costs.len() as f64).round() as usize).max(1);
            let mean = |idx: Vec<usize>| idx.iter().map(|&i| costs[i]).sum::<f64>() / idx.len() as f64;
            let m_lo = mean(keep_lowest(&costs, k(lo)));
            let m_hi = mean(keep_lowest(&costs, k(hi)));
            prop_assert!(m_lo <= m_hi + 1e-12);
        }
    }
}
