//! Monte Carlo execution of sweep points.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, InputSpec, MetricSpec, Precision, Processing, Technique};
use crate::airmetrics::{
    air_gaussian, air_ppn, effective_snr, tune_ppn_params, AirEstimate, PpnParams,
};
use crate::error::{Error, Result};
use crate::fiberchan::ssfm_propagate;
use crate::rxdsp::{dbp, edc, subcarrier_demux};
use crate::scalar::{dbm_to_watts, Real};
use crate::seed::{derive_seed, label_hash};
use crate::seqshape::{select_sequences, shaping_penalty, SequenceLibrary};
use crate::sigkit::{
    draw_symbols, shape_subcarriers, wdm_demux, wdm_mux, InputLaw, SubcarrierPlan, SymbolBlock,
};

// Stream tags mixed into derived seeds.
const TAG_DATA: u64 = 1;
const TAG_ASE: u64 = 2;
const TAG_TUNE: u64 = 3;
const TAG_SELECT: u64 = 4;
const TAG_METRIC: u64 = 5;

/// One (power, technique) point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Launch power per channel per polarization.
    pub power_dbm: f64,
    pub config: String,
    /// Rate after any shaping penalty, bits/sym/pol.
    pub air_bits: f64,
    pub std_err: f64,
    pub snr_eff_db: f64,
    pub blocks: usize,
    /// Seed from which every stream of this point derives.
    pub seed: u64,
    /// Residual (ASE + NLI) variance per polarization after the gain fit, W.
    pub residual_var_w: f64,
    pub runtime_s: f64,
    /// Highest AIR of this technique over the sweep.
    pub peak: bool,
    /// PPN parameters used, after tuning.
    pub ppn: Option<PpnParams>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(power_dbm: f64, config: &str, seed: u64, error: String) -> Self {
        SweepRow {
            power_dbm,
            config: config.to_string(),
            air_bits: f64::NAN,
            std_err: f64::NAN,
            snr_eff_db: f64::NAN,
            blocks: 0,
            seed,
            residual_var_w: f64::NAN,
            runtime_s: 0.0,
            peak: false,
            ppn: None,
            error: Some(error),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    /// Sorted by power, then label.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn new(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| {
            a.power_dbm
                .total_cmp(&b.power_dbm)
                .then_with(|| a.config.cmp(&b.config))
        });
        let mut best: BTreeMap<String, usize> = BTreeMap::new();
        for i in 0..rows.len() {
            rows[i].peak = false;
            if rows[i].is_failed() {
                continue;
            }
            let key = rows[i].config.clone();
            match best.get(&key) {
                Some(&j) if rows[j].air_bits >= rows[i].air_bits => {}
                _ => {
                    best.insert(key, i);
                }
            }
        }
        for &i in best.values() {
            rows[i].peak = true;
        }
        SweepResult { rows }
    }

    /// Technique labels in lexicographic order.
    pub fn configs(&self) -> Vec<String> {
        let mut c: Vec<String> = self.rows.iter().map(|r| r.config.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    pub fn series(&self, config: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.config == config).collect()
    }

    pub fn peak(&self, config: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.config == config && r.peak)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.is_failed())
    }
}

/// Seed of the (power, technique) point.
pub fn point_seed(master: u64, power_dbm: f64, label: &str) -> u64 {
    derive_seed(master, &[power_dbm.to_bits(), label_hash(label)])
}

/// Seed of a block within a point. The tuning block uses `index = None`.
pub fn block_seed(point: u64, index: Option<usize>) -> u64 {
    match index {
        Some(b) => derive_seed(point, &[b as u64]),
        None => derive_seed(point, &[u64::MAX, TAG_TUNE]),
    }
}

fn library_seed(master: u64, power_dbm: f64, n_subcarriers: usize) -> u64 {
    derive_seed(
        master,
        &[power_dbm.to_bits(), n_subcarriers as u64, TAG_SELECT],
    )
}

/// Builds (or loads) the sequence library a technique uses at `power_dbm`.
pub fn build_library<T: Real>(
    cfg: &ExperimentConfig,
    technique: &Technique,
    power_dbm: f64,
) -> Result<SequenceLibrary<T>> {
    let sel = cfg
        .selection
        .as_ref()
        .ok_or_else(|| Error::Config("missing 'selection' section".into()))?;
    if let Some(path) = &sel.library {
        let lib = SequenceLibrary::<T>::load(path)?;
        if lib.spec.block_len != sel.block_len {
            return Err(Error::Config(format!(
                "library {} has block_len {}, config expects {}",
                path.display(),
                lib.spec.block_len,
                sel.block_len
            )));
        }
        return Ok(lib);
    }
    let spec = cfg.selection_spec(technique, power_dbm)?;
    let seed = library_seed(
        cfg.sweep.master_seed,
        spec.surrogate.launch_power_dbm,
        technique.n_subcarriers,
    );
    select_sequences(&spec, sel.n_keep, seed)
}

struct PointCtx<'a, T: Real> {
    cfg: &'a ExperimentConfig,
    technique: &'a Technique,
    plan: SubcarrierPlan,
    law: InputLaw<T>,
    power_w: f64,
}

struct BlockData<T: Real> {
    tx: Vec<SymbolBlock<T>>,
    rx: Vec<SymbolBlock<T>>,
}

fn simulate_block<T: Real>(ctx: &PointCtx<T>, seed: u64) -> Result<BlockData<T>> {
    let sc = &ctx.cfg.scenario;
    let n = ctx.cfg.sweep.block_len;
    let guard = ctx.cfg.sweep.guard_symbols;
    let ch_grid = sc.channel_grid(n)?;
    let center = sc.center_channel();
    let mut channels = Vec::with_capacity(sc.n_channels);
    let mut center_tx = None;
    for c in 0..sc.n_channels {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[c as u64, TAG_DATA]));
        let block = draw_symbols(&ctx.law, n, &mut rng)?.with_power(ctx.power_w);
        channels.push(shape_subcarriers(&block, ch_grid, sc.rolloff, &ctx.plan)?);
        if c == center {
            center_tx = Some(block);
        }
    }
    let composite = wdm_mux(&channels, sc.channel_spacing, sc.composite_grid(n)?)?;
    drop(channels);
    let amp = sc.amp.spec();
    let (out, _) = ssfm_propagate(&composite, &sc.fiber, &amp, derive_seed(seed, &[TAG_ASE]))?;
    drop(composite);
    let rx_ch = wdm_demux(&out, center, sc.n_channels, sc.channel_spacing, ch_grid)?;
    let processed = match &ctx.technique.processing {
        Processing::Edc => edc(&rx_ch, &sc.fiber),
        Processing::Dbp(spec) => dbp(&rx_ch, &sc.fiber, spec)?,
    };
    let rx = subcarrier_demux(&processed, sc.rolloff, &ctx.plan)?;
    let tx_block = center_tx.expect("center channel drawn");
    let tx = tx_block
        .deinterleave(ctx.plan.n_subcarriers)?
        .into_iter()
        .zip(&ctx.plan.power_factors)
        .map(|(s, a)| s.with_power(ctx.power_w * a).trimmed(guard))
        .collect();
    let rx = rx.into_iter().map(|s| s.trimmed(guard)).collect();
    Ok(BlockData { tx, rx })
}

struct BlockMetric {
    air: AirEstimate,
    snr: f64,
    residual: f64,
}

fn evaluate_block<T: Real>(
    data: &BlockData<T>,
    metric: &MetricSpec,
    ppn: Option<&PpnParams>,
    seed: u64,
) -> Result<BlockMetric> {
    let mut snr = 0.0;
    let mut residual = 0.0;
    for (t, r) in data.tx.iter().zip(&data.rx) {
        let [sx, sy] = effective_snr(t, r)?;
        snr += 0.5 * (sx + sy);
        let est = crate::rxdsp::cpe_align(r, t)?;
        let scale = t.per_pol_power.sqrt();
        let mut acc = 0.0;
        for (p, (rs, ts)) in [(&r.x, &t.x), (&r.y, &t.y)].into_iter().enumerate() {
            for (a, b) in rs.iter().zip(ts) {
                let a = num_complex::Complex::new(a.re.f64(), a.im.f64());
                let b = num_complex::Complex::new(b.re.f64(), b.im.f64()) * scale;
                acc += (a - est.h[p] * b).norm_sqr();
            }
        }
        residual += acc / (2 * t.len()) as f64;
    }
    let k = data.tx.len() as f64;
    let air = match metric {
        MetricSpec::Awgn => {
            let parts = data
                .tx
                .iter()
                .zip(&data.rx)
                .map(|(t, r)| air_gaussian(t, r))
                .collect::<Result<Vec<_>>>()?;
            AirEstimate {
                air: parts.iter().map(|p| p.air).sum::<f64>() / k,
                std_err: parts.iter().map(|p| p.std_err.powi(2)).sum::<f64>().sqrt() / k,
                n_symbols_used: parts.iter().map(|p| p.n_symbols_used).sum(),
            }
        }
        MetricSpec::Ppn { .. } => {
            let params = PpnParams {
                seed,
                ..ppn.expect("PPN parameters resolved").clone()
            };
            air_ppn(&data.tx, &data.rx, &params)?
        }
    };
    Ok(BlockMetric {
        air,
        snr: snr / k,
        residual: residual / k,
    })
}

fn law_for<T: Real>(
    input: &InputSpec,
    library: Option<&SequenceLibrary<T>>,
) -> Result<InputLaw<T>> {
    Ok(match input {
        InputSpec::IidGaussian => InputLaw::IidGaussian,
        InputSpec::Mb { order, lambda } => InputLaw::MaxwellBoltzmannQam {
            order: *order,
            lambda: *lambda,
        },
        InputSpec::SelectedSequences => library
            .ok_or_else(|| Error::Config("selected_sequences input without a library".into()))?
            .law(),
    })
}

fn run_point_with<T: Real>(
    cfg: &ExperimentConfig,
    technique: &Technique,
    power_dbm: f64,
    library: Option<&SequenceLibrary<T>>,
) -> Result<SweepRow> {
    let start = Instant::now();
    let sw = &cfg.sweep;
    if sw.blocks_per_point == 0 {
        return Err(Error::InvalidArgument(
            "blocks_per_point must be >= 1".into(),
        ));
    }
    let seed = point_seed(sw.master_seed, power_dbm, &technique.label);
    let ctx = PointCtx {
        cfg,
        technique,
        plan: technique.plan(sw.block_len, cfg.scenario.rolloff)?,
        law: law_for(&technique.input, library)?,
        power_w: dbm_to_watts(power_dbm),
    };
    let ppn = match &technique.metric {
        MetricSpec::Awgn => None,
        MetricSpec::Ppn { params, tune: None } => Some(params.clone()),
        MetricSpec::Ppn {
            params,
            tune: Some(grid),
        } => {
            let held_out = simulate_block(&ctx, block_seed(seed, None))?;
            let base = PpnParams {
                seed: derive_seed(seed, &[TAG_TUNE, TAG_METRIC]),
                ..params.clone()
            };
            let (best, est) = tune_ppn_params(&held_out.tx, &held_out.rx, grid, &base)?;
            log::debug!(
                "{} @ {power_dbm} dBm: tuned q_theta={:e} q_phi={:e} scale={} ({:.4} b)",
                technique.label,
                best.phase_step_var,
                best.pol_step_var,
                best.noise_scale,
                est.air
            );
            Some(best)
        }
    };
    let metrics = (0..sw.blocks_per_point)
        .into_par_iter()
        .map(|b| {
            let bs = block_seed(seed, Some(b));
            let data = simulate_block(&ctx, bs)?;
            evaluate_block(
                &data,
                &technique.metric,
                ppn.as_ref(),
                derive_seed(bs, &[TAG_METRIC]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<AirEstimate> = metrics.iter().map(|m| m.air).collect();
    let mut air = AirEstimate::combine(&parts);
    if technique.input == InputSpec::SelectedSequences {
        let lib = library.expect("law_for checked the library");
        air = air.minus(shaping_penalty(&lib.spec)?);
    }
    let n = metrics.len() as f64;
    let snr = metrics.iter().map(|m| m.snr).sum::<f64>() / n;
    let residual = metrics.iter().map(|m| m.residual).sum::<f64>() / n;
    Ok(SweepRow {
        power_dbm,
        config: technique.label.clone(),
        air_bits: air.air,
        std_err: air.std_err,
        snr_eff_db: 10.0 * snr.log10(),
        blocks: sw.blocks_per_point,
        seed,
        residual_var_w: residual,
        runtime_s: start.elapsed().as_secs_f64(),
        peak: false,
        ppn,
        error: None,
    })
}

fn run_point_t<T: Real>(
    cfg: &ExperimentConfig,
    technique: &Technique,
    power_dbm: f64,
) -> Result<SweepRow> {
    let library = match technique.input {
        InputSpec::SelectedSequences => Some(build_library::<T>(cfg, technique, power_dbm)?),
        _ => None,
    };
    run_point_with(cfg, technique, power_dbm, library.as_ref())
}

/// Runs one technique at one launch power (per channel per polarization).
pub fn run_point(
    cfg: &ExperimentConfig,
    technique: &Technique,
    power_dbm: f64,
) -> Result<SweepRow> {
    match cfg.precision {
        Precision::F64 => run_point_t::<f64>(cfg, technique, power_dbm),
        Precision::F32 => run_point_t::<f32>(cfg, technique, power_dbm),
    }
}

fn run_sweep_t<T: Real>(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    // Libraries are shared by techniques with the same subcarrier count.
    let mut libraries: BTreeMap<(u64, usize), std::result::Result<SequenceLibrary<T>, String>> =
        BTreeMap::new();
    for t in cfg
        .techniques
        .iter()
        .filter(|t| t.input == InputSpec::SelectedSequences)
    {
        for &p in &cfg.sweep.powers_dbm {
            let key = (p.to_bits(), t.n_subcarriers);
            libraries.entry(key).or_insert_with(|| {
                let lib = build_library::<T>(cfg, t, p).map_err(|e| e.to_string());
                if let Ok(l) = &lib {
                    log::info!(
                        "library {} dBm, {} SC: kept mean cost {:.3e} W, population {:.3e} W",
                        p,
                        t.n_subcarriers,
                        l.mean_cost(),
                        l.population_mean_cost
                    );
                }
                lib
            });
        }
    }
    let jobs: Vec<(&Technique, f64)> = cfg
        .techniques
        .iter()
        .flat_map(|t| cfg.sweep.powers_dbm.iter().map(move |&p| (t, p)))
        .collect();
    let rows: Vec<SweepRow> = jobs
        .into_par_iter()
        .map(|(t, p)| {
            let seed = point_seed(cfg.sweep.master_seed, p, &t.label);
            let lib = match t.input {
                InputSpec::SelectedSequences => match &libraries[&(p.to_bits(), t.n_subcarriers)] {
                    Ok(l) => Some(l),
                    Err(e) => return SweepRow::failed(p, &t.label, seed, e.clone()),
                },
                _ => None,
            };
            match run_point_with(cfg, t, p, lib) {
                Ok(row) => {
                    log::info!(
                        "{:>8.2} dBm {:<24} {:.4} ± {:.4} b ({:.1} s)",
                        p,
                        t.label,
                        row.air_bits,
                        row.std_err,
                        row.runtime_s
                    );
                    row
                }
                Err(e) => {
                    log::error!("{} @ {p} dBm failed: {e}", t.label);
                    SweepRow::failed(p, &t.label, seed, e.to_string())
                }
            }
        })
        .collect();
    Ok(SweepResult::new(rows))
}

/// Runs every technique over the power grid.
///
/// Point failures do not abort the sweep; they appear as rows with
/// `error` set and NaN rates.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    match cfg.precision {
        Precision::F64 => run_sweep_t::<f64>(cfg),
        Precision::F32 => run_sweep_t::<f32>(cfg),
    }
}
