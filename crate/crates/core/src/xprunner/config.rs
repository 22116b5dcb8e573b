//! Experiment configuration (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::airmetrics::{PpnGrid, PpnParams};
use crate::error::{Error, Result};
use crate::fiberchan::{AmpSpec, FiberSpec};
use crate::rxdsp::DbpSpec;
use crate::seqshape::{SelectionSpec, Surrogate, Termination};
use crate::sigkit::{Grid, SubcarrierPlan};

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Distributed amplification, in the units a config file uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpConfig {
    #[serde(default = "one")]
    pub nsp: f64,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_loss")]
    pub loss_db_per_km: f64,
}

fn one() -> f64 {
    1.0
}
fn default_frequency() -> f64 {
    193.41e12
}
fn default_loss() -> f64 {
    0.2
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig {
            nsp: 1.0,
            frequency_hz: default_frequency(),
            loss_db_per_km: default_loss(),
        }
    }
}

impl AmpConfig {
    pub fn spec(&self) -> AmpSpec {
        AmpSpec::ideal_distributed(self.nsp, self.frequency_hz, self.loss_db_per_km)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_channels: usize,
    /// Symbol rate per channel, Bd.
    pub symbol_rate: f64,
    /// Center-to-center channel spacing, Hz.
    pub channel_spacing: f64,
    pub rolloff: f64,
    /// Samples per channel symbol on the propagated WDM grid.
    pub samples_per_symbol: usize,
    /// Samples per symbol of the demultiplexed channel (receiver DSP and DBP).
    #[serde(default = "two")]
    pub channel_samples_per_symbol: usize,
    pub fiber: FiberSpec,
    #[serde(default)]
    pub amp: AmpConfig,
}

fn two() -> usize {
    2
}

impl Scenario {
    pub fn channel_grid(&self, n_symbols: usize) -> Result<Grid> {
        Grid::new(self.symbol_rate, self.channel_samples_per_symbol, n_symbols)
    }

    pub fn composite_grid(&self, n_symbols: usize) -> Result<Grid> {
        Grid::new(self.symbol_rate, self.samples_per_symbol, n_symbols)
    }

    pub fn center_channel(&self) -> usize {
        self.n_channels / 2
    }

    fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(cfg_err("scenario.n_channels must be >= 1"));
        }
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            return Err(cfg_err("scenario.symbol_rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(cfg_err(format!(
                "scenario.rolloff {} outside [0, 1]",
                self.rolloff
            )));
        }
        let occupied = self.symbol_rate * (1.0 + self.rolloff);
        if self.n_channels > 1 && self.channel_spacing < occupied * (1.0 - 1e-12) {
            return Err(cfg_err(format!(
                "channel spacing {:.4e} Hz below symbol_rate*(1+rolloff) = {:.4e} Hz: channels overlap",
                self.channel_spacing, occupied
            )));
        }
        let span = (self.n_channels - 1) as f64 * self.channel_spacing + occupied;
        let fs = self.symbol_rate * self.samples_per_symbol as f64;
        if span > fs {
            return Err(cfg_err(format!(
                "WDM band {span:.4e} Hz exceeds the simulation bandwidth {fs:.4e} Hz; raise samples_per_symbol"
            )));
        }
        if (self.channel_samples_per_symbol as f64) < 1.0 + self.rolloff {
            return Err(cfg_err(
                "channel_samples_per_symbol too small for the rolloff",
            ));
        }
        if self.fiber.step_km > self.fiber.length_km && self.fiber.length_km > 0.0 {
            return Err(cfg_err(format!(
                "fiber step {} km exceeds the link length {} km",
                self.fiber.step_km, self.fiber.length_km
            )));
        }
        self.fiber
            .validate()
            .map_err(|e| cfg_err(format!("scenario.fiber: {e}")))?;
        if !(self.amp.nsp >= 0.0 && self.amp.frequency_hz > 0.0 && self.amp.loss_db_per_km >= 0.0) {
            return Err(cfg_err("scenario.amp has a negative or zero parameter"));
        }
        Ok(())
    }
}

/// Transmitted symbol law of a technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    IidGaussian,
    Mb { order: usize, lambda: f64 },
    SelectedSequences,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Processing {
    Edc,
    Dbp(DbpSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    Awgn,
    Ppn {
        #[serde(default)]
        params: PpnParams,
        /// Grid searched on a held-out block at every sweep point.
        #[serde(default)]
        tune: Option<PpnGrid>,
    },
}

/// One curve of the sweep: input law, receiver processing and detection metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Technique {
    pub label: String,
    pub input: InputSpec,
    pub processing: Processing,
    pub metric: MetricSpec,
    #[serde(default = "one_usize")]
    pub n_subcarriers: usize,
    /// Relative subcarrier powers; uniform when absent.
    #[serde(default)]
    pub subcarrier_powers: Option<Vec<f64>>,
}

fn one_usize() -> usize {
    1
}

impl Technique {
    pub fn plan(&self, n_symbols: usize, rolloff: f64) -> Result<SubcarrierPlan> {
        let plan = SubcarrierPlan::new(self.n_subcarriers, n_symbols, rolloff)?;
        match &self.subcarrier_powers {
            Some(f) => plan.with_power_factors(f),
            None => Ok(plan),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Launch power per channel per polarization, dBm.
    pub powers_dbm: Vec<f64>,
    #[serde(default = "default_blocks")]
    pub blocks_per_point: usize,
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Symbols dropped from each end of every block before detection.
    #[serde(default = "default_guard")]
    pub guard_symbols: usize,
}

fn default_blocks() -> usize {
    16
}
fn default_block_len() -> usize {
    4096
}
fn default_guard() -> usize {
    4
}

/// Sequence-selection settings; the surrogate link is derived from the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    #[serde(default = "default_sel_block")]
    pub block_len: usize,
    #[serde(default = "default_rate")]
    pub selection_rate: f64,
    /// Sequences kept per library.
    pub n_keep: usize,
    /// SSFM step of the surrogate link; the scenario step when absent.
    #[serde(default)]
    pub surrogate_step_km: Option<f64>,
    /// Launch power of the surrogate; each sweep power when absent.
    #[serde(default)]
    pub power_dbm: Option<f64>,
    #[serde(default)]
    pub termination: Option<Termination>,
    /// Prebuilt library used instead of running the selection.
    #[serde(default)]
    pub library: Option<PathBuf>,
}

fn default_sel_block() -> usize {
    256
}
fn default_rate() -> f64 {
    0.002
}

/// Per-subcarrier power optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierOptConfig {
    /// Technique whose subcarrier powers are optimized.
    pub technique: String,
    /// Edge-to-center power tilts searched, dB. Zero (uniform) is always included.
    pub tilts_db: Vec<f64>,
    /// Launch power; the technique's peak from a sweep when absent.
    #[serde(default)]
    pub power_dbm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub library: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub scenario: Scenario,
    pub techniques: Vec<Technique>,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub selection: Option<SelectionConfig>,
    #[serde(default)]
    pub subcarrier_optimization: Option<SubcarrierOptConfig>,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| cfg_err(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn technique(&self, label: &str) -> Result<&Technique> {
        self.techniques
            .iter()
            .find(|t| t.label == label)
            .ok_or_else(|| cfg_err(format!("no technique labelled '{label}'")))
    }

    /// Selection spec for a technique at the given launch power.
    pub fn selection_spec(&self, technique: &Technique, power_dbm: f64) -> Result<SelectionSpec> {
        let sel = self
            .selection
            .as_ref()
            .ok_or_else(|| cfg_err("selected_sequences input requires a 'selection' section"))?;
        let mut fiber = self.scenario.fiber;
        if let Some(step) = sel.surrogate_step_km {
            fiber.step_km = step;
        }
        Ok(SelectionSpec {
            block_len: sel.block_len,
            selection_rate: sel.selection_rate,
            surrogate: Surrogate {
                fiber,
                launch_power_dbm: sel.power_dbm.unwrap_or(power_dbm),
                symbol_rate: self.scenario.symbol_rate,
                samples_per_symbol: self.scenario.channel_samples_per_symbol,
                rolloff: self.scenario.rolloff,
                n_subcarriers: technique.n_subcarriers,
                termination: sel.termination.clone().unwrap_or(Termination::Edc),
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let sw = &self.sweep;
        if sw.powers_dbm.is_empty() {
            return Err(cfg_err("sweep.powers_dbm is empty"));
        }
        if sw.powers_dbm.iter().any(|p| !p.is_finite()) {
            return Err(cfg_err("sweep.powers_dbm contains a non-finite value"));
        }
        if sw.powers_dbm.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("sweep.powers_dbm must be strictly increasing"));
        }
        if sw.blocks_per_point == 0 {
            return Err(cfg_err("sweep.blocks_per_point must be >= 1"));
        }
        if 2 * sw.guard_symbols + 64 > sw.block_len {
            return Err(cfg_err("sweep.block_len too short for the guard symbols"));
        }
        self.scenario
            .composite_grid(sw.block_len)
            .and_then(|_| self.scenario.channel_grid(sw.block_len))
            .map_err(|e| cfg_err(format!("sweep.block_len: {e}")))?;
        if self.techniques.is_empty() {
            return Err(cfg_err("no techniques configured"));
        }
        let mut labels: Vec<&str> = self.techniques.iter().map(|t| t.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(cfg_err("technique labels must be unique"));
        }
        for t in &self.techniques {
            let ctx = |e: Error| cfg_err(format!("technique '{}': {e}", t.label));
            if t.label.is_empty() || t.label.contains([',', '"', '\n']) {
                return Err(cfg_err(format!(
                    "technique label '{}' is empty or not CSV-safe",
                    t.label
                )));
            }
            t.plan(sw.block_len, self.scenario.rolloff).map_err(ctx)?;
            if let MetricSpec::Ppn { params, tune } = &t.metric {
                params.validate().map_err(ctx)?;
                if params.n_subcarriers != t.n_subcarriers {
                    return Err(cfg_err(format!(
                        "technique '{}': PPN n_subcarriers {} differs from the technique's {}",
                        t.label, params.n_subcarriers, t.n_subcarriers
                    )));
                }
                if tune.as_ref().is_some_and(|g| g.is_empty()) {
                    return Err(cfg_err(format!(
                        "technique '{}': empty PPN tuning grid",
                        t.label
                    )));
                }
            }
            if let Processing::Dbp(d) = &t.processing {
                if let Some(step) = d.step_km {
                    if !(step.is_finite() && step > 0.0) {
                        return Err(cfg_err(format!(
                            "technique '{}': DBP step must be positive",
                            t.label
                        )));
                    }
                }
            }
            match &t.input {
                InputSpec::Mb { order, lambda } => {
                    crate::sigkit::mb_probabilities(*order, *lambda).map_err(ctx)?;
                }
                InputSpec::SelectedSequences => {
                    let spec = self.selection_spec(t, sw.powers_dbm[0])?;
                    spec.validate().map_err(ctx)?;
                    let sel = self.selection.as_ref().expect("checked by selection_spec");
                    if sel.n_keep == 0 {
                        return Err(cfg_err("selection.n_keep must be >= 1"));
                    }
                    if !sw.block_len.is_multiple_of(spec.block_len) {
                        return Err(cfg_err(format!(
                            "sweep.block_len {} is not a multiple of selection.block_len {}",
                            sw.block_len, spec.block_len
                        )));
                    }
                    if spec.block_len % t.n_subcarriers != 0 {
                        return Err(cfg_err(
                            "selection.block_len not divisible by n_subcarriers",
                        ));
                    }
                }
                InputSpec::IidGaussian => {}
            }
        }
        if let Some(opt) = &self.subcarrier_optimization {
            let t = self.technique(&opt.technique)?;
            if t.n_subcarriers < 2 {
                return Err(cfg_err(
                    "subcarrier optimization needs a technique with n_subcarriers > 1",
                ));
            }
            if opt.tilts_db.iter().any(|t| !t.is_finite()) {
                return Err(cfg_err("subcarrier_optimization.tilts_db must be finite"));
            }
        }
        Ok(())
    }
}
