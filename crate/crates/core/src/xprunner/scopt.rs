//! Per-subcarrier launch power optimization.

use super::config::{ExperimentConfig, Technique};
use super::run::{run_point, run_sweep, SweepRow};
use crate::error::{Error, Result};

/// Relative powers for an edge-to-center tilt of `tilt_db`, symmetric about
/// the band center and normalized to mean 1.
///
/// The outermost subcarriers get `tilt_db` relative to the innermost ones,
/// with a linear-in-dB profile in between.
pub fn tilt_profile(n_subcarriers: usize, tilt_db: f64) -> Vec<f64> {
    let n = n_subcarriers;
    if n <= 2 {
        return vec![1.0; n];
    }
    // Distance from center in half-spacings: 1, 3, ..., n-1 for even n.
    let inner = if n.is_multiple_of(2) { 1.0 } else { 0.0 };
    let outer = (n - 1) as f64;
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let d = (2.0 * j as f64 - outer).abs();
            let u = (d - inner) / (outer - inner);
            10f64.powf(tilt_db * u / 10.0)
        })
        .collect();
    let mean = w.iter().sum::<f64>() / n as f64;
    w.into_iter().map(|v| v / mean).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierOptimum {
    pub tilt_db: f64,
    pub power_factors: Vec<f64>,
    pub power_dbm: f64,
    /// Row of the best allocation, labelled `<technique>+scopt`.
    pub row: SweepRow,
    /// Every evaluated `(tilt_db, row)`, tilts ascending.
    pub evaluated: Vec<(f64, SweepRow)>,
}

/// Grid search over symmetric power tilts at fixed total channel power.
///
/// All allocations share the technique's seeds, so they are compared on the
/// same transmitted data and noise.
pub fn optimize_subcarrier_powers(cfg: &ExperimentConfig) -> Result<SubcarrierOptimum> {
    cfg.validate()?;
    let opt = cfg
        .subcarrier_optimization
        .as_ref()
        .ok_or_else(|| Error::Config("missing 'subcarrier_optimization' section".into()))?;
    let base = cfg.technique(&opt.technique)?.clone();
    let power_dbm = match opt.power_dbm {
        Some(p) => p,
        None => {
            let sub = ExperimentConfig {
                techniques: vec![base.clone()],
                ..cfg.clone()
            };
            let res = run_sweep(&sub)?;
            res.peak(&base.label)
                .ok_or_else(|| Error::InvalidArgument("sweep produced no valid point".into()))?
                .power_dbm
        }
    };
    let mut tilts = opt.tilts_db.clone();
    tilts.push(0.0);
    tilts.sort_by(f64::total_cmp);
    tilts.dedup();
    let mut evaluated = Vec::new();
    for &tilt in &tilts {
        let factors = tilt_profile(base.n_subcarriers, tilt);
        let t = Technique {
            subcarrier_powers: Some(factors),
            ..base.clone()
        };
        match run_point(cfg, &t, power_dbm) {
            Ok(row) => {
                log::info!(
                    "tilt {tilt:+.2} dB: {:.4} ± {:.4} b",
                    row.air_bits,
                    row.std_err
                );
                evaluated.push((tilt, row));
            }
            Err(e) => log::warn!("tilt {tilt} dB failed: {e}"),
        }
    }
    let (tilt_db, best) = evaluated
        .iter()
        .filter(|(_, r)| r.air_bits.is_finite())
        .max_by(|a, b| a.1.air_bits.total_cmp(&b.1.air_bits))
        .cloned()
        .ok_or_else(|| {
            Error::InvalidArgument("no subcarrier allocation could be evaluated".into())
        })?;
    let row = SweepRow {
        config: format!("{}+scopt", base.label),
        ..best
    };
    Ok(SubcarrierOptimum {
        tilt_db,
        power_factors: tilt_profile(base.n_subcarriers, tilt_db),
        power_dbm,
        row,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_shapes() {
        assert_eq!(tilt_profile(4, 0.0), vec![1.0; 4]);
        let p = tilt_profile(4, -3.0);
        assert!((p.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert!((p[0] - p[3]).abs() < 1e-15 && (p[1] - p[2]).abs() < 1e-15);
        assert!((10.0 * (p[0] / p[1]).log10() + 3.0).abs() < 1e-12);
        let p8 = tilt_profile(8, 2.0);
        assert!((10.0 * (p8[0] / p8[3]).log10() - 2.0).abs() < 1e-12);
        assert!(p8[1] < p8[0] && p8[1] > p8[3]);
        assert_eq!(tilt_profile(2, 5.0), vec![1.0; 2]);
    }
}
