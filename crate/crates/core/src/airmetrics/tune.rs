//! Grid search over PPN metric hyperparameters.

use serde::{Deserialize, Serialize};

use super::ppn::{air_ppn, PpnParams};
use super::AirEstimate;
use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::sigkit::SymbolBlock;

/// Candidate values for each tuned hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpnGrid {
    pub phase_step_var: Vec<f64>,
    pub pol_step_var: Vec<f64>,
    #[serde(default = "unit")]
    pub noise_scale: Vec<f64>,
}

fn unit() -> Vec<f64> {
    vec![1.0]
}

impl PpnGrid {
    /// Log-spaced default grid.
    pub fn standard() -> Self {
        PpnGrid {
            phase_step_var: vec![1e-6, 1e-5, 1e-4, 1e-3],
            pol_step_var: vec![1e-7, 1e-6, 1e-5],
            noise_scale: vec![1.0, 1.25],
        }
    }

    pub fn len(&self) -> usize {
        self.phase_step_var.len() * self.pol_step_var.len() * self.noise_scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Picks the grid point maximizing the PPN AIR on `(tx, rx)`.
///
/// Non-grid fields (particle count, subcarriers, burn-in, seed) come from
/// `base`. The data should be held out from the data the metric is later
/// evaluated on.
pub fn tune_ppn_params<T: Real>(
    tx: &[SymbolBlock<T>],
    rx: &[SymbolBlock<T>],
    grid: &PpnGrid,
    base: &PpnParams,
) -> Result<(PpnParams, AirEstimate)> {
    if grid.is_empty() {
        return Err(invalid("PPN tuning grid is empty"));
    }
    let mut best: Option<(PpnParams, AirEstimate)> = None;
    for &q_theta in &grid.phase_step_var {
        for &q_phi in &grid.pol_step_var {
            for &s in &grid.noise_scale {
                let params = PpnParams {
                    phase_step_var: q_theta,
                    pol_step_var: q_phi,
                    noise_scale: s,
                    ..base.clone()
                };
                let est = air_ppn(tx, rx, &params)?;
                log::debug!(
                    "ppn grid q_theta={q_theta:e} q_phi={q_phi:e} scale={s}: {:.4}",
                    est.air
                );
                if best.as_ref().is_none_or(|(_, b)| est.air > b.air) {
                    best = Some((params, est));
                }
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airmetrics::testutil::impaired;

    fn base() -> PpnParams {
        PpnParams {
            seed: 3,
            ..PpnParams::default()
        }
    }

    #[test]
    fn selects_near_true_phase_variance() {
        let grid = PpnGrid {
            phase_step_var: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2],
            pol_step_var: vec![1e-7],
            noise_scale: vec![1.0],
        };
        let (tx, rx) = impaired(16_384, 10f64.powf(1.5), 1e-4, 0.0, 11);
        let (best, _) = tune_ppn_params(&[tx], &[rx], &grid, &base()).unwrap();
        let decades = (best.phase_step_var / 1e-4).log10().abs();
        assert!(decades <= 1.0 + 1e-9, "picked {}", best.phase_step_var);
    }

    #[test]
    fn zero_variance_is_worse_under_phase_noise() {
        let grid = PpnGrid {
            phase_step_var: vec![0.0, 1e-4],
            pol_step_var: vec![0.0],
            noise_scale: vec![1.0],
        };
        let (tx, rx) = impaired(8192, 10f64.powf(1.5), 1e-4, 0.0, 12);
        let zero = air_ppn(
            std::slice::from_ref(&tx),
            std::slice::from_ref(&rx),
            &PpnParams {
                phase_step_var: 0.0,
                pol_step_var: 0.0,
                ..base()
            },
        )
        .unwrap();
        let (best, est) = tune_ppn_params(&[tx], &[rx], &grid, &base()).unwrap();
        assert_eq!(best.phase_step_var, 1e-4);
        assert!(est.air > zero.air);
    }

    #[test]
    fn single_point_and_empty_grid() {
        let (tx, rx) = impaired(2048, 30.0, 1e-4, 0.0, 13);
        let grid = PpnGrid {
            phase_step_var: vec![2e-4],
            pol_step_var: vec![3e-6],
            noise_scale: vec![1.1],
        };
        let (best, _) = tune_ppn_params(
            std::slice::from_ref(&tx),
            std::slice::from_ref(&rx),
            &grid,
            &base(),
        )
        .unwrap();
        assert_eq!(
            (best.phase_step_var, best.pol_step_var, best.noise_scale),
            (2e-4, 3e-6, 1.1)
        );
        let empty = PpnGrid {
            phase_step_var: vec![],
            ..grid
        };
        assert!(tune_ppn_params(&[tx], &[rx], &empty, &base()).is_err());
    }
}
