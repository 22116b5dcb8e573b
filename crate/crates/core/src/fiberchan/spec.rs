use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Physical description of the fiber link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub length_km: f64,
    /// Group-velocity dispersion, ps²/km.
    pub beta2_ps2_per_km: f64,
    /// Nonlinear coefficient, 1/(W·km).
    pub gamma_per_w_km: f64,
    /// Net field attenuation, dB/km. Zero for ideal distributed amplification.
    #[serde(default)]
    pub alpha_db_per_km: f64,
    pub step_km: f64,
}

impl FiberSpec {
    /// Standard single-mode fiber (D = 17 ps/nm/km at 1550 nm) with ideal
    /// distributed amplification.
    pub fn standard_smf(length_km: f64, step_km: f64) -> Self {
        FiberSpec {
            length_km,
            beta2_ps2_per_km: -21.7,
            gamma_per_w_km: 1.27,
            alpha_db_per_km: 0.0,
            step_km,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km.is_finite() && self.length_km >= 0.0) {
            return Err(invalid(format!(
                "fiber length must be >= 0, got {}",
                self.length_km
            )));
        }
        if !(self.step_km.is_finite() && self.step_km > 0.0) {
            return Err(invalid(format!(
                "step must be positive, got {}",
                self.step_km
            )));
        }
        if !(self.beta2_ps2_per_km.is_finite()
            && self.gamma_per_w_km.is_finite()
            && self.alpha_db_per_km.is_finite())
        {
            return Err(invalid("fiber coefficients must be finite"));
        }
        Ok(())
    }

    /// beta2 in s²/km.
    pub fn beta2_s2_per_km(&self) -> f64 {
        self.beta2_ps2_per_km * 1e-24
    }

    /// Field-power attenuation in 1/km.
    pub fn alpha_lin_per_km(&self) -> f64 {
        db_per_km_to_linear(self.alpha_db_per_km)
    }

    /// Step lengths covering the link: `ceil(length/step)` steps, the last
    /// one partial. A step longer than the link degenerates to one step.
    pub fn step_grid(&self) -> Vec<f64> {
        if self.length_km <= 0.0 {
            return Vec::new();
        }
        if self.step_km >= self.length_km {
            if self.step_km > self.length_km {
                log::warn!(
                    "step {} km exceeds link length {} km; using a single step",
                    self.step_km,
                    self.length_km
                );
            }
            return vec![self.length_km];
        }
        let n = (self.length_km / self.step_km - 1e-9).ceil() as usize;
        let mut steps = vec![self.step_km; n];
        steps[n - 1] = self.length_km - (n - 1) as f64 * self.step_km;
        steps
    }
}

pub(crate) fn db_per_km_to_linear(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 10.0
}

/// Ideal distributed amplifier noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpSpec {
    /// Spontaneous-emission factor.
    pub nsp: f64,
    /// Photon energy h·nu, J.
    pub photon_energy: f64,
    /// Intrinsic fiber loss the amplification compensates, 1/km.
    pub alpha_lin_per_km: f64,
}

impl AmpSpec {
    pub fn ideal_distributed(nsp: f64, frequency_hz: f64, loss_db_per_km: f64) -> Self {
        AmpSpec {
            nsp,
            photon_energy: PLANCK * frequency_hz,
            alpha_lin_per_km: db_per_km_to_linear(loss_db_per_km),
        }
    }

    /// nsp = 1, 193.41 THz, 0.2 dB/km.
    pub fn standard() -> Self {
        Self::ideal_distributed(1.0, 193.41e12, 0.2)
    }

    pub fn noiseless() -> Self {
        AmpSpec {
            nsp: 0.0,
            ..Self::standard()
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.nsp == 0.0 || self.alpha_lin_per_km == 0.0 || self.photon_energy == 0.0
    }

    /// One-sided ASE power spectral density per polarization accumulated
    /// over `distance_km`, W/Hz.
    pub fn psd(&self, distance_km: f64) -> f64 {
        self.nsp * self.photon_energy * self.alpha_lin_per_km * distance_km
    }
}
