//! Closed-form joint-quadrature noise predictions.
//!
//! These are the ground truth both simulation pipelines are validated
//! against: the time-averaged noise of the joint X difference under two
//! synchronized phase modulators,
//!
//!   (G^2 + g^2)(1 - eta) + eta - 2 g G (1 - eta) J0(M_eff),
//!
//! with M_eff the effective modulation index of the pair, and the
//! local-oscillator phase sweep of the unmodulated source.

use serde::{Deserialize, Serialize};

use crate::bessel;
use crate::eom::effective_index;
use crate::error::{Error, Result};

/// Entangled-source parameters: amplitude gain and per-beam loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Amplitude gain G >= 1 of the four-wave-mixing source.
    pub gain: f64,
    /// Total loss fraction per beam, in [0, 1].
    pub eta: f64,
}

impl SourceSpec {
    pub fn new(gain: f64, eta: f64) -> Result<Self> {
        let s = Self { gain, eta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 1.0) {
            return Err(Error::InvalidGain(self.gain));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidLoss(self.eta));
        }
        Ok(())
    }

    /// g = sqrt(G^2 - 1).
    pub fn g(&self) -> f64 {
        (self.gain * self.gain - 1.0).sqrt()
    }
}

/// Which joint quadrature branch of the homodyne difference/sum signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Difference,
    Sum,
}

/// Time-averaged normalized noise of the joint X difference with modulators
/// at indices (m_p, m_c) and relative drive phase phi (shot noise = 1).
pub fn joint_noise(src: &SourceSpec, m_p: f64, m_c: f64, phi: f64) -> Result<f64> {
    src.validate()?;
    if m_p < 0.0 || m_c < 0.0 {
        return Err(Error::InvalidEomSpec(format!(
            "modulation indices must be >= 0, got ({m_p}, {m_c})"
        )));
    }
    let (gain, g, eta) = (src.gain, src.g(), src.eta);
    let m_eff = effective_index(m_p, m_c, phi);
    Ok((gain * gain + g * g) * (1.0 - eta) + eta - 2.0 * g * gain * (1.0 - eta) * bessel::j0(m_eff))
}

/// Equal-index form: both modulators at index m, relative phase phi;
/// equivalent to a single modulator at m * sqrt(2 + 2 cos(phi)).
pub fn joint_noise_equal(src: &SourceSpec, m: f64, phi: f64) -> Result<f64> {
    joint_noise(src, m, m, phi)
}

/// Unmodulated noise of the joint difference or sum as the summed
/// local-oscillator phase theta = theta_p + theta_c is swept:
/// (G^2 + g^2)(1 - eta) + eta -/+ 2 g G (1 - eta) cos(theta).
pub fn phase_sweep_noise(src: &SourceSpec, theta: f64, branch: Branch) -> f64 {
    let (gain, g, eta) = (src.gain, src.g(), src.eta);
    let sign = match branch {
        Branch::Difference => -1.0,
        Branch::Sum => 1.0,
    };
    (gain * gain + g * g) * (1.0 - eta) + eta + sign * 2.0 * g * gain * (1.0 - eta) * theta.cos()
}

/// Power ratio to decibels, 10 log10(ratio).
pub fn to_db(ratio: f64) -> Result<f64> {
    if !(ratio > 0.0) {
        return Err(Error::NonPositiveRatio(ratio));
    }
    Ok(10.0 * ratio.log10())
}
