//! Electro-optic phase modulator model.
//!
//! Two equivalent forms are provided: the instantaneous time-domain phase
//! trajectory theta(t) = m sin(2 pi f t + phi) used by the Monte-Carlo
//! pipeline, and a frequency-bin multiport coupler for the exact covariance
//! pipeline. The coupler realizes a_out(w) = sum_n J_n(m) e^{i n phi}
//! a_in(w - n f_drive), truncated at the order where the neglected sideband
//! weight drops below a tolerance and then renormalized to the nearest
//! symplectic matrix.
//!
//! Bin quadratures are referenced to the drive's cosine phase at the start
//! of a capture window. Probe-beam bins represent upper sidebands and
//! conjugate-beam bins lower sidebands (that pairing is what the two-mode
//! squeezed source correlates), so the conjugate coupler carries the
//! reflected drive phase pi - phi. A modulator placed in a local oscillator
//! path writes the opposite phase sign onto the measurement and is folded in
//! as phi -> phi + pi.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bessel;
use crate::error::{Error, Result};
use crate::gaussian::SymplecticOp;
use crate::grid::{Beam, ModeGrid};

const TAU: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Where the modulator sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// In the path of the twin beam itself.
    Beam,
    /// In the local oscillator used to detect that beam.
    LocalOscillator,
}

/// One phase modulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EomSpec {
    /// Modulation index in radians, >= 0.
    pub modulation_index: f64,
    /// Drive phase in radians relative to the capture-window clock.
    pub drive_phase: f64,
    /// Drive frequency in Hz.
    pub drive_freq_hz: f64,
    /// Which beam's path (or LO) the modulator sits in.
    pub beam: Beam,
    pub placement: Placement,
    pub enabled: bool,
}

impl EomSpec {
    pub fn off(beam: Beam) -> Self {
        Self {
            modulation_index: 0.0,
            drive_phase: 0.0,
            drive_freq_hz: 2e5,
            beam,
            placement: Placement::Beam,
            enabled: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modulation_index < 0.0 {
            return Err(Error::InvalidEomSpec(format!(
                "modulation index must be >= 0, got {}",
                self.modulation_index
            )));
        }
        if !(self.drive_freq_hz > 0.0) {
            return Err(Error::InvalidEomSpec(format!(
                "drive frequency must be positive, got {}",
                self.drive_freq_hz
            )));
        }
        Ok(())
    }
}

/// Instantaneous phase written onto the detected field at time `t` seconds.
/// A disabled modulator contributes nothing; an LO-placed modulator appears
/// with the opposite sign.
pub fn instantaneous_phase(t: f64, spec: &EomSpec) -> f64 {
    if !spec.enabled {
        return 0.0;
    }
    let theta = spec.modulation_index * (TAU * spec.drive_freq_hz * t + spec.drive_phase).sin();
    match spec.placement {
        Placement::Beam => theta,
        Placement::LocalOscillator => -theta,
    }
}

/// Single-modulator equivalent of two synchronized modulators:
/// sqrt(m_p^2 + m_c^2 + 2 m_p m_c cos(phi)).
pub fn effective_index(m_p: f64, m_c: f64, phi: f64) -> f64 {
    let radicand = m_p * m_p + m_c * m_c + 2.0 * m_p * m_c * phi.cos();
    radicand.max(0.0).sqrt()
}

/// Smallest order n such that the sideband weight outside |k| <= n,
/// 1 - sum_{|k|<=n} J_k(m)^2, falls below `eps`.
pub fn truncation_order(m: f64, eps: f64) -> usize {
    assert!(m >= 0.0 && eps > 0.0 && eps < 1.0);
    let j0 = bessel::j0(m);
    let mut covered = j0 * j0;
    if 1.0 - covered < eps {
        return 0;
    }
    for n in 1..=64usize {
        let jn = bessel::jn(n as i64, m);
        covered += 2.0 * jn * jn;
        if 1.0 - covered < eps {
            return n;
        }
    }
    64
}

/// Rewrites an LO-placed modulator as the equivalent in-beam modulator
/// (same index, drive phase shifted by pi); in-beam specs pass through.
pub fn equivalent_beam_spec(spec: &EomSpec) -> EomSpec {
    match spec.placement {
        Placement::Beam => *spec,
        Placement::LocalOscillator => EomSpec {
            drive_phase: (spec.drive_phase + PI).rem_euclid(TAU),
            placement: Placement::Beam,
            ..*spec
        },
    }
}

/// Frequency-bin coupler built from a modulator spec.
#[derive(Debug, Clone)]
pub struct SidebandCoupler {
    pub spec: EomSpec,
    pub n_max: usize,
    pub op: SymplecticOp,
}

/// Builds the multiport frequency-bin coupler for one modulator on one beam
/// of the grid. Couples bin k only to bins k +- d, ..., k +- n_max*d where
/// d = f_drive / bin_spacing; identity on the other beam.
pub fn sideband_symplectic(spec: &EomSpec, grid: &ModeGrid, eps: f64) -> Result<SidebandCoupler> {
    spec.validate()?;
    if !spec.enabled || spec.modulation_index == 0.0 {
        return Ok(SidebandCoupler {
            spec: *spec,
            n_max: 0,
            op: SymplecticOp::identity(grid, format!("eom(off, {:?})", spec.beam)),
        });
    }

    let ratio = spec.drive_freq_hz / grid.bin_spacing();
    let d = ratio.round();
    if d < 1.0 || (ratio - d).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::IncommensurateDrive {
            f_drive: spec.drive_freq_hz,
            bin_spacing: grid.bin_spacing(),
        });
    }
    let d = d as usize;

    let n_max = truncation_order(spec.modulation_index, eps);
    let needed = n_max * d;
    if grid.guard_bins() < needed {
        return Err(Error::InsufficientGuardBins {
            needed,
            got: grid.guard_bins(),
        });
    }

    let beam_spec = equivalent_beam_spec(spec);
    // Probe bins are upper sidebands, conjugate bins lower sidebands; the
    // reflection flips the sideband phase to pi - phi on the conjugate.
    let chi = match beam_spec.beam {
        Beam::Probe => beam_spec.drive_phase,
        Beam::Conjugate => PI - beam_spec.drive_phase,
    };

    let b = grid.bins_per_beam();
    // Real representation of the complex coupler C (u -> C u on u = X - iP):
    // X_out = Re(C) X + Im(C) P, P_out = -Im(C) X + Re(C) P.
    let mut re = DMatrix::<f64>::zeros(b, b);
    let mut im = DMatrix::<f64>::zeros(b, b);
    let m = spec.modulation_index;
    for j in 0..b {
        for n in -(n_max as i64)..=(n_max as i64) {
            let k = j as i64 - n * d as i64;
            if k < 0 || k >= b as i64 {
                continue;
            }
            let amp = bessel::jn(n, m);
            let (s, c) = (n as f64 * chi).sin_cos();
            re[(j, k as usize)] += amp * c;
            im[(j, k as usize)] += amp * s;
        }
    }

    let mut block = DMatrix::<f64>::zeros(2 * b, 2 * b);
    block.view_mut((0, 0), (b, b)).copy_from(&re);
    block.view_mut((0, b), (b, b)).copy_from(&im);
    block.view_mut((b, 0), (b, b)).copy_from(&(-&im));
    block.view_mut((b, b), (b, b)).copy_from(&re);

    // Truncation leaves the edge rows slightly non-unitary; project to the
    // nearest orthogonal (hence symplectic) matrix via the polar factor.
    let raw_defect = polar_defect(&block);
    let block = nearest_orthogonal(block);

    // Embed into the full two-beam operator.
    let mut s = DMatrix::identity(grid.n_quads(), grid.n_quads());
    let offset = grid.mode_number(grid.mode(beam_spec.beam, 0));
    let n_modes = grid.n_modes();
    for a in 0..b {
        for bb in 0..b {
            let xa = offset + a;
            let xb = offset + bb;
            s[(xa, xb)] = block[(a, bb)];
            s[(xa, n_modes + xb)] = block[(a, b + bb)];
            s[(n_modes + xa, xb)] = block[(b + a, bb)];
            s[(n_modes + xa, n_modes + xb)] = block[(b + a, b + bb)];
        }
    }

    let op = SymplecticOp::from_matrix(
        s,
        format!(
            "eom(m={:.6}, phi={:.6}, {:?}, {:?}, n_max={}, raw_defect={:.3e})",
            spec.modulation_index, spec.drive_phase, spec.beam, spec.placement, n_max, raw_defect
        ),
    );
    Ok(SidebandCoupler {
        spec: *spec,
        n_max,
        op,
    })
}

/// Largest deviation of M^T M from the identity (pre-renormalization defect).
fn polar_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    (m.transpose() * m - DMatrix::<f64>::identity(n, n)).amax()
}

/// Polar projection by Newton iteration, Q -> (Q + Q^-T)/2. The truncated
/// coupler is well conditioned (singular values near 1), so this converges
/// quadratically to the orthogonal polar factor at machine precision.
fn nearest_orthogonal(m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut q = m;
    for _ in 0..60 {
        let inv_t = q
            .clone()
            .try_inverse()
            .expect("truncated coupler is invertible")
            .transpose();
        q = (&q + inv_t) * 0.5;
        if (q.transpose() * &q - &eye).amax() < 1e-14 {
            break;
        }
    }
    q
}
