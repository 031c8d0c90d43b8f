//! Frequency-bin mode grid shared by the covariance pipeline and the
//! sideband couplers.
//!
//! Each beam carries `n_bins` physical analysis bins plus `guard_bins` extra
//! bins on each edge. Guard bins carry the same source statistics as in-band
//! bins so modulation sidebands have somewhere to scatter; they are excluded
//! from extracted blocks. Quadratures are ordered X-block first, then
//! P-block, probe bins before conjugate bins, ascending in frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two entangled beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beam {
    Probe,
    Conjugate,
}

impl Beam {
    pub const ALL: [Beam; 2] = [Beam::Probe, Beam::Conjugate];

    pub fn index(self) -> usize {
        match self {
            Beam::Probe => 0,
            Beam::Conjugate => 1,
        }
    }

    pub fn short_label(self) -> &'static str {
        match self {
            Beam::Probe => "p",
            Beam::Conjugate => "c",
        }
    }
}

/// Quadrature kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

/// A single mode of the grid: one frequency bin of one beam.
///
/// `bin` indexes the beam's bins internally, 0..bins_per_beam, guard bins
/// included (physical bin k sits at index `guard_bins + k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub beam: Beam,
    pub bin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    n_bins: usize,
    bin_spacing: f64,
    start_freq: f64,
    guard_bins: usize,
}

impl ModeGrid {
    pub fn new(n_bins: usize, bin_spacing: f64, start_freq: f64, guard_bins: usize) -> Result<Self> {
        if n_bins < 1 {
            return Err(Error::InvalidGrid("n_bins must be >= 1".into()));
        }
        if !(bin_spacing > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "bin_spacing must be positive, got {bin_spacing}"
            )));
        }
        if !(start_freq >= bin_spacing) {
            return Err(Error::InvalidGrid(format!(
                "start_freq must be at least one bin spacing (no DC bin), got {start_freq}"
            )));
        }
        Ok(Self {
            n_bins,
            bin_spacing,
            start_freq,
            guard_bins,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_spacing(&self) -> f64 {
        self.bin_spacing
    }

    pub fn start_freq(&self) -> f64 {
        self.start_freq
    }

    pub fn guard_bins(&self) -> usize {
        self.guard_bins
    }

    /// Bins per beam including guards.
    pub fn bins_per_beam(&self) -> usize {
        self.n_bins + 2 * self.guard_bins
    }

    /// Total mode count over both beams.
    pub fn n_modes(&self) -> usize {
        2 * self.bins_per_beam()
    }

    /// Total quadrature count (matrix dimension).
    pub fn n_quads(&self) -> usize {
        2 * self.n_modes()
    }

    /// Center frequency of an internal bin index (guard bins may sit at or
    /// below zero; they are bookkeeping modes, not displayed bins).
    pub fn bin_freq(&self, bin: usize) -> f64 {
        self.start_freq + (bin as f64 - self.guard_bins as f64) * self.bin_spacing
    }

    /// Internal bin index of physical bin `k` (0-based, k < n_bins).
    pub fn physical_bin(&self, k: usize) -> usize {
        self.guard_bins + k
    }

    /// Frequencies of the physical bins, ascending.
    pub fn physical_freqs(&self) -> Vec<f64> {
        (0..self.n_bins)
            .map(|k| self.bin_freq(self.physical_bin(k)))
            .collect()
    }

    pub fn mode(&self, beam: Beam, bin: usize) -> ModeIndex {
        debug_assert!(bin < self.bins_per_beam());
        ModeIndex { beam, bin }
    }

    /// Flat mode number of a mode (probe block first, bins ascending).
    pub fn mode_number(&self, mode: ModeIndex) -> usize {
        mode.beam.index() * self.bins_per_beam() + mode.bin
    }

    /// Row/column of a quadrature in the covariance ordering
    /// (all X first, then all P).
    pub fn quad_index(&self, quad: Quadrature, mode: ModeIndex) -> usize {
        let m = self.mode_number(mode);
        match quad {
            Quadrature::X => m,
            Quadrature::P => self.n_modes() + m,
        }
    }

    /// All modes of one beam, bins ascending.
    pub fn beam_modes(&self, beam: Beam) -> Vec<ModeIndex> {
        (0..self.bins_per_beam()).map(|bin| ModeIndex { beam, bin }).collect()
    }

    /// All modes of the grid.
    pub fn all_modes(&self) -> Vec<ModeIndex> {
        let mut v = self.beam_modes(Beam::Probe);
        v.extend(self.beam_modes(Beam::Conjugate));
        v
    }

    /// Header labels like "Xp@1.200MHz" in covariance row order.
    pub fn quad_labels(&self) -> Vec<String> {
        let mut labels = Vec::with_capacity(self.n_quads());
        for quad in ["X", "P"] {
            for beam in Beam::ALL {
                for bin in 0..self.bins_per_beam() {
                    let f_mhz = self.bin_freq(bin) / 1e6;
                    labels.push(format!("{quad}{}@{:.3}MHz", beam.short_label(), f_mhz));
                }
            }
        }
        labels
    }
}
