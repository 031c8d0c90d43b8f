//! Simulation toolkit for phase-modulated, multimode two-mode-squeezed twin
//! beams.
//!
//! Two mutually validating pipelines reproduce the same physics:
//!
//! * an exact Gaussian pipeline: covariance matrices evolved by symplectic
//!   operators (two-mode squeezer, frequency-bin modulator couplers, loss,
//!   quadrature rotations), see [`gaussian`] and [`eom`];
//! * a Monte-Carlo pipeline: seeded synthesis of homodyne photocurrent
//!   traces plus spectral estimation, see [`timeseries`] and [`dsp`].
//!
//! Closed forms for the joint quadrature noise live in [`analytic`] and act
//! as the ground truth for both.

pub mod analytic;
pub mod bessel;
pub mod dsp;
pub mod eom;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod pipeline;
pub mod stats;
pub mod timeseries;

pub use analytic::{joint_noise, joint_noise_equal, phase_sweep_noise, to_db, Branch, SourceSpec};
pub use dsp::{
    cross_covariance, drive_locked_bins, joint_noise_spectrum, shot_reference, welch_psd,
    BinQuadratures, Component, CovBlockEstimate, SegmentPlan, Spectrum, WindowKind,
};
pub use eom::{
    effective_index, equivalent_beam_spec, instantaneous_phase, sideband_symplectic,
    truncation_order, EomSpec, Placement, SidebandCoupler,
};
pub use error::{Error, Result};
pub use gaussian::{
    apply_loss, apply_symplectic, beam_rotation, joint_variance, quadrature_rotation,
    source_symplectic, symplectic_form, tmsv_symplectic, vacuum_cov, BlockSelector, CovMatrix,
    PhysicalityReport, SymplecticOp,
};
pub use grid::{Beam, ModeGrid, ModeIndex, Quadrature};
pub use pipeline::{
    exact_covariance, exact_joint_noise_per_bin, exact_xp_block, mc_joint_noise,
    mc_photocurrents, mc_photocurrents_from, mc_xp_block, ModulationSetup,
};
pub use timeseries::{
    apply_eom, apply_loss_traces, export_traces, homodyne, homodyne_with_compensation,
    import_traces, synthesize_source, GainProfile, PhotocurrentPair, QuadratureTraces,
    TraceConfig,
};
