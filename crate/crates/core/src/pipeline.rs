//! End-to-end composition of the two pipelines on identical physics.
//!
//! Both run source -> modulators -> loss. The exact pipeline evolves a
//! covariance matrix through symplectic operators; the Monte-Carlo pipeline
//! synthesizes traces, rotates them sample by sample, injects loss, and
//! measures. Loss is applied after the modulators in both.

use nalgebra::DMatrix;

use crate::analytic::SourceSpec;
use crate::dsp::{cross_covariance, drive_locked_bins, Component, CovBlockEstimate, SegmentPlan};
use crate::eom::{sideband_symplectic, EomSpec};
use crate::error::Result;
use crate::gaussian::{
    apply_loss, apply_symplectic, joint_variance, source_symplectic, vacuum_cov, BlockSelector,
    CovMatrix,
};
use crate::grid::{Beam, ModeGrid, Quadrature};
use crate::stats::segmented_variance;
use crate::timeseries::{
    apply_eom, apply_loss_traces, homodyne, synthesize_source, PhotocurrentPair, TraceConfig,
};

/// Source plus the two modulators acting on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSetup {
    pub source: SourceSpec,
    pub eom_probe: EomSpec,
    pub eom_conjugate: EomSpec,
}

impl ModulationSetup {
    pub fn unmodulated(source: SourceSpec) -> Self {
        Self {
            source,
            eom_probe: EomSpec::off(Beam::Probe),
            eom_conjugate: EomSpec::off(Beam::Conjugate),
        }
    }
}

/// Exact pipeline: vacuum -> two-mode squeezer on every bin pair ->
/// frequency-bin couplers -> loss on all modes.
pub fn exact_covariance(setup: &ModulationSetup, grid: &ModeGrid, eps: f64) -> Result<CovMatrix> {
    let mut cov = vacuum_cov(grid);
    let src = source_symplectic(setup.source.gain, grid)?;
    cov = apply_symplectic(&cov, &src)?;
    for spec in [&setup.eom_probe, &setup.eom_conjugate] {
        if spec.enabled && spec.modulation_index > 0.0 {
            let coupler = sideband_symplectic(spec, grid, eps)?;
            cov = apply_symplectic(&cov, &coupler.op)?;
        }
    }
    if setup.source.eta > 0.0 {
        cov = apply_loss(&cov, &grid.all_modes(), setup.source.eta)?;
    }
    Ok(cov)
}

/// Joint X-difference variance of each physical bin pair from the exact
/// covariance (shot-noise units).
pub fn exact_joint_noise_per_bin(cov: &CovMatrix) -> Result<Vec<f64>> {
    let grid = *cov.grid();
    let mut out = Vec::with_capacity(grid.n_bins());
    for k in 0..grid.n_bins() {
        let bin = grid.physical_bin(k);
        let mut coeffs = vec![0.0; grid.n_quads()];
        coeffs[grid.quad_index(Quadrature::X, grid.mode(Beam::Probe, bin))] = 1.0;
        coeffs[grid.quad_index(Quadrature::X, grid.mode(Beam::Conjugate, bin))] = -1.0;
        out.push(joint_variance(cov, &coeffs)?);
    }
    Ok(out)
}

/// The X_p-P_c block of the exact covariance over physical bins.
pub fn exact_xp_block(cov: &CovMatrix) -> Result<DMatrix<f64>> {
    let grid = cov.grid();
    cov.extract_block(
        &BlockSelector::full(Beam::Probe, Quadrature::X, grid),
        &BlockSelector::full(Beam::Conjugate, Quadrature::P, grid),
    )
}

/// Monte-Carlo pipeline up to the photocurrents at lock phases
/// (theta_p, theta_c).
pub fn mc_photocurrents(
    setup: &ModulationSetup,
    cfg: &TraceConfig,
    theta_p: f64,
    theta_c: f64,
) -> Result<PhotocurrentPair> {
    let source = synthesize_source(&TraceConfig {
        source: SourceSpec { eta: 0.0, ..setup.source },
        ..*cfg
    })?;
    mc_photocurrents_from(&source, setup, cfg, theta_p, theta_c)
}

/// Same chain starting from pre-made (e.g. imported) lossless source traces:
/// modulators, loss, homodyne.
pub fn mc_photocurrents_from(
    source: &crate::timeseries::QuadratureTraces,
    setup: &ModulationSetup,
    cfg: &TraceConfig,
    theta_p: f64,
    theta_c: f64,
) -> Result<PhotocurrentPair> {
    let mut traces = apply_eom(source, &setup.eom_probe, &setup.eom_conjugate)?;
    if setup.source.eta > 0.0 {
        traces = apply_loss_traces(&traces, setup.source.eta, cfg.seed ^ 0x4c4f5353)?;
    }
    Ok(homodyne(&traces, theta_p, theta_c, cfg))
}

/// Time-averaged normalized joint X-difference variance from synthesized
/// traces, with a standard error from per-segment variances.
pub fn mc_joint_noise(
    setup: &ModulationSetup,
    cfg: &TraceConfig,
    n_error_segments: usize,
) -> Result<(f64, f64)> {
    let pair = mc_photocurrents(setup, cfg, 0.0, 0.0)?;
    let joint = pair.joint(true);
    Ok(segmented_variance(&joint, n_error_segments))
}

/// Drive-locked cross-covariance block of the (X_p, P_c)-locked
/// photocurrents, i.e. lock phases (0, pi/2), cosine components.
pub fn mc_xp_block(
    setup: &ModulationSetup,
    cfg: &TraceConfig,
    plan: &SegmentPlan,
    n_bins: usize,
) -> Result<CovBlockEstimate> {
    let pair = mc_photocurrents(setup, cfg, 0.0, std::f64::consts::FRAC_PI_2)?;
    let bins_p = drive_locked_bins(&pair.probe, cfg.sample_rate_hz, plan, n_bins)?;
    let bins_c = drive_locked_bins(&pair.conjugate, cfg.sample_rate_hz, plan, n_bins)?;
    cross_covariance(&bins_p, &bins_c, Component::Cc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::joint_noise;
    use crate::eom::Placement;

    const PI: f64 = std::f64::consts::PI;
    const SQRT3: f64 = 1.7320508075688772;

    fn eom(m: f64, phi: f64, beam: Beam) -> EomSpec {
        EomSpec {
            modulation_index: m,
            drive_phase: phi,
            drive_freq_hz: 2e5,
            beam,
            placement: Placement::Beam,
            enabled: true,
        }
    }

    #[test]
    fn exact_pipeline_matches_closed_form_on_small_grid() {
        let grid = ModeGrid::new(6, 2e5, 2e5, 10).unwrap();
        let src = SourceSpec { gain: SQRT3, eta: 0.15 };
        let m = 0.1 * PI;
        for phi in [0.0, 2.0 * PI / 3.0, PI] {
            let setup = ModulationSetup {
                source: src,
                eom_probe: eom(m, 0.0, Beam::Probe),
                eom_conjugate: eom(m, phi, Beam::Conjugate),
            };
            let cov = exact_covariance(&setup, &grid, 1e-9).unwrap();
            let per_bin = exact_joint_noise_per_bin(&cov).unwrap();
            let expect = joint_noise(&src, m, m, phi).unwrap();
            for (k, v) in per_bin.iter().enumerate() {
                assert!(
                    (v - expect).abs() / expect < 1e-6,
                    "phi={phi} bin {k}: {v} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn mc_matches_closed_form() {
        let src = SourceSpec { gain: SQRT3, eta: 0.0 };
        let m = 0.1 * PI;
        let setup = ModulationSetup {
            source: src,
            eom_probe: eom(m, 0.0, Beam::Probe),
            eom_conjugate: eom(m, 0.0, Beam::Conjugate),
        };
        let cfg = TraceConfig {
            n_samples: 500_000,
            seed: 33,
            source: src,
            ..TraceConfig::default()
        };
        let (v, se) = mc_joint_noise(&setup, &cfg, 100).unwrap();
        let expect = joint_noise(&src, m, m, 0.0).unwrap();
        assert!((v - expect).abs() < 5.0 * se, "{v} vs {expect} (se {se})");
    }
}
