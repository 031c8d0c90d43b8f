//! Cross-validation of the exact covariance pipeline, the Monte-Carlo trace
//! pipeline, and the closed-form predictions on identical physics.

use nalgebra::DMatrix;

use twinbeam_core::analytic::{joint_noise, phase_sweep_noise, Branch, SourceSpec};
use twinbeam_core::dsp::{joint_noise_spectrum, shot_reference, SegmentPlan};
use twinbeam_core::eom::{instantaneous_phase, sideband_symplectic, EomSpec, Placement};
use twinbeam_core::gaussian::{
    apply_loss, apply_symplectic, beam_rotation, joint_variance, source_symplectic,
    symplectic_form, tmsv_symplectic, vacuum_cov, SymplecticOp,
};
use twinbeam_core::grid::{Beam, ModeGrid, ModeIndex, Quadrature};
use twinbeam_core::pipeline::{
    exact_covariance, exact_joint_noise_per_bin, exact_xp_block, mc_joint_noise,
    mc_photocurrents, mc_xp_block, ModulationSetup,
};
use twinbeam_core::stats::variance;
use twinbeam_core::timeseries::TraceConfig;
use twinbeam_core::dsp::band_select;

const PI: f64 = std::f64::consts::PI;
const SQRT3: f64 = 1.7320508075688772;
const F_DRIVE: f64 = 2e5;

fn eom(m: f64, phi: f64, beam: Beam, placement: Placement) -> EomSpec {
    EomSpec {
        modulation_index: m,
        drive_phase: phi,
        drive_freq_hz: F_DRIVE,
        beam,
        placement,
        enabled: true,
    }
}

fn setup(src: SourceSpec, m_p: f64, m_c: f64, phi_rel: f64, base_phase: f64) -> ModulationSetup {
    let mut s = ModulationSetup::unmodulated(src);
    if m_p > 0.0 {
        s.eom_probe = eom(m_p, base_phase, Beam::Probe, Placement::Beam);
    }
    if m_c > 0.0 {
        s.eom_conjugate = eom(m_c, base_phase + phi_rel, Beam::Conjugate, Placement::Beam);
    }
    s
}

fn trace_cfg(src: SourceSpec, n: usize, seed: u64) -> TraceConfig {
    TraceConfig {
        n_samples: n,
        seed,
        source: src,
        ..TraceConfig::default()
    }
}

fn default_grid() -> ModeGrid {
    ModeGrid::new(50, F_DRIVE, F_DRIVE, 12).unwrap()
}

/// Deterministic time-rotation identity: average of the instantaneous joint
/// X-difference variance over one drive period, evaluated on the exact
/// covariance with per-instant quadrature rotations.
fn time_rotation_average(src: SourceSpec, spec_p: &EomSpec, spec_c: &EomSpec, k_steps: usize) -> f64 {
    let grid = ModeGrid::new(1, F_DRIVE, F_DRIVE, 0).unwrap();
    let tm = source_symplectic(src.gain, &grid).unwrap();
    let mut cov = apply_symplectic(&vacuum_cov(&grid), &tm).unwrap();
    if src.eta > 0.0 {
        cov = apply_loss(&cov, &grid.all_modes(), src.eta).unwrap();
    }
    let mut coeffs = vec![0.0; grid.n_quads()];
    coeffs[grid.quad_index(Quadrature::X, grid.mode(Beam::Probe, 0))] = 1.0;
    coeffs[grid.quad_index(Quadrature::X, grid.mode(Beam::Conjugate, 0))] = -1.0;

    let period = 1.0 / F_DRIVE;
    let mut acc = 0.0;
    for k in 0..k_steps {
        let t = k as f64 * period / k_steps as f64;
        let rp = beam_rotation(instantaneous_phase(t, spec_p), Beam::Probe, &grid);
        let rc = beam_rotation(instantaneous_phase(t, spec_c), Beam::Conjugate, &grid);
        let rotated = apply_symplectic(&apply_symplectic(&cov, &rp).unwrap(), &rc).unwrap();
        acc += joint_variance(&rotated, &coeffs).unwrap();
    }
    acc / k_steps as f64
}

#[test]
fn time_rotation_identity_matches_closed_form() {
    let src = SourceSpec { gain: SQRT3, eta: 0.15 };
    for (m_p, m_c, phi) in [
        (0.1 * PI, 0.1 * PI, 0.0),
        (0.1 * PI, 0.1 * PI, 2.0 * PI / 3.0),
        (0.2 * PI, 0.0, 0.0),
        (0.1 * PI, 0.05 * PI, 1.1),
    ] {
        let spec_p = eom(m_p, 0.0, Beam::Probe, Placement::Beam);
        let spec_c = eom(m_c, phi, Beam::Conjugate, Placement::Beam);
        let avg = time_rotation_average(src, &spec_p, &spec_c, 256);
        let expect = joint_noise(&src, m_p, m_c, phi).unwrap();
        assert!(
            (avg - expect).abs() / expect < 1e-6,
            "(m_p={m_p}, m_c={m_c}, phi={phi}): rotation average {avg} vs closed form {expect}"
        );
    }
}

#[test]
fn out_of_phase_rotation_cancels_exactly() {
    let src = SourceSpec { gain: SQRT3, eta: 0.0 };
    let m = 0.1 * PI;
    let spec_p = eom(m, 0.0, Beam::Probe, Placement::Beam);
    let spec_c = eom(m, PI, Beam::Conjugate, Placement::Beam);
    let avg = time_rotation_average(src, &spec_p, &spec_c, 64);
    let baseline = joint_noise(&src, 0.0, 0.0, 0.0).unwrap();
    assert!((avg - baseline).abs() < 1e-9, "{avg} vs {baseline}");
}

#[test]
fn phase_sweep_matches_rotated_covariance() {
    let src = SourceSpec { gain: SQRT3, eta: 0.1 };
    let grid = ModeGrid::new(1, F_DRIVE, F_DRIVE, 0).unwrap();
    let tm = source_symplectic(src.gain, &grid).unwrap();
    let mut cov = apply_symplectic(&vacuum_cov(&grid), &tm).unwrap();
    cov = apply_loss(&cov, &grid.all_modes(), src.eta).unwrap();

    for theta in [0.0, 0.3, PI / 4.0, PI / 2.0, 2.2, PI] {
        let rot = beam_rotation(theta, Beam::Probe, &grid);
        let rotated = apply_symplectic(&cov, &rot).unwrap();
        for branch in [Branch::Difference, Branch::Sum] {
            let mut coeffs = vec![0.0; grid.n_quads()];
            coeffs[grid.quad_index(Quadrature::X, grid.mode(Beam::Probe, 0))] = 1.0;
            coeffs[grid.quad_index(Quadrature::X, grid.mode(Beam::Conjugate, 0))] =
                if matches!(branch, Branch::Difference) { -1.0 } else { 1.0 };
            let v = joint_variance(&rotated, &coeffs).unwrap();
            let expect = phase_sweep_noise(&src, theta, branch);
            assert!(
                (v - expect).abs() < 1e-12,
                "theta={theta} {branch:?}: {v} vs {expect}"
            );
        }
    }
}

#[test]
fn loss_equals_ancilla_beamsplitter_construction() {
    // apply_loss must agree with: attach vacuum ancillas, apply the
    // beamsplitter symplectic, trace the ancillas out.
    let grid = ModeGrid::new(3, F_DRIVE, F_DRIVE, 0).unwrap();
    let src = source_symplectic(1.6, &grid).unwrap();
    let rot = beam_rotation(0.37, Beam::Conjugate, &grid);
    let cov = apply_symplectic(&apply_symplectic(&vacuum_cov(&grid), &src).unwrap(), &rot).unwrap();

    let lossy_modes: Vec<ModeIndex> = vec![
        grid.mode(Beam::Probe, 0),
        grid.mode(Beam::Probe, 2),
        grid.mode(Beam::Conjugate, 1),
    ];
    for eta in [0.13, 0.5, 0.85] {
        let fast = apply_loss(&cov, &lossy_modes, eta).unwrap();

        // explicit construction on raw matrices
        let n_sys = grid.n_modes();
        let n_anc = lossy_modes.len();
        let n_tot = n_sys + n_anc;
        let mut ext = DMatrix::<f64>::identity(2 * n_tot, 2 * n_tot);
        // embed system covariance: X block at 0..n_sys, P block at n_tot..n_tot+n_sys
        let c = cov.data();
        for i in 0..n_sys {
            for j in 0..n_sys {
                ext[(i, j)] = c[(i, j)];
                ext[(i, n_tot + j)] = c[(i, n_sys + j)];
                ext[(n_tot + i, j)] = c[(n_sys + i, j)];
                ext[(n_tot + i, n_tot + j)] = c[(n_sys + i, n_sys + j)];
            }
        }
        let t = (1.0 - eta).sqrt();
        let r = eta.sqrt();
        let mut bs = DMatrix::<f64>::identity(2 * n_tot, 2 * n_tot);
        for (a, &mode) in lossy_modes.iter().enumerate() {
            let m = grid.mode_number(mode);
            let anc = n_sys + a;
            for off in [0usize, n_tot] {
                bs[(off + m, off + m)] = t;
                bs[(off + m, off + anc)] = r;
                bs[(off + anc, off + m)] = -r;
                bs[(off + anc, off + anc)] = t;
            }
        }
        let evolved = &bs * &ext * bs.transpose();
        // trace out ancillas: keep system rows/cols
        let mut reduced = DMatrix::<f64>::zeros(2 * n_sys, 2 * n_sys);
        for i in 0..n_sys {
            for j in 0..n_sys {
                reduced[(i, j)] = evolved[(i, j)];
                reduced[(i, n_sys + j)] = evolved[(i, n_tot + j)];
                reduced[(n_sys + i, j)] = evolved[(n_tot + i, j)];
                reduced[(n_sys + i, n_sys + j)] = evolved[(n_tot + i, n_tot + j)];
            }
        }
        let diff = (&reduced - fast.data()).amax();
        assert!(diff < 1e-12, "eta={eta}: max deviation {diff:e}");
    }
}

#[test]
fn joint_variance_invariant_under_bin_relabeling() {
    let grid = ModeGrid::new(4, F_DRIVE, F_DRIVE, 0).unwrap();
    let src = source_symplectic(1.8, &grid).unwrap();
    let cov = apply_symplectic(&vacuum_cov(&grid), &src).unwrap();

    // coefficients spread over several bins
    let mut coeffs = vec![0.0; grid.n_quads()];
    for (k, w) in [(0usize, 1.0), (1, -0.5), (3, 0.25)] {
        coeffs[grid.quad_index(Quadrature::X, grid.mode(Beam::Probe, k))] = w;
        coeffs[grid.quad_index(Quadrature::X, grid.mode(Beam::Conjugate, k))] = -w;
    }
    let v = joint_variance(&cov, &coeffs).unwrap();

    // relabel bins by a permutation applied to both beams
    let perm = [2usize, 0, 3, 1];
    let mut permuted = vec![0.0; grid.n_quads()];
    for bin in 0..4 {
        for beam in Beam::ALL {
            for quad in [Quadrature::X, Quadrature::P] {
                let from = grid.quad_index(quad, grid.mode(beam, bin));
                let to = grid.quad_index(quad, grid.mode(beam, perm[bin]));
                permuted[to] = coeffs[from];
            }
        }
    }
    let vp = joint_variance(&cov, &permuted).unwrap();
    assert!((v - vp).abs() < 1e-12, "{v} vs {vp}");
}

#[test]
fn tmsv_minimum_uncertainty_product() {
    let grid = ModeGrid::new(1, F_DRIVE, F_DRIVE, 0).unwrap();
    for gain in [1.0, 1.2, SQRT3, 2.0, 3.0] {
        let s = tmsv_symplectic(gain, grid.mode(Beam::Probe, 0), grid.mode(Beam::Conjugate, 0), &grid)
            .unwrap();
        let cov = apply_symplectic(&vacuum_cov(&grid), &s).unwrap();
        let mut minus = vec![0.0; grid.n_quads()];
        minus[grid.quad_index(Quadrature::X, grid.mode(Beam::Probe, 0))] = 1.0;
        minus[grid.quad_index(Quadrature::X, grid.mode(Beam::Conjugate, 0))] = -1.0;
        let mut plus = vec![0.0; grid.n_quads()];
        plus[grid.quad_index(Quadrature::X, grid.mode(Beam::Probe, 0))] = 1.0;
        plus[grid.quad_index(Quadrature::X, grid.mode(Beam::Conjugate, 0))] = 1.0;
        let product =
            joint_variance(&cov, &minus).unwrap() * joint_variance(&cov, &plus).unwrap();
        assert!((product - 1.0).abs() < 1e-9, "G={gain}: product {product}");
    }
}

#[test]
fn random_constructor_compositions_stay_symplectic_and_physical() {
    let grid = ModeGrid::new(4, F_DRIVE, F_DRIVE, 6).unwrap();
    let mut op = SymplecticOp::identity(&grid, "id");
    let pieces: Vec<SymplecticOp> = vec![
        source_symplectic(1.4, &grid).unwrap(),
        beam_rotation(0.9, Beam::Probe, &grid),
        sideband_symplectic(&eom(0.25, 0.6, Beam::Conjugate, Placement::Beam), &grid, 1e-9)
            .unwrap()
            .op,
        tmsv_symplectic(1.1, grid.mode(Beam::Probe, 2), grid.mode(Beam::Conjugate, 2), &grid)
            .unwrap(),
        beam_rotation(-1.3, Beam::Conjugate, &grid),
        sideband_symplectic(&eom(0.4, -1.0, Beam::Probe, Placement::LocalOscillator), &grid, 1e-9)
            .unwrap()
            .op,
    ];
    let mut cov = vacuum_cov(&grid);
    for p in &pieces {
        op = p.compose(&op);
        cov = apply_symplectic(&cov, p).unwrap();
        assert!(op.symplectic_defect() < 1e-9);
        let rep = cov.check_physical();
        assert!(rep.pass, "min eig {}", rep.min_eigenvalue);
    }
    // omega itself is preserved by the total composite
    let n_modes = grid.n_modes();
    let omega = symplectic_form(n_modes);
    let defect = (&op.matrix * &omega * op.matrix.transpose() - &omega).amax();
    assert!(defect < 1e-9);
}

#[test]
fn mc_oracle_across_gain_grid() {
    // the trace pipeline stays unbiased away from the default gain
    for (i, (gain, eta, m_p, m_c, phi)) in [
        (1.0, 0.0, 0.0, 0.0, 0.0),
        (1.3, 0.1, 0.3, 0.0, 0.0),
        (2.0, 0.0, 0.5, 0.5, 1.0),
        (2.0, 0.3, 0.2, 0.4, PI),
    ]
    .into_iter()
    .enumerate()
    {
        let src = SourceSpec { gain, eta };
        let physics = setup(src, m_p, m_c, phi, 0.0);
        let cfg = trace_cfg(src, 300_000, 600 + i as u64);
        let (v, se) = mc_joint_noise(&physics, &cfg, 100).unwrap();
        let expect = joint_noise(&src, m_p, m_c, phi).unwrap();
        let z = (v - expect) / se;
        assert!(z.abs() < 5.0, "G={gain} eta={eta}: {v} vs {expect} (z={z:.1})");
    }
}

#[test]
fn per_bin_joint_noise_spectra_match_exact_pipeline() {
    // Monte-Carlo Welch spectrum against the exact per-bin prediction
    let src = SourceSpec { gain: SQRT3, eta: 0.15 };
    let m = 0.1 * PI;
    let phys = setup(src, m, m, 2.0 * PI / 3.0, 0.0);
    let grid = default_grid();

    let cov = exact_covariance(&phys, &grid, 1e-9).unwrap();
    let exact = exact_joint_noise_per_bin(&cov).unwrap();

    let cfg = trace_cfg(src, 1_000_000, 404);
    let plan = SegmentPlan::welch_hann(500);
    let shot_cfg = TraceConfig {
        source: SourceSpec { gain: 1.0, eta: 0.0 },
        seed: 405,
        ..cfg
    };
    let shot = shot_reference(&shot_cfg, &plan).unwrap();
    let pair = mc_photocurrents(&phys, &cfg, 0.0, 0.0).unwrap();
    let spec = joint_noise_spectrum(&pair, Branch::Difference, &plan, &shot).unwrap();
    let band = band_select(&spec, 2e5, 1e7);
    assert_eq!(band.freqs_hz.len(), 50);
    for k in 0..50 {
        let z = (band.psd[k] - exact[k]) / band.stderr[k];
        assert!(
            z.abs() < 5.0,
            "bin {k}: mc {} vs exact {} (z = {z})",
            band.psd[k],
            exact[k]
        );
    }
}

#[test]
fn xp_covariance_block_matches_exact_pipeline() {
    // The central oracle for the drive-locked covariance estimation: each
    // X_p-P_c entry from traces within 5 standard errors of the exact value.
    let src = SourceSpec { gain: SQRT3, eta: 0.0 };
    let m = 0.1 * PI;
    let base = -PI / 2.0; // cosine-locked drive: block lands in the cc component
    let grid = default_grid();
    let plan = SegmentPlan::drive_locked(500, F_DRIVE);

    for (tag, phi_rel) in [("in_phase", 0.0), ("out_of_phase", PI)] {
        let phys = setup(src, m, m, phi_rel, base);
        let cov = exact_covariance(&phys, &grid, 1e-9).unwrap();
        let expect = exact_xp_block(&cov).unwrap();

        let cfg = trace_cfg(src, 1_000_000, 777);
        let est = mc_xp_block(&phys, &cfg, &plan, 50).unwrap();

        let mut worst: f64 = 0.0;
        for j in 0..50 {
            for k in 0..50 {
                let z = (est.matrix[(j, k)] - expect[(j, k)]) / est.stderr[(j, k)];
                worst = worst.max(z.abs());
                assert!(
                    z.abs() < 5.0,
                    "{tag} ({j},{k}): mc {} vs exact {} (z = {z})",
                    est.matrix[(j, k)],
                    expect[(j, k)]
                );
            }
        }
        // the in-phase block must actually carry structure
        if phi_rel == 0.0 {
            let first = expect[(1, 0)];
            assert!(first.abs() > 1.0, "first diagonal {first}");
        }
        println!("{tag}: worst |z| = {worst:.2}");
    }
}

#[test]
fn corrupted_sign_convention_fails_p_sum_statistics() {
    // Negative control: the opposite Bogoliubov sign convention (X sum and
    // P difference squeezed) is still a valid symplectic squeezer, so only
    // the measured P-sum statistic can reject it.
    let grid = ModeGrid::new(1, F_DRIVE, F_DRIVE, 0).unwrap();
    let gain = SQRT3;
    let g = (gain * gain - 1.0f64).sqrt();
    let mut bad = DMatrix::<f64>::identity(grid.n_quads(), grid.n_quads());
    let xp = grid.quad_index(Quadrature::X, grid.mode(Beam::Probe, 0));
    let xc = grid.quad_index(Quadrature::X, grid.mode(Beam::Conjugate, 0));
    let pp = grid.quad_index(Quadrature::P, grid.mode(Beam::Probe, 0));
    let pc = grid.quad_index(Quadrature::P, grid.mode(Beam::Conjugate, 0));
    bad[(xp, xp)] = gain;
    bad[(xp, xc)] = -g; // flipped
    bad[(xc, xc)] = gain;
    bad[(xc, xp)] = -g; // flipped
    bad[(pp, pp)] = gain;
    bad[(pp, pc)] = g; // flipped
    bad[(pc, pc)] = gain;
    bad[(pc, pp)] = g; // flipped
    let bad_op = SymplecticOp::from_matrix(bad, "sign-flipped tmsv");
    // symplectic, so every structural check passes...
    assert!(bad_op.symplectic_defect() < 1e-12);

    let cov = apply_symplectic(&vacuum_cov(&grid), &bad_op).unwrap();
    let mut psum = vec![0.0; grid.n_quads()];
    psum[pp] = 1.0;
    psum[pc] = 1.0;
    let corrupted_prediction = joint_variance(&cov, &psum).unwrap();

    // ...but the P-sum statistic from correctly synthesized traces is
    // squeezed, and the z-score against the corrupted prediction explodes.
    let src = SourceSpec { gain, eta: 0.0 };
    let cfg = trace_cfg(src, 200_000, 5150);
    let phys = ModulationSetup::unmodulated(src);
    let pair = mc_photocurrents(&phys, &cfg, PI / 2.0, PI / 2.0).unwrap();
    let joint = pair.joint(false); // (P_p + P_c)/sqrt(2)
    let v = variance(&joint);
    let se = v * (2.0 / cfg.n_samples as f64).sqrt();
    let z = (v - corrupted_prediction) / se;
    assert!(
        z.abs() > 5.0,
        "corrupted prediction {corrupted_prediction} should be rejected, mc {v}, z {z}"
    );

    // sanity: the correct prediction is accepted
    let good = joint_noise(&src, 0.0, 0.0, 0.0).unwrap();
    let z_good = (v - good) / se;
    assert!(z_good.abs() < 5.0, "correct prediction rejected: z {z_good}");
}

#[test]
fn reduced_sample_count_stays_unbiased() {
    // 100x fewer samples: wider error bars, mean z over repetitions near 0.
    let src = SourceSpec { gain: SQRT3, eta: 0.0 };
    let m = 0.1 * PI;
    let phys = setup(src, m, 0.0, 0.0, 0.0);
    let expect = joint_noise(&src, m, 0.0, 0.0).unwrap();

    let reps = 32;
    let mut zs = Vec::with_capacity(reps);
    for r in 0..reps {
        let cfg = trace_cfg(src, 10_000, 9000 + r as u64);
        let (v, se) = mc_joint_noise(&phys, &cfg, 20).unwrap();
        zs.push((v - expect) / se);
    }
    let mean_z = zs.iter().sum::<f64>() / reps as f64;
    assert!(
        mean_z.abs() < 5.0 / (reps as f64).sqrt(),
        "mean z = {mean_z}, individual z: {zs:?}"
    );
}

#[test]
fn lo_placement_negates_xp_block_exactly() {
    let src = SourceSpec { gain: SQRT3, eta: 0.0 };
    let m = 0.1 * PI;
    let base = -PI / 2.0;
    let grid = default_grid();

    let in_beam = setup(src, m, m, 0.0, base);
    let mut in_lo = in_beam;
    in_lo.eom_probe.placement = Placement::LocalOscillator;
    in_lo.eom_conjugate.placement = Placement::LocalOscillator;

    let block_beam = exact_xp_block(&exact_covariance(&in_beam, &grid, 1e-9).unwrap()).unwrap();
    let block_lo = exact_xp_block(&exact_covariance(&in_lo, &grid, 1e-9).unwrap()).unwrap();
    let diff = (&block_beam + &block_lo).amax();
    assert!(diff < 1e-9, "LO block should negate the in-beam block, diff {diff:e}");
    assert!(block_beam.amax() > 1.0, "block should be nontrivial");
}

mod physicality_properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn random_constructor_stacks_preserve_physicality(
            gain in 1.0f64..2.0,
            theta_p in -PI..PI,
            theta_c in -PI..PI,
            m in 0.0f64..0.4,
            phi in 0.0f64..(2.0 * PI),
            lo_placed in any::<bool>(),
            eta in 0.0f64..0.9,
        ) {
            let grid = ModeGrid::new(3, F_DRIVE, F_DRIVE, 6).unwrap();
            let placement = if lo_placed { Placement::LocalOscillator } else { Placement::Beam };
            let mut cov = vacuum_cov(&grid);
            let ops = [
                source_symplectic(gain, &grid).unwrap(),
                sideband_symplectic(&eom(m, phi, Beam::Probe, Placement::Beam), &grid, 1e-9).unwrap().op,
                sideband_symplectic(&eom(m, phi + 1.0, Beam::Conjugate, placement), &grid, 1e-9).unwrap().op,
                beam_rotation(theta_p, Beam::Probe, &grid),
                beam_rotation(theta_c, Beam::Conjugate, &grid),
            ];
            for op in &ops {
                prop_assert!(op.symplectic_defect() < 1e-9);
                cov = apply_symplectic(&cov, op).unwrap();
                let rep = cov.check_physical();
                prop_assert!(rep.pass, "min eigenvalue {}", rep.min_eigenvalue);
            }
            let lossy = apply_loss(&cov, &grid.all_modes(), eta).unwrap();
            prop_assert!(lossy.check_physical().pass);
        }
    }
}

#[test]
fn mixed_placement_cancels_in_phase_couples_out_of_phase() {
    let src = SourceSpec { gain: SQRT3, eta: 0.0 };
    let m = 0.1 * PI;
    let base = -PI / 2.0;
    let grid = default_grid();

    let mut mixed_in_phase = setup(src, m, m, 0.0, base);
    mixed_in_phase.eom_conjugate.placement = Placement::LocalOscillator;
    let block = exact_xp_block(&exact_covariance(&mixed_in_phase, &grid, 1e-9).unwrap()).unwrap();
    assert!(block.amax() < 1e-9, "in-phase mixed placement should cancel, got {}", block.amax());

    let mut mixed_out = setup(src, m, m, PI, base);
    mixed_out.eom_conjugate.placement = Placement::LocalOscillator;
    let block = exact_xp_block(&exact_covariance(&mixed_out, &grid, 1e-9).unwrap()).unwrap();
    assert!(block.amax() > 1.0, "out-of-phase mixed placement should couple");
}
