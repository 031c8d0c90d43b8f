//! Spectral estimation chain: Welch power spectra of photocurrents,
//! shot-noise normalization, drive-phase-locked bin extraction, and
//! cross-covariance blocks between the frequency bins of the two beams.
//!
//! Normalization convention: a unit-variance white photocurrent yields a
//! flat power spectrum of 1 in every bin, so spectra divided by a vacuum
//! (shot) reference read directly in shot-noise units.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analytic::Branch;
use crate::error::{Error, Result};
use crate::timeseries::{homodyne, synthesize_source, PhotocurrentPair, TraceConfig};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    Hann,
}

/// Segmentation recipe for Welch spectra and drive-locked bin extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segment_len: usize,
    /// Overlap as a fraction of the segment length, in [0, 1).
    pub overlap: f64,
    pub window: WindowKind,
    /// Phase-synchronous segmentation: rectangular windows, no overlap,
    /// segment length an integer number of drive periods, every segment
    /// starting at drive phase zero.
    pub drive_locked: bool,
    pub f_drive_hz: f64,
}

impl SegmentPlan {
    /// Hann display-spectrum plan. The 75% overlap staggers window starts by
    /// a quarter drive period when the segment spans whole periods, which
    /// cancels the second-drive-harmonic leakage a period-commensurate Hann
    /// window would otherwise pick up from modulated (cyclostationary)
    /// signals.
    pub fn welch_hann(segment_len: usize) -> Self {
        Self {
            segment_len,
            overlap: 0.75,
            window: WindowKind::Hann,
            drive_locked: false,
            f_drive_hz: 2e5,
        }
    }

    pub fn drive_locked(segment_len: usize, f_drive_hz: f64) -> Self {
        Self {
            segment_len,
            overlap: 0.0,
            window: WindowKind::Rectangular,
            drive_locked: true,
            f_drive_hz,
        }
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.segment_len < 2 {
            return Err(Error::InvalidPlan("segment_len must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidPlan(format!(
                "overlap must lie in [0, 1), got {}",
                self.overlap
            )));
        }
        if self.drive_locked {
            if self.window != WindowKind::Rectangular {
                return Err(Error::InvalidPlan(
                    "drive-locked plans use rectangular windows".into(),
                ));
            }
            if self.overlap != 0.0 {
                return Err(Error::InvalidPlan("drive-locked plans use no overlap".into()));
            }
            let period = sample_rate_hz / self.f_drive_hz;
            let p = period.round();
            if (period - p).abs() > 1e-9 * period.max(1.0) {
                return Err(Error::InvalidPlan(format!(
                    "sample rate {sample_rate_hz} not phase-locked to drive {}",
                    self.f_drive_hz
                )));
            }
            if self.segment_len % (p as usize) != 0 {
                return Err(Error::InvalidPlan(format!(
                    "segment_len {} is not a whole number of drive periods ({} samples)",
                    self.segment_len, p
                )));
            }
        }
        Ok(())
    }

    fn hop(&self) -> usize {
        let hop = ((1.0 - self.overlap) * self.segment_len as f64).round() as usize;
        hop.max(1)
    }

    /// Number of segments available in a signal of `signal_len` samples.
    pub fn n_segments(&self, signal_len: usize) -> usize {
        if signal_len < self.segment_len {
            return 0;
        }
        (signal_len - self.segment_len) / self.hop() + 1
    }

    fn window_values(&self) -> Vec<f64> {
        let m = self.segment_len;
        match self.window {
            WindowKind::Rectangular => vec![1.0; m],
            WindowKind::Hann => (0..m)
                .map(|t| 0.5 * (1.0 - (TAU * t as f64 / m as f64).cos()))
                .collect(),
        }
    }
}

/// One-sided power spectrum with per-bin standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    /// Shot-noise-normalized values (equal to `raw_psd` until divided by a
    /// shot reference).
    pub psd: Vec<f64>,
    /// Pre-normalization values (white unit-variance input reads 1).
    pub raw_psd: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_segments: usize,
    pub plan: SegmentPlan,
    pub sample_rate_hz: f64,
}

impl Spectrum {
    /// Power-weighted mean of the raw spectrum; equals the signal variance
    /// for rectangular windows without overlap (interior bins count twice in
    /// the underlying two-sided spectrum).
    pub fn mean_power(&self) -> f64 {
        let m = self.plan.segment_len;
        let mut acc = 0.0;
        for (k, &v) in self.raw_psd.iter().enumerate() {
            let edge = k == 0 || (m % 2 == 0 && k == self.raw_psd.len() - 1);
            acc += if edge { v } else { 2.0 * v };
        }
        acc / m as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,psd_rel_shot,stderr\n");
        for i in 0..self.freqs_hz.len() {
            s.push_str(&format!(
                "{:.6},{:.12e},{:.12e}\n",
                self.freqs_hz[i], self.psd[i], self.stderr[i]
            ));
        }
        s
    }
}

/// Welch estimate of the power spectrum of one photocurrent channel.
pub fn welch_psd(signal: &[f64], sample_rate_hz: f64, plan: &SegmentPlan) -> Result<Spectrum> {
    plan.validate(sample_rate_hz)?;
    let m = plan.segment_len;
    if signal.len() < m {
        return Err(Error::SignalTooShort {
            signal_len: signal.len(),
            segment_len: m,
        });
    }
    let n_segments = plan.n_segments(signal.len());
    if n_segments < 2 {
        return Err(Error::SignalTooShort {
            signal_len: signal.len(),
            segment_len: 2 * m,
        });
    }
    let window = plan.window_values();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let hop = plan.hop();
    let n_bins = m / 2 + 1;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);

    // Per-segment periodograms computed in parallel (order-preserving),
    // reduced sequentially so results do not depend on worker count.
    let periodograms: Vec<Vec<f64>> = (0..n_segments)
        .into_par_iter()
        .map(|s| {
            let start = s * hop;
            let mut buf: Vec<Complex<f64>> = signal[start..start + m]
                .iter()
                .zip(&window)
                .map(|(&x, &w)| Complex::new(x * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..n_bins].iter().map(|z| z.norm_sqr() / win_power).collect()
        })
        .collect();

    let mut mean = vec![0.0; n_bins];
    for p in &periodograms {
        for (acc, v) in mean.iter_mut().zip(p) {
            *acc += v;
        }
    }
    for v in mean.iter_mut() {
        *v /= n_segments as f64;
    }
    // Overlapping segments are correlated; the error of the mean uses the
    // effective segment count n / (1 + 2 sum (1 - k/n) rho_k) with rho_k the
    // squared window overlap correlation at lag k hops. Reduces to plain
    // stddev/sqrt(n) for non-overlapping windows.
    let mut inflation = 1.0;
    let mut k = 1;
    while k * hop < m {
        let corr: f64 = (0..m - k * hop).map(|t| window[t] * window[t + k * hop]).sum();
        let rho = (corr / win_power).powi(2);
        inflation += 2.0 * (1.0 - k as f64 / n_segments as f64) * rho;
        k += 1;
    }
    let n_eff = n_segments as f64 / inflation;
    let mut stderr = vec![0.0; n_bins];
    for p in &periodograms {
        for ((acc, v), mu) in stderr.iter_mut().zip(p).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    for v in stderr.iter_mut() {
        *v = (*v / (n_segments as f64 - 1.0) / n_eff).sqrt();
    }

    let freqs_hz = (0..n_bins).map(|k| k as f64 * sample_rate_hz / m as f64).collect();
    Ok(Spectrum {
        freqs_hz,
        psd: mean.clone(),
        raw_psd: mean,
        stderr,
        n_segments,
        plan: *plan,
        sample_rate_hz,
    })
}

/// Shot-noise-normalized spectrum of the joint photocurrent
/// (probe -/+ conjugate)/sqrt(2).
pub fn joint_noise_spectrum(
    pair: &PhotocurrentPair,
    branch: Branch,
    plan: &SegmentPlan,
    shot_reference: &Spectrum,
) -> Result<Spectrum> {
    if pair.probe.len() != pair.conjugate.len() {
        return Err(Error::MismatchedPlans("photocurrent lengths differ".into()));
    }
    if shot_reference.plan != *plan || shot_reference.sample_rate_hz != pair.sample_rate_hz {
        return Err(Error::MismatchedPlans(
            "shot reference was taken with a different plan or rate".into(),
        ));
    }
    let joint = pair.joint(matches!(branch, Branch::Difference));
    let mut spec = welch_psd(&joint, pair.sample_rate_hz, plan)?;
    for i in 0..spec.psd.len() {
        let shot = shot_reference.raw_psd[i];
        let num = spec.raw_psd[i];
        spec.psd[i] = num / shot;
        let rel_num = spec.stderr[i] / num.max(1e-300);
        let rel_shot = shot_reference.stderr[i] / shot.max(1e-300);
        spec.stderr[i] = spec.psd[i] * (rel_num * rel_num + rel_shot * rel_shot).sqrt();
    }
    Ok(spec)
}

/// Vacuum-equivalent calibration run: the joint difference spectrum of a
/// unit-gain source under the same plan. Reusable across scenarios with an
/// identical plan.
pub fn shot_reference(cfg: &TraceConfig, plan: &SegmentPlan) -> Result<Spectrum> {
    if (cfg.source.gain - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitGain(cfg.source.gain));
    }
    let traces = synthesize_source(cfg)?;
    let pair = homodyne(&traces, 0.0, 0.0, cfg);
    let joint = pair.joint(true);
    welch_psd(&joint, cfg.sample_rate_hz, plan)
}

/// Per-segment cosine/sine components of a signal on the drive-harmonic
/// bins f_j = j * f_drive.
#[derive(Debug, Clone, PartialEq)]
pub struct BinQuadratures {
    pub freqs_hz: Vec<f64>,
    /// cos components, indexed [segment][bin].
    pub cos: Vec<Vec<f64>>,
    /// sin components, indexed [segment][bin].
    pub sin: Vec<Vec<f64>>,
    pub segment_len: usize,
}

/// Extracts drive-locked bin quadratures: for each segment s of M samples
/// starting at drive phase zero,
/// c_j(s) = (2/M) sum_t x(t) cos(2 pi f_j t), s_j(s) = (2/M) sum_t x(t) sin(2 pi f_j t).
pub fn drive_locked_bins(
    signal: &[f64],
    sample_rate_hz: f64,
    plan: &SegmentPlan,
    n_bins: usize,
) -> Result<BinQuadratures> {
    if !plan.drive_locked {
        return Err(Error::InvalidPlan("bin extraction needs a drive-locked plan".into()));
    }
    plan.validate(sample_rate_hz)?;
    let m = plan.segment_len;
    if signal.len() < m {
        return Err(Error::SignalTooShort {
            signal_len: signal.len(),
            segment_len: m,
        });
    }
    // f_j must stay below Nyquist
    let max_bin = (sample_rate_hz / 2.0 / plan.f_drive_hz).floor() as usize;
    if n_bins == 0 || n_bins > max_bin {
        return Err(Error::InvalidPlan(format!(
            "n_bins {n_bins} outside 1..={max_bin} for this rate/drive"
        )));
    }

    // cos/sin projection tables over one segment
    let scale = 2.0 / m as f64;
    let tables: Vec<(Vec<f64>, Vec<f64>)> = (1..=n_bins)
        .map(|j| {
            let w = TAU * j as f64 * plan.f_drive_hz / sample_rate_hz;
            let cos: Vec<f64> = (0..m).map(|t| (w * t as f64).cos() * scale).collect();
            let sin: Vec<f64> = (0..m).map(|t| (w * t as f64).sin() * scale).collect();
            (cos, sin)
        })
        .collect();

    let n_segments = signal.len() / m;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n_segments)
        .into_par_iter()
        .map(|s| {
            let seg = &signal[s * m..(s + 1) * m];
            let mut c_row = Vec::with_capacity(n_bins);
            let mut s_row = Vec::with_capacity(n_bins);
            for (ct, st) in &tables {
                let mut c_acc = 0.0;
                let mut s_acc = 0.0;
                for t in 0..m {
                    c_acc += seg[t] * ct[t];
                    s_acc += seg[t] * st[t];
                }
                c_row.push(c_acc);
                s_row.push(s_acc);
            }
            (c_row, s_row)
        })
        .collect();

    let mut cos = Vec::with_capacity(n_segments);
    let mut sin = Vec::with_capacity(n_segments);
    for (c, s) in rows {
        cos.push(c);
        sin.push(s);
    }
    Ok(BinQuadratures {
        freqs_hz: (1..=n_bins).map(|j| j as f64 * plan.f_drive_hz).collect(),
        cos,
        sin,
        segment_len: m,
    })
}

/// Which components enter the cross-covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Cc,
    Cs,
    Sc,
    Ss,
}

impl Component {
    pub fn tag(self) -> &'static str {
        match self {
            Component::Cc => "cc",
            Component::Cs => "cs",
            Component::Sc => "sc",
            Component::Ss => "ss",
        }
    }
}

/// Estimated cross-covariance block between probe and conjugate bins, in
/// units where vacuum variances read 1 on the diagonal of a same-channel
/// cc/ss block.
#[derive(Debug, Clone, PartialEq)]
pub struct CovBlockEstimate {
    pub bin_freqs_hz: Vec<f64>,
    /// Rows: probe-channel bins; columns: conjugate-channel bins.
    pub matrix: nalgebra::DMatrix<f64>,
    pub stderr: nalgebra::DMatrix<f64>,
    pub component: Component,
    pub n_segments: usize,
}

impl CovBlockEstimate {
    pub fn to_csv(&self) -> String {
        let n = self.matrix.nrows();
        let mut s = String::new();
        for i in 0..n {
            let row: Vec<String> = (0..self.matrix.ncols())
                .map(|j| format!("{:.12e}", self.matrix[(i, j)]))
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn stderr_csv(&self) -> String {
        let n = self.stderr.nrows();
        let mut s = String::new();
        for i in 0..n {
            let row: Vec<String> = (0..self.stderr.ncols())
                .map(|j| format!("{:.12e}", self.stderr[(i, j)]))
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Sample cross-covariance over segments of the selected components,
/// normalized by M/2 so vacuum gives unit diagonal on same-channel cc/ss.
pub fn cross_covariance(
    bins_p: &BinQuadratures,
    bins_c: &BinQuadratures,
    component: Component,
) -> Result<CovBlockEstimate> {
    if bins_p.cos.len() != bins_c.cos.len() {
        return Err(Error::MisalignedSegments {
            left: bins_p.cos.len(),
            right: bins_c.cos.len(),
        });
    }
    if bins_p.segment_len != bins_c.segment_len {
        return Err(Error::MismatchedPlans("segment lengths differ".into()));
    }
    let n_seg = bins_p.cos.len();
    if n_seg < 2 {
        return Err(Error::MisalignedSegments { left: n_seg, right: n_seg });
    }
    let (left, right): (&Vec<Vec<f64>>, &Vec<Vec<f64>>) = match component {
        Component::Cc => (&bins_p.cos, &bins_c.cos),
        Component::Cs => (&bins_p.cos, &bins_c.sin),
        Component::Sc => (&bins_p.sin, &bins_c.cos),
        Component::Ss => (&bins_p.sin, &bins_c.sin),
    };
    let nb_p = left[0].len();
    let nb_c = right[0].len();
    let norm = bins_p.segment_len as f64 / 2.0;

    let mean_l: Vec<f64> = (0..nb_p)
        .map(|j| left.iter().map(|row| row[j]).sum::<f64>() / n_seg as f64)
        .collect();
    let mean_r: Vec<f64> = (0..nb_c)
        .map(|k| right.iter().map(|row| row[k]).sum::<f64>() / n_seg as f64)
        .collect();
    let var_l: Vec<f64> = (0..nb_p)
        .map(|j| {
            left.iter().map(|row| (row[j] - mean_l[j]).powi(2)).sum::<f64>() / (n_seg as f64 - 1.0)
        })
        .collect();
    let var_r: Vec<f64> = (0..nb_c)
        .map(|k| {
            right.iter().map(|row| (row[k] - mean_r[k]).powi(2)).sum::<f64>() / (n_seg as f64 - 1.0)
        })
        .collect();

    let mut matrix = nalgebra::DMatrix::zeros(nb_p, nb_c);
    let mut stderr = nalgebra::DMatrix::zeros(nb_p, nb_c);
    for j in 0..nb_p {
        for k in 0..nb_c {
            let mut cov = 0.0;
            for s in 0..n_seg {
                cov += (left[s][j] - mean_l[j]) * (right[s][k] - mean_r[k]);
            }
            cov /= n_seg as f64 - 1.0;
            matrix[(j, k)] = norm * cov;
            // Gaussian standard error of a covariance estimate
            let se = ((var_l[j] * var_r[k] + cov * cov) / (n_seg as f64 - 1.0)).sqrt();
            stderr[(j, k)] = norm * se;
        }
    }
    Ok(CovBlockEstimate {
        bin_freqs_hz: bins_p.freqs_hz.clone(),
        matrix,
        stderr,
        component,
        n_segments: n_seg,
    })
}

/// Convenience: per-bin z-scores between two spectra with independent errors.
pub fn spectrum_z_scores(a: &Spectrum, b: &Spectrum) -> Result<Vec<f64>> {
    if a.freqs_hz.len() != b.freqs_hz.len() {
        return Err(Error::MismatchedPlans("spectra have different bin counts".into()));
    }
    Ok(a.psd
        .iter()
        .zip(&b.psd)
        .zip(a.stderr.iter().zip(&b.stderr))
        .map(|((pa, pb), (sa, sb))| (pa - pb) / (sa * sa + sb * sb).sqrt())
        .collect())
}

/// Restricts a spectrum to bins whose frequency lies in [lo, hi].
pub fn band_select(spec: &Spectrum, lo_hz: f64, hi_hz: f64) -> Spectrum {
    let idx: Vec<usize> = spec
        .freqs_hz
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= lo_hz - 1e-6 && f <= hi_hz + 1e-6)
        .map(|(i, _)| i)
        .collect();
    Spectrum {
        freqs_hz: idx.iter().map(|&i| spec.freqs_hz[i]).collect(),
        psd: idx.iter().map(|&i| spec.psd[i]).collect(),
        raw_psd: idx.iter().map(|&i| spec.raw_psd[i]).collect(),
        stderr: idx.iter().map(|&i| spec.stderr[i]).collect(),
        n_segments: spec.n_segments,
        plan: spec.plan,
        sample_rate_hz: spec.sample_rate_hz,
    }
}
