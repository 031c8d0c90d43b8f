//! Monte-Carlo synthesis of homodyne photocurrent traces.
//!
//! Homodyne outcomes of the Gaussian states simulated here are jointly
//! Gaussian, so traces are drawn directly from the Wigner distribution:
//! four correlated quadrature envelope channels (X_p, P_p, X_c, P_c) in
//! shot-noise units, white by default with the static cross-covariance of
//! the two-mode squeezed source. Everything downstream (modulation, loss,
//! homodyne projection) is a per-sample map, and all randomness is a pure
//! function of (config, seed) regardless of worker count: traces are
//! generated in fixed-size chunks, each seeded from (seed, domain, chunk).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::analytic::SourceSpec;
use crate::eom::{equivalent_beam_spec, EomSpec};
use crate::error::{Error, Result};
use crate::grid::Beam;

const TAU: f64 = std::f64::consts::TAU;
const CHUNK: usize = 1 << 14;

const DOMAIN_SOURCE: u64 = 1;
const DOMAIN_LOSS: u64 = 2;
const DOMAIN_ELECTRONIC: u64 = 3;
const DOMAIN_SPECTRAL: u64 = 4;

/// Gain spectral profile of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GainProfile {
    /// Frequency-independent gain: white correlated channels.
    Flat,
    /// Squeezing parameter rolled off as 1/(1 + (f/hw)^2), so the
    /// squeezing level in dB falls to half at `half_width_hz`.
    Lorentzian {
        #[serde(default = "default_half_width")]
        half_width_hz: f64,
    },
}

fn default_half_width() -> f64 {
    7.5e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub source: SourceSpec,
    pub gain_profile: GainProfile,
    /// Optical delay of the conjugate channel, in samples.
    pub delay_samples: usize,
    /// White electronic noise added to each photocurrent, shot-noise units.
    pub electronic_noise_variance: f64,
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        self.source
            .validate()
            .map_err(|e| Error::InvalidTraceConfig(e.to_string()))?;
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidTraceConfig(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidTraceConfig("need at least 2 samples".into()));
        }
        if self.electronic_noise_variance < 0.0 {
            return Err(Error::InvalidTraceConfig(
                "electronic noise variance must be >= 0".into(),
            ));
        }
        if let GainProfile::Lorentzian { half_width_hz } = self.gain_profile {
            if !(half_width_hz > 0.0) {
                return Err(Error::InvalidTraceConfig(
                    "lorentzian half width must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1e8,
            n_samples: 1_000_000,
            seed: 1,
            source: SourceSpec { gain: 3f64.sqrt(), eta: 0.0 },
            gain_profile: GainProfile::Flat,
            delay_samples: 1,
            electronic_noise_variance: 0.0,
        }
    }
}

/// The four sampled quadrature envelope channels plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureTraces {
    pub x_p: Vec<f64>,
    pub p_p: Vec<f64>,
    pub x_c: Vec<f64>,
    pub p_c: Vec<f64>,
    pub sample_rate_hz: f64,
    pub seed: u64,
    /// Log of transforms applied since synthesis.
    pub transforms: Vec<String>,
}

impl QuadratureTraces {
    pub fn len(&self) -> usize {
        self.x_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_p.is_empty()
    }
}

/// Post-homodyne real photocurrents for the two beams.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotocurrentPair {
    pub probe: Vec<f64>,
    pub conjugate: Vec<f64>,
    pub theta_p: f64,
    pub theta_c: f64,
    pub sample_rate_hz: f64,
}

impl PhotocurrentPair {
    /// (probe -/+ conjugate)/sqrt(2), the normalized joint signal.
    pub fn joint(&self, difference: bool) -> Vec<f64> {
        let s = if difference { -1.0 } else { 1.0 };
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        self.probe
            .iter()
            .zip(&self.conjugate)
            .map(|(p, c)| (p + s * c) * inv)
            .collect()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-(seed, domain, chunk) generator.
fn derive_rng(seed: u64, domain: u64, idx: u64) -> ChaCha8Rng {
    let a = splitmix(seed);
    let b = splitmix(a ^ domain.wrapping_mul(0xD6E8FEB86659FD93));
    let c = splitmix(b ^ idx.wrapping_mul(0xC2B2AE3D27D4EB4F));
    let d = splitmix(c ^ 0x165667B19E3779F9);
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&a.to_le_bytes());
    key[8..16].copy_from_slice(&b.to_le_bytes());
    key[16..24].copy_from_slice(&c.to_le_bytes());
    key[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Draws the correlated source channels.
pub fn synthesize_source(cfg: &TraceConfig) -> Result<QuadratureTraces> {
    cfg.validate()?;
    match cfg.gain_profile {
        GainProfile::Flat => synthesize_flat(cfg),
        GainProfile::Lorentzian { half_width_hz } => synthesize_lorentzian(cfg, half_width_hz),
    }
}

fn synthesize_flat(cfg: &TraceConfig) -> Result<QuadratureTraces> {
    let n = cfg.n_samples;
    let gain = cfg.source.gain;
    let g = cfg.source.g();
    let n_chunks = n.div_ceil(CHUNK);

    let chunks: Vec<[Vec<f64>; 4]> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = derive_rng(cfg.seed, DOMAIN_SOURCE, ci as u64);
            let len = CHUNK.min(n - ci * CHUNK);
            let mut x_p = Vec::with_capacity(len);
            let mut p_p = Vec::with_capacity(len);
            let mut x_c = Vec::with_capacity(len);
            let mut p_c = Vec::with_capacity(len);
            for _ in 0..len {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let c: f64 = StandardNormal.sample(&mut rng);
                let d: f64 = StandardNormal.sample(&mut rng);
                x_p.push(gain * a + g * b);
                x_c.push(gain * b + g * a);
                p_p.push(gain * c - g * d);
                p_c.push(gain * d - g * c);
            }
            [x_p, p_p, x_c, p_c]
        })
        .collect();

    let mut out = QuadratureTraces {
        x_p: Vec::with_capacity(n),
        p_p: Vec::with_capacity(n),
        x_c: Vec::with_capacity(n),
        p_c: Vec::with_capacity(n),
        sample_rate_hz: cfg.sample_rate_hz,
        seed: cfg.seed,
        transforms: vec![format!(
            "source(flat, G={:.6}, n={}, seed={})",
            gain, n, cfg.seed
        )],
    };
    for [x_p, p_p, x_c, p_c] in chunks {
        out.x_p.extend(x_p);
        out.p_p.extend(p_p);
        out.x_c.extend(x_c);
        out.p_c.extend(p_c);
    }
    Ok(out)
}

fn synthesize_lorentzian(cfg: &TraceConfig, half_width_hz: f64) -> Result<QuadratureTraces> {
    let n = cfg.n_samples;
    let r0 = cfg.source.gain.acosh();
    let fs = cfg.sample_rate_hz;
    let half = n / 2;

    // Frequency-domain draw with Hermitian symmetry; bin k gets the
    // Bogoliubov mix at the rolled-off squeezing parameter r(f_k).
    let mut spectra: [Vec<Complex<f64>>; 4] =
        std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); n]);
    let mut rng = derive_rng(cfg.seed, DOMAIN_SPECTRAL, 0);
    let draw = |rng: &mut ChaCha8Rng, scale: f64, real_bin: bool| -> Complex<f64> {
        if real_bin {
            let v: f64 = StandardNormal.sample(rng);
            Complex::new(v * scale, 0.0)
        } else {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(re, im) * (scale / 2f64.sqrt())
        }
    };
    for k in 0..=half {
        let f = k as f64 * fs / n as f64;
        let r = r0 / (1.0 + (f / half_width_hz).powi(2));
        let (gk, sk) = (r.cosh(), r.sinh());
        let real_bin = k == 0 || (n % 2 == 0 && k == half);
        let scale = (n as f64).sqrt();
        let a = draw(&mut rng, scale, real_bin);
        let b = draw(&mut rng, scale, real_bin);
        let c = draw(&mut rng, scale, real_bin);
        let d = draw(&mut rng, scale, real_bin);
        let vals = [gk * a + sk * b, gk * c - sk * d, gk * b + sk * a, gk * d - sk * c];
        for (ch, v) in vals.into_iter().enumerate() {
            spectra[ch][k] = v;
            if !real_bin {
                spectra[ch][n - k] = v.conj();
            }
        }
    }

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut channels: Vec<Vec<f64>> = Vec::with_capacity(4);
    for spec in spectra.iter_mut() {
        ifft.process(spec);
        channels.push(spec.iter().map(|z| z.re / n as f64).collect());
    }
    let p_c = channels.pop().unwrap();
    let x_c = channels.pop().unwrap();
    let p_p = channels.pop().unwrap();
    let x_p = channels.pop().unwrap();

    Ok(QuadratureTraces {
        x_p,
        p_p,
        x_c,
        p_c,
        sample_rate_hz: fs,
        seed: cfg.seed,
        transforms: vec![format!(
            "source(lorentzian hw={half_width_hz:.3e}, G={:.6}, n={}, seed={})",
            cfg.source.gain, n, cfg.seed
        )],
    })
}

/// Checks that the sampling clock is phase-locked to an enabled drive and
/// returns the drive period in samples.
fn drive_period_samples(sample_rate_hz: f64, spec: &EomSpec) -> Result<usize> {
    let ratio = sample_rate_hz / spec.drive_freq_hz;
    let p = ratio.round();
    if p < 1.0 || (ratio - p).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::IncommensurateSampleRate {
            sample_rate: sample_rate_hz,
            f_drive: spec.drive_freq_hz,
        });
    }
    Ok(p as usize)
}

/// Applies the instantaneous modulator rotation to each beam:
/// X -> X cos(theta(t)) + P sin(theta(t)), P -> -X sin(theta(t)) + P cos(theta(t)),
/// with theta(t) the (placement-resolved) drive trajectory of that beam.
pub fn apply_eom(
    traces: &QuadratureTraces,
    spec_p: &EomSpec,
    spec_c: &EomSpec,
) -> Result<QuadratureTraces> {
    if spec_p.enabled && spec_p.beam != Beam::Probe {
        return Err(Error::InvalidEomSpec("first spec must target the probe beam".into()));
    }
    if spec_c.enabled && spec_c.beam != Beam::Conjugate {
        return Err(Error::InvalidEomSpec(
            "second spec must target the conjugate beam".into(),
        ));
    }
    let mut out = traces.clone();
    for (spec, xs, ps) in [
        (spec_p, &mut out.x_p, &mut out.p_p),
        (spec_c, &mut out.x_c, &mut out.p_c),
    ] {
        if !spec.enabled || spec.modulation_index == 0.0 {
            continue;
        }
        spec.validate()?;
        let period = drive_period_samples(traces.sample_rate_hz, spec)?;
        let eff = equivalent_beam_spec(spec);
        let table: Vec<(f64, f64)> = (0..period)
            .map(|t| {
                let theta = eff.modulation_index
                    * (TAU * t as f64 / period as f64 + eff.drive_phase).sin();
                theta.sin_cos()
            })
            .collect();
        for t in 0..xs.len() {
            let (s, c) = table[t % period];
            let x = xs[t];
            let p = ps[t];
            xs[t] = x * c + p * s;
            ps[t] = -x * s + p * c;
        }
    }
    out.transforms.push(format!(
        "eom(probe: m={:.6} phi={:.6} {:?} on={}, conj: m={:.6} phi={:.6} {:?} on={})",
        spec_p.modulation_index,
        spec_p.drive_phase,
        spec_p.placement,
        spec_p.enabled,
        spec_c.modulation_index,
        spec_c.drive_phase,
        spec_c.placement,
        spec_c.enabled
    ));
    Ok(out)
}

/// Beamsplitter loss on every channel: sqrt(1-eta) x + sqrt(eta) vacuum.
pub fn apply_loss_traces(
    traces: &QuadratureTraces,
    eta: f64,
    noise_seed: u64,
) -> Result<QuadratureTraces> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidLoss(eta));
    }
    let mut out = traces.clone();
    if eta > 0.0 {
        let t = (1.0 - eta).sqrt();
        let s = eta.sqrt();
        let n = traces.len();
        for (ch, data) in [&mut out.x_p, &mut out.p_p, &mut out.x_c, &mut out.p_c]
            .into_iter()
            .enumerate()
        {
            let n_chunks = n.div_ceil(CHUNK);
            let noise: Vec<Vec<f64>> = (0..n_chunks)
                .into_par_iter()
                .map(|ci| {
                    let mut rng =
                        derive_rng(noise_seed, DOMAIN_LOSS ^ ((ch as u64) << 32), ci as u64);
                    let len = CHUNK.min(n - ci * CHUNK);
                    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
                })
                .collect();
            let mut idx = 0;
            for chunk in noise {
                for v in chunk {
                    data[idx] = t * data[idx] + s * v;
                    idx += 1;
                }
            }
        }
    }
    out.transforms.push(format!("loss(eta={eta:.6}, seed={noise_seed})"));
    Ok(out)
}

/// Homodyne projection at lock phases (theta_p, theta_c) with exact delay
/// compensation (net zero shift).
pub fn homodyne(
    traces: &QuadratureTraces,
    theta_p: f64,
    theta_c: f64,
    cfg: &TraceConfig,
) -> PhotocurrentPair {
    homodyne_with_compensation(traces, theta_p, theta_c, cfg, cfg.delay_samples)
}

/// Homodyne projection with an explicit electronic compensation; a
/// compensation different from the configured optical delay leaves a net
/// shift on the conjugate channel (misalignment scenarios).
pub fn homodyne_with_compensation(
    traces: &QuadratureTraces,
    theta_p: f64,
    theta_c: f64,
    cfg: &TraceConfig,
    compensation_samples: usize,
) -> PhotocurrentPair {
    let n = traces.len();
    let (sp, cp) = theta_p.sin_cos();
    let (sc, cc) = theta_c.sin_cos();
    let mut probe: Vec<f64> = traces
        .x_p
        .iter()
        .zip(&traces.p_p)
        .map(|(x, p)| x * cp + p * sp)
        .collect();
    let mut conjugate: Vec<f64> = traces
        .x_c
        .iter()
        .zip(&traces.p_c)
        .map(|(x, p)| x * cc + p * sc)
        .collect();

    if cfg.electronic_noise_variance > 0.0 {
        let sigma = cfg.electronic_noise_variance.sqrt();
        for (ch, data) in [&mut probe, &mut conjugate].into_iter().enumerate() {
            let mut rng = derive_rng(cfg.seed, DOMAIN_ELECTRONIC ^ ((ch as u64) << 32), 0);
            for v in data.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v += sigma * e;
            }
        }
    }

    // Optical delay then electronic re-alignment, both circular.
    let net = (cfg.delay_samples as i64 - compensation_samples as i64).rem_euclid(n as i64);
    if net != 0 {
        conjugate.rotate_right(net as usize);
    }

    PhotocurrentPair {
        probe,
        conjugate,
        theta_p,
        theta_c,
        sample_rate_hz: traces.sample_rate_hz,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceSidecar {
    sample_rate_hz: f64,
    seed: u64,
    n_samples: usize,
    channel_order: Vec<String>,
    transforms: Vec<String>,
}

/// Writes `<base>.f64` (little-endian f64, channel-interleaved per sample)
/// and `<base>.json` (sidecar metadata).
pub fn export_traces(traces: &QuadratureTraces, base: &Path) -> Result<()> {
    let n = traces.len();
    let mut buf = Vec::with_capacity(n * 4 * 8);
    for t in 0..n {
        for v in [traces.x_p[t], traces.p_p[t], traces.x_c[t], traces.p_c[t]] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let bin = base.with_extension("f64");
    let mut f = std::fs::File::create(&bin).map_err(|e| Error::TraceIo(e.to_string()))?;
    f.write_all(&buf).map_err(|e| Error::TraceIo(e.to_string()))?;

    let sidecar = TraceSidecar {
        sample_rate_hz: traces.sample_rate_hz,
        seed: traces.seed,
        n_samples: n,
        channel_order: ["Xp", "Pp", "Xc", "Pc"].map(String::from).to_vec(),
        transforms: traces.transforms.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::TraceIo(e.to_string()))?;
    std::fs::write(base.with_extension("json"), json).map_err(|e| Error::TraceIo(e.to_string()))?;
    Ok(())
}

/// Reads traces written by [`export_traces`].
pub fn import_traces(base: &Path) -> Result<QuadratureTraces> {
    let json = std::fs::read_to_string(base.with_extension("json"))
        .map_err(|e| Error::TraceIo(format!("sidecar: {e}")))?;
    let sidecar: TraceSidecar =
        serde_json::from_str(&json).map_err(|e| Error::TraceIo(format!("sidecar: {e}")))?;
    if sidecar.channel_order != ["Xp", "Pp", "Xc", "Pc"] {
        return Err(Error::TraceIo(format!(
            "unsupported channel order {:?}",
            sidecar.channel_order
        )));
    }
    let mut f = std::fs::File::open(base.with_extension("f64"))
        .map_err(|e| Error::TraceIo(e.to_string()))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).map_err(|e| Error::TraceIo(e.to_string()))?;
    let expect = sidecar.n_samples * 4 * 8;
    if buf.len() != expect {
        return Err(Error::TraceIo(format!(
            "trace file holds {} bytes, sidecar promises {}",
            buf.len(),
            expect
        )));
    }
    let mut traces = QuadratureTraces {
        x_p: Vec::with_capacity(sidecar.n_samples),
        p_p: Vec::with_capacity(sidecar.n_samples),
        x_c: Vec::with_capacity(sidecar.n_samples),
        p_c: Vec::with_capacity(sidecar.n_samples),
        sample_rate_hz: sidecar.sample_rate_hz,
        seed: sidecar.seed,
        transforms: sidecar.transforms,
    };
    for chunk in buf.chunks_exact(32) {
        let read = |i: usize| f64::from_le_bytes(chunk[i * 8..(i + 1) * 8].try_into().unwrap());
        traces.x_p.push(read(0));
        traces.p_p.push(read(1));
        traces.x_c.push(read(2));
        traces.p_c.push(read(3));
    }
    Ok(traces)
}
