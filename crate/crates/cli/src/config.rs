//! Scenario configuration: one JSON document with all physics parameters
//! explicit. Defaults are materialized into the stored copy so a run is
//! reproducible from its config file alone.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use twinbeam_core::{
    Beam, EomSpec, GainProfile, ModeGrid, Placement, SegmentPlan, SourceSpec, TraceConfig,
    WindowKind,
};

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Fig2Sweep,
    Fig3aSingleEom,
    Fig3bRelativePhase,
    Fig4Covariance,
    AnalyticTable,
    ValidatePipelines,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Fig2Sweep,
        ScenarioKind::Fig3aSingleEom,
        ScenarioKind::Fig3bRelativePhase,
        ScenarioKind::Fig4Covariance,
        ScenarioKind::AnalyticTable,
        ScenarioKind::ValidatePipelines,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            ScenarioKind::Fig2Sweep => "fig2_sweep",
            ScenarioKind::Fig3aSingleEom => "fig3a_single_eom",
            ScenarioKind::Fig3bRelativePhase => "fig3b_relative_phase",
            ScenarioKind::Fig4Covariance => "fig4_covariance",
            ScenarioKind::AnalyticTable => "analytic_table",
            ScenarioKind::ValidatePipelines => "validate_pipelines",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }
}

/// Trace synthesis settings (the source itself lives in `source`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSettings {
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub gain_profile: GainProfile,
    pub delay_samples: usize,
    pub electronic_noise_variance: f64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1e8,
            n_samples: 1_000_000,
            seed: 1,
            gain_profile: GainProfile::Flat,
            delay_samples: 1,
            electronic_noise_variance: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_bins: usize,
    pub bin_spacing_hz: f64,
    pub start_freq_hz: f64,
    pub guard_bins: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_bins: 50,
            bin_spacing_hz: 2e5,
            start_freq_hz: 2e5,
            guard_bins: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub segment_len: usize,
    pub overlap: f64,
    pub window: WindowKind,
    pub drive_locked: bool,
    pub f_drive_hz: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        // 75% overlap staggers the period-commensurate Hann windows across
        // drive phases, cancelling second-harmonic leakage from modulated
        // signals while keeping bins on the 200 kHz grid.
        Self {
            segment_len: 500,
            overlap: 0.75,
            window: WindowKind::Hann,
            drive_locked: false,
            f_drive_hz: 2e5,
        }
    }
}

impl PlanConfig {
    pub fn drive_locked_default() -> Self {
        Self {
            segment_len: 500,
            overlap: 0.0,
            window: WindowKind::Rectangular,
            drive_locked: true,
            f_drive_hz: 2e5,
        }
    }

    pub fn to_plan(&self) -> SegmentPlan {
        SegmentPlan {
            segment_len: self.segment_len,
            overlap: self.overlap,
            window: self.window,
            drive_locked: self.drive_locked,
            f_drive_hz: self.f_drive_hz,
        }
    }
}

/// Sweep axes used by the individual scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Relative drive phases in degrees (fig3b, fig4, analytic table).
    pub phases_deg: Vec<f64>,
    /// Modulation indices in radians (fig3a, analytic table).
    pub modulation_indices: Vec<f64>,
    /// Summed LO phase grid in degrees (fig2).
    pub theta_grid_deg: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            phases_deg: vec![0.0, 120.0, 180.0],
            modulation_indices: vec![0.0, 0.1 * PI, 0.2 * PI],
            theta_grid_deg: vec![0.0, 30.0, 45.0, 60.0, 90.0, 120.0, 135.0, 150.0, 180.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub source: SourceSpec,
    pub eoms: Vec<EomSpec>,
    pub trace: TraceSettings,
    pub plan: PlanConfig,
    pub grid: GridConfig,
    pub sweep: SweepConfig,
    pub outputs: String,
    /// Optional pre-recorded trace file base (DSP-only runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_import: Option<String>,
    /// Free-form annotations carried through to outputs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    /// The default two in-beam modulators at m = 0.1 pi driven at 200 kHz.
    /// fig4-style scenarios lock the drive a quarter period ahead of the
    /// capture windows (phase -90 deg) so the X_p-P_c structure lands in the
    /// cosine components.
    fn default_eoms(kind: ScenarioKind) -> Vec<EomSpec> {
        let base_phase = match kind {
            ScenarioKind::Fig4Covariance | ScenarioKind::ValidatePipelines => -PI / 2.0,
            _ => 0.0,
        };
        let enabled = !matches!(kind, ScenarioKind::Fig2Sweep);
        vec![
            EomSpec {
                modulation_index: 0.1 * PI,
                drive_phase: base_phase,
                drive_freq_hz: 2e5,
                beam: Beam::Probe,
                placement: Placement::Beam,
                enabled,
            },
            EomSpec {
                modulation_index: 0.1 * PI,
                drive_phase: base_phase,
                drive_freq_hz: 2e5,
                beam: Beam::Conjugate,
                placement: Placement::Beam,
                enabled: enabled && !matches!(kind, ScenarioKind::Fig3aSingleEom),
            },
        ]
    }

    pub fn default_for(kind: ScenarioKind) -> Self {
        let plan = match kind {
            ScenarioKind::Fig4Covariance => PlanConfig::drive_locked_default(),
            _ => PlanConfig::default(),
        };
        Self {
            scenario: kind,
            source: SourceSpec { gain: 3f64.sqrt(), eta: 0.0 },
            eoms: Self::default_eoms(kind),
            trace: TraceSettings::default(),
            plan,
            grid: GridConfig::default(),
            sweep: SweepConfig::default(),
            outputs: format!("out/{}", kind.id()),
            trace_import: None,
            notes: vec![
                "gain defaults to sqrt(3): amplitude gain with G^2 = 3".into(),
                "eta = 0.15 in lossy presets is a placeholder detection loss, not a measured value"
                    .into(),
            ],
        }
    }

    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical serialization, truncated hex.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(compact.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..16].to_string()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.source
            .validate()
            .map_err(|e| field_err("source", e.to_string()))?;
        if self.eoms.len() > 4 {
            return Err(field_err("eoms", "at most one modulator per beam per placement"));
        }
        let mut seen = Vec::new();
        for (i, eom) in self.eoms.iter().enumerate() {
            eom.validate()
                .map_err(|e| field_err(&format!("eoms[{i}]"), e.to_string()))?;
            if eom.enabled {
                let key = (eom.beam, eom.placement);
                if seen.contains(&key) {
                    return Err(field_err(
                        &format!("eoms[{i}]"),
                        format!("duplicate enabled modulator for {key:?}"),
                    ));
                }
                seen.push(key);
            }
        }
        if self.trace.n_samples < 2 * self.plan.segment_len {
            return Err(field_err(
                "trace.n_samples",
                format!(
                    "need at least two segments of {} samples",
                    self.plan.segment_len
                ),
            ));
        }
        self.mode_grid().map_err(|e| field_err("grid", e.to_string()))?;
        self.plan
            .to_plan()
            .validate(self.trace.sample_rate_hz)
            .map_err(|e| field_err("plan", e.to_string()))?;
        for eom in self.eoms.iter().filter(|e| e.enabled) {
            let ratio = self.trace.sample_rate_hz / eom.drive_freq_hz;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return Err(field_err(
                    "trace.sample_rate_hz",
                    format!("not phase-locked to the {} Hz drive", eom.drive_freq_hz),
                ));
            }
        }
        if self.sweep.theta_grid_deg.is_empty()
            && matches!(self.scenario, ScenarioKind::Fig2Sweep)
        {
            return Err(field_err("sweep.theta_grid_deg", "fig2 sweep needs at least one point"));
        }
        Ok(())
    }

    pub fn mode_grid(&self) -> twinbeam_core::Result<ModeGrid> {
        ModeGrid::new(
            self.grid.n_bins,
            self.grid.bin_spacing_hz,
            self.grid.start_freq_hz,
            self.grid.guard_bins,
        )
    }

    /// Core trace config with the scenario source folded in.
    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            sample_rate_hz: self.trace.sample_rate_hz,
            n_samples: self.trace.n_samples,
            seed: self.trace.seed,
            source: self.source,
            gain_profile: self.trace.gain_profile,
            delay_samples: self.trace.delay_samples,
            electronic_noise_variance: self.trace.electronic_noise_variance,
        }
    }

    pub fn eom_for(&self, beam: Beam) -> EomSpec {
        self.eoms
            .iter()
            .copied()
            .find(|e| e.beam == beam && e.enabled)
            .unwrap_or_else(|| EomSpec::off(beam))
    }
}
