use thiserror::Error;

/// Errors produced by the core simulation primitives.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode grid: {0}")]
    InvalidGrid(String),

    #[error("amplitude gain must satisfy G >= 1, got {0}")]
    InvalidGain(f64),

    #[error("loss fraction must lie in [0, 1], got {0}")]
    InvalidLoss(f64),

    #[error("matrix dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coefficient vector is zero (or has wrong length {got}, expected {expected})")]
    BadCoefficients { expected: usize, got: usize },

    #[error("block selector out of range: bins {lo}..{hi} exceed {n_bins} physical bins")]
    SelectorOutOfRange { lo: usize, hi: usize, n_bins: usize },

    #[error("EOM drive at {f_drive} Hz is not an integer multiple of bin spacing {bin_spacing} Hz")]
    IncommensurateDrive { f_drive: f64, bin_spacing: f64 },

    #[error("insufficient guard bins: need {needed}, grid has {got}")]
    InsufficientGuardBins { needed: usize, got: usize },

    #[error("invalid modulator spec: {0}")]
    InvalidEomSpec(String),

    #[error("sample rate {sample_rate} Hz is not an integer multiple of the EOM drive {f_drive} Hz")]
    IncommensurateSampleRate { sample_rate: f64, f_drive: f64 },

    #[error("invalid trace config: {0}")]
    InvalidTraceConfig(String),

    #[error("invalid segment plan: {0}")]
    InvalidPlan(String),

    #[error("signal of {signal_len} samples is shorter than one segment of {segment_len}")]
    SignalTooShort { signal_len: usize, segment_len: usize },

    #[error("mismatched spectra/plans: {0}")]
    MismatchedPlans(String),

    #[error("segment tables are misaligned: {left} vs {right} segments")]
    MisalignedSegments { left: usize, right: usize },

    #[error("shot reference requires unit gain, got G = {0}")]
    NonUnitGain(f64),

    #[error("ratio must be positive, got {0}")]
    NonPositiveRatio(f64),

    #[error("trace I/O: {0}")]
    TraceIo(String),
}

pub type Result<T> = std::result::Result<T, Error>;
