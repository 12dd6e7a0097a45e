use std::path::PathBuf;

use crate::signals::ChannelKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed input: {0}")]
    Parse(String),

    // signals
    #[error("recording is missing the {0} channel")]
    MissingChannel(ChannelKind),
    #[error("time column is not uniformly sampled: {0}")]
    NonUniformRate(String),
    #[error("epoch span out of range: {0}")]
    EpochOutOfRange(String),
    #[error("ETT-CPAP span lasts {0:.1} s, at least 120 s required")]
    ShortEttCpap(f64),
    #[error("non-finite sample in {channel} at index {index}")]
    NonFiniteSample { channel: ChannelKind, index: usize },
    #[error("upsampling requested: {source_hz} Hz -> {target_hz} Hz")]
    UpsamplingRequested { source_hz: f64, target_hz: f64 },
    #[error("invalid rate: {0}")]
    InvalidRate(String),

    // metrics, cardiac, patterns
    #[error("signal too short: {have} samples, need {need}")]
    TooShort { have: usize, need: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no R-peaks found (detected {0})")]
    NoPeaksFound(usize),
    #[error("too few R-peaks: {have}, need {need}")]
    TooFewPeaks { have: usize, need: usize },
    #[error("empty input")]
    EmptyInput,

    // features
    #[error("insufficient valid samples: {valid} of {total}")]
    InsufficientValidSamples { valid: usize, total: usize },
    #[error("unknown patient: {0}")]
    UnknownPatient(String),
    #[error("duplicate patient: {0}")]
    DuplicatePatient(String),
    #[error("feature {0} has no observed value in the fit rows")]
    AllMissingFeature(String),
    #[error("feature table header does not match the registry: {0}")]
    SchemaMismatch(String),
    #[error("missing value for {feature} in row {row}; impute first")]
    MissingValue { row: usize, feature: String },
    #[error("outcome of patient {0} is unknown")]
    UnknownOutcome(String),

    // forest
    #[error("only one outcome class present")]
    SingleClass,
    #[error("no rows remain after applying the clinical rule")]
    EmptyAfterRule,
    #[error("feature registry mismatch: {0}")]
    RegistryMismatch(String),
    #[error("CD-BRF prediction requires birth weight and gestational age")]
    MissingClinicalForCdbrf,
    #[error("model format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    // eval
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
