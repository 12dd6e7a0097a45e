//! Cardiorespiratory variability analysis and imbalanced tree-ensemble
//! classification for extubation-readiness prediction.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`signals`]: load, validate and resample five-channel recordings
//!    (RCG, ABD, ECG, PPG, SAT) and slice them into IMV and ETT-CPAP epochs.
//! 2. [`metrics`], [`cardiac`], [`patterns`]: sample-by-sample variability
//!    metrics, R-peak detection with HRV statistics, and respiratory /
//!    cardiac pattern segmentation.
//! 3. [`features`]: reduce each patient to the 79-entry feature vector and
//!    impute missing values.
//! 4. [`forest`], [`eval`]: Random Forest, Balanced Random Forest and the
//!    clinical-rule + BRF classifier, evaluated with stratified k-fold
//!    cross-validation and ROC analysis.

pub mod cardiac;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod metrics;
pub mod patterns;
pub mod signals;
pub mod stats;

pub use error::{Error, Result};
pub use features::{FeatureMatrix, FeatureRegistry, ImputationTable};
pub use forest::{ForestKind, ForestModel, Hyperparameters};
pub use metrics::{MetricKind, MetricSeries, WindowConfig};
pub use signals::{ChannelKind, ClinicalRecord, Outcome, Recording};

/// Crate version, embedded into every written artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
