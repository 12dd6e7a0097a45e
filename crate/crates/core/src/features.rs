//! The 79-feature vector: registry, per-patient extraction, class-wise
//! median imputation and the feature CSV format.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cardiac::{detect_r_peaks, heart_rate_track, hrv_features, HeartRateTrack, HrvFeatures, RPeakTrain};
use crate::error::{Error, Result};
use crate::metrics::{compute_all, CardiacSource, MetricKind, MetricSet, MetricSeries, WindowConfig};
use crate::patterns::{
    detect_bradycardia, detect_desaturation, pattern_stats, ppg_artifact_mask, segment_respiration, EventTrack,
    Pattern, PatternStats, PatternThresholds, RespiratoryLabel,
};
use crate::signals::{
    resample, AnalysisEpoch, ChannelKind, ClinicalRecord, Epoch, Outcome, Recording, ANALYSIS_RATE_HZ, ECG_RATE_HZ,
};
use crate::stats;

pub const N_FEATURES: usize = 79;

const METRIC_STATS: [&str; 4] = ["median", "iqr", "power_median", "power_iqr"];
const SAT_FEATURES: [&str; 4] = ["sat_kurtosis", "sat_skewness", "sat_power_median", "sat_power_iqr"];
const HRV_FEATURES: [&str; 3] = ["hrv_sdnn_ms", "hrv_sdsd_ms", "hrv_triangular_index"];
const PATTERN_STATS: [&str; 5] = ["n", "t_tot", "t_max", "d", "f"];
pub const BW_FEATURE: &str = "bw_g";
pub const GA_FEATURE: &str = "ga_weeks";

/// Ordered, unique feature names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureRegistry {
    names: Vec<String>,
}

impl FeatureRegistry {
    pub fn canonical() -> Self {
        let mut names = Vec::with_capacity(N_FEATURES);
        for m in MetricKind::ALL {
            for s in METRIC_STATS {
                names.push(format!("{m}_{s}"));
            }
        }
        names.extend(SAT_FEATURES.iter().map(|s| s.to_string()));
        names.extend(HRV_FEATURES.iter().map(|s| s.to_string()));
        for p in Pattern::ALL {
            for s in PATTERN_STATS {
                names.push(format!("{}_{s}", p.name()));
            }
        }
        names.push(BW_FEATURE.into());
        names.push(GA_FEATURE.into());
        debug_assert_eq!(names.len(), N_FEATURES);
        FeatureRegistry { names }
    }

    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::SchemaMismatch("duplicate feature names".into()));
        }
        Ok(FeatureRegistry { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Hex SHA-256 of the newline-joined names.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.names.join("\n").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Default for FeatureRegistry {
    fn default() -> Self {
        Self::canonical()
    }
}

/// Settings for turning one recording into a feature row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub windows: WindowConfig,
    pub thresholds: PatternThresholds,
    pub rho_source: CardiacSource,
    /// Pattern statistics over the whole ETT-CPAP period instead of
    /// minutes 2-5.
    pub patterns_full_ettcpap: bool,
    pub min_valid_fraction: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            windows: WindowConfig::default(),
            thresholds: PatternThresholds::default(),
            rho_source: CardiacSource::Ecg,
            patterns_full_ettcpap: false,
            min_valid_fraction: 0.5,
        }
    }
}

/// Median, IQR, median of moving power and IQR of moving power of the
/// valid samples. Moving power at `t` is the mean of squared mean-removed
/// valid values over the trailing `power_s` seconds, clipped at the start.
pub fn scalarize(values: &[f64], valid: &[bool], rate_hz: f64, power_s: f64, min_valid_fraction: f64) -> Result<[f64; 4]> {
    let total = values.len();
    let n_valid = valid.iter().filter(|v| **v).count();
    if total == 0 || n_valid == 0 || (n_valid as f64) < min_valid_fraction * total as f64 {
        return Err(Error::InsufficientValidSamples { valid: n_valid, total });
    }
    let observed = || values.iter().zip(valid).filter(|(_, ok)| **ok).map(|(v, _)| *v);
    let (median, iqr) = stats::median_iqr(observed()).expect("nonempty");
    let mean = observed().sum::<f64>() / n_valid as f64;

    let w = ((power_s * rate_hz).round() as usize).max(1);
    let mut sq = vec![0.0; total + 1];
    let mut cnt = vec![0usize; total + 1];
    for t in 0..total {
        let (d, c) = if valid[t] { ((values[t] - mean).powi(2), 1) } else { (0.0, 0) };
        sq[t + 1] = sq[t] + d;
        cnt[t + 1] = cnt[t] + c;
    }
    let power = (0..total).filter(|t| valid[*t]).map(|t| {
        let lo = (t + 1).saturating_sub(w);
        (sq[t + 1] - sq[lo]) / (cnt[t + 1] - cnt[lo]) as f64
    });
    let (p_median, p_iqr) = stats::median_iqr(power).expect("nonempty");
    Ok([median, iqr, p_median, p_iqr])
}

/// The four summary features of a metric track over its whole length.
pub fn scalarize_metric(series: &MetricSeries, power_s: f64) -> Result<[f64; 4]> {
    scalarize(&series.values, &series.valid, series.rate_hz, power_s, 0.5)
}

/// Kurtosis, skewness, median power and IQR of power of a saturation trace.
pub fn sat_features(sat: &[f64], rate_hz: f64, power_s: f64) -> Result<[f64; 4]> {
    let finite: Vec<bool> = sat.iter().map(|v| v.is_finite()).collect();
    let [_, _, p_median, p_iqr] = scalarize(sat, &finite, rate_hz, power_s, 0.5)?;
    let observed: Vec<f64> = sat.iter().copied().filter(|v| v.is_finite()).collect();
    let (skew, kurt) = stats::skew_kurtosis(&observed);
    Ok([kurt, skew, p_median, p_iqr])
}

/// Everything computed for one patient, kept for debugging dumps.
#[derive(Debug, Clone)]
pub struct PatientAnalysis {
    pub patient_id: String,
    /// Absolute time of the first analysed sample.
    pub start_s: f64,
    pub metrics: MetricSet,
    pub peaks: Option<RPeakTrain>,
    pub hrv: Option<HrvFeatures>,
    pub heart_rate: Option<HeartRateTrack>,
    pub labels: Vec<RespiratoryLabel>,
    pub bdy: EventTrack,
    pub dst: EventTrack,
    /// First sample index covered by `pattern_stats`.
    pub pattern_offset: usize,
    pub pattern_stats: PatternStats,
    pub features: Vec<Option<f64>>,
}

impl PatientAnalysis {
    pub fn missing_count(&self) -> usize {
        self.features.iter().filter(|v| v.is_none()).count()
    }
}

const MINUTE_S: f64 = 60.0;

/// Runs the full pipeline on an ETT-CPAP epoch already on the analysis
/// timebase.
pub fn analyze_epoch(
    patient_id: &str,
    epoch: &AnalysisEpoch,
    clinical: &ClinicalRecord,
    cfg: &ExtractConfig,
) -> Result<PatientAnalysis> {
    let fs = ANALYSIS_RATE_HZ;
    let n = epoch.rcg.len();
    let minute = (MINUTE_S * fs).round() as usize;
    if n < 2 * minute {
        return Err(Error::TooShort { have: n, need: 2 * minute });
    }
    let win = &cfg.windows;
    let metrics = compute_all(epoch, win, cfg.rho_source)?;
    let mut features: Vec<Option<f64>> = Vec::with_capacity(N_FEATURES);

    let min2 = minute..2 * minute;
    for series in metrics.iter() {
        let s = series.slice(min2.start, min2.end);
        match scalarize(&s.values, &s.valid, s.rate_hz, win.power_s, cfg.min_valid_fraction) {
            Ok(v) => features.extend(v.map(Some)),
            Err(Error::InsufficientValidSamples { .. }) => features.extend([None; 4]),
            Err(e) => return Err(e),
        }
    }

    match sat_features(&epoch.sat[min2.clone()], fs, win.power_s) {
        Ok(v) => features.extend(v.map(Some)),
        Err(Error::InsufficientValidSamples { .. }) => features.extend([None; 4]),
        Err(e) => return Err(e),
    }

    let peaks = match detect_r_peaks(&epoch.ecg, ECG_RATE_HZ) {
        Ok(p) => Some(p),
        Err(Error::NoPeaksFound(_) | Error::TooShort { .. }) => None,
        Err(e) => return Err(e),
    };
    let hrv = peaks.as_ref().and_then(|p| hrv_features(p).ok());
    match hrv {
        Some(h) => features.extend([Some(h.sdnn_ms), Some(h.sdsd_ms), Some(h.triangular_index)]),
        None => features.extend([None; 3]),
    }
    let heart_rate = peaks
        .as_ref()
        .and_then(|p| heart_rate_track(p, fs, n as f64 / fs).ok())
        .map(|mut hr| {
            hr.bpm.resize(n, *hr.bpm.last().unwrap_or(&0.0));
            hr
        });

    let thr = &cfg.thresholds;
    let labels = segment_respiration(
        metrics.get(MetricKind::RpRc),
        metrics.get(MetricKind::RpAb),
        metrics.get(MetricKind::BmpRc),
        metrics.get(MetricKind::BmpAb),
        metrics.get(MetricKind::Phi),
        thr,
    )?;
    let movement: Vec<bool> = labels.iter().map(|l| *l == RespiratoryLabel::Mvt).collect();
    let bdy = match &heart_rate {
        Some(hr) => detect_bradycardia(&hr.bpm, &movement, thr)?,
        None => EventTrack {
            kind: Pattern::Bdy,
            active: vec![false; n],
        },
    };
    let ppg_artifact = ppg_artifact_mask(&epoch.ppg, fs, win, thr)?;
    let dst = detect_desaturation(&epoch.sat, &ppg_artifact, thr)?;

    let pattern_offset = if cfg.patterns_full_ettcpap { 0 } else { minute };
    let tail = |e: &EventTrack| EventTrack {
        kind: e.kind,
        active: e.active[pattern_offset..].to_vec(),
    };
    let analysed = &labels[pattern_offset..];
    let t_total = analysed.len() as f64 / fs;
    let pstats = pattern_stats(analysed, &[tail(&bdy), tail(&dst)], fs, t_total)?;
    for p in Pattern::ALL {
        let r = pstats.get(p);
        features.extend([Some(r.n as f64), Some(r.t_tot), Some(r.t_max), Some(r.d), Some(r.f)]);
    }
    features.push(Some(clinical.bw_g));
    features.push(Some(clinical.ga_weeks));
    debug_assert_eq!(features.len(), N_FEATURES);
    let features = features
        .into_iter()
        .map(|v| v.filter(|x| x.is_finite()))
        .collect();

    Ok(PatientAnalysis {
        patient_id: patient_id.to_string(),
        start_s: epoch.span.start_s,
        metrics,
        peaks,
        hrv,
        heart_rate,
        labels,
        bdy,
        dst,
        pattern_offset,
        pattern_stats: pstats,
        features,
    })
}

/// Slices the ETT-CPAP epoch of a recording and analyses it.
pub fn extract_patient(rec: &Recording, clinical: &ClinicalRecord, cfg: &ExtractConfig) -> Result<PatientAnalysis> {
    if rec.patient_id() != clinical.patient_id {
        return Err(Error::UnknownPatient(rec.patient_id().to_string()));
    }
    let epoch = rec.slice_epoch(Epoch::EttCpap)?.to_analysis()?;
    analyze_epoch(rec.patient_id(), &epoch, clinical, cfg)
}

/// HRV over the IMV epoch instead of ETT-CPAP. Not part of the canonical
/// registry; exposed for comparing the two periods.
pub fn imv_hrv(rec: &Recording) -> Result<HrvFeatures> {
    let view = rec.slice_epoch(Epoch::Imv)?;
    let ecg = resample(view.samples(ChannelKind::Ecg), view.rate_hz(ChannelKind::Ecg), ECG_RATE_HZ)?;
    hrv_features(&detect_r_peaks(&ecg, ECG_RATE_HZ)?)
}

/// Pairs recordings with clinical records by patient id.
pub fn match_clinical<'a>(
    recordings: &[Recording],
    clinical: &'a [ClinicalRecord],
) -> Result<Vec<&'a ClinicalRecord>> {
    let mut by_id: BTreeMap<&str, &ClinicalRecord> = BTreeMap::new();
    for c in clinical {
        if by_id.insert(c.patient_id.as_str(), c).is_some() {
            return Err(Error::DuplicatePatient(c.patient_id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    recordings
        .iter()
        .map(|r| {
            if !seen.insert(r.patient_id()) {
                return Err(Error::DuplicatePatient(r.patient_id().to_string()));
            }
            by_id
                .get(r.patient_id())
                .copied()
                .ok_or_else(|| Error::UnknownPatient(r.patient_id().to_string()))
        })
        .collect()
}

/// Feature matrix for a cohort, one row per recording in input order.
pub fn assemble(recordings: &[Recording], clinical: &[ClinicalRecord], cfg: &ExtractConfig) -> Result<FeatureMatrix> {
    let matched = match_clinical(recordings, clinical)?;
    let rows: Vec<Result<PatientAnalysis>> = recordings
        .par_iter()
        .zip(matched.par_iter())
        .map(|(r, c)| extract_patient(r, c, cfg))
        .collect();
    let mut m = FeatureMatrix::new(FeatureRegistry::canonical());
    for (row, c) in rows.into_iter().zip(&matched) {
        let a = row?;
        m.push_row(a.patient_id, c.outcome, a.features)?;
    }
    Ok(m)
}

/// Patients x features with missing cells as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub registry: FeatureRegistry,
    pub patient_ids: Vec<String>,
    pub outcomes: Vec<Outcome>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl FeatureMatrix {
    pub fn new(registry: FeatureRegistry) -> Self {
        FeatureMatrix {
            registry,
            patient_ids: Vec::new(),
            outcomes: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push_row(&mut self, patient_id: impl Into<String>, outcome: Outcome, row: Vec<Option<f64>>) -> Result<()> {
        let id = patient_id.into();
        if row.len() != self.registry.len() {
            return Err(Error::SchemaMismatch(format!(
                "row for {id} has {} values, registry has {}",
                row.len(),
                self.registry.len()
            )));
        }
        if self.patient_ids.contains(&id) {
            return Err(Error::DuplicatePatient(id));
        }
        self.patient_ids.push(id);
        self.outcomes.push(outcome);
        self.values.push(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_features(&self) -> usize {
        self.registry.len()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_none()).count()
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            registry: self.registry.clone(),
            patient_ids: rows.iter().map(|&i| self.patient_ids[i].clone()).collect(),
            outcomes: rows.iter().map(|&i| self.outcomes[i]).collect(),
            values: rows.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }

    /// Rows as plain numbers; fails on the first missing cell.
    pub fn dense_rows(&self) -> Result<Vec<Vec<f64>>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        v.ok_or_else(|| Error::MissingValue {
                            row: i,
                            feature: self.registry.names()[j].clone(),
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Birth weight and gestational age of a row, if both are present.
    pub fn clinical(&self, row: usize) -> Option<(f64, f64)> {
        let bw = self.registry.index_of(BW_FEATURE)?;
        let ga = self.registry.index_of(GA_FEATURE)?;
        Some((self.values[row][bw]?, self.values[row][ga]?))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    /// Floats are written in shortest round-trip form; missing cells are
    /// empty.
    pub fn write_csv_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["patient_id".to_string(), "outcome".to_string()];
        header.extend(self.registry.names().iter().cloned());
        w.write_record(&header)?;
        for ((id, outcome), row) in self.patient_ids.iter().zip(&self.outcomes).zip(&self.values) {
            let mut rec = vec![id.clone(), outcome.as_str().to_string()];
            rec.extend(row.iter().map(|v| v.map(|x| format!("{x:?}")).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }

    /// Reads a feature CSV whose header must match the canonical registry.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(file, &FeatureRegistry::canonical())
    }

    /// Reads a feature CSV with whatever feature columns its header names.
    pub fn read_csv_any(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        let path = path.as_ref();
        let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_slice());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 || header[0] != "patient_id" || header[1] != "outcome" {
            return Err(Error::SchemaMismatch("header must start with patient_id,outcome".into()));
        }
        let registry = FeatureRegistry::from_names(header[2..].to_vec())?;
        Self::read_csv_from(text.as_slice(), &registry)
    }

    pub fn read_csv_from(input: impl Read, registry: &FeatureRegistry) -> Result<FeatureMatrix> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut expected = vec!["patient_id".to_string(), "outcome".to_string()];
        expected.extend(registry.names().iter().cloned());
        if header != expected {
            let first_diff = header
                .iter()
                .zip(&expected)
                .position(|(a, b)| a != b)
                .unwrap_or(header.len().min(expected.len()));
            return Err(Error::SchemaMismatch(format!(
                "{} columns, expected {}; first difference at column {}",
                header.len(),
                expected.len(),
                first_diff + 1
            )));
        }
        let mut m = FeatureMatrix::new(registry.clone());
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let outcome: Outcome = rec[1].parse()?;
            let row = rec
                .iter()
                .skip(2)
                .map(|cell| {
                    if cell.is_empty() {
                        return Ok(None);
                    }
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| Error::Parse(format!("row {}: bad number {cell:?}", line + 2)))?;
                    if v.is_finite() {
                        Ok(Some(v))
                    } else {
                        Err(Error::Parse(format!("row {}: non-finite value {cell}", line + 2)))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            m.push_row(&rec[0], outcome, row)?;
        }
        Ok(m)
    }
}

/// Per-feature medians fitted on a set of rows, by outcome class and
/// overall.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImputationTable {
    pub registry_hash: String,
    pub success: Vec<f64>,
    pub failure: Vec<f64>,
    pub overall: Vec<f64>,
    /// Rows the medians were computed from; kept for leakage audits only.
    #[serde(skip)]
    pub fit_rows: Vec<usize>,
}

impl PartialEq for ImputationTable {
    /// Compares the fitted medians only, not the audit trail.
    fn eq(&self, other: &Self) -> bool {
        self.registry_hash == other.registry_hash
            && self.success == other.success
            && self.failure == other.failure
            && self.overall == other.overall
    }
}

impl ImputationTable {
    /// Fits on `fit_rows` of `matrix`. A class with no observation of a
    /// feature falls back to the overall median.
    pub fn fit(matrix: &FeatureMatrix, fit_rows: &[usize]) -> Result<Self> {
        let p = matrix.n_features();
        let (mut success, mut failure, mut overall) = (Vec::with_capacity(p), Vec::with_capacity(p), Vec::with_capacity(p));
        for j in 0..p {
            let observed = |class: Option<Outcome>| {
                fit_rows
                    .iter()
                    .filter(move |&&i| class.is_none_or(|c| matrix.outcomes[i] == c))
                    .filter_map(move |&i| matrix.values[i][j])
            };
            let all = stats::median(observed(None))
                .ok_or_else(|| Error::AllMissingFeature(matrix.registry.names()[j].clone()))?;
            overall.push(all);
            success.push(stats::median(observed(Some(Outcome::Success))).unwrap_or(all));
            failure.push(stats::median(observed(Some(Outcome::Failure))).unwrap_or(all));
        }
        Ok(ImputationTable {
            registry_hash: matrix.registry.hash(),
            success,
            failure,
            overall,
            fit_rows: fit_rows.to_vec(),
        })
    }

    fn check(&self, matrix: &FeatureMatrix) -> Result<()> {
        if matrix.registry.hash() != self.registry_hash {
            return Err(Error::RegistryMismatch("imputation table was fitted on another registry".into()));
        }
        Ok(())
    }

    pub fn fill_value(&self, feature: usize, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Success => self.success[feature],
            Outcome::Failure => self.failure[feature],
            Outcome::Unknown => self.overall[feature],
        }
    }

    pub fn impute_row(&self, row: &[Option<f64>], outcome: Outcome) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| v.unwrap_or_else(|| self.fill_value(j, outcome)))
            .collect()
    }

    /// Fills missing cells by each row's outcome class.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(matrix)?;
        let mut out = matrix.clone();
        for (row, outcome) in out.values.iter_mut().zip(&matrix.outcomes) {
            for (j, v) in row.iter_mut().enumerate() {
                if v.is_none() {
                    *v = Some(self.fill_value(j, *outcome));
                }
            }
        }
        Ok(out)
    }

    /// Fills missing cells with overall medians, ignoring outcomes; used
    /// for held-out rows whose labels must not be consulted.
    pub fn apply_blind(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(matrix)?;
        let mut out = matrix.clone();
        for row in &mut out.values {
            for (j, v) in row.iter_mut().enumerate() {
                if v.is_none() {
                    *v = Some(self.overall[j]);
                }
            }
        }
        Ok(out)
    }
}

/// Fits an imputation table on `fit_rows` and applies it to the matrix.
pub fn impute_median(matrix: &FeatureMatrix, fit_rows: &[usize]) -> Result<(FeatureMatrix, ImputationTable)> {
    let table = ImputationTable::fit(matrix, fit_rows)?;
    Ok((table.apply(matrix)?, table))
}
