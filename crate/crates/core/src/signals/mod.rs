//! Multichannel recordings: validation, epoch slicing and resampling onto
//! the analysis timebase.

mod io;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};

pub use io::{
    load_recording, read_clinical, read_epochs, read_signal_table, write_clinical, write_epochs,
    write_signal_csv, SignalTable,
};
pub use synth::{
    synth_cohort, synth_cohort_with, synthetic_ecg, CohortParams, EcgMorphology, SynthOptions,
};

/// Metric timebase for RIP, PPG and SAT processing.
pub const ANALYSIS_RATE_HZ: f64 = 50.0;
/// Timebase for QRS detection.
pub const ECG_RATE_HZ: f64 = 200.0;
/// Minimum ETT-CPAP duration: the second minute must exist.
pub const MIN_ETTCPAP_S: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelKind {
    Rcg,
    Abd,
    Ecg,
    Ppg,
    Sat,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::Rcg,
        ChannelKind::Abd,
        ChannelKind::Ecg,
        ChannelKind::Ppg,
        ChannelKind::Sat,
    ];

    /// Column name in the signal CSV.
    pub fn column(self) -> &'static str {
        match self {
            ChannelKind::Rcg => "rcg",
            ChannelKind::Abd => "abd",
            ChannelKind::Ecg => "ecg",
            ChannelKind::Ppg => "ppg",
            ChannelKind::Sat => "sat",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.column().to_ascii_uppercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
    Unknown,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
            Outcome::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "success" => Ok(Outcome::Success),
            "failure" => Ok(Outcome::Failure),
            "unknown" | "" => Ok(Outcome::Unknown),
            other => Err(Error::Parse(format!("unknown outcome {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub patient_id: String,
    pub bw_g: f64,
    pub ga_weeks: f64,
    pub outcome: Outcome,
}

impl ClinicalRecord {
    pub fn new(patient_id: impl Into<String>, bw_g: f64, ga_weeks: f64, outcome: Outcome) -> Result<Self> {
        if !(bw_g > 0.0 && bw_g.is_finite()) || !(ga_weeks > 0.0 && ga_weeks.is_finite()) {
            return Err(Error::Parse(format!(
                "birth weight and gestational age must be positive (bw={bw_g}, ga={ga_weeks})"
            )));
        }
        Ok(ClinicalRecord {
            patient_id: patient_id.into(),
            bw_g,
            ga_weeks,
            outcome,
        })
    }
}

/// Half-open time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
}

impl Span {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Span { start_s, end_s }
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Epoch {
    Imv,
    EttCpap,
    /// Second minute of ETT-CPAP.
    EttCpapMin2,
    /// ETT-CPAP with the first (transition) minute dropped.
    EttCpapAfterMin1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochSpec {
    pub imv: Span,
    pub ettcpap: Span,
}

impl EpochSpec {
    pub fn span(&self, epoch: Epoch) -> Result<Span> {
        let ett = self.ettcpap;
        match epoch {
            Epoch::Imv => Ok(self.imv),
            Epoch::EttCpap => Ok(ett),
            Epoch::EttCpapMin2 => {
                if ett.duration() < 120.0 {
                    return Err(Error::EpochOutOfRange(format!(
                        "second ETT-CPAP minute needs 120 s, span is {:.1} s",
                        ett.duration()
                    )));
                }
                Ok(Span::new(ett.start_s + 60.0, ett.start_s + 120.0))
            }
            Epoch::EttCpapAfterMin1 => {
                if ett.duration() <= 60.0 {
                    return Err(Error::EpochOutOfRange(format!(
                        "ETT-CPAP span of {:.1} s ends within the first minute",
                        ett.duration()
                    )));
                }
                Ok(Span::new(ett.start_s + 60.0, ett.end_s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub samples: Vec<f64>,
    pub rate_hz: f64,
}

impl Channel {
    pub fn new(samples: Vec<f64>, rate_hz: f64) -> Self {
        Channel { samples, rate_hz }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    fn index_range(&self, t0: f64, span: Span) -> (usize, usize) {
        let a = ((span.start_s - t0) * self.rate_hz).round().max(0.0) as usize;
        let b = ((span.end_s - t0) * self.rate_hz).round().max(0.0) as usize;
        (a, b)
    }
}

/// One patient's five synchronized channels plus epoch markers. Immutable
/// once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    patient_id: String,
    start_time_s: f64,
    channels: [Channel; 5],
    epochs: EpochSpec,
}

impl Recording {
    /// `start_time_s` is the time stamp of the first sample of every channel.
    pub fn new(
        patient_id: impl Into<String>,
        start_time_s: f64,
        channels: impl IntoIterator<Item = (ChannelKind, Channel)>,
        epochs: EpochSpec,
    ) -> Result<Self> {
        let mut slots: [Option<Channel>; 5] = Default::default();
        for (kind, ch) in channels {
            slots[kind.index()] = Some(ch);
        }
        for kind in ChannelKind::ALL {
            let ch = slots[kind.index()]
                .as_ref()
                .ok_or(Error::MissingChannel(kind))?;
            if !(ch.rate_hz > 0.0 && ch.rate_hz.is_finite()) {
                return Err(Error::InvalidRate(format!("{kind} rate {}", ch.rate_hz)));
            }
            if let Some(index) = ch.samples.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample { channel: kind, index });
            }
        }
        let channels = slots.map(|c| c.expect("checked above"));

        let (imv, ett) = (epochs.imv, epochs.ettcpap);
        if !(imv.start_s < imv.end_s && ett.start_s < ett.end_s) {
            return Err(Error::EpochOutOfRange("span start must precede end".into()));
        }
        if imv.end_s > ett.start_s {
            return Err(Error::EpochOutOfRange(format!(
                "IMV span [{}, {}] overlaps or follows ETT-CPAP [{}, {}]",
                imv.start_s, imv.end_s, ett.start_s, ett.end_s
            )));
        }
        if ett.duration() < MIN_ETTCPAP_S {
            return Err(Error::ShortEttCpap(ett.duration()));
        }
        for (kind, ch) in ChannelKind::ALL.iter().zip(&channels) {
            let end = start_time_s + ch.duration_s();
            let tol = 0.5 / ch.rate_hz;
            if imv.start_s < start_time_s - tol || ett.end_s > end + tol {
                return Err(Error::EpochOutOfRange(format!(
                    "{kind} covers [{start_time_s}, {end}] s, epochs need [{}, {}] s",
                    imv.start_s, ett.end_s
                )));
            }
        }
        Ok(Recording {
            patient_id: patient_id.into(),
            start_time_s,
            channels,
            epochs,
        })
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn epochs(&self) -> &EpochSpec {
        &self.epochs
    }

    pub fn channel(&self, kind: ChannelKind) -> &Channel {
        &self.channels[kind.index()]
    }

    /// Borrowed view of one epoch of every channel.
    pub fn slice_epoch(&self, epoch: Epoch) -> Result<EpochView<'_>> {
        let span = self.epochs.span(epoch)?;
        let mut parts: [&[f64]; 5] = [&[]; 5];
        let mut rates = [0.0; 5];
        for kind in ChannelKind::ALL {
            let ch = self.channel(kind);
            let (a, b) = ch.index_range(self.start_time_s, span);
            if b > ch.samples.len() || a >= b {
                return Err(Error::EpochOutOfRange(format!(
                    "{kind} samples [{a}, {b}) outside recording of {}",
                    ch.samples.len()
                )));
            }
            parts[kind.index()] = &ch.samples[a..b];
            rates[kind.index()] = ch.rate_hz;
        }
        Ok(EpochView {
            epoch,
            span,
            parts,
            rates,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochView<'a> {
    pub epoch: Epoch,
    pub span: Span,
    parts: [&'a [f64]; 5],
    rates: [f64; 5],
}

impl<'a> EpochView<'a> {
    pub fn samples(&self, kind: ChannelKind) -> &'a [f64] {
        self.parts[kind.index()]
    }

    pub fn rate_hz(&self, kind: ChannelKind) -> f64 {
        self.rates[kind.index()]
    }

    /// Resamples the view onto the analysis timebase.
    pub fn to_analysis(&self) -> Result<AnalysisEpoch> {
        let on = |kind: ChannelKind, rate: f64| resample(self.samples(kind), self.rate_hz(kind), rate);
        Ok(AnalysisEpoch {
            rcg: on(ChannelKind::Rcg, ANALYSIS_RATE_HZ)?,
            abd: on(ChannelKind::Abd, ANALYSIS_RATE_HZ)?,
            ppg: on(ChannelKind::Ppg, ANALYSIS_RATE_HZ)?,
            sat: on(ChannelKind::Sat, ANALYSIS_RATE_HZ)?,
            ecg: on(ChannelKind::Ecg, ECG_RATE_HZ)?,
            span: self.span,
        })
    }
}

/// An epoch on the analysis timebase: RIP, PPG and SAT at
/// [`ANALYSIS_RATE_HZ`], ECG at [`ECG_RATE_HZ`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisEpoch {
    pub rcg: Vec<f64>,
    pub abd: Vec<f64>,
    pub ppg: Vec<f64>,
    pub sat: Vec<f64>,
    pub ecg: Vec<f64>,
    pub span: Span,
}

impl AnalysisEpoch {
    pub fn duration_s(&self) -> f64 {
        self.rcg.len() as f64 / ANALYSIS_RATE_HZ
    }
}

const ANTI_ALIAS_ORDER: usize = 16;

/// Decimates `samples` from `source_hz` to `target_hz` after a zero-phase
/// low-pass at `0.45 * target_hz`. Output sample `k` sits at time
/// `k / target_hz`; non-integer ratios interpolate linearly.
pub fn resample(samples: &[f64], source_hz: f64, target_hz: f64) -> Result<Vec<f64>> {
    if !(source_hz > 0.0 && target_hz > 0.0 && source_hz.is_finite() && target_hz.is_finite()) {
        return Err(Error::InvalidRate(format!("{source_hz} Hz -> {target_hz} Hz")));
    }
    if target_hz > source_hz {
        return Err(Error::UpsamplingRequested { source_hz, target_hz });
    }
    if target_hz == source_hz || samples.is_empty() {
        return Ok(samples.to_vec());
    }
    let cutoff = 0.45 * target_hz;
    let sos = dsp::butter_lowpass(ANTI_ALIAS_ORDER, cutoff, source_hz);
    let padlen = dsp::default_padlen(ANTI_ALIAS_ORDER, cutoff, source_hz);
    let filtered = dsp::sosfiltfilt(&sos, samples, padlen);

    let ratio = source_hz / target_hz;
    let out_len = (samples.len() as f64 / ratio).round() as usize;
    let last = filtered.len() - 1;
    Ok((0..out_len)
        .map(|k| {
            let pos = k as f64 * ratio;
            let i = pos.floor() as usize;
            if i >= last {
                return filtered[last];
            }
            let frac = pos - i as f64;
            if frac == 0.0 {
                filtered[i]
            } else {
                filtered[i] + frac * (filtered[i + 1] - filtered[i])
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(f: f64, fs: f64, seconds: f64) -> Vec<f64> {
        let n = (fs * seconds) as usize;
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    fn amplitude(x: &[f64]) -> f64 {
        // RMS-based amplitude of a sinusoid, ignoring the outer 10%
        let skip = x.len() / 10;
        let core = &x[skip..x.len() - skip];
        (core.iter().map(|v| v * v).sum::<f64>() / core.len() as f64).sqrt() * 2f64.sqrt()
    }

    #[test]
    fn constant_survives_decimation() {
        let y = resample(&vec![4.5; 10_000], 1000.0, 50.0).unwrap();
        assert_eq!(y.len(), 500);
        assert!(y.iter().all(|v| (v - 4.5).abs() < 1e-9));
    }

    #[test]
    fn passband_tone_keeps_amplitude() {
        let y = resample(&sine(1.0, 1000.0, 20.0), 1000.0, 50.0).unwrap();
        assert_eq!(y.len(), 1000);
        let a = amplitude(&y);
        assert!((a - 1.0).abs() < 0.05, "amplitude {a}");
        // still a 1 Hz tone: sample 12 of each 50-sample period is near the crest
        assert!((y[512] - (2.0 * PI * 512.0 / 50.0).sin()).abs() < 0.05);
    }

    #[test]
    fn tone_at_forty_percent_of_target_within_five_percent() {
        let y = resample(&sine(19.9, 1000.0, 20.0), 1000.0, 50.0).unwrap();
        let a = amplitude(&y);
        assert!((a - 1.0).abs() < 0.05, "amplitude {a}");
    }

    #[test]
    fn stopband_tone_attenuated_20_db() {
        let y = resample(&sine(30.0, 1000.0, 20.0), 1000.0, 50.0).unwrap();
        let db = 20.0 * amplitude(&y).log10();
        assert!(db < -20.0, "attenuation {db} dB");
    }

    #[test]
    fn non_integer_ratio_length() {
        let y = resample(&vec![1.0; 1001], 250.0, 200.0).unwrap();
        assert_eq!(y.len(), 801);
    }

    #[test]
    fn equal_rate_is_identity_and_upsampling_rejected() {
        let x = sine(1.0, 50.0, 3.0);
        assert_eq!(resample(&x, 50.0, 50.0).unwrap(), x);
        assert!(matches!(
            resample(&x, 50.0, 100.0),
            Err(Error::UpsamplingRequested { .. })
        ));
    }

    fn spec(ett: (f64, f64)) -> EpochSpec {
        EpochSpec {
            imv: Span::new(ett.0 - 60.0, ett.0),
            ettcpap: Span::new(ett.0, ett.1),
        }
    }

    #[test]
    fn epoch_spans() {
        let s = spec((0.0, 300.0));
        assert_eq!(s.span(Epoch::EttCpapMin2).unwrap(), Span::new(60.0, 120.0));
        assert_eq!(s.span(Epoch::EttCpapAfterMin1).unwrap(), Span::new(60.0, 300.0));
        assert!(matches!(
            spec((0.0, 100.0)).span(Epoch::EttCpapMin2),
            Err(Error::EpochOutOfRange(_))
        ));
    }

    fn rec_with(ett: Span, seconds: f64) -> Result<Recording> {
        let n = (seconds * 10.0) as usize;
        let ch = |k: usize| Channel::new((0..n).map(|i| (i * 5 + k) as f64).collect(), 10.0);
        Recording::new(
            "p",
            0.0,
            ChannelKind::ALL.iter().enumerate().map(|(k, kind)| (*kind, ch(k))),
            EpochSpec {
                imv: Span::new(0.0, ett.start_s),
                ettcpap: ett,
            },
        )
    }

    #[test]
    fn recording_validation() {
        assert!(rec_with(Span::new(100.0, 400.0), 400.0).is_ok());
        assert!(matches!(
            rec_with(Span::new(100.0, 190.0), 400.0),
            Err(Error::ShortEttCpap(d)) if (d - 90.0).abs() < 1e-12
        ));
        assert!(matches!(
            rec_with(Span::new(100.0, 500.0), 400.0),
            Err(Error::EpochOutOfRange(_))
        ));
        let missing = Recording::new(
            "p",
            0.0,
            [(ChannelKind::Rcg, Channel::new(vec![0.0; 10], 1.0))],
            spec((0.0, 300.0)),
        );
        assert!(matches!(missing, Err(Error::MissingChannel(ChannelKind::Abd))));
    }

    #[test]
    fn slices_reassemble_the_recording() {
        let rec = rec_with(Span::new(100.0, 400.0), 400.0).unwrap();
        let imv = rec.slice_epoch(Epoch::Imv).unwrap();
        let ett = rec.slice_epoch(Epoch::EttCpap).unwrap();
        for kind in ChannelKind::ALL {
            let joined: Vec<f64> = imv.samples(kind).iter().chain(ett.samples(kind)).copied().collect();
            assert_eq!(joined, rec.channel(kind).samples);
        }
        let min2 = rec.slice_epoch(Epoch::EttCpapMin2).unwrap();
        assert_eq!(min2.samples(ChannelKind::Rcg).len(), 600);
        assert_eq!(min2.samples(ChannelKind::Rcg)[0], (1600 * 5) as f64);
    }
}
