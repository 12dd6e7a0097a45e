//! R-peak detection (Pan-Tompkins), heart-rate variability statistics and
//! the instantaneous heart-rate track.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsp::{butter_highpass, butter_lowpass, default_padlen, sosfiltfilt};
use crate::error::{Error, Result};
use crate::stats;

/// Plausible RR range; intervals outside it are dropped before statistics.
pub const RR_MIN_S: f64 = 0.2;
pub const RR_MAX_S: f64 = 3.0;
/// Triangular-index histogram bin width (1/128 s).
pub const HRV_BIN_MS: f64 = 7.8125;

const MIN_ECG_S: f64 = 10.0;
const REFRACTORY_S: f64 = 0.2;
const T_WAVE_WINDOW_S: f64 = 0.36;
const INTEGRATION_S: f64 = 0.15;
const REFINE_S: f64 = 0.05;
const SEARCH_BACK_FACTOR: f64 = 1.66;

/// Strictly increasing R-peak times in seconds from the start of the
/// analysed segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RPeakTrain {
    peak_times_s: Vec<f64>,
}

impl RPeakTrain {
    pub fn new(peak_times_s: Vec<f64>) -> Result<Self> {
        if peak_times_s.iter().any(|t| !t.is_finite()) {
            return Err(Error::Parse("non-finite peak time".into()));
        }
        if peak_times_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse("peak times must be strictly increasing".into()));
        }
        Ok(RPeakTrain { peak_times_s })
    }

    pub fn times(&self) -> &[f64] {
        &self.peak_times_s
    }

    pub fn len(&self) -> usize {
        self.peak_times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peak_times_s.is_empty()
    }

    /// RR intervals in seconds, including implausible ones.
    pub fn rr_intervals(&self) -> Vec<f64> {
        self.peak_times_s.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// RR intervals inside `[RR_MIN_S, RR_MAX_S]`.
    pub fn clean_rr(&self) -> Vec<f64> {
        self.rr_intervals().into_iter().filter(|rr| rr_plausible(*rr)).collect()
    }
}

fn rr_plausible(rr: f64) -> bool {
    (RR_MIN_S..=RR_MAX_S).contains(&rr)
}

/// Intermediate Pan-Tompkins signals.
struct QrsEnhanced {
    bandpassed: Vec<f64>,
    slope: Vec<f64>,
    integrated: Vec<f64>,
}

fn enhance(ecg: &[f64], fs: f64) -> QrsEnhanced {
    let mut sections = butter_highpass(2, 5.0, fs);
    sections.extend(butter_lowpass(2, 15.0, fs));
    let bandpassed = sosfiltfilt(&sections, ecg, default_padlen(2, 5.0, fs));

    // five-point derivative, centred so no delay is introduced
    let n = bandpassed.len();
    let mut slope = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        let b = &bandpassed;
        slope[i] = (2.0 * b[i + 2] + b[i + 1] - b[i - 1] - 2.0 * b[i - 2]) * fs / 8.0;
    }

    let w = ((INTEGRATION_S * fs).round() as usize).max(1);
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + slope[i] * slope[i];
    }
    let integrated = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(w / 2);
            let hi = (i + w - w / 2).min(n);
            (prefix[hi] - prefix[lo]) / w as f64
        })
        .collect();
    QrsEnhanced {
        bandpassed,
        slope,
        integrated,
    }
}

/// Local maxima of the integrated signal, at most one per refractory period.
fn candidate_peaks(mwi: &[f64], refractory: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for i in 1..mwi.len().saturating_sub(1) {
        if !(mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1] && mwi[i] > 0.0) {
            continue;
        }
        match out.last_mut() {
            Some(last) if i - *last < refractory => {
                if mwi[i] > mwi[*last] {
                    *last = i;
                }
            }
            _ => out.push(i),
        }
    }
    out
}

fn max_abs(x: &[f64], center: usize, half: usize) -> f64 {
    let lo = center.saturating_sub(half);
    let hi = (center + half + 1).min(x.len());
    x[lo..hi].iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Adaptive dual-threshold classification with search-back. Returns sample
/// indices of accepted QRS complexes on the integrated signal.
fn classify(sig: &QrsEnhanced, candidates: &[usize], fs: f64) -> Vec<usize> {
    let mwi = &sig.integrated;
    let learn = ((2.0 * fs) as usize).min(mwi.len());
    let mut spki = mwi[..learn].iter().fold(0.0f64, |m, v| m.max(*v)) / 3.0;
    let mut npki = mwi[..learn].iter().sum::<f64>() / learn as f64 / 2.0;
    let thresholds = |spki: f64, npki: f64| {
        let thr1 = npki + 0.25 * (spki - npki);
        (thr1, 0.5 * thr1)
    };

    let half_slope = (0.075 * fs) as usize;
    let t_wave = (T_WAVE_WINDOW_S * fs) as usize;
    let refractory = (REFRACTORY_S * fs) as usize;
    let mut qrs: Vec<usize> = Vec::new();
    let mut last_slope = 0.0;
    let mut recent_rr: Vec<usize> = Vec::new();
    let mut noise_since_qrs: Vec<usize> = Vec::new();

    for &idx in candidates {
        let v = mwi[idx];

        if let Some(&last) = qrs.last() {
            if !recent_rr.is_empty() {
                let rr_avg = recent_rr.iter().sum::<usize>() as f64 / recent_rr.len() as f64;
                if (idx - last) as f64 > SEARCH_BACK_FACTOR * rr_avg {
                    let (_, thr2) = thresholds(spki, npki);
                    let missed = noise_since_qrs
                        .iter()
                        .copied()
                        .filter(|&c| c >= last + refractory && mwi[c] > thr2)
                        .max_by(|a, b| mwi[*a].total_cmp(&mwi[*b]).then(b.cmp(a)));
                    if let Some(m) = missed {
                        spki = 0.25 * mwi[m] + 0.75 * spki;
                        recent_rr.push(m - last);
                        qrs.push(m);
                        last_slope = max_abs(&sig.slope, m, half_slope);
                        noise_since_qrs.clear();
                    }
                }
            }
        }

        let (thr1, _) = thresholds(spki, npki);
        let mut is_qrs = v > thr1;
        let slope = max_abs(&sig.slope, idx, half_slope);
        if is_qrs {
            if let Some(&last) = qrs.last() {
                if idx - last < refractory || (idx - last < t_wave && slope < 0.5 * last_slope) {
                    is_qrs = false;
                }
            }
        }
        if is_qrs {
            spki = 0.125 * v + 0.875 * spki;
            if let Some(&last) = qrs.last() {
                recent_rr.push(idx - last);
                if recent_rr.len() > 8 {
                    recent_rr.remove(0);
                }
            }
            qrs.push(idx);
            last_slope = slope;
            noise_since_qrs.clear();
        } else {
            npki = 0.125 * v + 0.875 * npki;
            noise_since_qrs.push(idx);
        }
    }
    qrs
}

/// Moves each detection to the band-passed maximum nearby and interpolates
/// the apex with a parabola.
fn refine(bp: &[f64], qrs: &[usize], fs: f64) -> Vec<f64> {
    let half = (REFINE_S * fs).round() as usize;
    let mut times: Vec<(f64, f64)> = Vec::with_capacity(qrs.len());
    for &q in qrs {
        let lo = q.saturating_sub(half);
        let hi = (q + half + 1).min(bp.len());
        let mut best = lo;
        for i in lo..hi {
            if bp[i] > bp[best] {
                best = i;
            }
        }
        let mut offset = 0.0;
        if best > 0 && best + 1 < bp.len() {
            let (a, b, c) = (bp[best - 1], bp[best], bp[best + 1]);
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            }
        }
        let t = (best as f64 + offset) / fs;
        match times.last_mut() {
            Some(last) if t - last.0 < REFRACTORY_S => {
                if bp[best] > last.1 {
                    *last = (t, bp[best]);
                }
            }
            _ => times.push((t, bp[best])),
        }
    }
    times.into_iter().map(|(t, _)| t).collect()
}

/// Pan-Tompkins QRS detection on an ECG sampled at `fs`.
pub fn detect_r_peaks(ecg: &[f64], fs: f64) -> Result<RPeakTrain> {
    let need = (MIN_ECG_S * fs).round() as usize;
    if ecg.len() < need {
        return Err(Error::TooShort { have: ecg.len(), need });
    }
    let first = ecg[0];
    if ecg.iter().all(|v| (v - first).abs() < 1e-12) {
        return Err(Error::NoPeaksFound(0));
    }
    let sig = enhance(ecg, fs);
    let candidates = candidate_peaks(&sig.integrated, (REFRACTORY_S * fs) as usize);
    if candidates.is_empty() {
        return Err(Error::NoPeaksFound(0));
    }
    let qrs = classify(&sig, &candidates, fs);
    let times = refine(&sig.bandpassed, &qrs, fs);
    if times.len() < 2 {
        return Err(Error::NoPeaksFound(times.len()));
    }
    RPeakTrain::new(times)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrvFeatures {
    pub sdnn_ms: f64,
    pub sdsd_ms: f64,
    pub triangular_index: f64,
}

/// Time-domain HRV from cleaned RR intervals.
///
/// SDSD is the root mean square of successive differences: the spread of
/// the differences around zero, their expectation for a stationary rhythm.
pub fn hrv_features(peaks: &RPeakTrain) -> Result<HrvFeatures> {
    if peaks.len() < 3 {
        return Err(Error::TooFewPeaks { have: peaks.len(), need: 3 });
    }
    let rr = peaks.clean_rr();
    if rr.len() < 2 {
        return Err(Error::TooFewPeaks { have: rr.len() + 1, need: 3 });
    }
    Ok(hrv_from_rr(&rr))
}

/// HRV statistics of RR intervals given in seconds.
pub fn hrv_from_rr(rr_s: &[f64]) -> HrvFeatures {
    let rr_ms: Vec<f64> = rr_s.iter().map(|r| r * 1000.0).collect();
    let sdnn_ms = stats::std_pop(&rr_ms);
    let diffs: Vec<f64> = rr_ms.windows(2).map(|w| w[1] - w[0]).collect();
    let sdsd_ms = if diffs.is_empty() {
        0.0
    } else {
        (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt()
    };
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for r in &rr_ms {
        *bins.entry((r / HRV_BIN_MS).floor() as i64).or_default() += 1;
    }
    let modal = bins.values().copied().max().unwrap_or(0);
    let triangular_index = if modal == 0 { 0.0 } else { rr_ms.len() as f64 / modal as f64 };
    HrvFeatures {
        sdnn_ms,
        sdsd_ms,
        triangular_index,
    }
}

/// Heart rate in beats per minute on a uniform timebase.
#[derive(Debug, Clone, PartialEq)]
pub struct HeartRateTrack {
    pub rate_hz: f64,
    pub bpm: Vec<f64>,
}

/// Instantaneous rate `60 / RR` held between consecutive peaks and sampled
/// at `rate_hz` over `[0, duration_s)`. Implausible intervals take the rate
/// of the nearest plausible one; before the first and after the last peak
/// the adjacent interval's rate is held.
pub fn heart_rate_track(peaks: &RPeakTrain, rate_hz: f64, duration_s: f64) -> Result<HeartRateTrack> {
    let times = peaks.times();
    let rr = peaks.rr_intervals();
    let good: Vec<usize> = (0..rr.len()).filter(|&j| rr_plausible(rr[j])).collect();
    if good.is_empty() {
        return Err(Error::TooFewPeaks { have: peaks.len(), need: 2 });
    }
    let rates: Vec<f64> = (0..rr.len())
        .map(|j| {
            let k = match good.binary_search(&j) {
                Ok(_) => j,
                Err(pos) => {
                    let before = pos.checked_sub(1).map(|p| good[p]);
                    let after = good.get(pos).copied();
                    match (before, after) {
                        (Some(b), Some(a)) => {
                            if j - b <= a - j {
                                b
                            } else {
                                a
                            }
                        }
                        (Some(b), None) => b,
                        (None, Some(a)) => a,
                        (None, None) => unreachable!("good is nonempty"),
                    }
                }
            };
            60.0 / rr[k]
        })
        .collect();

    let n = (duration_s * rate_hz).round() as usize;
    let mut bpm = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let t = i as f64 / rate_hz;
        while j + 1 < rates.len() && t >= times[j + 1] {
            j += 1;
        }
        bpm.push(rates[j]);
    }
    Ok(HeartRateTrack { rate_hz, bpm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{synthetic_ecg, EcgMorphology};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const FS: f64 = 200.0;

    fn beats(rr: f64, start: f64, end: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = start;
        while t < end {
            out.push(t);
            t += rr;
        }
        out
    }

    fn matched(truth: &[f64], found: &[f64], tol: f64) -> usize {
        truth
            .iter()
            .filter(|t| found.iter().any(|f| (f - *t).abs() <= tol))
            .count()
    }

    #[test]
    fn detects_regular_train() {
        let truth = beats(0.5, 0.3, 60.0);
        let ecg = synthetic_ecg(&truth, FS, 12000, &EcgMorphology::default());
        let peaks = detect_r_peaks(&ecg, FS).unwrap();
        assert!((peaks.len() as i64 - 120).abs() <= 2, "{}", peaks.len());
        assert_eq!(matched(&truth, peaks.times(), 0.02), truth.len());
    }

    #[test]
    fn detects_through_baseline_wander() {
        let truth = beats(0.5, 0.3, 60.0);
        let mut ecg = synthetic_ecg(&truth, FS, 12000, &EcgMorphology::default());
        for (i, v) in ecg.iter_mut().enumerate() {
            *v += 2.0 * (2.0 * PI * 0.3 * i as f64 / FS).sin();
        }
        let peaks = detect_r_peaks(&ecg, FS).unwrap();
        let hit = matched(&truth, peaks.times(), 0.02);
        assert!(hit as f64 >= 0.99 * truth.len() as f64, "{hit}/{}", truth.len());
    }

    #[test]
    fn flatline_and_short_inputs() {
        assert!(matches!(detect_r_peaks(&vec![0.3; 4000], FS), Err(Error::NoPeaksFound(0))));
        assert!(matches!(detect_r_peaks(&vec![0.0; 100], FS), Err(Error::TooShort { .. })));
    }

    #[test]
    fn hrv_hand_cases() {
        let h = hrv_from_rr(&[0.5; 12]);
        assert_eq!((h.sdnn_ms, h.sdsd_ms, h.triangular_index), (0.0, 0.0, 1.0));

        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.5 } else { 0.6 }).collect();
        let h = hrv_from_rr(&alt);
        assert!((h.sdnn_ms - 50.0).abs() < 1e-9);
        assert!((h.sdsd_ms - 100.0).abs() < 1e-9);

        // five intervals in each of four distinct 7.8125 ms bins
        let rr: Vec<f64> = (0..20).map(|i| (500.0 + 10.0 * (i % 4) as f64) / 1000.0).collect();
        assert_eq!(hrv_from_rr(&rr).triangular_index, 4.0);
    }

    #[test]
    fn hrv_requires_three_peaks() {
        let p = RPeakTrain::new(vec![0.0, 0.5]).unwrap();
        assert!(matches!(hrv_features(&p), Err(Error::TooFewPeaks { have: 2, need: 3 })));
        // implausible intervals are dropped before the count
        let p = RPeakTrain::new(vec![0.0, 0.5, 5.0, 5.05]).unwrap();
        assert!(matches!(hrv_features(&p), Err(Error::TooFewPeaks { .. })));
    }

    #[test]
    fn heart_rate_track_cases() {
        let p = RPeakTrain::new(beats(0.5, 0.0, 20.0)).unwrap();
        let hr = heart_rate_track(&p, 50.0, 20.0).unwrap();
        assert_eq!(hr.bpm.len(), 1000);
        assert!(hr.bpm.iter().all(|b| (b - 120.0).abs() < 1e-9));

        let mut t = beats(0.5, 0.0, 10.0);
        let last = *t.last().unwrap();
        t.extend((1..=10).map(|k| last + 0.75 * k as f64));
        let hr = heart_rate_track(&RPeakTrain::new(t).unwrap(), 50.0, 17.0).unwrap();
        assert!((hr.bpm[100] - 120.0).abs() < 1e-9);
        assert!((hr.bpm[800] - 80.0).abs() < 1e-9);

        let p = RPeakTrain::new(vec![1.0, 1.8]).unwrap();
        let hr = heart_rate_track(&p, 50.0, 5.0).unwrap();
        assert!(hr.bpm.iter().all(|b| (b - 75.0).abs() < 1e-9));
    }

    #[test]
    fn heart_rate_integrates_to_beat_count() {
        let truth = beats(0.43, 0.2, 30.0);
        let p = RPeakTrain::new(truth.clone()).unwrap();
        let hr = heart_rate_track(&p, 50.0, 30.0).unwrap();
        let beats_est: f64 = hr.bpm.iter().map(|b| b / 60.0 / 50.0).sum();
        assert!((beats_est - truth.len() as f64).abs() <= 1.0);
    }

    proptest! {
        #[test]
        fn sdnn_sdsd_scale_with_time(rr in prop::collection::vec(0.3f64..1.2, 3..40), k in 0.5f64..2.0, shift in -100.0f64..100.0) {
            let mut times = vec![shift];
            for r in &rr {
                times.push(times.last().unwrap() + r);
            }
            let base = hrv_features(&RPeakTrain::new(times.clone()).unwrap()).unwrap();
            let shifted: Vec<f64> = times.iter().map(|t| t + 7.0).collect();
            let moved = hrv_features(&RPeakTrain::new(shifted).unwrap()).unwrap();
            prop_assert!((moved.sdnn_ms - base.sdnn_ms).abs() < 1e-6);
            let rr_scaled: Vec<f64> = rr.iter().map(|r| r * k).filter(|r| rr_plausible(*r)).collect();
            prop_assume!(rr_scaled.len() == rr.len());
            let scaled = hrv_from_rr(&rr_scaled);
            prop_assert!((scaled.sdnn_ms - k * base.sdnn_ms).abs() < 1e-6);
            prop_assert!((scaled.sdsd_ms - k * base.sdsd_ms).abs() < 1e-6);
        }
    }
}
