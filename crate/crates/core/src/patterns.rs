//! Per-sample respiratory labelling, bradycardia and desaturation event
//! tracks, and run statistics for each pattern.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{band_power_ratio, MetricSeries, WindowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RespiratoryLabel {
    Pau,
    Mvt,
    Syb,
    Asb,
}

impl RespiratoryLabel {
    pub const ALL: [RespiratoryLabel; 4] = [
        RespiratoryLabel::Pau,
        RespiratoryLabel::Mvt,
        RespiratoryLabel::Syb,
        RespiratoryLabel::Asb,
    ];

    pub fn pattern(self) -> Pattern {
        match self {
            RespiratoryLabel::Pau => Pattern::Pau,
            RespiratoryLabel::Mvt => Pattern::Mvt,
            RespiratoryLabel::Syb => Pattern::Syb,
            RespiratoryLabel::Asb => Pattern::Asb,
        }
    }
}

impl fmt::Display for RespiratoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pattern().name().to_uppercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pattern {
    Pau,
    Mvt,
    Syb,
    Asb,
    Bdy,
    Dst,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Pattern::Pau,
        Pattern::Mvt,
        Pattern::Syb,
        Pattern::Asb,
        Pattern::Bdy,
        Pattern::Dst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Pau => "pau",
            Pattern::Mvt => "mvt",
            Pattern::Syb => "syb",
            Pattern::Asb => "asb",
            Pattern::Bdy => "bdy",
            Pattern::Dst => "dst",
        }
    }
}

/// Labelling thresholds; `smoothing_s = 0` disables label smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternThresholds {
    pub mvt: f64,
    pub pau: f64,
    pub phase_deg: f64,
    pub brady_bpm: f64,
    pub desat_pct: f64,
    pub smoothing_s: f64,
}

impl Default for PatternThresholds {
    fn default() -> Self {
        PatternThresholds {
            mvt: 2.0,
            pau: 0.25,
            phase_deg: 90.0,
            brady_bpm: 100.0,
            desat_pct: 85.0,
            smoothing_s: 1.0,
        }
    }
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch(a, b))
    }
}

fn above(s: &MetricSeries, t: usize, thr: f64) -> bool {
    s.valid[t] && s.values[t] > thr
}

fn below(s: &MetricSeries, t: usize, thr: f64) -> bool {
    s.valid[t] && s.values[t] < thr
}

/// Priority rule per sample (movement, pause, asynchrony, otherwise
/// synchronous), then centred majority smoothing over `smoothing_s`.
/// A sample whose metric is invalid cannot trigger that rule.
pub fn segment_respiration(
    rp_rc: &MetricSeries,
    rp_ab: &MetricSeries,
    bmp_rc: &MetricSeries,
    bmp_ab: &MetricSeries,
    phi: &MetricSeries,
    thr: &PatternThresholds,
) -> Result<Vec<RespiratoryLabel>> {
    let n = rp_rc.len();
    for s in [rp_ab, bmp_rc, bmp_ab, phi] {
        same_len(n, s.len())?;
    }
    let raw: Vec<RespiratoryLabel> = (0..n)
        .map(|t| {
            if above(bmp_rc, t, thr.mvt) || above(bmp_ab, t, thr.mvt) {
                RespiratoryLabel::Mvt
            } else if below(rp_rc, t, thr.pau) && below(rp_ab, t, thr.pau) {
                RespiratoryLabel::Pau
            } else if above(phi, t, thr.phase_deg) {
                RespiratoryLabel::Asb
            } else {
                RespiratoryLabel::Syb
            }
        })
        .collect();
    let width = (thr.smoothing_s * rp_rc.rate_hz).round() as usize;
    Ok(smooth_labels(&raw, width))
}

/// Centred sliding mode over `width` samples (rounded up to odd), clipped
/// at the edges. Ties keep the current label.
pub fn smooth_labels(labels: &[RespiratoryLabel], width: usize) -> Vec<RespiratoryLabel> {
    if width <= 1 || labels.is_empty() {
        return labels.to_vec();
    }
    let half = width / 2;
    let n = labels.len();
    let mut counts = [0usize; 4];
    let (mut lo, mut hi) = (0, 0);
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let want_lo = t.saturating_sub(half);
        let want_hi = (t + half + 1).min(n);
        while hi < want_hi {
            counts[labels[hi] as usize] += 1;
            hi += 1;
        }
        while lo < want_lo {
            counts[labels[lo] as usize] -= 1;
            lo += 1;
        }
        let current = labels[t];
        let mut best = current;
        for l in RespiratoryLabel::ALL {
            if counts[l as usize] > counts[best as usize] {
                best = l;
            }
        }
        out.push(best);
    }
    out
}

/// Boolean event track (bradycardia or desaturation).
#[derive(Debug, Clone, PartialEq)]
pub struct EventTrack {
    pub kind: Pattern,
    pub active: Vec<bool>,
}

/// Heart rate below `brady_bpm` on samples not flagged as movement.
pub fn detect_bradycardia(hr_bpm: &[f64], artifact: &[bool], thr: &PatternThresholds) -> Result<EventTrack> {
    same_len(hr_bpm.len(), artifact.len())?;
    Ok(EventTrack {
        kind: Pattern::Bdy,
        active: hr_bpm
            .iter()
            .zip(artifact)
            .map(|(hr, a)| *hr < thr.brady_bpm && !a)
            .collect(),
    })
}

/// Saturation below `desat_pct` on samples without a PPG artifact.
pub fn detect_desaturation(sat: &[f64], ppg_artifact: &[bool], thr: &PatternThresholds) -> Result<EventTrack> {
    same_len(sat.len(), ppg_artifact.len())?;
    Ok(EventTrack {
        kind: Pattern::Dst,
        active: sat
            .iter()
            .zip(ppg_artifact)
            .map(|(s, a)| *s < thr.desat_pct && !a)
            .collect(),
    })
}

/// Upper edge of the PPG reference band; the pulse fundamental lies inside.
const PPG_REFERENCE_HI_HZ: f64 = 4.0;

/// Simple PPG movement-artifact detector: 0-0.4 Hz power over 0.4-4 Hz
/// power above `thr.mvt`. Samples before the first full window are clean.
pub fn ppg_artifact_mask(ppg: &[f64], fs: f64, cfg: &WindowConfig, thr: &PatternThresholds) -> Result<Vec<bool>> {
    let (ratio, valid) = band_power_ratio(ppg, fs, cfg.stft_s, (0.0, 0.4), (0.4, PPG_REFERENCE_HI_HZ))?;
    Ok(ratio.iter().zip(&valid).map(|(r, v)| *v && *r > thr.mvt).collect())
}

/// Run statistics for one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    /// Number of maximal runs.
    pub n: usize,
    /// Total duration in seconds.
    pub t_tot: f64,
    /// Longest run in seconds.
    pub t_max: f64,
    /// Fraction of the analysed time.
    pub d: f64,
    /// Runs per second.
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternStats {
    pub t_total: f64,
    stats: [RunStats; 6],
}

impl PatternStats {
    pub fn get(&self, p: Pattern) -> &RunStats {
        &self.stats[p as usize]
    }
}

fn runs(mask: impl Iterator<Item = bool>) -> (usize, usize, usize) {
    let (mut n, mut total, mut longest, mut current) = (0, 0, 0, 0);
    for on in mask {
        if on {
            if current == 0 {
                n += 1;
            }
            current += 1;
            total += 1;
            longest = longest.max(current);
        } else {
            current = 0;
        }
    }
    (n, total, longest)
}

/// Statistics of each pattern over `t_total` seconds of labels sampled at
/// `rate_hz`. Event tracks must match the label length.
pub fn pattern_stats(
    labels: &[RespiratoryLabel],
    events: &[EventTrack],
    rate_hz: f64,
    t_total: f64,
) -> Result<PatternStats> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(t_total > 0.0) {
        return Err(Error::Config(format!("analysed duration must be positive, got {t_total}")));
    }
    for e in events {
        same_len(labels.len(), e.active.len())?;
    }
    let make = |(n, total, longest): (usize, usize, usize)| {
        let t_tot = total as f64 / rate_hz;
        RunStats {
            n,
            t_tot,
            t_max: longest as f64 / rate_hz,
            d: t_tot / t_total,
            f: n as f64 / t_total,
        }
    };
    let mut stats = [RunStats::default(); 6];
    for l in RespiratoryLabel::ALL {
        stats[l.pattern() as usize] = make(runs(labels.iter().map(|x| *x == l)));
    }
    for e in events {
        stats[e.kind as usize] = make(runs(e.active.iter().copied()));
    }
    Ok(PatternStats { t_total, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricKind;
    use proptest::prelude::*;
    use RespiratoryLabel::*;

    fn track(kind: MetricKind, v: f64, n: usize) -> MetricSeries {
        MetricSeries {
            kind,
            rate_hz: 50.0,
            values: vec![v; n],
            valid: vec![true; n],
        }
    }

    fn segment(rp: f64, bmp: f64, phi: f64) -> Vec<RespiratoryLabel> {
        let n = 500;
        segment_respiration(
            &track(MetricKind::RpRc, rp, n),
            &track(MetricKind::RpAb, rp, n),
            &track(MetricKind::BmpRc, bmp, n),
            &track(MetricKind::BmpAb, bmp, n),
            &track(MetricKind::Phi, phi, n),
            &PatternThresholds::default(),
        )
        .unwrap()
    }

    #[test]
    fn rule_priority() {
        assert!(segment(1.0, 0.0, 5.0).iter().all(|l| *l == Syb));
        assert!(segment(0.01, 0.0, 5.0).iter().all(|l| *l == Pau));
        assert!(segment(1.0, 0.0, 170.0).iter().all(|l| *l == Asb));
        assert!(segment(0.01, 3.0, 170.0).iter().all(|l| *l == Mvt));
    }

    #[test]
    fn invalid_samples_fall_through() {
        let n = 100;
        let mut rp = track(MetricKind::RpRc, 0.0, n);
        rp.valid.fill(false);
        let labels = segment_respiration(
            &rp,
            &rp,
            &track(MetricKind::BmpRc, 0.0, n),
            &track(MetricKind::BmpAb, 0.0, n),
            &track(MetricKind::Phi, 0.0, n),
            &PatternThresholds::default(),
        )
        .unwrap();
        assert!(labels.iter().all(|l| *l == Syb));
    }

    #[test]
    fn smoothing_removes_flicker() {
        let mut labels = vec![Syb; 200];
        labels[100] = Pau;
        labels[150] = Asb;
        labels[151] = Asb;
        let out = smooth_labels(&labels, 51);
        assert!(out.iter().all(|l| *l == Syb));
        // a long run survives intact
        let mut labels = vec![Syb; 300];
        labels[100..200].fill(Pau);
        assert_eq!(smooth_labels(&labels, 51), labels);
    }

    #[test]
    fn event_tracks() {
        let thr = PatternThresholds::default();
        let clean = vec![false; 1500];
        let e = detect_bradycardia(&[140.0; 1500], &clean, &thr).unwrap();
        assert!(e.active.iter().all(|a| !a));

        let mut hr = vec![140.0; 1500];
        hr[500..1000].fill(90.0);
        let e = detect_bradycardia(&hr, &clean, &thr).unwrap();
        let s = pattern_stats(&[Syb; 1500], &[e], 50.0, 30.0).unwrap();
        assert_eq!(s.get(Pattern::Bdy).n, 1);
        assert!((s.get(Pattern::Bdy).t_tot - 10.0).abs() < 1e-12);

        let mut art = clean.clone();
        art[600..700].fill(true);
        let e = detect_bradycardia(&hr, &art, &thr).unwrap();
        assert!(!e.active[650] && e.active[550]);

        let mut sat = vec![97.0; 1500];
        assert!(detect_desaturation(&sat, &clean, &thr).unwrap().active.iter().all(|a| !a));
        sat[200..800].fill(80.0);
        let e = detect_desaturation(&sat, &clean, &thr).unwrap();
        let s = pattern_stats(&[Syb; 1500], &[e], 50.0, 30.0).unwrap();
        assert_eq!(s.get(Pattern::Dst).n, 1);
        assert!((s.get(Pattern::Dst).t_tot - 12.0).abs() < 1e-12);
        let e = detect_desaturation(&sat, &[true; 1500], &thr).unwrap();
        assert!(e.active.iter().all(|a| !a));

        assert!(matches!(detect_desaturation(&sat, &[false; 3], &thr), Err(Error::LengthMismatch(1500, 3))));
    }

    #[test]
    fn run_statistics() {
        let s = pattern_stats(&vec![Syb; 12000], &[], 50.0, 240.0).unwrap();
        let syb = s.get(Pattern::Syb);
        assert_eq!(syb.n, 1);
        assert_eq!((syb.t_tot, syb.t_max, syb.d), (240.0, 240.0, 1.0));
        assert_eq!(syb.f, 1.0 / 240.0);
        assert_eq!(*s.get(Pattern::Bdy), RunStats::default());

        let mut labels = vec![Syb; 12000];
        labels[1000..1150].fill(Pau);
        labels[5000..5250].fill(Pau);
        let s = pattern_stats(&labels, &[], 50.0, 240.0).unwrap();
        let pau = s.get(Pattern::Pau);
        assert_eq!(pau.n, 2);
        assert!((pau.t_tot - 8.0).abs() < 1e-12);
        assert!((pau.t_max - 5.0).abs() < 1e-12);
        assert!((pau.d - 8.0 / 240.0).abs() < 1e-15);
        assert_eq!(pau.f, 2.0 / 240.0);

        assert!(matches!(pattern_stats(&[], &[], 50.0, 1.0), Err(Error::EmptyInput)));
    }

    proptest! {
        #[test]
        fn partition_identities(raw in prop::collection::vec(0u8..4, 1..600)) {
            let labels: Vec<_> = raw.iter().map(|i| RespiratoryLabel::ALL[*i as usize]).collect();
            let t_total = labels.len() as f64 / 50.0;
            let s = pattern_stats(&labels, &[], 50.0, t_total).unwrap();
            let sum: f64 = RespiratoryLabel::ALL.iter().map(|l| s.get(l.pattern()).d).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            for p in Pattern::ALL {
                let r = s.get(p);
                prop_assert_eq!(r.d, r.t_tot / t_total);
                prop_assert_eq!(r.f, r.n as f64 / t_total);
                prop_assert!(r.t_max <= r.t_tot && r.t_tot <= t_total + 1e-12);
            }
        }

        #[test]
        fn raising_pause_threshold_never_shrinks_pauses(
            rp in prop::collection::vec(0.0f64..1.0, 50..200),
            lo in 0.0f64..0.5,
            delta in 0.0f64..0.5,
        ) {
            let n = rp.len();
            let rp_track = MetricSeries { kind: MetricKind::RpRc, rate_hz: 50.0, values: rp, valid: vec![true; n] };
            let zeros = track(MetricKind::BmpRc, 0.0, n);
            let pau_time = |theta: f64| {
                let thr = PatternThresholds { pau: theta, smoothing_s: 0.0, ..Default::default() };
                let l = segment_respiration(&rp_track, &rp_track, &zeros, &zeros, &zeros, &thr).unwrap();
                pattern_stats(&l, &[], 50.0, n as f64 / 50.0).unwrap().get(Pattern::Pau).t_tot
            };
            prop_assert!(pau_time(lo + delta) >= pau_time(lo));
        }
    }
}
