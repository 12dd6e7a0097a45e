//! Sample-by-sample cardiorespiratory variability metrics on the 50 Hz
//! analysis timebase.
//!
//! Every engine uses trailing windows except the thoraco-abdominal phase,
//! which is built from the analytic signal of the whole epoch. Band
//! limiting is done by selecting DFT bins of each window, so the band edges
//! are exact.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsp::{self, HannSpectrum, SlidingDft};
use crate::error::{Error, Result};
use crate::signals::{AnalysisEpoch, ANALYSIS_RATE_HZ, ECG_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    RpRc,
    RpAb,
    RfAb,
    CfEc,
    CfPp,
    RmsSum,
    Phi,
    BmpRc,
    BmpAb,
    RhoRfCf,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        MetricKind::RpRc,
        MetricKind::RpAb,
        MetricKind::RfAb,
        MetricKind::CfEc,
        MetricKind::CfPp,
        MetricKind::RmsSum,
        MetricKind::Phi,
        MetricKind::BmpRc,
        MetricKind::BmpAb,
        MetricKind::RhoRfCf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::RpRc => "rp_rc",
            MetricKind::RpAb => "rp_ab",
            MetricKind::RfAb => "rf_ab",
            MetricKind::CfEc => "cf_ec",
            MetricKind::CfPp => "cf_pp",
            MetricKind::RmsSum => "rms_sum",
            MetricKind::Phi => "phi",
            MetricKind::BmpRc => "bmp_rc",
            MetricKind::BmpAb => "bmp_ab",
            MetricKind::RhoRfCf => "rho_rfcf",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Uniformly sampled metric track. `valid[t]` is false where the analysis
/// window was incomplete.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub kind: MetricKind,
    pub rate_hz: f64,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl MetricSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, ok)| **ok)
            .map(|(v, _)| *v)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Sub-series over sample indices `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> MetricSeries {
        let end = end.min(self.len());
        let start = start.min(end);
        MetricSeries {
            kind: self.kind,
            rate_hz: self.rate_hz,
            values: self.values[start..end].to_vec(),
            valid: self.valid[start..end].to_vec(),
        }
    }
}

/// Analysis window lengths in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub short_s: f64,
    pub long_s: f64,
    pub power_s: f64,
    pub stft_s: f64,
    pub corr_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            short_s: 2.0,
            long_s: 30.0,
            power_s: 6.0,
            stft_s: 8.0,
            corr_s: 30.0,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.short_s, self.long_s, self.power_s, self.stft_s, self.corr_s];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("window lengths must be positive: {self:?}")));
        }
        if self.short_s >= self.long_s {
            return Err(Error::Config(format!(
                "short window {} s must be shorter than long window {} s",
                self.short_s, self.long_s
            )));
        }
        Ok(())
    }
}

fn samples(seconds: f64, fs: f64) -> usize {
    ((seconds * fs).round() as usize).max(1)
}

fn require(len: usize, need: usize) -> Result<()> {
    if len < need {
        Err(Error::TooShort { have: len, need })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RipBand {
    Ribcage,
    Abdomen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CardiacSource {
    Ecg,
    Ppg,
}

/// Upper edge of the breathing band.
const BREATH_HI_HZ: f64 = 2.0;
/// Movement band `[0, 0.4)`; breathing band `[0.4, 2]`.
const MOVEMENT_HI_HZ: f64 = 0.4;
const CARDIAC_BAND_HZ: (f64, f64) = (1.5, 3.5);
const RF_BANDWIDTH_HZ: f64 = 0.2;
const RF_BANDS: usize = 10;
pub const RATIO_EPS: f64 = 1e-12;

/// Sorted multiset supporting a sliding median.
struct SlidingMedian {
    sorted: Vec<f64>,
}

impl SlidingMedian {
    fn new() -> Self {
        SlidingMedian { sorted: Vec::new() }
    }

    fn insert(&mut self, v: f64) {
        let at = self.sorted.partition_point(|x| x.total_cmp(&v).is_lt());
        self.sorted.insert(at, v);
    }

    fn remove(&mut self, v: f64) {
        let at = self.sorted.partition_point(|x| x.total_cmp(&v).is_lt());
        debug_assert!(self.sorted[at].total_cmp(&v).is_eq());
        self.sorted.remove(at);
    }

    fn median(&self) -> f64 {
        let n = self.sorted.len();
        if n % 2 == 1 {
            self.sorted[n / 2]
        } else {
            0.5 * (self.sorted[n / 2 - 1] + self.sorted[n / 2])
        }
    }
}

/// Pause power: mean-square 0-2 Hz content of the trailing short window,
/// relative to the median of that quantity over the trailing long window.
pub fn pause_power(signal: &[f64], fs: f64, band: RipBand, cfg: &WindowConfig) -> Result<MetricSeries> {
    let kind = match band {
        RipBand::Ribcage => MetricKind::RpRc,
        RipBand::Abdomen => MetricKind::RpAb,
    };
    let n_short = samples(cfg.short_s, fs);
    let n_long = samples(cfg.long_s, fs);
    let first_valid = samples(cfg.short_s + cfg.long_s, fs);
    require(signal.len(), first_valid)?;

    // bins strictly above DC up to 2 Hz, below Nyquist
    let freqs: Vec<f64> = (1..)
        .map(|k| k as f64 * fs / n_short as f64)
        .take_while(|f| *f <= BREATH_HI_HZ + 1e-9 && 2.0 * f < fs)
        .collect();
    let dft = SlidingDft::new(n_short, fs, freqs);
    let norm = 2.0 / (n_short as f64 * n_short as f64);
    let mut short_power = vec![0.0; signal.len()];
    dft.run(signal, |t, c| {
        short_power[t] = norm * c.iter().map(|z| z.norm_sqr()).sum::<f64>();
    });

    let mut values = vec![0.0; signal.len()];
    let mut valid = vec![false; signal.len()];
    let mut window = SlidingMedian::new();
    for t in n_short - 1..signal.len() {
        window.insert(short_power[t]);
        if t + 1 >= n_short + n_long {
            window.remove(short_power[t - n_long]);
        }
        if t >= first_valid {
            let med = window.median();
            let p = short_power[t];
            values[t] = if p <= 0.0 { 0.0 } else { p / med.max(RATIO_EPS) };
            valid[t] = true;
        }
    }
    Ok(MetricSeries {
        kind,
        rate_hz: fs,
        values,
        valid,
    })
}

/// Centers of the 0.2 Hz-wide respiratory filter bank.
pub fn rf_band_centers() -> [f64; RF_BANDS] {
    std::array::from_fn(|b| (b as f64 + 0.5) * RF_BANDWIDTH_HZ)
}

fn rf_band_of(f: f64) -> usize {
    ((f / RF_BANDWIDTH_HZ + 1e-9).floor() as usize).min(RF_BANDS - 1)
}

/// Respiratory frequency: center of the 0.2 Hz band in `[0, 2]` Hz holding
/// the most power of the Hann-tapered trailing `stft_s` window.
pub fn respiratory_frequency(abd: &[f64], fs: f64, cfg: &WindowConfig) -> Result<MetricSeries> {
    let spec = HannSpectrum::new(fs, cfg.stft_s, 0.0, BREATH_HI_HZ, true);
    require(abd.len(), spec.window_len())?;
    let band_of: Vec<usize> = spec.freqs().iter().map(|f| rf_band_of(*f)).collect();
    let centers = rf_band_centers();
    let mut values = vec![0.0; abd.len()];
    let mut valid = vec![false; abd.len()];
    let mut bands = [0.0; RF_BANDS];
    spec.run(abd, |t, power| {
        bands.fill(0.0);
        for (p, b) in power.iter().zip(&band_of) {
            bands[*b] += p;
        }
        let mut best = 0;
        for b in 1..RF_BANDS {
            if bands[b] > bands[best] {
                best = b;
            }
        }
        values[t] = centers[best];
        valid[t] = true;
    });
    Ok(MetricSeries {
        kind: MetricKind::RfAb,
        rate_hz: fs,
        values,
        valid,
    })
}

/// Cardiac frequency: argmax of the Hann-tapered trailing-window spectrum
/// within 1.5-3.5 Hz, sampled onto the analysis timebase.
pub fn cardiac_frequency(
    source: CardiacSource,
    signal: &[f64],
    fs: f64,
    cfg: &WindowConfig,
) -> Result<MetricSeries> {
    let kind = match source {
        CardiacSource::Ecg => MetricKind::CfEc,
        CardiacSource::Ppg => MetricKind::CfPp,
    };
    let spec = HannSpectrum::new(fs, cfg.stft_s, CARDIAC_BAND_HZ.0, CARDIAC_BAND_HZ.1, false);
    require(signal.len(), spec.window_len())?;
    let freqs = spec.freqs();
    let mut peak = vec![f64::NAN; signal.len()];
    spec.run(signal, |t, power| {
        let mut best = 0;
        for j in 1..power.len() {
            if power[j] > power[best] {
                best = j;
            }
        }
        peak[t] = freqs[best];
    });

    let ratio = fs / ANALYSIS_RATE_HZ;
    let out_len = (signal.len() as f64 / ratio).round() as usize;
    let mut values = vec![0.0; out_len];
    let mut valid = vec![false; out_len];
    for i in 0..out_len {
        let src = ((i as f64 * ratio).round() as usize).min(signal.len() - 1);
        if !peak[src].is_nan() {
            values[i] = peak[src];
            valid[i] = true;
        }
    }
    Ok(MetricSeries {
        kind,
        rate_hz: ANALYSIS_RATE_HZ,
        values,
        valid,
    })
}

fn trailing_rms(x: &[f64], n: usize, t: usize) -> f64 {
    (x[t + 1 - n..=t].iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt()
}

/// Sum of the trailing-window RMS of RCG and ABD.
pub fn rms_sum(rcg: &[f64], abd: &[f64], fs: f64, cfg: &WindowConfig) -> Result<MetricSeries> {
    if rcg.len() != abd.len() {
        return Err(Error::LengthMismatch(rcg.len(), abd.len()));
    }
    let n = samples(cfg.short_s, fs);
    require(rcg.len(), n)?;
    let mut values = vec![0.0; rcg.len()];
    let mut valid = vec![false; rcg.len()];
    for t in n - 1..rcg.len() {
        values[t] = trailing_rms(rcg, n, t) + trailing_rms(abd, n, t);
        valid[t] = true;
    }
    Ok(MetricSeries {
        kind: MetricKind::RmsSum,
        rate_hz: fs,
        values,
        valid,
    })
}

/// Absolute thoraco-abdominal phase difference in degrees, from the
/// analytic signals of both bands limited to 0.4-2 Hz. The first and last
/// `short_s` seconds are marked invalid (circular edge effects).
pub fn thoraco_abdominal_phase(rcg: &[f64], abd: &[f64], fs: f64, cfg: &WindowConfig) -> Result<MetricSeries> {
    if rcg.len() != abd.len() {
        return Err(Error::LengthMismatch(rcg.len(), abd.len()));
    }
    require(rcg.len(), samples(cfg.long_s, fs))?;
    let zr = dsp::analytic_bandpass(rcg, fs, MOVEMENT_HI_HZ, BREATH_HI_HZ);
    let za = dsp::analytic_bandpass(abd, fs, MOVEMENT_HI_HZ, BREATH_HI_HZ);
    let margin = samples(cfg.short_s, fs);
    let n = rcg.len();
    let values: Vec<f64> = zr
        .iter()
        .zip(&za)
        .map(|(r, a)| (r * a.conj()).arg().abs().to_degrees().min(180.0))
        .collect();
    let valid = (0..n).map(|t| t >= margin && t + margin < n).collect();
    Ok(MetricSeries {
        kind: MetricKind::Phi,
        rate_hz: fs,
        values,
        valid,
    })
}

/// Ratio of Hann-windowed power in `low` to power in `reference` over a
/// trailing window of `window_s`; `low` is half-open at its upper edge.
/// The series mean is removed first.
pub fn band_power_ratio(
    signal: &[f64],
    fs: f64,
    window_s: f64,
    low: (f64, f64),
    reference: (f64, f64),
) -> Result<(Vec<f64>, Vec<bool>)> {
    let spec = HannSpectrum::new(fs, window_s, low.0, reference.1, false);
    require(signal.len(), spec.window_len())?;
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let centered: Vec<f64> = signal.iter().map(|v| v - mean).collect();
    let scale = {
        let half = 0.5 * spec.window_len() as f64;
        1.0 / (half * half)
    };
    let weights: Vec<(f64, f64)> = spec
        .freqs()
        .iter()
        .map(|f| {
            let w = if *f <= 1e-12 { 1.0 } else { 2.0 };
            let in_low = *f >= low.0 - 1e-12 && *f < low.1 - 1e-12;
            let in_ref = *f >= reference.0 - 1e-12 && *f <= reference.1 + 1e-12;
            (if in_low { w } else { 0.0 }, if in_ref { w } else { 0.0 })
        })
        .collect();
    let mut values = vec![0.0; signal.len()];
    let mut valid = vec![false; signal.len()];
    spec.run(&centered, |t, power| {
        let (mut p_low, mut p_ref) = (0.0, 0.0);
        for (p, (wl, wr)) in power.iter().zip(&weights) {
            p_low += wl * p;
            p_ref += wr * p;
        }
        values[t] = scale * p_low / (scale * p_ref + RATIO_EPS);
        valid[t] = true;
    });
    Ok((values, valid))
}

/// Movement-artifact power: 0-0.4 Hz power over 0.4-2 Hz power.
pub fn movement_power(signal: &[f64], fs: f64, band: RipBand, cfg: &WindowConfig) -> Result<MetricSeries> {
    let kind = match band {
        RipBand::Ribcage => MetricKind::BmpRc,
        RipBand::Abdomen => MetricKind::BmpAb,
    };
    let (values, valid) = band_power_ratio(
        signal,
        fs,
        cfg.stft_s,
        (0.0, MOVEMENT_HI_HZ),
        (MOVEMENT_HI_HZ, BREATH_HI_HZ),
    )?;
    Ok(MetricSeries {
        kind,
        rate_hz: fs,
        values,
        valid,
    })
}

/// Zero-lag Pearson correlation of two metric tracks over a trailing
/// `corr_s` window; 0 when either window is constant.
pub fn rf_cf_correlation(rf: &MetricSeries, cf: &MetricSeries, cfg: &WindowConfig) -> Result<MetricSeries> {
    if rf.len() != cf.len() {
        return Err(Error::LengthMismatch(rf.len(), cf.len()));
    }
    let n = rf.len();
    let w = samples(cfg.corr_s, rf.rate_hz);
    let reference = |s: &MetricSeries| {
        let c = s.valid_count();
        if c == 0 {
            0.0
        } else {
            s.valid_values().sum::<f64>() / c as f64
        }
    };
    let (rx, ry) = (reference(rf), reference(cf));
    let mut px = vec![0.0; n + 1];
    let mut py = vec![0.0; n + 1];
    let mut pxx = vec![0.0; n + 1];
    let mut pyy = vec![0.0; n + 1];
    let mut pxy = vec![0.0; n + 1];
    for t in 0..n {
        let ok = rf.valid[t] && cf.valid[t];
        let x = if ok { rf.values[t] - rx } else { 0.0 };
        let y = if ok { cf.values[t] - ry } else { 0.0 };
        px[t + 1] = px[t] + x;
        py[t + 1] = py[t] + y;
        pxx[t + 1] = pxx[t] + x * x;
        pyy[t + 1] = pyy[t] + y * y;
        pxy[t + 1] = pxy[t] + x * y;
    }

    let mut values = vec![0.0; n];
    let mut valid = vec![false; n];
    let mut last_invalid: Option<usize> = None;
    let mut last_change_x = 0;
    let mut last_change_y = 0;
    for t in 0..n {
        if !(rf.valid[t] && cf.valid[t]) {
            last_invalid = Some(t);
        }
        if t > 0 && rf.values[t] != rf.values[t - 1] {
            last_change_x = t;
        }
        if t > 0 && cf.values[t] != cf.values[t - 1] {
            last_change_y = t;
        }
        if t + 1 < w {
            continue;
        }
        let start = t + 1 - w;
        if last_invalid.is_some_and(|i| i >= start) {
            continue;
        }
        valid[t] = true;
        if last_change_x <= start || last_change_y <= start {
            continue;
        }
        let m = w as f64;
        let sx = px[t + 1] - px[start];
        let sy = py[t + 1] - py[start];
        let vx = (pxx[t + 1] - pxx[start]) - sx * sx / m;
        let vy = (pyy[t + 1] - pyy[start]) - sy * sy / m;
        let cov = (pxy[t + 1] - pxy[start]) - sx * sy / m;
        if vx > 0.0 && vy > 0.0 {
            values[t] = (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0);
        }
    }
    Ok(MetricSeries {
        kind: MetricKind::RhoRfCf,
        rate_hz: rf.rate_hz,
        values,
        valid,
    })
}

/// All ten metrics for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    series: Vec<MetricSeries>,
}

impl MetricSet {
    pub fn get(&self, kind: MetricKind) -> &MetricSeries {
        &self.series[kind as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetricSeries> {
        self.series.iter()
    }
}

fn fit_length(mut s: MetricSeries, len: usize) -> MetricSeries {
    s.values.resize(len, 0.0);
    s.valid.resize(len, false);
    s
}

/// Computes every metric over an analysis epoch. `rho_source` picks the
/// cardiac-frequency track correlated against respiratory frequency.
pub fn compute_all(epoch: &AnalysisEpoch, cfg: &WindowConfig, rho_source: CardiacSource) -> Result<MetricSet> {
    cfg.validate()?;
    let fs = ANALYSIS_RATE_HZ;
    let len = epoch.rcg.len();
    let rf = respiratory_frequency(&epoch.abd, fs, cfg)?;
    let cf_ec = fit_length(cardiac_frequency(CardiacSource::Ecg, &epoch.ecg, ECG_RATE_HZ, cfg)?, len);
    let cf_pp = cardiac_frequency(CardiacSource::Ppg, &epoch.ppg, fs, cfg)?;
    let rho = rf_cf_correlation(
        &rf,
        match rho_source {
            CardiacSource::Ecg => &cf_ec,
            CardiacSource::Ppg => &cf_pp,
        },
        cfg,
    )?;
    let series = vec![
        pause_power(&epoch.rcg, fs, RipBand::Ribcage, cfg)?,
        pause_power(&epoch.abd, fs, RipBand::Abdomen, cfg)?,
        rf,
        cf_ec,
        cf_pp,
        rms_sum(&epoch.rcg, &epoch.abd, fs, cfg)?,
        thoraco_abdominal_phase(&epoch.rcg, &epoch.abd, fs, cfg)?,
        movement_power(&epoch.rcg, fs, RipBand::Ribcage, cfg)?,
        movement_power(&epoch.abd, fs, RipBand::Abdomen, cfg)?,
        rho,
    ];
    debug_assert!(series.iter().zip(MetricKind::ALL).all(|(s, k)| s.kind == k));
    Ok(MetricSet { series })
}
