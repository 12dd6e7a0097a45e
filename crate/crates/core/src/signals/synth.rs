//! Seeded synthetic cohorts with a controllable failure signature.
//!
//! Failure patients carry, each with a probability that grows with the
//! separability dial, four independent signatures: breathing pauses,
//! thoraco-abdominal asynchrony, bradycardia dips and desaturations. Success
//! patients carry each signature at a fixed base rate, so at separability 0
//! both classes draw their signals from the same distribution.
//!
//! Failures among mature infants (those meeting the GA/BW rule) draw their
//! signatures at the base rate too: they fail for reasons the signals do
//! not show.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Channel, ChannelKind, ClinicalRecord, EpochSpec, Outcome, Recording, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    /// Shared sample rate of all generated channels.
    pub source_rate_hz: f64,
    pub imv_s: f64,
    pub ettcpap_s: f64,
    /// Per-signature probability for success patients (and the floor for
    /// failure patients).
    pub base_signature_rate: f64,
    /// Fraction of patients meeting the GA/BW rule.
    pub rule_positive_fraction: f64,
    /// Fraction of failures that meet the GA/BW rule.
    pub rule_positive_failure_share: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            source_rate_hz: 200.0,
            imv_s: 60.0,
            ettcpap_s: 300.0,
            base_signature_rate: 0.15,
            rule_positive_fraction: 0.40,
            rule_positive_failure_share: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortParams {
    pub n_patients: usize,
    pub failure_rate: f64,
    pub separability: f64,
    pub seed: u64,
    pub options: SynthOptions,
}

pub fn synth_cohort(
    n_patients: usize,
    failure_rate: f64,
    separability: f64,
    seed: u64,
) -> Result<(Vec<Recording>, Vec<ClinicalRecord>)> {
    synth_cohort_with(&CohortParams {
        n_patients,
        failure_rate,
        separability,
        seed,
        options: SynthOptions::default(),
    })
}

pub fn synth_cohort_with(params: &CohortParams) -> Result<(Vec<Recording>, Vec<ClinicalRecord>)> {
    let opts = &params.options;
    if !(params.failure_rate > 0.0 && params.failure_rate < 1.0) {
        return Err(Error::InvalidRate(format!(
            "failure rate {} must lie strictly between 0 and 1",
            params.failure_rate
        )));
    }
    if !(params.separability >= 0.0 && params.separability.is_finite()) {
        return Err(Error::InvalidRate(format!(
            "separability {} must be a nonnegative number",
            params.separability
        )));
    }
    if !(opts.source_rate_hz >= 200.0) {
        return Err(Error::InvalidRate(format!(
            "synthetic source rate {} Hz is below the 200 Hz ECG timebase",
            opts.source_rate_hz
        )));
    }
    if opts.ettcpap_s < 120.0 || opts.imv_s <= 0.0 {
        return Err(Error::InvalidRate("epoch durations too short".into()));
    }

    let n = params.n_patients;
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let n_fail = (n as f64 * params.failure_rate).round() as usize;
    let mut outcomes: Vec<Outcome> = (0..n)
        .map(|i| if i < n_fail { Outcome::Failure } else { Outcome::Success })
        .collect();
    outcomes.shuffle(&mut master);

    let mut fail_idx: Vec<usize> = (0..n).filter(|i| outcomes[*i] == Outcome::Failure).collect();
    let mut succ_idx: Vec<usize> = (0..n).filter(|i| outcomes[*i] == Outcome::Success).collect();
    fail_idx.shuffle(&mut master);
    succ_idx.shuffle(&mut master);
    let n_pos_fail = ((n_fail as f64 * opts.rule_positive_failure_share).round() as usize).min(n_fail);
    let n_pos_total = (n as f64 * opts.rule_positive_fraction).round() as usize;
    let n_pos_succ = n_pos_total.saturating_sub(n_pos_fail).min(succ_idx.len());
    let mut rule_positive = vec![false; n];
    for &i in fail_idx[..n_pos_fail].iter().chain(&succ_idx[..n_pos_succ]) {
        rule_positive[i] = true;
    }

    let generated: Vec<(Recording, ClinicalRecord)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(i as u64 + 1);
            generate_patient(
                &format!("p{:04}", i + 1),
                outcomes[i],
                rule_positive[i],
                params.separability,
                opts,
                &mut rng,
            )
        })
        .collect::<Result<_>>()?;
    Ok(generated.into_iter().unzip())
}

/// Probability that a patient carries any one failure signature.
pub(crate) fn signature_probability(outcome: Outcome, separability: f64, base: f64) -> f64 {
    match outcome {
        Outcome::Failure => base + (1.0 - base) * (1.0 - (-separability).exp()),
        _ => base,
    }
}

#[derive(Debug, Clone, Copy)]
struct Episode {
    start: f64,
    dur: f64,
}

/// Raised-cosine membership in `[0, 1]` of each sample in a set of episodes.
fn paint(episodes: &[Episode], fs: f64, n: usize, ramp: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for ep in episodes {
        let ramp = ramp.min(ep.dur / 2.0);
        let a = (ep.start * fs).floor().max(0.0) as usize;
        let b = (((ep.start + ep.dur) * fs).ceil() as usize).min(n);
        for (i, slot) in w.iter_mut().enumerate().take(b).skip(a) {
            let t = i as f64 / fs - ep.start;
            let edge = t.min(ep.dur - t);
            let v = if edge <= 0.0 {
                0.0
            } else if edge >= ramp {
                1.0
            } else {
                0.5 - 0.5 * (PI * edge / ramp).cos()
            };
            *slot = f64::max(*slot, v);
        }
    }
    w
}

fn episodes(
    rng: &mut impl Rng,
    count: std::ops::RangeInclusive<usize>,
    dur: (f64, f64),
    within: Span,
) -> Vec<Episode> {
    let k = rng.random_range(count);
    (0..k)
        .map(|_| {
            let dur = rng.random_range(dur.0..dur.1);
            let latest = (within.end_s - dur).max(within.start_s + 1e-3);
            Episode {
                start: rng.random_range(within.start_s..latest),
                dur,
            }
        })
        .collect()
}

/// Gaussian-wave PQRST template; offsets and widths in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgMorphology {
    /// `(offset_s, amplitude, sigma_s)` per wave.
    pub waves: Vec<(f64, f64, f64)>,
}

impl Default for EcgMorphology {
    fn default() -> Self {
        EcgMorphology {
            waves: vec![
                (-0.12, 0.12, 0.02),
                (-0.025, -0.12, 0.008),
                (0.0, 1.0, 0.01),
                (0.025, -0.25, 0.008),
                (0.2, 0.3, 0.04),
            ],
        }
    }
}

/// Noise-free ECG with R-wave apexes at `beats` (seconds).
pub fn synthetic_ecg(beats: &[f64], fs: f64, n_samples: usize, morphology: &EcgMorphology) -> Vec<f64> {
    let mut x = vec![0.0; n_samples];
    for &beat in beats {
        for &(offset, amp, sigma) in &morphology.waves {
            let center = beat + offset;
            let a = ((center - 5.0 * sigma) * fs).floor().max(0.0) as usize;
            let b = (((center + 5.0 * sigma) * fs).ceil().max(0.0) as usize).min(n_samples);
            for (i, v) in x.iter_mut().enumerate().take(b).skip(a) {
                let d = (i as f64 / fs - center) / sigma;
                *v += amp * (-0.5 * d * d).exp();
            }
        }
    }
    x
}

fn generate_patient(
    id: &str,
    outcome: Outcome,
    rule_positive: bool,
    separability: f64,
    opts: &SynthOptions,
    rng: &mut ChaCha8Rng,
) -> Result<(Recording, ClinicalRecord)> {
    let fs = opts.source_rate_hz;
    let total = opts.imv_s + opts.ettcpap_s;
    let n = (total * fs).round() as usize;
    let ett = Span::new(opts.imv_s, total);
    // events land after the transition half-minute of ETT-CPAP
    let event_window = Span::new(ett.start_s + 30.0, ett.end_s - 5.0);
    let shown = if rule_positive { Outcome::Success } else { outcome };
    let p_sig = signature_probability(shown, separability, opts.base_signature_rate);
    let has_pauses = rng.random_bool(p_sig);
    let has_async = rng.random_bool(p_sig);
    let has_brady = rng.random_bool(p_sig);
    let has_desat = rng.random_bool(p_sig);
    let white = Normal::new(0.0, 1.0).expect("unit normal");

    // breathing
    let f_breath = rng.random_range(0.6..1.2);
    let fm_period = rng.random_range(20.0..60.0);
    let fm_phase = rng.random_range(0.0..2.0 * PI);
    let amp_rc = rng.random_range(0.6..1.4);
    let amp_ab = rng.random_range(0.6..1.4);
    let am_period = rng.random_range(15.0..45.0);
    let theta_base: f64 = if has_async {
        rng.random_range(50.0..80.0)
    } else {
        rng.random_range(5.0..35.0)
    };
    let pauses = if has_pauses {
        episodes(rng, 3..=6, (5.0, 15.0), event_window)
    } else {
        episodes(rng, 0..=1, (3.0, 6.0), event_window)
    };
    let async_eps = if has_async {
        episodes(rng, 3..=6, (10.0, 25.0), event_window)
    } else {
        Vec::new()
    };
    let theta_episode = rng.random_range(120.0..170.0);
    let movements = episodes(rng, 0..=3, (4.0, 10.0), Span::new(5.0, total - 5.0));
    let mvt_freq = rng.random_range(0.1..0.3);
    let mvt_amp = rng.random_range(2.0..4.0);
    let mvt_phase = rng.random_range(0.0..2.0 * PI);

    let w_pause = paint(&pauses, fs, n, 0.5);
    let w_async = paint(&async_eps, fs, n, 1.0);
    let w_mvt = paint(&movements, fs, n, 0.5);

    let mut rcg = Vec::with_capacity(n);
    let mut abd = Vec::with_capacity(n);
    let mut breath_phase = Vec::with_capacity(n);
    let mut phase = rng.random_range(0.0..2.0 * PI);
    for i in 0..n {
        let t = i as f64 / fs;
        let f = f_breath * (1.0 + 0.1 * (2.0 * PI * t / fm_period + fm_phase).sin());
        phase += 2.0 * PI * f / fs;
        breath_phase.push(phase);
        let am = 1.0 + 0.2 * (2.0 * PI * t / am_period).sin();
        let env = 1.0 - 0.98 * w_pause[i];
        let theta = (theta_base + w_async[i] * (theta_episode - theta_base)).to_radians();
        let movement = w_mvt[i] * mvt_amp * (2.0 * PI * mvt_freq * t + mvt_phase).sin();
        rcg.push(amp_rc * am * env * (phase + theta).sin() + movement + 0.03 * white.sample(rng));
        abd.push(amp_ab * am * env * phase.sin() + 0.8 * movement + 0.03 * white.sample(rng));
    }

    // cardiac
    let hr_base = rng.random_range(130.0..170.0);
    let brady = if has_brady {
        episodes(rng, 2..=4, (6.0, 15.0), event_window)
    } else {
        Vec::new()
    };
    let hr_brady = rng.random_range(70.0..90.0);
    let w_brady = paint(&brady, fs, n, 1.0);
    let mut beats = Vec::new();
    let mut tb = rng.random_range(0.0..60.0 / hr_base);
    while tb < total {
        beats.push(tb);
        let i = ((tb * fs) as usize).min(n - 1);
        let hr = hr_base * (1.0 + 0.02 * breath_phase[i].sin()) * (1.0 - w_brady[i]) + hr_brady * w_brady[i];
        tb += 60.0 / hr * (1.0 + 0.01 * white.sample(rng));
    }
    let morph = EcgMorphology::default();
    let ecg_gain = rng.random_range(0.8..1.2);
    let wander_phase = rng.random_range(0.0..2.0 * PI);
    let ecg: Vec<f64> = synthetic_ecg(&beats, fs, n, &morph)
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let t = i as f64 / fs;
            ecg_gain * v + 0.15 * (2.0 * PI * 0.3 * t + wander_phase).sin() + 0.02 * white.sample(rng)
        })
        .collect();

    let pulse = EcgMorphology {
        waves: vec![(0.18, 1.0, 0.07), (0.38, 0.35, 0.06)],
    };
    let ppg_gain = rng.random_range(0.7..1.3);
    let ppg: Vec<f64> = synthetic_ecg(&beats, fs, n, &pulse)
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let t = i as f64 / fs;
            let movement = w_mvt[i] * 1.5 * mvt_amp * (2.0 * PI * mvt_freq * t + mvt_phase).cos();
            ppg_gain * v + 0.1 * breath_phase[i].sin() + movement + 0.01 * white.sample(rng)
        })
        .collect();

    // saturation
    let sat_base = rng.random_range(93.0..98.0);
    let sat_period = rng.random_range(40.0..90.0);
    let sat_phase = rng.random_range(0.0..2.0 * PI);
    let (desats, nadir) = if has_desat {
        (episodes(rng, 2..=4, (10.0, 30.0), event_window), rng.random_range(75.0..84.0))
    } else if rng.random_bool(0.3) {
        (episodes(rng, 1..=1, (10.0, 20.0), event_window), rng.random_range(88.0..91.0))
    } else {
        (Vec::new(), sat_base)
    };
    let w_desat = paint(&desats, fs, n, 4.0);
    let sat: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let base = sat_base + 0.8 * (2.0 * PI * t / sat_period + sat_phase).sin();
            (base - w_desat[i] * (base - nadir)).min(100.0)
        })
        .collect();

    let (ga, bw) = clinical_values(rule_positive, rng);
    let recording = Recording::new(
        id,
        0.0,
        [
            (ChannelKind::Rcg, Channel::new(rcg, fs)),
            (ChannelKind::Abd, Channel::new(abd, fs)),
            (ChannelKind::Ecg, Channel::new(ecg, fs)),
            (ChannelKind::Ppg, Channel::new(ppg, fs)),
            (ChannelKind::Sat, Channel::new(sat, fs)),
        ],
        EpochSpec {
            imv: Span::new(0.0, opts.imv_s),
            ettcpap: ett,
        },
    )?;
    let clinical = ClinicalRecord::new(id, bw, ga, outcome)?;
    Ok((recording, clinical))
}

/// `(ga_weeks, bw_g)`; rule-positive means GA >= 27 weeks or BW > 1000 g.
fn clinical_values(rule_positive: bool, rng: &mut impl Rng) -> (f64, f64) {
    let tenth = |v: f64| (v * 10.0).floor() / 10.0;
    if !rule_positive {
        (tenth(rng.random_range(23.0..27.0)), rng.random_range(450.0..1000.0f64).round())
    } else if rng.random_bool(0.7) {
        (tenth(rng.random_range(27.0..30.0)), rng.random_range(800.0..1250.0f64).round())
    } else {
        (tenth(rng.random_range(25.0..27.0)), rng.random_range(1001.0..1250.0f64).round())
    }
}
