//! Signal-processing primitives shared by the metric engines, the QRS
//! detector and the resampler.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// One second-order section, normalized so that `a0 == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn from_raw(b: [f64; 3], a: [f64; 3]) -> Self {
        Biquad {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form-II state that makes a constant input `x`
    /// pass without transient.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        [y - self.b[0] * x, self.b[2] * x - self.a[1] * y]
    }

    #[inline]
    fn step(&self, x: f64, s: &mut [f64; 2]) -> f64 {
        let y = self.b[0] * x + s[0];
        s[0] = self.b[1] * x - self.a[0] * y + s[1];
        s[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

fn butterworth_q(order: usize) -> impl Iterator<Item = f64> {
    (1..=order / 2).map(move |k| {
        let theta = PI * (2 * k - 1) as f64 / (2 * order) as f64;
        1.0 / (2.0 * theta.sin())
    })
}

/// Even-order Butterworth low-pass as a cascade of bilinear-transformed sections.
pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Vec<Biquad> {
    assert!(order >= 2 && order.is_multiple_of(2), "order must be even");
    let w0 = 2.0 * PI * cutoff_hz / fs;
    let (sin, cos) = w0.sin_cos();
    butterworth_q(order)
        .map(|q| {
            let alpha = sin / (2.0 * q);
            Biquad::from_raw(
                [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
                [1.0 + alpha, -2.0 * cos, 1.0 - alpha],
            )
        })
        .collect()
}

/// Even-order Butterworth high-pass.
pub fn butter_highpass(order: usize, cutoff_hz: f64, fs: f64) -> Vec<Biquad> {
    assert!(order >= 2 && order.is_multiple_of(2), "order must be even");
    let w0 = 2.0 * PI * cutoff_hz / fs;
    let (sin, cos) = w0.sin_cos();
    butterworth_q(order)
        .map(|q| {
            let alpha = sin / (2.0 * q);
            Biquad::from_raw(
                [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
                [1.0 + alpha, -2.0 * cos, 1.0 - alpha],
            )
        })
        .collect()
}

fn sos_filter_in_place(sections: &[Biquad], x: &mut [f64]) {
    let Some(&first) = x.first() else { return };
    let mut level = first;
    for sec in sections {
        let mut s = sec.steady_state(level);
        level *= sec.dc_gain();
        for v in x.iter_mut() {
            *v = sec.step(*v, &mut s);
        }
    }
}

/// Zero-phase forward-backward filtering with odd-reflection padding of
/// `padlen` samples at both ends (clipped to the signal length).
pub fn sosfiltfilt(sections: &[Biquad], x: &[f64], padlen: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = padlen.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    sos_filter_in_place(sections, &mut ext);
    ext.reverse();
    sos_filter_in_place(sections, &mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Padding long enough for the impulse response of an `order`-pole filter
/// with corner `cutoff_hz` to decay.
pub fn default_padlen(order: usize, cutoff_hz: f64, fs: f64) -> usize {
    (order as f64 * fs / cutoff_hz).ceil() as usize
}

/// Recursive DFT of a trailing rectangular window evaluated at arbitrary
/// frequencies.
///
/// For a window of `n` samples ending at `t`, the coefficient at frequency
/// `f` is `sum_m x[t-n+1+m] * exp(-i 2 pi f m / fs)`. The recursion is
/// re-anchored against a direct evaluation every few windows so that rounding
/// drift stays bounded.
pub struct SlidingDft {
    n: usize,
    freqs: Vec<f64>,
    advance: Vec<Complex64>,
    entry: Vec<Complex64>,
    kernel: Vec<Complex64>,
}

const RESYNC_WINDOWS: usize = 4;

impl SlidingDft {
    pub fn new(n: usize, fs: f64, freqs: Vec<f64>) -> Self {
        assert!(n > 0);
        let omega: Vec<f64> = freqs.iter().map(|f| 2.0 * PI * f / fs).collect();
        let advance = omega.iter().map(|w| Complex64::from_polar(1.0, *w)).collect();
        let entry = omega
            .iter()
            .map(|w| Complex64::from_polar(1.0, -w * n as f64))
            .collect();
        let mut kernel = Vec::with_capacity(n * freqs.len());
        for w in &omega {
            kernel.extend((0..n).map(|m| Complex64::from_polar(1.0, -w * m as f64)));
        }
        SlidingDft {
            n,
            freqs,
            advance,
            entry,
            kernel,
        }
    }

    pub fn window_len(&self) -> usize {
        self.n
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    fn direct(&self, window: &[f64], out: &mut [Complex64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let k = &self.kernel[j * self.n..(j + 1) * self.n];
            *o = window.iter().zip(k).map(|(x, e)| e * x).sum();
        }
    }

    /// Calls `visit(t, coeffs)` for every `t >= n - 1`.
    pub fn run(&self, x: &[f64], mut visit: impl FnMut(usize, &[Complex64])) {
        let n = self.n;
        if x.len() < n {
            return;
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.freqs.len()];
        self.direct(&x[..n], &mut coeffs);
        visit(n - 1, &coeffs);
        for t in n..x.len() {
            if (t - n + 1).is_multiple_of(RESYNC_WINDOWS * n) {
                self.direct(&x[t + 1 - n..=t], &mut coeffs);
            } else {
                let old = x[t - n];
                let new = x[t];
                for j in 0..coeffs.len() {
                    coeffs[j] = self.advance[j] * (coeffs[j] - old + self.entry[j] * new);
                }
            }
            visit(t, &coeffs);
        }
    }
}

/// Hann-tapered power spectrum of a trailing window, sampled on a uniform
/// frequency grid.
///
/// The grid spacing is one fifth of the window's native resolution so that
/// the Hann taper can be applied as a three-tap combination of rectangular
/// coefficients.
pub struct HannSpectrum {
    dft: SlidingDft,
    /// Number of grid points requested (excludes the taper guard points).
    len: usize,
    guard: usize,
    freqs: Vec<f64>,
    /// DFT of the taper itself, used for per-window mean removal.
    taper_dft: Option<Vec<Complex64>>,
}

const HANN_OVERSAMPLE: usize = 5;

impl HannSpectrum {
    /// Grid covering `[f_lo, f_hi]` (inclusive up to rounding) for a window of
    /// `window_s` seconds.
    pub fn new(fs: f64, window_s: f64, f_lo: f64, f_hi: f64, remove_window_mean: bool) -> Self {
        let n = (window_s * fs).round() as usize;
        let step = fs / n as f64 / HANN_OVERSAMPLE as f64;
        let j_lo = (f_lo / step - 1e-9).ceil() as i64;
        let j_hi = (f_hi / step + 1e-9).floor() as i64;
        let guard = HANN_OVERSAMPLE as i64;
        let all: Vec<f64> = (j_lo - guard..=j_hi + guard)
            .map(|j| j as f64 * step)
            .collect();
        let freqs: Vec<f64> = (j_lo..=j_hi).map(|j| j as f64 * step).collect();
        let taper_dft = remove_window_mean.then(|| {
            let w = hann(n);
            freqs
                .iter()
                .map(|f| {
                    let omega = 2.0 * PI * f / fs;
                    w.iter()
                        .enumerate()
                        .map(|(m, wm)| Complex64::from_polar(*wm, -omega * m as f64))
                        .sum()
                })
                .collect()
        });
        HannSpectrum {
            dft: SlidingDft::new(n, fs, all),
            len: freqs.len(),
            guard: HANN_OVERSAMPLE,
            freqs,
            taper_dft,
        }
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn window_len(&self) -> usize {
        self.dft.window_len()
    }

    /// Calls `visit(t, power)` with `|X_hann(f)|^2` at every grid frequency.
    pub fn run(&self, x: &[f64], mut visit: impl FnMut(usize, &[f64])) {
        let n = self.dft.window_len() as f64;
        let g = self.guard;
        let mut power = vec![0.0; self.len];
        let prefix: Vec<f64> = if self.taper_dft.is_some() {
            std::iter::once(0.0)
                .chain(x.iter().scan(0.0, |acc, v| {
                    *acc += v;
                    Some(*acc)
                }))
                .collect()
        } else {
            Vec::new()
        };
        let w = self.dft.window_len();
        self.dft.run(x, |t, c| {
            let mean = if prefix.is_empty() {
                0.0
            } else {
                (prefix[t + 1] - prefix[t + 1 - w]) / n
            };
            for (j, p) in power.iter_mut().enumerate() {
                let k = j + g;
                let mut v = 0.5 * c[k] - 0.25 * c[k - g] - 0.25 * c[k + g];
                if let Some(w) = &self.taper_dft {
                    v -= w[j] * mean;
                }
                *p = v.norm_sqr();
            }
            visit(t, &power);
        });
    }
}

/// Periodic Hann taper.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|m| 0.5 - 0.5 * (2.0 * PI * m as f64 / n as f64).cos())
        .collect()
}

/// Analytic signal of `x` restricted to the band `[f_lo, f_hi]` Hz, built in
/// the frequency domain over the whole series.
pub fn analytic_bandpass(x: &[f64], fs: f64, f_lo: f64, f_hi: f64) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = fs / n as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k as f64 * df;
        let positive = k > 0 && 2 * k < n;
        *v = if positive && f >= f_lo && f <= f_hi {
            *v * 2.0
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * f * i as f64 / fs + phase).sin())
            .collect()
    }

    #[test]
    fn lowpass_passes_dc_exactly() {
        let sos = butter_lowpass(16, 22.5, 1000.0);
        let y = sosfiltfilt(&sos, &vec![3.25; 2000], default_padlen(16, 22.5, 1000.0));
        for v in y {
            assert!((v - 3.25).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn highpass_blocks_dc() {
        let sos = butter_highpass(2, 5.0, 200.0);
        let y = sosfiltfilt(&sos, &vec![1.0; 1000], 200);
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn sliding_dft_matches_direct_sum() {
        let fs = 50.0;
        let x: Vec<f64> = (0..700).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let freqs = vec![0.0, 0.3, 1.7, -0.125];
        let dft = SlidingDft::new(64, fs, freqs.clone());
        let mut checked = 0;
        dft.run(&x, |t, c| {
            for (j, f) in freqs.iter().enumerate() {
                let w = 2.0 * PI * f / fs;
                let direct: Complex64 = (0..64)
                    .map(|m| Complex64::from_polar(x[t - 63 + m], -w * m as f64))
                    .sum();
                assert!((direct - c[j]).norm() < 1e-9, "t={t} f={f}");
            }
            checked += 1;
        });
        assert_eq!(checked, 700 - 63);
    }

    #[test]
    fn hann_spectrum_peaks_at_tone() {
        let fs = 50.0;
        let x = sine(0.7, fs, 1000, 0.3);
        let spec = HannSpectrum::new(fs, 8.0, 0.0, 2.0, true);
        spec.run(&x, |_, p| {
            let (imax, _) = p
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
            assert!((spec.freqs()[imax] - 0.7).abs() <= 0.025 + 1e-9);
        });
    }

    #[test]
    fn analytic_signal_of_cosine_has_unit_modulus() {
        let fs = 50.0;
        let n = 1000; // 20 s, integer number of cycles at 1 Hz
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / fs).cos()).collect();
        let z = analytic_bandpass(&x, fs, 0.4, 2.0);
        for v in z {
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }
}
