//! Spectral and envelope features for complex (I/Q) radar frames.
//!
//! Conventions used throughout: natural-log entropies, power spectra from
//! unnormalized FFTs, and zero-signal inputs mapping to 0 so downstream
//! models never see NaN.

pub mod io;

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_signal, write_signal, SignalMeta};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("frame has {len} samples but the window needs {window}")]
    FrameTooShort { len: usize, window: usize },
    #[error("no spectrum bins fall inside [{lo}, {hi}] Hz")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("signal file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalFrame {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl SignalFrame {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self, DspError> {
        if samples.is_empty() {
            return Err(DspError::InvalidArgument("frame is empty".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(DspError::InvalidArgument(format!("sample rate {sample_rate} must be positive")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { samples: self.samples.iter().map(|s| s * c).collect(), sample_rate: self.sample_rate }
    }

    /// Amplitude envelope `|x[n]|`.
    pub fn envelope(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm()).collect()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT (unnormalized).
pub fn fft_in_place(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// Periodic Hann window, `0.5 - 0.5 cos(2 pi n / len)`.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).collect()
}

/// Signed frequency of FFT bin `k` out of `n`.
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let signed = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    signed * sample_rate / n as f64
}

/// Magnitude STFT, frames in rows, all `window_len` FFT bins in columns
/// (natural FFT order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    magnitudes: Vec<f64>,
    frames: usize,
    window_len: usize,
    hop: usize,
    fft_len: usize,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.fft_len
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.magnitudes[t * self.fft_len..(t + 1) * self.fft_len]
    }

    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.magnitudes[t * self.fft_len + f]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.magnitudes
    }

    /// First global maximum in row-major order.
    pub fn peak(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &m) in self.magnitudes.iter().enumerate() {
            if m > self.magnitudes[best] {
                best = i;
            }
        }
        (best / self.fft_len, best % self.fft_len)
    }

    /// Mean magnitude over a `ceil(ratio*T) x ceil(ratio*F)` block centred on
    /// the peak, shifted to stay inside the matrix.
    pub fn neighborhood_mean(&self, ratio: f64) -> Result<f64, DspError> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(DspError::InvalidArgument(format!("neighborhood ratio {ratio} outside (0, 1]")));
        }
        let (pt, pf) = self.peak();
        let (t0, lt) = centered_span(pt, self.frames, ratio);
        let (f0, lf) = centered_span(pf, self.fft_len, ratio);
        let mut sum = 0.0;
        for t in t0..t0 + lt {
            sum += self.row(t)[f0..f0 + lf].iter().sum::<f64>();
        }
        Ok(sum / (lt * lf) as f64)
    }
}

fn centered_span(center: usize, total: usize, ratio: f64) -> (usize, usize) {
    let len = ((ratio * total as f64).ceil() as usize).clamp(1, total);
    let start = center.saturating_sub(len / 2).min(total - len);
    (start, len)
}

pub fn stft(frame: &SignalFrame, window_len: usize, hop: usize) -> Result<Spectrogram, DspError> {
    if window_len == 0 || hop == 0 {
        return Err(DspError::InvalidArgument("window length and hop must be positive".into()));
    }
    let n = frame.len();
    if window_len > n {
        return Err(DspError::FrameTooShort { len: n, window: window_len });
    }
    let frames = (n - window_len) / hop + 1;
    let window = hann(window_len);
    let mut magnitudes = Vec::with_capacity(frames * window_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); window_len];
    for t in 0..frames {
        let seg = &frame.samples[t * hop..t * hop + window_len];
        for ((b, s), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = s * w;
        }
        fft_in_place(&mut buf);
        magnitudes.extend(buf.iter().map(|c| c.norm()));
    }
    Ok(Spectrogram { magnitudes, frames, window_len, hop, fft_len: window_len })
}

/// Per-bin mean magnitude over time.
pub fn stft_marginal_spectrum(spec: &Spectrogram) -> Vec<f64> {
    let mut out = vec![0.0; spec.bins()];
    for t in 0..spec.frames() {
        for (o, m) in out.iter_mut().zip(spec.row(t)) {
            *o += m;
        }
    }
    out.iter_mut().for_each(|o| *o /= spec.frames() as f64);
    out
}

fn shannon(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h: f64 = weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Entropy of the Doppler power spectrum, estimated by averaging
/// rectangular-window periodograms over the non-overlapping `fft_len`
/// segments of the frame.
pub fn doppler_spectral_entropy(frame: &SignalFrame, fft_len: usize) -> Result<f64, DspError> {
    if fft_len == 0 {
        return Err(DspError::InvalidArgument("fft length must be positive".into()));
    }
    if frame.len() < fft_len {
        return Err(DspError::FrameTooShort { len: frame.len(), window: fft_len });
    }
    let mut power = vec![0.0; fft_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    for seg in frame.samples.chunks_exact(fft_len) {
        buf.copy_from_slice(seg);
        fft_in_place(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
    }
    Ok(shannon(&power))
}

/// Entropy of the amplitude histogram with `intervals` equal-width bins
/// spanning `[min, max]` of the envelope.
pub fn tie_from_envelope(envelope: &[f64], intervals: usize) -> Result<f64, DspError> {
    if intervals < 2 {
        return Err(DspError::InvalidArgument(format!("need at least 2 intervals, got {intervals}")));
    }
    let (lo, hi) = envelope.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if envelope.is_empty() || hi <= lo {
        return Ok(0.0);
    }
    let mut counts = vec![0.0; intervals];
    let width = hi - lo;
    for &v in envelope {
        let idx = (((v - lo) / width) * intervals as f64) as usize;
        counts[idx.min(intervals - 1)] += 1.0;
    }
    Ok(shannon(&counts))
}

pub fn time_information_entropy(frame: &SignalFrame, intervals: usize) -> Result<f64, DspError> {
    tie_from_envelope(&frame.envelope(), intervals)
}

/// Whole-frame power spectrum `|X[k]|^2` with signed bin frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub power: Vec<f64>,
    pub freqs: Vec<f64>,
    pub sample_rate: f64,
}

impl PowerSpectrum {
    pub fn of(frame: &SignalFrame) -> Self {
        let mut buf = frame.samples.clone();
        fft_in_place(&mut buf);
        let n = buf.len();
        Self {
            power: buf.iter().map(|c| c.norm_sqr()).collect(),
            freqs: (0..n).map(|k| bin_frequency(k, n, frame.sample_rate)).collect(),
            sample_rate: frame.sample_rate,
        }
    }

    /// Peak-to-mean power over bins with frequency in `[lo, hi]`.
    pub fn fpar(&self, lo: f64, hi: f64) -> Result<f64, DspError> {
        let nyq = self.sample_rate / 2.0;
        if !(lo < hi) || lo < -nyq || hi > nyq {
            return Err(DspError::InvalidArgument(format!(
                "band [{lo}, {hi}] Hz must be increasing and within +/-{nyq} Hz"
            )));
        }
        let (mut max, mut sum, mut count) = (0.0f64, 0.0, 0usize);
        for (p, f) in self.power.iter().zip(&self.freqs) {
            if *f >= lo && *f <= hi {
                max = max.max(*p);
                sum += p;
                count += 1;
            }
        }
        if count == 0 {
            return Err(DspError::EmptyBand { lo, hi });
        }
        if sum <= 0.0 {
            return Ok(0.0);
        }
        Ok(max / (sum / count as f64))
    }
}

pub fn fpar(frame: &SignalFrame, lo: f64, hi: f64) -> Result<f64, DspError> {
    PowerSpectrum::of(frame).fpar(lo, hi)
}

pub fn stftm(frame: &SignalFrame, ratio: f64, window_len: usize, hop: usize) -> Result<f64, DspError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(DspError::InvalidArgument(format!("neighborhood ratio {ratio} outside (0, 1]")));
    }
    stft(frame, window_len, hop)?.neighborhood_mean(ratio)
}

/// Circular standard deviation `sqrt(-2 ln R)` of the sample phases, where
/// `R` is the mean resultant length. Zero-magnitude samples carry no phase
/// and are skipped.
pub fn angle_stat(frame: &SignalFrame) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut n = 0usize;
    for s in &frame.samples {
        let m = s.norm();
        if m > 0.0 {
            acc += s / m;
            n += 1;
        }
    }
    if n == 0 {
        return 0.0;
    }
    let r = (acc.norm() / n as f64).clamp(f64::MIN_POSITIVE, 1.0);
    (-2.0 * r.ln()).max(0.0).sqrt()
}

/// Named feature values in a fixed order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(pairs: impl IntoIterator<Item = (&'static str, f64)>) -> Self {
        let (names, values) = pairs.into_iter().map(|(n, v)| (n.to_owned(), v)).unzip();
        Self { names, values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize, bin: usize, fft: usize) -> SignalFrame {
        let w = 2.0 * PI * bin as f64 / fft as f64;
        SignalFrame::new((0..n).map(|i| Complex64::from_polar(1.0, w * i as f64)).collect(), 1000.0).unwrap()
    }

    fn zeros(n: usize) -> SignalFrame {
        SignalFrame::new(vec![Complex64::new(0.0, 0.0); n], 1000.0).unwrap()
    }

    #[test]
    fn frame_validation() {
        assert!(SignalFrame::new(vec![], 1.0).is_err());
        assert!(SignalFrame::new(vec![Complex64::new(1.0, 0.0)], 0.0).is_err());
    }

    #[test]
    fn stft_frame_count() {
        let s = stft(&zeros(1024), 128, 64).unwrap();
        assert_eq!(s.frames(), 15);
        assert_eq!(s.bins(), 128);
        assert!(s.as_slice().iter().all(|&m| m == 0.0));
        assert!(matches!(stft(&zeros(64), 128, 64), Err(DspError::FrameTooShort { .. })));
    }

    #[test]
    fn stft_tone_is_concentrated() {
        let s = stft(&tone(1024, 10, 128), 128, 64).unwrap();
        for t in 0..s.frames() {
            let row = s.row(t);
            let peak = row.iter().cloned().fold(0.0, f64::max);
            assert_eq!(row[10], peak);
            let off_lobe = row.iter().enumerate().filter(|(k, _)| k.abs_diff(10) > 1).map(|(_, m)| *m).fold(0.0, f64::max);
            assert!(peak / off_lobe.max(1e-300) > 100.0);
        }
    }

    #[test]
    fn marginal_of_single_frame_is_that_frame() {
        let f = tone(128, 3, 128);
        let s = stft(&f, 128, 1).unwrap();
        assert_eq!(s.frames(), 1);
        assert_eq!(stft_marginal_spectrum(&s), s.row(0));
    }

    #[test]
    fn zero_conventions() {
        let z = zeros(512);
        assert_eq!(doppler_spectral_entropy(&z, 256).unwrap(), 0.0);
        assert_eq!(time_information_entropy(&z, 8).unwrap(), 0.0);
        assert_eq!(fpar(&z, 0.0, 400.0).unwrap(), 0.0);
        assert_eq!(stftm(&z, 0.5, 128, 64).unwrap(), 0.0);
        assert_eq!(angle_stat(&z), 0.0);
    }

    #[test]
    fn tone_entropy_is_small() {
        let h = doppler_spectral_entropy(&tone(1024, 17, 256), 256).unwrap();
        assert!(h <= 0.2, "{h}");
    }

    #[test]
    fn tie_staircase_hits_every_bin() {
        // Eight amplitude levels, one per histogram bin; the top level lands on max.
        let env: Vec<f64> = (0..64).map(|i| 1.0 + (i % 8) as f64).collect();
        let h = tie_from_envelope(&env, 8).unwrap();
        assert!((h - 8f64.ln()).abs() < 1e-6);
        assert!(tie_from_envelope(&env, 1).is_err());
        assert_eq!(tie_from_envelope(&[2.0; 10], 4).unwrap(), 0.0);
    }

    #[test]
    fn fpar_flat_and_tone() {
        let mut impulse = vec![Complex64::new(0.0, 0.0); 256];
        impulse[0] = Complex64::new(1.0, 0.0);
        let flat = SignalFrame::new(impulse, 1000.0).unwrap();
        assert!((fpar(&flat, -500.0, 500.0).unwrap() - 1.0).abs() < 1e-9);
        let t = tone(256, 20, 256);
        // 128 bins from 0 Hz up to just below Nyquist.
        let v = fpar(&t, 0.0, 499.0).unwrap();
        assert!(v >= 50.0, "{v}");
        assert!(fpar(&t, 0.0, 600.0).is_err());
        assert!(matches!(fpar(&t, 1.0, 2.0), Err(DspError::EmptyBand { .. })));
    }

    #[test]
    fn stftm_full_ratio_is_global_mean() {
        let t = tone(1024, 10, 128);
        let s = stft(&t, 128, 64).unwrap();
        let mean = s.as_slice().iter().sum::<f64>() / s.as_slice().len() as f64;
        assert!((stftm(&t, 1.0, 128, 64).unwrap() - mean).abs() < 1e-9);
        assert!(stftm(&t, 0.1, 128, 64).unwrap() > stftm(&t, 1.0, 128, 64).unwrap());
        assert!(stftm(&t, 0.0, 128, 64).is_err());
    }

    #[test]
    fn angle_constant_phase_and_single_sample() {
        let f = SignalFrame::new(vec![Complex64::from_polar(2.0, 0.7); 100], 1.0).unwrap();
        assert!(angle_stat(&f) < 1e-6);
        let one = SignalFrame::new(vec![Complex64::new(0.3, -0.2)], 1.0).unwrap();
        assert_eq!(angle_stat(&one), 0.0);
    }

    #[test]
    fn bin_frequencies_are_signed() {
        assert_eq!(bin_frequency(0, 8, 8.0), 0.0);
        assert_eq!(bin_frequency(3, 8, 8.0), 3.0);
        assert_eq!(bin_frequency(4, 8, 8.0), -4.0);
        assert_eq!(bin_frequency(7, 8, 8.0), -1.0);
    }
}
