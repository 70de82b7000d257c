//! Two-finger gesture detection from the Doppler spectrum of a tap of
//! interest.
//!
//! Two fingers moving in opposite radial directions put energy on both sides
//! of DC; a single moving target, or a strong static one, does not. Each
//! analysis window is tested with a DC-excluded AND rule over positive and
//! negative bands, windows with fast bulk motion are discarded, and an event
//! fires after `vote_k` consecutive positive windows.

use std::collections::VecDeque;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::framing::{tap_series, TapFrame};
use crate::slider::select_tap_max_magnitude;
use crate::slope::{median_filter, series_slopes, unwrap_phases, SlopeConfig};

/// Spectrum of one window, ordered by ascending frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    /// Bin frequencies in Hz, from −fs/2 upward.
    pub freqs: Vec<f64>,
    pub window_length: usize,
    pub sample_rate: f64,
}

impl Spectrum {
    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.bins.iter().map(|b| b.norm())
    }

    /// Number of bins with `|S_f| ≥ threshold` among `indices`.
    pub fn count_at_least(&self, indices: &[usize], threshold: f64) -> usize {
        indices.iter().filter(|&&i| self.bins[i].norm() >= threshold).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => {
                (0..n).map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).collect()
            }
        }
    }
}

const MIN_SPECTRUM_LEN: usize = 8;

/// Hann-windowed DFT of `series`.
pub fn spectrum(series: &[Complex64], sample_rate: f64) -> Result<Spectrum> {
    spectrum_with(series, sample_rate, WindowKind::Hann)
}

pub fn spectrum_with(series: &[Complex64], sample_rate: f64, window: WindowKind) -> Result<Spectrum> {
    let n = series.len();
    if n < MIN_SPECTRUM_LEN {
        return Err(invalid(format!("spectrum needs at least {MIN_SPECTRUM_LEN} samples, got {n}")));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(invalid("sample rate must be > 0"));
    }
    let mut buf: Vec<Complex64> = series.iter().zip(window.weights(n)).map(|(x, w)| x * w).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let df = sample_rate / n as f64;
    let bins = (0..n).map(|j| buf[(j + n - half) % n]).collect();
    let freqs = (0..n).map(|j| (j as f64 - half as f64) * df).collect();
    Ok(Spectrum { bins, freqs, window_length: n, sample_rate })
}

/// Bin indices with `f > f_th` and with `f < −f_th`.
pub fn band_sets(freqs: &[f64], f_th: f64) -> (Vec<usize>, Vec<usize>) {
    let pos = (0..freqs.len()).filter(|&i| freqs[i] > f_th).collect();
    let neg = (0..freqs.len()).filter(|&i| freqs[i] < -f_th).collect();
    (pos, neg)
}

/// Strong-bin counts in the positive and negative bands.
pub fn band_counts(spec: &Spectrum, threshold: f64, f_th: f64) -> (usize, usize) {
    let (pos, neg) = band_sets(&spec.freqs, f_th);
    (spec.count_at_least(&pos, threshold), spec.count_at_least(&neg, threshold))
}

/// Which discard rules are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscardRules {
    pub phase: bool,
    pub slope: bool,
    pub spectrum: bool,
}

impl DiscardRules {
    pub const ALL: Self = Self { phase: true, slope: true, spectrum: true };
    pub const NONE: Self = Self { phase: false, slope: false, spectrum: false };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub window_len: usize,
    pub hop: usize,
    /// `S_th`: strong-bin magnitude threshold.
    pub spectral_threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// DC exclusion `f_th`, Hz.
    pub dc_exclusion_hz: f64,
    /// `α_th`: largest tolerated phase excursion over a window, rad.
    pub discard_phase: f64,
    /// `s_th`: largest tolerated filtered slope, rad/sample.
    pub discard_slope: f64,
    /// High-frequency edge of the spectral discard bands, Hz.
    pub discard_freq_hz: f64,
    pub discard_n_pos: usize,
    pub discard_n_neg: usize,
    pub vote_k: usize,
    pub rules: DiscardRules,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_len: 128,
            hop: 32,
            // about twice the calibrated idle value for the default radio
            spectral_threshold: 30.0,
            n_pos: 3,
            n_neg: 3,
            dc_exclusion_hz: 10.0,
            discard_phase: std::f64::consts::PI,
            discard_slope: 1.0,
            discard_freq_hz: 100.0,
            discard_n_pos: 8,
            discard_n_neg: 8,
            vote_k: 3,
            rules: DiscardRules::ALL,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < MIN_SPECTRUM_LEN {
            return Err(invalid(format!("detector.window_len must be >= {MIN_SPECTRUM_LEN}")));
        }
        if self.hop == 0 {
            return Err(invalid("detector.hop must be >= 1"));
        }
        if !(self.dc_exclusion_hz.is_finite() && self.dc_exclusion_hz > 0.0) {
            return Err(invalid("detector.dc_exclusion_hz must be > 0"));
        }
        if self.discard_freq_hz.is_nan() || self.discard_freq_hz <= self.dc_exclusion_hz {
            return Err(invalid("detector.discard_freq_hz must exceed dc_exclusion_hz"));
        }
        if !(3..=5).contains(&self.vote_k) {
            return Err(invalid(format!("detector.vote_k must be in 3..=5, got {}", self.vote_k)));
        }
        if [self.spectral_threshold, self.discard_phase, self.discard_slope].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(invalid("detector thresholds must be >= 0"));
        }
        Ok(())
    }
}

/// AND rule over the DC-excluded bands.
pub fn detect_window(spec: &Spectrum, cfg: &DetectorConfig) -> bool {
    let (pos, neg) = band_counts(spec, cfg.spectral_threshold, cfg.dc_exclusion_hz);
    pos >= cfg.n_pos && neg >= cfg.n_neg
}

/// Largest |unwrapped phase − first phase| over the series.
pub fn phase_excursion(series: &[Complex64]) -> f64 {
    let phases: Vec<f64> = series.iter().map(|z| z.arg()).collect();
    let u = unwrap_phases(&phases);
    u.iter().map(|p| (p - u[0]).abs()).fold(0.0, f64::max)
}

/// Discard when the phase wanders more than `alpha_th` from its start.
pub fn discard_by_phase(series: &[Complex64], alpha_th: f64) -> bool {
    !series.is_empty() && phase_excursion(series) > alpha_th
}

/// Discard when any filtered slope exceeds `s_th` in magnitude.
pub fn discard_by_slope(filtered_slopes: &[f64], s_th: f64) -> bool {
    filtered_slopes.iter().any(|s| s.abs() > s_th)
}

/// OR rule over high-frequency bands with elevated counts.
pub fn discard_by_spectrum(spec: &Spectrum, cfg: &DetectorConfig) -> bool {
    let (pos, neg) = band_counts(spec, cfg.spectral_threshold, cfg.discard_freq_hz);
    pos >= cfg.discard_n_pos || neg >= cfg.discard_n_neg
}

/// Outcome of one analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Positive,
    Negative,
    Discarded,
}

/// Consecutive-window voting. Fires once per run of `k` or more positives.
#[derive(Debug, Clone)]
pub struct Voter {
    k: usize,
    run: usize,
}

impl Voter {
    pub fn new(k: usize) -> Self {
        Self { k, run: 0 }
    }

    pub fn run_length(&self) -> usize {
        self.run
    }

    pub fn push(&mut self, verdict: Verdict) -> bool {
        match verdict {
            Verdict::Positive => {
                self.run += 1;
                self.run == self.k
            }
            Verdict::Negative | Verdict::Discarded => {
                self.run = 0;
                false
            }
        }
    }
}

/// Indices of windows at which events fire.
pub fn vote(verdicts: &[Verdict], k: usize) -> Vec<usize> {
    let mut v = Voter::new(k);
    verdicts.iter().enumerate().filter(|(_, &d)| v.push(d)).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiscardFlags {
    pub phase: bool,
    pub slope: bool,
    pub spectrum: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub start_time: f64,
    pub end_time: f64,
    pub tap: usize,
    pub pos_count: usize,
    pub neg_count: usize,
    /// Rules that fired, whether or not they are enabled.
    pub fired: DiscardFlags,
    pub verdict: Verdict,
    pub vote_run: usize,
    pub event: bool,
}

/// Analyses `series` (one tap over one window) without voting.
pub fn analyse_window(
    series: &[Complex64],
    sample_rate: f64,
    cfg: &DetectorConfig,
    slopes: &SlopeConfig,
) -> Result<(Verdict, usize, usize, DiscardFlags)> {
    let mean = series.iter().sum::<Complex64>() / series.len().max(1) as f64;
    let centered: Vec<Complex64> = series.iter().map(|x| x - mean).collect();
    let spec = spectrum(&centered, sample_rate)?;
    let (pos, neg) = band_counts(&spec, cfg.spectral_threshold, cfg.dc_exclusion_hz);

    let usable = series.len() - series.len() % slopes.n_a;
    let filtered = median_filter(&series_slopes(&series[..usable], slopes.n_a)?, slopes.n_m)?;
    let fired = DiscardFlags {
        phase: discard_by_phase(series, cfg.discard_phase),
        slope: discard_by_slope(&filtered, cfg.discard_slope),
        spectrum: discard_by_spectrum(&spec, cfg),
    };
    let r = cfg.rules;
    let verdict = if (r.phase && fired.phase) || (r.slope && fired.slope) || (r.spectrum && fired.spectrum) {
        Verdict::Discarded
    } else if pos >= cfg.n_pos && neg >= cfg.n_neg {
        Verdict::Positive
    } else {
        Verdict::Negative
    };
    Ok((verdict, pos, neg, fired))
}

/// Streaming detector over tap frames: sliding windows of `window_len` frames
/// every `hop` frames, analysed at the strongest tap of the window's center
/// frame.
#[derive(Debug, Clone)]
pub struct TwoFingerDetector {
    cfg: DetectorConfig,
    slopes: SlopeConfig,
    sample_rate: f64,
    taps_of_interest: usize,
    buffer: VecDeque<TapFrame>,
    seen: usize,
    voter: Voter,
}

impl TwoFingerDetector {
    pub fn new(cfg: DetectorConfig, slopes: SlopeConfig, sample_rate: f64, taps_of_interest: usize) -> Result<Self> {
        cfg.validate()?;
        if taps_of_interest == 0 {
            return Err(invalid("taps_of_interest must be >= 1"));
        }
        if cfg.window_len < slopes.n_a {
            return Err(invalid("detector window shorter than one slope group"));
        }
        Ok(Self {
            cfg,
            slopes,
            sample_rate,
            taps_of_interest,
            buffer: VecDeque::with_capacity(cfg.window_len),
            seen: 0,
            voter: Voter::new(cfg.vote_k),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Feeds one frame; returns the window outcome when a window completes.
    pub fn push(&mut self, frame: TapFrame) -> Result<Option<WindowOutcome>> {
        if self.buffer.len() == self.cfg.window_len {
            self.buffer.pop_front();
        }
        self.buffer.push_back(frame);
        self.seen += 1;
        if self.seen < self.cfg.window_len || !(self.seen - self.cfg.window_len).is_multiple_of(self.cfg.hop) {
            return Ok(None);
        }

        let frames = self.buffer.make_contiguous();
        let center = &frames[frames.len() / 2];
        let toi = self.taps_of_interest.min(center.num_taps());
        let tap = select_tap_max_magnitude(&center.taps[..toi]);
        let series = tap_series(frames, tap)?;
        let (start_time, end_time) = (frames[0].timestamp, frames[frames.len() - 1].timestamp);
        let (verdict, pos_count, neg_count, fired) =
            analyse_window(&series, self.sample_rate, &self.cfg, &self.slopes)?;
        let event = self.voter.push(verdict);
        Ok(Some(WindowOutcome {
            start_time,
            end_time,
            tap,
            pos_count,
            neg_count,
            fired,
            verdict,
            vote_run: self.voter.run_length(),
            event,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(n: usize, f: f64, fs: f64, amp: f64) -> Vec<Complex64> {
        (0..n).map(|k| Complex64::from_polar(amp, 2.0 * PI * f * k as f64 / fs)).collect()
    }

    fn direct_dft(x: &[Complex64], w: &[f64], f: f64, fs: f64) -> Complex64 {
        x.iter()
            .zip(w)
            .enumerate()
            .map(|(k, (v, wk))| v * *wk * Complex64::from_polar(1.0, -2.0 * PI * f * k as f64 / fs))
            .sum()
    }

    #[test]
    fn constant_series_is_dc_only() {
        let x = vec![Complex64::new(1.5, -0.5); 64];
        let s = spectrum_with(&x, 500.0, WindowKind::Rectangular).unwrap();
        for (b, f) in s.bins.iter().zip(&s.freqs) {
            if *f == 0.0 {
                assert!((b.norm() - 64.0 * x[0].norm()).abs() < 1e-9);
            } else {
                assert!(b.norm() < 1e-9);
            }
        }
        // Hann keeps it inside the main lobe
        let s = spectrum(&x, 500.0).unwrap();
        for (b, f) in s.bins.iter().zip(&s.freqs) {
            if f.abs() > 500.0 / 64.0 + 1e-9 {
                assert!(b.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn on_bin_tone_concentrates() {
        let fs = 500.0;
        let n = 128;
        let f0 = 10.0 * fs / n as f64;
        let s = spectrum(&tone(n, f0, fs, 1.0), fs).unwrap();
        let total: f64 = s.magnitudes().map(|m| m * m).sum();
        let peak = s.freqs.iter().position(|&f| (f - f0).abs() < 1e-9).unwrap();
        let near: f64 = (peak - 1..=peak + 1).map(|i| s.bins[i].norm_sqr()).sum();
        assert!(near / total >= 0.9);
        let mirror = s.freqs.iter().position(|&f| (f + f0).abs() < 1e-9).unwrap();
        assert!(s.bins[mirror].norm() < 1e-9);
    }

    #[test]
    fn two_tone_matches_direct_dft() {
        let fs = 500.0;
        let n = 100;
        let x: Vec<Complex64> =
            tone(n, 35.0, fs, 1.0).iter().zip(tone(n, -35.0, fs, 0.7)).map(|(a, b)| a + b).collect();
        let s = spectrum(&x, fs).unwrap();
        let w = WindowKind::Hann.weights(n);
        for (b, &f) in s.bins.iter().zip(&s.freqs) {
            assert!((b - direct_dft(&x, &w, f, fs)).norm() < 1e-9);
        }
        let at = |f: f64| s.bins[s.freqs.iter().position(|&g| (g - f).abs() < 1e-9).unwrap()].norm();
        assert!((at(35.0) - 50.0).abs() < 1e-9);
        assert!((at(-35.0) - 35.0).abs() < 1e-9);
    }

    #[test]
    fn short_series_rejected() {
        assert!(spectrum(&[Complex64::new(0.0, 0.0); 7], 500.0).is_err());
    }

    #[test]
    fn band_set_examples() {
        let freqs: Vec<f64> = (0..256).map(|j| (j as f64 - 128.0) * 500.0 / 256.0).collect();
        let (p, n) = band_sets(&freqs, 1e-12);
        assert_eq!((p.len(), n.len()), (127, 128));
        let (p, n) = band_sets(&freqs, 300.0);
        assert!(p.is_empty() && n.is_empty());
        // enumeration oracle at 20 Hz
        let (p, n) = band_sets(&freqs, 20.0);
        let mut ep = 0;
        let mut en = 0;
        for j in 0..256i32 {
            let f = (j - 128) as f64 * 500.0 / 256.0;
            if f > 20.0 {
                ep += 1;
            }
            if f < -20.0 {
                en += 1;
            }
        }
        assert_eq!((p.len(), n.len()), (ep, en));
        assert_eq!((ep, en), (117, 118));
    }

    fn synthetic(pos_bins: &[usize], neg_bins: &[usize]) -> Spectrum {
        let n = 64;
        let freqs: Vec<f64> = (0..n).map(|j| (j as f64 - 32.0) * 500.0 / 64.0).collect();
        let mut bins = vec![Complex64::new(0.1, 0.0); n];
        for &k in pos_bins {
            bins[32 + k] = Complex64::new(50.0, 0.0);
        }
        for &k in neg_bins {
            bins[32 - k] = Complex64::new(0.0, 50.0);
        }
        Spectrum { bins, freqs, window_length: n, sample_rate: 500.0 }
    }

    #[test]
    fn and_rule() {
        let cfg = DetectorConfig { spectral_threshold: 10.0, ..Default::default() };
        assert!(detect_window(&synthetic(&[3, 4, 5, 6, 7], &[3, 4, 5, 6, 7]), &cfg));
        assert!(!detect_window(&synthetic(&[3, 4, 5, 6, 7], &[]), &cfg));
        // bins within the DC exclusion don't count
        assert!(!detect_window(&synthetic(&[1, 3, 4], &[1, 3, 4]), &cfg));
    }

    #[test]
    fn spectral_discard() {
        let cfg = DetectorConfig { spectral_threshold: 10.0, ..Default::default() };
        assert!(!discard_by_spectrum(&synthetic(&[], &[]), &cfg));
        let burst: Vec<usize> = (14..24).collect();
        assert!(discard_by_spectrum(&synthetic(&burst, &[]), &cfg));
        assert!(!discard_by_spectrum(&synthetic(&[3, 4, 5], &[3, 4, 5]), &cfg));
    }

    #[test]
    fn phase_and_slope_discards() {
        assert!(!discard_by_phase(&vec![Complex64::from_polar(1.0, 0.4); 50], 0.5));
        let ramp: Vec<Complex64> = (0..50).map(|k| Complex64::from_polar(1.0, 0.1 * k as f64)).collect();
        assert!(discard_by_phase(&ramp, 3.0));
        assert!(!discard_by_phase(&ramp[..20], 3.0));
        assert!(!discard_by_slope(&[0.0; 10], 0.5));
        assert!(discard_by_slope(&[0.0, 0.0, -0.6], 0.5));
    }

    #[test]
    fn voting() {
        use Verdict::*;
        assert_eq!(vote(&[Positive, Positive, Positive], 3), vec![2]);
        assert!(vote(&[Positive, Positive, Negative, Positive, Positive], 3).is_empty());
        assert!(vote(&[Positive, Positive, Discarded, Positive, Positive], 3).is_empty());
        assert_eq!(vote(&[Positive; 10], 3), vec![2]);
        assert_eq!(
            vote(&[Positive, Positive, Positive, Negative, Positive, Positive, Positive, Positive], 3),
            vec![2, 6]
        );
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        assert!(DetectorConfig { vote_k: 2, ..Default::default() }.validate().is_err());
        assert!(DetectorConfig { dc_exclusion_hz: 0.0, ..Default::default() }.validate().is_err());
        assert!(DetectorConfig { discard_freq_hz: 5.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn detector_window_cadence() {
        let cfg = DetectorConfig { window_len: 16, hop: 4, ..Default::default() };
        let mut d = TwoFingerDetector::new(cfg, SlopeConfig::default(), 500.0, 2).unwrap();
        let mut outcomes = Vec::new();
        for k in 0..40 {
            let f = TapFrame::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0)], k as f64 * 0.002, 0.08);
            if let Some(o) = d.push(f).unwrap() {
                outcomes.push(o);
            }
        }
        // windows end at frames 15, 19, 23, ..., 39
        assert_eq!(outcomes.len(), 7);
        assert!((outcomes[0].end_time - 15.0 * 0.002).abs() < 1e-12);
        assert!((outcomes[1].start_time - 4.0 * 0.002).abs() < 1e-12);
        assert!(outcomes.iter().all(|o| o.tap == 0 && o.verdict == Verdict::Negative));
    }
}
