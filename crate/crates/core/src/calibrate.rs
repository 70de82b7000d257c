//! Threshold calibration from a noise-only or idle recording.
//!
//! Each threshold is `margin × p99` of the matching idle statistic, floored
//! at [`THRESHOLD_FLOOR`]:
//!
//! * spectral threshold: DC-excluded bin magnitudes of mean-removed,
//!   Hann-windowed detector windows over every tap of interest,
//! * magnitude threshold: `|X − mean(X)|` per tap, so a static reflector
//!   does not inflate the noise estimate,
//! * magnitude-std threshold: sample std of tap magnitudes over the
//!   tracker's std window.
//!
//! The slider gain is set so a 10 cm hand travel spans the full level range.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::framing::{tap_series, TapFrame};
use crate::pipeline::PipelineConfig;
use crate::slider::{alpha_for_travel, sample_std};
use crate::twofinger::{band_sets, spectrum};

pub const DEFAULT_MARGIN: f64 = 2.0;
pub const THRESHOLD_FLOOR: f64 = 1e-9;
pub const FULL_SCALE_TRAVEL: f64 = 0.10;
const PERCENTILE: f64 = 0.99;

/// Idle statistics before the margin is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    pub spectral_p99: f64,
    pub magnitude_p99: f64,
    pub std_p99: f64,
    pub windows: usize,
}

/// Nearest-rank percentile; `q` in `[0, 1]`. Zero for an empty slice.
pub fn percentile(values: &mut [f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let rank = (q * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

pub fn noise_stats(frames: &[TapFrame], cfg: &PipelineConfig, sample_rate: f64) -> Result<NoiseStats> {
    let det = &cfg.detector;
    if frames.len() < det.window_len {
        return Err(invalid(format!("calibration needs at least {} frames, got {}", det.window_len, frames.len())));
    }
    let toi = cfg.taps_of_interest;
    let mut bins = Vec::new();
    let mut deviations = Vec::new();
    let mut stds = Vec::new();
    let mut windows = 0;

    for tap in 0..toi {
        let series = tap_series(frames, tap)?;
        let mean = series.iter().sum::<Complex64>() / series.len() as f64;
        deviations.extend(series.iter().map(|x| (x - mean).norm()));

        let mags: Vec<f64> = series.iter().map(|x| x.norm()).collect();
        stds.extend(mags.windows(cfg.tracker.std_window.max(2)).map(sample_std));

        let mut start = 0;
        while start + det.window_len <= series.len() {
            let w = &series[start..start + det.window_len];
            let m = w.iter().sum::<Complex64>() / w.len() as f64;
            let centered: Vec<Complex64> = w.iter().map(|x| x - m).collect();
            let spec = spectrum(&centered, sample_rate)?;
            let (pos, neg) = band_sets(&spec.freqs, det.dc_exclusion_hz);
            bins.extend(pos.iter().chain(&neg).map(|&i| spec.bins[i].norm()));
            windows += 1;
            start += det.hop;
        }
    }
    Ok(NoiseStats {
        spectral_p99: percentile(&mut bins, PERCENTILE),
        magnitude_p99: percentile(&mut deviations, PERCENTILE),
        std_p99: percentile(&mut stds, PERCENTILE),
        windows,
    })
}

/// Returns `base` with calibrated thresholds and slider gain.
pub fn calibrate(
    frames: &[TapFrame],
    base: &PipelineConfig,
    sample_rate: f64,
    margin: f64,
) -> Result<(PipelineConfig, NoiseStats)> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(invalid("margin must be > 0"));
    }
    base.validate()?;
    let stats = noise_stats(frames, base, sample_rate)?;
    let mut cfg = *base;
    let scaled = |x: f64| (margin * x).max(THRESHOLD_FLOOR);
    cfg.detector.spectral_threshold = scaled(stats.spectral_p99);
    cfg.tracker.magnitude_threshold = scaled(stats.magnitude_p99);
    cfg.tracker.std_threshold = scaled(stats.std_p99);
    cfg.tracker.alpha =
        alpha_for_travel(FULL_SCALE_TRAVEL, cfg.tracker.range, cfg.wavelength_m, cfg.samples_per_slope());
    cfg.validate()?;
    Ok((cfg, stats))
}
