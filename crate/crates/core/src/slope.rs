//! Phase unwrapping, piecewise least-squares slopes and moving-median
//! denoising of the slope stream.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::framing::Batch;

const TAU: f64 = 2.0 * PI;

/// Slope-stage parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeConfig {
    /// Samples per linear fit.
    pub n_a: usize,
    /// Moving-median window, odd.
    pub n_m: usize,
}

impl Default for SlopeConfig {
    fn default() -> Self {
        Self { n_a: 8, n_m: 5 }
    }
}

impl SlopeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(5..=20).contains(&self.n_a) {
            return Err(invalid(format!("n_a must be in 5..=20, got {}", self.n_a)));
        }
        if self.n_m == 0 || self.n_m.is_multiple_of(2) {
            return Err(invalid(format!("n_m must be odd and positive, got {}", self.n_m)));
        }
        Ok(())
    }
}

/// Removes 2π jumps so successive differences fall in (−π, π].
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let d = p - phases[i - 1];
            offset -= TAU * ((d - PI) / TAU).ceil();
        }
        out.push(p + offset);
    }
    out
}

/// Least-squares line through (time, phase) pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    /// Radians per time unit.
    pub slope: f64,
    pub intercept: f64,
    pub mean_time: f64,
    pub mean_phase: f64,
}

/// Centered least-squares fit `phase ≈ slope·t + intercept`.
pub fn linear_fit_slope(phases: &[f64], times: &[f64]) -> Result<LinearFit> {
    if phases.len() != times.len() {
        return Err(invalid(format!("{} phases but {} times", phases.len(), times.len())));
    }
    let n = phases.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 samples, got {n}")));
    }
    let mean_time = times.iter().sum::<f64>() / n as f64;
    let mean_phase = phases.iter().sum::<f64>() / n as f64;
    let (num, den) = times.iter().zip(phases).fold((0.0, 0.0), |(num, den), (&t, &p)| {
        let dt = t - mean_time;
        (num + dt * (p - mean_phase), den + dt * dt)
    });
    if den == 0.0 {
        return Err(Error::DegenerateFit("all sample times are identical".into()));
    }
    let slope = num / den;
    Ok(LinearFit { slope, intercept: mean_phase - slope * mean_time, mean_time, mean_phase })
}

/// Slope in radians per sample using unit-spaced times `1..=N`.
pub fn sample_slope(phases: &[f64]) -> Result<f64> {
    let n = phases.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 samples, got {n}")));
    }
    // t̄ = (n+1)/2, Σ(t−t̄)² = n(n²−1)/12
    let mean_t = (n as f64 + 1.0) / 2.0;
    let den = n as f64 * (n as f64 * n as f64 - 1.0) / 12.0;
    let num: f64 = phases.iter().enumerate().map(|(i, &p)| (i as f64 + 1.0 - mean_t) * p).sum();
    Ok(num / den)
}

/// Raw slopes of a complex tap series, one per `n_a` group, after unwrapping
/// the whole series from its first sample.
pub fn series_slopes(series: &[num_complex::Complex64], n_a: usize) -> Result<Vec<f64>> {
    if n_a < 2 {
        return Err(Error::DegenerateFit(format!("n_a must be at least 2, got {n_a}")));
    }
    let phases: Vec<f64> = series.iter().map(|z| z.arg()).collect();
    let unwrapped = unwrap_phases(&phases);
    unwrapped.chunks_exact(n_a).map(sample_slope).collect()
}

/// Raw slopes of one tap over a batch.
pub fn piecewise_slopes(batch: &Batch, tap: usize, n_a: usize) -> Result<Vec<f64>> {
    if !batch.len().is_multiple_of(n_a.max(1)) {
        return Err(Error::Framing(format!("batch of {} frames is not a multiple of n_a={n_a}", batch.len())));
    }
    series_slopes(&batch.tap_series(tap)?, n_a)
}

/// Streaming exact moving median. Warm-up uses whatever is available.
#[derive(Debug, Clone)]
pub struct MedianFilter {
    window: usize,
    buf: VecDeque<f64>,
    scratch: Vec<f64>,
}

impl MedianFilter {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(invalid("median window must be at least 1"));
        }
        Ok(Self { window, buf: VecDeque::with_capacity(window), scratch: Vec::with_capacity(window) })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back(x);
        self.scratch.clear();
        self.scratch.extend(self.buf.iter().copied());
        self.scratch.sort_by(f64::total_cmp);
        let n = self.scratch.len();
        if n % 2 == 1 {
            self.scratch[n / 2]
        } else {
            0.5 * (self.scratch[n / 2 - 1] + self.scratch[n / 2])
        }
    }

    pub fn reset(&mut self) {
        self.buf.clear();
    }
}

/// Filters a whole raw-slope stream.
pub fn median_filter(raw: &[f64], n_m: usize) -> Result<Vec<f64>> {
    let mut f = MedianFilter::new(n_m)?;
    Ok(raw.iter().map(|&x| f.push(x)).collect())
}

/// Raw and median-filtered slopes of one stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlopeSequence {
    pub raw: Vec<f64>,
    pub filtered: Vec<f64>,
    pub n_a: usize,
    pub n_m: usize,
}

impl SlopeSequence {
    pub fn from_raw(raw: Vec<f64>, n_a: usize, n_m: usize) -> Result<Self> {
        let filtered = median_filter(&raw, n_m)?;
        Ok(Self { raw, filtered, n_a, n_m })
    }
}
