//! Tap/time reframing, coherent pulse combining and batch assembly.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Nominal packet interval (500 Hz reading rate).
pub const DEFAULT_PACKET_INTERVAL: f64 = 2e-3;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Round-trip range covered by one tap at the given bandwidth.
pub fn tap_spacing_for_bandwidth(bandwidth_hz: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * bandwidth_hz)
}

/// Tap spacing at channel bonding 1 (1.76 GHz), about 8.5 cm.
pub fn cb1_tap_spacing() -> f64 {
    tap_spacing_for_bandwidth(1.76e9)
}

/// Tap spacing at channel bonding 2 (3.52 GHz), about 4.3 cm.
pub fn cb2_tap_spacing() -> f64 {
    tap_spacing_for_bandwidth(3.52e9)
}

/// One complex correlation sample per tap at one packet time.
#[derive(Debug, Clone, PartialEq)]
pub struct TapFrame {
    pub taps: Vec<Complex64>,
    /// Packet time in seconds.
    pub timestamp: f64,
    /// Range covered by one tap, meters.
    pub tap_spacing: f64,
}

impl TapFrame {
    pub fn new(taps: Vec<Complex64>, timestamp: f64, tap_spacing: f64) -> Self {
        Self { taps, timestamp, tap_spacing }
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.taps.iter().map(|t| t.norm())
    }
}

/// Stream geometry shared by every frame of a stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamLayout {
    pub num_taps: usize,
    pub packet_interval: f64,
    pub tap_spacing: f64,
}

/// A run of consecutive frames processed together in one iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub frames: Vec<TapFrame>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.timestamp).collect()
    }

    /// Complex time series of one tap across the batch.
    pub fn tap_series(&self, tap: usize) -> Result<Vec<Complex64>> {
        tap_series(&self.frames, tap)
    }
}

/// Complex time series of `tap` across `frames`.
pub fn tap_series(frames: &[TapFrame], tap: usize) -> Result<Vec<Complex64>> {
    frames
        .iter()
        .map(|f| {
            f.taps.get(tap).copied().ok_or_else(|| invalid(format!("tap {tap} out of range for {} taps", f.num_taps())))
        })
        .collect()
}

/// Sums `N_p` pulse correlations tap by tap. The result keeps the first
/// pulse's timestamp and is not renormalized.
pub fn coherent_combine(pulses: &[TapFrame]) -> Result<TapFrame> {
    let first = pulses.first().ok_or_else(|| invalid("no pulses to combine"))?;
    let n_taps = first.num_taps();
    let mut taps = vec![Complex64::new(0.0, 0.0); n_taps];
    for p in pulses {
        if p.num_taps() != n_taps {
            return Err(invalid(format!("pulse has {} taps, expected {n_taps}", p.num_taps())));
        }
        for (acc, x) in taps.iter_mut().zip(&p.taps) {
            *acc += x;
        }
    }
    Ok(TapFrame::new(taps, first.timestamp, first.tap_spacing))
}

/// Splits a flat correlation-output stream into per-packet tap frames.
///
/// Frame `t` (0-based) holds samples `t·N_T .. (t+1)·N_T` and is stamped
/// `t · packet_interval`.
pub fn reframe(stream: &[Complex64], layout: &StreamLayout) -> Result<Vec<TapFrame>> {
    let n = layout.num_taps;
    if n == 0 {
        return Err(invalid("number of taps must be at least 1"));
    }
    if !stream.len().is_multiple_of(n) {
        return Err(Error::Framing(format!("stream of {} samples is not a multiple of {n} taps", stream.len())));
    }
    Ok(stream
        .chunks_exact(n)
        .enumerate()
        .map(|(t, chunk)| TapFrame::new(chunk.to_vec(), t as f64 * layout.packet_interval, layout.tap_spacing))
        .collect())
}

/// Inverse of [`reframe`].
pub fn flatten(frames: &[TapFrame]) -> Vec<Complex64> {
    frames.iter().flat_map(|f| f.taps.iter().copied()).collect()
}

/// `N_B = N_a · ceil(N_n / N_a)`.
pub fn batch_size(n_new: usize, n_a: usize) -> Result<usize> {
    if n_new == 0 {
        return Err(invalid("N_n must be at least 1"));
    }
    if n_a < 2 {
        return Err(invalid(format!("N_a must be at least 2, got {n_a}")));
    }
    Ok(n_a * n_new.div_ceil(n_a))
}

/// Stream buffer that pads each iteration's new frames with logged frames
/// from previous iterations up to a multiple of `N_a`.
#[derive(Debug, Clone)]
pub struct BatchAssembler {
    n_a: usize,
    depth: usize,
    history: VecDeque<TapFrame>,
}

impl BatchAssembler {
    pub fn new(n_a: usize) -> Result<Self> {
        if n_a < 2 {
            return Err(invalid(format!("N_a must be at least 2, got {n_a}")));
        }
        let depth = 4 * n_a;
        Ok(Self { n_a, depth, history: VecDeque::with_capacity(depth) })
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Builds this iteration's batch from `new` frames and logged history.
    ///
    /// During warm-up, when the log is too short, the batch is the largest
    /// `N_a`-aligned suffix of what is available (possibly empty).
    pub fn assemble(&mut self, new: Vec<TapFrame>) -> Result<Batch> {
        let n_new = new.len();
        let n_b = batch_size(n_new, self.n_a)?;
        let mut last = self.history.back().map(|f| f.timestamp);
        for f in &new {
            if last.is_some_and(|t| f.timestamp <= t) {
                return Err(invalid("frame timestamps must be strictly increasing"));
            }
            last = Some(f.timestamp);
        }

        let wanted_old = n_b - n_new;
        let available = self.history.len() + n_new;
        let take = if self.history.len() >= wanted_old { n_b } else { available - available % self.n_a };

        let mut frames = Vec::with_capacity(take);
        let from_history = take.saturating_sub(n_new);
        let skip_new = n_new.saturating_sub(take);
        frames.extend(self.history.iter().skip(self.history.len() - from_history).cloned());
        frames.extend(new.iter().skip(skip_new).cloned());

        for f in new {
            if self.history.len() == self.depth {
                self.history.pop_front();
            }
            self.history.push_back(f);
        }
        Ok(Batch { frames })
    }
}
