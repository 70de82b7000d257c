//! End-to-end processing: batches → per-tap slopes → median filter → slider,
//! with the two-finger detector fed the same frames.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::framing::{cb1_tap_spacing, BatchAssembler, TapFrame};
use crate::recording::RecordingHeader;
use crate::scene::DEFAULT_WAVELENGTH;
use crate::slider::{SliderTracker, TrackerConfig};
use crate::slope::{piecewise_slopes, MedianFilter, SlopeConfig};
use crate::twofinger::{DetectorConfig, TwoFingerDetector, WindowOutcome};

/// All module settings in one JSON document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub num_taps: usize,
    pub tap_spacing_m: f64,
    /// Only the first taps (0–40 cm) are processed.
    pub taps_of_interest: usize,
    pub wavelength_m: f64,
    /// New frames read per iteration (`N_n`).
    pub frames_per_iteration: usize,
    pub slope: SlopeConfig,
    pub tracker: TrackerConfig,
    pub detector: DetectorConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            num_taps: 5,
            tap_spacing_m: cb1_tap_spacing(),
            taps_of_interest: 5,
            wavelength_m: DEFAULT_WAVELENGTH,
            frames_per_iteration: 8,
            slope: SlopeConfig::default(),
            tracker: TrackerConfig::default(),
            detector: DetectorConfig::default(),
        }
    }
}

/// Relative tolerance when matching a config's tap spacing to a recording.
const SPACING_TOLERANCE: f64 = 0.01;

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_taps == 0 || self.taps_of_interest == 0 || self.taps_of_interest > self.num_taps {
            return Err(invalid("need 1 <= taps_of_interest <= num_taps"));
        }
        if !(self.tap_spacing_m > 0.0 && self.wavelength_m > 0.0) {
            return Err(invalid("tap_spacing_m and wavelength_m must be > 0"));
        }
        if self.frames_per_iteration == 0 {
            return Err(invalid("frames_per_iteration must be >= 1"));
        }
        self.slope.validate()?;
        self.tracker.validate()?;
        self.detector.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate().map_err(|e| Error::Schema(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Fails with [`Error::Mismatch`] when the recording geometry differs.
    pub fn check_recording(&self, header: &RecordingHeader) -> Result<()> {
        if header.num_taps as usize != self.num_taps {
            return Err(Error::Mismatch(format!(
                "recording has {} taps, config expects {}",
                header.num_taps, self.num_taps
            )));
        }
        let spacing = header.tap_spacing_m();
        if ((spacing - self.tap_spacing_m) / self.tap_spacing_m).abs() > SPACING_TOLERANCE {
            return Err(Error::Mismatch(format!(
                "recording tap spacing {spacing:.4} m, config expects {:.4} m",
                self.tap_spacing_m
            )));
        }
        Ok(())
    }

    /// New samples consumed per slope update.
    pub fn samples_per_slope(&self) -> f64 {
        let groups = self.frames_per_iteration.div_ceil(self.slope.n_a);
        self.frames_per_iteration as f64 / groups as f64
    }
}

/// Slider state after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub time: f64,
    pub level: f64,
    pub enabled: bool,
    pub present: bool,
    pub tap: Option<usize>,
}

/// A two-finger gesture event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub window_start: f64,
    pub time: f64,
    pub tap: usize,
    pub pos_count: usize,
    pub neg_count: usize,
    pub vote_run: usize,
}

impl From<&WindowOutcome> for DetectionEvent {
    fn from(w: &WindowOutcome) -> Self {
        Self {
            window_start: w.start_time,
            time: w.end_time,
            tap: w.tap,
            pos_count: w.pos_count,
            neg_count: w.neg_count,
            vote_run: w.vote_run,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTiming {
    pub framing_s: f64,
    pub slopes_s: f64,
    pub tracker_s: f64,
    pub detector_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub events: Vec<DetectionEvent>,
    pub windows: Vec<WindowOutcome>,
    pub timing: StageTiming,
}

/// Streaming pipeline state for one tap stream.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    assembler: BatchAssembler,
    medians: Vec<MedianFilter>,
    tracker: SliderTracker,
    detector: TwoFingerDetector,
    iteration: usize,
    timing: [Duration; 4],
}

impl Pipeline {
    pub fn new(config: PipelineConfig, sample_rate: f64) -> Result<Self> {
        config.validate()?;
        let toi = config.taps_of_interest;
        Ok(Self {
            assembler: BatchAssembler::new(config.slope.n_a)?,
            medians: (0..toi).map(|_| MedianFilter::new(config.slope.n_m)).collect::<Result<_>>()?,
            tracker: SliderTracker::new(config.tracker, toi)?,
            detector: TwoFingerDetector::new(config.detector, config.slope, sample_rate, toi)?,
            config,
            iteration: 0,
            timing: [Duration::ZERO; 4],
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Processes one iteration's new frames. Returns the trace record (if the
    /// batch was long enough to fit slopes) and any completed windows.
    pub fn process(&mut self, new: &[TapFrame]) -> Result<(Option<TraceRecord>, Vec<WindowOutcome>)> {
        for f in new {
            if f.num_taps() != self.config.num_taps {
                return Err(Error::Mismatch(format!(
                    "frame has {} taps, config expects {}",
                    f.num_taps(),
                    self.config.num_taps
                )));
            }
            if f.taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
                return Err(Error::Numeric(format!("non-finite tap value at t={}", f.timestamp)));
            }
        }

        let t = Instant::now();
        let mut windows = Vec::new();
        for f in new {
            if let Some(w) = self.detector.push(f.clone())? {
                windows.push(w);
            }
        }
        self.timing[3] += t.elapsed();

        let t = Instant::now();
        let batch = self.assembler.assemble(new.to_vec())?;
        self.timing[0] += t.elapsed();
        for f in new {
            self.tracker.observe(f);
        }
        self.iteration += 1;
        if batch.is_empty() {
            return Ok((None, windows));
        }

        let t = Instant::now();
        let toi = self.config.taps_of_interest;
        let raw: Vec<Vec<f64>> =
            (0..toi).map(|i| piecewise_slopes(&batch, i, self.config.slope.n_a)).collect::<Result<_>>()?;
        if raw.iter().flatten().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("non-finite slope".into()));
        }
        self.timing[1] += t.elapsed();

        let t = Instant::now();
        let mut out = None;
        for g in 0..raw[0].len() {
            let filtered: Vec<f64> = self.medians.iter_mut().zip(&raw).map(|(m, r)| m.push(r[g])).collect();
            out = Some(self.tracker.step(&filtered));
        }
        self.timing[2] += t.elapsed();

        let last = batch.frames.last().expect("non-empty batch");
        Ok((
            out.map(|o| TraceRecord {
                iteration: self.iteration - 1,
                time: last.timestamp,
                level: o.level,
                enabled: o.enabled,
                present: o.present,
                tap: o.tap,
            }),
            windows,
        ))
    }

    /// Runs a whole stream in `frames_per_iteration` chunks; a trailing partial
    /// chunk is dropped.
    pub fn run(mut self, frames: &[TapFrame]) -> Result<RunOutput> {
        let mut trace = Vec::new();
        let mut windows = Vec::new();
        for chunk in frames.chunks_exact(self.config.frames_per_iteration) {
            let (rec, w) = self.process(chunk)?;
            trace.extend(rec);
            windows.extend(w);
        }
        let events = windows.iter().filter(|w| w.event).map(DetectionEvent::from).collect();
        let [framing, slopes, tracker, detector] = self.timing.map(|d| d.as_secs_f64());
        Ok(RunOutput {
            trace,
            events,
            windows,
            timing: StageTiming { framing_s: framing, slopes_s: slopes, tracker_s: tracker, detector_s: detector },
        })
    }
}

/// Convenience wrapper: run `frames` with `config`.
pub fn run_pipeline(config: &PipelineConfig, frames: &[TapFrame], sample_rate: f64) -> Result<RunOutput> {
    Pipeline::new(*config, sample_rate)?.run(frames)
}

/// The `run` command's output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub seed: Option<u64>,
    pub sample_rate_hz: f64,
    pub frames: usize,
    pub windows: usize,
    pub trace: Vec<TraceRecord>,
    pub events: Vec<DetectionEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<StageTiming>,
}

impl RunReport {
    pub fn new(
        config: PipelineConfig,
        seed: Option<u64>,
        sample_rate_hz: f64,
        frames: usize,
        out: RunOutput,
        with_timing: bool,
    ) -> Self {
        Self {
            config,
            seed,
            sample_rate_hz,
            frames,
            windows: out.windows.len(),
            trace: out.trace,
            events: out.events,
            timing: with_timing.then_some(out.timing),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("line {} column {}: {e}", e.line(), e.column())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{make_gesture_scene, simulate_tap_stream, GestureKind, GestureParams};

    #[test]
    fn idle_scene_is_flat_and_quiet() {
        let scene = make_gesture_scene(GestureKind::Idle, &GestureParams { seed: 4, ..Default::default() }).unwrap();
        let frames = simulate_tap_stream(&scene).unwrap();
        let out = run_pipeline(&PipelineConfig::default(), &frames, 500.0).unwrap();
        assert_eq!(out.trace.len(), frames.len() / 8);
        assert!(out.trace.iter().all(|r| r.level.abs() < 1.0), "{:?}", out.trace.last());
        assert!(out.events.is_empty());
    }

    #[test]
    fn slider_in_raises_level() {
        let scene =
            make_gesture_scene(GestureKind::SliderIn, &GestureParams { speed: 0.03, seed: 9, ..Default::default() })
                .unwrap();
        let frames = simulate_tap_stream(&scene).unwrap();
        let out = run_pipeline(&PipelineConfig::default(), &frames, 500.0).unwrap();
        let last = out.trace.last().unwrap().level;
        // 3 cm of a 10 cm full span (200 units)
        assert!((last - 60.0).abs() < 6.0, "{last}");
        let moving: Vec<f64> = out.trace.iter().filter(|r| (0.25..1.15).contains(&r.time)).map(|r| r.level).collect();
        assert!(moving.windows(2).all(|w| w[1] >= w[0] - 0.5));
    }

    #[test]
    fn rejects_wrong_tap_count() {
        let frames = vec![TapFrame::new(vec![Default::default(); 3], 0.0, 0.08); 8];
        assert!(matches!(run_pipeline(&PipelineConfig::default(), &frames, 500.0), Err(Error::Mismatch(_))));
    }

    #[test]
    fn rejects_non_finite_input() {
        let mut frames = vec![TapFrame::new(vec![Default::default(); 5], 0.0, 0.08); 8];
        for (k, f) in frames.iter_mut().enumerate() {
            f.timestamp = k as f64;
        }
        frames[3].taps[1].re = f64::NAN;
        assert!(matches!(run_pipeline(&PipelineConfig::default(), &frames, 500.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert!(matches!(PipelineConfig::from_json("{}"), Err(Error::Schema(_))));
        let bad = PipelineConfig { taps_of_interest: 9, ..cfg };
        assert!(matches!(PipelineConfig::from_json(&bad.to_json()), Err(Error::Schema(_))));
    }
}
