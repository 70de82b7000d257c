//! Signal processing for gesture recognition over 60 GHz 802.11ad/y
//! channel-estimation packets.
//!
//! The crate turns per-packet Golay correlation outputs ("taps") into two
//! gesture streams:
//!
//! * a slider level, driven by least-squares phase slopes that are
//!   median-filtered and integrated by a clamped tracker, and
//! * two-finger gesture events, detected from the two-sided Doppler spectrum
//!   of a tap of interest with discard rules and consecutive-window voting.
//!
//! [`scene`] provides a synthetic radar scene simulator that serves as the
//! ground truth for tests, and [`recording`] / [`pipeline`] / [`calibrate`]
//! back the command-line tool.

pub mod calibrate;
pub mod error;
pub mod export;
pub mod framing;
pub mod golay;
pub mod pipeline;
pub mod recording;
pub mod scene;
pub mod slider;
pub mod slope;
pub mod twofinger;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use framing::{Batch, BatchAssembler, StreamLayout, TapFrame};
pub use golay::{CorrelationOutput, GolayPair};
pub use pipeline::{DetectionEvent, Pipeline, PipelineConfig, RunOutput, RunReport, TraceRecord};
pub use recording::{RecordingHeader, TapRecording};
pub use scene::{GestureKind, GestureParams, InstabilityModel, RadioConfig, Scene, Target};
pub use slider::{SliderTracker, TapStrategy, TrackerConfig};
pub use slope::{LinearFit, MedianFilter, SlopeSequence};
pub use twofinger::{DetectorConfig, Spectrum, TwoFingerDetector};
