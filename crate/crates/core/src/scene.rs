//! Synthetic radar scenes.
//!
//! Each target contributes `α(t)·A·exp(−j4πr(t)/λ)` to the tap nearest its
//! range, summed over `N_p` pulses per reading with independent complex
//! thermal noise per pulse. `α(t)` is a piecewise-constant multiplicative
//! instability factor that jumps at exponentially spaced event times.
//!
//! Random streams: thermal noise draws from ChaCha stream 0 and target `i`'s
//! instability events from stream `i + 1`, so toggling instability leaves the
//! thermal noise realization untouched.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::framing::{cb1_tap_spacing, coherent_combine, TapFrame};
use crate::golay::{channel_estimate, GolayPair};

/// Carrier wavelength at 60 GHz, meters.
pub const DEFAULT_WAVELENGTH: f64 = 0.005;

/// Largest range a gesture scene may use, meters.
pub const MAX_GESTURE_RANGE: f64 = 0.4;

/// Largest gesture speed, m/s.
pub const MAX_GESTURE_SPEED: f64 = 2.0;

/// Two-way propagation phase at `range`.
pub fn two_way_phase(range: f64, wavelength: f64) -> f64 {
    -4.0 * PI * range / wavelength
}

/// Per-pulse noise variance giving `snr_db` for a target of per-pulse
/// amplitude `amplitude` after coherently combining `pulses` pulses.
pub fn noise_variance_for_snr(amplitude: f64, snr_db: f64, pulses: usize) -> f64 {
    pulses as f64 * amplitude * amplitude / 10f64.powf(snr_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstabilityModel {
    /// Mean events per second.
    #[serde(default)]
    pub event_rate: f64,
    /// Each event rotates α by a phase uniform in ±this, radians.
    #[serde(default)]
    pub phase_jitter_scale: f64,
    /// Each event scales |α| by 1+g, g uniform in ±this.
    #[serde(default)]
    pub gain_jitter_scale: f64,
}

impl InstabilityModel {
    pub fn is_disabled(&self) -> bool {
        self.event_rate == 0.0 || (self.phase_jitter_scale == 0.0 && self.gain_jitter_scale == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    /// `[time_s, range_m]` keyframes, linearly interpolated and held at the ends.
    pub keyframes: Vec<[f64; 2]>,
    pub amplitude: f64,
    #[serde(default)]
    pub instability: InstabilityModel,
}

impl Target {
    pub fn fixed(range: f64, amplitude: f64) -> Self {
        Self { keyframes: vec![[0.0, range]], amplitude, instability: InstabilityModel::default() }
    }

    pub fn range_at(&self, t: f64) -> f64 {
        let k = &self.keyframes;
        if t <= k[0][0] {
            return k[0][1];
        }
        for w in k.windows(2) {
            let ([t0, r0], [t1, r1]) = (w[0], w[1]);
            if t <= t1 {
                return r0 + (r1 - r0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1][1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub wavelength_m: f64,
    pub tap_spacing_m: f64,
    pub num_taps: usize,
    pub packet_rate_hz: f64,
    pub pulses_per_reading: usize,
    /// Complex thermal noise variance per tap per pulse.
    pub noise_variance: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            wavelength_m: DEFAULT_WAVELENGTH,
            tap_spacing_m: cb1_tap_spacing(),
            num_taps: 5,
            packet_rate_hz: 500.0,
            pulses_per_reading: 16,
            // 30 dB after combining for a unit-amplitude target
            noise_variance: 0.016,
        }
    }
}

impl RadioConfig {
    pub fn packet_interval(&self) -> f64 {
        1.0 / self.packet_rate_hz
    }

    /// Nearest tap for `range`, or `None` when it falls outside the observed taps.
    pub fn tap_for_range(&self, range: f64) -> Option<usize> {
        let tap = (range / self.tap_spacing_m).round();
        (tap >= 0.0 && (tap as usize) < self.num_taps).then_some(tap as usize)
    }
}

/// Targets plus radio and run parameters; the JSON scene-file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub targets: Vec<Target>,
    #[serde(default)]
    pub radio: RadioConfig,
    pub seed: u64,
    pub duration_s: f64,
}

fn schema(msg: String) -> Error {
    Error::Schema(msg)
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl Scene {
    /// Parses and validates a scene file. Syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene =
            serde_json::from_str(text).map_err(|e| schema(format!("line {} column {}: {e}", e.line(), e.column())))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn num_frames(&self) -> usize {
        (self.duration_s * self.radio.packet_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.radio;
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(schema(format!("duration_s must be > 0, got {}", self.duration_s)));
        }
        if !(r.wavelength_m.is_finite() && r.wavelength_m > 0.0) {
            return Err(schema("radio.wavelength_m must be > 0".into()));
        }
        if !(r.tap_spacing_m.is_finite() && r.tap_spacing_m > 0.0) {
            return Err(schema("radio.tap_spacing_m must be > 0".into()));
        }
        if !(r.packet_rate_hz.is_finite() && r.packet_rate_hz > 0.0) {
            return Err(schema("radio.packet_rate_hz must be > 0".into()));
        }
        if r.num_taps == 0 {
            return Err(schema("radio.num_taps must be >= 1".into()));
        }
        if r.pulses_per_reading == 0 {
            return Err(schema("radio.pulses_per_reading must be >= 1".into()));
        }
        if !finite_nonneg(r.noise_variance) {
            return Err(schema("radio.noise_variance must be >= 0".into()));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.keyframes.is_empty() {
                return Err(schema(format!("targets[{i}].keyframes must not be empty")));
            }
            for (j, [time, range]) in t.keyframes.iter().enumerate() {
                if !time.is_finite() || !finite_nonneg(*range) {
                    return Err(schema(format!("targets[{i}].keyframes[{j}] needs a finite time and range >= 0")));
                }
            }
            if t.keyframes.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return Err(schema(format!("targets[{i}].keyframes times must be strictly increasing")));
            }
            if !(t.amplitude.is_finite() && t.amplitude > 0.0) {
                return Err(schema(format!("targets[{i}].amplitude must be > 0")));
            }
            let m = &t.instability;
            if !(finite_nonneg(m.event_rate)
                && finite_nonneg(m.phase_jitter_scale)
                && finite_nonneg(m.gain_jitter_scale))
            {
                return Err(schema(format!("targets[{i}].instability fields must be >= 0")));
            }
        }
        Ok(())
    }
}

/// A jump in one target's multiplicative factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstabilityEvent {
    pub target: usize,
    pub time: f64,
    pub factor: Complex64,
}

/// Simulator output: frames plus the instability events that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub frames: Vec<TapFrame>,
    pub events: Vec<InstabilityEvent>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn instability_events(scene: &Scene) -> Result<Vec<Vec<InstabilityEvent>>> {
    scene
        .targets
        .iter()
        .enumerate()
        .map(|(i, target)| {
            let m = target.instability;
            let mut events = Vec::new();
            if m.is_disabled() {
                return Ok(events);
            }
            let mut rng = stream_rng(scene.seed, i as u64 + 1);
            let gap = Exp::new(m.event_rate).map_err(|e| invalid(e.to_string()))?;
            let mut t = 0.0;
            loop {
                t += gap.sample(&mut rng);
                if t >= scene.duration_s {
                    break;
                }
                let theta = if m.phase_jitter_scale > 0.0 {
                    rng.random_range(-m.phase_jitter_scale..m.phase_jitter_scale)
                } else {
                    0.0
                };
                let g = if m.gain_jitter_scale > 0.0 {
                    rng.random_range(-m.gain_jitter_scale..m.gain_jitter_scale)
                } else {
                    0.0
                };
                events.push(InstabilityEvent { target: i, time: t, factor: Complex64::from_polar(1.0 + g, theta) });
            }
            Ok(events)
        })
        .collect()
}

/// Noise-free per-tap echo at time `t`, before pulse combining.
fn echo(scene: &Scene, events: &[Vec<InstabilityEvent>], cursor: &mut [(usize, Complex64)], t: f64) -> Vec<Complex64> {
    let radio = &scene.radio;
    let mut taps = vec![Complex64::new(0.0, 0.0); radio.num_taps];
    for (i, target) in scene.targets.iter().enumerate() {
        let (next, alpha) = &mut cursor[i];
        while *next < events[i].len() && events[i][*next].time <= t {
            *alpha *= events[i][*next].factor;
            *next += 1;
        }
        let range = target.range_at(t);
        if let Some(tap) = radio.tap_for_range(range) {
            taps[tap] += *alpha * Complex64::from_polar(target.amplitude, two_way_phase(range, radio.wavelength_m));
        }
    }
    taps
}

/// Simulates the tap stream and reports the instability events.
pub fn simulate(scene: &Scene) -> Result<Simulation> {
    scene.validate()?;
    let radio = &scene.radio;
    let events = instability_events(scene)?;
    let mut cursor = vec![(0usize, Complex64::new(1.0, 0.0)); scene.targets.len()];
    let sigma = (radio.noise_variance / 2.0).sqrt();
    let noise = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut rng = stream_rng(scene.seed, 0);

    let mut frames = Vec::with_capacity(scene.num_frames());
    for k in 0..scene.num_frames() {
        let t = k as f64 * radio.packet_interval();
        let clean = echo(scene, &events, &mut cursor, t);
        let pulses: Vec<TapFrame> = (0..radio.pulses_per_reading)
            .map(|_| {
                let taps = clean
                    .iter()
                    .map(|&x| {
                        if sigma > 0.0 {
                            x + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng))
                        } else {
                            x
                        }
                    })
                    .collect();
                TapFrame::new(taps, t, radio.tap_spacing_m)
            })
            .collect();
        frames.push(coherent_combine(&pulses)?);
    }
    Ok(Simulation { frames, events: events.into_iter().flatten().collect() })
}

/// Tap frames for `scene`. Targets beyond the last tap are absent.
pub fn simulate_tap_stream(scene: &Scene) -> Result<Vec<TapFrame>> {
    Ok(simulate(scene)?.frames)
}

/// One received CE field per reading, already summed over the reading's pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct CeBlock {
    pub timestamp: f64,
    pub samples: Vec<Complex64>,
}

/// Waveform-level counterpart of [`simulate_tap_stream`].
///
/// Each echo delays the transmitted CE field by its tap index. Per-chip noise
/// has variance `2N·σ²` so that `channel_estimate(block) / 2N` has the same
/// statistics as the tap stream.
pub fn simulate_ce_waveform(scene: &Scene, pair: &GolayPair) -> Result<Vec<CeBlock>> {
    scene.validate()?;
    let radio = &scene.radio;
    let field = pair.ce_field(radio.num_taps);
    let events = instability_events(scene)?;
    let mut cursor = vec![(0usize, Complex64::new(1.0, 0.0)); scene.targets.len()];
    let sigma = (2.0 * pair.len() as f64 * radio.noise_variance / 2.0).sqrt();
    let noise = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut rng = stream_rng(scene.seed, 0);
    let n_p = radio.pulses_per_reading as f64;

    let mut blocks = Vec::with_capacity(scene.num_frames());
    for k in 0..scene.num_frames() {
        let t = k as f64 * radio.packet_interval();
        let gains = echo(scene, &events, &mut cursor, t);
        let mut samples = vec![Complex64::new(0.0, 0.0); field.len()];
        for (delay, g) in gains.iter().enumerate().filter(|(_, g)| g.norm_sqr() > 0.0) {
            for (i, x) in field.iter().enumerate().take(field.len() - delay) {
                samples[i + delay] += g * x * n_p;
            }
        }
        if sigma > 0.0 {
            for _ in 0..radio.pulses_per_reading {
                for s in samples.iter_mut() {
                    *s += Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
                }
            }
        }
        blocks.push(CeBlock { timestamp: t, samples });
    }
    Ok(blocks)
}

/// Runs `channel_estimate` over waveform blocks, scaling by `1/2N` so the
/// frames are comparable with [`simulate_tap_stream`].
pub fn estimate_tap_stream(blocks: &[CeBlock], pair: &GolayPair, tap_spacing: f64) -> Result<Vec<TapFrame>> {
    let scale = 1.0 / (2.0 * pair.len() as f64);
    blocks
        .iter()
        .map(|b| {
            let taps = channel_estimate(&b.samples, pair)?.into_iter().map(|x| x * scale).collect();
            Ok(TapFrame::new(taps, b.timestamp, tap_spacing))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GestureKind {
    SliderIn,
    SliderOut,
    TwoFinger,
    Idle,
    Swipe,
}

/// Knobs for the canonical gesture scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureParams {
    /// Radial speed magnitude, m/s.
    pub speed: f64,
    /// Starting range of the moving target (or the palm for two-finger/idle).
    pub start_range: f64,
    pub lead_in: f64,
    pub gesture: f64,
    pub tail: f64,
    /// Amplitude of the moving hand/finger (or the idle target).
    pub amplitude: f64,
    /// Adds a static palm to slider scenes; palm strength for two-finger.
    pub palm_amplitude: Option<f64>,
    pub palm_range: Option<f64>,
    /// Per-finger amplitude for two-finger scenes.
    pub finger_amplitude: f64,
    /// Swipe direction.
    pub outward: bool,
    pub instability: InstabilityModel,
    pub radio: RadioConfig,
    pub seed: u64,
}

impl Default for GestureParams {
    fn default() -> Self {
        Self {
            speed: 0.03,
            start_range: 0.17,
            lead_in: 0.2,
            gesture: 1.0,
            tail: 0.2,
            amplitude: 1.0,
            palm_amplitude: None,
            palm_range: None,
            finger_amplitude: 0.3,
            outward: false,
            instability: InstabilityModel::default(),
            radio: RadioConfig::default(),
            seed: 0,
        }
    }
}

fn moving(start: f64, velocity: f64, p: &GestureParams) -> Vec<[f64; 2]> {
    let t0 = p.lead_in;
    let t1 = p.lead_in + p.gesture;
    let end = start + velocity * p.gesture;
    let mut k = vec![[0.0, start]];
    if t0 > 0.0 {
        k.push([t0, start]);
    }
    if p.gesture > 0.0 {
        k.push([t1, end]);
    }
    k
}

/// Canonical scenes: slider-in/out move one target at constant speed
/// (inward lowers range), two-finger adds a strong static palm with two
/// fingers at opposite radial velocities in the palm's tap, swipe is a fast
/// hand pass, idle is a single static target.
pub fn make_gesture_scene(kind: GestureKind, p: &GestureParams) -> Result<Scene> {
    if !(0.0..=MAX_GESTURE_SPEED).contains(&p.speed) {
        return Err(invalid(format!("speed {} outside 0..={MAX_GESTURE_SPEED} m/s", p.speed)));
    }
    if p.lead_in < 0.0 || p.gesture < 0.0 || p.tail < 0.0 || p.lead_in + p.gesture + p.tail <= 0.0 {
        return Err(invalid("durations must be >= 0 with a positive total"));
    }
    if p.amplitude <= 0.0 || p.finger_amplitude <= 0.0 || p.palm_amplitude.is_some_and(|a| a <= 0.0) {
        return Err(invalid("amplitudes must be > 0"));
    }
    let with_instability = |keyframes, amplitude| Target { keyframes, amplitude, instability: p.instability };
    let palm = |amp: f64| Target::fixed(p.palm_range.unwrap_or(p.start_range), amp);

    let mut targets = Vec::new();
    match kind {
        GestureKind::Idle => targets.push(with_instability(vec![[0.0, p.start_range]], p.amplitude)),
        GestureKind::SliderIn | GestureKind::SliderOut => {
            let v = if kind == GestureKind::SliderIn { -p.speed } else { p.speed };
            targets.push(with_instability(moving(p.start_range, v, p), p.amplitude));
            if let Some(a) = p.palm_amplitude {
                targets.push(palm(a));
            }
        }
        GestureKind::TwoFinger => {
            let half = 0.5 * p.speed * p.gesture;
            let mut palm = palm(p.palm_amplitude.unwrap_or(1.0));
            palm.instability = p.instability;
            let center = palm.keyframes[0][1];
            targets.push(palm);
            targets.push(Target {
                keyframes: moving(center - half, p.speed, p),
                amplitude: p.finger_amplitude,
                instability: InstabilityModel::default(),
            });
            targets.push(Target {
                keyframes: moving(center + half, -p.speed, p),
                amplitude: p.finger_amplitude,
                instability: InstabilityModel::default(),
            });
        }
        GestureKind::Swipe => {
            let v = if p.outward { p.speed } else { -p.speed };
            targets.push(with_instability(moving(p.start_range, v, p), p.amplitude));
        }
    }

    for (i, t) in targets.iter().enumerate() {
        if let Some([_, r]) = t.keyframes.iter().find(|[_, r]| !(0.0..=MAX_GESTURE_RANGE).contains(r)) {
            return Err(invalid(format!("target {i} reaches range {r:.3} m outside 0..={MAX_GESTURE_RANGE} m")));
        }
    }
    let scene = Scene { targets, radio: p.radio, seed: p.seed, duration_s: p.lead_in + p.gesture + p.tail };
    scene.validate()?;
    Ok(scene)
}
