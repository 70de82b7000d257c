//! Slider tracking: a clamped integrator over filtered phase slopes, with tap
//! selection and presence/slope gating.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::framing::TapFrame;

/// How the tracker picks the tap(s) that drive an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TapStrategy {
    /// Strongest tap of the newest frame.
    MaxMagnitude,
    /// One level per tap, reported as their mean.
    Average,
    /// Single level driven by the mean slope across taps.
    AverageSlope,
    /// Tap with the largest filtered slope magnitude.
    MaxSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresenceRule {
    /// Tap magnitude above `magnitude_threshold`.
    Magnitude,
    /// Sample std of the last `std_window` magnitudes above `std_threshold`.
    MagnitudeStd,
}

/// Sign convention mapping motion to slider direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    OutwardDecreases,
    OutwardIncreases,
}

impl Polarity {
    fn sign(self) -> f64 {
        // phase falls as range grows, so a positive gain already lowers the
        // level on outward motion
        match self {
            Polarity::OutwardDecreases => 1.0,
            Polarity::OutwardIncreases => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    /// Level range: the slider lives in [−range, range].
    pub range: f64,
    /// Attenuation applied to each filtered slope.
    pub alpha: f64,
    /// Updates are allowed only while every active tap's |slope| is below this
    /// (rad/sample).
    pub slope_gate: f64,
    pub magnitude_threshold: f64,
    pub std_threshold: f64,
    pub std_window: usize,
    pub tap_strategy: TapStrategy,
    pub presence_rule: PresenceRule,
    pub polarity: Polarity,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            range: 100.0,
            alpha: alpha_for_travel(0.10, 100.0, crate::scene::DEFAULT_WAVELENGTH, 8.0),
            slope_gate: 1.5,
            // calibrated idle values for the default radio are about 2.2 and 0.83
            magnitude_threshold: 2.5,
            std_threshold: 1.0,
            std_window: 32,
            tap_strategy: TapStrategy::MaxMagnitude,
            presence_rule: PresenceRule::Magnitude,
            polarity: Polarity::OutwardDecreases,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(invalid("tracker.range must be > 0"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("tracker.alpha must be > 0"));
        }
        if [self.slope_gate, self.magnitude_threshold, self.std_threshold].iter().any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(invalid("tracker thresholds must be >= 0"));
        }
        if self.std_window < 2 {
            return Err(invalid("tracker.std_window must be >= 2"));
        }
        Ok(())
    }
}

/// Gain that maps a radial travel of `travel` meters onto the full `2·range`
/// span, given `samples_per_slope` new samples per tracker update.
pub fn alpha_for_travel(travel: f64, range: f64, wavelength: f64, samples_per_slope: f64) -> f64 {
    let phase = 4.0 * std::f64::consts::PI * travel / wavelength;
    2.0 * range * samples_per_slope / phase
}

/// `clamp(prev + α·s, −L, L)`.
pub fn update_level(prev: f64, slope: f64, alpha: f64, range: f64) -> f64 {
    (prev + alpha * slope).clamp(-range, range)
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Index of the strongest tap; ties go to the lowest index.
pub fn select_tap_max_magnitude(taps: &[Complex64]) -> usize {
    argmax_lowest(taps.iter().map(|t| t.norm()))
}

/// Index of the largest |slope|; ties go to the lowest index.
pub fn select_tap_max_slope(slopes: &[f64]) -> usize {
    argmax_lowest(slopes.iter().map(|s| s.abs()))
}

/// Arithmetic mean of per-tap levels or slopes.
pub fn fuse_average(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// True iff every slope satisfies `|s| < threshold`.
pub fn slope_gate(slopes: &[f64], threshold: f64) -> bool {
    slopes.iter().all(|s| s.abs() < threshold)
}

/// True iff some tap magnitude exceeds `threshold`.
pub fn presence_by_magnitude(taps: &[Complex64], threshold: f64) -> bool {
    taps.iter().any(|t| t.norm() > threshold)
}

/// Unbiased sample standard deviation; zero for fewer than two samples.
pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// True iff some tap's magnitude history has std above `threshold`.
pub fn presence_by_std<H: AsRef<[f64]>>(histories: &[H], threshold: f64) -> bool {
    histories.iter().any(|h| sample_std(h.as_ref()) > threshold)
}

/// One tracker output per slope update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerOutput {
    pub level: f64,
    pub enabled: bool,
    pub present: bool,
    pub tap: Option<usize>,
}

/// Stateful slider over the first `taps_of_interest` taps.
///
/// A tap is *active* when it passes the configured presence rule on its own.
/// Presence means at least one active tap, the slope gate is evaluated over
/// active taps, and max-slope selection only considers active taps: taps at
/// the noise floor carry no usable phase.
#[derive(Debug, Clone)]
pub struct SliderTracker {
    config: TrackerConfig,
    taps_of_interest: usize,
    level: f64,
    tap_levels: Vec<f64>,
    magnitudes: Vec<VecDeque<f64>>,
    latest: Vec<f64>,
}

impl SliderTracker {
    pub fn new(config: TrackerConfig, taps_of_interest: usize) -> Result<Self> {
        config.validate()?;
        if taps_of_interest == 0 {
            return Err(invalid("taps_of_interest must be >= 1"));
        }
        Ok(Self {
            config,
            taps_of_interest,
            level: 0.0,
            tap_levels: vec![0.0; taps_of_interest],
            magnitudes: vec![VecDeque::with_capacity(config.std_window); taps_of_interest],
            latest: vec![0.0; taps_of_interest],
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn level(&self) -> f64 {
        match self.config.tap_strategy {
            TapStrategy::Average => fuse_average(&self.tap_levels),
            _ => self.level,
        }
    }

    pub fn tap_levels(&self) -> &[f64] {
        &self.tap_levels
    }

    /// Logs the magnitudes of one frame.
    pub fn observe(&mut self, frame: &TapFrame) {
        for (i, hist) in self.magnitudes.iter_mut().enumerate() {
            let m = frame.taps.get(i).map_or(0.0, |t| t.norm());
            if hist.len() == self.config.std_window {
                hist.pop_front();
            }
            hist.push_back(m);
            self.latest[i] = m;
        }
    }

    fn active_taps(&self) -> Vec<usize> {
        (0..self.taps_of_interest)
            .filter(|&i| match self.config.presence_rule {
                PresenceRule::Magnitude => self.latest[i] > self.config.magnitude_threshold,
                PresenceRule::MagnitudeStd => {
                    let h: Vec<f64> = self.magnitudes[i].iter().copied().collect();
                    sample_std(&h) > self.config.std_threshold
                }
            })
            .collect()
    }

    /// Applies one filtered slope per tap of interest. Frames should already
    /// have been passed to [`observe`](Self::observe).
    pub fn step(&mut self, filtered_slopes: &[f64]) -> TrackerOutput {
        let cfg = self.config;
        let active = self.active_taps();
        let present = !active.is_empty();
        let active_slopes: Vec<f64> = active.iter().map(|&i| filtered_slopes.get(i).copied().unwrap_or(0.0)).collect();
        let enabled = present && slope_gate(&active_slopes, cfg.slope_gate);
        let gain = cfg.alpha * cfg.polarity.sign();

        let tap = match cfg.tap_strategy {
            TapStrategy::MaxMagnitude => present.then(|| argmax_lowest(self.latest.iter().copied())),
            TapStrategy::MaxSlope => present.then(|| active[select_tap_max_slope(&active_slopes)]),
            TapStrategy::Average | TapStrategy::AverageSlope => None,
        };
        if enabled {
            match cfg.tap_strategy {
                TapStrategy::MaxMagnitude | TapStrategy::MaxSlope => {
                    let i = tap.expect("present");
                    let s = filtered_slopes.get(i).copied().unwrap_or(0.0);
                    self.level = update_level(self.level, s, gain, cfg.range);
                }
                TapStrategy::AverageSlope => {
                    self.level = update_level(self.level, fuse_average(&active_slopes), gain, cfg.range);
                }
                TapStrategy::Average => {
                    for (&i, &s) in active.iter().zip(&active_slopes) {
                        self.tap_levels[i] = update_level(self.tap_levels[i], s, gain, cfg.range);
                    }
                }
            }
        }
        TrackerOutput { level: self.level(), enabled, present, tap }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(m: f64) -> Complex64 {
        Complex64::new(m, 0.0)
    }

    #[test]
    fn update_examples() {
        assert_eq!(update_level(0.0, 0.5, 1.0, 100.0), 0.5);
        assert_eq!(update_level(100.0, 3.0, 1.0, 100.0), 100.0);
        assert_eq!(update_level(-99.0, -3.0, 1.0, 100.0), -100.0);
    }

    #[test]
    fn tap_selection() {
        assert_eq!(select_tap_max_magnitude(&[c(1.0), c(5.0), c(2.0)]), 1);
        assert_eq!(select_tap_max_magnitude(&[c(3.0); 4]), 0);
        assert_eq!(select_tap_max_slope(&[0.1, -0.9, 0.2]), 1);
        assert_eq!(select_tap_max_slope(&[0.0; 5]), 0);
    }

    #[test]
    fn averaging() {
        assert_eq!(fuse_average(&[10.0, 0.0, -10.0]), 0.0);
        assert_eq!(fuse_average(&[4.5; 3]), 4.5);
    }

    #[test]
    fn gates() {
        assert!(slope_gate(&[0.0; 4], 1.0));
        assert!(!slope_gate(&[0.0, 1.0], 1.0));
        assert!(!slope_gate(&[-1.2], 1.0));
        assert!(!presence_by_magnitude(&[c(0.0); 3], 0.5));
        assert!(!presence_by_magnitude(&[c(0.5), c(0.1)], 0.5));
        assert!(presence_by_magnitude(&[c(0.51)], 0.5));
    }

    #[test]
    fn std_rule() {
        assert!(!presence_by_std(&[vec![2.0; 10]], 0.0));
        // alternating m ± d over n samples: std = d·sqrt(n/(n−1)) for even n
        let (m, d, n) = (3.0, 0.2, 16usize);
        let h: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { m + d } else { m - d }).collect();
        let expect = d * (n as f64 / (n as f64 - 1.0)).sqrt();
        assert!((sample_std(&h) - expect).abs() < 1e-12);
        assert!(presence_by_std(&[vec![1.0; 16], h.clone()], expect - 1e-6));
        assert!(!presence_by_std(&[h], expect + 1e-6));
    }

    fn frame(mags: &[f64]) -> TapFrame {
        TapFrame::new(mags.iter().map(|&m| c(m)).collect(), 0.0, 0.08)
    }

    fn tracker(strategy: TapStrategy) -> SliderTracker {
        let cfg = TrackerConfig {
            alpha: 1.0,
            magnitude_threshold: 0.5,
            slope_gate: 1.0,
            tap_strategy: strategy,
            ..Default::default()
        };
        SliderTracker::new(cfg, 3).unwrap()
    }

    #[test]
    fn step_follows_strongest_tap() {
        let mut t = tracker(TapStrategy::MaxMagnitude);
        t.observe(&frame(&[0.0, 2.0, 1.0]));
        let out = t.step(&[0.0, 0.3, -0.2]);
        assert!(out.present && out.enabled);
        assert_eq!(out.tap, Some(1));
        assert!((out.level - 0.3).abs() < 1e-12);
    }

    #[test]
    fn max_slope_picks_moving_tap() {
        let mut t = tracker(TapStrategy::MaxSlope);
        t.observe(&frame(&[0.0, 2.0, 1.0]));
        let out = t.step(&[0.9, 0.05, -0.4]);
        // tap 0 is below the presence threshold and ignored
        assert_eq!(out.tap, Some(2));
        assert!((out.level + 0.4).abs() < 1e-12);
    }

    #[test]
    fn gate_and_presence_freeze_level() {
        let mut t = tracker(TapStrategy::MaxMagnitude);
        t.observe(&frame(&[1.0, 0.0, 0.0]));
        t.step(&[0.5, 0.0, 0.0]);
        t.observe(&frame(&[1.0, 0.0, 0.0]));
        let out = t.step(&[1.5, 0.0, 0.0]);
        assert!(out.present && !out.enabled);
        assert_eq!(out.level, 0.5);
        t.observe(&frame(&[0.1, 0.0, 0.0]));
        let out = t.step(&[0.5, 0.0, 0.0]);
        assert!(!out.present && !out.enabled);
        assert_eq!(out.level, 0.5);
    }

    #[test]
    fn average_strategies() {
        let mut t = tracker(TapStrategy::Average);
        t.observe(&frame(&[1.0, 1.0, 1.0]));
        let out = t.step(&[0.3, 0.0, -0.6]);
        assert!((out.level + 0.1).abs() < 1e-12);
        assert_eq!(t.tap_levels(), &[0.3, 0.0, -0.6]);

        let mut t = tracker(TapStrategy::AverageSlope);
        t.observe(&frame(&[1.0, 1.0, 0.0]));
        let out = t.step(&[0.3, 0.1, 0.9]);
        assert!((out.level - 0.2).abs() < 1e-12);
    }

    #[test]
    fn std_presence_rule() {
        let cfg = TrackerConfig {
            presence_rule: PresenceRule::MagnitudeStd,
            std_threshold: 0.1,
            std_window: 4,
            ..Default::default()
        };
        let mut t = SliderTracker::new(cfg, 2).unwrap();
        for _ in 0..4 {
            t.observe(&frame(&[5.0, 1.0]));
        }
        assert!(!t.step(&[0.0, 0.0]).present);
        for m in [1.0, 1.5, 0.7, 1.2] {
            t.observe(&frame(&[5.0, m]));
        }
        assert!(t.step(&[0.0, 0.0]).present);
    }

    #[test]
    fn polarity_flips_direction() {
        let mut cfg = TrackerConfig { alpha: 2.0, magnitude_threshold: 0.0, ..Default::default() };
        cfg.polarity = Polarity::OutwardIncreases;
        let mut t = SliderTracker::new(cfg, 1).unwrap();
        t.observe(&frame(&[1.0]));
        assert_eq!(t.step(&[0.25]).level, -0.5);
    }

    #[test]
    fn alpha_spans_range() {
        // 10 cm at λ = 5 mm is 80π rad of phase; with 8 samples per slope the
        // slopes of that travel sum to 10π
        let a = alpha_for_travel(0.1, 100.0, 0.005, 8.0);
        assert!((a * 10.0 * std::f64::consts::PI - 200.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        assert!(TrackerConfig { range: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrackerConfig { alpha: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrackerConfig { std_window: 1, ..Default::default() }.validate().is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    proptest! {
        #[test]
        fn level_stays_in_range(slopes in proptest::collection::vec(-5.0f64..5.0, 0..200), alpha in 0.1f64..50.0, range in 1.0f64..200.0) {
            let mut level = 0.0;
            for s in slopes {
                level = update_level(level, s, alpha, range);
                prop_assert!(level.abs() <= range);
            }
        }

        #[test]
        fn ungated_tracker_replays_clamp_fold(slopes in proptest::collection::vec(-1.0f64..1.0, 1..100)) {
            let cfg = TrackerConfig { alpha: 1.0, range: 5.0, slope_gate: 1e9, magnitude_threshold: 0.0, ..Default::default() };
            let mut t = SliderTracker::new(cfg, 1).unwrap();
            let mut oracle = 0.0f64;
            for s in &slopes {
                t.observe(&TapFrame::new(vec![Complex64::new(1.0, 0.0)], 0.0, 0.08));
                let out = t.step(&[*s]);
                #[allow(clippy::manual_clamp)]
                let next = (oracle + s).max(-5.0).min(5.0);
                oracle = next;
                prop_assert_eq!(out.level, oracle);
            }
        }

        #[test]
        fn argmax_is_scale_invariant(mags in proptest::collection::vec(0.0f64..10.0, 1..12), scale in 0.01f64..100.0) {
            let taps: Vec<_> = mags.iter().map(|&m| Complex64::from_polar(m, m)).collect();
            let scaled: Vec<_> = taps.iter().map(|t| t * scale).collect();
            prop_assert_eq!(select_tap_max_magnitude(&taps), select_tap_max_magnitude(&scaled));
            let scaled_slopes: Vec<_> = mags.iter().map(|m| -m * scale).collect();
            prop_assert_eq!(select_tap_max_slope(&mags), select_tap_max_slope(&scaled_slopes));
        }

        #[test]
        fn average_tracks_active_tap(seed in any::<u64>()) {
            // one tap moves steadily, the rest random-walk around zero: the
            // fused displacement is the active tap's scaled by 1/N_T
            let n_t = 5;
            let steps = 400;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut levels = vec![0.0f64; n_t];
            for _ in 0..steps {
                levels[0] += 0.05;
                for l in levels.iter_mut().skip(1) {
                    *l += rng.random_range(-0.05..0.05);
                }
            }
            let fused = fuse_average(&levels);
            let expect = levels[0] / n_t as f64;
            // expect = 4; the walks add noise with std ≈ 0.23
            prop_assert!((fused - expect).abs() < 1.5, "fused {} expect {}", fused, expect);
        }
    }
}
