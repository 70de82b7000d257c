//! `GTAP` tap-stream recordings.
//!
//! Layout, all little-endian: the magic `b"GTAP"`, then six `u32` fields
//! (version, tap count, tap spacing in micrometres, sample rate in Hz,
//! pulses per reading, frame count), then `count × taps` complex samples as
//! interleaved `f32` (re, im), frame-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};
use crate::framing::TapFrame;

pub const MAGIC: [u8; 4] = *b"GTAP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordingHeader {
    pub version: u32,
    pub num_taps: u32,
    pub tap_spacing_um: u32,
    pub sample_rate_hz: u32,
    pub pulses_per_reading: u32,
    pub count: u32,
}

impl RecordingHeader {
    pub fn tap_spacing_m(&self) -> f64 {
        self.tap_spacing_um as f64 * 1e-6
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate_hz as f64
    }

    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&MAGIC);
        let fields = [
            self.version,
            self.num_taps,
            self.tap_spacing_um,
            self.sample_rate_hz,
            self.pulses_per_reading,
            self.count,
        ];
        for (i, v) in fields.iter().enumerate() {
            out[4 + 4 * i..8 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN {
            return Err(Error::Recording(format!("file too short for header ({} bytes)", b.len())));
        }
        if b[..4] != MAGIC {
            return Err(Error::Recording("bad magic, expected GTAP".into()));
        }
        let f = |i: usize| u32::from_le_bytes(b[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
        let h = Self {
            version: f(0),
            num_taps: f(1),
            tap_spacing_um: f(2),
            sample_rate_hz: f(3),
            pulses_per_reading: f(4),
            count: f(5),
        };
        if h.version != VERSION {
            return Err(Error::Recording(format!("unsupported version {}", h.version)));
        }
        if h.num_taps == 0 || h.sample_rate_hz == 0 {
            return Err(Error::Recording("tap count and sample rate must be non-zero".into()));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapRecording {
    pub header: RecordingHeader,
    /// Frame-major samples, `count × num_taps` long.
    pub samples: Vec<Complex32>,
}

impl TapRecording {
    /// Builds a recording from frames. Timestamps are dropped; they are
    /// implied by the sample rate on read.
    pub fn from_frames(frames: &[TapFrame], sample_rate_hz: u32, pulses_per_reading: u32) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::Recording("no frames".into()))?;
        let n = first.num_taps();
        if frames.iter().any(|f| f.num_taps() != n) {
            return Err(Error::Recording("frames have differing tap counts".into()));
        }
        let header = RecordingHeader {
            version: VERSION,
            num_taps: n as u32,
            tap_spacing_um: (first.tap_spacing * 1e6).round() as u32,
            sample_rate_hz,
            pulses_per_reading,
            count: frames.len() as u32,
        };
        let samples =
            frames.iter().flat_map(|f| f.taps.iter().map(|c| Complex32::new(c.re as f32, c.im as f32))).collect();
        Ok(Self { header, samples })
    }

    pub fn to_frames(&self) -> Vec<TapFrame> {
        let n = self.header.num_taps as usize;
        let dt = 1.0 / self.header.sample_rate();
        let spacing = self.header.tap_spacing_m();
        self.samples
            .chunks_exact(n)
            .enumerate()
            .map(|(k, c)| {
                let taps = c.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect();
                TapFrame::new(taps, k as f64 * dt, spacing)
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.samples.len() * 8);
        out.extend_from_slice(&self.header.to_bytes());
        for z in &self.samples {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let header = RecordingHeader::from_bytes(b)?;
        let n = header.count as usize * header.num_taps as usize;
        let payload = &b[HEADER_LEN..];
        if payload.len() != n * 8 {
            return Err(Error::Recording(format!("payload is {} bytes, header implies {}", payload.len(), n * 8)));
        }
        let samples = payload
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().expect("4 bytes"));
                let im = f32::from_le_bytes(c[4..].try_into().expect("4 bytes"));
                Complex32::new(re, im)
            })
            .collect();
        Ok(Self { header, samples })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
