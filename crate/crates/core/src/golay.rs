//! Complementary Golay pairs, aperiodic correlation and channel estimation.
//!
//! A channel-estimation (CE) field is laid out as
//!
//! ```text
//! [ Ga (N) | zeros (N_T) | Gb (N) | zeros (N_T) ]
//! ```
//!
//! Correlating each half against its own sequence and summing the two outputs
//! cancels all range sidelobes, leaving `2N * h[d]` at tap `d` for a channel
//! with impulse response `h`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Sample period of a single-carrier 802.11ad chip at CB1 (1.76 GHz).
pub const CB1_CHIP_PERIOD: f64 = 1.0 / 1.76e9;

const MAX_LENGTH: usize = 128;

/// Two ±1 sequences whose aperiodic autocorrelations sum to `2N·δ(k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GolayPair {
    pub seq_a: Vec<i8>,
    pub seq_b: Vec<i8>,
}

impl GolayPair {
    pub fn len(&self) -> usize {
        self.seq_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq_a.is_empty()
    }

    /// Checks the complementarity property with exact integer arithmetic.
    pub fn is_complementary(&self) -> bool {
        if self.seq_a.len() != self.seq_b.len() || self.seq_a.is_empty() {
            return false;
        }
        let n = self.len() as i64;
        let ra = aperiodic_autocorrelation(&self.seq_a);
        let rb = aperiodic_autocorrelation(&self.seq_b);
        let zero = self.len() - 1;
        ra.iter().zip(&rb).enumerate().all(|(i, (a, b))| {
            let expected = if i == zero { 2 * n } else { 0 };
            a + b == expected
        })
    }

    /// Transmit CE field for `n_taps` observable taps.
    pub fn ce_field(&self, n_taps: usize) -> Vec<Complex64> {
        let mut field = Vec::with_capacity(2 * (self.len() + n_taps));
        for seq in [&self.seq_a, &self.seq_b] {
            field.extend(seq.iter().map(|&c| Complex64::new(c as f64, 0.0)));
            field.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), n_taps));
        }
        field
    }
}

/// Output of a full-overlap correlation: one value per lag.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationOutput {
    pub lags: Vec<Complex64>,
    pub sample_period: f64,
}

/// Builds a complementary pair by the recursive delay/weight construction
/// `a' = a | b`, `b' = a | -b`, seeded with `a = b = [1]`.
pub fn generate_golay_pair(length: usize) -> Result<GolayPair> {
    if !length.is_power_of_two() || !(2..=MAX_LENGTH).contains(&length) {
        return Err(invalid(format!("golay length must be a power of two in 2..={MAX_LENGTH}, got {length}")));
    }
    let mut a = vec![1i8];
    let mut b = vec![1i8];
    while a.len() < length {
        let next_a: Vec<i8> = a.iter().chain(&b).copied().collect();
        let next_b: Vec<i8> = a.iter().copied().chain(b.iter().map(|&x| -x)).collect();
        a = next_a;
        b = next_b;
    }
    Ok(GolayPair { seq_a: a, seq_b: b })
}

/// Aperiodic autocorrelation for lags `-(N-1)..=N-1`; lag 0 sits at index `N-1`.
pub fn aperiodic_autocorrelation(seq: &[i8]) -> Vec<i64> {
    let n = seq.len() as isize;
    (-(n - 1)..n)
        .map(|k| {
            (0..n)
                .filter(|&m| (0..n).contains(&(m + k)))
                .map(|m| seq[m as usize] as i64 * seq[(m + k) as usize] as i64)
                .sum()
        })
        .collect()
}

/// Full-overlap cross-correlation: `out[k] = Σ_m received[k+m]·seq[m]`.
pub fn correlate(received: &[Complex64], seq: &[i8]) -> Result<CorrelationOutput> {
    if seq.is_empty() {
        return Err(invalid("correlation sequence is empty"));
    }
    if received.len() < seq.len() {
        return Err(invalid(format!("received length {} shorter than sequence length {}", received.len(), seq.len())));
    }
    let lags = received
        .windows(seq.len())
        .map(|w| w.iter().zip(seq).fold(Complex64::new(0.0, 0.0), |acc, (x, &c)| acc + x * c as f64))
        .collect();
    Ok(CorrelationOutput { lags, sample_period: CB1_CHIP_PERIOD })
}

/// Complementary channel estimate from one received CE field.
///
/// The number of taps is implied by the field length:
/// `len = 2·(N + N_T)`. Output tap `i` is the sum of the Ga- and Gb-segment
/// correlations at lag `i`, unnormalized.
pub fn channel_estimate(rx_ce_field: &[Complex64], pair: &GolayPair) -> Result<Vec<Complex64>> {
    let n = pair.len();
    if !rx_ce_field.len().is_multiple_of(2) || rx_ce_field.len() / 2 <= n {
        return Err(Error::Framing(format!(
            "CE field of {} samples does not hold two {n}-chip segments plus guard",
            rx_ce_field.len()
        )));
    }
    let segment = rx_ce_field.len() / 2;
    let n_taps = segment - n;
    let (first, second) = rx_ce_field.split_at(segment);
    let ca = correlate(first, &pair.seq_a)?;
    let cb = correlate(second, &pair.seq_b)?;
    Ok(ca.lags[..n_taps].iter().zip(&cb.lags[..n_taps]).map(|(a, b)| a + b).collect())
}
