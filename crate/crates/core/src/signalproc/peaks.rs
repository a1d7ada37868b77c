use std::collections::BTreeSet;

use rustfft::num_complex::Complex64;

use super::{Envelope, SignalError};

/// Physiologic cycle-length search range for the periodicity estimate.
pub const MIN_PERIOD_S: f64 = 0.3;
pub const MAX_PERIOD_S: f64 = 1.5;

/// An autocorrelation peak must reach this fraction of the strongest one
/// to count as the fundamental (suppresses S1-S2 sub-period peaks).
const PERIOD_PEAK_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakConfig {
    /// Threshold is `mean + k * std` of the envelope.
    pub k: f64,
    /// Minimum peak spacing as a fraction of the estimated cycle length.
    pub refractory_factor: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            refractory_factor: 0.6,
        }
    }
}

/// Dominant cycle length in samples from the envelope autocorrelation,
/// searched over lags of 0.3 to 1.5 s. The shortest strong local maximum
/// wins over its multiples.
pub fn dominant_period(env: &Envelope) -> Result<usize, SignalError> {
    let fs = env.sample_rate;
    let n = env.values.len();
    let min_lag = (MIN_PERIOD_S * fs).ceil() as usize;
    let max_lag = (MAX_PERIOD_S * fs).floor() as usize;
    if n <= max_lag + 1 || min_lag < 1 {
        return Err(SignalError::NoHeartRhythm);
    }
    let mean = env.values.iter().sum::<f64>() / n as f64;

    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = env
        .values
        .iter()
        .map(|&v| Complex64::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    crate::fft::forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    crate::fft::inverse(size).process(&mut buf);
    let acf: Vec<f64> = buf.iter().take(max_lag + 2).map(|c| c.re / size as f64).collect();

    let peaks: Vec<(usize, f64)> = (min_lag.max(1)..=max_lag)
        .filter(|&l| acf[l] > 0.0 && acf[l] >= acf[l - 1] && acf[l] > acf[l + 1])
        .map(|l| (l, acf[l]))
        .collect();
    let strongest = peaks
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    peaks
        .iter()
        .find(|&&(_, v)| v >= PERIOD_PEAK_FRACTION * strongest)
        .map(|&(l, _)| l)
        .ok_or(SignalError::NoHeartRhythm)
}

/// S1 locations: envelope local maxima above `mean + k * std`, thinned so
/// that no two are closer than `refractory_factor` times the dominant cycle
/// length. Taller peaks claim their neighbourhood first, which drops the
/// S2 that follows each S1. Output is strictly increasing.
pub fn detect_s1(env: &Envelope, cfg: &PeakConfig) -> Result<Vec<usize>, SignalError> {
    let values = &env.values;
    let n = values.len();
    if n < 3 {
        return Err(SignalError::NoHeartRhythm);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std <= 1e-12 * mean.abs().max(1e-300) || std == 0.0 {
        return Err(SignalError::NoHeartRhythm);
    }
    let period = dominant_period(env)?;
    let refractory = (cfg.refractory_factor * period as f64).round() as usize;
    let threshold = mean + cfg.k * std;

    let mut candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| values[i] >= threshold && values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect();
    candidates.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut accepted = BTreeSet::new();
    for c in candidates {
        let lo = c.saturating_sub(refractory.saturating_sub(1));
        let clash = accepted.range(lo..c + refractory).next().is_some();
        if !clash {
            accepted.insert(c);
        }
    }
    if accepted.is_empty() {
        return Err(SignalError::NoHeartRhythm);
    }
    Ok(accepted.into_iter().collect())
}
