use crate::signalproc::HeartCycle;

use super::FeatureError;

pub const TIME_FEATURE_NAMES: [&str; 18] = [
    "mean",
    "median",
    "variance",
    "std",
    "skewness",
    "kurtosis",
    "p25",
    "p75",
    "max",
    "min",
    "mean_abs_dev",
    "median_abs_dev",
    "duration_s",
    "amplitude_entropy",
    "zero_crossing_rate",
    "tempo_bpm",
    "pitch_hz",
    "crest_factor",
];

const HISTOGRAM_BINS: usize = 64;
const PITCH_MIN_HZ: f64 = 50.0;
const PITCH_MAX_HZ: f64 = 500.0;

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted_copy(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Shannon entropy (nats) of a 64-bin histogram spanning [min, max].
fn histogram_entropy(x: &[f64], min: f64, max: f64) -> f64 {
    if !(max > min) {
        return 0.0;
    }
    let mut counts = [0usize; HISTOGRAM_BINS];
    let width = (max - min) / HISTOGRAM_BINS as f64;
    for &v in x {
        let bin = (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    let n = x.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Sign changes per second; zero counts as positive.
fn zero_crossing_rate(x: &[f64], duration: f64) -> f64 {
    let crossings = x
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    crossings as f64 / duration
}

/// Fundamental from the autocorrelation peak over 50-500 Hz lags, refined
/// by parabolic interpolation. Signals without positive correlation in the
/// range report 0.
fn autocorrelation_pitch(x: &[f64], fs: f64) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let lag_lo = (fs / PITCH_MAX_HZ).ceil().max(1.0) as usize;
    let lag_hi = ((fs / PITCH_MIN_HZ).floor() as usize).min(n.saturating_sub(2));
    if lag_lo >= lag_hi {
        return 0.0;
    }
    let r = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum()
    };
    let values: Vec<f64> = (lag_lo - 1..=lag_hi + 1).map(r).collect();
    let mut best = None;
    for (i, &v) in values.iter().enumerate().skip(1).take(lag_hi - lag_lo + 1) {
        if v > 0.0 && best.map_or(true, |(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    let Some((i, v)) = best else { return 0.0 };
    let (left, right) = (values[i - 1], values[i + 1]);
    let denom = left - 2.0 * v + right;
    let shift = if denom < 0.0 {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let lag = (lag_lo - 1 + i) as f64 + shift;
    fs / lag
}

/// The 18 time-domain descriptors, in [`TIME_FEATURE_NAMES`] order.
///
/// Zero-variance cycles get skewness and kurtosis of 0; silence gets a
/// crest factor and pitch of 0.
pub fn time_features(cycle: &HeartCycle) -> Result<[f64; 18], FeatureError> {
    let x = &cycle.samples;
    if x.is_empty() {
        return Err(FeatureError::EmptyCycle);
    }
    let n = x.len() as f64;
    let fs = cycle.sample_rate;
    let sorted = sorted_copy(x);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let mean = x.iter().sum::<f64>() / n;
    let median = quantile_sorted(&sorted, 0.5);
    let (m2, m3, m4) = x.iter().fold((0.0, 0.0, 0.0), |(a, b, c), v| {
        let d = v - mean;
        let d2 = d * d;
        (a + d2, b + d2 * d, c + d2 * d2)
    });
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let peak = min.abs().max(max.abs());
    let degenerate = m2 <= (1e-12 * peak).powi(2);
    let (skewness, kurtosis) = if degenerate {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    let variance = if degenerate { 0.0 } else { m2 };
    let mean_abs_dev = x.iter().map(|v| (v - mean).abs()).sum::<f64>() / n;
    let median_abs_dev = {
        let dev = sorted_copy(&x.iter().map(|v| (v - median).abs()).collect::<Vec<_>>());
        quantile_sorted(&dev, 0.5)
    };
    let duration = n / fs;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let crest = if rms > 0.0 { peak / rms } else { 0.0 };

    Ok([
        mean,
        median,
        variance,
        variance.sqrt(),
        skewness,
        kurtosis,
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.75),
        max,
        min,
        mean_abs_dev,
        median_abs_dev,
        duration,
        histogram_entropy(x, min, max),
        zero_crossing_rate(x, duration),
        60.0 / duration,
        if degenerate { 0.0 } else { autocorrelation_pitch(x, fs) },
        crest,
    ])
}
