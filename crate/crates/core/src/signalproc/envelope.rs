use rustfft::num_complex::Complex64;

use super::SignalError;

pub const MIN_ENVELOPE_LEN: usize = 16;

/// Non-negative amplitude envelope, same length as its source signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub values: Vec<f64>,
    pub sample_rate: f64,
    /// Moving-average window in seconds.
    pub smoothing_window: f64,
}

impl Envelope {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Analytic signal via the FFT: negative frequencies zeroed, positive doubled.
pub fn analytic_signal(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    if n == 0 {
        return buf;
    }
    crate::fft::forward(n).process(&mut buf);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= h;
    }
    crate::fft::inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    buf
}

/// Magnitude of the analytic signal, smoothed by a centered moving average
/// of `smooth_window` seconds. Near the edges the average covers only the
/// available samples.
pub fn hilbert_envelope(
    signal: &[f64],
    fs: f64,
    smooth_window: f64,
) -> Result<Envelope, SignalError> {
    if signal.len() < MIN_ENVELOPE_LEN {
        return Err(SignalError::TooShort {
            len: signal.len(),
            min: MIN_ENVELOPE_LEN,
        });
    }
    if !(smooth_window >= 0.0) || !(fs > 0.0) {
        return Err(SignalError::InvalidParameter(format!(
            "smoothing window {smooth_window} s at {fs} Hz"
        )));
    }
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(SignalError::NonFinite);
    }
    let magnitude: Vec<f64> = analytic_signal(signal).iter().map(|c| c.norm_sqr().sqrt()).collect();
    let width = (smooth_window * fs).round() as usize;
    let values = moving_average(&magnitude, width);
    Ok(Envelope {
        values,
        sample_rate: fs,
        smoothing_window: smooth_window,
    })
}

fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return x.to_vec();
    }
    let half = width / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            // Prefix sums can drift slightly negative on silent stretches.
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_envelope_is_its_amplitude() {
        let fs = 4000.0;
        let x: Vec<f64> = (0..8000)
            .map(|i| (2.0 * PI * 100.0 * i as f64 / fs).sin())
            .collect();
        let env = hilbert_envelope(&x, fs, 0.0).unwrap();
        let margin = x.len() / 20;
        for v in &env.values[margin..x.len() - margin] {
            assert!((v - 1.0).abs() <= 0.02, "{v}");
        }
    }

    #[test]
    fn tracks_a_slow_modulator() {
        let fs = 4000.0;
        let n = 8000;
        let a = |t: f64| 0.5 * (1.0 + 0.5 * (2.0 * PI * 2.0 * t).sin());
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                a(t) * (2.0 * PI * 150.0 * t).sin()
            })
            .collect();
        let env = hilbert_envelope(&x, fs, 0.0).unwrap();
        let margin = n / 20;
        for i in margin..n - margin {
            let truth = a(i as f64 / fs);
            let err = (env.values[i] - truth).abs() / truth;
            assert!(err <= 0.05, "i={i} env={} truth={truth}", env.values[i]);
        }
    }

    #[test]
    fn silence_and_length() {
        let env = hilbert_envelope(&[0.0; 64], 4000.0, 0.02).unwrap();
        assert_eq!(env.len(), 64);
        assert!(env.values.iter().all(|&v| v == 0.0));
        assert!(matches!(
            hilbert_envelope(&[0.0; 15], 4000.0, 0.0),
            Err(SignalError::TooShort { .. })
        ));
    }

    #[test]
    fn odd_lengths_work() {
        let fs = 4000.0;
        let x: Vec<f64> = (0..4001)
            .map(|i| 0.3 * (2.0 * PI * 250.0 * i as f64 / fs).cos())
            .collect();
        let env = hilbert_envelope(&x, fs, 0.02).unwrap();
        for v in &env.values[400..3600] {
            assert!((v - 0.3).abs() < 0.01);
        }
        assert!(env.values.iter().all(|&v| v >= 0.0));
    }
}
