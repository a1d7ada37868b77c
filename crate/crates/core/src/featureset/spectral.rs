use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::signalproc::HeartCycle;

use super::chroma::chroma_energy;
use super::FeatureError;

pub const MIN_SPECTRAL_LEN: usize = 64;

pub const SPECTRAL_FEATURE_NAMES: [&str; 18] = [
    "dominant_frequency_hz",
    "mean_frequency_hz",
    "spectral_entropy",
    "bandwidth_hz",
    "spectral_centroid_hz",
    "rolloff_hz",
    "rms",
    "spectral_kurtosis",
    "spectral_skewness",
    "spectral_flatness",
    "spectral_slope",
    "spectral_energy",
    "spectral_power",
    "spectral_flux",
    "spectral_contrast_mean",
    "spectral_contrast_std",
    "chroma_energy_mean",
    "chroma_energy_std",
];

pub const CONTRAST_BANDS: usize = 7;

const ROLLOFF_FRACTION: f64 = 0.85;
const FRAME_S: f64 = 0.025;
const HOP_S: f64 = 0.010;
const MIN_FRAME_FFT: usize = 256;
const CONTRAST_QUANTILE: f64 = 0.02;
const CONTRAST_FLOOR: f64 = 1e-10;

/// Symmetric Hann window.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// One-sided spectrum of a Hann-windowed, zero-padded frame.
#[derive(Debug, Clone)]
pub(crate) struct Spectrum {
    pub bin_hz: f64,
    /// |X_k| for k = 0..=fft_len/2.
    pub magnitude: Vec<f64>,
    /// |X_k|^2 for k = 0..=fft_len/2.
    pub power: Vec<f64>,
    /// Sum of |X_k|^2 over the full two-sided spectrum divided by `fft_len`,
    /// equal to the windowed signal's energy.
    pub energy: f64,
}

impl Spectrum {
    pub fn compute(samples: &[f64], fs: f64, min_fft: usize) -> Spectrum {
        Self::windowed(samples, &hann(samples.len()), fs, min_fft)
    }

    fn windowed(samples: &[f64], window: &[f64], fs: f64, min_fft: usize) -> Spectrum {
        let fft_len = samples.len().max(min_fft).max(2).next_power_of_two();
        let mut buf: Vec<Complex64> = samples
            .iter()
            .zip(window)
            .map(|(x, w)| Complex64::new(x * w, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(fft_len)
            .collect();
        let fft = crate::fft::forward(fft_len);
        fft.process(&mut buf);
        let energy = buf.iter().map(|c| c.norm_sqr()).sum::<f64>() / fft_len as f64;
        let half = fft_len / 2;
        let power: Vec<f64> = buf[..=half].iter().map(|c| c.norm_sqr()).collect();
        let magnitude: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
        Spectrum {
            bin_hz: fs / fft_len as f64,
            magnitude,
            power,
            energy,
        }
    }

    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.bin_hz
    }
}

/// Short-time frames (25 ms, 10 ms hop). Cycles shorter than one frame
/// yield a single frame of the whole cycle.
pub(crate) fn frames(samples: &[f64], fs: f64) -> Vec<Spectrum> {
    let frame = ((FRAME_S * fs).round() as usize).max(1);
    let hop = ((HOP_S * fs).round() as usize).max(1);
    let min_fft = MIN_FRAME_FFT.max(frame.next_power_of_two());
    if samples.len() <= frame {
        return vec![Spectrum::compute(samples, fs, min_fft)];
    }
    let window = hann(frame);
    (0..=(samples.len() - frame) / hop)
        .map(|i| Spectrum::windowed(&samples[i * hop..i * hop + frame], &window, fs, min_fft))
        .collect()
}

/// Octave band edges from Nyquist downward: [0, ny/64, ny/32, ..., ny].
fn contrast_band_edges(fs: f64) -> [f64; CONTRAST_BANDS + 1] {
    let nyquist = fs / 2.0;
    let mut edges = [0.0; CONTRAST_BANDS + 1];
    for (j, e) in edges.iter_mut().enumerate().skip(1) {
        *e = nyquist / 2f64.powi((CONTRAST_BANDS - j) as i32);
    }
    edges
}

/// Per-band peak-minus-valley log power, averaged over short-time frames.
/// Band 0 is the sub-octave [0, ny/64); bands 1..=6 are true octaves.
pub fn spectral_contrast(cycle: &HeartCycle) -> Result<[f64; CONTRAST_BANDS], FeatureError> {
    check_len(cycle)?;
    Ok(contrast_of(&frames(&cycle.samples, cycle.sample_rate), cycle.sample_rate))
}

fn contrast_of(spectra: &[Spectrum], fs: f64) -> [f64; CONTRAST_BANDS] {
    let edges = contrast_band_edges(fs);
    // Every frame has the same FFT length, so band membership is shared.
    let first = &spectra[0];
    let bands: Vec<Vec<usize>> = (0..CONTRAST_BANDS)
        .map(|b| {
            (0..first.power.len())
                .filter(|&k| {
                    let f = first.freq(k);
                    f >= edges[b] && (f < edges[b + 1] || (b == CONTRAST_BANDS - 1 && f <= edges[b + 1]))
                })
                .collect()
        })
        .collect();
    let mut acc = [0.0; CONTRAST_BANDS];
    let mut band = Vec::new();
    for s in spectra {
        for (b, bins) in bands.iter().enumerate() {
            if bins.is_empty() {
                continue;
            }
            let q = ((CONTRAST_QUANTILE * bins.len() as f64).round() as usize).max(1);
            let (valley, peak) = if q == 1 {
                bins.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| {
                    (lo.min(s.power[k]), hi.max(s.power[k]))
                })
            } else {
                band.clear();
                band.extend(bins.iter().map(|&k| s.power[k]));
                band.sort_by(f64::total_cmp);
                (
                    band[..q].iter().sum::<f64>() / q as f64,
                    band[band.len() - q..].iter().sum::<f64>() / q as f64,
                )
            };
            acc[b] += (peak + CONTRAST_FLOOR).ln() - (valley + CONTRAST_FLOOR).ln();
        }
    }
    for v in acc.iter_mut() {
        *v /= spectra.len() as f64;
    }
    acc
}

/// Mean L2 distance between consecutive L1-normalized frame magnitudes.
fn spectral_flux(spectra: &[Spectrum]) -> f64 {
    if spectra.len() < 2 {
        return 0.0;
    }
    let normalized: Vec<Vec<f64>> = spectra
        .iter()
        .map(|s| {
            let total: f64 = s.magnitude.iter().sum();
            if total > 0.0 {
                s.magnitude.iter().map(|m| m / total).collect()
            } else {
                vec![0.0; s.magnitude.len()]
            }
        })
        .collect();
    let sum: f64 = normalized
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    sum / (normalized.len() - 1) as f64
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_len(cycle: &HeartCycle) -> Result<(), FeatureError> {
    if cycle.samples.len() < MIN_SPECTRAL_LEN {
        return Err(FeatureError::TooShort {
            len: cycle.samples.len(),
            min: MIN_SPECTRAL_LEN,
        });
    }
    Ok(())
}

/// The 18 frequency-domain descriptors, in [`SPECTRAL_FEATURE_NAMES`] order.
///
/// Everything except flux and contrast uses one Hann-windowed frame over the
/// whole cycle, zero-padded to the next power of two. "Mean frequency" is
/// power-weighted; the centroid is magnitude-weighted. Spectral energy is
/// normalized so it equals the windowed signal's energy (Parseval).
pub fn spectral_features(cycle: &HeartCycle) -> Result<[f64; 18], FeatureError> {
    spectral_and_contrast(cycle).map(|(s, _)| s)
}

/// [`spectral_features`] and [`spectral_contrast`] from one set of frames.
pub(crate) fn spectral_and_contrast(
    cycle: &HeartCycle,
) -> Result<([f64; 18], [f64; CONTRAST_BANDS]), FeatureError> {
    check_len(cycle)?;
    let fs = cycle.sample_rate;
    let x = &cycle.samples;
    let s = Spectrum::compute(x, fs, 0);
    let freqs: Vec<f64> = (0..s.power.len()).map(|k| s.freq(k)).collect();
    let total_power: f64 = s.power.iter().sum();
    let total_mag: f64 = s.magnitude.iter().sum();

    let dominant = {
        let mut best = 0;
        for (k, m) in s.magnitude.iter().enumerate() {
            if *m > s.magnitude[best] {
                best = k;
            }
        }
        freqs[best]
    };

    let (mean_freq, skew, kurt, entropy, rolloff, flatness) = if total_power > 0.0 {
        let p: Vec<f64> = s.power.iter().map(|v| v / total_power).collect();
        let mu: f64 = p.iter().zip(&freqs).map(|(p, f)| p * f).sum();
        let moment = |order: i32| -> f64 {
            p.iter()
                .zip(&freqs)
                .map(|(p, f)| p * (f - mu).powi(order))
                .sum()
        };
        let var = moment(2);
        let sigma = var.sqrt();
        let (skew, kurt) = if sigma > 1e-12 * s.bin_hz {
            (moment(3) / sigma.powi(3), moment(4) / (var * var) - 3.0)
        } else {
            (0.0, 0.0)
        };
        let entropy = -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
            / (p.len() as f64).ln();
        let mut cum = 0.0;
        let mut rolloff = freqs[freqs.len() - 1];
        for (k, v) in s.power.iter().enumerate() {
            cum += v;
            if cum >= ROLLOFF_FRACTION * total_power {
                rolloff = freqs[k];
                break;
            }
        }
        let max_p = s.power.iter().cloned().fold(0.0, f64::max);
        let floor = 1e-20 * max_p;
        let log_mean =
            s.power.iter().map(|v| v.max(floor).ln()).sum::<f64>() / s.power.len() as f64;
        let arith = total_power / s.power.len() as f64;
        (mu, skew, kurt, entropy, rolloff, log_mean.exp() / arith)
    } else {
        (0.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    };

    let centroid = if total_mag > 0.0 {
        s.magnitude.iter().zip(&freqs).map(|(m, f)| m * f).sum::<f64>() / total_mag
    } else {
        0.0
    };
    let bandwidth = if total_power > 0.0 {
        (s.power
            .iter()
            .zip(&freqs)
            .map(|(p, f)| p * (f - centroid).powi(2))
            .sum::<f64>()
            / total_power)
            .sqrt()
    } else {
        0.0
    };

    let slope = {
        let fm = freqs.iter().sum::<f64>() / freqs.len() as f64;
        let mm = total_mag / freqs.len() as f64;
        let cov: f64 = freqs
            .iter()
            .zip(&s.magnitude)
            .map(|(f, m)| (f - fm) * (m - mm))
            .sum();
        let var: f64 = freqs.iter().map(|f| (f - fm).powi(2)).sum();
        cov / var
    };

    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    let short_time = frames(x, fs);
    let contrast = contrast_of(&short_time, fs);
    let (contrast_mean, contrast_std) = mean_std(&contrast[1..]);
    let (chroma_mean, chroma_std) = mean_std(&chroma_energy(&s));

    let features = [
        dominant,
        mean_freq,
        entropy,
        bandwidth,
        centroid,
        rolloff,
        rms,
        kurt,
        skew,
        flatness,
        slope,
        s.energy,
        s.energy / x.len() as f64,
        spectral_flux(&short_time),
        contrast_mean,
        contrast_std,
        chroma_mean,
        chroma_std,
    ];
    Ok((features, contrast))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn idx(name: &str) -> usize {
        SPECTRAL_FEATURE_NAMES.iter().position(|n| *n == name).unwrap()
    }

    fn tone(freq: f64, fs: f64, n: usize) -> HeartCycle {
        HeartCycle::from_samples(
            (0..n)
                .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
                .collect(),
            fs,
        )
    }

    #[test]
    fn pure_tone_frequencies_agree() {
        let c = tone(100.0, 4000.0, 4000);
        let f = spectral_features(&c).unwrap();
        let bin = 4000.0 / 4096.0;
        for name in ["dominant_frequency_hz", "mean_frequency_hz", "spectral_centroid_hz"] {
            assert!((f[idx(name)] - 100.0).abs() <= bin, "{name} = {}", f[idx(name)]);
        }
        assert!(f[idx("spectral_flatness")] <= 0.05);
    }

    #[test]
    fn white_noise_is_flat_and_high_entropy() {
        let mut flat = 0.0;
        let mut ent = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..2048).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = spectral_features(&HeartCycle::from_samples(x, 4000.0)).unwrap();
            flat += f[idx("spectral_flatness")];
            ent += f[idx("spectral_entropy")];
        }
        assert!(flat / 100.0 >= 0.5, "flatness {}", flat / 100.0);
        assert!(ent / 100.0 >= 0.9, "entropy {}", ent / 100.0);
    }

    #[test]
    fn parseval_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [64, 100, 1000, 3001] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = hann(n);
            let time_energy: f64 = x.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum();
            let f = spectral_features(&HeartCycle::from_samples(x, 4000.0)).unwrap();
            let e = f[idx("spectral_energy")];
            assert!(((e - time_energy) / time_energy).abs() < 1e-6);
            assert!((f[idx("spectral_power")] - e / n as f64).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn zero_and_constant_cycles() {
        let f = spectral_features(&HeartCycle::from_samples(vec![0.0; 256], 4000.0)).unwrap();
        assert_eq!(f[idx("spectral_energy")], 0.0);
        assert_eq!(f[idx("spectral_slope")], 0.0);
        assert!(f.iter().all(|v| v.is_finite()));

        // A constant carries energy c^2 * sum(w^2) after windowing.
        let c = 0.4;
        let f = spectral_features(&HeartCycle::from_samples(vec![c; 256], 4000.0)).unwrap();
        let sum_w2: f64 = hann(256).iter().map(|w| w * w).sum();
        assert!((f[idx("spectral_energy")] - c * c * sum_w2).abs() < 1e-9);
        assert_eq!(f[idx("dominant_frequency_hz")], 0.0);
    }

    #[test]
    fn too_short() {
        let c = HeartCycle::from_samples(vec![0.1; 63], 4000.0);
        assert!(matches!(
            spectral_features(&c),
            Err(FeatureError::TooShort { len: 63, .. })
        ));
    }

    #[test]
    fn contrast_band_layout() {
        assert_eq!(
            contrast_band_edges(4000.0),
            [0.0, 31.25, 62.5, 125.0, 250.0, 500.0, 1000.0, 2000.0]
        );
        let c = tone(300.0, 4000.0, 2000);
        let contrast = spectral_contrast(&c).unwrap();
        // The tone's octave (250-500 Hz) has the sharpest peak-to-valley ratio.
        let best = (0..CONTRAST_BANDS)
            .max_by(|&a, &b| contrast[a].total_cmp(&contrast[b]))
            .unwrap();
        assert_eq!(best, 4);
    }

    #[test]
    fn flux_of_stationary_tone_is_small_versus_noise_bursts() {
        let steady = spectral_flux(&frames(&tone(200.0, 4000.0, 4000).samples, 4000.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bursts: Vec<f64> = (0..4000)
            .map(|i| if (i / 200) % 2 == 0 { rng.random_range(-1.0..1.0) } else { (i as f64 * 0.3).sin() })
            .collect();
        let changing = spectral_flux(&frames(&bursts, 4000.0));
        assert!(steady < changing, "{steady} vs {changing}");
    }
}
