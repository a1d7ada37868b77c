use std::f64::consts::PI;

use crate::signalproc::HeartCycle;

use super::spectral::{Spectrum, MIN_SPECTRAL_LEN};
use super::FeatureError;

pub const MEL_FILTERS: usize = 26;
pub const DEFAULT_MFCC: usize = 13;
const MEL_MAX_HZ: f64 = 2000.0;
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Energies of 26 triangular mel filters spanning 0 Hz to
/// min(2000 Hz, Nyquist), evaluated at each bin's exact frequency.
pub fn mel_energies(power: &[f64], bin_hz: f64, fs: f64) -> [f64; MEL_FILTERS] {
    let top = hz_to_mel(MEL_MAX_HZ.min(fs / 2.0));
    let edges: Vec<f64> = (0..MEL_FILTERS + 2)
        .map(|i| mel_to_hz(top * i as f64 / (MEL_FILTERS + 1) as f64))
        .collect();
    let mut out = [0.0; MEL_FILTERS];
    for (m, e) in out.iter_mut().enumerate() {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        *e = power
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let f = k as f64 * bin_hz;
                let w = if f > lo && f <= mid {
                    (f - lo) / (mid - lo)
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                w * p
            })
            .sum();
    }
    out
}

/// Orthonormal DCT-II, first `n_out` coefficients.
pub fn dct2(input: &[f64], n_out: usize) -> Vec<f64> {
    let n = input.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * input
                    .iter()
                    .enumerate()
                    .map(|(m, v)| v * (PI * k as f64 * (m as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Cepstral coefficients of the whole cycle treated as one frame: mel
/// filter energies, natural log with a 1e-10 floor, orthonormal DCT-II.
pub fn mfcc(cycle: &HeartCycle, n_coeff: usize) -> Result<Vec<f64>, FeatureError> {
    if cycle.samples.len() < MIN_SPECTRAL_LEN {
        return Err(FeatureError::TooShort {
            len: cycle.samples.len(),
            min: MIN_SPECTRAL_LEN,
        });
    }
    if n_coeff == 0 || n_coeff > MEL_FILTERS {
        return Err(FeatureError::InvalidParameter(format!(
            "n_coeff must be in 1..={MEL_FILTERS}, got {n_coeff}"
        )));
    }
    let s = Spectrum::compute(&cycle.samples, cycle.sample_rate, 0);
    let log_energy: Vec<f64> = mel_energies(&s.power, s.bin_hz, cycle.sample_rate)
        .iter()
        .map(|e| e.max(LOG_FLOOR).ln())
        .collect();
    Ok(dct2(&log_energy, n_coeff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook DCT-II, written independently of `dct2`: C = D * x with an
    /// explicit basis matrix.
    fn reference_mfcc(log_energy: &[f64], n_out: usize) -> Vec<f64> {
        let n = log_energy.len();
        let mut basis = vec![vec![0.0; n]; n_out];
        for (k, row) in basis.iter_mut().enumerate() {
            for (m, b) in row.iter_mut().enumerate() {
                let norm = if k == 0 { 1.0 / (n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                *b = norm * (std::f64::consts::PI / n as f64 * (m as f64 + 0.5) * k as f64).cos();
            }
        }
        basis
            .iter()
            .map(|row| row.iter().zip(log_energy).map(|(b, l)| b * l).sum())
            .collect()
    }

    #[test]
    fn silence_gives_the_floor_constant() {
        let c = mfcc(&HeartCycle::from_samples(vec![0.0; 1024], 4000.0), 13).unwrap();
        let c0 = (1.0f64 / 26.0).sqrt() * 26.0 * LOG_FLOOR.ln();
        assert!((c[0] - c0).abs() < 1e-9);
        for v in &c[1..] {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn doubling_amplitude_shifts_only_c0() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..3000).map(|_| rng.random_range(-0.4..0.4)).collect();
        let a = mfcc(&HeartCycle::from_samples(x.clone(), 4000.0), 13).unwrap();
        let b = mfcc(
            &HeartCycle::from_samples(x.iter().map(|v| 2.0 * v).collect(), 4000.0),
            13,
        )
        .unwrap();
        let expected = 26f64.sqrt() * 4f64.ln();
        assert!((b[0] - a[0] - expected).abs() < 1e-9);
        for k in 1..13 {
            assert!((b[k] - a[k]).abs() < 1e-9, "c{k}");
        }
    }

    #[test]
    fn matches_reference_dct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..1500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = Spectrum::compute(&x, 4000.0, 0);
        let logs: Vec<f64> = mel_energies(&s.power, s.bin_hz, 4000.0)
            .iter()
            .map(|e| e.max(LOG_FLOOR).ln())
            .collect();
        let ours = mfcc(&HeartCycle::from_samples(x, 4000.0), 13).unwrap();
        for (a, b) in ours.iter().zip(reference_mfcc(&logs, 13)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn tones_at_different_pitches_differ() {
        let tone = |f: f64| {
            HeartCycle::from_samples(
                (0..4000)
                    .map(|i| (2.0 * PI * f * i as f64 / 4000.0).sin())
                    .collect(),
                4000.0,
            )
        };
        let hi = mfcc(&tone(300.0), 13).unwrap();
        let lo = mfcc(&tone(80.0), 13).unwrap();
        assert_ne!(hi, lo);
        let signs = |v: &[f64]| v[1..].iter().map(|x| x.is_sign_positive()).collect::<Vec<_>>();
        assert_ne!(signs(&hi), signs(&lo));
    }

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 50.0, 440.0, 2000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(mfcc(&HeartCycle::from_samples(vec![0.0; 10], 4000.0), 13).is_err());
        assert!(mfcc(&HeartCycle::from_samples(vec![0.0; 100], 4000.0), 27).is_err());
    }
}
