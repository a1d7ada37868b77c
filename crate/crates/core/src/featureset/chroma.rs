use crate::signalproc::HeartCycle;

use super::spectral::{Spectrum, MIN_SPECTRAL_LEN};
use super::FeatureError;

pub const CHROMA_NAMES: [&str; 12] = [
    "chroma_c", "chroma_cs", "chroma_d", "chroma_ds", "chroma_e", "chroma_f", "chroma_fs",
    "chroma_g", "chroma_gs", "chroma_a", "chroma_as", "chroma_b",
];

const CHROMA_MIN_HZ: f64 = 50.0;
const CHROMA_MAX_HZ: f64 = 1000.0;
const A440: f64 = 440.0;
/// Index of pitch class A when C is 0.
const A_INDEX: i64 = 9;

/// Pitch class (C = 0) nearest to `freq` on the equal-tempered A440 grid.
pub fn pitch_class(freq: f64) -> usize {
    let semitones = (12.0 * (freq / A440).log2()).round() as i64;
    (semitones + A_INDEX).rem_euclid(12) as usize
}

/// Raw spectral power folded into 12 pitch classes over 50-1000 Hz.
pub(crate) fn chroma_energy(s: &Spectrum) -> [f64; 12] {
    let mut acc = [0.0; 12];
    for (k, p) in s.power.iter().enumerate() {
        let f = s.freq(k);
        if (CHROMA_MIN_HZ..=CHROMA_MAX_HZ).contains(&f) {
            acc[pitch_class(f)] += p;
        }
    }
    acc
}

/// L1-normalized 12-bin chroma. Silence maps to the uniform 1/12 vector.
pub fn pitch_chroma(cycle: &HeartCycle) -> Result<[f64; 12], FeatureError> {
    if cycle.samples.len() < MIN_SPECTRAL_LEN {
        return Err(FeatureError::TooShort {
            len: cycle.samples.len(),
            min: MIN_SPECTRAL_LEN,
        });
    }
    let energy = chroma_energy(&Spectrum::compute(&cycle.samples, cycle.sample_rate, 0));
    let total: f64 = energy.iter().sum();
    if total <= 0.0 {
        return Ok([1.0 / 12.0; 12]);
    }
    Ok(energy.map(|e| e / total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64) -> HeartCycle {
        HeartCycle::from_samples(
            (0..4000)
                .map(|i| (2.0 * PI * freq * i as f64 / 4000.0).sin())
                .collect(),
            4000.0,
        )
    }

    fn argmax(v: &[f64]) -> usize {
        (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
    }

    #[test]
    fn a440_lands_in_class_a() {
        let c = pitch_chroma(&tone(440.0)).unwrap();
        assert_eq!(CHROMA_NAMES[9], "chroma_a");
        assert!(c[9] >= 0.9, "{c:?}");
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn octaves_share_a_class() {
        let low = pitch_chroma(&tone(440.0)).unwrap();
        let high = pitch_chroma(&tone(880.0)).unwrap();
        assert_eq!(argmax(&low), argmax(&high));
        assert_eq!(pitch_class(110.0), 9);
        assert_eq!(pitch_class(261.63), 0);
    }

    #[test]
    fn silence_is_uniform() {
        let c = pitch_chroma(&HeartCycle::from_samples(vec![0.0; 512], 4000.0)).unwrap();
        assert!(c.iter().all(|&v| v == 1.0 / 12.0));
    }
}
