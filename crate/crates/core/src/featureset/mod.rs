//! Per-cycle descriptors: 18 time-domain values, 18 spectral values,
//! 13 MFCCs, 12 chroma bins and 7 spectral-contrast bands (68 in total).
//!
//! Column `fNN` of the feature table holds `feature_names()[NN]`.

mod chroma;
mod mfcc;
mod spectral;
mod time;

use std::sync::OnceLock;

use thiserror::Error;

use crate::corpus::{FieldReader, MurmurIntensity, TableRow};
use crate::signalproc::HeartCycle;

pub use chroma::{pitch_chroma, pitch_class, CHROMA_NAMES};
pub use mfcc::{dct2, hz_to_mel, mel_energies, mel_to_hz, mfcc, DEFAULT_MFCC, LOG_FLOOR, MEL_FILTERS};
pub use spectral::{
    spectral_contrast, spectral_features, CONTRAST_BANDS, MIN_SPECTRAL_LEN, SPECTRAL_FEATURE_NAMES,
};
pub use time::{time_features, TIME_FEATURE_NAMES};

pub const N_FEATURES: usize = 68;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("empty cycle")]
    EmptyCycle,
    #[error("cycle too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite feature `{name}` for {recording_id}#{cycle_index}")]
    NonFinite {
        name: &'static str,
        recording_id: String,
        cycle_index: usize,
    },
}

/// Descriptor names in vector order.
pub fn feature_names() -> &'static [String; N_FEATURES] {
    static NAMES: OnceLock<[String; N_FEATURES]> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mfcc = (0..DEFAULT_MFCC).map(|k| format!("mfcc_{k:02}"));
        let contrast = (0..CONTRAST_BANDS).map(|b| format!("contrast_band_{b}"));
        let all: Vec<String> = TIME_FEATURE_NAMES
            .iter()
            .chain(SPECTRAL_FEATURE_NAMES.iter())
            .map(|s| s.to_string())
            .chain(mfcc)
            .chain(CHROMA_NAMES.iter().map(|s| s.to_string()))
            .chain(contrast)
            .collect();
        all.try_into().expect("feature layout is 68 wide")
    })
}

/// Column name of feature `i` in the feature table.
pub fn column_name(i: usize) -> String {
    format!("f{i:02}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub recording_id: String,
    pub cycle_index: usize,
    pub values: Vec<f64>,
    pub sc_label: Option<MurmurIntensity>,
    /// Majority-vote label, present only for recordings kept by selection.
    pub mv_label: Option<MurmurIntensity>,
}

/// Full 68-value descriptor of one cycle. Carries the cycle's label as the
/// SC label; the majority vote is attached later.
pub fn extract(cycle: &HeartCycle) -> Result<FeatureVector, FeatureError> {
    let mut values = Vec::with_capacity(N_FEATURES);
    values.extend(time_features(cycle)?);
    let (spectral, contrast) = spectral::spectral_and_contrast(cycle)?;
    values.extend(spectral);
    values.extend(mfcc(cycle, DEFAULT_MFCC)?);
    values.extend(pitch_chroma(cycle)?);
    values.extend(contrast);
    debug_assert_eq!(values.len(), N_FEATURES);
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite {
            name: name_of(i),
            recording_id: cycle.recording_id.clone(),
            cycle_index: cycle.index,
        });
    }
    Ok(FeatureVector {
        recording_id: cycle.recording_id.clone(),
        cycle_index: cycle.index,
        values,
        sc_label: cycle.label,
        mv_label: None,
    })
}

fn name_of(i: usize) -> &'static str {
    feature_names()[i].as_str()
}

fn label_field(label: Option<MurmurIntensity>) -> String {
    label.map(|l| l.as_str().to_string()).unwrap_or_default()
}

impl TableRow for FeatureVector {
    fn columns() -> Vec<String> {
        let mut cols: Vec<String> = ["recording_id", "cycle_index", "sc_label", "mv_label"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cols.extend((0..N_FEATURES).map(column_name));
        cols
    }

    fn to_fields(&self) -> Vec<String> {
        let mut out = vec![
            self.recording_id.clone(),
            self.cycle_index.to_string(),
            label_field(self.sc_label),
            label_field(self.mv_label),
        ];
        out.extend(self.values.iter().map(|v| v.to_string()));
        out
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        let values = (0..N_FEATURES)
            .map(|i| f.parse::<f64>(&column_name(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureVector {
            recording_id: f.str("recording_id")?.to_string(),
            cycle_index: f.parse("cycle_index")?,
            values,
            sc_label: f.opt("sc_label")?,
            mv_label: f.opt("mv_label")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy_cycle(seed: u64, n: usize) -> HeartCycle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / 4000.0;
                0.6 * (-t * 20.0).exp() * (2.0 * std::f64::consts::PI * 90.0 * t).sin()
                    + rng.random_range(-0.05..0.05)
            })
            .collect();
        HeartCycle {
            recording_id: "r1".into(),
            index: 3,
            start: 0,
            samples,
            sample_rate: 4000.0,
            label: Some(MurmurIntensity::Mild),
        }
    }

    #[test]
    fn layout_is_68_unique_names() {
        let names = feature_names();
        let set: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(set.len(), N_FEATURES);
        assert_eq!(names[0], "mean");
        assert_eq!(names[18], "dominant_frequency_hz");
        assert_eq!(names[36], "mfcc_00");
        assert_eq!(names[49], "chroma_c");
        assert_eq!(names[61], "contrast_band_0");
        assert_eq!(FeatureVector::columns().len(), 4 + N_FEATURES);
    }

    #[test]
    fn extract_is_deterministic_and_finite() {
        let a = extract(&noisy_cycle(1, 3200)).unwrap();
        let b = extract(&noisy_cycle(1, 3200)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values.len(), N_FEATURES);
        assert!(a.values.iter().all(|v| v.is_finite()));
        assert_eq!(a.recording_id, "r1");
        assert_eq!(a.cycle_index, 3);
        assert_eq!(a.sc_label, Some(MurmurIntensity::Mild));
        assert_eq!(a.mv_label, None);
    }

    #[test]
    fn degenerate_cycles_stay_finite() {
        for samples in [vec![0.0; 64], vec![0.7; 64], vec![-1.0; 5000], vec![1e-300; 100]] {
            let v = extract(&HeartCycle::from_samples(samples, 4000.0)).unwrap();
            assert!(v.values.iter().all(|x| x.is_finite()), "{:?}", v.values);
        }
    }

    #[test]
    fn amplitude_scale_covariance() {
        let base = noisy_cycle(9, 2800);
        let names = feature_names();
        let pos = |name: &str| names.iter().position(|n| n == name).unwrap();
        let a = extract(&base).unwrap();
        for s in [0.25, 3.0] {
            let mut scaled = base.clone();
            scaled.samples.iter_mut().for_each(|x| *x *= s);
            let b = extract(&scaled).unwrap();
            let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(1e-300);
            for name in ["mean", "std", "rms", "max", "min"] {
                let i = pos(name);
                assert!(rel(a.values[i] * s, b.values[i]) < 1e-9, "{name}");
            }
            let mut invariant: Vec<usize> = [
                "zero_crossing_rate",
                "duration_s",
                "tempo_bpm",
                "dominant_frequency_hz",
                "spectral_centroid_hz",
                "spectral_flatness",
                "crest_factor",
            ]
            .iter()
            .map(|n| pos(n))
            .collect();
            invariant.extend(49..61);
            for i in invariant {
                assert!(rel(a.values[i], b.values[i]) < 1e-9, "{}", names[i]);
            }
        }
    }

    #[test]
    fn short_cycles_are_rejected() {
        assert!(matches!(
            extract(&HeartCycle::from_samples(vec![0.1; 63], 4000.0)),
            Err(FeatureError::TooShort { .. })
        ));
        assert!(matches!(
            extract(&HeartCycle::from_samples(vec![], 4000.0)),
            Err(FeatureError::EmptyCycle)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn any_cycle_of_64_or_more_is_finite(seed in any::<u64>(), n in 64usize..3000, amp in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<f64> = (0..n).map(|_| amp * rng.random_range(-1.0..1.0)).collect();
            let v = extract(&HeartCycle::from_samples(samples, 4000.0)).unwrap();
            prop_assert!(v.values.iter().all(|x| x.is_finite()));
        }
    }
}
