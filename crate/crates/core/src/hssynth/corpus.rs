use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FieldReader, MurmurIntensity, TableRow};
use crate::labelkit::LabelMatrix;

use super::raters::{assign_sc_labels, simulate_raters, RaterModel, ScLabelModel, DEFAULT_COLUMNS};
use super::{generate_recording, MurmurGains, SynthError, SynthRecording, SynthSpec, MAX_HEART_RATE, MIN_HEART_RATE};

/// Everything needed to regenerate a synthetic study from one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    /// Recordings per class: mild, moderate, loud/thrilling.
    pub class_counts: [usize; 3],
    pub heart_rate_min: f64,
    pub heart_rate_max: f64,
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub gains: MurmurGains,
    pub raters: RaterModel,
    pub sc: ScLabelModel,
    /// Set by the caller, never read from config.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            class_counts: [50, 40, 50],
            heart_rate_min: MIN_HEART_RATE,
            heart_rate_max: MAX_HEART_RATE,
            snr_db_min: 10.0,
            snr_db_max: 20.0,
            duration_s: 10.0,
            sample_rate: crate::corpus::CANONICAL_RATE,
            gains: MurmurGains::default(),
            raters: RaterModel::default(),
            sc: ScLabelModel::default(),
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn n_recordings(&self) -> usize {
        self.class_counts.iter().sum()
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n_recordings() == 0 {
            return Err(SynthError::InvalidSpec("class_counts are all zero".into()));
        }
        if !(self.heart_rate_min <= self.heart_rate_max) {
            return Err(SynthError::InvalidSpec("heart_rate_min > heart_rate_max".into()));
        }
        if !(self.snr_db_min <= self.snr_db_max) {
            return Err(SynthError::InvalidSpec("snr_db_min > snr_db_max".into()));
        }
        self.raters.validate()
    }
}

/// Independent seed for sub-stream `tag` of `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng.next_u64()
}

const STREAM_LAYOUT: u64 = 0;
const STREAM_RATERS: u64 = 1;
const STREAM_SC: u64 = 2;
const STREAM_RECORDINGS: u64 = 1 << 32;

/// Line of `truth.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub recording_id: String,
    pub class: MurmurIntensity,
    pub heart_rate_bpm: f64,
    /// Sample indices at the canonical rate.
    pub s1_onsets: Vec<usize>,
}

impl TableRow for TruthRow {
    fn columns() -> Vec<String> {
        ["recording_id", "class", "heart_rate_bpm", "s1_onsets"].map(String::from).to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        let onsets: Vec<String> = self.s1_onsets.iter().map(|o| o.to_string()).collect();
        vec![
            self.recording_id.clone(),
            self.class.to_string(),
            self.heart_rate_bpm.to_string(),
            onsets.join(" "),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        let s1_onsets = f
            .str("s1_onsets")?
            .split_whitespace()
            .map(|s| s.parse().map_err(|e| format!("s1_onsets: {e}")))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            recording_id: f.str("recording_id")?.to_string(),
            class: f.parse("class")?,
            heart_rate_bpm: f.parse("heart_rate_bpm")?,
            s1_onsets,
        })
    }
}

/// A synthetic study: recordings carrying noisy SC labels, their ground
/// truth, and the simulated expert label matrix.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub recordings: Vec<SynthRecording>,
    pub truth: Vec<TruthRow>,
    pub labels: LabelMatrix,
}

/// Generates `spec.n_recordings()` recordings with exactly the requested
/// class counts in shuffled order. Ids are `syn000`, `syn001`, ...
pub fn generate_corpus(spec: &CorpusSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let n = spec.n_recordings();
    let mut layout = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_LAYOUT));
    let mut classes: Vec<MurmurIntensity> = MurmurIntensity::ALL
        .iter()
        .zip(spec.class_counts)
        .flat_map(|(&c, k)| std::iter::repeat_n(c, k))
        .collect();
    classes.shuffle(&mut layout);
    let width = (n - 1).to_string().len().max(3);
    let specs: Vec<SynthSpec> = classes
        .iter()
        .enumerate()
        .map(|(i, &class)| SynthSpec {
            id: format!("syn{i:0width$}"),
            heart_rate_bpm: layout.random_range(spec.heart_rate_min..=spec.heart_rate_max),
            true_class: class,
            murmur_gain: spec.gains.of(class),
            snr_db: layout.random_range(spec.snr_db_min..=spec.snr_db_max),
            duration_s: spec.duration_s,
            sample_rate: spec.sample_rate,
            seed: derive_seed(spec.seed, STREAM_RECORDINGS + i as u64),
        })
        .collect();
    let mut recordings = specs
        .par_iter()
        .map(generate_recording)
        .collect::<Result<Vec<_>, _>>()?;

    let sc_model = ScLabelModel {
        seed: derive_seed(spec.seed ^ spec.sc.seed, STREAM_SC),
        ..spec.sc
    };
    let sc = assign_sc_labels(&classes, &sc_model)?;
    for (r, label) in recordings.iter_mut().zip(sc) {
        r.recording.sc_label = Some(label);
    }

    let rater_model = RaterModel {
        seed: derive_seed(spec.seed ^ spec.raters.seed, STREAM_RATERS),
        ..spec.raters.clone()
    };
    let pairs: Vec<(String, MurmurIntensity)> = specs.iter().map(|s| (s.id.clone(), s.true_class)).collect();
    let labels = simulate_raters(&pairs, &rater_model, &DEFAULT_COLUMNS)?;

    let truth = recordings
        .iter()
        .map(|r| TruthRow {
            recording_id: r.recording.id().to_string(),
            class: r.true_class,
            heart_rate_bpm: r.heart_rate_bpm,
            s1_onsets: r.s1_onsets.clone(),
        })
        .collect();
    Ok(SynthCorpus {
        recordings,
        truth,
        labels,
    })
}
