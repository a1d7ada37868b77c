//! Recordings, label vocabularies, audio I/O and on-disk tables.

mod manifest;
mod registry;
mod resample;
mod table;
mod wav;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{read_recordings, write_recordings, ManifestRow, MANIFEST_FILE};
pub use registry::Registry;
pub use resample::resample;
pub use table::{load_table, save_table, table_from_csv, table_to_csv, FieldReader, TableRow};
pub use wav::{encode_wav_pcm16, load_wav, save_wav};

/// Rate every DSP stage runs at.
pub const CANONICAL_RATE: u32 = 4000;

/// Lowest rate `resample` accepts (Nyquist margin above the 500 Hz band).
pub const MIN_TARGET_RATE: u32 = 2000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unreadable wav {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("empty audio")]
    EmptyAudio,
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("target rate {0} Hz is below the minimum of {MIN_TARGET_RATE} Hz")]
    RateTooLow(u32),
    #[error("schema error in {path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("schema error in {path} line {line}: {message}")]
    BadField {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("csv error on {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("duplicate recording id `{0}`")]
    DuplicateId(String),
}

/// Murmur intensity grade. Class order (used as the class index everywhere)
/// is mild, moderate, loud/thrilling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MurmurIntensity {
    Mild,
    Moderate,
    LoudThrilling,
}

impl MurmurIntensity {
    pub const ALL: [MurmurIntensity; 3] = [
        MurmurIntensity::Mild,
        MurmurIntensity::Moderate,
        MurmurIntensity::LoudThrilling,
    ];

    pub fn index(self) -> usize {
        match self {
            MurmurIntensity::Mild => 0,
            MurmurIntensity::Moderate => 1,
            MurmurIntensity::LoudThrilling => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MurmurIntensity::Mild => "mild",
            MurmurIntensity::Moderate => "moderate",
            MurmurIntensity::LoudThrilling => "loud_thrilling",
        }
    }
}

impl fmt::Display for MurmurIntensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MurmurIntensity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match AssessmentClass::from_str(s)?.intensity() {
            Some(i) => Ok(i),
            None => Err(format!("`{s}` is not a murmur intensity")),
        }
    }
}

/// The six options of the labeling mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentClass {
    Healthy,
    Mild,
    Moderate,
    LoudThrilling,
    BadQuality,
    Other,
}

impl AssessmentClass {
    pub const ALL: [AssessmentClass; 6] = [
        AssessmentClass::Healthy,
        AssessmentClass::Mild,
        AssessmentClass::Moderate,
        AssessmentClass::LoudThrilling,
        AssessmentClass::BadQuality,
        AssessmentClass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AssessmentClass::Healthy => "healthy",
            AssessmentClass::Mild => "mild",
            AssessmentClass::Moderate => "moderate",
            AssessmentClass::LoudThrilling => "loud_thrilling",
            AssessmentClass::BadQuality => "bad_quality",
            AssessmentClass::Other => "other",
        }
    }

    pub fn intensity(self) -> Option<MurmurIntensity> {
        match self {
            AssessmentClass::Mild => Some(MurmurIntensity::Mild),
            AssessmentClass::Moderate => Some(MurmurIntensity::Moderate),
            AssessmentClass::LoudThrilling => Some(MurmurIntensity::LoudThrilling),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap()
    }

    pub fn valid_names() -> String {
        Self::ALL.map(|c| c.as_str()).join(", ")
    }
}

impl From<MurmurIntensity> for AssessmentClass {
    fn from(value: MurmurIntensity) -> Self {
        match value {
            MurmurIntensity::Mild => AssessmentClass::Mild,
            MurmurIntensity::Moderate => AssessmentClass::Moderate,
            MurmurIntensity::LoudThrilling => AssessmentClass::LoudThrilling,
        }
    }
}

impl fmt::Display for AssessmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssessmentClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['/', ' ', '-'], "_");
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| {
                format!(
                    "invalid label `{s}`; expected one of: {}",
                    Self::valid_names()
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Field,
    Synthetic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Field => "field",
            Source::Synthetic => "synthetic",
        }
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "field" => Ok(Source::Field),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

/// One mono heart-sound recording.
///
/// Samples are finite and lie in `[-1, 1]`; the constructor enforces it.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    id: String,
    samples: Vec<f64>,
    sample_rate: u32,
    pub sc_label: Option<MurmurIntensity>,
    pub source: Source,
}

impl Recording {
    pub fn new(
        id: impl Into<String>,
        samples: Vec<f64>,
        sample_rate: u32,
        source: Source,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        if id.is_empty() {
            return Err(CorpusError::InvalidRecording("empty id".into()));
        }
        if sample_rate == 0 {
            return Err(CorpusError::InvalidRecording(format!(
                "{id}: sample rate must be positive"
            )));
        }
        if let Some(pos) = samples
            .iter()
            .position(|x| !x.is_finite() || x.abs() > 1.0)
        {
            return Err(CorpusError::InvalidRecording(format!(
                "{id}: sample {pos} is {} (must be finite and within [-1, 1])",
                samples[pos]
            )));
        }
        Ok(Self {
            id,
            samples,
            sample_rate,
            sc_label: None,
            source,
        })
    }

    /// Peak-normalizes `samples` to `[-1, 1]` before constructing.
    pub fn normalized(
        id: impl Into<String>,
        mut samples: Vec<f64>,
        sample_rate: u32,
        source: Source,
    ) -> Result<Self, CorpusError> {
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(CorpusError::InvalidRecording(
                "non-finite sample before normalization".into(),
            ));
        }
        peak_normalize(&mut samples);
        Self::new(id, samples, sample_rate, source)
    }

    pub fn with_sc_label(mut self, label: Option<MurmurIntensity>) -> Self {
        self.sc_label = label;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Scales so the largest magnitude is 1. All-zero input is left untouched.
pub fn peak_normalize(samples: &mut [f64]) {
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        for x in samples.iter_mut() {
            *x = (*x / peak).clamp(-1.0, 1.0);
        }
    }
}

/// Workspace directory layout shared by the CLI and the annotation service.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &std::path::Path {
        &self.root
    }

    pub fn recordings(&self) -> PathBuf {
        self.root.join("recordings")
    }

    pub fn labels(&self) -> PathBuf {
        self.root.join("labels")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn create_dirs(&self) -> Result<(), CorpusError> {
        for dir in [
            self.recordings(),
            self.labels(),
            self.features(),
            self.models(),
            self.reports(),
        ] {
            std::fs::create_dir_all(&dir).map_err(|source| CorpusError::Io { path: dir, source })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intensity_embeds_into_assessment_classes() {
        for i in MurmurIntensity::ALL {
            let a = AssessmentClass::from(i);
            assert_eq!(a.intensity(), Some(i));
            assert_eq!(a.as_str(), i.as_str());
        }
        assert_eq!(AssessmentClass::ALL.len(), 6);
        let non_intensity = AssessmentClass::ALL
            .iter()
            .filter(|c| c.intensity().is_none())
            .count();
        assert_eq!(non_intensity, 3);
    }

    #[test]
    fn parses_mask_spellings() {
        assert_eq!(
            "loud/thrilling".parse::<AssessmentClass>().unwrap(),
            AssessmentClass::LoudThrilling
        );
        assert_eq!(
            "Bad Quality".parse::<AssessmentClass>().unwrap(),
            AssessmentClass::BadQuality
        );
        let err = "severe".parse::<AssessmentClass>().unwrap_err();
        for c in AssessmentClass::ALL {
            assert!(err.contains(c.as_str()));
        }
        assert!("healthy".parse::<MurmurIntensity>().is_err());
    }

    #[test]
    fn recording_rejects_out_of_range_samples() {
        assert!(Recording::new("r", vec![0.0, 1.5], 4000, Source::Field).is_err());
        assert!(Recording::new("r", vec![f64::NAN], 4000, Source::Field).is_err());
        assert!(Recording::new("r", vec![0.0], 0, Source::Field).is_err());
        let rec = Recording::normalized("r", vec![0.0, 3.0, -6.0], 2, Source::Field).unwrap();
        assert_eq!(rec.samples(), &[0.0, 0.5, -1.0]);
        assert_eq!(rec.duration(), 1.5);
    }
}
