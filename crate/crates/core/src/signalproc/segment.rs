use crate::corpus::{MurmurIntensity, Recording};

use super::SignalError;

/// Shortest and longest physiologic cycle (200 and 40 bpm).
pub const MIN_CYCLE_S: f64 = 0.3;
pub const MAX_CYCLE_S: f64 = 1.5;

/// One S1-to-next-S1 segment.
#[derive(Debug, Clone, PartialEq)]
pub struct HeartCycle {
    pub recording_id: String,
    pub index: usize,
    /// First sample of the cycle in the parent recording.
    pub start: usize,
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub label: Option<MurmurIntensity>,
}

impl HeartCycle {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Bare cycle with no provenance, handy for feature tests.
    pub fn from_samples(samples: Vec<f64>, sample_rate: f64) -> Self {
        Self {
            recording_id: String::new(),
            index: 0,
            start: 0,
            samples,
            sample_rate,
            label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentWarning {
    TooFewPeaks { found: usize },
    /// Kept, but outside the 40-200 bpm range.
    CycleOutOfRange { index: usize, duration: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segmentation {
    pub cycles: Vec<HeartCycle>,
    pub warnings: Vec<SegmentWarning>,
}

/// Cuts `samples` at consecutive S1 positions. Audio before the first and
/// after the last S1 is dropped, so `k` peaks give `k - 1` cycles, each
/// carrying the recording's label.
pub fn segment_cycles(
    recording_id: &str,
    samples: &[f64],
    sample_rate: f64,
    label: Option<MurmurIntensity>,
    s1: &[usize],
) -> Result<Segmentation, SignalError> {
    if let Some(bad) = s1.windows(2).find(|w| w[1] <= w[0]) {
        return Err(SignalError::InvalidPeaks(format!(
            "peaks not strictly increasing at {} -> {}",
            bad[0], bad[1]
        )));
    }
    if let Some(&last) = s1.last() {
        if last >= samples.len() {
            return Err(SignalError::InvalidPeaks(format!(
                "peak {last} beyond signal of {} samples",
                samples.len()
            )));
        }
    }
    if s1.len() < 2 {
        return Ok(Segmentation {
            cycles: Vec::new(),
            warnings: vec![SegmentWarning::TooFewPeaks { found: s1.len() }],
        });
    }

    let mut seg = Segmentation::default();
    for (index, w) in s1.windows(2).enumerate() {
        let cycle = HeartCycle {
            recording_id: recording_id.to_string(),
            index,
            start: w[0],
            samples: samples[w[0]..w[1]].to_vec(),
            sample_rate,
            label,
        };
        let d = cycle.duration();
        if !(MIN_CYCLE_S..=MAX_CYCLE_S).contains(&d) {
            seg.warnings.push(SegmentWarning::CycleOutOfRange { index, duration: d });
        }
        seg.cycles.push(cycle);
    }
    Ok(seg)
}

/// [`segment_cycles`] on a whole recording.
pub fn segment_recording(rec: &Recording, s1: &[usize]) -> Result<Segmentation, SignalError> {
    segment_cycles(
        rec.id(),
        rec.samples(),
        rec.sample_rate() as f64,
        rec.sc_label,
        s1,
    )
}
