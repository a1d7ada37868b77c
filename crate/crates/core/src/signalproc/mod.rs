//! Band-pass filtering, Hilbert envelope, S1 detection and heart-cycle
//! segmentation.

mod envelope;
mod filter;
mod peaks;
mod segment;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Recording;

pub use envelope::{analytic_signal, hilbert_envelope, Envelope, MIN_ENVELOPE_LEN};
pub use filter::{bandpass, butterworth_bandpass, Biquad, SosFilter};
pub use peaks::{detect_s1, dominant_period, PeakConfig, MAX_PERIOD_S, MIN_PERIOD_S};
pub use segment::{
    segment_cycles, segment_recording, HeartCycle, SegmentWarning, Segmentation, MAX_CYCLE_S,
    MIN_CYCLE_S,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid band edges {f_lo}-{f_hi} Hz at fs={fs} Hz")]
    InvalidBand { f_lo: f64, f_hi: f64, fs: f64 },
    #[error("filter order {0} not in {{2, 4, 6, 8}}")]
    InvalidOrder(usize),
    #[error("signal contains non-finite values")]
    NonFinite,
    #[error("signal too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no heart rhythm detected")]
    NoHeartRhythm,
    #[error("invalid peak list: {0}")]
    InvalidPeaks(String),
}

/// DSP settings (`dsp.*` config keys).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DspConfig {
    pub f_lo: f64,
    pub f_hi: f64,
    pub order: usize,
    pub smooth_ms: f64,
    pub peak_k: f64,
    pub refractory_factor: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            f_lo: 50.0,
            f_hi: 500.0,
            order: 4,
            smooth_ms: 20.0,
            peak_k: 1.0,
            refractory_factor: 0.6,
        }
    }
}

impl DspConfig {
    pub fn peak_config(&self) -> PeakConfig {
        PeakConfig {
            k: self.peak_k,
            refractory_factor: self.refractory_factor,
        }
    }
}

/// Result of running the full DSP chain on one recording.
#[derive(Debug, Clone)]
pub struct ProcessedRecording {
    pub filtered: Vec<f64>,
    pub envelope: Envelope,
    pub s1: Vec<usize>,
    pub segmentation: Segmentation,
}

/// Band-pass, envelope, S1 detection, then cycles cut from the filtered
/// signal.
pub fn process_recording(rec: &Recording, cfg: &DspConfig) -> Result<ProcessedRecording, SignalError> {
    let fs = rec.sample_rate() as f64;
    let filtered = bandpass(rec.samples(), fs, cfg.f_lo, cfg.f_hi, cfg.order)?;
    let envelope = hilbert_envelope(&filtered, fs, cfg.smooth_ms / 1000.0)?;
    let s1 = detect_s1(&envelope, &cfg.peak_config())?;
    let segmentation = segment_cycles(rec.id(), &filtered, fs, rec.sc_label, &s1)?;
    Ok(ProcessedRecording {
        filtered,
        envelope,
        s1,
        segmentation,
    })
}
