//! Synthetic heart sounds with known S1 positions and murmur grade, and
//! synthetic expert raters.

mod corpus;
mod raters;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, MurmurIntensity, Recording, Source};
use crate::signalproc::{bandpass, SignalError};

pub use corpus::{derive_seed, generate_corpus, CorpusSpec, SynthCorpus, TruthRow};
pub use raters::{assign_sc_labels, simulate_raters, RaterModel, ScLabelModel, DEFAULT_COLUMNS};

pub const S1_DURATION_S: f64 = 0.080;
pub const S2_DURATION_S: f64 = 0.060;
/// S2 onset as a fraction of the cycle length.
pub const S2_POSITION: f64 = 0.38;
/// S2 peak relative to the S1 peak.
pub const S2_AMPLITUDE: f64 = 0.55;
pub const MIN_HEART_RATE: f64 = 60.0;
pub const MAX_HEART_RATE: f64 = 160.0;
const CYCLE_JITTER: f64 = 0.05;
/// Rise time of the burst envelope `(t/tau) exp(1 - t/tau)`.
const S1_TAU_S: f64 = 0.010;
const S2_TAU_S: f64 = 0.008;
const MURMUR_TAPER_S: f64 = 0.005;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis parameter: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Label(#[from] crate::labelkit::LabelError),
}

/// Murmur amplitude per class relative to the S1 peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MurmurGains {
    pub mild: f64,
    pub moderate: f64,
    pub loud_thrilling: f64,
}

impl Default for MurmurGains {
    fn default() -> Self {
        Self {
            mild: 0.08,
            moderate: 0.2,
            loud_thrilling: 0.45,
        }
    }
}

impl MurmurGains {
    pub fn of(&self, class: MurmurIntensity) -> f64 {
        match class {
            MurmurIntensity::Mild => self.mild,
            MurmurIntensity::Moderate => self.moderate,
            MurmurIntensity::LoudThrilling => self.loud_thrilling,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub id: String,
    pub heart_rate_bpm: f64,
    pub true_class: MurmurIntensity,
    /// Amplitude of the systolic murmur; a sine of this amplitude has the
    /// murmur's RMS.
    pub murmur_gain: f64,
    /// Ambient white noise relative to the S1/S2 template power;
    /// `f64::INFINITY` adds none.
    pub snr_db: f64,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl SynthSpec {
    /// Ten seconds at 4 kHz, 10 dB SNR, murmur gain from the default table.
    pub fn new(id: impl Into<String>, true_class: MurmurIntensity, heart_rate_bpm: f64, seed: u64) -> Self {
        Self {
            id: id.into(),
            heart_rate_bpm,
            true_class,
            murmur_gain: MurmurGains::default().of(true_class),
            snr_db: 10.0,
            duration_s: 10.0,
            sample_rate: crate::corpus::CANONICAL_RATE,
            seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(MIN_HEART_RATE..=MAX_HEART_RATE).contains(&self.heart_rate_bpm) {
            return bad(format!(
                "heart rate {} bpm outside {MIN_HEART_RATE}-{MAX_HEART_RATE}",
                self.heart_rate_bpm
            ));
        }
        if !(self.murmur_gain >= 0.0 && self.murmur_gain.is_finite()) {
            return bad(format!("murmur gain {} must be finite and >= 0", self.murmur_gain));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad(format!("snr {} dB", self.snr_db));
        }
        if self.sample_rate < 2000 {
            return bad(format!("sample rate {} Hz below 2000", self.sample_rate));
        }
        if !(self.duration_s >= 2.0 && self.duration_s.is_finite()) {
            return bad(format!("duration {} s must be at least 2 s", self.duration_s));
        }
        Ok(())
    }
}

/// A generated recording with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub recording: Recording,
    pub true_class: MurmurIntensity,
    pub heart_rate_bpm: f64,
    /// Sample index of every S1 onset.
    pub s1_onsets: Vec<usize>,
    /// `(start, end)` sample ranges of the murmur windows.
    pub systole: Vec<(usize, usize)>,
}

/// `(t/tau) exp(1 - t/tau)`: rises to 1 at `t = tau`, then decays.
fn burst_envelope(t: f64, tau: f64) -> f64 {
    (t / tau) * (1.0 - t / tau).exp()
}

/// Adds a decaying oscillation of `freq` Hz starting at `start`, faded to
/// zero over its last 10 ms.
fn add_burst(out: &mut [f64], fs: f64, start: usize, dur_s: f64, tau: f64, freq: f64, amp: f64) {
    let len = (dur_s * fs).round() as usize;
    let fade = (0.010 * fs) as usize;
    for i in 0..len.min(out.len().saturating_sub(start)) {
        let t = i as f64 / fs;
        let mut a = amp * burst_envelope(t, tau);
        if i + fade >= len {
            let k = (len - i) as f64 / fade as f64;
            a *= 0.5 - 0.5 * (PI * k).cos();
        }
        out[start + i] += a * (2.0 * PI * freq * t).sin();
    }
}

fn taper(i: usize, len: usize, edge: usize) -> f64 {
    let d = i.min(len - 1 - i);
    if edge == 0 || d >= edge {
        1.0
    } else {
        0.5 - 0.5 * (PI * d as f64 / edge as f64).cos()
    }
}

/// Cycle lengths with +-5 % jitter, rescaled to fill `span` exactly.
fn cycle_lengths(n: usize, span: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| 1.0 + rng.random_range(-CYCLE_JITTER..=CYCLE_JITTER))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r * span / total).collect()
}

/// Cycles of S1 (80 ms, 60-150 Hz), S2 (60 ms, 55 % amplitude, at 38 % of
/// the cycle) and a band-limited systolic murmur between them, plus white
/// noise, peak-normalized. The number of S1 onsets is
/// `round(duration * rate / 60)`.
pub fn generate_recording(spec: &SynthSpec) -> Result<SynthRecording, SynthError> {
    spec.validate()?;
    let fs = spec.sample_rate as f64;
    let n = (spec.duration_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let n_cycles = (spec.duration_s * spec.heart_rate_bpm / 60.0).round().max(1.0) as usize;
    let mean_cycle = spec.duration_s / n_cycles as f64;
    let offset = rng.random_range(0.0..0.1) * mean_cycle;
    let lengths = cycle_lengths(n_cycles, spec.duration_s - offset, &mut rng);
    let s1_freq: f64 = rng.random_range(60.0..=150.0);
    let s2_freq = (s1_freq * 1.2).min(150.0);

    let mut template = vec![0.0; n];
    let mut onsets = Vec::with_capacity(n_cycles);
    let mut systole = Vec::with_capacity(n_cycles);
    let mut t = offset;
    for len in &lengths {
        let start = (t * fs).round() as usize;
        let s2 = ((t + S2_POSITION * len) * fs).round() as usize;
        add_burst(&mut template, fs, start, S1_DURATION_S, S1_TAU_S, s1_freq, 1.0);
        add_burst(&mut template, fs, s2, S2_DURATION_S, S2_TAU_S, s2_freq, S2_AMPLITUDE);
        onsets.push(start);
        systole.push((start + (S1_DURATION_S * fs).round() as usize, s2.min(n)));
        t += len;
    }

    let mut signal = template.clone();
    if spec.murmur_gain > 0.0 {
        let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut band = bandpass(&white, fs, 50.0, 500.0, 4)?;
        let rms = (band.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let scale = spec.murmur_gain / (2f64.sqrt() * rms);
        band.iter_mut().for_each(|v| *v *= scale);
        let edge = (MURMUR_TAPER_S * fs) as usize;
        for &(a, b) in &systole {
            for i in a..b {
                signal[i] += band[i] * taper(i - a, b - a, edge);
            }
        }
    }
    if spec.snr_db.is_finite() {
        let power = template.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let sigma = (power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
        for v in signal.iter_mut() {
            *v += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let mut recording = Recording::normalized(spec.id.clone(), signal, spec.sample_rate, Source::Synthetic)?;
    recording.sc_label = Some(spec.true_class);
    Ok(SynthRecording {
        recording,
        true_class: spec.true_class,
        heart_rate_bpm: spec.heart_rate_bpm,
        s1_onsets: onsets,
        systole,
    })
}
