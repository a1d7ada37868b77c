use std::path::Path;

use super::{CorpusError, Recording, Source};

/// Reads a RIFF WAV file into a peak-normalized mono recording.
///
/// Integer PCM of 8, 16, 24 or 32 bits and 32-bit float are accepted.
/// Channels are averaged. The recording id is the file stem.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Recording, CorpusError> {
    let path = path.as_ref();
    let unreadable = |e: hound::Error| match e {
        hound::Error::IoError(source) => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        hound::Error::Unsupported => CorpusError::UnsupportedEncoding(format!(
            "{}: unsupported wav format",
            path.display()
        )),
        other => CorpusError::Unreadable {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut reader = hound::WavReader::open(path).map_err(unreadable)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(CorpusError::UnsupportedEncoding("zero channels".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(unreadable)?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 2f64.powi(bits as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(unreadable)?
        }
        (fmt, bits) => {
            return Err(CorpusError::UnsupportedEncoding(format!(
                "{fmt:?} with {bits} bits per sample"
            )))
        }
    };

    if interleaved.len() < channels {
        return Err(CorpusError::EmptyAudio);
    }
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();

    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("recording")
        .to_string();
    Recording::normalized(id, mono, spec.sample_rate, Source::Field)
}

/// Canonical 16-bit PCM mono encoding with a 44-byte header.
pub fn encode_wav_pcm16(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &x in samples {
        let q = (x.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn save_wav(rec: &Recording, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    std::fs::write(path, encode_wav_pcm16(rec.samples(), rec.sample_rate())).map_err(|source| {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_with_hound(path: &Path, spec: hound::WavSpec, frames: &[Vec<i32>]) {
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for frame in frames {
            for &s in frame {
                w.write_sample(s).unwrap();
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn mono_16bit_header_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dog17.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let frames: Vec<Vec<i32>> = (0..80_000).map(|i| vec![(i % 200) as i32 - 100]).collect();
        write_with_hound(&path, spec, &frames);
        let rec = load_wav(&path).unwrap();
        assert_eq!(rec.id(), "dog17");
        assert_eq!(rec.len(), 80_000);
        assert_eq!(rec.duration(), 10.0);
        assert_eq!(rec.sample_rate(), 8000);
    }

    #[test]
    fn opposite_stereo_channels_average_to_silence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 4000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let frames: Vec<Vec<i32>> = (0..400).map(|_| vec![16384, -16384]).collect();
        write_with_hound(&path, spec, &frames);
        let rec = load_wav(&path).unwrap();
        assert_eq!(rec.len(), 400);
        assert!(rec.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_frames_is_empty_audio() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 4000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        write_with_hound(&path, spec, &[]);
        assert!(matches!(load_wav(&path), Err(CorpusError::EmptyAudio)));
    }

    #[test]
    fn missing_and_garbage_files_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_wav(dir.path().join("nope.wav")).is_err());
        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"definitely not riff").unwrap();
        assert!(load_wav(&junk).is_err());
    }

    #[test]
    fn float_and_24bit_inputs_load() {
        let dir = tempfile::tempdir().unwrap();
        let p24 = dir.path().join("a.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 4000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        write_with_hound(&p24, spec, &[vec![1 << 20], vec![-(1 << 21)]]);
        let rec = load_wav(&p24).unwrap();
        assert_eq!(rec.samples(), &[0.5, -1.0]);

        let pf = dir.path().join("b.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 4000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&pf, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.write_sample(-0.125f32).unwrap();
        w.finalize().unwrap();
        assert_eq!(load_wav(&pf).unwrap().samples(), &[1.0, -0.5]);
    }

    #[test]
    fn pcm16_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<f64> = (0..4000)
            .map(|i| (i as f64 * 0.013).sin() * if i == 7 { 1.0 } else { 0.9 })
            .collect();
        let mut normalized = samples.clone();
        super::super::peak_normalize(&mut normalized);
        let rec = Recording::new("rt", normalized.clone(), 4000, Source::Synthetic).unwrap();
        let path = dir.path().join("rt.wav");
        save_wav(&rec, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 44 + 2 * 4000);
        let back = load_wav(&path).unwrap();
        for (a, b) in normalized.iter().zip(back.samples()) {
            assert!((a - b).abs() <= 2f64.powi(-15), "{a} vs {b}");
        }
    }
}
