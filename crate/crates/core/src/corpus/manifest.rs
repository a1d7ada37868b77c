use std::collections::BTreeMap;
use std::path::Path;

use super::{
    load_table, load_wav, resample, save_table, save_wav, CorpusError, FieldReader, MurmurIntensity,
    Recording, Source, TableRow, Workspace, CANONICAL_RATE,
};

pub const MANIFEST_FILE: &str = "recordings.csv";

/// Line of `recordings/recordings.csv`: the metadata a WAV file cannot
/// carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub recording_id: String,
    pub file: String,
    pub sc_label: Option<MurmurIntensity>,
    pub source: Source,
}

impl TableRow for ManifestRow {
    fn columns() -> Vec<String> {
        ["recording_id", "file", "sc_label", "source"].map(String::from).to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.recording_id.clone(),
            self.file.clone(),
            self.sc_label.map(|l| l.to_string()).unwrap_or_default(),
            self.source.as_str().to_string(),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        Ok(Self {
            recording_id: f.str("recording_id")?.to_string(),
            file: f.str("file")?.to_string(),
            sc_label: f.opt("sc_label")?,
            source: f.parse("source")?,
        })
    }
}

/// Writes each recording as 16-bit WAV plus the manifest.
pub fn write_recordings(ws: &Workspace, recordings: &[Recording]) -> Result<(), CorpusError> {
    let dir = ws.recordings();
    let mut rows = Vec::with_capacity(recordings.len());
    for rec in recordings {
        let file = format!("{}.wav", rec.id());
        save_wav(rec, dir.join(&file))?;
        rows.push(ManifestRow {
            recording_id: rec.id().to_string(),
            file,
            sc_label: rec.sc_label,
            source: rec.source,
        });
    }
    save_table(&rows, dir.join(MANIFEST_FILE))
}

/// Loads every recording of the workspace at the canonical rate, sorted by
/// id. With a manifest only the listed files are read; without one every
/// `*.wav` in the directory is taken as a field recording without SC label.
pub fn read_recordings(ws: &Workspace) -> Result<Vec<Recording>, CorpusError> {
    let dir = ws.recordings();
    let manifest = dir.join(MANIFEST_FILE);
    let rows: Vec<ManifestRow> = if manifest.exists() {
        load_table(&manifest)?
    } else {
        wav_files(&dir)?
            .into_iter()
            .map(|file| ManifestRow {
                recording_id: Path::new(&file)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                file,
                sc_label: None,
                source: Source::Field,
            })
            .collect()
    };
    let mut by_id = BTreeMap::new();
    for row in rows {
        let mut rec = load_wav(dir.join(&row.file))?;
        if rec.sample_rate() != CANONICAL_RATE {
            rec = resample(&rec, CANONICAL_RATE)?;
        }
        rec.id = row.recording_id.clone();
        rec.sc_label = row.sc_label;
        rec.source = row.source;
        if by_id.insert(row.recording_id.clone(), rec).is_some() {
            return Err(CorpusError::DuplicateId(row.recording_id));
        }
    }
    Ok(by_id.into_values().collect())
}

fn wav_files(dir: &Path) -> Result<Vec<String>, CorpusError> {
    let entries = std::fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".wav") {
            files.push(name);
        }
    }
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_keeps_labels_and_source() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path());
        ws.create_dirs().unwrap();
        let a = Recording::new("b-rec", vec![0.5, -0.25, 0.0, 1.0], 4000, Source::Field)
            .unwrap()
            .with_sc_label(Some(MurmurIntensity::Moderate));
        let b = Recording::new("a-rec", vec![0.1; 8], 4000, Source::Synthetic).unwrap();
        write_recordings(&ws, &[a, b]).unwrap();
        let back = read_recordings(&ws).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].id(), "a-rec");
        assert_eq!(back[0].source, Source::Synthetic);
        assert_eq!(back[1].sc_label, Some(MurmurIntensity::Moderate));
    }

    #[test]
    fn bare_directory_is_field_data() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path());
        ws.create_dirs().unwrap();
        let rec = Recording::new("dog7", vec![0.3; 16000], 8000, Source::Field).unwrap();
        save_wav(&rec, ws.recordings().join("dog7.wav")).unwrap();
        let back = read_recordings(&ws).unwrap();
        assert_eq!(back[0].id(), "dog7");
        assert_eq!(back[0].sample_rate(), CANONICAL_RATE);
        assert_eq!(back[0].sc_label, None);
        assert_eq!(back[0].source, Source::Field);
    }
}
