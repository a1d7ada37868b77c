use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use murmurlab::corpus::{encode_wav_pcm16, read_recordings, table_to_csv, AssessmentClass, CorpusError, Recording, Workspace};
use murmurlab::labelkit::LabelRow;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Append-only audit log, one JSON assessment per line, under `labels/`.
pub const AUDIT_FILE: &str = "audit.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown recording `{0}`")]
    UnknownRecording(String),
    #[error("{0}")]
    InvalidLabel(String),
    #[error("invalid pass_index {0}; expected 1 or 2")]
    InvalidPass(i64),
    #[error("rater_id must not be empty")]
    EmptyRater,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    CorruptAudit { path: PathBuf, line: usize, message: String },
}

/// One stored label. `submitted_at` is RFC 3339 UTC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub recording_id: String,
    pub rater_id: String,
    pub pass_index: u8,
    pub label: AssessmentClass,
    pub submitted_at: String,
}

/// Body of `POST /assessments`. Label and pass are checked by the store so
/// that errors can name the valid values.
#[derive(Debug, Clone, Deserialize)]
pub struct Submission {
    pub recording_id: String,
    pub rater_id: String,
    pub pass_index: i64,
    pub label: String,
}

/// One entry of a rater's work list. Carries only that rater's progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingStatus {
    pub id: String,
    pub duration: f64,
    /// `unlabeled` or `labeled`.
    pub status: String,
    pub completed_passes: Vec<u8>,
}

type Key = (String, String, u8);

struct State {
    log: File,
    history: Vec<Assessment>,
    effective: BTreeMap<Key, Assessment>,
}

impl State {
    fn apply(&mut self, a: Assessment) {
        let key = (a.recording_id.clone(), a.rater_id.clone(), a.pass_index);
        self.effective.insert(key, a.clone());
        self.history.push(a);
    }
}

/// Recordings of one workspace plus every assessment made on them.
pub struct Store {
    recordings: BTreeMap<String, Arc<Recording>>,
    audit_path: PathBuf,
    state: Mutex<State>,
}

impl Store {
    /// Loads the workspace recordings and replays the audit log.
    pub fn open(ws: &Workspace) -> Result<Store, StoreError> {
        ws.create_dirs()?;
        let recordings = read_recordings(ws)?
            .into_iter()
            .map(|r| (r.id().to_string(), Arc::new(r)))
            .collect();
        let audit_path = ws.labels().join(AUDIT_FILE);
        let io = |source| StoreError::Io {
            path: audit_path.clone(),
            source,
        };
        let mut replay = Vec::new();
        if audit_path.exists() {
            let reader = BufReader::new(File::open(&audit_path).map_err(io)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let a: Assessment = serde_json::from_str(&line).map_err(|e| StoreError::CorruptAudit {
                    path: audit_path.clone(),
                    line: n + 1,
                    message: e.to_string(),
                })?;
                replay.push(a);
            }
        }
        let log = OpenOptions::new().create(true).append(true).open(&audit_path).map_err(io)?;
        let mut state = State {
            log,
            history: Vec::new(),
            effective: BTreeMap::new(),
        };
        for a in replay {
            state.apply(a);
        }
        Ok(Store {
            recordings,
            audit_path,
            state: Mutex::new(state),
        })
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        // A panic mid-write cannot leave `State` half-updated: the log line
        // is written before the in-memory apply.
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn n_recordings(&self) -> usize {
        self.recordings.len()
    }

    /// Every recording with `rater`'s own completed passes.
    pub fn recordings_for(&self, rater: &str) -> Vec<RecordingStatus> {
        let state = self.lock();
        self.recordings
            .values()
            .map(|rec| {
                let completed_passes: Vec<u8> = [1u8, 2]
                    .into_iter()
                    .filter(|&p| {
                        state
                            .effective
                            .contains_key(&(rec.id().to_string(), rater.to_string(), p))
                    })
                    .collect();
                RecordingStatus {
                    id: rec.id().to_string(),
                    duration: rec.duration(),
                    status: if completed_passes.is_empty() { "unlabeled" } else { "labeled" }.into(),
                    completed_passes,
                }
            })
            .collect()
    }

    /// 16-bit mono WAV of a recording at its stored (canonical) rate.
    pub fn audio(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        let rec = self
            .recordings
            .get(id)
            .ok_or_else(|| StoreError::UnknownRecording(id.to_string()))?;
        Ok(encode_wav_pcm16(rec.samples(), rec.sample_rate()))
    }

    /// Validates, logs and applies one assessment stamped `submitted_at`.
    pub fn submit(&self, sub: Submission, submitted_at: String) -> Result<Assessment, StoreError> {
        let label: AssessmentClass = sub.label.parse().map_err(StoreError::InvalidLabel)?;
        let pass_index = match sub.pass_index {
            1 => 1,
            2 => 2,
            other => return Err(StoreError::InvalidPass(other)),
        };
        if sub.rater_id.trim().is_empty() {
            return Err(StoreError::EmptyRater);
        }
        if !self.recordings.contains_key(&sub.recording_id) {
            return Err(StoreError::UnknownRecording(sub.recording_id));
        }
        let a = Assessment {
            recording_id: sub.recording_id,
            rater_id: sub.rater_id,
            pass_index,
            label,
            submitted_at,
        };
        let mut state = self.lock();
        let line = serde_json::to_string(&a).expect("assessment serializes") + "\n";
        state
            .log
            .write_all(line.as_bytes())
            .and_then(|_| state.log.flush())
            .map_err(|source| StoreError::Io {
                path: self.audit_path.clone(),
                source,
            })?;
        state.apply(a.clone());
        Ok(a)
    }

    /// Every submission in arrival order.
    pub fn audit(&self) -> Vec<Assessment> {
        self.lock().history.clone()
    }

    /// Effective (last written) value per key, in long form.
    pub fn label_rows(&self) -> Vec<LabelRow> {
        self.lock()
            .effective
            .values()
            .map(|a| LabelRow {
                recording_id: a.recording_id.clone(),
                rater: a.rater_id.clone(),
                pass: a.pass_index,
                label: a.label,
                timestamp: a.submitted_at.clone(),
            })
            .collect()
    }

    pub fn export_csv(&self) -> String {
        table_to_csv(&self.label_rows())
    }
}
