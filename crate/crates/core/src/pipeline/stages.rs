//! Workspace-backed stages. Each stage reads the files of earlier stages,
//! writes its own, and leaves a stamp in `stamps/<stage>.json` holding the
//! run seed and SHA-256 digests of config, inputs and outputs. A stage whose
//! stamp still matches is skipped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    load_table, read_recordings, save_table, write_recordings, MurmurIntensity, Recording, TableRow, Workspace,
    MANIFEST_FILE,
};
use crate::evalkit::{format_report, grouped_split, ReportRow, SplitPlan, SplitRow};
use crate::featureset::FeatureVector;
use crate::hssynth::generate_corpus;
use crate::labelkit::{alpha_trace, select, LabelMatrix, LabelRow, SelectionReportRow};
use crate::learners::EnsembleModel;
use crate::signalproc::{bandpass, HeartCycle, SegmentWarning};

use super::{
    evaluate_models, extract_features, model_file_name, segment_all, split_candidates, stage_seed, train_models,
    AlphaRow, Config, CycleCountRow, HistogramRow, PipelineError, SegmentRow, SegmentedRecording, Stage,
    StageFailure, TrainedModel, DATASETS,
};

pub const TRUTH_FILE: &str = "truth.csv";
pub const LABEL_MATRIX_FILE: &str = "labelmatrix.csv";
pub const SELECTION_FILE: &str = "selection_report.csv";
pub const SPLIT_FILE: &str = "split.csv";
pub const SEGMENTS_FILE: &str = "segments.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const CYCLE_COUNTS_FILE: &str = "cycle_counts.csv";
pub const HISTOGRAM_FILE: &str = "cycle_histogram.csv";
pub const ALPHA_FILE: &str = "alpha_trace.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
    /// `synth` in a workspace that already holds other recordings.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Stamp {
    stage: String,
    seed: u64,
    config_sha256: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

/// Digest of a file, or of every file below a directory (relative names
/// and contents in sorted order). Missing paths hash as `missing`.
fn digest_path(path: &Path) -> std::io::Result<String> {
    if !path.exists() {
        return Ok("missing".into());
    }
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for f in files {
            h.update(f.strip_prefix(path).unwrap_or(&f).to_string_lossy().as_bytes());
            h.update([0]);
            h.update(std::fs::read(&f)?);
        }
    } else {
        h.update(std::fs::read(path)?);
    }
    Ok(format!("{:x}", h.finalize()))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Runs pipeline stages against one workspace.
#[derive(Debug, Clone)]
pub struct Runner {
    ws: Workspace,
    cfg: Config,
    force: bool,
}

impl Runner {
    pub fn new(ws: Workspace, cfg: Config) -> Self {
        Self { ws, cfg, force: false }
    }

    /// Ignore stamps and rerun every requested stage.
    pub fn force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    fn stamp_path(&self, stage: Stage) -> PathBuf {
        self.ws.root().join("stamps").join(format!("{stage}.json"))
    }

    fn rel(&self, p: &Path) -> String {
        p.strip_prefix(self.ws.root()).unwrap_or(p).to_string_lossy().into_owned()
    }

    fn inputs(&self, stage: Stage) -> Vec<PathBuf> {
        let ws = &self.ws;
        match stage {
            Stage::Synth => vec![],
            Stage::Segment => vec![ws.recordings()],
            Stage::Alpha | Stage::Select => vec![ws.labels().join(LABEL_MATRIX_FILE)],
            Stage::Features => vec![
                ws.recordings(),
                ws.features().join(SEGMENTS_FILE),
                ws.labels().join(SELECTION_FILE),
            ],
            Stage::Split => vec![
                ws.recordings().join(MANIFEST_FILE),
                ws.labels().join(SELECTION_FILE),
                ws.reports().join(CYCLE_COUNTS_FILE),
            ],
            Stage::Train => vec![ws.features().join(FEATURES_FILE), ws.labels().join(SPLIT_FILE)],
            Stage::Evaluate => {
                let mut v = vec![ws.features().join(FEATURES_FILE), ws.labels().join(SPLIT_FILE)];
                v.extend(self.model_paths());
                v
            }
            Stage::Report => vec![
                ws.reports().join(REPORT_FILE),
                ws.reports().join(ALPHA_FILE),
                ws.reports().join(HISTOGRAM_FILE),
                ws.labels().join(SELECTION_FILE),
                ws.labels().join(SPLIT_FILE),
            ],
        }
    }

    fn outputs(&self, stage: Stage) -> Vec<PathBuf> {
        let ws = &self.ws;
        match stage {
            Stage::Synth => vec![
                ws.recordings(),
                ws.labels().join(TRUTH_FILE),
                ws.labels().join(LABEL_MATRIX_FILE),
            ],
            Stage::Segment => vec![
                ws.features().join(SEGMENTS_FILE),
                ws.reports().join(CYCLE_COUNTS_FILE),
                ws.reports().join(HISTOGRAM_FILE),
            ],
            Stage::Alpha => vec![ws.reports().join(ALPHA_FILE)],
            Stage::Select => vec![ws.labels().join(SELECTION_FILE)],
            Stage::Features => vec![ws.features().join(FEATURES_FILE)],
            Stage::Split => vec![ws.labels().join(SPLIT_FILE)],
            Stage::Train => self.model_paths(),
            Stage::Evaluate => vec![ws.reports().join(REPORT_FILE)],
            Stage::Report => vec![ws.reports().join(SUMMARY_FILE)],
        }
    }

    fn model_paths(&self) -> Vec<PathBuf> {
        DATASETS
            .iter()
            .flat_map(|d| self.cfg.train.classifiers.iter().map(move |&k| model_file_name(d, k)))
            .map(|f| self.ws.models().join(f))
            .collect()
    }

    fn digests(&self, stage: Stage, paths: &[PathBuf]) -> Result<BTreeMap<String, String>, PipelineError> {
        paths
            .iter()
            .map(|p| Ok((self.rel(p), digest_path(p).map_err(|e| PipelineError::stage(stage, e))?)))
            .collect()
    }

    fn stamp(&self, stage: Stage) -> Result<Stamp, PipelineError> {
        Ok(Stamp {
            stage: stage.to_string(),
            seed: self.cfg.seed,
            config_sha256: format!("{:x}", Sha256::digest(self.cfg.to_toml().as_bytes())),
            inputs: self.digests(stage, &self.inputs(stage))?,
            outputs: BTreeMap::new(),
        })
    }

    fn up_to_date(&self, stage: Stage, fresh: &Stamp) -> Result<bool, PipelineError> {
        let Ok(text) = std::fs::read_to_string(self.stamp_path(stage)) else {
            return Ok(false);
        };
        let Ok(old) = serde_json::from_str::<Stamp>(&text) else {
            return Ok(false);
        };
        let outputs = self.digests(stage, &self.outputs(stage))?;
        Ok(old.seed == fresh.seed
            && old.config_sha256 == fresh.config_sha256
            && old.inputs == fresh.inputs
            && old.outputs == outputs
            && !outputs.values().any(|d| d == "missing"))
    }

    /// Runs one stage unless its stamp shows nothing changed.
    pub fn run_stage(&self, stage: Stage) -> Result<StageStatus, PipelineError> {
        self.ws.create_dirs().map_err(|e| PipelineError::stage(stage, e))?;
        if stage == Stage::Synth && self.has_foreign_recordings() {
            let msg = "workspace holds recordings that synth did not write; refusing to replace them".into();
            return Err(PipelineError::stage(stage, StageFailure::Invalid(msg)));
        }
        let mut stamp = self.stamp(stage)?;
        if !self.force && self.up_to_date(stage, &stamp)? {
            log::info!("{stage}: up to date");
            return Ok(StageStatus::UpToDate);
        }
        match stage {
            Stage::Synth => self.synth()?,
            Stage::Segment => self.segment()?,
            Stage::Alpha => self.alpha()?,
            Stage::Select => self.select()?,
            Stage::Features => self.features()?,
            Stage::Split => self.split()?,
            Stage::Train => self.train()?,
            Stage::Evaluate => self.evaluate()?,
            Stage::Report => {
                self.report()?;
            }
        }
        stamp.outputs = self.digests(stage, &self.outputs(stage))?;
        let path = self.stamp_path(stage);
        let io = |e| PipelineError::stage(stage, StageFailure::Io(e));
        std::fs::create_dir_all(path.parent().expect("stamp has a parent")).map_err(io)?;
        let json = serde_json::to_string_pretty(&stamp).expect("stamp serializes");
        std::fs::write(&path, json + "\n").map_err(io)?;
        log::info!("{stage}: done");
        Ok(StageStatus::Ran)
    }

    /// Every stage in order. `synth` only runs when the workspace holds no
    /// recordings or holds recordings an earlier `synth` produced.
    pub fn run_all(&self) -> Result<Vec<(Stage, StageStatus)>, PipelineError> {
        let mut out = Vec::new();
        for stage in Stage::ALL {
            let status = if stage == Stage::Synth && self.has_foreign_recordings() {
                log::info!("synth: workspace already holds recordings, using them");
                StageStatus::Skipped
            } else {
                self.run_stage(stage)?
            };
            out.push((stage, status));
        }
        Ok(out)
    }

    fn has_foreign_recordings(&self) -> bool {
        let has_any = std::fs::read_dir(self.ws.recordings())
            .map(|mut d| d.next().is_some())
            .unwrap_or(false);
        has_any && !self.stamp_path(Stage::Synth).exists()
    }

    fn require(&self, stage: Stage, path: PathBuf) -> Result<PathBuf, PipelineError> {
        if path.exists() {
            Ok(path)
        } else {
            Err(PipelineError::MissingInput { stage, path })
        }
    }

    fn load<R: TableRow>(&self, stage: Stage, path: PathBuf) -> Result<Vec<R>, PipelineError> {
        let path = self.require(stage, path)?;
        load_table(&path).map_err(|e| PipelineError::stage(stage, e))
    }

    fn save<R: TableRow>(&self, stage: Stage, rows: &[R], path: PathBuf) -> Result<(), PipelineError> {
        save_table(rows, path).map_err(|e| PipelineError::stage(stage, e))
    }

    fn recordings(&self, stage: Stage) -> Result<Vec<Recording>, PipelineError> {
        let recs = read_recordings(&self.ws).map_err(|e| PipelineError::stage(stage, e))?;
        if recs.is_empty() {
            return Err(PipelineError::MissingInput {
                stage,
                path: self.ws.recordings(),
            });
        }
        Ok(recs)
    }

    pub fn label_matrix(&self, stage: Stage) -> Result<LabelMatrix, PipelineError> {
        let rows: Vec<LabelRow> = self.load(stage, self.ws.labels().join(LABEL_MATRIX_FILE))?;
        Ok(LabelMatrix::from_long(&rows))
    }

    fn mv_labels(&self, stage: Stage) -> Result<BTreeMap<String, MurmurIntensity>, PipelineError> {
        let rows: Vec<SelectionReportRow> = self.load(stage, self.ws.labels().join(SELECTION_FILE))?;
        Ok(rows
            .into_iter()
            .filter_map(|r| r.mv_label.map(|l| (r.recording_id, l)))
            .collect())
    }

    fn split_plan(&self, stage: Stage) -> Result<SplitPlan, PipelineError> {
        let rows: Vec<SplitRow> = self.load(stage, self.ws.labels().join(SPLIT_FILE))?;
        SplitPlan::from_rows(&rows, self.cfg.split.test_fraction, stage_seed(self.cfg.seed, Stage::Split))
            .map_err(|e| PipelineError::stage(stage, e))
    }

    fn feature_rows(&self, stage: Stage) -> Result<Vec<FeatureVector>, PipelineError> {
        self.load(stage, self.ws.features().join(FEATURES_FILE))
    }

    fn synth(&self) -> Result<(), PipelineError> {
        let stage = Stage::Synth;
        let mut spec = self.cfg.synth.clone();
        spec.seed = stage_seed(self.cfg.seed, stage);
        let corpus = generate_corpus(&spec).map_err(|e| PipelineError::stage(stage, e))?;
        let dir = self.ws.recordings();
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| PipelineError::stage(stage, e))?;
        }
        self.ws.create_dirs().map_err(|e| PipelineError::stage(stage, e))?;
        let recordings: Vec<Recording> = corpus.recordings.iter().map(|r| r.recording.clone()).collect();
        write_recordings(&self.ws, &recordings).map_err(|e| PipelineError::stage(stage, e))?;
        self.save(stage, &corpus.truth, self.ws.labels().join(TRUTH_FILE))?;
        self.save(stage, &corpus.labels.to_long(), self.ws.labels().join(LABEL_MATRIX_FILE))?;
        log::info!("synth: {} recordings", recordings.len());
        Ok(())
    }

    fn segment(&self) -> Result<(), PipelineError> {
        let stage = Stage::Segment;
        let segmented = segment_all(&self.recordings(stage)?, &self.cfg.dsp)?;
        let mut segments = Vec::new();
        let mut counts = Vec::new();
        for s in &segmented {
            for c in &s.cycles {
                segments.push(SegmentRow {
                    recording_id: s.recording_id.clone(),
                    cycle_index: c.index,
                    start: c.start,
                    end: c.start + c.samples.len(),
                });
            }
            for w in &s.warnings {
                log::warn!("{}: {w:?}", s.recording_id);
            }
            counts.push(CycleCountRow {
                recording_id: s.recording_id.clone(),
                n_cycles: s.cycles.len(),
                n_out_of_range: s
                    .warnings
                    .iter()
                    .filter(|w| matches!(w, SegmentWarning::CycleOutOfRange { .. }))
                    .count(),
            });
        }
        let hist = HistogramRow::from_counts(counts.iter().map(|c| c.n_cycles));
        self.save(stage, &segments, self.ws.features().join(SEGMENTS_FILE))?;
        self.save(stage, &counts, self.ws.reports().join(CYCLE_COUNTS_FILE))?;
        self.save(stage, &hist, self.ws.reports().join(HISTOGRAM_FILE))
    }

    fn alpha(&self) -> Result<(), PipelineError> {
        let stage = Stage::Alpha;
        let trace = alpha_trace(&self.label_matrix(stage)?).map_err(|e| PipelineError::stage(stage, e))?;
        self.save(stage, &AlphaRow::from_trace(&trace), self.ws.reports().join(ALPHA_FILE))
    }

    fn select(&self) -> Result<(), PipelineError> {
        let stage = Stage::Select;
        let outcome = select(&self.label_matrix(stage)?).map_err(|e| PipelineError::stage(stage, e))?;
        let [s1, s2, s3, s4] = outcome.removed_per_step();
        log::info!(
            "select: kept {}, removed {s1}/{s2}/{s3}/{s4} by steps 1-4",
            outcome.kept.len()
        );
        self.save(stage, &outcome.report(), self.ws.labels().join(SELECTION_FILE))
    }

    /// Rebuilds the cycles recorded by `segment` from the filtered audio.
    fn cycles_from_segments(&self, stage: Stage) -> Result<Vec<SegmentedRecording>, PipelineError> {
        let rows: Vec<SegmentRow> = self.load(stage, self.ws.features().join(SEGMENTS_FILE))?;
        let mut by_id: BTreeMap<&str, Vec<&SegmentRow>> = BTreeMap::new();
        for r in &rows {
            by_id.entry(r.recording_id.as_str()).or_default().push(r);
        }
        let dsp = &self.cfg.dsp;
        let mut out = Vec::new();
        for rec in self.recordings(stage)? {
            let fs = rec.sample_rate() as f64;
            let filtered = bandpass(rec.samples(), fs, dsp.f_lo, dsp.f_hi, dsp.order)
                .map_err(|e| PipelineError::at(stage, rec.id(), e))?;
            let mut cycles = Vec::new();
            for r in by_id.get(rec.id()).into_iter().flatten() {
                if r.end > filtered.len() {
                    let msg = format!("cycle {} ends past the recording", r.cycle_index);
                    return Err(PipelineError::at(stage, rec.id(), StageFailure::Invalid(msg)));
                }
                cycles.push(HeartCycle {
                    recording_id: rec.id().to_string(),
                    index: r.cycle_index,
                    start: r.start,
                    samples: filtered[r.start..r.end].to_vec(),
                    sample_rate: fs,
                    label: rec.sc_label,
                });
            }
            out.push(SegmentedRecording {
                recording_id: rec.id().to_string(),
                sc_label: rec.sc_label,
                s1: cycles.iter().map(|c| c.start).collect(),
                cycles,
                warnings: Vec::new(),
            });
        }
        Ok(out)
    }

    fn features(&self) -> Result<(), PipelineError> {
        let stage = Stage::Features;
        let mv = self.mv_labels(stage)?;
        let features = extract_features(&self.cycles_from_segments(stage)?, &mv)?;
        log::info!("features: {} cycles", features.len());
        self.save(stage, &features, self.ws.features().join(FEATURES_FILE))
    }

    fn split(&self) -> Result<(), PipelineError> {
        let stage = Stage::Split;
        let sc: BTreeMap<String, Option<MurmurIntensity>> = self
            .recordings(stage)?
            .iter()
            .map(|r| (r.id().to_string(), r.sc_label))
            .collect();
        let counts: Vec<CycleCountRow> = self.load(stage, self.ws.reports().join(CYCLE_COUNTS_FILE))?;
        let n_cycles = counts.into_iter().map(|c| (c.recording_id, c.n_cycles)).collect();
        let candidates = split_candidates(&sc, &self.mv_labels(stage)?, &n_cycles);
        let plan = grouped_split(&candidates, self.cfg.split.test_fraction, stage_seed(self.cfg.seed, stage))
            .map_err(|e| PipelineError::stage(stage, e))?;
        log::info!("split: test recordings per class {:?}", plan.test_counts());
        self.save(stage, &plan.rows(), self.ws.labels().join(SPLIT_FILE))
    }

    fn train(&self) -> Result<(), PipelineError> {
        let stage = Stage::Train;
        let models = train_models(&self.feature_rows(stage)?, &self.split_plan(stage)?, &self.cfg)?;
        for m in &models {
            m.model
                .save(self.ws.models().join(m.file_name()))
                .map_err(|e| PipelineError::stage(stage, e))?;
        }
        Ok(())
    }

    fn evaluate(&self) -> Result<(), PipelineError> {
        let stage = Stage::Evaluate;
        let mut models = Vec::new();
        for dataset in DATASETS {
            for &kind in &self.cfg.train.classifiers {
                let path = self.require(stage, self.ws.models().join(model_file_name(dataset, kind)))?;
                let model = EnsembleModel::load(&path).map_err(|e| PipelineError::stage(stage, e))?;
                models.push(TrainedModel {
                    dataset: dataset.to_string(),
                    model,
                });
            }
        }
        let reports = evaluate_models(&models, &self.feature_rows(stage)?, &self.split_plan(stage)?)?;
        let rows: Vec<ReportRow> = reports.iter().flat_map(|r| r.rows()).collect();
        self.save(stage, &rows, self.ws.reports().join(REPORT_FILE))
    }

    /// Writes and returns the text summary of a finished run.
    pub fn report(&self) -> Result<String, PipelineError> {
        let stage = Stage::Report;
        let hist: Vec<HistogramRow> = self.load(stage, self.ws.reports().join(HISTOGRAM_FILE))?;
        let alpha: Vec<AlphaRow> = self.load(stage, self.ws.reports().join(ALPHA_FILE))?;
        let selection: Vec<SelectionReportRow> = self.load(stage, self.ws.labels().join(SELECTION_FILE))?;
        let split: Vec<SplitRow> = self.load(stage, self.ws.labels().join(SPLIT_FILE))?;
        let report: Vec<ReportRow> = self.load(stage, self.ws.reports().join(REPORT_FILE))?;
        let text = summary(self.cfg.seed, &hist, &alpha, &selection, &split, &report);
        std::fs::write(self.ws.reports().join(SUMMARY_FILE), &text).map_err(|e| PipelineError::stage(stage, e))?;
        Ok(text)
    }
}

fn summary(
    seed: u64,
    hist: &[HistogramRow],
    alpha: &[AlphaRow],
    selection: &[SelectionReportRow],
    split: &[SplitRow],
    report: &[ReportRow],
) -> String {
    let mut s = format!("seed {seed}\n\nheart cycles per recording\n");
    let widest = hist.iter().map(|h| h.n_recordings).max().unwrap_or(1).max(1);
    for h in hist {
        let bar = "#".repeat((40 * h.n_recordings).div_ceil(widest));
        let _ = writeln!(s, "{:>4} {:>4} {bar}", h.n_cycles, h.n_recordings);
    }

    let _ = writeln!(s, "\nKrippendorff alpha by selection steps");
    let mut stats: Vec<&str> = Vec::new();
    for a in alpha {
        if !stats.contains(&a.statistic.as_str()) {
            stats.push(&a.statistic);
        }
    }
    let _ = write!(s, "{:<6} {:>6}", "steps", "n");
    for st in &stats {
        let _ = write!(s, " {:>8}", format!("a_{st}"));
    }
    let mut steps: Vec<&str> = Vec::new();
    for a in alpha {
        if !steps.contains(&a.steps.as_str()) {
            steps.push(&a.steps);
        }
    }
    for step in steps {
        let rows: Vec<&AlphaRow> = alpha.iter().filter(|a| a.steps == step).collect();
        let _ = write!(s, "\n{:<6} {:>6}", step, rows[0].n_recordings);
        for st in &stats {
            let v = rows
                .iter()
                .find(|r| r.statistic == *st)
                .and_then(|r| r.alpha)
                .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
            let _ = write!(s, " {v:>8}");
        }
    }

    let kept = selection.iter().filter(|r| r.kept).count();
    let mut per_step = [0usize; 4];
    for r in selection {
        if let Some(step) = r.removal_step.filter(|s| (1..=4).contains(s)) {
            per_step[step as usize - 1] += 1;
        }
    }
    let _ = writeln!(
        s,
        "\n\nselection: {kept} of {} recordings kept; removed by step 1-4: {per_step:?}",
        selection.len()
    );
    for set in ["train_sc", "train_hq", "test"] {
        let rows: Vec<&SplitRow> = split.iter().filter(|r| r.set == set).collect();
        let mut by_class = [0usize; 3];
        let mut cycles = [0usize; 3];
        for r in &rows {
            by_class[r.label.index()] += 1;
            cycles[r.label.index()] += r.n_cycles;
        }
        let _ = writeln!(
            s,
            "{set:<9} recordings {:>4} {by_class:?}  cycles {:>5} {cycles:?}",
            rows.len(),
            cycles.iter().sum::<usize>()
        );
    }
    let _ = writeln!(s, "\n{}", format_report(report));
    s
}
