//! End-to-end orchestration: synth or ingest, segment, features, select,
//! split, train on SC and HQ labels, evaluate, report.
//!
//! The functions here work in memory; [`stages`] wraps them as restartable
//! steps over a workspace directory.

mod config;
pub mod stages;
mod tables;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{CorpusError, MurmurIntensity, Recording};
use crate::evalkit::{grouped_split, Assigned, EvalError, RunReport, SplitCandidate, SplitPlan};
use crate::featureset::{extract, FeatureError, FeatureVector};
use crate::hssynth::{derive_seed, generate_corpus, SynthError};
use crate::labelkit::{alpha_trace, select, AlphaTraceRow, LabelError, LabelMatrix, SelectionOutcome};
use crate::learners::{fit, Dataset, EnsembleModel, LearnError, ModelKind};
use crate::signalproc::{process_recording, DspConfig, HeartCycle, SegmentWarning, SignalError};

pub use config::{Config, ModelsConfig, SplitConfig, TrainConfig};
pub use tables::{AlphaRow, CycleCountRow, HistogramRow, SegmentRow};

/// Training label sources, in report order.
pub const DATASETS: [&str; 2] = ["SC", "HQ"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Segment,
    Alpha,
    Select,
    Features,
    Split,
    Train,
    Evaluate,
    Report,
}

impl Stage {
    /// Execution order of `run`.
    pub const ALL: [Stage; 9] = [
        Stage::Synth,
        Stage::Segment,
        Stage::Alpha,
        Stage::Select,
        Stage::Features,
        Stage::Split,
        Stage::Train,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Segment => "segment",
            Stage::Alpha => "alpha",
            Stage::Select => "select",
            Stage::Features => "features",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }

    fn seed_tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Seed of one stage, derived from the run seed.
pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    derive_seed(seed, stage.seed_tag())
}

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

fn recording_context(id: &Option<String>) -> String {
    id.as_ref().map(|id| format!(" (recording {id})")).unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage `{stage}`: missing input {}; run the earlier stages first", path.display())]
    MissingInput { stage: Stage, path: PathBuf },
    #[error("stage `{stage}`{}: {source}", recording_context(.recording_id))]
    Stage {
        stage: Stage,
        recording_id: Option<String>,
        source: StageFailure,
    },
}

impl PipelineError {
    pub fn stage(stage: Stage, source: impl Into<StageFailure>) -> Self {
        PipelineError::Stage {
            stage,
            recording_id: None,
            source: source.into(),
        }
    }

    pub fn at(stage: Stage, recording_id: &str, source: impl Into<StageFailure>) -> Self {
        PipelineError::Stage {
            stage,
            recording_id: Some(recording_id.to_string()),
            source: source.into(),
        }
    }

    /// 1 for bad input or config, 2 for failures of the environment.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Stage {
                source: StageFailure::Io(_),
                ..
            } => 2,
            PipelineError::Stage {
                source: StageFailure::Corpus(CorpusError::Io { .. }),
                ..
            } => 2,
            _ => 1,
        }
    }
}

/// S1 positions and cycles of one recording.
#[derive(Debug, Clone)]
pub struct SegmentedRecording {
    pub recording_id: String,
    pub sc_label: Option<MurmurIntensity>,
    pub s1: Vec<usize>,
    pub cycles: Vec<HeartCycle>,
    pub warnings: Vec<SegmentWarning>,
}

pub fn segment_all(recordings: &[Recording], dsp: &DspConfig) -> Result<Vec<SegmentedRecording>, PipelineError> {
    recordings
        .par_iter()
        .map(|rec| {
            let p = process_recording(rec, dsp).map_err(|e| PipelineError::at(Stage::Segment, rec.id(), e))?;
            Ok(SegmentedRecording {
                recording_id: rec.id().to_string(),
                sc_label: rec.sc_label,
                s1: p.s1,
                cycles: p.segmentation.cycles,
                warnings: p.segmentation.warnings,
            })
        })
        .collect()
}

/// Feature vectors of every cycle, in recording then cycle order, with the
/// majority vote attached where selection kept the recording.
pub fn extract_features(
    segmented: &[SegmentedRecording],
    mv_labels: &BTreeMap<String, MurmurIntensity>,
) -> Result<Vec<FeatureVector>, PipelineError> {
    let per_recording: Vec<Vec<FeatureVector>> = segmented
        .par_iter()
        .map(|s| {
            s.cycles
                .iter()
                .map(|c| {
                    let mut v = extract(c).map_err(|e| PipelineError::at(Stage::Features, &s.recording_id, e))?;
                    v.mv_label = mv_labels.get(&s.recording_id).copied();
                    Ok(v)
                })
                .collect()
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(per_recording.into_iter().flatten().collect())
}

/// Joins SC labels, majority votes and cycle counts per recording.
pub fn split_candidates(
    sc_labels: &BTreeMap<String, Option<MurmurIntensity>>,
    mv_labels: &BTreeMap<String, MurmurIntensity>,
    n_cycles: &BTreeMap<String, usize>,
) -> Vec<SplitCandidate> {
    sc_labels
        .iter()
        .map(|(id, sc)| SplitCandidate {
            recording_id: id.clone(),
            sc_label: *sc,
            mv_label: mv_labels.get(id).copied(),
            n_cycles: n_cycles.get(id).copied().unwrap_or(0),
        })
        .collect()
}

/// Cycles of the assigned recordings with the assigned label.
#[derive(Debug, Clone, Default)]
pub struct LabelledCycles {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub recording_ids: Vec<String>,
}

pub fn labelled_cycles(features: &[FeatureVector], assigned: &[Assigned]) -> LabelledCycles {
    let labels: BTreeMap<&str, MurmurIntensity> =
        assigned.iter().map(|a| (a.recording_id.as_str(), a.label)).collect();
    let mut out = LabelledCycles::default();
    for f in features {
        if let Some(label) = labels.get(f.recording_id.as_str()) {
            out.x.push(f.values.clone());
            out.y.push(label.index());
            out.recording_ids.push(f.recording_id.clone());
        }
    }
    out
}

/// Training recordings of dataset `SC` or `HQ`.
pub fn training_set<'a>(plan: &'a SplitPlan, dataset: &str) -> &'a [Assigned] {
    if dataset == "HQ" {
        &plan.train_hq
    } else {
        &plan.train_sc
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub dataset: String,
    pub model: EnsembleModel,
}

impl TrainedModel {
    pub fn file_name(&self) -> String {
        model_file_name(&self.dataset, self.model.kind())
    }
}

pub fn model_file_name(dataset: &str, kind: ModelKind) -> String {
    format!("{}_{}.json", dataset.to_ascii_lowercase(), kind.as_str())
}

fn model_seed(seed: u64, dataset: usize, kind: ModelKind) -> u64 {
    let k = ModelKind::ALL.iter().position(|&m| m == kind).unwrap_or(0);
    derive_seed(stage_seed(seed, Stage::Train), (dataset * 8 + k) as u64)
}

/// Fits one model per configured classifier on the SC and on the HQ
/// training cycles.
pub fn train_models(features: &[FeatureVector], plan: &SplitPlan, cfg: &Config) -> Result<Vec<TrainedModel>, PipelineError> {
    let mut out = Vec::new();
    for (d, &dataset) in DATASETS.iter().enumerate() {
        let cycles = labelled_cycles(features, training_set(plan, dataset));
        let mut data = Dataset::new(cycles.x, cycles.y, MurmurIntensity::ALL.len())
            .map_err(|e| PipelineError::stage(Stage::Train, e))?;
        if cfg.train.balance_classes {
            data = data.with_balanced_classes();
        }
        for &kind in &cfg.train.classifiers {
            let model = fit(&data, &cfg.models.hyperparams(kind), model_seed(cfg.seed, d, kind))
                .map_err(|e| PipelineError::stage(Stage::Train, e))?;
            log::info!("trained {dataset} {kind} on {} cycles", data.len());
            out.push(TrainedModel {
                dataset: dataset.to_string(),
                model,
            });
        }
    }
    Ok(out)
}

/// Scores every model on the test cycles.
pub fn evaluate_models(
    models: &[TrainedModel],
    features: &[FeatureVector],
    plan: &SplitPlan,
) -> Result<Vec<RunReport>, PipelineError> {
    let test = labelled_cycles(features, &plan.test);
    if test.x.is_empty() {
        return Err(PipelineError::stage(Stage::Evaluate, StageFailure::Invalid("no test cycles".into())));
    }
    models
        .iter()
        .map(|m| {
            crate::evalkit::evaluate_run(&m.model, &test.x, &test.y, &m.dataset, m.model.kind().as_str())
                .map_err(|e| PipelineError::stage(Stage::Evaluate, e))
        })
        .collect()
}

/// Everything a run produces, in memory.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub alpha: Vec<AlphaTraceRow>,
    pub selection: SelectionOutcome,
    pub cycle_counts: BTreeMap<String, usize>,
    pub plan: SplitPlan,
    pub reports: Vec<RunReport>,
}

impl Experiment {
    pub fn report(&self, dataset: &str, kind: ModelKind) -> Option<&RunReport> {
        self.reports
            .iter()
            .find(|r| r.dataset == dataset && r.classifier == kind.as_str())
    }
}

/// Runs every stage after synthesis on recordings and their label matrix.
pub fn run_experiment(recordings: &[Recording], labels: &LabelMatrix, cfg: &Config) -> Result<Experiment, PipelineError> {
    cfg.validate()?;
    let segmented = segment_all(recordings, &cfg.dsp)?;
    let alpha = alpha_trace(labels).map_err(|e| PipelineError::stage(Stage::Alpha, e))?;
    let selection = select(labels).map_err(|e| PipelineError::stage(Stage::Select, e))?;
    let mv = selection.mv_labels();
    let features = extract_features(&segmented, &mv)?;
    let cycle_counts: BTreeMap<String, usize> = segmented
        .iter()
        .map(|s| (s.recording_id.clone(), s.cycles.len()))
        .collect();
    let sc: BTreeMap<String, Option<MurmurIntensity>> =
        recordings.iter().map(|r| (r.id().to_string(), r.sc_label)).collect();
    let plan = grouped_split(
        &split_candidates(&sc, &mv, &cycle_counts),
        cfg.split.test_fraction,
        stage_seed(cfg.seed, Stage::Split),
    )
    .map_err(|e| PipelineError::stage(Stage::Split, e))?;
    let models = train_models(&features, &plan, cfg)?;
    let reports = evaluate_models(&models, &features, &plan)?;
    Ok(Experiment {
        alpha,
        selection,
        cycle_counts,
        plan,
        reports,
    })
}

/// Synthesizes the configured corpus and runs the experiment on it.
pub fn run_synthetic(cfg: &Config) -> Result<Experiment, PipelineError> {
    let mut spec = cfg.synth.clone();
    spec.seed = stage_seed(cfg.seed, Stage::Synth);
    let corpus = generate_corpus(&spec).map_err(|e| PipelineError::stage(Stage::Synth, e))?;
    let recordings: Vec<Recording> = corpus.recordings.into_iter().map(|r| r.recording).collect();
    run_experiment(&recordings, &corpus.labels, cfg)
}
