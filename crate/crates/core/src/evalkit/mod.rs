//! Leakage-safe grouped splitting and the clinical metric suite.

mod metrics;
mod split;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{FieldReader, MurmurIntensity, TableRow};
use crate::learners::{argmax, EnsembleModel, LearnError};

pub use metrics::{
    aggregate_metrics, binary_mcc, multiclass_mcc, per_class_metrics, AggregateMetrics, Averaging,
    ClassMetrics, ConfusionMatrix,
};
pub use split::{grouped_split, Assigned, SplitCandidate, SplitPlan, SplitRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("class index {0} is out of range")]
    UnknownClass(usize),
    #[error("confusion matrix is not square")]
    NotSquare,
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("class {class}: need {needed} test recordings with SC label = majority vote, only {eligible} eligible")]
    NotEnoughEligible {
        class: MurmurIntensity,
        needed: usize,
        eligible: usize,
    },
    #[error("recording {0} listed twice")]
    DuplicateRecording(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Model(#[from] LearnError),
}

/// Metrics of one trained model on the held-out cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dataset: String,
    pub classifier: String,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub balanced: AggregateMetrics,
    pub weighted: AggregateMetrics,
}

impl RunReport {
    pub fn from_predictions(
        dataset: &str,
        classifier: &str,
        y_true: &[usize],
        y_pred: &[usize],
    ) -> Result<Self, EvalError> {
        let confusion = ConfusionMatrix::from_labels(y_true, y_pred, MurmurIntensity::ALL.len())?;
        let per_class = (0..confusion.n_classes())
            .map(|c| per_class_metrics(&confusion, c))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            dataset: dataset.to_string(),
            classifier: classifier.to_string(),
            balanced: aggregate_metrics(&confusion, Averaging::Balanced)?,
            weighted: aggregate_metrics(&confusion, Averaging::Support)?,
            per_class,
            confusion,
        })
    }

    /// `report.csv` rows: the balanced aggregate as class `all`, then one
    /// row per intensity.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = vec![ReportRow {
            dataset: self.dataset.clone(),
            classifier: self.classifier.clone(),
            class: "all".into(),
            sensitivity: Some(self.balanced.sensitivity),
            specificity: Some(self.balanced.specificity),
            accuracy: self.balanced.accuracy,
            mcc: self.balanced.mcc,
        }];
        for (class, m) in MurmurIntensity::ALL.iter().zip(&self.per_class) {
            out.push(ReportRow {
                dataset: self.dataset.clone(),
                classifier: self.classifier.clone(),
                class: class.as_str().into(),
                sensitivity: m.sensitivity,
                specificity: m.specificity,
                accuracy: m.accuracy,
                mcc: m.mcc,
            });
        }
        out
    }
}

/// Predicts the test cycles with `model` and scores them.
pub fn evaluate_run(
    model: &EnsembleModel,
    x: &[Vec<f64>],
    y_true: &[usize],
    dataset: &str,
    classifier: &str,
) -> Result<RunReport, EvalError> {
    let pred = model.predict(x)?;
    RunReport::from_predictions(dataset, classifier, y_true, &pred)
}

/// Majority of cycle predictions per recording (lowest class on ties).
pub fn recording_majority(recording_ids: &[String], predictions: &[usize], n_classes: usize) -> BTreeMap<String, usize> {
    let mut votes: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (id, &p) in recording_ids.iter().zip(predictions) {
        votes.entry(id).or_insert_with(|| vec![0.0; n_classes])[p] += 1.0;
    }
    votes
        .into_iter()
        .map(|(id, v)| (id.to_string(), argmax(&v)))
        .collect()
}

/// Line of `report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub classifier: String,
    pub class: String,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: f64,
    pub mcc: f64,
}

impl TableRow for ReportRow {
    fn columns() -> Vec<String> {
        ["dataset", "classifier", "class", "sensitivity", "specificity", "accuracy", "mcc"]
            .map(String::from)
            .to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.dataset.clone(),
            self.classifier.clone(),
            self.class.clone(),
            opt(self.sensitivity),
            opt(self.specificity),
            self.accuracy.to_string(),
            self.mcc.to_string(),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        Ok(Self {
            dataset: f.str("dataset")?.to_string(),
            classifier: f.str("classifier")?.to_string(),
            class: f.str("class")?.to_string(),
            sensitivity: f.opt("sensitivity")?,
            specificity: f.opt("specificity")?,
            accuracy: f.parse("accuracy")?,
            mcc: f.parse("mcc")?,
        })
    }
}

/// Fixed-width console rendering of report rows, values in percent.
pub fn format_report(rows: &[ReportRow]) -> String {
    let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{:.2}", 100.0 * x));
    let mut s = format!(
        "{:<8} {:<15} {:<15} {:>8} {:>8} {:>8} {:>8}\n",
        "dataset", "classifier", "class", "sens%", "spec%", "acc%", "mcc"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:<15} {:<15} {:>8} {:>8} {:>8} {:>8.4}",
            r.dataset,
            r.classifier,
            r.class,
            pct(r.sensitivity),
            pct(r.specificity),
            pct(Some(r.accuracy)),
            r.mcc
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_predictions_identical_reports() {
        let y = [0, 1, 2, 2, 1, 0];
        let p = [0, 1, 1, 2, 1, 2];
        let a = RunReport::from_predictions("SC", "gradient_boost", &y, &p).unwrap();
        let b = RunReport::from_predictions("SC", "gradient_boost", &y, &p).unwrap();
        assert_eq!(a, b);
        let rows = a.rows();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].class, "all");
        assert_eq!(rows[3].class, "loud_thrilling");
        assert!(format_report(&rows).contains("loud_thrilling"));
    }

    #[test]
    fn report_rows_round_trip() {
        let y = [0, 0, 0];
        let a = RunReport::from_predictions("HQ", "adaboost", &y, &[0, 0, 1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        crate::corpus::save_table(&a.rows(), &path).unwrap();
        let back: Vec<ReportRow> = crate::corpus::load_table(&path).unwrap();
        assert_eq!(back, a.rows());
        assert_eq!(back[2].sensitivity, None);
    }

    #[test]
    fn majority_of_cycles() {
        let ids: Vec<String> = ["a", "a", "a", "b", "b"].iter().map(|s| s.to_string()).collect();
        let m = recording_majority(&ids, &[1, 2, 1, 0, 2], 3);
        assert_eq!(m["a"], 1);
        assert_eq!(m["b"], 0);
    }
}
