use std::collections::BTreeMap;

use crate::corpus::{AssessmentClass, FieldReader, MurmurIntensity, TableRow};

use super::{LabelError, LabelMatrix};

/// Per-class vote counts of one row, missing cells skipped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Votes {
    by_class: [usize; 6],
}

impl Votes {
    fn count(cells: &[Option<AssessmentClass>]) -> Self {
        let mut by_class = [0; 6];
        for c in cells.iter().flatten() {
            by_class[c.index()] += 1;
        }
        Self { by_class }
    }

    fn of(&self, class: AssessmentClass) -> usize {
        self.by_class[class.index()]
    }

    fn total(&self) -> usize {
        self.by_class.iter().sum()
    }

    fn intensity(&self) -> [usize; 3] {
        MurmurIntensity::ALL.map(|i| self.of(i.into()))
    }
}

/// Outcome for a single row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowDecision {
    Keep(MurmurIntensity),
    Remove { step: u8, reason: String },
}

/// First selection step (1-4) that removes the row, if any.
pub(crate) fn removal_step(cells: &[Option<AssessmentClass>]) -> Option<(u8, String)> {
    use AssessmentClass::*;
    let v = Votes::count(cells);
    let unusable = v.of(BadQuality) + v.of(Other);
    if unusable >= 2 {
        return Some((1, format!("{unusable} bad_quality/other assessments")));
    }
    if v.of(Healthy) >= 2 {
        return Some((2, format!("{} healthy assessments", v.of(Healthy))));
    }
    let intensity = v.intensity();
    let repeated: Vec<&str> = MurmurIntensity::ALL
        .iter()
        .zip(intensity)
        .filter(|(_, n)| *n >= 2)
        .map(|(c, _)| c.as_str())
        .collect();
    if repeated.len() >= 2 {
        return Some((3, format!("{} each given at least twice", repeated.join(" and "))));
    }
    if intensity.iter().all(|&n| n >= 1) {
        return Some((4, "all three intensities given".to_string()));
    }
    None
}

/// Applies Steps 1-4 and, for survivors, the majority vote.
pub fn classify_row(
    recording_id: &str,
    cells: &[Option<AssessmentClass>],
) -> Result<RowDecision, LabelError> {
    let v = Votes::count(cells);
    if v.total() < 3 {
        return Err(LabelError::TooFewRatings {
            recording_id: recording_id.to_string(),
            found: v.total(),
        });
    }
    if let Some((step, reason)) = removal_step(cells) {
        return Ok(RowDecision::Remove { step, reason });
    }
    let counts = v.intensity();
    let best = *counts.iter().max().expect("three classes");
    let modes: Vec<usize> = (0..3).filter(|&i| counts[i] == best).collect();
    if best == 0 || modes.len() != 1 {
        return Err(LabelError::NoMajority {
            recording_id: recording_id.to_string(),
        });
    }
    Ok(RowDecision::Keep(MurmurIntensity::ALL[modes[0]]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeptRecording {
    pub recording_id: String,
    pub mv_label: MurmurIntensity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Removal {
    pub recording_id: String,
    pub step: u8,
    pub reason: String,
}

/// Partition of the matrix rows into kept (with majority vote) and removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectionOutcome {
    pub kept: Vec<KeptRecording>,
    pub removed: Vec<Removal>,
}

impl SelectionOutcome {
    pub fn mv_labels(&self) -> BTreeMap<String, MurmurIntensity> {
        self.kept
            .iter()
            .map(|k| (k.recording_id.clone(), k.mv_label))
            .collect()
    }

    /// Number of rows removed at each step, index 0 = Step 1.
    pub fn removed_per_step(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for r in &self.removed {
            out[r.step as usize - 1] += 1;
        }
        out
    }

    /// One report row per recording, sorted by id.
    pub fn report(&self) -> Vec<SelectionReportRow> {
        let kept = self.kept.iter().map(|k| SelectionReportRow {
            recording_id: k.recording_id.clone(),
            kept: true,
            removal_step: None,
            reason: String::new(),
            mv_label: Some(k.mv_label),
        });
        let removed = self.removed.iter().map(|r| SelectionReportRow {
            recording_id: r.recording_id.clone(),
            kept: false,
            removal_step: Some(r.step),
            reason: r.reason.clone(),
            mv_label: None,
        });
        let mut rows: Vec<_> = kept.chain(removed).collect();
        rows.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
        rows
    }
}

/// Line of `selection_report.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionReportRow {
    pub recording_id: String,
    pub kept: bool,
    pub removal_step: Option<u8>,
    pub reason: String,
    pub mv_label: Option<MurmurIntensity>,
}

impl TableRow for SelectionReportRow {
    fn columns() -> Vec<String> {
        ["recording_id", "status", "removal_step", "reason", "mv_label"]
            .map(String::from)
            .to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.recording_id.clone(),
            if self.kept { "kept" } else { "removed" }.to_string(),
            self.removal_step.map(|s| s.to_string()).unwrap_or_default(),
            self.reason.clone(),
            self.mv_label.map(|l| l.as_str().to_string()).unwrap_or_default(),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        let kept = match f.str("status")? {
            "kept" => true,
            "removed" => false,
            other => return Err(format!("status must be kept or removed, got `{other}`")),
        };
        Ok(Self {
            recording_id: f.str("recording_id")?.to_string(),
            kept,
            removal_step: f.opt("removal_step")?,
            reason: f.str("reason")?.to_string(),
            mv_label: f.opt("mv_label")?,
        })
    }
}

/// Runs the selection over every row of `matrix`.
pub fn select(matrix: &LabelMatrix) -> Result<SelectionOutcome, LabelError> {
    let mut out = SelectionOutcome::default();
    for (id, row) in matrix.recording_ids().iter().zip(matrix.rows()) {
        match classify_row(id, row)? {
            RowDecision::Keep(mv_label) => out.kept.push(KeptRecording {
                recording_id: id.clone(),
                mv_label,
            }),
            RowDecision::Remove { step, reason } => out.removed.push(Removal {
                recording_id: id.clone(),
                step,
                reason,
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use AssessmentClass::*;

    const CLASSES: [AssessmentClass; 6] = AssessmentClass::ALL;

    fn decide(row: &[AssessmentClass]) -> RowDecision {
        let cells: Vec<_> = row.iter().map(|c| Some(*c)).collect();
        classify_row("r", &cells).unwrap()
    }

    fn removed_at(step: u8, d: RowDecision) -> bool {
        matches!(d, RowDecision::Remove { step: s, .. } if s == step)
    }

    #[test]
    fn worked_rows() {
        assert_eq!(decide(&[Mild; 5]), RowDecision::Keep(MurmurIntensity::Mild));
        assert!(removed_at(1, decide(&[BadQuality, Other, Mild, Mild, Mild])));
        assert!(removed_at(3, decide(&[Mild, Mild, Moderate, Moderate, LoudThrilling])));
        assert!(removed_at(4, decide(&[Mild, Moderate, LoudThrilling, Mild, Mild])));
        assert_eq!(
            decide(&[Mild, Mild, Mild, Mild, Healthy]),
            RowDecision::Keep(MurmurIntensity::Mild)
        );
        assert_eq!(
            decide(&[Mild, Mild, Moderate, Healthy, BadQuality]),
            RowDecision::Keep(MurmurIntensity::Mild)
        );
        assert!(removed_at(2, decide(&[Healthy, Healthy, Mild, Mild, Mild])));
    }

    /// Predicate oracle written directly from the step definitions, using
    /// plain counting over the row rather than the shared vote tally.
    fn oracle(row: &[AssessmentClass]) -> Option<AssessmentClass> {
        let n = |c: AssessmentClass| row.iter().filter(|&&x| x == c).count();
        if n(BadQuality) + n(Other) >= 2 || n(Healthy) >= 2 {
            return None;
        }
        let ints = [Mild, Moderate, LoudThrilling];
        if ints.iter().filter(|&&c| n(c) >= 2).count() >= 2 {
            return None;
        }
        if ints.iter().all(|&c| n(c) >= 1) {
            return None;
        }
        let top = ints.iter().map(|&c| n(c)).max().unwrap();
        let winners: Vec<_> = ints.iter().filter(|&&c| n(c) == top).collect();
        assert_eq!(winners.len(), 1, "tie in {row:?}");
        Some(*winners[0])
    }

    #[test]
    fn exhaustive_enumeration_matches_oracle() {
        let mut kept = 0;
        for code in 0..6usize.pow(5) {
            let row: Vec<AssessmentClass> =
                (0..5).map(|p| CLASSES[code / 6usize.pow(p) % 6]).collect();
            let got = decide(&row);
            match (oracle(&row), got) {
                (Some(mv), RowDecision::Keep(k)) => {
                    assert_eq!(AssessmentClass::from(k), mv, "{row:?}");
                    kept += 1;
                }
                (None, RowDecision::Remove { .. }) => {}
                (o, g) => panic!("{row:?}: oracle {o:?}, select {g:?}"),
            }
        }
        assert!(kept > 0);
    }

    #[test]
    fn decision_depends_only_on_multiset() {
        let row = [Moderate, Healthy, Moderate, Mild, Moderate];
        let d = decide(&row);
        let mut perm = row;
        perm.reverse();
        assert_eq!(decide(&perm), d);
        perm.rotate_left(2);
        assert_eq!(decide(&perm), d);
    }

    #[test]
    fn sparse_rows() {
        let cells = [Some(Mild), None, Some(Mild), None, Some(Healthy)];
        assert_eq!(classify_row("x", &cells).unwrap(), RowDecision::Keep(MurmurIntensity::Mild));
        let short = [Some(Mild), None, Some(Mild), None, None];
        assert!(matches!(classify_row("x", &short), Err(LabelError::TooFewRatings { found: 2, .. })));
        let tie = [Some(Mild), Some(Moderate), Some(Healthy), None, None];
        assert!(matches!(classify_row("x", &tie), Err(LabelError::NoMajority { .. })));
    }

    #[test]
    fn outcome_partitions_ids_and_reports() {
        let m = LabelMatrix::from_complete_rows(
            &["A1", "A2", "B1", "B2", "C1"],
            &[
                ("a", vec![Mild; 5]),
                ("b", vec![BadQuality, Other, Mild, Mild, Mild]),
                ("c", vec![Moderate, Moderate, Moderate, LoudThrilling, Moderate]),
            ],
        )
        .unwrap();
        let out = select(&m).unwrap();
        assert_eq!(out.kept.len() + out.removed.len(), 3);
        assert_eq!(out.removed_per_step(), [1, 0, 0, 0]);
        assert_eq!(out.mv_labels()["c"], MurmurIntensity::Moderate);
        let report = out.report();
        assert_eq!(report.iter().map(|r| r.recording_id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(report[1].removal_step, Some(1));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("selection_report.csv");
        crate::corpus::save_table(&report, &path).unwrap();
        let back: Vec<SelectionReportRow> = crate::corpus::load_table(&path).unwrap();
        assert_eq!(back, report);
    }
}
