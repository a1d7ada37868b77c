//! Expert label matrix, the four-step selection with majority-vote
//! relabeling, and Krippendorff's alpha.

mod alpha;
mod select;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{AssessmentClass, FieldReader, TableRow};

pub use alpha::{
    alpha_from_units, alpha_trace, intra_rater_alpha, krippendorff_alpha, AlphaReport,
    AlphaTraceRow, Scale, TRACE_STEPS,
};
pub use select::{
    classify_row, select, KeptRecording, Removal, RowDecision, SelectionOutcome,
    SelectionReportRow,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("label matrix is not rectangular: row {row} has {found} cells, expected {expected}")]
    NotRectangular {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("recording {recording_id} has {found} ratings, selection needs at least 3")]
    TooFewRatings { recording_id: String, found: usize },
    #[error("recording {recording_id} survived selection without a unique intensity majority")]
    NoMajority { recording_id: String },
    #[error("no unit has two or more ratings")]
    NoPairableUnits,
    #[error("rater {rater} has {found} passes, intra-rater alpha needs exactly 2")]
    RaterPasses { rater: String, found: usize },
    #[error("invalid rater column `{0}`; expected a rater name followed by a pass number, e.g. A1")]
    BadRaterColumn(String),
    #[error("duplicate rater column {0}")]
    DuplicateColumn(String),
}

/// One pass of one expert, e.g. `A2` = rater A, second pass.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RaterColumn {
    pub rater: String,
    pub pass: u8,
}

impl RaterColumn {
    pub fn new(rater: impl Into<String>, pass: u8) -> Self {
        Self {
            rater: rater.into(),
            pass,
        }
    }
}

impl fmt::Display for RaterColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.rater, self.pass)
    }
}

impl FromStr for RaterColumn {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let split = s
            .char_indices()
            .rev()
            .take_while(|(_, c)| c.is_ascii_digit())
            .last()
            .map(|(i, _)| i)
            .ok_or_else(|| LabelError::BadRaterColumn(s.into()))?;
        let (rater, pass) = s.split_at(split);
        let pass = pass
            .parse()
            .map_err(|_| LabelError::BadRaterColumn(s.into()))?;
        if rater.is_empty() {
            return Err(LabelError::BadRaterColumn(s.into()));
        }
        Ok(Self::new(rater, pass))
    }
}

/// Recordings x rater-passes grid of assessments; cells may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    recording_ids: Vec<String>,
    raters: Vec<RaterColumn>,
    cells: Vec<Vec<Option<AssessmentClass>>>,
}

impl LabelMatrix {
    pub fn new(
        recording_ids: Vec<String>,
        raters: Vec<RaterColumn>,
        cells: Vec<Vec<Option<AssessmentClass>>>,
    ) -> Result<Self, LabelError> {
        let mut seen = BTreeSet::new();
        for r in &raters {
            if !seen.insert(r.clone()) {
                return Err(LabelError::DuplicateColumn(r.to_string()));
            }
        }
        if cells.len() != recording_ids.len() {
            return Err(LabelError::NotRectangular {
                row: cells.len().min(recording_ids.len()),
                found: cells.len(),
                expected: recording_ids.len(),
            });
        }
        if let Some((row, r)) = cells.iter().enumerate().find(|(_, r)| r.len() != raters.len()) {
            return Err(LabelError::NotRectangular {
                row,
                found: r.len(),
                expected: raters.len(),
            });
        }
        Ok(Self {
            recording_ids,
            raters,
            cells,
        })
    }

    /// Complete matrix from plain rows, columns named by `raters` (e.g. `["A1", "A2"]`).
    pub fn from_complete_rows(
        raters: &[&str],
        rows: &[(&str, Vec<AssessmentClass>)],
    ) -> Result<Self, LabelError> {
        let raters = raters
            .iter()
            .map(|r| r.parse())
            .collect::<Result<Vec<RaterColumn>, _>>()?;
        Self::new(
            rows.iter().map(|(id, _)| id.to_string()).collect(),
            raters,
            rows.iter()
                .map(|(_, cells)| cells.iter().map(|c| Some(*c)).collect())
                .collect(),
        )
    }

    /// Pivots long-form rows. Ids and columns come out sorted; a repeated
    /// (recording, rater, pass) key keeps its last occurrence.
    pub fn from_long(rows: &[LabelRow]) -> Self {
        let ids: BTreeSet<&str> = rows.iter().map(|r| r.recording_id.as_str()).collect();
        let cols: BTreeSet<RaterColumn> = rows
            .iter()
            .map(|r| RaterColumn::new(r.rater.clone(), r.pass))
            .collect();
        let id_index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let cols: Vec<RaterColumn> = cols.into_iter().collect();
        let col_index: BTreeMap<&RaterColumn, usize> =
            cols.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let mut cells = vec![vec![None; cols.len()]; ids.len()];
        for r in rows {
            let key = RaterColumn::new(r.rater.clone(), r.pass);
            cells[id_index[r.recording_id.as_str()]][col_index[&key]] = Some(r.label);
        }
        Self {
            recording_ids: ids.into_iter().map(String::from).collect(),
            raters: cols,
            cells,
        }
    }

    pub fn to_long(&self) -> Vec<LabelRow> {
        let mut out = Vec::new();
        for (id, row) in self.recording_ids.iter().zip(&self.cells) {
            for (col, cell) in self.raters.iter().zip(row) {
                if let Some(label) = cell {
                    out.push(LabelRow {
                        recording_id: id.clone(),
                        rater: col.rater.clone(),
                        pass: col.pass,
                        label: *label,
                        timestamp: String::new(),
                    });
                }
            }
        }
        out
    }

    pub fn recording_ids(&self) -> &[String] {
        &self.recording_ids
    }

    pub fn raters(&self) -> &[RaterColumn] {
        &self.raters
    }

    pub fn rows(&self) -> &[Vec<Option<AssessmentClass>>] {
        &self.cells
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn n_columns(&self) -> usize {
        self.raters.len()
    }

    /// Column indices belonging to `rater`, in pass order.
    pub fn columns_of(&self, rater: &str) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.raters.len())
            .filter(|&i| self.raters[i].rater == rater)
            .collect();
        idx.sort_by_key(|&i| self.raters[i].pass);
        idx
    }

    /// Distinct rater names, sorted.
    pub fn rater_names(&self) -> Vec<String> {
        self.raters
            .iter()
            .map(|r| r.rater.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Sub-matrix with the rows whose ids satisfy `keep`.
    pub fn filter_rows(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        let (ids, cells): (Vec<_>, Vec<_>) = self
            .recording_ids
            .iter()
            .zip(&self.cells)
            .filter(|(id, _)| keep(id))
            .map(|(id, row)| (id.clone(), row.clone()))
            .unzip();
        Self {
            recording_ids: ids,
            raters: self.raters.clone(),
            cells,
        }
    }

    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self {
            recording_ids: self.recording_ids.clone(),
            raters: columns.iter().map(|&c| self.raters[c].clone()).collect(),
            cells: self
                .cells
                .iter()
                .map(|row| columns.iter().map(|&c| row[c]).collect())
                .collect(),
        }
    }
}

/// Long-form label record: `recording_id, rater, pass, label, timestamp`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub recording_id: String,
    pub rater: String,
    pub pass: u8,
    pub label: AssessmentClass,
    pub timestamp: String,
}

impl TableRow for LabelRow {
    fn columns() -> Vec<String> {
        ["recording_id", "rater", "pass", "label", "timestamp"]
            .map(String::from)
            .to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.recording_id.clone(),
            self.rater.clone(),
            self.pass.to_string(),
            self.label.to_string(),
            self.timestamp.clone(),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        Ok(Self {
            recording_id: f.str("recording_id")?.to_string(),
            rater: f.str("rater")?.to_string(),
            pass: f.parse("pass")?,
            label: f.parse("label")?,
            timestamp: f.str("timestamp")?.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AssessmentClass::*;

    #[test]
    fn rater_column_parsing() {
        assert_eq!("A1".parse::<RaterColumn>().unwrap(), RaterColumn::new("A", 1));
        assert_eq!("vet12".parse::<RaterColumn>().unwrap(), RaterColumn::new("vet", 12));
        assert!("A".parse::<RaterColumn>().is_err());
        assert!("7".parse::<RaterColumn>().is_err());
        assert_eq!(RaterColumn::new("B", 2).to_string(), "B2");
    }

    #[test]
    fn long_form_pivot_round_trip() {
        let m = LabelMatrix::from_complete_rows(
            &["A1", "A2", "B1", "B2", "C1"],
            &[
                ("r2", vec![Mild, Mild, Moderate, Mild, Healthy]),
                ("r1", vec![BadQuality, Other, Mild, Mild, Mild]),
            ],
        )
        .unwrap();
        let back = LabelMatrix::from_long(&m.to_long());
        assert_eq!(back.recording_ids(), &["r1", "r2"]);
        assert_eq!(back.n_columns(), 5);
        assert_eq!(back.rows()[1], m.rows()[0]);
        assert_eq!(back.rows()[0], m.rows()[1]);
    }

    #[test]
    fn missing_cells_and_last_write_wins() {
        let row = |id: &str, rater: &str, pass, label| LabelRow {
            recording_id: id.into(),
            rater: rater.into(),
            pass,
            label,
            timestamp: String::new(),
        };
        let m = LabelMatrix::from_long(&[
            row("x", "A", 1, Mild),
            row("y", "B", 1, Moderate),
            row("x", "A", 1, LoudThrilling),
        ]);
        assert_eq!(m.rows(), &[vec![Some(LoudThrilling), None], vec![None, Some(Moderate)]]);
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = LabelMatrix::new(
            vec!["a".into(), "b".into()],
            vec![RaterColumn::new("A", 1)],
            vec![vec![Some(Mild)], vec![]],
        )
        .unwrap_err();
        assert!(matches!(err, LabelError::NotRectangular { row: 1, .. }));
    }

    #[test]
    fn columns_of_rater_in_pass_order() {
        let m = LabelMatrix::from_complete_rows(&["A2", "B1", "A1"], &[("r", vec![Mild, Mild, Mild])])
            .unwrap();
        assert_eq!(m.columns_of("A"), vec![2, 0]);
        assert_eq!(m.rater_names(), vec!["A", "B"]);
    }
}
