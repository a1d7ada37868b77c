use std::collections::BTreeMap;

use crate::corpus::{FieldReader, TableRow};
use crate::labelkit::{AlphaReport, AlphaTraceRow};

/// Line of `features/segments.csv`: one cycle as a sample range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentRow {
    pub recording_id: String,
    pub cycle_index: usize,
    pub start: usize,
    pub end: usize,
}

impl TableRow for SegmentRow {
    fn columns() -> Vec<String> {
        ["recording_id", "cycle_index", "start", "end"].map(String::from).to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.recording_id.clone(),
            self.cycle_index.to_string(),
            self.start.to_string(),
            self.end.to_string(),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        let row = Self {
            recording_id: f.str("recording_id")?.to_string(),
            cycle_index: f.parse("cycle_index")?,
            start: f.parse("start")?,
            end: f.parse("end")?,
        };
        if row.end <= row.start {
            return Err(format!("cycle {} of {} ends before it starts", row.cycle_index, row.recording_id));
        }
        Ok(row)
    }
}

/// Line of `reports/cycle_counts.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleCountRow {
    pub recording_id: String,
    pub n_cycles: usize,
    /// Cycles kept despite a length outside 40-200 bpm.
    pub n_out_of_range: usize,
}

impl TableRow for CycleCountRow {
    fn columns() -> Vec<String> {
        ["recording_id", "n_cycles", "n_out_of_range"].map(String::from).to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.recording_id.clone(),
            self.n_cycles.to_string(),
            self.n_out_of_range.to_string(),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        Ok(Self {
            recording_id: f.str("recording_id")?.to_string(),
            n_cycles: f.parse("n_cycles")?,
            n_out_of_range: f.parse("n_out_of_range")?,
        })
    }
}

/// Line of `reports/cycle_histogram.csv`: how many recordings yielded
/// `n_cycles` cycles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramRow {
    pub n_cycles: usize,
    pub n_recordings: usize,
}

impl HistogramRow {
    pub fn from_counts(counts: impl IntoIterator<Item = usize>) -> Vec<HistogramRow> {
        let mut hist = BTreeMap::new();
        for c in counts {
            *hist.entry(c).or_insert(0) += 1;
        }
        hist.into_iter()
            .map(|(n_cycles, n_recordings)| HistogramRow { n_cycles, n_recordings })
            .collect()
    }
}

impl TableRow for HistogramRow {
    fn columns() -> Vec<String> {
        ["n_cycles", "n_recordings"].map(String::from).to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        vec![self.n_cycles.to_string(), self.n_recordings.to_string()]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        Ok(Self {
            n_cycles: f.parse("n_cycles")?,
            n_recordings: f.parse("n_recordings")?,
        })
    }
}

/// Line of `reports/alpha_trace.csv`. `statistic` is `all` or a rater
/// name; the numeric columns are empty when nothing was pairable.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRow {
    pub steps: String,
    pub n_recordings: usize,
    pub statistic: String,
    pub alpha: Option<f64>,
    pub n_units: Option<usize>,
    pub degenerate: Option<bool>,
}

impl AlphaRow {
    pub fn from_trace(trace: &[AlphaTraceRow]) -> Vec<AlphaRow> {
        let mut out = Vec::new();
        for t in trace {
            let row = |statistic: &str, r: &Option<AlphaReport>| AlphaRow {
                steps: t.steps.to_string(),
                n_recordings: t.n_recordings,
                statistic: statistic.to_string(),
                alpha: r.as_ref().map(|r| r.alpha),
                n_units: r.as_ref().map(|r| r.n_units),
                degenerate: r.as_ref().map(|r| r.degenerate),
            };
            out.push(row("all", &t.all));
            for (rater, r) in &t.intra {
                out.push(row(rater, r));
            }
        }
        out
    }
}

impl TableRow for AlphaRow {
    fn columns() -> Vec<String> {
        ["steps", "n_recordings", "statistic", "alpha", "n_units", "degenerate"]
            .map(String::from)
            .to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.steps.clone(),
            self.n_recordings.to_string(),
            self.statistic.clone(),
            self.alpha.map(|v| v.to_string()).unwrap_or_default(),
            self.n_units.map(|v| v.to_string()).unwrap_or_default(),
            self.degenerate.map(|v| v.to_string()).unwrap_or_default(),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        Ok(Self {
            steps: f.str("steps")?.to_string(),
            n_recordings: f.parse("n_recordings")?,
            statistic: f.str("statistic")?.to_string(),
            alpha: f.opt("alpha")?,
            n_units: f.opt("n_units")?,
            degenerate: f.opt("degenerate")?,
        })
    }
}
