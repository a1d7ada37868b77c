use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::AssessmentClass;

use super::select::removal_step;
use super::{LabelError, LabelMatrix};

/// Difference metric. Only nominal data occurs in this domain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Scale {
    #[default]
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaReport {
    pub alpha: f64,
    /// Units with at least two ratings.
    pub n_units: usize,
    pub observed_disagreement: f64,
    pub expected_disagreement: f64,
    /// All pairable ratings fall in one class, so expected disagreement is
    /// zero and alpha is reported as 1.
    pub degenerate: bool,
}

/// Nominal alpha from the coincidence matrix of the given units. Each unit
/// lists its non-missing ratings; units with fewer than two are ignored.
pub fn alpha_from_units<T: Ord + Clone>(units: &[Vec<T>]) -> Result<AlphaReport, LabelError> {
    let mut o: BTreeMap<(T, T), f64> = BTreeMap::new();
    let mut n_units = 0;
    for unit in units.iter().filter(|u| u.len() >= 2) {
        n_units += 1;
        let mut counts: BTreeMap<&T, f64> = BTreeMap::new();
        for v in unit {
            *counts.entry(v).or_default() += 1.0;
        }
        let w = 1.0 / (unit.len() - 1) as f64;
        for (&c, &nc) in &counts {
            for (&k, &nk) in &counts {
                let pairs = if c == k { nc * (nc - 1.0) } else { nc * nk };
                *o.entry((c.clone(), k.clone())).or_default() += pairs * w;
            }
        }
    }
    if n_units == 0 {
        return Err(LabelError::NoPairableUnits);
    }
    let mut marginals: BTreeMap<&T, f64> = BTreeMap::new();
    for ((c, _), v) in &o {
        *marginals.entry(c).or_default() += v;
    }
    let n: f64 = marginals.values().sum();
    let off_diagonal: f64 = o.iter().filter(|((c, k), _)| c != k).map(|(_, v)| v).sum();
    let sum_sq: f64 = marginals.values().map(|m| m * m).sum();
    let d_o = off_diagonal / n;
    let d_e = (n * n - sum_sq) / (n * (n - 1.0));
    let degenerate = d_e <= 0.0;
    Ok(AlphaReport {
        alpha: if degenerate { 1.0 } else { 1.0 - d_o / d_e },
        n_units,
        observed_disagreement: d_o,
        expected_disagreement: d_e.max(0.0),
        degenerate,
    })
}

fn units_of(matrix: &LabelMatrix) -> Vec<Vec<AssessmentClass>> {
    matrix
        .rows()
        .iter()
        .map(|row| row.iter().flatten().copied().collect())
        .collect()
}

pub fn krippendorff_alpha(matrix: &LabelMatrix, scale: Scale) -> Result<AlphaReport, LabelError> {
    match scale {
        Scale::Nominal => alpha_from_units(&units_of(matrix)),
    }
}

/// Agreement of one rater with themself across their two passes.
pub fn intra_rater_alpha(matrix: &LabelMatrix, rater: &str) -> Result<AlphaReport, LabelError> {
    let cols = matrix.columns_of(rater);
    if cols.len() != 2 {
        return Err(LabelError::RaterPasses {
            rater: rater.to_string(),
            found: cols.len(),
        });
    }
    krippendorff_alpha(&matrix.select_columns(&cols), Scale::Nominal)
}

/// Row subsets of the trace: no steps, then Steps 1, 1-2, 1-3 and 1-4.
pub const TRACE_STEPS: [&str; 5] = ["none", "1", "1-2", "1-3", "1-4"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaTraceRow {
    pub steps: &'static str,
    pub n_recordings: usize,
    /// Inter-rater alpha over all columns; `None` when nothing is pairable.
    pub all: Option<AlphaReport>,
    /// Intra-rater alpha for each rater with exactly two passes.
    pub intra: Vec<(String, Option<AlphaReport>)>,
}

fn pairable(r: Result<AlphaReport, LabelError>) -> Result<Option<AlphaReport>, LabelError> {
    match r {
        Ok(a) => Ok(Some(a)),
        Err(LabelError::NoPairableUnits) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Alpha after each cumulative selection step.
pub fn alpha_trace(matrix: &LabelMatrix) -> Result<Vec<AlphaTraceRow>, LabelError> {
    let first_removal: BTreeMap<&str, u8> = matrix
        .recording_ids()
        .iter()
        .zip(matrix.rows())
        .filter_map(|(id, row)| removal_step(row).map(|(s, _)| (id.as_str(), s)))
        .collect();
    let raters: Vec<String> = matrix
        .rater_names()
        .into_iter()
        .filter(|r| matrix.columns_of(r).len() == 2)
        .collect();
    let mut out = Vec::with_capacity(TRACE_STEPS.len());
    for (applied, steps) in TRACE_STEPS.iter().enumerate() {
        let sub = matrix.filter_rows(|id| first_removal.get(id).map_or(true, |&s| s as usize > applied));
        let mut intra = Vec::with_capacity(raters.len());
        for r in &raters {
            intra.push((r.clone(), pairable(intra_rater_alpha(&sub, r))?));
        }
        out.push(AlphaTraceRow {
            steps,
            n_recordings: sub.n_rows(),
            all: pairable(krippendorff_alpha(&sub, Scale::Nominal))?,
            intra,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use AssessmentClass::*;

    /// Independent pair-counting oracle: observed disagreement from ordered
    /// within-unit pairs, expected from all ordered pairs of pooled values.
    fn pair_oracle(units: &[Vec<u8>]) -> f64 {
        let pairable: Vec<&Vec<u8>> = units.iter().filter(|u| u.len() >= 2).collect();
        let pooled: Vec<u8> = pairable.iter().flat_map(|u| u.iter().copied()).collect();
        let n = pooled.len() as f64;
        let mut d_o = 0.0;
        for u in &pairable {
            let m = u.len();
            for i in 0..m {
                for j in 0..m {
                    if i != j && u[i] != u[j] {
                        d_o += 1.0 / (m - 1) as f64;
                    }
                }
            }
        }
        d_o /= n;
        let mut diff = 0usize;
        for i in 0..pooled.len() {
            for j in 0..pooled.len() {
                if i != j && pooled[i] != pooled[j] {
                    diff += 1;
                }
            }
        }
        let d_e = diff as f64 / (n * (n - 1.0));
        if d_e == 0.0 {
            1.0
        } else {
            1.0 - d_o / d_e
        }
    }

    #[test]
    fn worked_examples() {
        let a = alpha_from_units(&[vec!['a', 'a'], vec!['b', 'b'], vec!['a', 'b'], vec!['b', 'a']]).unwrap();
        assert!((a.observed_disagreement - 0.5).abs() < 1e-15);
        assert!((a.expected_disagreement - 4.0 / 7.0).abs() < 1e-15);
        assert!((a.alpha - 0.125).abs() < 1e-15);
        let b = alpha_from_units(&[vec!['a', 'b'], vec!['a', 'b']]).unwrap();
        assert!((b.alpha + 0.5).abs() < 1e-15);
        let c = alpha_from_units(&[vec![1, 1, 1], vec![2, 2], vec![3, 3, 3, 3]]).unwrap();
        assert_eq!(c.alpha, 1.0);
        assert!(!c.degenerate);
    }

    #[test]
    fn single_class_is_degenerate() {
        let r = alpha_from_units(&[vec![Mild, Mild], vec![Mild, Mild, Mild]]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.n_units, 2);
    }

    #[test]
    fn unpairable_units_are_an_error() {
        assert_eq!(alpha_from_units::<u8>(&[vec![1], vec![]]), Err(LabelError::NoPairableUnits));
    }

    #[test]
    fn intra_rater() {
        let m = LabelMatrix::from_complete_rows(
            &["A1", "A2", "B1"],
            &[
                ("1", vec![Mild, Moderate, Mild]),
                ("2", vec![Moderate, Mild, Mild]),
                ("3", vec![Mild, Moderate, Mild]),
                ("4", vec![Moderate, Mild, Mild]),
            ],
        )
        .unwrap();
        // Derangement with balanced margins: D_o = 1, D_e = 32/56.
        let a = intra_rater_alpha(&m, "A").unwrap();
        assert!((a.alpha + 0.75).abs() < 1e-12);
        assert!((a.alpha - pair_oracle(&[vec![0, 1], vec![1, 0], vec![0, 1], vec![1, 0]])).abs() < 1e-12);
        assert!(a.alpha < 0.0);
        assert!(matches!(
            intra_rater_alpha(&m, "B"),
            Err(LabelError::RaterPasses { found: 1, .. })
        ));
        let same = LabelMatrix::from_complete_rows(&["A1", "A2"], &[("1", vec![Mild, Mild]), ("2", vec![Moderate, Moderate])])
            .unwrap();
        assert_eq!(intra_rater_alpha(&same, "A").unwrap().alpha, 1.0);
    }

    #[test]
    fn trace_over_steps() {
        let m = LabelMatrix::from_complete_rows(
            &["A1", "A2", "B1", "B2", "C1"],
            &[
                ("1", vec![Mild; 5]),
                ("2", vec![Moderate; 5]),
                ("3", vec![BadQuality, Other, Mild, Mild, Mild]),
                ("4", vec![Healthy, Healthy, Mild, Mild, Mild]),
                ("5", vec![Mild, Mild, Moderate, Moderate, LoudThrilling]),
                ("6", vec![Mild, Moderate, LoudThrilling, Mild, Mild]),
            ],
        )
        .unwrap();
        let trace = alpha_trace(&m).unwrap();
        let counts: Vec<usize> = trace.iter().map(|r| r.n_recordings).collect();
        assert_eq!(counts, [6, 5, 4, 3, 2]);
        let last = &trace[4];
        assert_eq!(last.all.unwrap().alpha, 1.0);
        assert_eq!(last.intra.iter().map(|(r, _)| r.as_str()).collect::<Vec<_>>(), ["A", "B"]);
        assert!(trace[0].all.unwrap().alpha < last.all.unwrap().alpha);
    }

    #[test]
    fn trace_with_everything_removed() {
        let m = LabelMatrix::from_complete_rows(&["A1", "A2", "B1"], &[("1", vec![BadQuality, Other, Mild])]).unwrap();
        let trace = alpha_trace(&m).unwrap();
        assert!(trace[0].all.is_some());
        assert!(trace[1].all.is_none());
        assert_eq!(trace[1].intra[0].1, None);
    }

    fn units_strategy() -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(prop::collection::vec(0u8..4, 0..7), 3..50)
    }

    proptest! {
        #[test]
        fn matches_pair_oracle(units in units_strategy()) {
            prop_assume!(units.iter().any(|u| u.len() >= 2));
            let a = alpha_from_units(&units).unwrap();
            prop_assert!((a.alpha - pair_oracle(&units)).abs() < 1e-10);
            prop_assert!(a.alpha >= -1.0 - 1e-12 && a.alpha <= 1.0 + 1e-12);
        }

        #[test]
        fn relabeling_invariance(units in units_strategy(), shift in 1u8..4) {
            prop_assume!(units.iter().any(|u| u.len() >= 2));
            let renamed: Vec<Vec<u8>> = units
                .iter()
                .map(|u| u.iter().map(|v| (v + shift) % 4).collect())
                .collect();
            let a = alpha_from_units(&units).unwrap().alpha;
            let b = alpha_from_units(&renamed).unwrap().alpha;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn unanimous_unit_never_raises_observed_disagreement(units in units_strategy(), v in 0u8..4, m in 2usize..6) {
            prop_assume!(units.iter().any(|u| u.len() >= 2));
            let before = alpha_from_units(&units).unwrap().observed_disagreement;
            let mut more = units.clone();
            more.push(vec![v; m]);
            let after = alpha_from_units(&more).unwrap().observed_disagreement;
            prop_assert!(after <= before + 1e-15);
        }
    }
}
