use serde::Serialize;

use super::EvalError;

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(EvalError::NotSquare);
        }
        Ok(Self { counts })
    }

    pub fn from_labels(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Self, EvalError> {
        if y_true.len() != y_pred.len() {
            return Err(EvalError::LengthMismatch {
                truth: y_true.len(),
                predicted: y_pred.len(),
            });
        }
        let mut cm = Self::zeros(n_classes);
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= n_classes || p >= n_classes {
                return Err(EvalError::UnknownClass(t.max(p)));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    /// `(tp, fn, fp, tn)` of class `c` against the rest.
    pub fn one_vs_rest(&self, c: usize) -> (u64, u64, u64, u64) {
        let tp = self.counts[c][c];
        let fn_ = self.row_sum(c) - tp;
        let fp = self.col_sum(c) - tp;
        let tn = self.total() - tp - fn_ - fp;
        (tp, fn_, fp, tn)
    }
}

/// Binary MCC; `None` when a marginal is empty.
pub fn binary_mcc(tp: u64, fn_: u64, fp: u64, tn: u64) -> Option<f64> {
    let (tp, fn_, fp, tn) = (tp as f64, fn_ as f64, fp as f64, tn as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    (denom > 0.0).then(|| (tp * tn - fp * fn_) / denom.sqrt())
}

/// Multiclass MCC (R_K); `None` when either label distribution is a
/// single class.
pub fn multiclass_mcc(cm: &ConfusionMatrix) -> Option<f64> {
    let k = cm.n_classes();
    let c = cm.trace() as f64;
    let s = cm.total() as f64;
    let t: Vec<f64> = (0..k).map(|i| cm.row_sum(i) as f64).collect();
    let p: Vec<f64> = (0..k).map(|i| cm.col_sum(i) as f64).collect();
    let pt: f64 = t.iter().zip(&p).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|v| v * v).sum();
    let tt: f64 = t.iter().map(|v| v * v).sum();
    let denom = (s * s - pp) * (s * s - tt);
    (denom > 0.0).then(|| (c * s - pt) / denom.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    /// `None` when the class never occurs in the truth.
    pub sensitivity: Option<f64>,
    /// `None` when every sample belongs to the class.
    pub specificity: Option<f64>,
    pub accuracy: f64,
    pub mcc: f64,
    /// MCC denominator was zero; `mcc` is reported as 0.
    pub mcc_degenerate: bool,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn per_class_metrics(cm: &ConfusionMatrix, class: usize) -> Result<ClassMetrics, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyConfusion);
    }
    if class >= cm.n_classes() {
        return Err(EvalError::UnknownClass(class));
    }
    let (tp, fn_, fp, tn) = cm.one_vs_rest(class);
    let mcc = binary_mcc(tp, fn_, fp, tn);
    Ok(ClassMetrics {
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        accuracy: (tp + tn) as f64 / cm.total() as f64,
        mcc: mcc.unwrap_or(0.0),
        mcc_degenerate: mcc.is_none(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean over classes.
    Balanced,
    /// Mean weighted by class prevalence in the truth.
    Support,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    /// trace / total.
    pub accuracy: f64,
    /// Macro-averaged sensitivity.
    pub balanced_accuracy: f64,
    /// Multiclass R_K.
    pub mcc: f64,
    pub mcc_degenerate: bool,
}

/// Averages per-class sensitivity and specificity (classes where the value
/// is undefined are skipped) and adds the whole-matrix accuracy and R_K.
pub fn aggregate_metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<AggregateMetrics, EvalError> {
    let per: Vec<ClassMetrics> = (0..cm.n_classes())
        .map(|c| per_class_metrics(cm, c))
        .collect::<Result<_, _>>()?;
    let support: Vec<f64> = (0..cm.n_classes()).map(|c| cm.row_sum(c) as f64).collect();
    let mean = |get: &dyn Fn(&ClassMetrics) -> Option<f64>, weighting: Averaging| {
        let (mut num, mut den) = (0.0, 0.0);
        for (m, s) in per.iter().zip(&support) {
            if let Some(v) = get(m) {
                let w = match weighting {
                    Averaging::Balanced => 1.0,
                    Averaging::Support => *s,
                };
                num += w * v;
                den += w;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    let mcc = multiclass_mcc(cm);
    Ok(AggregateMetrics {
        sensitivity: mean(&|m| m.sensitivity, averaging),
        specificity: mean(&|m| m.specificity, averaging),
        accuracy: cm.trace() as f64 / cm.total() as f64,
        balanced_accuracy: mean(&|m| m.sensitivity, Averaging::Balanced),
        mcc: mcc.unwrap_or(0.0),
        mcc_degenerate: mcc.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(vec![vec![2, 1, 0], vec![0, 2, 1], vec![1, 0, 2]]).unwrap()
    }

    #[test]
    fn confusion_counting() {
        let cm = ConfusionMatrix::from_labels(&[0, 0, 1], &[0, 1, 1], 3).unwrap();
        assert_eq!(cm.counts(), &[vec![1, 1, 0], vec![0, 1, 0], vec![0, 0, 0]]);
        assert_eq!(ConfusionMatrix::from_labels(&[], &[], 3).unwrap(), ConfusionMatrix::zeros(3));
        let diag = ConfusionMatrix::from_labels(&[0, 1, 2, 0, 1, 2, 0, 1, 2], &[0, 1, 2, 0, 1, 2, 0, 1, 2], 3).unwrap();
        assert_eq!(diag.counts(), &[vec![3, 0, 0], vec![0, 3, 0], vec![0, 0, 3]]);
        assert!(ConfusionMatrix::from_labels(&[0], &[], 3).is_err());
        assert!(matches!(ConfusionMatrix::from_labels(&[3], &[0], 3), Err(EvalError::UnknownClass(3))));
    }

    #[test]
    fn worked_example() {
        let cm = example();
        let m = per_class_metrics(&cm, 0).unwrap();
        assert!((m.sensitivity.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.specificity.unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((m.accuracy - 7.0 / 9.0).abs() < 1e-15);
        let a = aggregate_metrics(&cm, Averaging::Balanced).unwrap();
        assert!((a.accuracy - 6.0 / 9.0).abs() < 1e-15);
        assert!((a.mcc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_inverted() {
        let cm = ConfusionMatrix::from_counts(vec![vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 5]]).unwrap();
        for c in 0..3 {
            let m = per_class_metrics(&cm, c).unwrap();
            assert_eq!((m.sensitivity, m.specificity, m.accuracy, m.mcc), (Some(1.0), Some(1.0), 1.0, 1.0));
        }
        for avg in [Averaging::Balanced, Averaging::Support] {
            let a = aggregate_metrics(&cm, avg).unwrap();
            assert_eq!((a.sensitivity, a.specificity, a.accuracy, a.mcc), (1.0, 1.0, 1.0, 1.0));
        }
        let anti = ConfusionMatrix::from_counts(vec![vec![0, 5], vec![5, 0]]).unwrap();
        assert_eq!(per_class_metrics(&anti, 0).unwrap().mcc, -1.0);
        assert_eq!(multiclass_mcc(&anti), Some(-1.0));
    }

    #[test]
    fn degenerate_cases_are_flagged() {
        let single = ConfusionMatrix::from_counts(vec![vec![6, 0, 0], vec![0, 0, 0], vec![0, 0, 0]]).unwrap();
        let a = aggregate_metrics(&single, Averaging::Balanced).unwrap();
        assert!(a.mcc_degenerate);
        assert_eq!(a.mcc, 0.0);
        let absent = per_class_metrics(&single, 1).unwrap();
        assert_eq!(absent.sensitivity, None);
        assert!(absent.mcc_degenerate);
        assert!(matches!(
            per_class_metrics(&ConfusionMatrix::zeros(3), 0),
            Err(EvalError::EmptyConfusion)
        ));
    }

    #[test]
    fn majority_predictor() {
        let cm = ConfusionMatrix::from_labels(&[0, 1, 2, 2, 2], &[2; 5], 3).unwrap();
        let s: Vec<_> = (0..3).map(|c| per_class_metrics(&cm, c).unwrap().sensitivity).collect();
        assert_eq!(s, [Some(0.0), Some(0.0), Some(1.0)]);
    }

    #[test]
    fn support_weighting() {
        let cm = example();
        // Uniform margins: support weighting equals the macro mean.
        let b = aggregate_metrics(&cm, Averaging::Balanced).unwrap();
        let s = aggregate_metrics(&cm, Averaging::Support).unwrap();
        assert!((b.sensitivity - s.sensitivity).abs() < 1e-15);
        let skewed = ConfusionMatrix::from_counts(vec![vec![8, 2], vec![1, 1]]).unwrap();
        let s = aggregate_metrics(&skewed, Averaging::Support).unwrap();
        // Support-weighted sensitivity is trace / total.
        assert!((s.sensitivity - 9.0 / 12.0).abs() < 1e-15);
        let b = aggregate_metrics(&skewed, Averaging::Balanced).unwrap();
        assert!((b.sensitivity - (0.8 + 0.5) / 2.0).abs() < 1e-15);
    }

    fn matrix(k: usize) -> impl Strategy<Value = Vec<Vec<u64>>> {
        prop::collection::vec(prop::collection::vec(0u64..40, k), k)
    }

    proptest! {
        #[test]
        fn two_by_two_rk_is_binary(m in matrix(2)) {
            let cm = ConfusionMatrix::from_counts(m.clone()).unwrap();
            let b = binary_mcc(m[0][0], m[0][1], m[1][0], m[1][1]);
            let r = multiclass_mcc(&cm);
            match (b, r) {
                (Some(b), Some(r)) => prop_assert!((b - r).abs() < 1e-12),
                (None, None) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn permutation_invariance(m in matrix(3), rot in 1usize..3) {
            let cm = ConfusionMatrix::from_counts(m.clone()).unwrap();
            prop_assume!(cm.total() > 0);
            let perm = |i: usize| (i + rot) % 3;
            let mut pm = vec![vec![0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    pm[perm(i)][perm(j)] = m[i][j];
                }
            }
            let pcm = ConfusionMatrix::from_counts(pm).unwrap();
            for c in 0..3 {
                prop_assert_eq!(per_class_metrics(&cm, c).unwrap(), per_class_metrics(&pcm, perm(c)).unwrap());
            }
            for avg in [Averaging::Balanced, Averaging::Support] {
                let a = aggregate_metrics(&cm, avg).unwrap();
                let b = aggregate_metrics(&pcm, avg).unwrap();
                prop_assert!((a.sensitivity - b.sensitivity).abs() < 1e-12);
                prop_assert!((a.specificity - b.specificity).abs() < 1e-12);
                prop_assert!((a.mcc - b.mcc).abs() < 1e-12);
                prop_assert_eq!(a.accuracy, b.accuracy);
            }
        }

        #[test]
        fn balanced_accuracy_is_macro_sensitivity(m in matrix(3)) {
            let cm = ConfusionMatrix::from_counts(m).unwrap();
            prop_assume!(cm.total() > 0);
            let a = aggregate_metrics(&cm, Averaging::Balanced).unwrap();
            prop_assert_eq!(a.balanced_accuracy, a.sensitivity);
        }
    }
}
