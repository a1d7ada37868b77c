use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{FieldReader, MurmurIntensity, TableRow};

use super::EvalError;

/// One recording as seen by the splitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitCandidate {
    pub recording_id: String,
    pub sc_label: Option<MurmurIntensity>,
    /// Present only for recordings kept by the expert selection.
    pub mv_label: Option<MurmurIntensity>,
    pub n_cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assigned {
    pub recording_id: String,
    pub label: MurmurIntensity,
    pub n_cycles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub fraction: f64,
    pub seed: u64,
    pub test: Vec<Assigned>,
    /// Every non-test recording with an SC label.
    pub train_sc: Vec<Assigned>,
    /// Every non-test recording kept by selection, with its majority vote.
    pub train_hq: Vec<Assigned>,
}

impl SplitPlan {
    pub fn test_ids(&self) -> BTreeSet<&str> {
        self.test.iter().map(|a| a.recording_id.as_str()).collect()
    }

    /// Test recordings per intensity, in class order.
    pub fn test_counts(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for a in &self.test {
            out[a.label.index()] += 1;
        }
        out
    }

    pub fn rows(&self) -> Vec<SplitRow> {
        let tagged = [("test", &self.test), ("train_sc", &self.train_sc), ("train_hq", &self.train_hq)];
        tagged
            .iter()
            .flat_map(|(set, items)| {
                items.iter().map(move |a| SplitRow {
                    recording_id: a.recording_id.clone(),
                    set: set.to_string(),
                    label: a.label,
                    n_cycles: a.n_cycles,
                })
            })
            .collect()
    }

    /// Rebuilds a plan from its table rows.
    pub fn from_rows(rows: &[SplitRow], fraction: f64, seed: u64) -> Result<Self, EvalError> {
        let mut plan = SplitPlan {
            fraction,
            seed,
            test: Vec::new(),
            train_sc: Vec::new(),
            train_hq: Vec::new(),
        };
        for r in rows {
            let a = Assigned {
                recording_id: r.recording_id.clone(),
                label: r.label,
                n_cycles: r.n_cycles,
            };
            match r.set.as_str() {
                "test" => plan.test.push(a),
                "train_sc" => plan.train_sc.push(a),
                "train_hq" => plan.train_hq.push(a),
                other => return Err(EvalError::InvalidParameter(format!("unknown split set `{other}`"))),
            }
        }
        Ok(plan)
    }
}

/// Line of `split.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRow {
    pub recording_id: String,
    pub set: String,
    pub label: MurmurIntensity,
    pub n_cycles: usize,
}

impl TableRow for SplitRow {
    fn columns() -> Vec<String> {
        ["recording_id", "set", "label", "n_cycles"].map(String::from).to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.recording_id.clone(),
            self.set.clone(),
            self.label.to_string(),
            self.n_cycles.to_string(),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        Ok(Self {
            recording_id: f.str("recording_id")?.to_string(),
            set: f.str("set")?.to_string(),
            label: f.parse("label")?,
            n_cycles: f.parse("n_cycles")?,
        })
    }
}

/// Draws `ceil(fraction * n_class)` test recordings per intensity class,
/// where `n_class` counts kept recordings by majority vote and only those
/// whose SC label agrees with the vote are eligible. Whole recordings move
/// together, so no cycle of a test recording is ever trained on.
pub fn grouped_split(candidates: &[SplitCandidate], fraction: f64, seed: u64) -> Result<SplitPlan, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::InvalidParameter(format!("fraction {fraction} not in (0, 1)")));
    }
    let mut seen = BTreeSet::new();
    for c in candidates {
        if !seen.insert(c.recording_id.as_str()) {
            return Err(EvalError::DuplicateRecording(c.recording_id.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_ids = BTreeSet::new();
    let mut test = Vec::new();
    for class in MurmurIntensity::ALL {
        let n_class = candidates.iter().filter(|c| c.mv_label == Some(class)).count();
        let mut eligible: Vec<&SplitCandidate> = candidates
            .iter()
            .filter(|c| c.mv_label == Some(class) && c.sc_label == Some(class))
            .collect();
        eligible.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
        let need = (fraction * n_class as f64).ceil() as usize;
        if need == 0 || eligible.len() < need {
            return Err(EvalError::NotEnoughEligible {
                class,
                needed: need.max(1),
                eligible: eligible.len(),
            });
        }
        let mut picked = sample(&mut rng, eligible.len(), need).into_vec();
        picked.sort_unstable();
        for i in picked {
            let c = eligible[i];
            test_ids.insert(c.recording_id.clone());
            test.push(Assigned {
                recording_id: c.recording_id.clone(),
                label: class,
                n_cycles: c.n_cycles,
            });
        }
    }
    let rest = || candidates.iter().filter(|c| !test_ids.contains(&c.recording_id));
    let assign = |c: &SplitCandidate, label: MurmurIntensity| Assigned {
        recording_id: c.recording_id.clone(),
        label,
        n_cycles: c.n_cycles,
    };
    let train_sc = rest().filter_map(|c| c.sc_label.map(|l| assign(c, l))).collect();
    let train_hq = rest().filter_map(|c| c.mv_label.map(|l| assign(c, l))).collect();
    Ok(SplitPlan {
        fraction,
        seed,
        test,
        train_sc,
        train_hq,
    })
}
