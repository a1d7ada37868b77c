use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AssessmentClass, MurmurIntensity};
use crate::labelkit::{LabelMatrix, RaterColumn};

use super::SynthError;

/// Expert A and B rate twice, C once.
pub const DEFAULT_COLUMNS: [&str; 5] = ["A1", "A2", "B1", "B2", "C1"];

const OFF_DOMAIN: [AssessmentClass; 3] = [
    AssessmentClass::Healthy,
    AssessmentClass::BadQuality,
    AssessmentClass::Other,
];

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn check_probability(name: &str, p: f64) -> Result<(), SynthError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SynthError::InvalidSpec(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// Independent per-cell error model for the expert label matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaterModel {
    /// Chance of answering a neighbouring grade on mild < moderate < loud.
    pub adjacent_flip_p: f64,
    /// Chance of answering healthy, bad quality or other.
    pub off_domain_p: f64,
    /// Per column in [-1, 1]: a flip goes up with probability (1 + bias) / 2.
    /// Missing entries are 0.
    #[serde(default)]
    pub per_rater_bias: Vec<f64>,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for RaterModel {
    fn default() -> Self {
        Self {
            adjacent_flip_p: 0.2,
            off_domain_p: 0.05,
            per_rater_bias: Vec::new(),
            seed: 0,
        }
    }
}

impl RaterModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        check_probability("adjacent_flip_p", self.adjacent_flip_p)?;
        check_probability("off_domain_p", self.off_domain_p)?;
        if self.adjacent_flip_p + self.off_domain_p > 1.0 {
            return Err(SynthError::InvalidSpec(
                "adjacent_flip_p + off_domain_p exceeds 1".into(),
            ));
        }
        if let Some(b) = self.per_rater_bias.iter().find(|b| !(-1.0..=1.0).contains(*b)) {
            return Err(SynthError::InvalidSpec(format!("rater bias {b} outside [-1, 1]")));
        }
        Ok(())
    }

    fn cell(&self, truth: MurmurIntensity, column: usize, rng: &mut ChaCha8Rng) -> AssessmentClass {
        let u: f64 = rng.random();
        if u < self.adjacent_flip_p {
            let bias = self.per_rater_bias.get(column).copied().unwrap_or(0.0);
            let up = rng.random::<f64>() < 0.5 * (1.0 + bias);
            let j = match truth.index() {
                1 if up => 2,
                1 => 0,
                // Mild and loud have a single neighbour.
                _ => 1,
            };
            MurmurIntensity::ALL[j].into()
        } else if u < self.adjacent_flip_p + self.off_domain_p {
            OFF_DOMAIN[rng.random_range(0..3)]
        } else {
            truth.into()
        }
    }
}

/// Label matrix of synthetic experts for recordings with known classes.
pub fn simulate_raters(
    truth: &[(String, MurmurIntensity)],
    model: &RaterModel,
    columns: &[&str],
) -> Result<LabelMatrix, SynthError> {
    model.validate()?;
    let raters = columns
        .iter()
        .map(|c| c.parse())
        .collect::<Result<Vec<RaterColumn>, _>>()?;
    let cells = truth
        .iter()
        .enumerate()
        .map(|(i, (_, class))| {
            let mut rng = stream(model.seed, i);
            (0..raters.len()).map(|c| Some(model.cell(*class, c, &mut rng))).collect()
        })
        .collect();
    let ids = truth.iter().map(|(id, _)| id.clone()).collect();
    Ok(LabelMatrix::new(ids, raters, cells)?)
}

/// Noise on the label assigned where a recording was taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScLabelModel {
    /// Chance the SC label is an adjacent grade instead of the true one.
    pub flip_p: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ScLabelModel {
    fn default() -> Self {
        Self { flip_p: 0.35, seed: 0 }
    }
}

/// SC label per recording: the true grade, or with probability `flip_p` an
/// adjacent one (moderate goes either way with equal odds).
pub fn assign_sc_labels(truth: &[MurmurIntensity], model: &ScLabelModel) -> Result<Vec<MurmurIntensity>, SynthError> {
    check_probability("flip_p", model.flip_p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    Ok(truth
        .iter()
        .map(|&t| {
            if rng.random::<f64>() >= model.flip_p {
                return t;
            }
            match t {
                MurmurIntensity::Mild | MurmurIntensity::LoudThrilling => MurmurIntensity::Moderate,
                MurmurIntensity::Moderate => {
                    if rng.random::<bool>() {
                        MurmurIntensity::Mild
                    } else {
                        MurmurIntensity::LoudThrilling
                    }
                }
            }
        })
        .collect())
}
