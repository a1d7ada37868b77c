use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::forest::tree_rng;
use super::tree::{grow, Criterion, DecisionTree, Presorted, TreeParams};
use super::{AdaBoostParams, Dataset, EnsembleModel, Hyperparams, LearnError, WeightedTree, MODEL_FORMAT_VERSION};

/// Smallest error used for the weight of a perfect tree after round one.
const MIN_ERROR: f64 = 1e-10;

fn normalized(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

fn weighted_error(tree: &DecisionTree, data: &Dataset, w: &[f64]) -> (f64, Vec<bool>) {
    let miss: Vec<bool> = data
        .x()
        .iter()
        .zip(data.y())
        .map(|(x, &y)| tree.predict_class(x) != y)
        .collect();
    let err = miss.iter().zip(w).filter(|(m, _)| **m).map(|(_, w)| w).sum();
    (err, miss)
}

/// Multiclass SAMME.
pub fn fit_adaboost(data: &Dataset, params: &AdaBoostParams, seed: u64) -> Result<EnsembleModel, LearnError> {
    params.validate()?;
    let k = data.n_classes() as f64;
    let presorted = Presorted::new(data.x());
    let criterion = Criterion::Gini {
        y: data.y(),
        n_classes: data.n_classes(),
    };
    let tree_params = TreeParams {
        max_depth: params.stump_depth,
        min_leaf: 1,
        max_features: None,
    };
    let base = normalized(data.weights());
    let chance = 1.0 - 1.0 / k;
    let mut w = base.clone();
    let mut trees: Vec<WeightedTree> = Vec::new();

    for round in 0..params.n_rounds {
        let mut rng = tree_rng(seed, round);
        let mut tree = grow(&presorted, &w, &criterion, tree_params, &mut rng);
        let (mut err, mut miss) = weighted_error(&tree, data, &w);
        if err >= chance && k > 1.0 {
            // Restart from the original weights on a weighted resample.
            w = base.clone();
            let pick = WeightedIndex::new(&base).expect("weights validated");
            let mut counts = vec![0.0; base.len()];
            for _ in 0..base.len() {
                counts[pick.sample(&mut rng)] += 1.0;
            }
            tree = grow(&presorted, &counts, &criterion, tree_params, &mut rng);
            (err, miss) = weighted_error(&tree, data, &w);
            if err >= chance {
                continue;
            }
        }
        if err <= 0.0 {
            let weight = if trees.is_empty() {
                1.0
            } else {
                params.learning_rate * (((1.0 - MIN_ERROR) / MIN_ERROR).ln() + (k - 1.0).ln())
            };
            trees.push(WeightedTree {
                tree,
                weight,
                class: None,
            });
            break;
        }
        let alpha = params.learning_rate * (((1.0 - err) / err).ln() + (k - 1.0).ln());
        for (wi, m) in w.iter_mut().zip(&miss) {
            if *m {
                *wi *= alpha.exp();
            }
        }
        w = normalized(&w);
        trees.push(WeightedTree {
            tree,
            weight: alpha,
            class: None,
        });
    }
    if trees.is_empty() {
        let tree = grow(&presorted, &base, &criterion, tree_params, &mut tree_rng(seed, 0));
        trees.push(WeightedTree {
            tree,
            weight: 1.0,
            class: None,
        });
    }
    Ok(EnsembleModel {
        format_version: MODEL_FORMAT_VERSION,
        hyperparams: Hyperparams::Adaboost(*params),
        seed,
        n_classes: data.n_classes(),
        n_features: data.n_features(),
        trees,
    })
}
