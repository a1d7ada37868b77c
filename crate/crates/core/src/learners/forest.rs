use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{grow, sqrt_features, Criterion, Presorted, TreeParams};
use super::{Dataset, EnsembleModel, Hyperparams, LearnError, RandomForestParams, WeightedTree, MODEL_FORMAT_VERSION};

/// Independent random stream for tree `index` of an ensemble seeded with
/// `seed`, so trees can be grown in any order.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn fit_random_forest(
    data: &Dataset,
    params: &RandomForestParams,
    seed: u64,
) -> Result<EnsembleModel, LearnError> {
    params.validate()?;
    let presorted = Presorted::new(data.x());
    let criterion = Criterion::Gini {
        y: data.y(),
        n_classes: data.n_classes(),
    };
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: params
            .feature_subsample
            .then(|| sqrt_features(data.n_features())),
    };
    let n = data.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let weights: Vec<f64> = if params.bootstrap {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                counts
                    .iter()
                    .zip(data.weights())
                    .map(|(&c, &w)| c as f64 * w)
                    .collect()
            } else {
                data.weights().to_vec()
            };
            let weights = if weights.iter().any(|&w| w > 0.0) {
                weights
            } else {
                data.weights().to_vec()
            };
            WeightedTree {
                tree: grow(&presorted, &weights, &criterion, tree_params, &mut rng),
                weight: 1.0,
                class: None,
            }
        })
        .collect();
    Ok(EnsembleModel {
        format_version: MODEL_FORMAT_VERSION,
        hyperparams: Hyperparams::RandomForest(*params),
        seed,
        n_classes: data.n_classes(),
        n_features: data.n_features(),
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{fit_tree, gaussian_blobs};
    use super::*;

    fn small() -> RandomForestParams {
        RandomForestParams {
            n_trees: 40,
            ..Default::default()
        }
    }

    #[test]
    fn blobs_holdout() {
        let (x, y) = gaussian_blobs(100, 6, 1.0, 3);
        let (xt, yt) = gaussian_blobs(50, 6, 1.0, 4);
        let m = fit_random_forest(&Dataset::new(x, y, 3).unwrap(), &small(), 7).unwrap();
        let pred = m.predict(&xt).unwrap();
        let acc = pred.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / yt.len() as f64;
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn same_seed_same_model() {
        let (x, y) = gaussian_blobs(30, 5, 2.0, 1);
        let d = Dataset::new(x, y, 3).unwrap();
        let a = fit_random_forest(&d, &small(), 11).unwrap();
        let b = fit_random_forest(&d, &small(), 11).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = fit_random_forest(&d, &small(), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn one_tree_without_bootstrap_is_a_tree() {
        let (x, y) = gaussian_blobs(30, 5, 2.0, 1);
        let d = Dataset::new(x.clone(), y, 3).unwrap();
        let p = RandomForestParams {
            n_trees: 1,
            bootstrap: false,
            ..Default::default()
        };
        let forest = fit_random_forest(&d, &p, 5).unwrap();
        let tp = TreeParams {
            max_depth: p.max_depth,
            min_leaf: p.min_leaf,
            max_features: Some(sqrt_features(5)),
        };
        let tree = fit_tree(&d, &tp, &mut tree_rng(5, 0)).unwrap();
        let expected: Vec<usize> = x.iter().map(|r| tree.predict_class(r)).collect();
        assert_eq!(forest.predict(&x).unwrap(), expected);
    }
}
