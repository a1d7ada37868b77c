use rayon::prelude::*;

use super::forest::tree_rng;
use super::tree::{grow, Criterion, Presorted, TreeParams};
use super::{Dataset, EnsembleModel, GradientBoostParams, Hyperparams, LearnError, WeightedTree, MODEL_FORMAT_VERSION};

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

/// Softmax cross-entropy of one row.
pub fn cross_entropy(scores: &[f64], class: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[class]
}

/// Per-class gradient `p - 1[y = k]` and diagonal Hessian `p (1 - p)`.
pub fn softmax_grad_hess(scores: &[f64], class: usize) -> (Vec<f64>, Vec<f64>) {
    let p = softmax(scores);
    let g = p
        .iter()
        .enumerate()
        .map(|(k, pk)| pk - if k == class { 1.0 } else { 0.0 })
        .collect();
    let h = p.iter().map(|pk| pk * (1.0 - pk)).collect();
    (g, h)
}

fn weighted_loss(scores: &[Vec<f64>], data: &Dataset) -> f64 {
    let total: f64 = data.weights().iter().sum();
    scores
        .iter()
        .zip(data.y())
        .zip(data.weights())
        .map(|((s, &y), w)| w * cross_entropy(s, y))
        .sum::<f64>()
        / total
}

pub fn fit_gradient_boost(
    data: &Dataset,
    params: &GradientBoostParams,
    seed: u64,
) -> Result<EnsembleModel, LearnError> {
    fit_gradient_boost_traced(data, params, seed).map(|(m, _)| m)
}

/// Like [`fit_gradient_boost`], also returning the weighted training
/// cross-entropy before the first round and after every round.
pub fn fit_gradient_boost_traced(
    data: &Dataset,
    params: &GradientBoostParams,
    seed: u64,
) -> Result<(EnsembleModel, Vec<f64>), LearnError> {
    params.validate()?;
    let k = data.n_classes();
    let n = data.len();
    let presorted = Presorted::new(data.x());
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: None,
    };
    let mut scores = vec![vec![0.0; k]; n];
    let mut trees = Vec::with_capacity(params.n_rounds * k);
    let mut losses = vec![weighted_loss(&scores, data)];

    for round in 0..params.n_rounds {
        let probs: Vec<Vec<f64>> = scores.iter().map(|s| softmax(s)).collect();
        let round_trees: Vec<_> = (0..k)
            .into_par_iter()
            .map(|c| {
                let mut g = Vec::with_capacity(n);
                let mut h = Vec::with_capacity(n);
                for ((p, &y), &w) in probs.iter().zip(data.y()).zip(data.weights()) {
                    g.push(w * (p[c] - if y == c { 1.0 } else { 0.0 }));
                    h.push(w * p[c] * (1.0 - p[c]));
                }
                let criterion = Criterion::Newton {
                    g: &g,
                    h: &h,
                    lambda: params.lambda,
                    gamma: params.gamma,
                };
                let mut rng = tree_rng(seed, round * k + c);
                grow(&presorted, data.weights(), &criterion, tree_params, &mut rng)
            })
            .collect();
        for (c, tree) in round_trees.into_iter().enumerate() {
            for (s, x) in scores.iter_mut().zip(data.x()) {
                s[c] += params.learning_rate * tree.leaf_value(x)[0];
            }
            trees.push(WeightedTree {
                tree,
                weight: params.learning_rate,
                class: Some(c),
            });
        }
        losses.push(weighted_loss(&scores, data));
    }
    let model = EnsembleModel {
        format_version: MODEL_FORMAT_VERSION,
        hyperparams: Hyperparams::GradientBoost(*params),
        seed,
        n_classes: k,
        n_features: data.n_features(),
        trees,
    };
    Ok((model, losses))
}

#[cfg(test)]
mod tests {
    use super::super::gaussian_blobs;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let k = rng.random_range(2..6);
            let s: Vec<f64> = (0..k).map(|_| rng.random_range(-4.0..4.0)).collect();
            let y = rng.random_range(0..k);
            let (g, h) = softmax_grad_hess(&s, y);
            let eps = 1e-4;
            for j in 0..k {
                let shifted = |d: f64| {
                    let mut t = s.clone();
                    t[j] += d;
                    cross_entropy(&t, y)
                };
                let fd_g = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
                let fd_h = (shifted(eps) - 2.0 * shifted(0.0) + shifted(-eps)) / (eps * eps);
                assert!((fd_g - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-2), "g {fd_g} vs {}", g[j]);
                assert!((fd_h - h[j]).abs() <= 1e-5 * h[j].abs().max(1e-1) + 1e-7, "h {fd_h} vs {}", h[j]);
            }
        }
    }

    #[test]
    fn training_loss_never_rises() {
        for seed in 0..5 {
            let (x, y) = gaussian_blobs(20, 3, 2.0, seed);
            let d = Dataset::new(x, y, 3).unwrap();
            let p = GradientBoostParams {
                n_rounds: 30,
                learning_rate: 0.3,
                ..Default::default()
            };
            let (_, losses) = fit_gradient_boost_traced(&d, &p, seed).unwrap();
            assert!((losses[0] - 3f64.ln()).abs() < 1e-12);
            for w in losses.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{losses:?}");
            }
        }
    }

    #[test]
    fn blobs_holdout() {
        let (x, y) = gaussian_blobs(100, 6, 1.0, 3);
        let (xt, yt) = gaussian_blobs(50, 6, 1.0, 4);
        let p = GradientBoostParams {
            n_rounds: 40,
            ..Default::default()
        };
        let m = fit_gradient_boost(&Dataset::new(x, y, 3).unwrap(), &p, 0).unwrap();
        let pred = m.predict(&xt).unwrap();
        let acc = pred.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / yt.len() as f64;
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 0.0, -1000.0]);
        assert_eq!(p[0], 1.0);
        assert!(cross_entropy(&[1000.0, 0.0], 1).is_finite());
    }
}
