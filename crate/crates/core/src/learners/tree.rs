use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, LearnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class distribution for classification trees, a single weight for
    /// Newton regression trees.
    Leaf { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub n_features: usize,
}

impl DecisionTree {
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
                Node::Leaf { value } => return value,
            }
        }
    }

    /// Most probable class, lowest index on ties.
    pub fn predict_class(&self, x: &[f64]) -> usize {
        argmax(self.leaf_value(x))
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per node; `None` considers all of them.
    pub max_features: Option<usize>,
}

/// `ceil(sqrt(n_features))`, the per-node subset size used by forests.
pub fn sqrt_features(n_features: usize) -> usize {
    (n_features as f64).sqrt().ceil() as usize
}

/// Row indices sorted by each feature, computed once per training set.
pub(crate) struct Presorted<'a> {
    x: &'a [Vec<f64>],
    orders: Vec<Vec<u32>>,
    /// `values[f][k]` is feature `f` of row `orders[f][k]`.
    values: Vec<Vec<f64>>,
}

impl<'a> Presorted<'a> {
    pub(crate) fn new(x: &'a [Vec<f64>]) -> Self {
        let n_features = x.first().map_or(0, Vec::len);
        let orders: Vec<Vec<u32>> = (0..n_features)
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.len() as u32).collect();
                idx.sort_by(|&a, &b| x[a as usize][f].total_cmp(&x[b as usize][f]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let values = orders
            .iter()
            .enumerate()
            .map(|(f, o)| o.iter().map(|&r| x[r as usize][f]).collect())
            .collect();
        Self { x, orders, values }
    }
}

pub(crate) enum Criterion<'a> {
    Gini { y: &'a [usize], n_classes: usize },
    Newton {
        g: &'a [f64],
        h: &'a [f64],
        lambda: f64,
        gamma: f64,
    },
}

/// Newton split gain for gradient/Hessian sums of the two children.
pub fn split_gain(g_l: f64, h_l: f64, g_r: f64, h_r: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (newton_term(g_l, h_l, lambda) + newton_term(g_r, h_r, lambda) - newton_term(g_l + g_r, h_l + h_r, lambda))
        - gamma
}

#[inline]
fn newton_term(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        g * g / (h + lambda)
    } else {
        0.0
    }
}

/// Newton leaf weight `-G / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        -g / (h + lambda)
    } else {
        0.0
    }
}

struct Candidate {
    score: f64,
    feature: usize,
    position: usize,
    threshold: f64,
}

/// Grows one tree. Every feature owns a block of `m` slots in `idx`/`val`
/// holding the active rows in that feature's order; a node is the same
/// sub-range `lo..hi` of every block, and splitting partitions each block
/// range in place.
struct Builder<'b, R> {
    idx: Vec<u32>,
    val: Vec<f64>,
    m: usize,
    scratch_idx: Vec<u32>,
    scratch_val: Vec<f64>,
    weights: &'b [f64],
    criterion: &'b Criterion<'b>,
    params: TreeParams,
    n_features: usize,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
    /// Gradient and Hessian totals of the node being split.
    node_sums: (f64, f64),
    /// Per-row (g, h) pairs for Newton trees, empty otherwise.
    gh: Vec<[f64; 2]>,
    rng: &'b mut R,
}

fn leaf_node(criterion: &Criterion<'_>, weights: &[f64], rows: &[u32]) -> Node {
    let value = match criterion {
        Criterion::Gini { y, n_classes } => {
            let mut dist = vec![0.0; *n_classes];
            for &r in rows {
                dist[y[r as usize]] += weights[r as usize];
            }
            let total: f64 = dist.iter().sum();
            dist.iter_mut().for_each(|d| *d /= total);
            dist
        }
        Criterion::Newton { g, h, lambda, .. } => {
            let (gs, hs) = rows
                .iter()
                .fold((0.0, 0.0), |(a, b), &r| (a + g[r as usize], b + h[r as usize]));
            vec![leaf_weight(gs, hs, *lambda)]
        }
    };
    Node::Leaf { value }
}

fn threshold(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) * 0.5;
    if mid > a {
        mid
    } else {
        b
    }
}

impl<R: Rng> Builder<'_, R> {
    fn is_pure(&self, rows: &[u32]) -> bool {
        match self.criterion {
            Criterion::Gini { y, .. } => {
                let first = y[rows[0] as usize];
                rows.iter().all(|&r| y[r as usize] == first)
            }
            Criterion::Newton { .. } => false,
        }
    }

    fn scan(&self, feature: usize, lo: usize, hi: usize) -> Option<Candidate> {
        let base = feature * self.m;
        let list = &self.idx[base + lo..base + hi];
        let val = &self.val[base + lo..base + hi];
        let n = list.len();
        let min_leaf = self.params.min_leaf.max(1);
        // Split positions i put list[..=i] on the left.
        let first = min_leaf - 1;
        let end = n - min_leaf;
        let mut best: Option<Candidate> = None;
        let mut take = |score: f64, i: usize| {
            best = Some(Candidate {
                score,
                feature,
                position: i,
                threshold: threshold(val[i], val[i + 1]),
            });
        };
        match self.criterion {
            Criterion::Gini { y, n_classes } => {
                let w = self.weights;
                let mut total = vec![0.0; *n_classes];
                for &r in list {
                    total[y[r as usize]] += w[r as usize];
                }
                let w_total: f64 = total.iter().sum();
                let mut left = vec![0.0; *n_classes];
                let mut w_left = 0.0;
                let mut best_score = f64::NEG_INFINITY;
                for (i, &r) in list.iter().enumerate().take(end) {
                    let r = r as usize;
                    left[y[r]] += w[r];
                    w_left += w[r];
                    if i < first || !(val[i] < val[i + 1]) {
                        continue;
                    }
                    let w_right = w_total - w_left;
                    if w_left <= 0.0 || w_right <= 0.0 {
                        continue;
                    }
                    let sl: f64 = left.iter().map(|c| c * c).sum();
                    let sr: f64 = left.iter().zip(&total).map(|(l, t)| (t - l) * (t - l)).sum();
                    let score = sl / w_left + sr / w_right;
                    if score > best_score {
                        best_score = score;
                        take(score, i);
                    }
                }
            }
            Criterion::Newton { lambda, gamma, .. } => {
                let (lambda, gamma) = (*lambda, *gamma);
                let gh = &self.gh;
                let (g_total, h_total) = self.node_sums;
                // The gain is monotone in the children's score, so only a
                // score above the parent's and above the best so far needs
                // the full gain.
                let mut floor = newton_term(g_total, h_total, lambda);
                let mut best_gain = 0.0;
                let (mut g_left, mut h_left) = (0.0, 0.0);
                for (i, (&r, pair)) in list[..end].iter().zip(val.windows(2)).enumerate() {
                    let [gr, hr] = gh[r as usize];
                    g_left += gr;
                    h_left += hr;
                    if i < first || !(pair[0] < pair[1]) {
                        continue;
                    }
                    let (g_right, h_right) = (g_total - g_left, h_total - h_left);
                    let score = newton_term(g_left, h_left, lambda) + newton_term(g_right, h_right, lambda);
                    if !(score > floor) {
                        continue;
                    }
                    let gain = split_gain(g_left, h_left, g_right, h_right, lambda, gamma);
                    if gain > best_gain {
                        best_gain = gain;
                        floor = score;
                        take(gain, i);
                    }
                }
            }
        }
        best
    }

    /// Stable in-place partition of one block range by `goes_left`.
    /// Branch-free: every row is written to both destinations and only
    /// one cursor advances.
    fn partition(&mut self, a: usize, b: usize) {
        let mut l = a;
        let mut k = 0;
        for i in a..b {
            let r = self.idx[i];
            let v = self.val[i];
            let left = self.goes_left[r as usize] as usize;
            self.idx[l] = r;
            self.val[l] = v;
            self.scratch_idx[k] = r;
            self.scratch_val[k] = v;
            l += left;
            k += 1 - left;
        }
        self.idx[l..b].copy_from_slice(&self.scratch_idx[..k]);
        self.val[l..b].copy_from_slice(&self.scratch_val[..k]);
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        let min_leaf = self.params.min_leaf.max(1);
        let rows = &self.idx[lo..hi];
        if depth >= self.params.max_depth || rows.len() < 2 * min_leaf || self.is_pure(rows) {
            let leaf = leaf_node(self.criterion, self.weights, rows);
            self.nodes.push(leaf);
            return id;
        }
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < self.n_features => {
                let mut f = sample(self.rng, self.n_features, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..self.n_features).collect(),
        };
        if let Criterion::Newton { .. } = self.criterion {
            let gh = &self.gh;
            self.node_sums = self.idx[lo..hi].iter().fold((0.0, 0.0), |(a, b), &r| {
                let [g, h] = gh[r as usize];
                (a + g, b + h)
            });
        }
        let mut best: Option<Candidate> = None;
        for f in features {
            if let Some(c) = self.scan(f, lo, hi) {
                if best.as_ref().map_or(true, |b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best else {
            let leaf = leaf_node(self.criterion, self.weights, &self.idx[lo..hi]);
            self.nodes.push(leaf);
            return id;
        };
        let base = best.feature * self.m;
        for i in lo..hi {
            let r = self.idx[base + i] as usize;
            self.goes_left[r] = i - lo <= best.position;
        }
        // Leaves only read block 0.
        let blocks = if depth + 1 >= self.params.max_depth { 1 } else { self.n_features };
        for f in 0..blocks {
            let base = f * self.m;
            self.partition(base + lo, base + hi);
        }
        let mid = lo + best.position + 1;
        self.nodes.push(Node::Leaf { value: Vec::new() });
        let left = self.build(lo, mid, depth + 1);
        let right = self.build(mid, hi, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

pub(crate) fn grow<R: Rng>(
    presorted: &Presorted<'_>,
    weights: &[f64],
    criterion: &Criterion<'_>,
    params: TreeParams,
    rng: &mut R,
) -> DecisionTree {
    let x = presorted.x;
    let n_features = presorted.orders.len();
    let m = weights.iter().filter(|&&w| w > 0.0).count();
    if n_features == 0 || m == 0 {
        // Zero features: the only possible tree is a root leaf.
        let rows: Vec<u32> = (0..x.len() as u32).filter(|&i| weights[i as usize] > 0.0).collect();
        return DecisionTree {
            nodes: vec![leaf_node(criterion, weights, &rows)],
            max_depth: params.max_depth,
            n_features,
        };
    }
    let mut idx = Vec::with_capacity(n_features * m);
    let mut val = Vec::with_capacity(n_features * m);
    for (order, values) in presorted.orders.iter().zip(&presorted.values) {
        if m == x.len() {
            idx.extend_from_slice(order);
            val.extend_from_slice(values);
            continue;
        }
        for (&r, &v) in order.iter().zip(values) {
            if weights[r as usize] > 0.0 {
                idx.push(r);
                val.push(v);
            }
        }
    }
    let gh = match criterion {
        Criterion::Newton { g, h, .. } => g.iter().zip(*h).map(|(&g, &h)| [g, h]).collect(),
        Criterion::Gini { .. } => Vec::new(),
    };
    let mut b = Builder {
        idx,
        val,
        m,
        scratch_idx: vec![0; m],
        scratch_val: vec![0.0; m],
        weights,
        criterion,
        params,
        n_features,
        nodes: Vec::new(),
        goes_left: vec![false; x.len()],
        node_sums: (0.0, 0.0),
        gh,
        rng,
    };
    b.build(0, m, 0);
    DecisionTree {
        nodes: b.nodes,
        max_depth: params.max_depth,
        n_features,
    }
}

/// Weighted-Gini CART classification tree.
pub fn fit_tree<R: Rng>(data: &Dataset, params: &TreeParams, rng: &mut R) -> Result<DecisionTree, LearnError> {
    let presorted = Presorted::new(data.x());
    let criterion = Criterion::Gini {
        y: data.y(),
        n_classes: data.n_classes(),
    };
    Ok(grow(&presorted, data.weights(), &criterion, *params, rng))
}

/// Newton regression tree on per-row gradients and Hessians.
pub fn fit_newton_tree<R: Rng>(
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    params: &TreeParams,
    lambda: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<DecisionTree, LearnError> {
    if x.is_empty() {
        return Err(LearnError::Empty);
    }
    if g.len() != x.len() || h.len() != x.len() {
        return Err(LearnError::LengthMismatch);
    }
    let presorted = Presorted::new(x);
    let ones = vec![1.0; x.len()];
    let criterion = Criterion::Newton { g, h, lambda, gamma };
    Ok(grow(&presorted, &ones, &criterion, *params, rng))
}
