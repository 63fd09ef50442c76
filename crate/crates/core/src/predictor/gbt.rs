//! Gradient-boosted regression trees with squared loss.
//!
//! Each round fits a depth-limited tree to the current residuals using
//! exact greedy variance-reduction splits. Thresholds are midpoints between
//! consecutive distinct feature values; ties go to the lowest feature index
//! and then the lowest threshold.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Row fraction drawn (without replacement) per tree; 1.0 uses all rows.
    pub subsample: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_leaf: 3,
            subsample: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be >= 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config(format!("subsample must lie in (0, 1], got {}", self.subsample)));
        }
        Ok(())
    }
}

/// Flat tree node. Internal nodes carry a split, leaves a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Node<T: Scalar> {
    pub feature_index: Option<usize>,
    pub threshold: Option<T>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub leaf_value: Option<T>,
}

impl<T: Scalar> Node<T> {
    fn leaf(value: T) -> Self {
        Self {
            feature_index: None,
            threshold: None,
            left: None,
            right: None,
            leaf_value: Some(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<T: Scalar> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    /// Leaf value reached by `x`; the root is node 0. Values `<= threshold` go left.
    pub fn predict(&self, x: &[T]) -> T {
        let mut idx = 0;
        loop {
            let node = &self.nodes[idx];
            match (node.feature_index, node.threshold, node.left, node.right) {
                (Some(f), Some(t), Some(l), Some(r)) => {
                    idx = if x[f] <= t { l } else { r };
                }
                _ => return node.leaf_value.unwrap_or_else(T::zero),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T: Scalar>(t: &Tree<T>, i: usize) -> usize {
            match (t.nodes[i].left, t.nodes[i].right) {
                (Some(l), Some(r)) => 1 + walk(t, l).max(walk(t, r)),
                _ => 0,
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GbtModel<T: Scalar> {
    pub base_score: T,
    pub trees: Vec<Tree<T>>,
    pub params: GbtParams,
    pub seed: u64,
    pub n_features: usize,
    /// SHA-256 over the training features and targets.
    pub fingerprint: String,
    pub version: u64,
}

impl<T: Scalar> GbtModel<T> {
    /// `base_score + Σ η·leaf`, accumulated tree by tree.
    pub fn predict(&self, x: &[T]) -> T {
        let eta = T::lit(self.params.learning_rate);
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + eta * t.predict(x))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })
    }
}

pub fn predict<T: Scalar>(model: &GbtModel<T>, features: &[T]) -> T {
    model.predict(features)
}

pub fn fingerprint<T: Scalar>(features: &[Vec<T>], targets: &[T]) -> String {
    let mut h = Sha256::new();
    for row in features {
        for v in row {
            h.update(v.to_f64().unwrap_or(f64::NAN).to_le_bytes());
        }
    }
    for v in targets {
        h.update(v.to_f64().unwrap_or(f64::NAN).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn fit_gbt<T: Scalar>(features: &[Vec<T>], targets: &[T], params: &GbtParams, seed: u64) -> Result<GbtModel<T>> {
    params.validate()?;
    let n = features.len();
    if n < 2 {
        return Err(Error::Fit(format!("boosting needs at least 2 rows, got {n}")));
    }
    if targets.len() != n {
        return Err(Error::Fit(format!("{n} feature rows but {} targets", targets.len())));
    }
    let width = features[0].len();
    if width == 0 || features.iter().any(|r| r.len() != width) {
        return Err(Error::Fit("ragged or empty feature rows".into()));
    }
    if features.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite training input".into()));
    }

    let base_score = targets.iter().fold(T::zero(), |a, v| a + *v) / T::from_count(n);
    let eta = T::lit(params.learning_rate);
    let mut prediction = vec![base_score; n];
    let mut residual = vec![T::zero(); n];

    // Column-major copy and row order per feature, sorted once.
    let columns: Vec<Vec<T>> = (0..width).map(|f| features.iter().map(|r| r[f]).collect()).collect();
    let presorted: Vec<Vec<usize>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| total_cmp(&col[a], &col[b]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut goes_left = vec![false; n];
    let mut scratch = Vec::with_capacity(n);
    for _ in 0..params.n_trees {
        for i in 0..n {
            residual[i] = targets[i] - prediction[i];
        }
        let mut member = vec![take == n; n];
        if take < n {
            for i in sample(&mut rng, n, take) {
                member[i] = true;
            }
        }
        let mut rows: Vec<Vec<usize>> = presorted
            .iter()
            .map(|order| order.iter().copied().filter(|&i| member[i]).collect())
            .collect();
        let len = rows[0].len();
        let mut builder = TreeBuilder {
            columns: &columns,
            residual: &residual,
            params,
            nodes: Vec::new(),
            goes_left: &mut goes_left,
            scratch: &mut scratch,
        };
        builder.grow(&mut rows, 0, len, 0);
        let tree = Tree { nodes: builder.nodes };
        for i in 0..n {
            prediction[i] = prediction[i] + eta * tree.predict(&features[i]);
        }
        trees.push(tree);
    }

    Ok(GbtModel {
        base_score,
        trees,
        params: *params,
        seed,
        n_features: width,
        fingerprint: fingerprint(features, targets),
        version: 0,
    })
}

/// Sum of squared residuals of a model on its training data.
pub fn training_loss<T: Scalar>(model: &GbtModel<T>, features: &[Vec<T>], targets: &[T]) -> T {
    features.iter().zip(targets).fold(T::zero(), |acc, (x, y)| {
        let r = *y - model.predict(x);
        acc + r * r
    })
}

struct TreeBuilder<'a, T: Scalar> {
    columns: &'a [Vec<T>],
    residual: &'a [T],
    params: &'a GbtParams,
    nodes: Vec<Node<T>>,
    goes_left: &'a mut Vec<bool>,
    scratch: &'a mut Vec<usize>,
}

struct Split<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

impl<T: Scalar> TreeBuilder<'_, T> {
    /// `rows[f][lo..hi]` holds this node's row indices sorted by feature `f`.
    fn grow(&mut self, rows: &mut [Vec<usize>], lo: usize, hi: usize, depth: usize) -> usize {
        let members = &rows[0][lo..hi];
        let count = T::from_count(members.len());
        let sum = members.iter().fold(T::zero(), |a, &i| a + self.residual[i]);
        let id = self.nodes.len();
        self.nodes.push(Node::leaf(sum / count));

        if depth >= self.params.max_depth || members.len() < 2 * self.params.min_samples_leaf {
            return id;
        }
        let Some(split) = self.best_split(rows, lo, hi, sum) else {
            return id;
        };

        let column = &self.columns[split.feature];
        for &i in &rows[0][lo..hi] {
            self.goes_left[i] = column[i] <= split.threshold;
        }
        // Stable partition of every feature's segment keeps each side sorted.
        let mut mid = lo;
        for order in rows.iter_mut() {
            self.scratch.clear();
            let mut w = lo;
            for k in lo..hi {
                let i = order[k];
                if self.goes_left[i] {
                    order[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            order[w..hi].copy_from_slice(self.scratch);
            mid = w;
        }
        let left = self.grow(rows, lo, mid, depth + 1);
        let right = self.grow(rows, mid, hi, depth + 1);
        self.nodes[id] = Node {
            feature_index: Some(split.feature),
            threshold: Some(split.threshold),
            left: Some(left),
            right: Some(right),
            leaf_value: None,
        };
        id
    }

    fn best_split(&self, rows: &[Vec<usize>], lo: usize, hi: usize, sum: T) -> Option<Split<T>> {
        let n = hi - lo;
        let min_leaf = self.params.min_samples_leaf;
        let total = T::from_count(n);
        let parent = sum * sum / total;
        let node_ss = rows[0][lo..hi]
            .iter()
            .fold(T::zero(), |a, &i| a + self.residual[i] * self.residual[i]);
        let min_gain = T::epsilon() * node_ss;

        let mut best: Option<Split<T>> = None;
        for (f, order) in rows.iter().enumerate() {
            let order = &order[lo..hi];
            let column = &self.columns[f];
            let mut left_sum = T::zero();
            for k in 1..n {
                left_sum = left_sum + self.residual[order[k - 1]];
                if k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let a = column[order[k - 1]];
                let b = column[order[k]];
                if !(a < b) {
                    continue;
                }
                let right_sum = sum - left_sum;
                let (nl, nr) = (T::from_count(k), T::from_count(n - k));
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
                if gain > min_gain && best.as_ref().map_or(true, |b| gain > b.gain) {
                    let mut threshold = (a + b) * T::half();
                    if !(threshold < b) {
                        threshold = a;
                    }
                    best = Some(Split { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}
