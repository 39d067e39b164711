//! Phase two: gradient-boosted regression trees for classification.
//!
//! Binary problems use a single logistic tree per round; three or more
//! classes use softmax with one tree per class per round. Trees are grown
//! level by level with exact greedy split search over every midpoint between
//! consecutive distinct feature values, scoring a split by the second-order
//! gain
//!
//! ```text
//! gain = 1/2 * (G_L^2 / (H_L + lambda) + G_R^2 / (H_R + lambda) - G^2 / (H + lambda))
//! ```
//!
//! and setting leaf values to `-learning_rate * G / (H + lambda)`. A node
//! splits whenever some candidate has non-negative gain, so symmetric
//! problems such as XOR can still open at the root. A candidate replaces the current best only when it wins by more than
//! [`GAIN_TOLERANCE`] (relative), so near-ties go to the lowest feature index
//! and then the lowest threshold. A sample goes left iff `x[feature] <= threshold`.
//!
//! If a round's Newton step would raise the training log-loss, its leaf values
//! are halved until it does not, which keeps the staged training loss
//! monotone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative margin by which a split gain must beat the incumbent.
pub const GAIN_TOLERANCE: f64 = 1e-12;
const MAX_HALVINGS: usize = 60;
const PROB_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    /// Unused by the deterministic exact learner; kept so run configs carry
    /// one seed per stage.
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Whether `gain` should replace `best` under the tie-breaking rule.
pub fn beats(gain: f64, best: f64) -> bool {
    gain > best + GAIN_TOLERANCE * best.abs().max(1.0)
}

/// Second-order split gain.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let term = |g: f64, h: f64| if h + lambda > 0.0 { g * g / (h + lambda) } else { 0.0 };
    0.5 * (term(gl, hl) + term(gr, hr) - term(gl + gr, hl + hr))
}

/// Threshold between two consecutive distinct sorted values; always `>= lo`
/// and `< hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Node 0 is the root.
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// `(feature, threshold)` of the root, if it splits.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Logistic,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    objective: Objective,
    n_classes: usize,
    n_features: usize,
    /// One entry for logistic (log-odds of class 1), else per-class log-prior.
    base_scores: Vec<f64>,
    /// Per round: one tree (logistic) or one per class (softmax).
    rounds: Vec<Vec<RegressionTree>>,
}

impl GbdtModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn base_scores(&self) -> &[f64] {
        &self.base_scores
    }

    pub fn rounds(&self) -> &[Vec<RegressionTree>] {
        &self.rounds
    }

    pub fn n_trees(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Shape(format!(
                "feature vector of length {} for a model trained on {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Raw scores after the first `n_rounds` rounds.
    fn raw_scores(&self, x: &[f64], n_rounds: usize) -> Vec<f64> {
        let mut s = self.base_scores.clone();
        for round in &self.rounds[..n_rounds] {
            for (k, tree) in round.iter().enumerate() {
                s[k] += tree.predict(x);
            }
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn probabilities(objective: Objective, scores: &[f64]) -> Vec<f64> {
    match objective {
        Objective::Logistic => {
            let p = sigmoid(scores[0]);
            vec![1.0 - p, p]
        }
        Objective::Softmax => {
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / z).collect()
        }
    }
}

fn sample_loss(objective: Objective, scores: &[f64], label: usize) -> f64 {
    match objective {
        Objective::Logistic => softplus(scores[0]) - label as f64 * scores[0],
        Objective::Softmax => {
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            lse - scores[label]
        }
    }
}

fn mean_loss(objective: Objective, scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, &y)| sample_loss(objective, s, y))
        .sum();
    total / labels.len() as f64
}

fn check_features(features: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = features.first() else {
        return Err(Error::Input("no training samples".into()));
    };
    let dim = first.len();
    if let Some((i, bad)) = features.iter().enumerate().find(|(_, f)| f.len() != dim) {
        return Err(Error::Shape(format!(
            "sample {i} has {} features, expected {dim}",
            bad.len()
        )));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite feature value".into()));
    }
    Ok(dim)
}

/// Column-major copy of the features plus each column's sample order.
struct Columns {
    values: Vec<Vec<f64>>,
    order: Vec<Vec<usize>>,
}

impl Columns {
    fn new(features: &[Vec<f64>], dim: usize) -> Self {
        let values: Vec<Vec<f64>> = (0..dim)
            .map(|f| features.iter().map(|x| x[f]).collect())
            .collect();
        let order = values
            .iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..col.len()).collect();
                idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
                idx
            })
            .collect();
        Columns { values, order }
    }
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Copy, Default)]
struct Running {
    g: f64,
    h: f64,
    n: usize,
    last: Option<f64>,
}

fn grow_tree(cols: &Columns, grad: &[f64], hess: &[f64], config: &GbdtConfig) -> RegressionTree {
    let n = grad.len();
    let leaf = |g: f64, h: f64| {
        let denom = h + config.lambda;
        if denom > 0.0 {
            -config.learning_rate * g / denom
        } else {
            0.0
        }
    };
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // Open node per sample (index into `nodes`), None once in a finished leaf.
    let mut node_of: Vec<Option<usize>> = vec![Some(0); n];
    let mut frontier = vec![0usize];

    for depth in 0..=config.max_depth {
        if frontier.is_empty() {
            break;
        }
        let max_id = *frontier.iter().max().unwrap();
        let mut slot = vec![usize::MAX; max_id + 1];
        for (s, &id) in frontier.iter().enumerate() {
            slot[id] = s;
        }
        let mut totals = vec![(0.0f64, 0.0f64, 0usize); frontier.len()];
        for i in 0..n {
            if let Some(id) = node_of[i] {
                let t = &mut totals[slot[id]];
                t.0 += grad[i];
                t.1 += hess[i];
                t.2 += 1;
            }
        }

        let mut best: Vec<Option<Best>> = vec![None; frontier.len()];
        if depth < config.max_depth {
            for (f, order) in cols.order.iter().enumerate() {
                let col = &cols.values[f];
                let mut run = vec![Running::default(); frontier.len()];
                for &i in order {
                    let Some(id) = node_of[i] else { continue };
                    let s = slot[id];
                    let v = col[i];
                    let r = &mut run[s];
                    if let Some(last) = r.last {
                        if v > last {
                            let (gt, ht, nt) = totals[s];
                            let nl = r.n;
                            if nl >= config.min_samples_leaf && nt - nl >= config.min_samples_leaf {
                                let gain = split_gain(r.g, r.h, gt - r.g, ht - r.h, config.lambda);
                                let accept = match best[s] {
                                    Some(b) => beats(gain, b.gain),
                                    None => gain >= -GAIN_TOLERANCE,
                                };
                                if accept {
                                    best[s] = Some(Best {
                                        gain,
                                        feature: f,
                                        threshold: midpoint(last, v),
                                    });
                                }
                            }
                        }
                    }
                    r.g += grad[i];
                    r.h += hess[i];
                    r.n += 1;
                    r.last = Some(v);
                }
            }
        }

        let mut next = Vec::new();
        let mut children = vec![None; frontier.len()];
        for (s, &id) in frontier.iter().enumerate() {
            match best[s] {
                Some(b) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[id] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left,
                        right: left + 1,
                    };
                    children[s] = Some((b.feature, b.threshold, left));
                    next.push(left);
                    next.push(left + 1);
                }
                None => {
                    let (g, h, _) = totals[s];
                    nodes[id] = Node::Leaf { value: leaf(g, h) };
                }
            }
        }
        for i in 0..n {
            if let Some(id) = node_of[i] {
                node_of[i] = children[slot[id]].map(|(f, thr, left)| {
                    if cols.values[f][i] <= thr {
                        left
                    } else {
                        left + 1
                    }
                });
            }
        }
        frontier = next;
    }
    RegressionTree { nodes }
}

/// Fits a model, taking the class count from the largest label.
pub fn fit_gbdt(features: &[Vec<f64>], labels: &[usize], config: &GbdtConfig) -> Result<GbdtModel> {
    let n_classes = labels.iter().max().map_or(2, |m| (m + 1).max(2));
    fit_gbdt_with_classes(features, labels, n_classes, config)
}

pub fn fit_gbdt_with_classes(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    config: &GbdtConfig,
) -> Result<GbdtModel> {
    config.validate()?;
    let dim = check_features(features)?;
    if labels.len() != features.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} samples",
            labels.len(),
            features.len()
        )));
    }
    if n_classes < 2 {
        return Err(Error::Input("need at least 2 classes".into()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::Input(format!("label {bad} outside {n_classes} classes")));
    }
    let n = labels.len();
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y] += 1;
    }
    let prior = |c: usize| (counts[c] as f64 / n as f64).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let (objective, base_scores) = if n_classes == 2 {
        let p = prior(1);
        (Objective::Logistic, vec![(p / (1.0 - p)).ln()])
    } else {
        (Objective::Softmax, (0..n_classes).map(|c| prior(c).ln()).collect())
    };
    let n_outputs = base_scores.len();

    let cols = Columns::new(features, dim);
    let mut scores: Vec<Vec<f64>> = vec![base_scores.clone(); n];
    let mut loss = mean_loss(objective, &scores, labels);
    let mut rounds = Vec::with_capacity(config.n_rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..config.n_rounds {
        let probs: Vec<Vec<f64>> = scores.iter().map(|s| probabilities(objective, s)).collect();
        let mut trees = Vec::with_capacity(n_outputs);
        for k in 0..n_outputs {
            let class = if objective == Objective::Logistic { 1 } else { k };
            for i in 0..n {
                let p = probs[i][class];
                let y = (labels[i] == class) as usize as f64;
                grad[i] = p - y;
                hess[i] = p * (1.0 - p);
            }
            trees.push(grow_tree(&cols, &grad, &hess, config));
        }

        let outputs: Vec<Vec<f64>> = (0..n)
            .map(|i| trees.iter().map(|t| t.predict(&features[i])).collect())
            .collect();
        let mut factor = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<Vec<f64>> = scores
                .iter()
                .zip(&outputs)
                .map(|(s, o)| s.iter().zip(o).map(|(a, b)| a + factor * b).collect())
                .collect();
            let new_loss = mean_loss(objective, &candidate, labels);
            if new_loss <= loss {
                accepted = Some((candidate, new_loss));
                break;
            }
            factor *= 0.5;
        }
        match accepted {
            Some((candidate, new_loss)) => {
                if factor != 1.0 {
                    for t in &mut trees {
                        t.scale_leaves(factor);
                    }
                }
                scores = candidate;
                loss = new_loss;
            }
            None => {
                for t in &mut trees {
                    t.scale_leaves(0.0);
                }
            }
        }
        rounds.push(trees);
    }

    Ok(GbdtModel {
        objective,
        n_classes,
        n_features: dim,
        base_scores,
        rounds,
    })
}

/// Class probabilities for one feature vector.
pub fn predict_gbdt(model: &GbdtModel, x: &[f64]) -> Result<Vec<f64>> {
    model.check_dim(x)?;
    Ok(probabilities(model.objective, &model.raw_scores(x, model.rounds.len())))
}

/// Most probable class (lowest index on ties).
pub fn predict_class(model: &GbdtModel, x: &[f64]) -> Result<usize> {
    let p = predict_gbdt(model, x)?;
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Mean training log-loss after 0, 1, ..., n_rounds rounds.
pub fn staged_training_loss(
    model: &GbdtModel,
    features: &[Vec<f64>],
    labels: &[usize],
) -> Result<Vec<f64>> {
    if features.len() != labels.len() {
        return Err(Error::Shape("features and labels differ in length".into()));
    }
    for x in features {
        model.check_dim(x)?;
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= model.n_classes) {
        return Err(Error::Input(format!("label {bad} outside {} classes", model.n_classes)));
    }
    let mut scores: Vec<Vec<f64>> = vec![model.base_scores.clone(); features.len()];
    let mut out = vec![mean_loss(model.objective, &scores, labels)];
    for round in &model.rounds {
        for (s, x) in scores.iter_mut().zip(features) {
            for (k, tree) in round.iter().enumerate() {
                s[k] += tree.predict(x);
            }
        }
        out.push(mean_loss(model.objective, &scores, labels));
    }
    Ok(out)
}
