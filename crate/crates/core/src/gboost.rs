//! Multiclass gradient-boosted regression trees (softmax / multinomial
//! deviance), trained on labeled point features.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClassifiedCloud, PointLabel};
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureSchema, FeatureVector, Label};
use crate::pcio::{ColoredPointCloud, LabelDataset};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SPLIT: f64 = 0.8;
const MIN_ROWS_PER_CLASS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmHyperparams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub seed: u64,
}

impl Default for GbmHyperparams {
    fn default() -> Self {
        GbmHyperparams {
            learning_rate: 0.1,
            max_depth: 1,
            n_estimators: 100,
            seed: 0,
        }
    }
}

impl GbmHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Validation(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::Validation("max_depth must be >= 1".into()));
        }
        if self.n_estimators < 1 {
            return Err(Error::Validation("n_estimators must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Regression tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub format_version: u32,
    pub classes: Vec<Label>,
    pub schema: FeatureSchema,
    pub hyperparams: GbmHyperparams,
    pub init_scores: Vec<f64>,
    /// `stages[m][k]` is the tree for class `k` at boosting stage `m`.
    pub stages: Vec<Vec<RegressionTree>>,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    /// Mean multinomial deviance on the training rows: initial, then after each stage.
    pub train_deviance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: GbmModel,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl GbmModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Raw additive scores, one per class.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let lr = self.hyperparams.learning_rate;
        let mut f = self.init_scores.clone();
        for stage in &self.stages {
            for (fk, tree) in f.iter_mut().zip(stage) {
                *fk += lr * tree.predict(x);
            }
        }
        f
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        self.schema.validate()?;
        self.hyperparams.validate()?;
        let k = self.classes.len();
        if k < 2 || self.init_scores.len() != k {
            return Err(Error::Format("model class list inconsistent".into()));
        }
        if self.stages.len() != self.hyperparams.n_estimators || self.stages.iter().any(|s| s.len() != k) {
            return Err(Error::Format("model ensemble size does not match n_estimators".into()));
        }
        let arity = self.schema.arity();
        for tree in self.stages.iter().flatten() {
            let n = tree.nodes.len();
            if n == 0 {
                return Err(Error::Format("empty regression tree".into()));
            }
            for node in &tree.nodes {
                if let TreeNode::Split { feature, left, right, .. } = node {
                    if *feature >= arity || *left >= n || *right >= n {
                        return Err(Error::Format("regression tree node out of range".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: GbmModel = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy)]
struct FlatNode {
    // u32::MAX marks a leaf.
    feature: u32,
    // Split threshold, or the leaf value already scaled by the learning rate.
    value: f64,
    left: u32,
    right: u32,
}

/// Inference form of a [`GbmModel`]: all trees in one contiguous node array.
/// Scores are bit-identical to [`GbmModel::scores`].
#[derive(Debug, Clone)]
pub struct CompiledGbm {
    classes: Vec<Label>,
    arity: usize,
    init_scores: Vec<f64>,
    nodes: Vec<FlatNode>,
    // Root offset of each tree, stage-major.
    roots: Vec<u32>,
}

impl CompiledGbm {
    pub fn new(model: &GbmModel) -> Self {
        let lr = model.hyperparams.learning_rate;
        let mut nodes = Vec::new();
        let mut roots = Vec::new();
        for stage in &model.stages {
            for tree in stage {
                let base = nodes.len() as u32;
                roots.push(base);
                nodes.extend(tree.nodes.iter().map(|n| match n {
                    TreeNode::Leaf { value } => FlatNode {
                        feature: u32::MAX,
                        value: lr * value,
                        left: 0,
                        right: 0,
                    },
                    TreeNode::Split { feature, threshold, left, right } => FlatNode {
                        feature: *feature as u32,
                        value: *threshold,
                        left: base + *left as u32,
                        right: base + *right as u32,
                    },
                }));
            }
        }
        CompiledGbm {
            classes: model.classes.clone(),
            arity: model.schema.arity(),
            init_scores: model.init_scores.clone(),
            nodes,
            roots,
        }
    }

    /// Writes the raw class scores for `x` into `out`.
    pub fn scores_into(&self, x: &[f64], out: &mut [f64]) {
        let k = self.init_scores.len();
        out[..k].copy_from_slice(&self.init_scores);
        for (t, &root) in self.roots.iter().enumerate() {
            let mut i = root as usize;
            loop {
                let n = &self.nodes[i];
                if n.feature == u32::MAX {
                    out[t % k] += n.value;
                    break;
                }
                i = if x[n.feature as usize] <= n.value { n.left } else { n.right } as usize;
            }
        }
    }

    /// Labels for a batch of feature vectors. Trees are applied one at a
    /// time across the whole batch.
    pub fn predict_batch(&self, rows: &[FeatureVector]) -> Result<Vec<Label>> {
        if let Some(bad) = rows.iter().find(|r| r.len() != self.arity) {
            return Err(Error::Arity {
                expected: self.arity,
                got: bad.len(),
            });
        }
        let n = rows.len();
        let k = self.init_scores.len();
        let cols: Vec<Vec<f64>> = (0..self.arity).map(|j| rows.iter().map(|r| r.0[j]).collect()).collect();
        let mut scores: Vec<Vec<f64>> = self.init_scores.iter().map(|&s| vec![s; n]).collect();
        for (t, &root) in self.roots.iter().enumerate() {
            let acc = &mut scores[t % k];
            let r = &self.nodes[root as usize];
            if r.feature == u32::MAX {
                acc.iter_mut().for_each(|s| *s += r.value);
                continue;
            }
            let (l, h) = (&self.nodes[r.left as usize], &self.nodes[r.right as usize]);
            if l.feature == u32::MAX && h.feature == u32::MAX {
                let col = &cols[r.feature as usize];
                let (thr, lv, hv) = (r.value, l.value, h.value);
                for (s, &x) in acc.iter_mut().zip(col) {
                    *s += if x <= thr { lv } else { hv };
                }
                continue;
            }
            for (p, s) in acc.iter_mut().enumerate() {
                let mut i = root as usize;
                loop {
                    let nd = &self.nodes[i];
                    if nd.feature == u32::MAX {
                        *s += nd.value;
                        break;
                    }
                    i = if cols[nd.feature as usize][p] <= nd.value { nd.left } else { nd.right } as usize;
                }
            }
        }
        let mut buf = vec![0.0; k];
        Ok((0..n)
            .map(|p| {
                for (b, col) in buf.iter_mut().zip(&scores) {
                    *b = col[p];
                }
                softmax_in_place(&mut buf);
                self.classes[argmax(&buf)]
            })
            .collect())
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.arity {
            return Err(Error::Arity {
                expected: self.arity,
                got: x.len(),
            });
        }
        let mut buf = [0.0; 8];
        let mut heap;
        let scores: &mut [f64] = if self.classes.len() <= buf.len() {
            &mut buf[..self.classes.len()]
        } else {
            heap = vec![0.0; self.classes.len()];
            &mut heap
        };
        self.scores_into(x, scores);
        softmax_in_place(scores);
        Ok(self.classes[argmax(scores)])
    }
}

/// Label and class probabilities (in `model.classes` order).
pub fn predict(model: &GbmModel, features: &FeatureVector) -> Result<(Label, Vec<f64>)> {
    let arity = model.schema.arity();
    if features.len() != arity {
        return Err(Error::Arity {
            expected: arity,
            got: features.len(),
        });
    }
    let mut p = model.scores(&features.0);
    softmax_in_place(&mut p);
    Ok((model.classes[argmax(&p)], p))
}

// Column-major training matrix.
struct Columns {
    cols: Vec<Vec<f64>>,
}

impl Columns {
    fn row(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.cols.iter().map(|c| c[i]));
    }
}

struct Split {
    feature: usize,
    threshold: f64,
}

fn best_split(sorted: &[Vec<usize>], cols: &Columns, resid: &[f64]) -> Option<Split> {
    let n = sorted[0].len();
    if n < 2 {
        return None;
    }
    let total: f64 = sorted[0].iter().map(|&i| resid[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<(f64, Split)> = None;
    for (f, order) in sorted.iter().enumerate() {
        let col = &cols.cols[f];
        let mut sl = 0.0;
        for pos in 0..n - 1 {
            let i = order[pos];
            sl += resid[i];
            let (v0, v1) = (col[i], col[order[pos + 1]]);
            if v0 >= v1 {
                continue;
            }
            let nl = (pos + 1) as f64;
            let sr = total - sl;
            let gain = sl * sl / nl + sr * sr / (n as f64 - nl) - parent;
            if gain > 0.0 && best.as_ref().is_none_or(|(g, _)| gain > *g) {
                let mid = 0.5 * (v0 + v1);
                let threshold = if mid < v1 { mid } else { v0 };
                best = Some((gain, Split { feature: f, threshold }));
            }
        }
    }
    best.map(|(_, s)| s)
}

fn leaf_value(members: &[usize], resid: &[f64], k: usize) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in members {
        let r = resid[i];
        num += r;
        den += r.abs() * (1.0 - r.abs());
    }
    if den.abs() < 1e-150 {
        0.0
    } else {
        (k as f64 - 1.0) / k as f64 * num / den
    }
}

fn grow(
    nodes: &mut Vec<TreeNode>,
    sorted: Vec<Vec<usize>>,
    cols: &Columns,
    resid: &[f64],
    k: usize,
    depth_left: usize,
    goes_left: &mut [bool],
) -> usize {
    let id = nodes.len();
    nodes.push(TreeNode::Leaf { value: 0.0 });
    let split = if depth_left > 0 { best_split(&sorted, cols, resid) } else { None };
    let Some(split) = split else {
        nodes[id] = TreeNode::Leaf {
            value: leaf_value(&sorted[0], resid, k),
        };
        return id;
    };
    let col = &cols.cols[split.feature];
    for &i in &sorted[0] {
        goes_left[i] = col[i] <= split.threshold;
    }
    let mut left = Vec::with_capacity(sorted.len());
    let mut right = Vec::with_capacity(sorted.len());
    for order in &sorted {
        let (l, r): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| goes_left[i]);
        left.push(l);
        right.push(r);
    }
    drop(sorted);
    let l = grow(nodes, left, cols, resid, k, depth_left - 1, goes_left);
    let r = grow(nodes, right, cols, resid, k, depth_left - 1, goes_left);
    nodes[id] = TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: l,
        right: r,
    };
    id
}

fn fit_tree(presorted: &[Vec<usize>], cols: &Columns, resid: &[f64], k: usize, max_depth: usize) -> RegressionTree {
    let mut nodes = Vec::new();
    let mut goes_left = vec![false; resid.len()];
    grow(&mut nodes, presorted.to_vec(), cols, resid, k, max_depth, &mut goes_left);
    RegressionTree { nodes }
}

fn mean_deviance(scores: &[Vec<f64>], y: &[usize]) -> f64 {
    let mut total = 0.0;
    for (f, &c) in scores.iter().zip(y) {
        let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + f.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        total += lse - f[c];
    }
    total / y.len() as f64
}

/// Deterministic stratified split: per class, a seeded shuffle then the first
/// `round(fraction * n_c)` rows (kept within `[1, n_c - 1]`) go to training.
pub fn stratified_split(y: &[usize], n_classes: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = if fraction >= 1.0 {
            n
        } else {
            ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
        };
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Trains on explicit feature rows.
pub fn train_rows(
    rows: &[FeatureVector],
    labels: &[Label],
    schema: &FeatureSchema,
    hp: &GbmHyperparams,
    split_fraction: f64,
) -> Result<TrainOutcome> {
    hp.validate()?;
    schema.validate()?;
    if !(split_fraction > 0.0 && split_fraction <= 1.0) {
        return Err(Error::Validation(format!("split fraction must be in (0, 1], got {split_fraction}")));
    }
    if rows.len() != labels.len() {
        return Err(Error::Validation("feature and label counts differ".into()));
    }
    let arity = schema.arity();
    if let Some(bad) = rows.iter().find(|r| r.len() != arity) {
        return Err(Error::Arity {
            expected: arity,
            got: bad.len(),
        });
    }
    let mut classes: Vec<Label> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Degenerate(format!(
            "training needs at least 2 classes, found {}",
            classes.len()
        )));
    }
    let k = classes.len();
    let y_all: Vec<usize> = labels.iter().map(|l| classes.binary_search(l).unwrap()).collect();
    for (c, label) in classes.iter().enumerate() {
        let n = y_all.iter().filter(|&&y| y == c).count();
        if n < MIN_ROWS_PER_CLASS {
            return Err(Error::InsufficientData(format!(
                "class {label} has {n} rows, need >= {MIN_ROWS_PER_CLASS}"
            )));
        }
    }
    let (train_idx, test_idx) = stratified_split(&y_all, k, split_fraction, hp.seed);
    let n = train_idx.len();
    let y: Vec<usize> = train_idx.iter().map(|&i| y_all[i]).collect();
    let cols = Columns {
        cols: (0..arity)
            .map(|f| train_idx.iter().map(|&i| rows[i].0[f]).collect())
            .collect(),
    };
    let presorted: Vec<Vec<usize>> = cols
        .cols
        .iter()
        .map(|col| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            order
        })
        .collect();

    let mut counts = vec![0usize; k];
    for &c in &y {
        counts[c] += 1;
    }
    let init_scores: Vec<f64> = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();
    let mut scores: Vec<Vec<f64>> = vec![init_scores.clone(); n];
    let mut deviance = vec![mean_deviance(&scores, &y)];
    let mut stages = Vec::with_capacity(hp.n_estimators);
    let mut probs = vec![0.0; k];
    let mut resid = vec![vec![0.0; n]; k];
    let mut row = Vec::with_capacity(arity);
    for _ in 0..hp.n_estimators {
        for (i, f) in scores.iter().enumerate() {
            probs.copy_from_slice(f);
            softmax_in_place(&mut probs);
            for c in 0..k {
                resid[c][i] = if y[i] == c { 1.0 } else { 0.0 } - probs[c];
            }
        }
        let stage: Vec<RegressionTree> = (0..k)
            .map(|c| fit_tree(&presorted, &cols, &resid[c], k, hp.max_depth))
            .collect();
        for (i, f) in scores.iter_mut().enumerate() {
            cols.row(i, &mut row);
            for (fc, tree) in f.iter_mut().zip(&stage) {
                *fc += hp.learning_rate * tree.predict(&row);
            }
        }
        deviance.push(mean_deviance(&scores, &y));
        stages.push(stage);
    }

    let mut model = GbmModel {
        format_version: MODEL_FORMAT_VERSION,
        classes,
        schema: schema.clone(),
        hyperparams: *hp,
        init_scores,
        stages,
        train_accuracy: 0.0,
        test_accuracy: None,
        train_deviance: deviance,
    };
    let accuracy = |idx: &[usize]| -> f64 {
        let hits = idx
            .iter()
            .filter(|&&i| predict(&model, &rows[i]).map(|(l, _)| l == labels[i]).unwrap_or(false))
            .count();
        hits as f64 / idx.len() as f64
    };
    let train_accuracy = accuracy(&train_idx);
    let test_accuracy = (!test_idx.is_empty()).then(|| accuracy(&test_idx));
    model.train_accuracy = train_accuracy;
    model.test_accuracy = test_accuracy;
    Ok(TrainOutcome {
        model,
        train_accuracy,
        test_accuracy,
    })
}

pub fn train(dataset: &LabelDataset, schema: &FeatureSchema, hp: &GbmHyperparams, split_fraction: f64) -> Result<TrainOutcome> {
    if dataset.rows.is_empty() {
        return Err(Error::EmptyInput("label dataset has no rows".into()));
    }
    let rows: Vec<FeatureVector> = dataset.rows.iter().map(|r| r.features(schema)).collect();
    let labels: Vec<Label> = dataset.rows.iter().map(|r| r.label).collect();
    train_rows(&rows, &labels, schema, hp, split_fraction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub hyperparams: GbmHyperparams,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Row with the highest test accuracy (first on ties).
    pub best: Option<usize>,
}

/// Trains every grid point; failures are recorded and the sweep continues.
/// Returns the report and the best model.
pub fn sweep(
    dataset: &LabelDataset,
    schema: &FeatureSchema,
    grid: &[GbmHyperparams],
    split_fraction: f64,
) -> Result<(SweepReport, Option<GbmModel>)> {
    if grid.is_empty() {
        return Err(Error::Validation("hyperparameter grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, GbmModel)> = None;
    for (i, hp) in grid.iter().enumerate() {
        match train(dataset, schema, hp, split_fraction) {
            Ok(out) => {
                let score = out.test_accuracy.unwrap_or(out.train_accuracy);
                if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
                    best = Some((i, score, out.model));
                }
                rows.push(SweepRow {
                    hyperparams: *hp,
                    train_accuracy: Some(out.train_accuracy),
                    test_accuracy: out.test_accuracy,
                    error: None,
                });
            }
            Err(e) => rows.push(SweepRow {
                hyperparams: *hp,
                train_accuracy: None,
                test_accuracy: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let (best_idx, model) = match best {
        Some((i, _, m)) => (Some(i), Some(m)),
        None => (None, None),
    };
    Ok((SweepReport { rows, best: best_idx }, model))
}

/// One-at-a-time grid around `base`: learning rate 0.1..1, depth 1..5,
/// estimators 100..1000, each varied with the others held at `base`.
pub fn default_grid(base: GbmHyperparams) -> Vec<GbmHyperparams> {
    let mut grid = vec![base];
    let mut push = |hp: GbmHyperparams| {
        if !grid.contains(&hp) {
            grid.push(hp);
        }
    };
    for lr in [0.1, 0.2, 0.4, 0.6, 0.8, 1.0] {
        push(GbmHyperparams { learning_rate: lr, ..base });
    }
    for depth in 1..=5 {
        push(GbmHyperparams { max_depth: depth, ..base });
    }
    for n in [100, 200, 400, 600, 800, 1000] {
        push(GbmHyperparams { n_estimators: n, ..base });
    }
    grid
}

pub fn classify_gbm(cloud: &ColoredPointCloud, model: &GbmModel) -> Result<ClassifiedCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("cannot classify an empty cloud".into()));
    }
    let compiled = CompiledGbm::new(model);
    let features = featurize(cloud, &model.schema)?;
    let labels = compiled
        .predict_batch(&features)?
        .into_iter()
        .map(PointLabel::from)
        .collect();
    Ok(ClassifiedCloud {
        cloud: cloud.clone(),
        labels,
    })
}
