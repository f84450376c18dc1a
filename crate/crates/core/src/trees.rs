//! Random trees and bagged random forests.
//!
//! At every node a random tree considers only `K` attributes picked by the
//! entropy source; the best information-gain threshold among them becomes the
//! split. Trees are grown without pruning or depth limit. A forest bags `T`
//! such trees, all driven by one source in a fixed order: for each tree the
//! bootstrap sample is drawn first, then split choices depth-first, left
//! before right.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::Dataset;
use crate::entropy::{EntropyError, EntropySource};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("row has {got} features, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("model text: {0}")]
    Parse(String),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub type Result<T> = std::result::Result<T, TreeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KAttributes {
    /// `⌊log₂ v⌋ + 1`
    Auto,
    Fixed(usize),
}

impl KAttributes {
    pub fn resolve(self, n_features: usize) -> Result<usize> {
        match self {
            KAttributes::Auto => Ok(n_features.max(1).ilog2() as usize + 1),
            KAttributes::Fixed(k) if k >= 1 && k <= n_features => Ok(k),
            KAttributes::Fixed(k) => {
                Err(TreeError::InvalidConfig(format!("k_attributes = {k} with {n_features} features")))
            }
        }
    }
}

impl FromStr for KAttributes {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KAttributes::Auto);
        }
        s.parse::<usize>().map(KAttributes::Fixed).map_err(|_| TreeError::InvalidConfig(format!("k_attributes `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub k_attributes: KAttributes,
    /// `None` means unlimited.
    pub max_depth: Option<usize>,
    /// Variance-based stopping, disabled at negative infinity. Never
    /// serialized since JSON has no infinities.
    #[serde(skip, default = "disabled_min_variance")]
    pub min_variance: f64,
    /// Forests draw a bootstrap bag per tree; turning this off trains every
    /// tree on the full set.
    pub bootstrap: bool,
}

fn disabled_min_variance() -> f64 {
    f64::NEG_INFINITY
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { k_attributes: KAttributes::Auto, max_depth: None, min_variance: f64::NEG_INFINITY, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf { class_counts: Vec<usize> },
    Internal { attribute: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Index of the largest count, lowest index on ties.
pub fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier {
    fn n_features(&self) -> usize;
    fn predict(&self, row: &[f64]) -> Result<usize>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomTree {
    pub root: TreeNode,
    pub n_features: usize,
    pub n_classes: usize,
}

impl Classifier for RandomTree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, row: &[f64]) -> Result<usize> {
        if row.len() != self.n_features {
            return Err(TreeError::WidthMismatch { expected: self.n_features, got: row.len() });
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class_counts } => return Ok(argmax_lowest(class_counts)),
                TreeNode::Internal { attribute, threshold, left, right } => {
                    node = if row[*attribute] <= *threshold { left } else { right };
                }
            }
        }
    }
}

impl RandomTree {
    /// Line format, preorder ids:
    /// `node <id> leaf <counts…>` / `node <id> split <attr> <threshold> <left> <right>`.
    pub fn to_text(&self) -> String {
        let mut out = format!("tree features={} classes={}\n", self.n_features, self.n_classes);
        let mut next_id = 0;
        write_node(&self.root, &mut next_id, &mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| TreeError::Parse("empty model".into()))?;
        let (n_features, n_classes) = parse_tree_header(header)?;
        let body: Vec<&str> = lines.collect();
        let root = parse_nodes(&body)?;
        Ok(Self { root, n_features, n_classes })
    }
}

fn write_node(node: &TreeNode, next_id: &mut usize, out: &mut String) -> usize {
    let id = *next_id;
    *next_id += 1;
    match node {
        TreeNode::Leaf { class_counts } => {
            let counts: Vec<String> = class_counts.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "node {id} leaf {}", counts.join(" "));
        }
        TreeNode::Internal { attribute, threshold, left, right } => {
            let left_id = id + 1;
            let right_id = left_id + left.node_count();
            let _ = writeln!(out, "node {id} split {attribute} {threshold:?} {left_id} {right_id}");
            write_node(left, next_id, out);
            write_node(right, next_id, out);
        }
    }
    id
}

fn parse_tree_header(line: &str) -> Result<(usize, usize)> {
    let mut features = None;
    let mut classes = None;
    let mut parts = line.split_whitespace();
    if parts.next() != Some("tree") {
        return Err(TreeError::Parse(format!("expected tree header, got `{line}`")));
    }
    for part in parts {
        match part.split_once('=') {
            Some(("features", v)) => features = v.parse().ok(),
            Some(("classes", v)) => classes = v.parse().ok(),
            _ => {}
        }
    }
    match (features, classes) {
        (Some(f), Some(c)) => Ok((f, c)),
        _ => Err(TreeError::Parse(format!("bad tree header `{line}`"))),
    }
}

enum RawNode {
    Leaf(Vec<usize>),
    Split(usize, f64, usize, usize),
}

fn parse_nodes(lines: &[&str]) -> Result<TreeNode> {
    let bad = |l: &str| TreeError::Parse(format!("bad node line `{l}`"));
    let mut raw: Vec<Option<RawNode>> = Vec::new();
    for &line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 || toks[0] != "node" {
            return Err(bad(line));
        }
        let id: usize = toks[1].parse().map_err(|_| bad(line))?;
        let node = match toks[2] {
            "leaf" => RawNode::Leaf(
                toks[3..].iter().map(|t| t.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad(line))?,
            ),
            "split" if toks.len() == 7 => RawNode::Split(
                toks[3].parse().map_err(|_| bad(line))?,
                toks[4].parse().map_err(|_| bad(line))?,
                toks[5].parse().map_err(|_| bad(line))?,
                toks[6].parse().map_err(|_| bad(line))?,
            ),
            _ => return Err(bad(line)),
        };
        if raw.len() <= id {
            raw.resize_with(id + 1, || None);
        }
        raw[id] = Some(node);
    }
    build_node(&raw, 0, 0)
}

fn build_node(raw: &[Option<RawNode>], id: usize, depth: usize) -> Result<TreeNode> {
    if depth > raw.len() {
        return Err(TreeError::Parse("cyclic node references".into()));
    }
    match raw.get(id).and_then(Option::as_ref) {
        Some(RawNode::Leaf(counts)) => Ok(TreeNode::Leaf { class_counts: counts.clone() }),
        Some(&RawNode::Split(attribute, threshold, l, r)) => Ok(TreeNode::Internal {
            attribute,
            threshold,
            left: Box::new(build_node(raw, l, depth + 1)?),
            right: Box::new(build_node(raw, r, depth + 1)?),
        }),
        None => Err(TreeError::Parse(format!("missing node {id}"))),
    }
}

fn class_entropy(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum()
}

/// Size-weighted entropy of the two children of a split.
fn split_entropy(left: &[usize], parent: &[usize], n_left: usize, n: usize) -> f64 {
    let (nl, nr) = (n_left as f64, (n - n_left) as f64);
    let mut h = 0.0;
    for (&l, &p) in left.iter().zip(parent) {
        let r = p - l;
        if l > 0 {
            let q = l as f64 / nl;
            h -= nl * q * q.log2();
        }
        if r > 0 {
            let q = r as f64 / nr;
            h -= nr * q * q.log2();
        }
    }
    h / n as f64
}

/// Gains at or below this are rounding noise, not information.
const MIN_GAIN: f64 = 1e-12;

struct Split {
    attribute: usize,
    threshold: f64,
    gain: f64,
}

/// Grows a tree over "slots", positions in the (possibly repeated) row
/// list. Every node keeps, per attribute, its `(value, slot)` pairs sorted
/// by value; splits partition these lists stably, so the only sort happens
/// once at the root.
struct Grower<'a> {
    data: &'a Dataset,
    rows: &'a [usize],
    k: usize,
    max_depth: Option<usize>,
    entropy: &'a mut EntropySource,
    goes_left: Vec<bool>,
}

impl Grower<'_> {
    fn label(&self, slot: usize) -> usize {
        self.data.label(self.rows[slot])
    }

    fn counts(&self, slots: &[(f64, usize)]) -> Vec<usize> {
        let mut counts = vec![0; self.data.class_count()];
        for &(_, s) in slots {
            counts[self.label(s)] += 1;
        }
        counts
    }

    fn identical_rows(&self, slots: &[(f64, usize)]) -> bool {
        let first = self.data.row(self.rows[slots[0].1]);
        slots[1..].iter().all(|&(_, s)| self.data.row(self.rows[s]) == first)
    }

    /// Best midpoint threshold on one attribute; ties keep the lowest threshold.
    fn best_threshold(
        &self,
        sorted: &[(f64, usize)],
        attribute: usize,
        parent: &[usize],
        parent_h: f64,
    ) -> Option<Split> {
        let n = sorted.len();
        let mut left = vec![0usize; parent.len()];
        let mut best: Option<Split> = None;
        for i in 0..n - 1 {
            left[self.label(sorted[i].1)] += 1;
            let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
            if lo == hi {
                continue;
            }
            let gain = parent_h - split_entropy(&left, parent, i + 1, n);
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Split { attribute, threshold, gain });
            }
        }
        best
    }

    /// `sorted[a]` holds the node's slots ordered by attribute `a`.
    fn grow(&mut self, sorted: Vec<Vec<(f64, usize)>>, depth: usize) -> Result<TreeNode> {
        let slots = &sorted[0];
        let counts = self.counts(slots);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || self.identical_rows(slots) {
            return Ok(TreeNode::Leaf { class_counts: counts });
        }
        let parent_h = class_entropy(&counts, slots.len());
        let v = self.data.n_features();
        let mut remaining: Vec<usize> = (0..v).collect();
        let mut best: Option<Split> = None;
        let mut drawn = 0;
        // Draw K candidates; if none of them gains, keep drawing one attribute
        // at a time until a gaining split appears or every attribute is tried.
        while !remaining.is_empty() {
            let batch = if drawn < self.k { self.k - drawn } else { 1 };
            let mut chosen = Vec::with_capacity(batch);
            for _ in 0..batch.min(remaining.len()) {
                let idx = self.entropy.next_index_mod(remaining.len())?;
                chosen.push(remaining.swap_remove(idx));
            }
            drawn += chosen.len();
            chosen.sort_unstable();
            for attribute in chosen {
                if let Some(split) = self.best_threshold(&sorted[attribute], attribute, &counts, parent_h) {
                    let better = match &best {
                        None => true,
                        Some(b) => split.gain > b.gain || (split.gain == b.gain && split.attribute < b.attribute),
                    };
                    if better {
                        best = Some(split);
                    }
                }
            }
            if best.as_ref().is_some_and(|b| b.gain > MIN_GAIN) {
                break;
            }
        }
        let Some(split) = best.filter(|b| b.gain > MIN_GAIN) else {
            return Ok(TreeNode::Leaf { class_counts: counts });
        };
        for &(value, s) in &sorted[split.attribute] {
            self.goes_left[s] = value <= split.threshold;
        }
        let (left, right): (Vec<_>, Vec<_>) =
            sorted.into_iter().map(|list| list.into_iter().partition::<Vec<_>, _>(|&(_, s)| self.goes_left[s])).unzip();
        let left = self.grow(left, depth + 1)?;
        let right = self.grow(right, depth + 1)?;
        Ok(TreeNode::Internal {
            attribute: split.attribute,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        })
    }
}

/// Induces a random tree on all rows of `train`.
pub fn train_random_tree(train: &Dataset, config: &TreeConfig, entropy: &mut EntropySource) -> Result<RandomTree> {
    let rows: Vec<usize> = (0..train.n_rows()).collect();
    train_random_tree_on(train, &rows, config, entropy)
}

/// Induces a random tree on the given (possibly repeated) rows of `data`.
pub fn train_random_tree_on(
    data: &Dataset,
    rows: &[usize],
    config: &TreeConfig,
    entropy: &mut EntropySource,
) -> Result<RandomTree> {
    if rows.is_empty() {
        return Err(TreeError::EmptyDataset);
    }
    let k = config.k_attributes.resolve(data.n_features())?;
    let sorted = (0..data.n_features())
        .map(|a| {
            let mut pairs: Vec<(f64, usize)> = rows.iter().enumerate().map(|(s, &r)| (data.value(r, a), s)).collect();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            pairs
        })
        .collect();
    let mut grower = Grower { data, rows, k, max_depth: config.max_depth, entropy, goes_left: vec![false; rows.len()] };
    let root = grower.grow(sorted, 0)?;
    Ok(RandomTree { root, n_features: data.n_features(), n_classes: data.class_count() })
}

pub fn predict_tree(tree: &RandomTree, row: &[f64]) -> Result<usize> {
    tree.predict(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<RandomTree>,
    pub config: TreeConfig,
}

impl ForestModel {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn votes(&self, row: &[f64]) -> Result<Vec<usize>> {
        let mut votes = vec![0; self.trees[0].n_classes];
        for tree in &self.trees {
            votes[tree.predict(row)?] += 1;
        }
        Ok(votes)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("forest trees={}\n", self.trees.len());
        for tree in &self.trees {
            out.push_str(&tree.to_text());
        }
        out
    }

    pub fn from_text(text: &str, config: TreeConfig) -> Result<Self> {
        let mut chunks: Vec<String> = Vec::new();
        for line in text.lines() {
            if line.starts_with("forest") || line.trim().is_empty() {
                continue;
            }
            if line.starts_with("tree") {
                chunks.push(String::new());
            }
            let current = chunks.last_mut().ok_or_else(|| TreeError::Parse("node before tree header".into()))?;
            current.push_str(line);
            current.push('\n');
        }
        let trees = chunks.iter().map(|c| RandomTree::from_text(c)).collect::<Result<Vec<_>>>()?;
        if trees.is_empty() {
            return Err(TreeError::Parse("forest without trees".into()));
        }
        Ok(Self { trees, config })
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.trees[0].n_features
    }

    /// Majority vote, ties to the lowest class index.
    fn predict(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax_lowest(&self.votes(row)?))
    }
}

/// Bootstrap bag of `n` row indices, each `next_uint(32) mod n`.
pub fn bootstrap_indices(n: usize, entropy: &mut EntropySource) -> Result<Vec<usize>> {
    (0..n).map(|_| entropy.next_index_mod(n).map_err(TreeError::from)).collect()
}

pub fn train_forest(
    train: &Dataset,
    tree_count: usize,
    config: &TreeConfig,
    entropy: &mut EntropySource,
) -> Result<ForestModel> {
    if tree_count == 0 {
        return Err(TreeError::InvalidConfig("forest needs at least one tree".into()));
    }
    let n = train.n_rows();
    if n == 0 {
        return Err(TreeError::EmptyDataset);
    }
    let all: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        let tree = if config.bootstrap {
            let bag = bootstrap_indices(n, entropy)?;
            train_random_tree_on(train, &bag, config, entropy)?
        } else {
            train_random_tree_on(train, &all, config, entropy)?
        };
        trees.push(tree);
    }
    Ok(ForestModel { trees, config: *config })
}

/// Fraction of rows whose prediction matches the label.
pub fn evaluate<M: Classifier + ?Sized>(model: &M, test: &Dataset) -> Result<f64> {
    if test.n_rows() == 0 {
        return Err(TreeError::EmptyDataset);
    }
    let mut correct = 0usize;
    for (row, label) in test.rows() {
        if model.predict(row)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.n_rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synth_blobs;
    use crate::entropy::{BitRecord, EntropyKind};

    fn one_feature(xs: &[f64], labels: &[usize]) -> Dataset {
        Dataset::new(xs.to_vec(), 1, labels.to_vec(), 2).unwrap()
    }

    fn leaf(counts: &[usize]) -> TreeNode {
        TreeNode::Leaf { class_counts: counts.to_vec() }
    }

    #[test]
    fn k_auto_resolution() {
        assert_eq!(KAttributes::Auto.resolve(1).unwrap(), 1);
        assert_eq!(KAttributes::Auto.resolve(10).unwrap(), 4);
        assert_eq!(KAttributes::Auto.resolve(784).unwrap(), 10);
        assert!(KAttributes::Fixed(0).resolve(3).is_err());
        assert!(KAttributes::Fixed(4).resolve(3).is_err());
    }

    #[test]
    fn separable_single_split() {
        let ds = one_feature(&[0.1, 0.2, 0.3, 0.7, 0.8, 0.9], &[0, 0, 0, 1, 1, 1]);
        let cfg = TreeConfig { k_attributes: KAttributes::Fixed(1), ..Default::default() };
        let tree = train_random_tree(&ds, &cfg, &mut EntropySource::pseudo(1)).unwrap();
        match &tree.root {
            TreeNode::Internal { attribute, threshold, left, right } => {
                assert_eq!(*attribute, 0);
                assert!((threshold - 0.5).abs() < 1e-12);
                assert_eq!(**left, leaf(&[3, 0]));
                assert_eq!(**right, leaf(&[0, 3]));
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(evaluate(&tree, &ds).unwrap(), 1.0);
    }

    #[test]
    fn identical_rows_give_majority_leaf() {
        let ds = one_feature(&[1.0; 4], &[0, 0, 0, 1]);
        let tree = train_random_tree(&ds, &TreeConfig::default(), &mut EntropySource::pseudo(1)).unwrap();
        assert_eq!(tree.root, leaf(&[3, 1]));
        assert_eq!(tree.predict(&[1.0]).unwrap(), 0);
    }

    #[test]
    fn replay_streams_give_identical_trees() {
        let ds = synth_blobs(3, 30, 6, 0.9, &mut EntropySource::pseudo(4)).unwrap();
        let record = EntropySource::quantum_sim(12).record_bits(200_000).unwrap();
        let cfg = TreeConfig::default();
        let rt =
            train_random_tree(&ds, &cfg, &mut EntropySource::replay_labeled(&record, EntropyKind::Pseudo)).unwrap();
        let qrt =
            train_random_tree(&ds, &cfg, &mut EntropySource::replay_labeled(&record, EntropyKind::QuantumSim)).unwrap();
        assert_eq!(rt.to_text(), qrt.to_text());
    }

    #[test]
    fn tie_break_and_simple_prediction() {
        let tree = RandomTree { root: leaf(&[5, 5]), n_features: 1, n_classes: 2 };
        assert_eq!(tree.predict(&[0.0]).unwrap(), 0);
        let tree = RandomTree {
            root: TreeNode::Internal {
                attribute: 0,
                threshold: 0.5,
                left: Box::new(leaf(&[0, 4])),
                right: Box::new(leaf(&[4, 0])),
            },
            n_features: 1,
            n_classes: 2,
        };
        assert_eq!(predict_tree(&tree, &[0.3]).unwrap(), 1);
        assert_eq!(predict_tree(&tree, &[0.5]).unwrap(), 1);
        assert_eq!(predict_tree(&tree, &[0.6]).unwrap(), 0);
        assert!(matches!(tree.predict(&[0.1, 0.2]), Err(TreeError::WidthMismatch { expected: 1, got: 2 })));
    }

    #[test]
    fn blobs_tree_reaches_full_train_accuracy() {
        let ds = synth_blobs(3, 40, 5, 0.1, &mut EntropySource::pseudo(2)).unwrap();
        let tree = train_random_tree(&ds, &TreeConfig::default(), &mut EntropySource::quantum_sim(2)).unwrap();
        assert_eq!(evaluate(&tree, &ds).unwrap(), 1.0);
    }

    #[test]
    fn text_round_trip() {
        let ds = synth_blobs(3, 25, 4, 1.2, &mut EntropySource::pseudo(3)).unwrap();
        let tree = train_random_tree(&ds, &TreeConfig::default(), &mut EntropySource::pseudo(3)).unwrap();
        let text = tree.to_text();
        assert!(text.lines().nth(1).unwrap().starts_with("node 0 "));
        let back = RandomTree::from_text(&text).unwrap();
        assert_eq!(back, tree);
        assert!(RandomTree::from_text("tree features=1 classes=2\nnode 0 split 0 0.5 1 2\n").is_err());
    }

    #[test]
    fn forest_without_bootstrap_matches_tree() {
        let ds = synth_blobs(3, 20, 4, 1.0, &mut EntropySource::pseudo(5)).unwrap();
        let cfg = TreeConfig { bootstrap: false, ..Default::default() };
        let forest = train_forest(&ds, 1, &cfg, &mut EntropySource::pseudo(6)).unwrap();
        let tree = train_random_tree(&ds, &cfg, &mut EntropySource::pseudo(6)).unwrap();
        for (row, _) in ds.rows() {
            assert_eq!(forest.predict(row).unwrap(), tree.predict(row).unwrap());
        }
    }

    #[test]
    fn identical_trees_vote_unanimously() {
        let ds = synth_blobs(3, 20, 4, 1.5, &mut EntropySource::pseudo(7)).unwrap();
        let tree = train_random_tree(&ds, &TreeConfig::default(), &mut EntropySource::pseudo(8)).unwrap();
        let forest = ForestModel { trees: vec![tree.clone(); 3], config: TreeConfig::default() };
        for (row, _) in ds.rows() {
            assert_eq!(forest.predict(row).unwrap(), tree.predict(row).unwrap());
        }
        let back = ForestModel::from_text(&forest.to_text(), TreeConfig::default()).unwrap();
        assert_eq!(back, forest);
    }

    #[test]
    fn bootstrap_unique_fraction() {
        let idx = bootstrap_indices(1000, &mut EntropySource::pseudo(9)).unwrap();
        assert_eq!(idx.len(), 1000);
        let mut seen = vec![false; 1000];
        for i in idx {
            seen[i] = true;
        }
        let unique = seen.iter().filter(|&&s| s).count() as f64 / 1000.0;
        let expected = 1.0 - (-1.0f64).exp();
        assert!((unique - expected).abs() <= 0.03, "{unique}");
    }

    #[test]
    fn evaluate_constant_predictor() {
        let ds = one_feature(&[0.0, 1.0, 2.0, 3.0], &[0, 1, 0, 1]);
        let tree = RandomTree { root: leaf(&[1, 0]), n_features: 1, n_classes: 2 };
        assert_eq!(evaluate(&tree, &ds).unwrap(), 0.5);
    }

    #[test]
    fn empty_inputs_error() {
        let ds = one_feature(&[0.0, 1.0], &[0, 1]);
        assert!(matches!(
            train_random_tree_on(&ds, &[], &TreeConfig::default(), &mut EntropySource::pseudo(1)),
            Err(TreeError::EmptyDataset)
        ));
        let short = BitRecord::new(vec![1, 0], EntropyKind::Pseudo, 0);
        let ds = one_feature(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]);
        assert!(matches!(
            train_random_tree(&ds, &TreeConfig::default(), &mut EntropySource::replay(&short)),
            Err(TreeError::Entropy(EntropyError::ReplayExhausted { .. }))
        ));
    }
}
