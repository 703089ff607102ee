//! Desk-scale classifiers used as evaluation probes.
//!
//! Three kinds share one interface: a CART random forest, a linear softmax,
//! and a small ReLU MLP, all trained from flat feature vectors. Every kind is
//! a pure function of `(training set, spec)`: the spec's seed drives all
//! randomness through counter-derived streams, so retraining with the same
//! inputs reproduces the same model bit for bit regardless of worker count.

mod forest;
mod sgd;
mod tree;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::dataset::LabeledSampleSet;
use crate::error::{Error, Result};

/// How many candidate features a forest split examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitFeatures {
    /// floor(sqrt(feature_dim)), at least 1. The forest default.
    Sqrt,
    /// Every feature; turns bagging into plain tree averaging.
    All,
    /// A fixed count, clamped to the feature dimension.
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestParams {
    pub tree_count: usize,
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub split_features: SplitFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            tree_count: 100,
            max_depth: None,
            split_features: SplitFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdParams {
    pub learning_rate: f64,
    pub momentum: f64,
    pub iterations: usize,
    pub batch_size: usize,
}

impl Default for SgdParams {
    fn default() -> Self {
        SgdParams {
            learning_rate: 0.1,
            momentum: 0.9,
            iterations: 2000,
            batch_size: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// One or two hidden layer widths.
    pub hidden: Vec<usize>,
    pub sgd: SgdParams,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![64],
            sgd: SgdParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierKind {
    RandomForest(ForestParams),
    LinearSoftmax(SgdParams),
    Mlp(MlpParams),
}

impl ClassifierKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::RandomForest(_) => "random_forest",
            ClassifierKind::LinearSoftmax(_) => "linear_softmax",
            ClassifierKind::Mlp(_) => "mlp",
        }
    }
}

/// Full recipe for a trainable classifier. Equal specs plus equal training
/// sets yield bit-identical models.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn random_forest(seed: u64) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::RandomForest(ForestParams::default()),
            seed,
        }
    }

    pub fn linear_softmax(seed: u64) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::LinearSoftmax(SgdParams::default()),
            seed,
        }
    }

    pub fn mlp(seed: u64) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Mlp(MlpParams::default()),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(Error::BadClassifierSpec { field, reason });
        match &self.kind {
            ClassifierKind::RandomForest(p) => {
                if p.tree_count == 0 {
                    return bad("tree_count", "must be at least 1".into());
                }
                if let SplitFeatures::Count(0) = p.split_features {
                    return bad("split_features", "count must be at least 1".into());
                }
            }
            ClassifierKind::LinearSoftmax(p) => validate_sgd(p)?,
            ClassifierKind::Mlp(p) => {
                if p.hidden.is_empty() || p.hidden.len() > 2 {
                    return bad("hidden", format!("expected 1 or 2 layers, got {}", p.hidden.len()));
                }
                if p.hidden.iter().any(|&h| h == 0) {
                    return bad("hidden", "layer widths must be at least 1".into());
                }
                validate_sgd(&p.sgd)?;
            }
        }
        Ok(())
    }

    /// Stable `key=value` block: kind first, remaining keys alphabetical.
    pub fn to_kv_block(&self) -> String {
        let mut lines = vec![format!("kind={}", self.kind.name())];
        match &self.kind {
            ClassifierKind::RandomForest(p) => {
                lines.push(format!("bootstrap={}", p.bootstrap));
                lines.push(format!(
                    "max_depth={}",
                    p.max_depth.map_or("none".to_string(), |d| d.to_string())
                ));
                lines.push(format!("seed={}", self.seed));
                let sf = match p.split_features {
                    SplitFeatures::Sqrt => "sqrt".to_string(),
                    SplitFeatures::All => "all".to_string(),
                    SplitFeatures::Count(c) => c.to_string(),
                };
                lines.push(format!("split_features={sf}"));
                lines.push(format!("tree_count={}", p.tree_count));
            }
            ClassifierKind::LinearSoftmax(p) => {
                push_sgd_lines(&mut lines, p, None, self.seed);
            }
            ClassifierKind::Mlp(p) => {
                push_sgd_lines(&mut lines, &p.sgd, Some(&p.hidden), self.seed);
            }
        }
        lines.join("\n")
    }

    /// Parses [`to_kv_block`] output. Missing keys take defaults; unknown
    /// keys and malformed values are errors.
    pub fn from_kv_block(block: &str) -> Result<Self> {
        let bad = |field: &'static str, reason: String| Error::BadClassifierSpec { field, reason };
        let mut map = std::collections::BTreeMap::new();
        let mut kind: Option<String> = None;
        for line in block.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad("spec", format!("line without '=': {line:?}")))?;
            if k == "kind" {
                kind = Some(v.to_string());
            } else {
                map.insert(k.to_string(), v.to_string());
            }
        }
        let kind = kind.ok_or_else(|| bad("kind", "missing".into()))?;

        let parse_u64 = |map: &std::collections::BTreeMap<String, String>, key: &'static str, default: u64| -> Result<u64> {
            map.get(key)
                .map_or(Ok(default), |v| v.parse().map_err(|_| bad(key, format!("not an integer: {v:?}"))))
        };
        let parse_usize = |map: &std::collections::BTreeMap<String, String>, key: &'static str, default: usize| -> Result<usize> {
            map.get(key)
                .map_or(Ok(default), |v| v.parse().map_err(|_| bad(key, format!("not an integer: {v:?}"))))
        };
        let parse_f64 = |map: &std::collections::BTreeMap<String, String>, key: &'static str, default: f64| -> Result<f64> {
            map.get(key)
                .map_or(Ok(default), |v| v.parse().map_err(|_| bad(key, format!("not a number: {v:?}"))))
        };

        let seed = parse_u64(&map, "seed", 0)?;
        let sgd_from = |map: &std::collections::BTreeMap<String, String>| -> Result<SgdParams> {
            Ok(SgdParams {
                learning_rate: parse_f64(map, "learning_rate", 0.1)?,
                momentum: parse_f64(map, "momentum", 0.9)?,
                iterations: parse_usize(map, "iterations", 2000)?,
                batch_size: parse_usize(map, "batch_size", 128)?,
            })
        };

        let (known_keys, kind): (&[&str], ClassifierKind) = match kind.as_str() {
            "random_forest" => {
                let max_depth = match map.get("max_depth").map(String::as_str) {
                    None | Some("none") => None,
                    Some(v) => Some(
                        v.parse()
                            .map_err(|_| bad("max_depth", format!("not an integer or 'none': {v:?}")))?,
                    ),
                };
                let split_features = match map.get("split_features").map(String::as_str) {
                    None | Some("sqrt") => SplitFeatures::Sqrt,
                    Some("all") => SplitFeatures::All,
                    Some(v) => SplitFeatures::Count(
                        v.parse()
                            .map_err(|_| bad("split_features", format!("not sqrt/all/<count>: {v:?}")))?,
                    ),
                };
                let bootstrap = match map.get("bootstrap").map(String::as_str) {
                    None | Some("true") => true,
                    Some("false") => false,
                    Some(v) => return Err(bad("bootstrap", format!("not a bool: {v:?}"))),
                };
                (
                    &["bootstrap", "max_depth", "seed", "split_features", "tree_count"],
                    ClassifierKind::RandomForest(ForestParams {
                        tree_count: parse_usize(&map, "tree_count", 100)?,
                        max_depth,
                        split_features,
                        bootstrap,
                    }),
                )
            }
            "linear_softmax" => (
                &["batch_size", "iterations", "learning_rate", "momentum", "seed"],
                ClassifierKind::LinearSoftmax(sgd_from(&map)?),
            ),
            "mlp" => {
                let hidden = match map.get("hidden") {
                    None => vec![64],
                    Some(v) => v
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("hidden", format!("not a comma list of widths: {v:?}")))?,
                };
                (
                    &["batch_size", "hidden", "iterations", "learning_rate", "momentum", "seed"],
                    ClassifierKind::Mlp(MlpParams {
                        hidden,
                        sgd: sgd_from(&map)?,
                    }),
                )
            }
            other => return Err(bad("kind", format!("unknown kind {other:?}"))),
        };
        if let Some(unknown) = map.keys().find(|k| !known_keys.contains(&k.as_str())) {
            return Err(bad("spec", format!("unknown key {unknown:?}")));
        }
        let spec = ClassifierSpec { kind, seed };
        spec.validate()?;
        Ok(spec)
    }
}

fn validate_sgd(p: &SgdParams) -> Result<()> {
    let bad = |field: &'static str, reason: String| Err(Error::BadClassifierSpec { field, reason });
    if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
        return bad("learning_rate", format!("must be positive and finite, got {}", p.learning_rate));
    }
    if !(0.0..1.0).contains(&p.momentum) {
        return bad("momentum", format!("must be in [0, 1), got {}", p.momentum));
    }
    if p.batch_size == 0 {
        return bad("batch_size", "must be at least 1".into());
    }
    Ok(())
}

fn push_sgd_lines(lines: &mut Vec<String>, p: &SgdParams, hidden: Option<&[usize]>, seed: u64) {
    lines.push(format!("batch_size={}", p.batch_size));
    if let Some(hidden) = hidden {
        let joined: Vec<String> = hidden.iter().map(|h| h.to_string()).collect();
        lines.push(format!("hidden={}", joined.join(",")));
    }
    lines.push(format!("iterations={}", p.iterations));
    lines.push(format!("learning_rate={}", p.learning_rate));
    lines.push(format!("momentum={}", p.momentum));
    lines.push(format!("seed={seed}"));
}

/// Row-stochastic class probabilities: nonnegative, finite entries with each
/// row summing to 1 within 1e-5.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    probs: Array2<f32>,
}

pub const ROW_SUM_TOLERANCE: f64 = 1e-5;

impl ProbabilityMatrix {
    pub fn new(probs: Array2<f32>) -> Result<Self> {
        for (i, row) in probs.rows().into_iter().enumerate() {
            let mut sum = 0f64;
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::BadProbabilityEntry {
                        row: i,
                        col: j,
                        value: p,
                    });
                }
                sum += p as f64;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NotRowStochastic {
                    row: i,
                    sum,
                    tolerance: ROW_SUM_TOLERANCE,
                });
            }
        }
        Ok(ProbabilityMatrix { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_count(&self) -> usize {
        self.probs.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f32> {
        self.probs.row(i)
    }

    pub fn as_array(&self) -> &Array2<f32> {
        &self.probs
    }
}

/// Fraction of rows whose true label ranks within the top `k` scores. Ties
/// rank the lower class index first, so a tied label only counts as correct
/// if enough tied competitors have higher indices.
pub fn top_k_accuracy(probs: &ProbabilityMatrix, labels: &[i64], k: usize) -> Result<f64> {
    if k == 0 || k > probs.class_count() {
        return Err(Error::TopKOutOfRange {
            k,
            class_count: probs.class_count(),
        });
    }
    if labels.len() != probs.len() {
        return Err(Error::LabelCountMismatch {
            labels: labels.len(),
            samples: probs.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::EmptyInput {
            operation: "top_k_accuracy",
        });
    }
    let class_count = probs.class_count();
    let mut correct = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        if label < 0 || label >= class_count as i64 {
            return Err(Error::LabelOutOfRange {
                label,
                row: i,
                class_count,
            });
        }
        let row = probs.row(i);
        let target = row[label as usize];
        let mut rank = 0usize;
        for (c, &p) in row.iter().enumerate() {
            if p > target || (p == target && (c as i64) < label) {
                rank += 1;
            }
        }
        if rank < k {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Indices of the `m` nearest corpus rows (squared Euclidean) per query row,
/// nearest first, distance ties resolved toward the lower corpus index.
pub fn nearest_neighbors(
    queries: &Array2<f32>,
    corpus: &Array2<f32>,
    m: usize,
) -> Result<Vec<Vec<usize>>> {
    if queries.ncols() != corpus.ncols() {
        return Err(Error::DimensionMismatch {
            left: queries.ncols(),
            right: corpus.ncols(),
        });
    }
    if m == 0 || m > corpus.nrows() {
        return Err(Error::NeighborCountOutOfRange {
            m,
            corpus: corpus.nrows(),
        });
    }
    let result: Vec<Vec<usize>> = (0..queries.nrows())
        .into_par_iter()
        .map(|qi| {
            let q = queries.row(qi);
            let mut dists: Vec<(f64, usize)> = corpus
                .rows()
                .into_iter()
                .enumerate()
                .map(|(ci, c)| {
                    let mut d = 0f64;
                    for (a, b) in q.iter().zip(c.iter()) {
                        let diff = (*a - *b) as f64;
                        d += diff * diff;
                    }
                    (d, ci)
                })
                .collect();
            dists.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dists.into_iter().take(m).map(|(_, ci)| ci).collect()
        })
        .collect();
    Ok(result)
}

#[derive(Debug, Clone)]
enum Model {
    Forest(forest::ForestModel),
    Sgd(sgd::MlpModel),
}

/// A fitted classifier plus the spec that produced it and any warnings raised
/// during training.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    spec: ClassifierSpec,
    model: Model,
    feature_dim: usize,
    class_count: usize,
    warnings: Vec<String>,
}

impl TrainedClassifier {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Non-fatal conditions observed while training, e.g. classes with no
    /// samples.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn predict_probabilities(&self, set: &LabeledSampleSet) -> Result<ProbabilityMatrix> {
        self.predict_features(&set.features_f32())
    }

    /// Predicts from an already-flattened feature matrix.
    pub fn predict_features(&self, features: &Array2<f32>) -> Result<ProbabilityMatrix> {
        if features.ncols() != self.feature_dim {
            return Err(Error::FeatureDimMismatch {
                expected: self.feature_dim,
                got: features.ncols(),
            });
        }
        let probs = match &self.model {
            Model::Forest(f) => f.predict(features),
            Model::Sgd(m) => m.predict(features),
        };
        ProbabilityMatrix::new(probs)
    }

    /// Embedding before the output layer: the last hidden activation for the
    /// MLP, the input features for the linear model. Forests have no such
    /// layer and return an error.
    pub fn penultimate_features(&self, set: &LabeledSampleSet) -> Result<Array2<f32>> {
        let features = set.features_f32();
        if features.ncols() != self.feature_dim {
            return Err(Error::FeatureDimMismatch {
                expected: self.feature_dim,
                got: features.ncols(),
            });
        }
        match &self.model {
            Model::Forest(_) => Err(Error::NoPenultimateFeatures),
            Model::Sgd(m) => Ok(m.penultimate(&features)),
        }
    }
}

/// Trains the classifier described by `spec` on `train`.
pub fn train_classifier(train: &LabeledSampleSet, spec: &ClassifierSpec) -> Result<TrainedClassifier> {
    spec.validate()?;
    let n = train.len();
    if n == 0 {
        return Err(Error::EmptyTrainingSet {
            operation: "train_classifier",
        });
    }
    let class_count = train.class_count();
    if n < class_count {
        return Err(Error::TooFewSamples {
            operation: "train_classifier",
            n,
            class_count,
        });
    }
    let features = train.features_f32();
    if features.ncols() == 0 {
        return Err(Error::BadSampleShape {
            shape: train.data().shape().to_vec(),
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput {
            operation: "train_classifier",
        });
    }

    let mut warnings = Vec::new();
    let hist = train.class_histogram();
    let missing: Vec<usize> = hist
        .iter()
        .enumerate()
        .filter_map(|(c, &count)| (count == 0).then_some(c))
        .collect();
    if !missing.is_empty() {
        warnings.push(format!(
            "classes {missing:?} have no training samples; the classifier cannot predict them better than chance"
        ));
    }
    if hist.iter().filter(|&&c| c > 0).count() == 1 {
        warnings.push("training set contains a single class; the classifier is constant".to_string());
    }

    let labels: Vec<u32> = train.labels().iter().map(|&l| l as u32).collect();
    let model = match &spec.kind {
        ClassifierKind::RandomForest(p) => {
            Model::Forest(forest::train(&features, &labels, class_count, p, spec.seed))
        }
        ClassifierKind::LinearSoftmax(p) => Model::Sgd(sgd::train(
            &features, &labels, class_count, &[], p, spec.seed,
        )?),
        ClassifierKind::Mlp(p) => Model::Sgd(sgd::train(
            &features, &labels, class_count, &p.hidden, &p.sgd, spec.seed,
        )?),
    };
    Ok(TrainedClassifier {
        spec: spec.clone(),
        model,
        feature_dim: features.ncols(),
        class_count,
        warnings,
    })
}
