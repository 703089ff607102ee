//! Labeled sample sets and the operations that slice and combine them.
//!
//! A [`LabeledSampleSet`] pairs a data tensor of shape `(n, ...)` with `n`
//! integer labels, a class count, and a role tag that records which side of
//! an evaluation the samples came from. Everything downstream (classifier
//! training, accuracy protocols, corruption passes) consumes this type.

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::rng::{sample_without_replacement, stream_rng};
use crate::tensor::{Dtype, Tensor};

/// Provenance of a sample set within an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Real samples used to fit models (S_t).
    Train,
    /// Model outputs under evaluation (S_g).
    Generated,
    /// Held-out real samples used for accuracy measurement (S_v).
    Validation,
    /// Samples with no assigned side.
    Unlabeled,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Generated => "generated",
            Role::Validation => "validation",
            Role::Unlabeled => "unlabeled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledSampleSet {
    data: Tensor,
    labels: Vec<i64>,
    role: Role,
    class_count: usize,
}

impl LabeledSampleSet {
    /// Validates shapes and label range. `data` must be uint8 or float32 with
    /// shape `(n, d1[, d2[, d3]])`; every label must lie in `[0, class_count)`.
    pub fn new(data: Tensor, labels: Vec<i64>, role: Role, class_count: usize) -> Result<Self> {
        if data.dtype() == Dtype::I64 {
            return Err(Error::BadSampleDtype {
                dtype: data.dtype().name(),
            });
        }
        let shape = data.shape();
        if shape.len() < 2 || shape.len() > 4 {
            return Err(Error::BadSampleShape {
                shape: shape.to_vec(),
            });
        }
        let n = shape[0];
        if labels.len() != n {
            return Err(Error::LabelCountMismatch {
                labels: labels.len(),
                samples: n,
            });
        }
        if class_count == 0 {
            return Err(Error::BadMixtureSpec {
                reason: "class_count must be at least 1".into(),
            });
        }
        for (row, &label) in labels.iter().enumerate() {
            if label < 0 || label >= class_count as i64 {
                return Err(Error::LabelOutOfRange {
                    label,
                    row,
                    class_count,
                });
            }
        }
        Ok(Self {
            data,
            labels,
            role,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Shape of one sample, i.e. the trailing dims of the data tensor.
    pub fn sample_shape(&self) -> &[usize] {
        &self.data.shape()[1..]
    }

    /// Flattened feature dimensionality of one sample.
    pub fn feature_dim(&self) -> usize {
        self.sample_shape().iter().product()
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// Number of samples per class, indexed by class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.class_count];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }

    /// The canonical flat feature matrix: one row per sample, uint8 data
    /// scaled by 1/255 so both dtypes land in a comparable range.
    pub fn features_f32(&self) -> Array2<f32> {
        let n = self.len();
        let d = self.feature_dim();
        let mut out = Vec::with_capacity(n * d);
        match &self.data {
            Tensor::F32(a) => out.extend(a.iter().copied()),
            Tensor::U8(a) => out.extend(a.iter().map(|&v| v as f32 / 255.0)),
            Tensor::I64(_) => unreachable!("rejected at construction"),
        }
        Array2::from_shape_vec((n, d), out).expect("length checked")
    }

    /// Gathers the given rows into a new set, preserving order and allowing
    /// repeats. Role and class count carry over.
    pub fn take(&self, indices: &[usize]) -> Self {
        let data = self.data.gather_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self {
            data,
            labels,
            role: self.role,
            class_count: self.class_count,
        }
    }

    /// Row indices of each class, ascending, indexed by class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l as usize].push(i);
        }
        by_class
    }
}

/// Draws `per_class_count` samples from every class without replacement.
///
/// Class `k` is permuted by stream `(seed, k)`; the output keeps samples in
/// draw order within each class and concatenates classes in ascending order.
/// Errors name the first class that cannot supply enough samples.
pub fn stratified_subsample(
    set: &LabeledSampleSet,
    per_class_count: usize,
    seed: u64,
) -> Result<LabeledSampleSet> {
    let by_class = set.class_indices();
    let mut picked = Vec::with_capacity(per_class_count * set.class_count());
    for (class, rows) in by_class.iter().enumerate() {
        if rows.len() < per_class_count {
            return Err(Error::InsufficientClassSamples {
                class,
                available: rows.len(),
                requested: per_class_count,
            });
        }
        let mut rng = stream_rng(seed, class as u64);
        let order = sample_without_replacement(rows.len(), per_class_count, &mut rng);
        picked.extend(order.into_iter().map(|i| rows[i]));
    }
    Ok(set.take(&picked))
}

/// Concatenates two sets that agree on dtype, sample shape, and class count.
/// The result is tagged [`Role::Train`], the role under which merged sets are
/// consumed.
pub fn merge_sets(a: &LabeledSampleSet, b: &LabeledSampleSet) -> Result<LabeledSampleSet> {
    if a.data.dtype() != b.data.dtype() {
        return Err(Error::MergeMismatch {
            reason: format!(
                "dtype {} vs {}",
                a.data.dtype().name(),
                b.data.dtype().name()
            ),
        });
    }
    if a.sample_shape() != b.sample_shape() {
        return Err(Error::MergeMismatch {
            reason: format!(
                "sample shape {:?} vs {:?}",
                a.sample_shape(),
                b.sample_shape()
            ),
        });
    }
    if a.class_count != b.class_count {
        return Err(Error::MergeMismatch {
            reason: format!("class count {} vs {}", a.class_count, b.class_count),
        });
    }
    let data = match (&a.data, &b.data) {
        (Tensor::F32(x), Tensor::F32(y)) => Tensor::F32(
            ndarray::concatenate(Axis(0), &[x.view(), y.view()]).expect("shapes checked"),
        ),
        (Tensor::U8(x), Tensor::U8(y)) => Tensor::U8(
            ndarray::concatenate(Axis(0), &[x.view(), y.view()]).expect("shapes checked"),
        ),
        _ => unreachable!("dtype equality checked"),
    };
    let mut labels = a.labels.clone();
    labels.extend_from_slice(&b.labels);
    LabeledSampleSet::new(data, labels, Role::Train, a.class_count)
}
