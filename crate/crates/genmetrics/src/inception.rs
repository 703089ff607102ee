//! Inception-style score over class posteriors.
//!
//! Given row-stochastic class probabilities `p(y|x)` for a set of samples,
//! the score of one split is `exp( mean_x KL(p(y|x) || q) )` where `q` is the
//! split's own marginal class distribution. Confident predictions (low
//! conditional entropy) and even class usage (high marginal entropy) both
//! push the score up; its range is [1, class_count].
//!
//! The reported value is the mean over `split_count` splits with its
//! population standard deviation. Rows are shuffled once by the protocol
//! seed; splits are contiguous blocks of the shuffled order.

use rayon::prelude::*;

use crate::classifier::ProbabilityMatrix;
use crate::error::{Error, Result};
use crate::rng::{shuffled_indices, stream_rng};

/// Floor applied to marginal entries inside the KL term, so empty classes do
/// not produce infinities.
pub const MARGINAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitProtocol {
    pub split_count: usize,
    pub split_size: usize,
    pub seed: u64,
}

impl Default for SplitProtocol {
    fn default() -> Self {
        SplitProtocol {
            split_count: 10,
            split_size: 5000,
            seed: 0,
        }
    }
}

/// Row-wise stable softmax from raw logits.
pub fn softmax_logits(logits: &ndarray::Array2<f32>) -> Result<ProbabilityMatrix> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput {
            operation: "softmax_logits",
        });
    }
    let mut out = ndarray::Array2::<f32>::zeros(logits.dim());
    for (i, row) in logits.rows().into_iter().enumerate() {
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
        let exps: Vec<f64> = row.iter().map(|&v| (v as f64 - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (j, e) in exps.into_iter().enumerate() {
            out[[i, j]] = (e / sum) as f32;
        }
    }
    ProbabilityMatrix::new(out)
}

/// Mean class distribution over the given rows, accumulated in f64 in row
/// order.
pub fn marginal_distribution(probs: &ProbabilityMatrix, rows: &[usize]) -> Vec<f64> {
    let k = probs.class_count();
    let mut marginal = vec![0f64; k];
    for &r in rows {
        for (j, &p) in probs.row(r).iter().enumerate() {
            marginal[j] += p as f64;
        }
    }
    let n = rows.len() as f64;
    for m in &mut marginal {
        *m /= n;
    }
    marginal
}

fn split_score(probs: &ProbabilityMatrix, rows: &[usize]) -> f64 {
    let marginal = marginal_distribution(probs, rows);
    let log_marginal: Vec<f64> = marginal.iter().map(|&q| q.max(MARGINAL_FLOOR).ln()).collect();
    let mut kl_sum = 0f64;
    for &r in rows {
        let mut kl = 0f64;
        for (j, &p) in probs.row(r).iter().enumerate() {
            let p = p as f64;
            if p > 0.0 {
                kl += p * (p.ln() - log_marginal[j]);
            }
        }
        kl_sum += kl;
    }
    (kl_sum / rows.len() as f64).exp()
}

/// Assigns rows to splits. With enough rows, split `s` is the `s`-th
/// contiguous `split_size` block of the shuffled order and the tail is
/// unused; otherwise all rows are divided into `split_count` near-equal
/// contiguous parts.
fn assign_splits(n: usize, protocol: &SplitProtocol) -> Result<Vec<Vec<usize>>> {
    if protocol.split_count == 0 || n < protocol.split_count {
        return Err(Error::EmptySplit {
            rows: n,
            split_count: protocol.split_count,
        });
    }
    let order = shuffled_indices(n, &mut stream_rng(protocol.seed, 0));
    let count = protocol.split_count;
    let mut splits = Vec::with_capacity(count);
    if protocol.split_size >= 1 && n >= count * protocol.split_size {
        for s in 0..count {
            splits.push(order[s * protocol.split_size..(s + 1) * protocol.split_size].to_vec());
        }
    } else {
        let base = n / count;
        let remainder = n % count;
        let mut start = 0usize;
        for s in 0..count {
            let len = base + usize::from(s < remainder);
            splits.push(order[start..start + len].to_vec());
            start += len;
        }
    }
    Ok(splits)
}

/// Returns `(mean, population std)` of the per-split scores.
pub fn inception_score(probs: &ProbabilityMatrix, protocol: &SplitProtocol) -> Result<(f64, f64)> {
    if probs.class_count() < 2 {
        return Err(Error::TooFewClasses {
            operation: "inception_score",
            class_count: probs.class_count(),
        });
    }
    let splits = assign_splits(probs.len(), protocol)?;
    // Splits may be scored concurrently; mean and std accumulate in fixed
    // split order from the ordered collect.
    let scores: Vec<f64> = splits
        .par_iter()
        .map(|rows| split_score(probs, rows))
        .collect();
    let count = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / count;
    let variance = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / count;
    Ok((mean, variance.sqrt()))
}
