//! Random forests over CART trees.
//!
//! Tree `t` draws its bootstrap sample and all split decisions from stream
//! `(seed, t)`, so the ensemble is bit-identical no matter how many workers
//! train it. Probabilities are vote fractions, exact multiples of
//! `1 / tree_count`.

use ndarray::Array2;
use rayon::prelude::*;

use super::tree::{grow_tree, DecisionTree, TreeParams};
use super::{ForestParams, SplitFeatures};
use crate::rng::stream_rng;

#[derive(Debug, Clone)]
pub(crate) struct ForestModel {
    trees: Vec<DecisionTree>,
    class_count: usize,
}

pub(crate) fn train(
    x: &Array2<f32>,
    labels: &[u32],
    class_count: usize,
    params: &ForestParams,
    seed: u64,
) -> ForestModel {
    let n = x.nrows();
    let dim = x.ncols();
    let feature_subset = match params.split_features {
        SplitFeatures::Sqrt => ((dim as f64).sqrt().floor() as usize).max(1),
        SplitFeatures::All => dim,
        SplitFeatures::Count(c) => c.min(dim),
    };
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        feature_subset,
        class_count,
    };
    let trees: Vec<DecisionTree> = (0..params.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let rows: Vec<u32> = if params.bootstrap {
                (0..n)
                    .map(|_| rand::Rng::gen_range(&mut rng, 0..n) as u32)
                    .collect()
            } else {
                (0..n as u32).collect()
            };
            grow_tree(x, labels, rows, &tree_params, &mut rng)
        })
        .collect();
    ForestModel { trees, class_count }
}

impl ForestModel {
    /// Vote-fraction probabilities, one row per input row.
    pub(crate) fn predict(&self, x: &Array2<f32>) -> Array2<f32> {
        let n = x.nrows();
        let k = self.class_count;
        let tree_count = self.trees.len() as f32;
        let rows: Vec<Vec<f32>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let row = row.as_slice().expect("rows are contiguous");
                let mut votes = vec![0u32; k];
                for tree in &self.trees {
                    votes[tree.predict_row(row) as usize] += 1;
                }
                votes.into_iter().map(|v| v as f32 / tree_count).collect()
            })
            .collect();
        let mut out = Array2::zeros((n, k));
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn tree_count(&self) -> usize {
        self.trees.len()
    }
}
