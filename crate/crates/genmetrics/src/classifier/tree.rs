//! CART decision trees with Gini impurity, grown depth-first.
//!
//! Trees are deterministic functions of their input RNG: the feature subset
//! drawn at each node comes from the caller's generator in preorder,
//! left-child-first traversal order, so a tree is reproducible from its seed
//! alone. All tie-breaks are fixed: features are scanned in ascending index
//! order, candidate thresholds in ascending value order, and only a strictly
//! better Gini score replaces the current best.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::rng::sample_without_replacement;

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Leaf {
        class: u32,
    },
    Split {
        feature: u32,
        threshold: f32,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct DecisionTree {
    nodes: Vec<Node>,
}

pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    /// Number of candidate features drawn per split, already resolved.
    pub feature_subset: usize,
    pub class_count: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f32,
    /// sum_L(c^2)/n_L + sum_R(c^2)/n_R; larger is purer.
    score: f64,
}

/// Majority class with ties resolved toward the lower class index.
fn majority_class(counts: &[u64]) -> u32 {
    let mut best = 0usize;
    for (c, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = c;
        }
    }
    best as u32
}

/// Scans one feature for the threshold minimizing weighted Gini impurity.
/// Returns the purity score of the best cut, if any cut exists.
fn scan_feature(
    feature: usize,
    x: &Array2<f32>,
    labels: &[u32],
    rows: &[u32],
    scratch: &mut Vec<(f32, u32)>,
    class_count: usize,
) -> Option<(f32, f64)> {
    scratch.clear();
    scratch.extend(
        rows.iter()
            .map(|&r| (x[[r as usize, feature]], labels[r as usize])),
    );
    scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let total = scratch.len();

    let mut left = vec![0u64; class_count];
    let mut right = vec![0u64; class_count];
    for &(_, l) in scratch.iter() {
        right[l as usize] += 1;
    }
    let mut sum_sq_left = 0f64;
    let mut sum_sq_right: f64 = right.iter().map(|&c| (c * c) as f64).sum();

    let mut best: Option<(f32, f64)> = None;
    for i in 0..total - 1 {
        let (value, label) = scratch[i];
        let c = label as usize;
        sum_sq_left += (2 * left[c] + 1) as f64;
        sum_sq_right -= (2 * right[c] - 1) as f64;
        left[c] += 1;
        right[c] -= 1;

        let next_value = scratch[i + 1].0;
        if value >= next_value {
            continue;
        }
        let n_left = (i + 1) as f64;
        let n_right = (total - i - 1) as f64;
        let score = sum_sq_left / n_left + sum_sq_right / n_right;
        if best.map_or(true, |(_, s)| score > s) {
            // Midpoint threshold; falls back to the left value when the
            // midpoint rounds onto the right value, so the partition
            // `v <= threshold` always matches the counted prefix.
            let mut threshold = 0.5 * value + 0.5 * next_value;
            if !(threshold < next_value) {
                threshold = value;
            }
            if threshold < value {
                threshold = value;
            }
            best = Some((threshold, score));
        }
    }
    best
}

pub(crate) fn grow_tree(
    x: &Array2<f32>,
    labels: &[u32],
    rows: Vec<u32>,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    assert!(!rows.is_empty(), "cannot grow a tree on zero rows");
    let dim = x.ncols();
    let subset = params.feature_subset.clamp(1, dim.max(1));
    let mut nodes: Vec<Node> = vec![Node::Leaf { class: 0 }];
    // LIFO work stack; pushing right before left yields preorder,
    // left-first processing, which pins RNG consumption order.
    let mut stack: Vec<(usize, Vec<u32>, usize)> = vec![(0, rows, 0)];
    let mut scratch: Vec<(f32, u32)> = Vec::new();

    while let Some((node_idx, node_rows, depth)) = stack.pop() {
        let total = node_rows.len();
        let mut counts = vec![0u64; params.class_count];
        for &r in &node_rows {
            counts[labels[r as usize] as usize] += 1;
        }
        let majority = majority_class(&counts);
        let pure = counts[majority as usize] as usize == total;
        let depth_capped = params.max_depth.map_or(false, |d| depth >= d);
        if total < 2 || pure || depth_capped {
            nodes[node_idx] = Node::Leaf { class: majority };
            continue;
        }

        let mut features = sample_without_replacement(dim, subset, rng);
        features.sort_unstable();

        let parent_score: f64 =
            counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / total as f64;
        let mut best: Option<BestSplit> = None;
        for f in features {
            if let Some((threshold, score)) =
                scan_feature(f, x, labels, &node_rows, &mut scratch, params.class_count)
            {
                if best.as_ref().map_or(true, |b| score > b.score) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }

        let Some(split) = best else {
            nodes[node_idx] = Node::Leaf { class: majority };
            continue;
        };
        // Gini gain = (score - parent_score) / total; require a real gain.
        if split.score - parent_score <= 1e-12 * total as f64 {
            nodes[node_idx] = Node::Leaf { class: majority };
            continue;
        }

        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        for &r in &node_rows {
            if x[[r as usize, split.feature]] <= split.threshold {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

        let left_idx = nodes.len();
        nodes.push(Node::Leaf { class: 0 });
        let right_idx = nodes.len();
        nodes.push(Node::Leaf { class: 0 });
        nodes[node_idx] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: left_idx as u32,
            right: right_idx as u32,
        };
        stack.push((right_idx, right_rows, depth + 1));
        stack.push((left_idx, left_rows, depth + 1));
    }

    DecisionTree { nodes }
}

impl DecisionTree {
    pub(crate) fn predict_row(&self, row: &[f32]) -> u32 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use ndarray::array;

    fn full_params(class_count: usize, dim: usize) -> TreeParams {
        TreeParams {
            max_depth: None,
            feature_subset: dim,
            class_count,
        }
    }

    #[test]
    fn separable_data_yields_pure_tree() {
        let x = array![[0.0, 0.0], [0.1, 0.2], [1.0, 1.0], [0.9, 1.1]];
        let labels = vec![0u32, 0, 1, 1];
        let mut rng = stream_rng(0, 0);
        let tree = grow_tree(&x, &labels, vec![0, 1, 2, 3], &full_params(2, 2), &mut rng);
        for (i, row) in x.outer_iter().enumerate() {
            assert_eq!(tree.predict_row(row.as_slice().unwrap()), labels[i]);
        }
    }

    #[test]
    fn max_depth_zero_is_a_majority_stump() {
        let x = array![[0.0], [1.0], [2.0]];
        let labels = vec![1u32, 1, 0];
        let params = TreeParams {
            max_depth: Some(0),
            feature_subset: 1,
            class_count: 2,
        };
        let mut rng = stream_rng(0, 0);
        let tree = grow_tree(&x, &labels, vec![0, 1, 2], &params, &mut rng);
        assert_eq!(tree.depth(), 0);
        assert_eq!(tree.predict_row(&[5.0]), 1);
    }

    #[test]
    fn majority_tie_prefers_lower_class() {
        assert_eq!(majority_class(&[3, 3, 1]), 0);
        assert_eq!(majority_class(&[1, 3, 3]), 1);
    }

    #[test]
    fn constant_features_yield_leaf() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let labels = vec![0u32, 1, 1];
        let mut rng = stream_rng(0, 0);
        let tree = grow_tree(&x, &labels, vec![0, 1, 2], &full_params(2, 2), &mut rng);
        assert_eq!(tree.depth(), 0);
        assert_eq!(tree.predict_row(&[1.0, 1.0]), 1);
    }

    #[test]
    fn growth_is_deterministic_per_seed() {
        let mut rng = stream_rng(5, 1);
        let n = 64;
        let x = Array2::from_shape_fn((n, 6), |(i, j)| {
            ((i * 31 + j * 17) % 97) as f32 / 97.0
        });
        let labels: Vec<u32> = (0..n).map(|i| (i % 3) as u32).collect();
        let rows: Vec<u32> = (0..n as u32).collect();
        let params = TreeParams {
            max_depth: None,
            feature_subset: 2,
            class_count: 3,
        };
        let t1 = grow_tree(&x, &labels, rows.clone(), &params, &mut stream_rng(5, 1));
        let t2 = grow_tree(&x, &labels, rows.clone(), &params, &mut stream_rng(5, 1));
        let t3 = grow_tree(&x, &labels, rows, &params, &mut rng);
        for i in 0..n {
            let row: Vec<f32> = (0..6).map(|j| x[[i, j]]).collect();
            assert_eq!(t1.predict_row(&row), t2.predict_row(&row));
            assert_eq!(t1.predict_row(&row), t3.predict_row(&row));
        }
    }

    #[test]
    fn threshold_partition_matches_counted_prefix() {
        // Adjacent float values where the midpoint rounds exactly onto the
        // right value would desynchronize the partition; the fallback keeps
        // the cut at the left value.
        let a = 1.0f32;
        let b = f32::from_bits(a.to_bits() + 1);
        let x = array![[a], [b]];
        let labels = vec![0u32, 1];
        let mut rng = stream_rng(0, 0);
        let tree = grow_tree(&x, &labels, vec![0, 1], &full_params(2, 1), &mut rng);
        assert_eq!(tree.predict_row(&[a]), 0);
        assert_eq!(tree.predict_row(&[b]), 1);
    }
}
