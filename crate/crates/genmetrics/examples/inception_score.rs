//! Inception-style score over class-posterior matrices.
//!
//! The score is exp(E[KL(p(y|x) || p(y))]): it rewards rows that are
//! individually confident (low conditional entropy) while the marginal over
//! all rows stays spread out (high diversity). This example scores three
//! synthetic posterior matrices that bracket the metric's range.
//!
//! Run with: cargo run --example inception_score

use genmetrics::classifier::ProbabilityMatrix;
use genmetrics::inception::{inception_score, SplitProtocol};
use genmetrics::rng::stream_rng;
use ndarray::Array2;
use rand::Rng;

fn score(name: &str, matrix: Array2<f32>, protocol: &SplitProtocol) {
    let probs = ProbabilityMatrix::new(matrix).expect("rows must be probability vectors");
    let (mean, std) = inception_score(&probs, protocol).expect("scoring failed");
    println!("{name:<30} {mean:7.4} +/- {std:.4}");
}

fn main() {
    let n = 2000;
    let k = 10;
    // Ten splits of 200 rows each; the mean/std are taken across splits.
    let protocol = SplitProtocol {
        split_count: 10,
        split_size: 200,
        seed: 0,
    };
    println!("score over {n} rows, {k} classes, 10 splits of 200\n");

    // Worst case: every row is uniform. Conditional equals marginal, the
    // KL term vanishes, and the score is exactly 1.
    score(
        "uniform rows (floor)",
        Array2::from_elem((n, k), 1.0 / k as f32),
        &protocol,
    );

    // Best case: confident rows, balanced classes. The score approaches the
    // class count.
    let onehot = Array2::from_shape_fn((n, k), |(i, j)| (i % k == j) as u8 as f32);
    score("balanced one-hot rows (ceiling)", onehot, &protocol);

    // A realistic middle ground: peaked-but-soft rows with a mild class
    // imbalance, the shape a decent generator plus classifier produces.
    let mut rng = stream_rng(7, 0);
    let soft = Array2::from_shape_fn((n, k), |(i, j)| {
        let hot = i % k;
        let base = if j == hot { 6.0 } else { rng.gen::<f32>() };
        base
    });
    let mut soft = soft;
    for mut row in soft.rows_mut() {
        let sum: f32 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    score("peaked soft rows", soft, &protocol);

    println!("\nThe score never leaves [1, class_count]; it measures the");
    println!("classifier's view of confidence and class balance, not sample");
    println!("quality against any reference set.");
}
