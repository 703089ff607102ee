//! Softmax classifiers trained by mini-batch SGD with momentum.
//!
//! One model covers both spec'd kinds: zero hidden layers is the linear
//! softmax, one or two ReLU hidden layers is the MLP. Parameters and all
//! arithmetic are f64 so analytic gradients can be checked against central
//! finite differences tightly.
//!
//! Determinism: initialization draws from one derived stream, the epoch `e`
//! shuffle from another keyed by `e`, and batches walk the shuffled order
//! sequentially. The step-decay schedule multiplies the learning rate by 0.1
//! at 50% and again at 75% of the iteration budget.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::SgdParams;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, shuffled_indices, stream_rng};

const INIT_TAG: u64 = 0x696e_6974; // "init"
const SHUFFLE_TAG: u64 = 0x7368_7566; // "shuf"

#[derive(Debug, Clone)]
pub(crate) struct MlpModel {
    /// Layer weights, shape (fan_out, fan_in); last layer maps to classes.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    class_count: usize,
}

struct Gradients {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

impl MlpModel {
    /// Zero hidden layers start at zero (the convex case needs no symmetry
    /// breaking); hidden layers draw Glorot-uniform weights from the init
    /// stream in layer order, row-major. Biases start at zero.
    pub(crate) fn init(input_dim: usize, hidden: &[usize], class_count: usize, seed: u64) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(class_count);
        let mut rng = stream_rng(derive_seed(seed, INIT_TAG), 0);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let w = if hidden.is_empty() {
                Array2::zeros((fan_out, fan_in))
            } else {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-limit..limit))
            };
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        MlpModel {
            weights,
            biases,
            class_count,
        }
    }

    fn layer_count(&self) -> usize {
        self.weights.len()
    }

    /// Activations after every layer: `out[0]` is the input batch, hidden
    /// entries are post-ReLU, the last entry is raw logits.
    fn forward(&self, batch: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layer_count() + 1);
        acts.push(batch.clone());
        for l in 0..self.layer_count() {
            let z = acts[l].dot(&self.weights[l].t()) + &self.biases[l];
            if l + 1 < self.layer_count() {
                acts.push(z.mapv(|v| v.max(0.0)));
            } else {
                acts.push(z);
            }
        }
        acts
    }

    /// Row-wise softmax, shifted by the row max for stability.
    fn softmax(logits: &Array2<f64>) -> Array2<f64> {
        let mut out = logits.clone();
        for mut row in out.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        out
    }

    /// Mean cross-entropy loss and its gradients over one batch.
    fn loss_and_grad(&self, batch: &Array2<f64>, targets: &[u32]) -> (f64, Gradients) {
        let b = batch.nrows() as f64;
        let acts = self.forward(batch);
        let probs = Self::softmax(&acts[self.layer_count()]);

        let mut loss = 0.0;
        let mut delta = probs;
        for (i, &t) in targets.iter().enumerate() {
            let p = delta[[i, t as usize]];
            // max() would swallow a NaN from overflowed logits; divergence
            // must surface as a non-finite loss.
            loss -= if p.is_nan() { f64::NAN } else { p.max(1e-300).ln() };
            delta[[i, t as usize]] -= 1.0;
        }
        loss /= b;
        delta.mapv_inplace(|v| v / b);

        let mut grad_w = vec![Array2::zeros((0, 0)); self.layer_count()];
        let mut grad_b = vec![Array1::zeros(0); self.layer_count()];
        for l in (0..self.layer_count()).rev() {
            grad_w[l] = delta.t().dot(&acts[l]);
            grad_b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut upstream = delta.dot(&self.weights[l]);
                // ReLU gate: gradient passes only where the activation fired.
                upstream.zip_mut_with(&acts[l], |g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = upstream;
            }
        }
        (
            loss,
            Gradients {
                weights: grad_w,
                biases: grad_b,
            },
        )
    }

    #[cfg(test)]
    pub(crate) fn loss_on(&self, batch: &Array2<f64>, targets: &[u32]) -> f64 {
        self.loss_and_grad(batch, targets).0
    }

    pub(crate) fn predict(&self, x: &Array2<f32>) -> Array2<f32> {
        let n = x.nrows();
        let mut out = Array2::zeros((n, self.class_count));
        for (chunk_idx, chunk) in x.axis_chunks_iter(Axis(0), 1024).enumerate() {
            let batch = chunk.mapv(|v| v as f64);
            let acts = self.forward(&batch);
            let probs = Self::softmax(&acts[self.layer_count()]);
            for (i, row) in probs.rows().into_iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    out[[chunk_idx * 1024 + i, j]] = p as f32;
                }
            }
        }
        out
    }

    /// Activations of the last hidden layer; for the linear model this is the
    /// input itself.
    pub(crate) fn penultimate(&self, x: &Array2<f32>) -> Array2<f32> {
        if self.layer_count() == 1 {
            return x.clone();
        }
        let n = x.nrows();
        let width = self.weights[self.layer_count() - 1].ncols();
        let mut out = Array2::zeros((n, width));
        for (chunk_idx, chunk) in x.axis_chunks_iter(Axis(0), 1024).enumerate() {
            let batch = chunk.mapv(|v| v as f64);
            let acts = self.forward(&batch);
            let hidden = &acts[self.layer_count() - 1];
            for (i, row) in hidden.rows().into_iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    out[[chunk_idx * 1024 + i, j]] = v as f32;
                }
            }
        }
        out
    }

    // Flat parameter access, layer order, weights row-major then bias.
    // Used by finite-difference gradient checks.
    #[cfg(test)]
    pub(crate) fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    #[cfg(test)]
    pub(crate) fn get_param(&self, mut idx: usize) -> f64 {
        for l in 0..self.layer_count() {
            if idx < self.weights[l].len() {
                return self.weights[l].as_slice().unwrap()[idx];
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return self.biases[l][idx];
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    #[cfg(test)]
    pub(crate) fn set_param(&mut self, mut idx: usize, value: f64) {
        for l in 0..self.layer_count() {
            if idx < self.weights[l].len() {
                self.weights[l].as_slice_mut().unwrap()[idx] = value;
                return;
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                self.biases[l][idx] = value;
                return;
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    #[cfg(test)]
    fn grad_param(grads: &Gradients, mut idx: usize) -> f64 {
        for l in 0..grads.weights.len() {
            if idx < grads.weights[l].len() {
                return grads.weights[l].as_slice().unwrap()[idx];
            }
            idx -= grads.weights[l].len();
            if idx < grads.biases[l].len() {
                return grads.biases[l][idx];
            }
            idx -= grads.biases[l].len();
        }
        panic!("parameter index out of range");
    }
}

fn learning_rate(base: f64, step: usize, iterations: usize) -> f64 {
    if step >= iterations * 3 / 4 {
        base * 0.01
    } else if step >= iterations / 2 {
        base * 0.1
    } else {
        base
    }
}

pub(crate) fn train(
    x: &Array2<f32>,
    labels: &[u32],
    class_count: usize,
    hidden: &[usize],
    params: &SgdParams,
    seed: u64,
) -> Result<MlpModel> {
    let n = x.nrows();
    let mut model = MlpModel::init(x.ncols(), hidden, class_count, seed);
    if params.iterations == 0 {
        return Ok(model);
    }
    let mut velocity_w: Vec<Array2<f64>> = model.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
    let mut velocity_b: Vec<Array1<f64>> = model.biases.iter().map(|b| Array1::zeros(b.len())).collect();

    let shuffle_seed = derive_seed(seed, SHUFFLE_TAG);
    let mut epoch = 0u64;
    let mut order = shuffled_indices(n, &mut stream_rng(shuffle_seed, epoch));
    let mut cursor = 0usize;
    let batch_size = params.batch_size.min(n);

    for step in 0..params.iterations {
        if cursor >= n {
            epoch += 1;
            order = shuffled_indices(n, &mut stream_rng(shuffle_seed, epoch));
            cursor = 0;
        }
        let end = (cursor + batch_size).min(n);
        let rows = &order[cursor..end];
        cursor = end;

        let mut batch = Array2::zeros((rows.len(), x.ncols()));
        let mut targets = Vec::with_capacity(rows.len());
        for (bi, &r) in rows.iter().enumerate() {
            for j in 0..x.ncols() {
                batch[[bi, j]] = x[[r, j]] as f64;
            }
            targets.push(labels[r]);
        }

        let (loss, grads) = model.loss_and_grad(&batch, &targets);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: step });
        }
        let lr = learning_rate(params.learning_rate, step, params.iterations);
        for l in 0..model.layer_count() {
            velocity_w[l] = &velocity_w[l] * params.momentum + &grads.weights[l];
            velocity_b[l] = &velocity_b[l] * params.momentum + &grads.biases[l];
            model.weights[l] = &model.weights[l] - &(&velocity_w[l] * lr);
            model.biases[l] = &model.biases[l] - &(&velocity_b[l] * lr);
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_batch(seed: u64, n: usize, d: usize, k: usize) -> (Array2<f64>, Vec<u32>) {
        let mut rng = stream_rng(seed, 0);
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<u32> = (0..n).map(|_| rng.gen_range(0..k as u32)).collect();
        (x, y)
    }

    /// Signature of which ReLU units fired; finite differences are only
    /// valid where this pattern is constant over the probed interval.
    fn relu_pattern(model: &MlpModel, batch: &Array2<f64>) -> Vec<bool> {
        let acts = model.forward(batch);
        acts[1..model.layer_count()]
            .iter()
            .flat_map(|a| a.iter().map(|&v| v > 0.0))
            .collect()
    }

    fn check_gradients(model: &mut MlpModel, batch: &Array2<f64>, targets: &[u32]) {
        let (_, grads) = model.loss_and_grad(batch, targets);
        let eps = 1e-3;
        let mut skipped = 0usize;
        let total = model.param_count();
        for idx in 0..total {
            let orig = model.get_param(idx);
            model.set_param(idx, orig + eps);
            let up = model.loss_on(batch, targets);
            let pattern_up = relu_pattern(model, batch);
            model.set_param(idx, orig - eps);
            let down = model.loss_on(batch, targets);
            let pattern_down = relu_pattern(model, batch);
            model.set_param(idx, orig);
            if pattern_up != pattern_down {
                // The perturbation crossed a ReLU kink; the central
                // difference does not estimate the one-sided derivative.
                skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * eps);
            let analytic = MlpModel::grad_param(&grads, idx);
            let denom = numeric.abs().max(analytic.abs()).max(1e-6);
            let rel = (numeric - analytic).abs() / denom;
            assert!(
                rel <= 1e-4,
                "param {idx}: analytic {analytic:.8e} vs numeric {numeric:.8e} (rel {rel:.2e})"
            );
        }
        assert!(
            skipped * 5 <= total,
            "{skipped}/{total} parameters sat on ReLU kinks; the check lost its teeth"
        );
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let (x, y) = toy_batch(1, 8, 5, 3);
        let mut model = MlpModel::init(5, &[], 3, 2);
        // Move off the zero init so the check is not trivially symmetric.
        for idx in 0..model.param_count() {
            let v = ((idx * 37 % 11) as f64 - 5.0) / 10.0;
            model.set_param(idx, v);
        }
        check_gradients(&mut model, &x, &y);
    }

    #[test]
    fn one_hidden_layer_gradients_match_finite_differences() {
        let (x, y) = toy_batch(2, 8, 4, 3);
        let mut model = MlpModel::init(4, &[6], 3, 3);
        check_gradients(&mut model, &x, &y);
    }

    #[test]
    fn two_hidden_layer_gradients_match_finite_differences() {
        let (x, y) = toy_batch(3, 6, 4, 2);
        let mut model = MlpModel::init(4, &[5, 4], 2, 4);
        check_gradients(&mut model, &x, &y);
    }

    #[test]
    fn zero_iterations_returns_initial_model() {
        let x = Array2::from_shape_fn((10, 3), |(i, j)| (i + j) as f32);
        let labels: Vec<u32> = (0..10).map(|i| (i % 2) as u32).collect();
        let params = SgdParams {
            iterations: 0,
            ..SgdParams::default()
        };
        let model = train(&x, &labels, 2, &[], &params, 9).unwrap();
        let probs = model.predict(&x);
        // Zero-initialized linear model: exactly uniform predictions.
        for i in 0..10 {
            assert_eq!(probs[[i, 0]], 0.5);
            assert_eq!(probs[[i, 1]], 0.5);
        }
    }

    #[test]
    fn linear_model_separates_blobs() {
        let n = 200;
        let mut rng = stream_rng(4, 0);
        let mut x = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = (i % 2) as u32;
            let center = if c == 0 { -1.0 } else { 1.0 };
            x[[i, 0]] = center + rng.gen_range(-0.3..0.3);
            x[[i, 1]] = center + rng.gen_range(-0.3..0.3);
            labels.push(c);
        }
        let params = SgdParams {
            iterations: 300,
            ..SgdParams::default()
        };
        let model = train(&x, &labels, 2, &[], &params, 0).unwrap();
        let probs = model.predict(&x);
        let correct = (0..n)
            .filter(|&i| {
                let pred = if probs[[i, 0]] >= probs[[i, 1]] { 0 } else { 1 };
                pred == labels[i]
            })
            .count();
        assert_eq!(correct, n);
    }

    #[test]
    fn mlp_solves_xor() {
        // 2-D XOR needs a hidden layer; the linear model cannot express it.
        let base = [
            ([0.0f32, 0.0], 0u32),
            ([0.0, 1.0], 1),
            ([1.0, 0.0], 1),
            ([1.0, 1.0], 0),
        ];
        let n = 120;
        let mut rng = stream_rng(6, 0);
        let mut x = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let (pt, l) = base[i % 4];
            x[[i, 0]] = pt[0] + rng.gen_range(-0.05..0.05);
            x[[i, 1]] = pt[1] + rng.gen_range(-0.05..0.05);
            labels.push(l);
        }
        let params = SgdParams {
            iterations: 3000,
            ..SgdParams::default()
        };
        let model = train(&x, &labels, 2, &[16], &params, 1).unwrap();
        let probs = model.predict(&x);
        let correct = (0..n)
            .filter(|&i| {
                let pred = if probs[[i, 0]] >= probs[[i, 1]] { 0 } else { 1 };
                pred == labels[i]
            })
            .count();
        assert!(correct as f64 / n as f64 >= 0.99, "accuracy {correct}/{n}");
    }

    #[test]
    fn training_is_deterministic() {
        let (xf, y) = toy_batch(8, 40, 3, 2);
        let x = xf.mapv(|v| v as f32);
        let params = SgdParams {
            iterations: 50,
            ..SgdParams::default()
        };
        let a = train(&x, &y, 2, &[8], &params, 5).unwrap().predict(&x);
        let b = train(&x, &y, 2, &[8], &params, 5).unwrap().predict(&x);
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_reports_the_iteration() {
        let (xf, y) = toy_batch(9, 32, 4, 3);
        let x = xf.mapv(|v| (v * 1e3) as f32);
        let params = SgdParams {
            learning_rate: 1e18,
            iterations: 50,
            ..SgdParams::default()
        };
        let err = train(&x, &y, 3, &[8], &params, 0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }), "got {err}");
    }

    #[test]
    fn step_decay_hits_both_knees() {
        assert_eq!(learning_rate(0.1, 0, 100), 0.1);
        assert_eq!(learning_rate(0.1, 49, 100), 0.1);
        assert!((learning_rate(0.1, 50, 100) - 0.01).abs() < 1e-15);
        assert!((learning_rate(0.1, 74, 100) - 0.01).abs() < 1e-15);
        assert!((learning_rate(0.1, 75, 100) - 0.001).abs() < 1e-15);
        assert!((learning_rate(0.1, 99, 100) - 0.001).abs() < 1e-15);
    }
}
