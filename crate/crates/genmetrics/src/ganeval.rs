//! Cross-set classifier accuracies for judging conditional generators.
//!
//! The two core probes train a fixed, deterministic classifier on one sample
//! set and score top-1 accuracy on another:
//!
//! - [`gan_train`]: train on generated samples, evaluate on real validation
//!   data. High accuracy requires the generated set to cover the real class
//!   distribution, so it acts as a diversity/recall proxy.
//! - [`gan_test`]: train on real data, evaluate on generated samples. High
//!   accuracy requires the generated samples to look like their classes to a
//!   real-data classifier, so it acts as a quality/precision proxy.
//!
//! [`baseline_accuracy`] (train real, evaluate real validation) anchors both
//! numbers. All three share one code path, so running `gan_train` with the
//! real training set reproduces the baseline bit for bit.
//!
//! [`diversity_sweep`] traces accuracy against generated-set size (a flat
//! curve beyond some size estimates the number of distinct samples a
//! generator can produce), and [`augmentation_eval`] measures whether adding
//! generated samples to small real training sets helps or hurts.

use crate::classifier::{top_k_accuracy, train_classifier, ClassifierSpec};
use crate::dataset::{merge_sets, stratified_subsample, LabeledSampleSet, Role};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Seed-derivation tags for the independent subsampling stages.
const GENERATED_CURVE_STAGE: u64 = 1;
const REAL_CURVE_STAGE: u64 = 2;
const AUGMENT_STAGE: u64 = 3;

/// Top-5 accuracy is reported alongside top-1 once the label space is at
/// least this large; below it top-5 carries almost no information.
pub const TOP5_MIN_CLASSES: usize = 10;

/// One complete train/evaluate run, with enough recorded to reproduce it.
#[derive(Debug, Clone)]
pub struct EvalRun {
    pub classifier_spec: ClassifierSpec,
    pub train_role: Role,
    pub train_size: usize,
    pub eval_role: Role,
    pub eval_size: usize,
    pub top1: f64,
    pub top5: Option<f64>,
    pub warnings: Vec<String>,
}

/// Trains `spec` on `train` and scores it on `eval`. Shared by every probe
/// in this module so that identical inputs give identical results.
pub fn run_eval(
    train: &LabeledSampleSet,
    eval: &LabeledSampleSet,
    spec: &ClassifierSpec,
) -> Result<EvalRun> {
    if train.class_count() != eval.class_count() {
        return Err(Error::InvalidArgument(format!(
            "training and evaluation sets disagree on class count ({} vs {})",
            train.class_count(),
            eval.class_count()
        )));
    }
    if train.sample_shape() != eval.sample_shape() {
        return Err(Error::InvalidArgument(format!(
            "training and evaluation sets disagree on sample shape ({:?} vs {:?})",
            train.sample_shape(),
            eval.sample_shape()
        )));
    }
    let mut warnings = Vec::new();
    if train.len() == eval.len() && train.labels() == eval.labels() && train.data() == eval.data()
    {
        warnings.push(
            "training and evaluation sets are identical; the result is a training accuracy"
                .to_string(),
        );
    }
    let model = train_classifier(train, spec)?;
    warnings.extend(model.warnings().iter().cloned());
    let probs = model.predict_probabilities(eval)?;
    let top1 = top_k_accuracy(&probs, eval.labels(), 1)?;
    let top5 = if eval.class_count() >= TOP5_MIN_CLASSES {
        Some(top_k_accuracy(&probs, eval.labels(), 5)?)
    } else {
        None
    };
    Ok(EvalRun {
        classifier_spec: spec.clone(),
        train_role: train.role(),
        train_size: train.len(),
        eval_role: eval.role(),
        eval_size: eval.len(),
        top1,
        top5,
        warnings,
    })
}

/// Accuracy of a classifier trained on real training data and evaluated on
/// real validation data; the reference point for the two probes below.
pub fn baseline_accuracy(
    train: &LabeledSampleSet,
    val: &LabeledSampleSet,
    spec: &ClassifierSpec,
) -> Result<EvalRun> {
    run_eval(train, val, spec)
}

/// Train on generated samples, evaluate on real validation data
/// (diversity/recall proxy). Missing classes in the generated set produce a
/// warning, not an error: that situation is exactly mode dropping, and
/// measuring its effect is the point.
pub fn gan_train(
    generated: &LabeledSampleSet,
    val: &LabeledSampleSet,
    spec: &ClassifierSpec,
) -> Result<EvalRun> {
    run_eval(generated, val, spec)
}

/// Train on real data, evaluate on generated samples (quality/precision
/// proxy).
pub fn gan_test(
    train: &LabeledSampleSet,
    generated: &LabeledSampleSet,
    spec: &ClassifierSpec,
) -> Result<EvalRun> {
    run_eval(train, generated, spec)
}

/// Mean/spread of top-1 accuracy at one training-set size.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub size: usize,
    pub mean_top1: f64,
    /// Population standard deviation over trials.
    pub std_top1: f64,
    pub trials: usize,
}

/// Accuracy-vs-size curves for a generated pool and, optionally, a real pool
/// evaluated under the identical protocol.
#[derive(Debug, Clone)]
pub struct DiversityCurve {
    pub generated: Vec<SweepPoint>,
    pub real: Option<Vec<SweepPoint>>,
}

fn validate_sizes(
    operation: &'static str,
    sizes: &[usize],
    class_count: usize,
    pools: &[(&'static str, usize)],
) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{operation}: at least one size is required"
        )));
    }
    let mut previous = 0usize;
    for &size in sizes {
        if size == 0 || size <= previous && previous != 0 || size % class_count != 0 {
            return Err(Error::BadSweepSize {
                operation,
                size,
                class_count,
            });
        }
        previous = size;
    }
    let largest = *sizes.last().expect("nonempty");
    for &(_, pool) in pools {
        if pool < largest {
            return Err(Error::PoolTooSmall {
                operation,
                pool,
                requested: largest,
            });
        }
    }
    Ok(())
}

fn summarize(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn sweep_one_pool(
    pool: &LabeledSampleSet,
    val: &LabeledSampleSet,
    sizes: &[usize],
    spec: &ClassifierSpec,
    trials: usize,
    stage_seed: u64,
) -> Result<Vec<SweepPoint>> {
    let class_count = pool.class_count();
    let mut points = Vec::with_capacity(sizes.len());
    for (size_index, &size) in sizes.iter().enumerate() {
        let mut accuracies = Vec::with_capacity(trials);
        for trial in 0..trials {
            let run = if size == pool.len() {
                // Consistency: the full pool needs no subsampling, so this
                // point equals a single direct run on the pool.
                run_eval(pool, val, spec)?
            } else {
                let sub_seed = derive_seed(stage_seed, (size_index * trials + trial) as u64);
                let subset = stratified_subsample(pool, size / class_count, sub_seed)?;
                run_eval(&subset, val, spec)?
            };
            accuracies.push(run.top1);
        }
        let (mean_top1, std_top1) = summarize(&accuracies);
        points.push(SweepPoint {
            size,
            mean_top1,
            std_top1,
            trials,
        });
    }
    Ok(points)
}

/// Accuracy-vs-size curve: for each size, stratified-subsample the generated
/// pool (fresh stream per size and trial), train, and evaluate on `val`.
///
/// Sizes must be strictly ascending, positive, and divisible by the class
/// count so every subsample is class balanced. The classifier seed is held
/// fixed across points; only the subsample varies, so the curve shape
/// reflects sample diversity. When `real_pool` is given, the identical
/// protocol runs on real data as a comparison curve.
pub fn diversity_sweep(
    generated_pool: &LabeledSampleSet,
    val: &LabeledSampleSet,
    sizes: &[usize],
    spec: &ClassifierSpec,
    trials: usize,
    real_pool: Option<&LabeledSampleSet>,
) -> Result<DiversityCurve> {
    const OPERATION: &str = "diversity_sweep";
    if trials == 0 {
        return Err(Error::InvalidArgument(format!(
            "{OPERATION}: trials must be at least 1"
        )));
    }
    let mut pools = vec![("generated", generated_pool.len())];
    if let Some(real) = real_pool {
        if real.class_count() != generated_pool.class_count() {
            return Err(Error::InvalidArgument(format!(
                "{OPERATION}: real and generated pools disagree on class count ({} vs {})",
                real.class_count(),
                generated_pool.class_count()
            )));
        }
        pools.push(("real", real.len()));
    }
    validate_sizes(OPERATION, sizes, generated_pool.class_count(), &pools)?;

    let generated = sweep_one_pool(
        generated_pool,
        val,
        sizes,
        spec,
        trials,
        derive_seed(spec.seed, GENERATED_CURVE_STAGE),
    )?;
    let real = match real_pool {
        Some(pool) => Some(sweep_one_pool(
            pool,
            val,
            sizes,
            spec,
            trials,
            derive_seed(spec.seed, REAL_CURVE_STAGE),
        )?),
        None => None,
    };
    Ok(DiversityCurve { generated, real })
}

/// One row of the augmentation comparison at a given real-data budget.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationRow {
    pub real_size: usize,
    pub real_only: f64,
    pub real_plus_generated: f64,
}

/// For each real-data budget, compares training on real data alone against
/// training on the same real data merged with the full generated set.
///
/// Whether generated samples help depends on their quality: fresh draws from
/// the true distribution raise small-budget accuracy, while corrupted
/// samples can lower it.
pub fn augmentation_eval(
    real_pool: &LabeledSampleSet,
    real_sizes: &[usize],
    generated: &LabeledSampleSet,
    val: &LabeledSampleSet,
    spec: &ClassifierSpec,
) -> Result<Vec<AugmentationRow>> {
    const OPERATION: &str = "augmentation_eval";
    validate_sizes(
        OPERATION,
        real_sizes,
        real_pool.class_count(),
        &[("real", real_pool.len())],
    )?;
    let stage_seed = derive_seed(spec.seed, AUGMENT_STAGE);
    let class_count = real_pool.class_count();
    let mut rows = Vec::with_capacity(real_sizes.len());
    for (size_index, &size) in real_sizes.iter().enumerate() {
        let subset = if size == real_pool.len() {
            real_pool.clone()
        } else {
            let sub_seed = derive_seed(stage_seed, size_index as u64);
            stratified_subsample(real_pool, size / class_count, sub_seed)?
        };
        let real_only = run_eval(&subset, val, spec)?.top1;
        let real_plus_generated = if generated.is_empty() {
            real_only
        } else {
            let combined = merge_sets(&subset, generated)?;
            run_eval(&combined, val, spec)?.top1
        };
        rows.push(AugmentationRow {
            real_size: size,
            real_only,
            real_plus_generated,
        });
    }
    Ok(rows)
}

/// Mean and population standard deviation of top-1 (and top-5, when every
/// run reports it) over repeated runs.
pub fn summarize_runs(runs: &[EvalRun]) -> Result<(SweepPoint, Option<(f64, f64)>)> {
    if runs.is_empty() {
        return Err(Error::EmptyInput {
            operation: "summarize_runs",
        });
    }
    let top1: Vec<f64> = runs.iter().map(|r| r.top1).collect();
    let (mean_top1, std_top1) = summarize(&top1);
    let point = SweepPoint {
        size: runs[0].train_size,
        mean_top1,
        std_top1,
        trials: runs.len(),
    };
    let top5 = if runs.iter().all(|r| r.top5.is_some()) {
        let values: Vec<f64> = runs.iter().map(|r| r.top5.expect("checked")).collect();
        Some(summarize(&values))
    } else {
        None
    };
    Ok((point, top5))
}

/// Seed for repeat `trial` of a probe: trial 0 keeps the base seed so a
/// single trial reproduces the plain run exactly; later trials derive fresh
/// streams.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    if trial == 0 {
        base
    } else {
        derive_seed(base, trial as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ClassifierKind, ForestParams, SplitFeatures};
    use crate::rng::stream_rng;
    use crate::tensor::Tensor;
    use ndarray::{ArrayD, IxDyn};
    use rand_distr::{Distribution, StandardNormal};

    /// Well-separated isotropic Gaussian blobs, one per class.
    fn blobs(
        class_count: usize,
        per_class: usize,
        dim: usize,
        separation: f32,
        sigma: f32,
        seed: u64,
        role: Role,
    ) -> LabeledSampleSet {
        let n = class_count * per_class;
        let mut data = ArrayD::zeros(IxDyn(&[n, dim]));
        let mut labels = Vec::with_capacity(n);
        for k in 0..class_count {
            let mut rng = stream_rng(seed, k as u64);
            for j in 0..per_class {
                let row = k * per_class + j;
                for d in 0..dim {
                    let noise: f32 = StandardNormal.sample(&mut rng);
                    let center = if d == k % dim { separation } else { 0.0 };
                    data[[row, d]] = center + sigma * noise;
                }
                labels.push(k as i64);
            }
        }
        LabeledSampleSet::new(Tensor::F32(data), labels, role, class_count).unwrap()
    }

    fn small_forest(seed: u64) -> ClassifierSpec {
        ClassifierSpec {
            kind: ClassifierKind::RandomForest(ForestParams {
                tree_count: 20,
                max_depth: None,
                split_features: SplitFeatures::Sqrt,
                bootstrap: true,
            }),
            seed,
        }
    }

    #[test]
    fn identity_oracle_is_bit_exact() {
        let train = blobs(4, 30, 8, 4.0, 1.0, 1, Role::Train);
        let val = blobs(4, 20, 8, 4.0, 1.0, 2, Role::Validation);
        let spec = small_forest(7);
        let base = baseline_accuracy(&train, &val, &spec).unwrap();
        let as_generated = train.clone().with_role(Role::Generated);
        let probe = gan_train(&as_generated, &val, &spec).unwrap();
        assert_eq!(base.top1.to_bits(), probe.top1.to_bits());
        assert_eq!(base.top5, probe.top5);
    }

    #[test]
    fn perfect_generator_tracks_the_baseline() {
        let train = blobs(4, 50, 8, 5.0, 1.0, 1, Role::Train);
        let fresh = blobs(4, 50, 8, 5.0, 1.0, 11, Role::Generated);
        let val = blobs(4, 40, 8, 5.0, 1.0, 2, Role::Validation);
        let spec = small_forest(3);
        let base = baseline_accuracy(&train, &val, &spec).unwrap().top1;
        let gt = gan_train(&fresh, &val, &spec).unwrap().top1;
        let gq = gan_test(&train, &fresh, &spec).unwrap().top1;
        assert!((gt - base).abs() <= 0.05, "gan_train {gt} vs baseline {base}");
        assert!((gq - base).abs() <= 0.05, "gan_test {gq} vs baseline {base}");
    }

    #[test]
    fn mode_dropping_caps_gan_train_and_warns() {
        let train = blobs(4, 40, 8, 5.0, 1.0, 1, Role::Train);
        let val = blobs(4, 40, 8, 5.0, 1.0, 2, Role::Validation);
        // Keep only classes 0 and 1 in the generated set.
        let keep: Vec<usize> = train
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l < 2)
            .map(|(i, _)| i)
            .collect();
        let dropped = train.take(&keep).with_role(Role::Generated);
        let spec = small_forest(5);
        let run = gan_train(&dropped, &val, &spec).unwrap();
        assert!(run.top1 <= 0.5 + 0.05, "accuracy {}", run.top1);
        assert!(
            run.warnings.iter().any(|w| w.contains("no training samples")),
            "{:?}",
            run.warnings
        );
        // The quality probe barely notices: it never sees the missing classes.
        let clean = gan_test(&train, &train, &spec).unwrap().top1;
        let after = gan_test(&train, &dropped, &spec).unwrap().top1;
        assert!((clean - after).abs() <= 0.05);
    }

    #[test]
    fn evaluating_on_the_training_set_warns_and_is_optimistic() {
        let train = blobs(3, 30, 6, 3.0, 1.2, 4, Role::Train);
        let val = blobs(3, 30, 6, 3.0, 1.2, 5, Role::Validation);
        let spec = small_forest(2);
        let on_self = run_eval(&train, &train, &spec).unwrap();
        let held_out = run_eval(&train, &val, &spec).unwrap();
        assert!(on_self
            .warnings
            .iter()
            .any(|w| w.contains("identical")));
        assert!(on_self.top1 >= held_out.top1);
        assert!(on_self.top1 >= 0.95, "forest training accuracy {}", on_self.top1);
    }

    #[test]
    fn top5_appears_only_for_ten_or_more_classes() {
        let wide = blobs(10, 12, 12, 4.0, 1.0, 6, Role::Train);
        let wide_val = blobs(10, 8, 12, 4.0, 1.0, 7, Role::Validation);
        let spec = small_forest(1);
        let run = baseline_accuracy(&wide, &wide_val, &spec).unwrap();
        let top5 = run.top5.expect("ten classes report top-5");
        assert!(top5 >= run.top1);

        let narrow = blobs(4, 12, 12, 4.0, 1.0, 6, Role::Train);
        let narrow_val = blobs(4, 8, 12, 4.0, 1.0, 7, Role::Validation);
        assert!(baseline_accuracy(&narrow, &narrow_val, &spec)
            .unwrap()
            .top5
            .is_none());
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        let a = blobs(4, 10, 8, 4.0, 1.0, 1, Role::Train);
        let b = blobs(5, 10, 8, 4.0, 1.0, 2, Role::Validation);
        let c = blobs(4, 10, 6, 4.0, 1.0, 2, Role::Validation);
        let spec = small_forest(0);
        assert!(matches!(
            run_eval(&a, &b, &spec),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            run_eval(&a, &c, &spec),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sweep_validates_sizes_and_pool() {
        let pool = blobs(4, 20, 8, 4.0, 1.0, 1, Role::Generated);
        let val = blobs(4, 10, 8, 4.0, 1.0, 2, Role::Validation);
        let spec = small_forest(0);
        // Not ascending.
        assert!(matches!(
            diversity_sweep(&pool, &val, &[40, 40], &spec, 1, None),
            Err(Error::BadSweepSize { size: 40, .. })
        ));
        // Not divisible by the class count.
        assert!(matches!(
            diversity_sweep(&pool, &val, &[30], &spec, 1, None),
            Err(Error::BadSweepSize { size: 30, .. })
        ));
        // Larger than the pool.
        assert!(matches!(
            diversity_sweep(&pool, &val, &[120], &spec, 1, None),
            Err(Error::PoolTooSmall { pool: 80, requested: 120, .. })
        ));
        assert!(matches!(
            diversity_sweep(&pool, &val, &[40], &spec, 0, None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn full_pool_point_matches_a_direct_run() {
        let pool = blobs(4, 20, 8, 4.0, 1.0, 1, Role::Generated);
        let val = blobs(4, 15, 8, 4.0, 1.0, 2, Role::Validation);
        let spec = small_forest(9);
        let curve = diversity_sweep(&pool, &val, &[40, 80], &spec, 3, None).unwrap();
        let direct = gan_train(&pool, &val, &spec).unwrap();
        let last = curve.generated.last().unwrap();
        assert_eq!(last.mean_top1.to_bits(), direct.top1.to_bits());
        assert_eq!(last.std_top1, 0.0);
        assert_eq!(curve.generated[0].trials, 3);
        assert!(curve.real.is_none());
    }

    #[test]
    fn sweep_with_real_pool_produces_a_parallel_curve() {
        let gen_pool = blobs(4, 20, 8, 4.0, 1.0, 1, Role::Generated);
        let real_pool = blobs(4, 20, 8, 4.0, 1.0, 3, Role::Train);
        let val = blobs(4, 15, 8, 4.0, 1.0, 2, Role::Validation);
        let spec = small_forest(9);
        let curve =
            diversity_sweep(&gen_pool, &val, &[20, 40], &spec, 2, Some(&real_pool)).unwrap();
        let real = curve.real.expect("real curve requested");
        assert_eq!(real.len(), 2);
        assert_eq!(real[0].size, 20);
        let again =
            diversity_sweep(&gen_pool, &val, &[20, 40], &spec, 2, Some(&real_pool)).unwrap();
        assert_eq!(curve.generated, again.generated);
    }

    #[test]
    fn augmentation_with_empty_generated_set_changes_nothing() {
        let pool = blobs(4, 20, 8, 4.0, 1.0, 1, Role::Train);
        let val = blobs(4, 15, 8, 4.0, 1.0, 2, Role::Validation);
        let empty = pool.take(&[]).with_role(Role::Generated);
        let spec = small_forest(4);
        let rows = augmentation_eval(&pool, &[20, 40], &empty, &val, &spec).unwrap();
        for row in &rows {
            assert_eq!(row.real_only.to_bits(), row.real_plus_generated.to_bits());
        }
    }

    #[test]
    fn good_generated_samples_help_a_small_real_budget() {
        let pool = blobs(4, 20, 8, 3.0, 1.5, 1, Role::Train);
        let generated = blobs(4, 100, 8, 3.0, 1.5, 21, Role::Generated);
        let val = blobs(4, 50, 8, 3.0, 1.5, 2, Role::Validation);
        let spec = small_forest(4);
        let rows = augmentation_eval(&pool, &[8], &generated, &val, &spec).unwrap();
        assert!(
            rows[0].real_plus_generated >= rows[0].real_only,
            "{:?}",
            rows[0]
        );
    }

    #[test]
    fn trial_seeds_keep_the_first_trial_unchanged() {
        assert_eq!(trial_seed(42, 0), 42);
        assert_ne!(trial_seed(42, 1), 42);
        assert_ne!(trial_seed(42, 1), trial_seed(42, 2));
    }

    #[test]
    fn summarize_runs_reports_mean_and_std() {
        let spec = small_forest(0);
        let mk = |top1: f64| EvalRun {
            classifier_spec: spec.clone(),
            train_role: Role::Generated,
            train_size: 100,
            eval_role: Role::Validation,
            eval_size: 50,
            top1,
            top5: Some(top1 + 0.1),
            warnings: vec![],
        };
        let (point, top5) = summarize_runs(&[mk(0.8), mk(0.9)]).unwrap();
        assert!((point.mean_top1 - 0.85).abs() < 1e-12);
        assert!((point.std_top1 - 0.05).abs() < 1e-12);
        let (m5, _) = top5.expect("all runs have top5");
        assert!((m5 - 0.95).abs() < 1e-12);
    }
}
