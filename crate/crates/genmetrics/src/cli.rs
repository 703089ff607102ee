//! Command-line surface.
//!
//! Every subcommand reads tensor files, runs one protocol, prints a short
//! human summary to stdout, and (with `--out`) writes a [`MetricReport`]
//! recording the tool version, full command line, input digests, and every
//! parameter that affects the result. Reports contain no timestamps unless
//! `--timings` is passed, so identical inputs give byte-identical reports
//! for any `--workers` count.
//!
//! Exit codes: 0 success, 1 data/contract error (message on stderr), 2
//! usage error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array2, ArrayD, IxDyn};

use crate::classifier::{
    ClassifierKind, ClassifierSpec, ForestParams, MlpParams, ProbabilityMatrix, SgdParams,
};
use crate::dataset::{LabeledSampleSet, Role};
use crate::error::{Error, Result};
use crate::frechet::{fid_protocol, FidProtocol, FidVariant};
use crate::ganeval::{
    augmentation_eval, diversity_sweep, gan_test, gan_train, summarize_runs, trial_seed, EvalRun,
};
use crate::inception::{inception_score, softmax_logits, SplitProtocol};
use crate::report::{fnv1a64, format_float, merge_reports, MetricReport, MetricValue, ReportFormat};
use crate::swd::{image_batch, swd_protocol, SwdParams};
use crate::synth::{
    apply_gaussian_noise, apply_salt_pepper, confuse_labels, drop_modes, duplicate_cap,
    sample_glyph_digits, sample_mixture, GlyphDigitsSpec, MixtureModelSpec,
};
use crate::tensor::{read_tensor_file, write_tensor_file, Tensor};

#[derive(Parser, Debug)]
#[command(
    name = "genmetrics",
    version,
    about = "Evaluation metrics for class-conditional generative models"
)]
struct Cli {
    /// Worker threads for internal parallelism (results do not depend on it).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Record wall-clock timings in the report (breaks byte-reproducibility).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Write the run report to this path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VariantArg {
    Full,
    #[value(name = "5k")]
    FiveK,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ClassifierArg {
    Rf,
    Linear,
    Mlp,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CorruptOp {
    SaltPepper,
    GaussianNoise,
    LabelConfusion,
    ModeDrop,
    DuplicateCap,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SynthKind {
    Mixture,
    Digits,
}

/// Classifier configuration shared by the accuracy probes.
#[derive(Args, Debug)]
struct ClassifierArgs {
    #[arg(long, value_enum, default_value = "rf")]
    classifier: ClassifierArg,
    /// Master seed for training (and subsampling, where applicable).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random forest: number of trees.
    #[arg(long)]
    trees: Option<usize>,
    /// Random forest: depth cap (unlimited when absent).
    #[arg(long)]
    max_depth: Option<usize>,
    /// SGD learners: minibatch steps.
    #[arg(long)]
    iterations: Option<usize>,
    /// SGD learners: base learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// SGD learners: momentum coefficient.
    #[arg(long)]
    momentum: Option<f64>,
    /// SGD learners: minibatch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// MLP: comma-separated hidden layer widths (one or two).
    #[arg(long)]
    hidden: Option<String>,
}

impl ClassifierArgs {
    fn to_spec(&self) -> Result<ClassifierSpec> {
        let mut sgd = SgdParams::default();
        if let Some(lr) = self.learning_rate {
            sgd.learning_rate = lr;
        }
        if let Some(m) = self.momentum {
            sgd.momentum = m;
        }
        if let Some(it) = self.iterations {
            sgd.iterations = it;
        }
        if let Some(b) = self.batch_size {
            sgd.batch_size = b;
        }
        let kind = match self.classifier {
            ClassifierArg::Rf => {
                let mut params = ForestParams::default();
                if let Some(t) = self.trees {
                    params.tree_count = t;
                }
                params.max_depth = self.max_depth.or(params.max_depth);
                ClassifierKind::RandomForest(params)
            }
            ClassifierArg::Linear => ClassifierKind::LinearSoftmax(sgd),
            ClassifierArg::Mlp => {
                let mut params = MlpParams {
                    sgd,
                    ..MlpParams::default()
                };
                if let Some(spec) = &self.hidden {
                    params.hidden = spec
                        .split(',')
                        .map(|s| {
                            s.trim().parse::<usize>().map_err(|_| {
                                Error::InvalidArgument(format!(
                                    "--hidden expects comma-separated widths, got {spec:?}"
                                ))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                }
                ClassifierKind::Mlp(params)
            }
        };
        let spec = ClassifierSpec {
            kind,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Inception-style score over a class-posterior matrix.
    Is {
        /// Probability (or logit) matrix, float32 (n, classes).
        #[arg(long)]
        probs: PathBuf,
        /// Treat the input as raw logits and apply a softmax first.
        #[arg(long)]
        logits: bool,
        #[arg(long, default_value_t = 10)]
        splits: usize,
        #[arg(long, default_value_t = 5000)]
        split_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Frechet distance between Gaussian fits of two embedding sets.
    Fid {
        /// Real-side embeddings or images.
        #[arg(long)]
        real: PathBuf,
        /// Generated-side embeddings or images.
        #[arg(long)]
        fake: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        variant: VariantArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Multi-scale sliced Wasserstein distance over image patches.
    Swd {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        fake: PathBuf,
        #[arg(long, default_value_t = 128)]
        patches: usize,
        #[arg(long, default_value_t = 512)]
        proj: usize,
        #[arg(long, default_value_t = 4)]
        repeats: usize,
        #[arg(long, default_value_t = 16)]
        min_res: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Train on generated samples, evaluate on real validation data.
    GanTrain {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        gen_labels: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        val_labels: PathBuf,
        /// Label-space size; inferred from the labels when absent.
        #[arg(long)]
        class_count: Option<usize>,
        /// Average over this many trials (fresh training seed per trial).
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Train on real data, evaluate on generated samples.
    GanTest {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        train_labels: PathBuf,
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        gen_labels: PathBuf,
        #[arg(long)]
        class_count: Option<usize>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Accuracy-vs-size curve over stratified subsamples of a generated pool.
    DiversitySweep {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        gen_labels: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        val_labels: PathBuf,
        /// Optional real pool for a comparison curve.
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long)]
        real_labels: Option<PathBuf>,
        /// Comma-separated ascending subsample sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        class_count: Option<usize>,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Compare real-only training against real plus generated samples.
    Augment {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        real_labels: PathBuf,
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        gen_labels: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        val_labels: PathBuf,
        /// Comma-separated ascending real-data budgets.
        #[arg(long, value_delimiter = ',')]
        real_sizes: Vec<usize>,
        #[arg(long)]
        class_count: Option<usize>,
        #[command(flatten)]
        classifier: ClassifierArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Apply a controlled corruption to a sample file.
    Corrupt {
        #[arg(long, value_enum)]
        op: CorruptOp,
        #[arg(long = "in")]
        input: PathBuf,
        /// Labels for the input (required by label/class-aware corruptions).
        #[arg(long)]
        in_labels: Option<PathBuf>,
        /// Corrupted samples are written here.
        #[arg(long)]
        out: PathBuf,
        /// Corrupted labels are written here (required when labels change).
        #[arg(long)]
        out_labels: Option<PathBuf>,
        /// salt-pepper / label-confusion strength.
        #[arg(long)]
        rate: Option<f64>,
        /// gaussian-noise strength (0-255 scale for uint8 data).
        #[arg(long)]
        sigma: Option<f64>,
        /// mode-drop: comma-separated class ids to remove.
        #[arg(long, value_delimiter = ',')]
        classes: Vec<usize>,
        /// duplicate-cap: distinct samples to keep.
        #[arg(long)]
        unique: Option<usize>,
        /// duplicate-cap: output sample count.
        #[arg(long)]
        target: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        class_count: Option<usize>,
        /// Optional run-report path (the data itself goes to --out).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Sample a synthetic labeled dataset.
    Synth {
        #[arg(long, value_enum, default_value = "mixture")]
        kind: SynthKind,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        /// mixture: feature dimension.
        #[arg(long, default_value_t = 16)]
        dim: usize,
        /// mixture: distance of each class mean from the origin.
        #[arg(long, default_value_t = 4.0)]
        sep: f64,
        /// mixture: isotropic standard deviation.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 500)]
        n_per_class: usize,
        /// digits: image side.
        #[arg(long, default_value_t = 28)]
        side: usize,
        /// digits: maximum glyph translation.
        #[arg(long, default_value_t = 2)]
        shift: usize,
        /// digits: per-pixel noise on the 0-255 scale.
        #[arg(long, default_value_t = 20.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples are written here.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        out_labels: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Merge several JSON run reports into one.
    ReportMerge {
        /// Report files to merge; colliding keys are namespaced by stem.
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
}

/// Flattens a 2-4 dim sample tensor into an `(n, features)` float matrix
/// (uint8 scaled by 1/255), the common embedding input for FID.
fn feature_matrix(tensor: &Tensor, path: &Path) -> Result<Array2<f32>> {
    let shape = tensor.shape();
    if shape.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{}: expected at least 2 dims (samples, features...), got {:?}",
            path.display(),
            shape
        )));
    }
    let n = shape[0];
    let dim: usize = shape[1..].iter().product();
    let values: Vec<f32> = match tensor {
        Tensor::F32(a) => a.iter().copied().collect(),
        Tensor::U8(a) => a.iter().map(|&v| v as f32 / 255.0).collect(),
        Tensor::I64(_) => {
            return Err(Error::BadSampleDtype {
                dtype: tensor.dtype().name(),
            })
        }
    };
    Ok(Array2::from_shape_vec((n, dim), values).expect("shape product"))
}

fn read_labels(path: &Path) -> Result<Vec<i64>> {
    match read_tensor_file(path)? {
        Tensor::I64(a) if a.ndim() == 1 => Ok(a.iter().copied().collect()),
        t => Err(Error::InvalidArgument(format!(
            "{}: labels must be a 1-dim int64 tensor, got {} {:?}",
            path.display(),
            t.dtype().name(),
            t.shape()
        ))),
    }
}

fn infer_class_count(label_sets: &[&[i64]], requested: Option<usize>) -> Result<usize> {
    let observed = label_sets
        .iter()
        .flat_map(|l| l.iter())
        .max()
        .map(|&m| (m + 1).max(1) as usize)
        .unwrap_or(1);
    match requested {
        Some(k) if k < observed => Err(Error::InvalidArgument(format!(
            "--class-count {k} is below the largest label ({})",
            observed - 1
        ))),
        Some(k) => Ok(k),
        None => Ok(observed),
    }
}

fn labels_tensor(labels: &[i64]) -> Tensor {
    Tensor::I64(ArrayD::from_shape_vec(IxDyn(&[labels.len()]), labels.to_vec()).expect("1-dim"))
}

fn digest_of(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

fn record_classifier(report: &mut MetricReport, spec: &ClassifierSpec, trials: usize) {
    report.set_parameter("classifier", spec.to_kv_block());
    report.set_parameter("seed", spec.seed);
    report.set_parameter("trials", trials);
}

fn record_warnings(report: &mut MetricReport, runs: &[EvalRun]) {
    let warnings: Vec<&str> = runs
        .iter()
        .flat_map(|r| r.warnings.iter())
        .map(String::as_str)
        .collect();
    if !warnings.is_empty() {
        let mut unique: Vec<&str> = warnings.clone();
        unique.dedup();
        report.set_parameter("warnings", unique.join(" | "));
        for w in unique {
            eprintln!("warning: {w}");
        }
    }
}

/// Runs `trials` repeats of one probe with per-trial seeds, adds
/// `<prefix>_top1` / `<prefix>_top5` results, returns the human summary.
fn probe_with_trials(
    report: &mut MetricReport,
    prefix: &str,
    spec: &ClassifierSpec,
    trials: usize,
    mut one: impl FnMut(&ClassifierSpec) -> Result<EvalRun>,
) -> Result<String> {
    if trials == 0 {
        return Err(Error::InvalidArgument("--trials must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(trials);
    for t in 0..trials {
        let trial_spec = ClassifierSpec {
            kind: spec.kind.clone(),
            seed: trial_seed(spec.seed, t),
        };
        runs.push(one(&trial_spec)?);
    }
    let (point, top5) = summarize_runs(&runs)?;
    let mut top1 = MetricValue::plain(point.mean_top1)
        .with_param("train_size", runs[0].train_size)
        .with_param("eval_size", runs[0].eval_size);
    if trials > 1 {
        top1 = top1.with_std(point.std_top1);
    }
    report.add_result(&format!("{prefix}_top1"), top1);
    let mut text = format!("{prefix}_top1 {:.6}", point.mean_top1);
    if trials > 1 {
        text += &format!(" +/- {:.6} ({} trials)", point.std_top1, trials);
    }
    if let Some((mean5, std5)) = top5 {
        let mut value = MetricValue::plain(mean5);
        if trials > 1 {
            value = value.with_std(std5);
        }
        report.add_result(&format!("{prefix}_top5"), value);
        text += &format!("\n{prefix}_top5 {mean5:.6}");
        if trials > 1 {
            text += &format!(" +/- {std5:.6} ({trials} trials)");
        }
    }
    record_warnings(report, &runs);
    Ok(text)
}

struct Outcome {
    report: MetricReport,
    human: String,
    /// Report destination and format, when the user asked for one.
    write_to: Option<(PathBuf, ReportFormat)>,
}

fn execute(cli: &Cli, argv: &[String]) -> Result<Outcome> {
    let started = Instant::now();
    let mut report = MetricReport::new(argv.to_vec());
    report.set_parameter("workers", cli.workers);

    let (human, write_to): (String, Option<(PathBuf, ReportFormat)>) = match &cli.command {
        Command::Is {
            probs,
            logits,
            splits,
            split_size,
            seed,
            report: out,
        } => {
            report.add_input(probs)?;
            report.set_parameter("splits", splits);
            report.set_parameter("split_size", split_size);
            report.set_parameter("seed", seed);
            report.set_parameter("logits", logits);
            let tensor = read_tensor_file(probs)?;
            let matrix = feature_matrix(&tensor, probs)?;
            let probabilities = if *logits {
                softmax_logits(&matrix)?
            } else {
                ProbabilityMatrix::new(matrix)?
            };
            let protocol = SplitProtocol {
                split_count: *splits,
                split_size: *split_size,
                seed: *seed,
            };
            let (mean, std) = inception_score(&probabilities, &protocol)?;
            report.add_result("is_mean", MetricValue::plain(mean));
            report.add_result("is_std", MetricValue::plain(std));
            (
                format!("is_mean {mean:.6}\nis_std {std:.6}"),
                out.out.clone().map(|p| (p, out.format.into())),
            )
        }
        Command::Fid {
            real,
            fake,
            variant,
            seed,
            report: out,
        } => {
            report.add_input(real)?;
            report.add_input(fake)?;
            let variant = match variant {
                VariantArg::Full => FidVariant::Full,
                VariantArg::FiveK => FidVariant::FiveK,
            };
            report.set_parameter("fid_variant", variant.name());
            report.set_parameter("seed", seed);
            let real_matrix = feature_matrix(&read_tensor_file(real)?, real)?;
            let fake_matrix = feature_matrix(&read_tensor_file(fake)?, fake)?;
            let result = fid_protocol(
                &real_matrix,
                &fake_matrix,
                &FidProtocol {
                    variant,
                    seed: *seed,
                },
            )?;
            report.set_parameter("estimator", result.estimator.name());
            report.add_result(
                "fid",
                MetricValue::plain(result.distance)
                    .with_param("variant", variant.name())
                    .with_param("estimator", result.estimator.name())
                    .with_param("real_used", result.real_used)
                    .with_param("generated_used", result.generated_used),
            );
            (
                format!(
                    "fid {:.6} (variant={}, estimator={}, real={}, generated={})",
                    result.distance,
                    variant.name(),
                    result.estimator.name(),
                    result.real_used,
                    result.generated_used
                ),
                out.out.clone().map(|p| (p, out.format.into())),
            )
        }
        Command::Swd {
            real,
            fake,
            patches,
            proj,
            repeats,
            min_res,
            seed,
            report: out,
        } => {
            report.add_input(real)?;
            report.add_input(fake)?;
            report.set_parameter("patches", patches);
            report.set_parameter("projections", proj);
            report.set_parameter("repeats", repeats);
            report.set_parameter("min_resolution", min_res);
            report.set_parameter("seed", seed);
            let real_batch = image_batch(&read_tensor_file(real)?)?;
            let fake_batch = image_batch(&read_tensor_file(fake)?)?;
            let params = SwdParams {
                patches_per_image: *patches,
                projections: *proj,
                repeats: *repeats,
                min_resolution: *min_res,
                seed: *seed,
            };
            let scores = swd_protocol(&real_batch, &fake_batch, &params)?;
            let mut lines = Vec::new();
            for level in &scores {
                // Stored raw; the conventional x1000 scale appears only here.
                report.add_result(
                    &format!("swd_{}", level.resolution),
                    MetricValue::plain(level.value),
                );
                lines.push(format!(
                    "swd_{} {:.6} (x1000)",
                    level.resolution,
                    level.value * 1000.0
                ));
            }
            (
                lines.join("\n"),
                out.out.clone().map(|p| (p, out.format.into())),
            )
        }
        Command::GanTrain {
            gen,
            gen_labels,
            val,
            val_labels,
            class_count,
            trials,
            classifier,
            report: out,
        } => {
            for path in [gen, gen_labels, val, val_labels] {
                report.add_input(path)?;
            }
            let spec = classifier.to_spec()?;
            record_classifier(&mut report, &spec, *trials);
            let gl = read_labels(gen_labels)?;
            let vl = read_labels(val_labels)?;
            let k = infer_class_count(&[&gl, &vl], *class_count)?;
            let gen_set =
                LabeledSampleSet::new(read_tensor_file(gen)?, gl, Role::Generated, k)?;
            let val_set =
                LabeledSampleSet::new(read_tensor_file(val)?, vl, Role::Validation, k)?;
            let text = probe_with_trials(&mut report, "gan_train", &spec, *trials, |s| {
                gan_train(&gen_set, &val_set, s)
            })?;
            (text, out.out.clone().map(|p| (p, out.format.into())))
        }
        Command::GanTest {
            train,
            train_labels,
            gen,
            gen_labels,
            class_count,
            trials,
            classifier,
            report: out,
        } => {
            for path in [train, train_labels, gen, gen_labels] {
                report.add_input(path)?;
            }
            let spec = classifier.to_spec()?;
            record_classifier(&mut report, &spec, *trials);
            let tl = read_labels(train_labels)?;
            let gl = read_labels(gen_labels)?;
            let k = infer_class_count(&[&tl, &gl], *class_count)?;
            let train_set = LabeledSampleSet::new(read_tensor_file(train)?, tl, Role::Train, k)?;
            let gen_set = LabeledSampleSet::new(read_tensor_file(gen)?, gl, Role::Generated, k)?;
            let text = probe_with_trials(&mut report, "gan_test", &spec, *trials, |s| {
                gan_test(&train_set, &gen_set, s)
            })?;
            (text, out.out.clone().map(|p| (p, out.format.into())))
        }
        Command::DiversitySweep {
            gen,
            gen_labels,
            val,
            val_labels,
            real,
            real_labels,
            sizes,
            trials,
            class_count,
            classifier,
            report: out,
        } => {
            for path in [gen, gen_labels, val, val_labels] {
                report.add_input(path)?;
            }
            let spec = classifier.to_spec()?;
            record_classifier(&mut report, &spec, *trials);
            report.set_parameter(
                "sizes",
                sizes
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            );
            let gl = read_labels(gen_labels)?;
            let vl = read_labels(val_labels)?;
            let real_pair = match (real, real_labels) {
                (Some(r), Some(rl)) => Some((r, rl)),
                (None, None) => None,
                _ => {
                    return Err(Error::InvalidArgument(
                        "--real and --real-labels must be given together".into(),
                    ))
                }
            };
            let rl = real_pair
                .as_ref()
                .map(|(_, rl)| read_labels(rl))
                .transpose()?;
            let mut label_views: Vec<&[i64]> = vec![&gl, &vl];
            if let Some(rl) = &rl {
                label_views.push(rl);
            }
            let k = infer_class_count(&label_views, *class_count)?;
            let gen_set = LabeledSampleSet::new(read_tensor_file(gen)?, gl, Role::Generated, k)?;
            let val_set = LabeledSampleSet::new(read_tensor_file(val)?, vl, Role::Validation, k)?;
            let real_set = match (real_pair, rl) {
                (Some((r, _)), Some(labels)) => {
                    report.add_input(r)?;
                    report.add_input(real_labels.as_ref().expect("paired"))?;
                    Some(LabeledSampleSet::new(
                        read_tensor_file(r)?,
                        labels,
                        Role::Train,
                        k,
                    )?)
                }
                _ => None,
            };
            let curve = diversity_sweep(&gen_set, &val_set, sizes, &spec, *trials, real_set.as_ref())?;
            let mut lines = Vec::new();
            for point in &curve.generated {
                let mut value = MetricValue::plain(point.mean_top1)
                    .with_param("size", point.size)
                    .with_param("trials", point.trials);
                if point.trials > 1 {
                    value = value.with_std(point.std_top1);
                }
                report.add_result(&format!("gan_train_at_{}", point.size), value);
                lines.push(format!(
                    "size {}: gan_train {:.6} +/- {:.6}",
                    point.size, point.mean_top1, point.std_top1
                ));
            }
            if let Some(real_curve) = &curve.real {
                for point in real_curve {
                    let mut value = MetricValue::plain(point.mean_top1)
                        .with_param("size", point.size)
                        .with_param("trials", point.trials);
                    if point.trials > 1 {
                        value = value.with_std(point.std_top1);
                    }
                    report.add_result(&format!("real_at_{}", point.size), value);
                    lines.push(format!(
                        "size {}: real {:.6} +/- {:.6}",
                        point.size, point.mean_top1, point.std_top1
                    ));
                }
            }
            (
                lines.join("\n"),
                out.out.clone().map(|p| (p, out.format.into())),
            )
        }
        Command::Augment {
            real,
            real_labels,
            gen,
            gen_labels,
            val,
            val_labels,
            real_sizes,
            class_count,
            classifier,
            report: out,
        } => {
            for path in [real, real_labels, gen, gen_labels, val, val_labels] {
                report.add_input(path)?;
            }
            let spec = classifier.to_spec()?;
            record_classifier(&mut report, &spec, 1);
            report.set_parameter(
                "real_sizes",
                real_sizes
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            );
            let rl = read_labels(real_labels)?;
            let gl = read_labels(gen_labels)?;
            let vl = read_labels(val_labels)?;
            let k = infer_class_count(&[&rl, &gl, &vl], *class_count)?;
            let real_set = LabeledSampleSet::new(read_tensor_file(real)?, rl, Role::Train, k)?;
            let gen_set = LabeledSampleSet::new(read_tensor_file(gen)?, gl, Role::Generated, k)?;
            let val_set = LabeledSampleSet::new(read_tensor_file(val)?, vl, Role::Validation, k)?;
            let rows = augmentation_eval(&real_set, real_sizes, &gen_set, &val_set, &spec)?;
            let mut lines = Vec::new();
            for row in &rows {
                report.add_result(
                    &format!("real_only_at_{}", row.real_size),
                    MetricValue::plain(row.real_only).with_param("size", row.real_size),
                );
                report.add_result(
                    &format!("real_plus_generated_at_{}", row.real_size),
                    MetricValue::plain(row.real_plus_generated)
                        .with_param("size", row.real_size)
                        .with_param("generated_added", gen_set.len()),
                );
                lines.push(format!(
                    "size {}: real_only {:.6} real+generated {:.6}",
                    row.real_size, row.real_only, row.real_plus_generated
                ));
            }
            (
                lines.join("\n"),
                out.out.clone().map(|p| (p, out.format.into())),
            )
        }
        Command::Corrupt {
            op,
            input,
            in_labels,
            out,
            out_labels,
            rate,
            sigma,
            classes,
            unique,
            target,
            seed,
            class_count,
            report: report_path,
            format,
        } => {
            report.add_input(input)?;
            if let Some(labels) = in_labels {
                report.add_input(labels)?;
            }
            report.set_parameter("seed", seed);
            let data = read_tensor_file(input)?;
            let n = data.shape().first().copied().unwrap_or(0);
            let labels = match in_labels {
                Some(path) => read_labels(path)?,
                None => vec![0; n],
            };
            let k = infer_class_count(&[&labels], *class_count)?;
            let set = LabeledSampleSet::new(data, labels, Role::Train, k)?;

            let require = |value: Option<f64>, flag: &str| -> Result<f64> {
                value.ok_or_else(|| {
                    Error::InvalidArgument(format!("this corruption requires {flag}"))
                })
            };
            let labels_change = matches!(
                op,
                CorruptOp::LabelConfusion | CorruptOp::ModeDrop | CorruptOp::DuplicateCap
            );
            if labels_change && out_labels.is_none() {
                return Err(Error::InvalidArgument(
                    "this corruption changes labels; --out-labels is required".into(),
                ));
            }
            let (op_name, corrupted) = match op {
                CorruptOp::SaltPepper => {
                    let rate = require(*rate, "--rate")?;
                    report.set_parameter("rate", rate);
                    ("salt_pepper", apply_salt_pepper(&set, rate, *seed)?)
                }
                CorruptOp::GaussianNoise => {
                    let sigma = require(*sigma, "--sigma")?;
                    report.set_parameter("sigma", sigma);
                    ("gaussian_noise", apply_gaussian_noise(&set, sigma, *seed)?)
                }
                CorruptOp::LabelConfusion => {
                    let rate = require(*rate, "--rate")?;
                    report.set_parameter("rate", rate);
                    ("label_confusion", confuse_labels(&set, rate, *seed)?)
                }
                CorruptOp::ModeDrop => {
                    report.set_parameter(
                        "classes",
                        classes
                            .iter()
                            .map(ToString::to_string)
                            .collect::<Vec<_>>()
                            .join(","),
                    );
                    ("mode_drop", drop_modes(&set, classes)?)
                }
                CorruptOp::DuplicateCap => {
                    let unique = unique.ok_or_else(|| {
                        Error::InvalidArgument("duplicate-cap requires --unique".into())
                    })?;
                    let target = target.ok_or_else(|| {
                        Error::InvalidArgument("duplicate-cap requires --target".into())
                    })?;
                    report.set_parameter("unique", unique);
                    report.set_parameter("target", target);
                    ("duplicate_cap", duplicate_cap(&set, unique, target, *seed)?)
                }
            };
            report.set_parameter("op", op_name);
            write_tensor_file(corrupted.data(), out)?;
            report.set_parameter("out_digest", digest_of(out)?);
            let mut text = format!(
                "{} -> {} ({} samples)",
                op_name,
                out.display(),
                corrupted.len()
            );
            if let Some(labels_path) = out_labels {
                write_tensor_file(&labels_tensor(corrupted.labels()), labels_path)?;
                report.set_parameter("out_labels_digest", digest_of(labels_path)?);
                text += &format!("\nlabels -> {}", labels_path.display());
            }
            (text, report_path.clone().map(|p| (p, (*format).into())))
        }
        Command::Synth {
            kind,
            classes,
            dim,
            sep,
            sigma,
            n_per_class,
            side,
            shift,
            noise,
            seed,
            out,
            out_labels,
            report: report_path,
            format,
        } => {
            report.set_parameter("seed", seed);
            report.set_parameter("n_per_class", n_per_class);
            let set = match kind {
                SynthKind::Mixture => {
                    report.set_parameter("kind", "mixture");
                    report.set_parameter("classes", classes);
                    report.set_parameter("dim", dim);
                    report.set_parameter("sep", *sep);
                    report.set_parameter("sigma", *sigma);
                    let spec =
                        MixtureModelSpec::axis_aligned(*classes, *dim, *sep, *sigma, *seed)?;
                    sample_mixture(&spec, *n_per_class)?
                }
                SynthKind::Digits => {
                    report.set_parameter("kind", "digits");
                    report.set_parameter("side", side);
                    report.set_parameter("shift", shift);
                    report.set_parameter("noise", *noise);
                    let spec = GlyphDigitsSpec {
                        side: *side,
                        n_per_class: *n_per_class,
                        max_shift: *shift,
                        noise_sigma: *noise,
                        seed: *seed,
                        ..GlyphDigitsSpec::default()
                    };
                    sample_glyph_digits(&spec)?
                }
            };
            write_tensor_file(set.data(), out)?;
            report.set_parameter("out_digest", digest_of(out)?);
            let mut text = format!("synth -> {} ({} samples)", out.display(), set.len());
            if let Some(labels_path) = out_labels {
                write_tensor_file(&labels_tensor(set.labels()), labels_path)?;
                report.set_parameter("out_labels_digest", digest_of(labels_path)?);
                text += &format!("\nlabels -> {}", labels_path.display());
            }
            (text, report_path.clone().map(|p| (p, (*format).into())))
        }
        Command::ReportMerge {
            reports,
            out,
            format,
        } => {
            let mut sources = Vec::with_capacity(reports.len());
            for path in reports {
                report.add_input(path)?;
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                sources.push((stem, MetricReport::read_json(path)?));
            }
            let mut merged = merge_reports(argv.to_vec(), &sources)?;
            merged.inputs.extend(report.inputs.clone());
            merged
                .parameters
                .insert("workers".into(), cli.workers.to_string());
            report = merged;
            (
                format!("merged {} reports", sources.len()),
                out.clone().map(|p| (p, (*format).into())),
            )
        }
    };

    if cli.timings {
        report.record_timing("total", started.elapsed().as_secs_f64());
    }
    Ok(Outcome {
        report,
        human,
        write_to,
    })
}

/// Full CLI pipeline: parse, run, print, write. Returns the process exit
/// code (0 success, 1 data/contract error, 2 usage error).
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if cli.workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return 1;
    }
    // First initialization wins; later in-process calls keep the pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build_global();
    match execute(&cli, argv) {
        Ok(outcome) => {
            println!("{}", outcome.human);
            if let Some((path, format)) = outcome.write_to {
                if let Err(e) = outcome.report.write(&path, format) {
                    eprintln!("error: {e}");
                    return 1;
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Exposed for tests: formats one float exactly as reports do.
pub fn canonical_float(v: f64) -> String {
    format_float(v)
}
