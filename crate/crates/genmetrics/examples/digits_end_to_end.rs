//! A full evaluation pipeline, file formats and report included.
//!
//! A synthetic digit corpus stands in for a real dataset: the "generator"
//! under evaluation is a fresh draw from the same distribution plus mild
//! pixel noise. The pipeline writes every array to the toolkit's tensor
//! container, loads them back, runs both probes plus the distribution
//! metrics, and records everything in a canonical JSON report whose bytes
//! are reproducible run to run.
//!
//! Run with: cargo run --example digits_end_to_end

use genmetrics::classifier::ClassifierSpec;
use genmetrics::dataset::{LabeledSampleSet, Role};
use genmetrics::frechet::{estimate_moments, frechet_gaussian_distance, CovarianceEstimator};
use genmetrics::ganeval::{baseline_accuracy, gan_test, gan_train};
use genmetrics::report::{MetricReport, MetricValue, ReportFormat};
use genmetrics::swd::{image_batch, swd_protocol, SwdParams};
use genmetrics::synth::{apply_gaussian_noise, sample_glyph_digits, GlyphDigitsSpec};
use genmetrics::tensor::{read_tensor_file, write_tensor_file, Tensor};
use ndarray::ArrayD;
use std::path::Path;

fn save(set: &LabeledSampleSet, dir: &Path, name: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let data_path = dir.join(format!("{name}.gevt"));
    let labels_path = dir.join(format!("{name}_labels.gevt"));
    write_tensor_file(set.data(), &data_path).unwrap();
    let labels = ArrayD::from_shape_vec(
        ndarray::IxDyn(&[set.labels().len()]),
        set.labels().to_vec(),
    )
    .unwrap();
    write_tensor_file(&Tensor::I64(labels), &labels_path).unwrap();
    (data_path, labels_path)
}

fn load(data: &Path, labels: &Path, role: Role) -> LabeledSampleSet {
    let tensor = read_tensor_file(data).unwrap();
    let labels = match read_tensor_file(labels).unwrap() {
        Tensor::I64(a) => a.iter().copied().collect(),
        _ => panic!("labels must be int64"),
    };
    LabeledSampleSet::new(tensor, labels, role, 10).unwrap()
}

fn main() {
    let dir = tempfile::TempDir::new().unwrap();
    let fresh = |seed: u64, n: usize| {
        sample_glyph_digits(&GlyphDigitsSpec {
            n_per_class: n,
            seed,
            ..GlyphDigitsSpec::default()
        })
        .unwrap()
    };

    // "Real" corpus and the generator's output, round-tripped through files
    // exactly as the CLI would consume them.
    let (train_p, train_lp) = save(&fresh(1, 200), dir.path(), "train");
    let (val_p, val_lp) = save(&fresh(2, 100), dir.path(), "val");
    let generated = apply_gaussian_noise(&fresh(3, 200), 12.0, 9).unwrap();
    let (gen_p, gen_lp) = save(&generated, dir.path(), "generated");

    let train = load(&train_p, &train_lp, Role::Train);
    let val = load(&val_p, &val_lp, Role::Validation);
    let generated = load(&gen_p, &gen_lp, Role::Generated);

    let mut report = MetricReport::new(
        ["digits_end_to_end", "--seed", "1"].map(String::from).to_vec(),
    );
    for path in [&train_p, &train_lp, &val_p, &val_lp, &gen_p, &gen_lp] {
        report.add_input(path).unwrap();
    }
    report.set_parameter("classifier_seed", 11);

    // Classifier probes.
    let spec = ClassifierSpec::random_forest(11);
    let base = baseline_accuracy(&train, &val, &spec).unwrap();
    let tr = gan_train(&generated, &val, &spec).unwrap();
    let te = gan_test(&train, &generated, &spec).unwrap();
    report.add_result("baseline_top1", MetricValue::plain(base.top1));
    report.add_result("gan_train_top1", MetricValue::plain(tr.top1));
    report.add_result("gan_test_top1", MetricValue::plain(te.top1));

    // Distribution metrics on the same files.
    let m_real = estimate_moments(&train.features_f32(), CovarianceEstimator::Unbiased).unwrap();
    let m_gen = estimate_moments(&generated.features_f32(), CovarianceEstimator::Unbiased).unwrap();
    let fid = frechet_gaussian_distance(&m_real, &m_gen).unwrap();
    report.add_result("frechet_distance", MetricValue::plain(fid).with_param("embedding", "raw_pixels"));

    let swd = swd_protocol(
        &image_batch(train.data()).unwrap(),
        &image_batch(generated.data()).unwrap(),
        &SwdParams {
            patches_per_image: 64,
            projections: 128,
            repeats: 2,
            min_resolution: 14,
            seed: 0,
        },
    )
    .unwrap();
    for level in &swd {
        report.add_result(
            &format!("swd_{}", level.resolution),
            MetricValue::plain(level.value),
        );
    }

    println!("baseline {:.4}   gan-train {:.4}   gan-test {:.4}", base.top1, tr.top1, te.top1);
    println!("raw-pixel Frechet distance {fid:.4}");
    for level in &swd {
        println!("swd at {:>2}px: {:.3} (x1000)", level.resolution, level.value * 1e3);
    }

    // The canonical report: sorted keys, 17-significant-digit floats, input
    // digests — identical bytes on every rerun of this example.
    let json_path = dir.path().join("report.json");
    report.write(&json_path, ReportFormat::Json).unwrap();
    report
        .write(&dir.path().join("report.csv"), ReportFormat::Csv)
        .unwrap();
    let round_trip = MetricReport::read_json(&json_path).unwrap();
    assert_eq!(round_trip.results, report.results, "report round trip");
    println!("\nreport written and read back losslessly; first lines:");
    for line in report.to_json().lines().take(4) {
        println!("  {line}");
    }
}
