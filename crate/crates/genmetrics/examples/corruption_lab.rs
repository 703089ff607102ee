//! The corruption operators, and what each probe sees.
//!
//! Every operator models a known generator failure: pixel corruption
//! (salt-and-pepper, additive noise), wrong conditioning (label confusion),
//! missing classes (mode dropping), and limited diversity (duplicate cap).
//! Applying them to a *perfect* generated pool turns the pool into a
//! controlled imitation of a flawed generator, which is how the probes are
//! validated without training any actual generator.
//!
//! Run with: cargo run --example corruption_lab

use genmetrics::classifier::ClassifierSpec;
use genmetrics::dataset::Role;
use genmetrics::ganeval::{gan_test, gan_train};
use genmetrics::synth::{
    apply_salt_pepper, confuse_labels, drop_modes, duplicate_cap, sample_glyph_digits,
    GlyphDigitsSpec,
};

fn main() {
    // Thin digit glyphs keep each class's evidence compact, which makes
    // pixel corruption bite; see the corruption-asymmetry acceptance check.
    let cfg = GlyphDigitsSpec {
        side: 14,
        max_shift: 2,
        noise_sigma: 10.0,
        contrast_range: (200.0, 255.0),
        thickness_range: (1, 1),
        ..GlyphDigitsSpec::default()
    };
    let fresh = |seed: u64, n: usize| {
        sample_glyph_digits(&GlyphDigitsSpec {
            n_per_class: n,
            seed,
            ..cfg.clone()
        })
        .unwrap()
    };
    let train = fresh(1, 200);
    let val = fresh(2, 100).with_role(Role::Validation);
    let clean = fresh(3, 500).with_role(Role::Generated);
    let spec = ClassifierSpec::random_forest(11);

    println!("probe accuracies against corrupted copies of a perfect pool\n");
    println!("{:<34} {:>9} {:>9}", "generated pool", "gan-train", "gan-test");
    let row = |name: &str, pool: &genmetrics::dataset::LabeledSampleSet| {
        let tr = gan_train(pool, &val, &spec).unwrap();
        let te = gan_test(&train, pool, &spec).unwrap();
        println!("{name:<34} {:>9.4} {:>9.4}", tr.top1, te.top1);
    };

    row("clean (perfect generator)", &clean);
    // Pixel corruption: samples leave the real manifold. The real-trained
    // classifier rejects them (gan-test falls); training on many corrupted
    // samples still recovers the signal (gan-train holds).
    row("20% salt-and-pepper", &apply_salt_pepper(&clean, 0.2, 4).unwrap());
    // Wrong conditioning: images are fine but a third of the labels lie.
    // Both probes suffer — gan-train learns from lies, gan-test grades
    // against them.
    row("30% label confusion", &confuse_labels(&clean, 0.3, 55).unwrap());
    // Mode dropping: surviving samples are perfect (gan-test holds), but
    // the trained classifier never saw half the classes (gan-train caps
    // near half the label space).
    row("classes 5-9 dropped", &drop_modes(&clean, &[5, 6, 7, 8, 9]).unwrap());
    // Duplicate cap: every sample individually perfect (gan-test holds),
    // only 20 distinct ones per class (gan-train starves).
    row("200 uniques, padded to 5000", &duplicate_cap(&clean, 200, 5000, 6).unwrap());
}
