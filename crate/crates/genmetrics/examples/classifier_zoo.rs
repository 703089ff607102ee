//! The three desk-scale classifiers behind every probe.
//!
//! All probes accept a `ClassifierSpec`, so the choice of learner is a
//! parameter of the experiment, not of the toolkit: a CART random forest
//! (robust default), a linear softmax (fast, weak), and a small MLP. All
//! three train deterministically from their seed.
//!
//! Run with: cargo run --example classifier_zoo

use genmetrics::classifier::{
    top_k_accuracy, train_classifier, ClassifierKind, ClassifierSpec, ForestParams, MlpParams,
    SgdParams,
};
use genmetrics::dataset::Role;
use genmetrics::synth::{sample_mixture, MixtureModelSpec};

fn main() {
    let mut model = MixtureModelSpec::axis_aligned(10, 16, 2.5, 1.0, 0).unwrap();
    let train = {
        model.seed = 1;
        sample_mixture(&model, 300).unwrap()
    };
    let val = {
        model.seed = 2;
        sample_mixture(&model, 100).unwrap().with_role(Role::Validation)
    };

    let specs = vec![
        ClassifierSpec {
            kind: ClassifierKind::RandomForest(ForestParams {
                tree_count: 100,
                ..ForestParams::default()
            }),
            seed: 7,
        },
        ClassifierSpec {
            kind: ClassifierKind::LinearSoftmax(SgdParams::default()),
            seed: 7,
        },
        ClassifierSpec {
            kind: ClassifierKind::Mlp(MlpParams {
                hidden: vec![64],
                sgd: SgdParams::default(),
            }),
            seed: 7,
        },
    ];

    println!("10-class mixture, 3000 train / 1000 validation samples\n");
    println!("{:<16} {:>7} {:>7}   deterministic?", "classifier", "top-1", "top-5");
    for spec in &specs {
        let model_a = train_classifier(&train, spec).unwrap();
        let model_b = train_classifier(&train, spec).unwrap();
        let probs_a = model_a.predict_probabilities(&val).unwrap();
        let probs_b = model_b.predict_probabilities(&val).unwrap();
        let top1 = top_k_accuracy(&probs_a, val.labels(), 1).unwrap();
        let top5 = top_k_accuracy(&probs_a, val.labels(), 5).unwrap();
        let identical = probs_a.as_array() == probs_b.as_array();
        println!(
            "{:<16} {:>7.4} {:>7.4}   {}",
            spec.kind.name(),
            top1,
            top5,
            if identical { "bit-identical retrain" } else { "MISMATCH" }
        );
    }

    // Specs serialize to a flat key=value block, so a report can state
    // exactly which learner produced a number.
    let block = specs[0].to_kv_block();
    println!("\nspec round-trip block:\n{block}");
    let parsed = ClassifierSpec::from_kv_block(&block).unwrap();
    println!("parses back to: {}", parsed.kind.name());
}
