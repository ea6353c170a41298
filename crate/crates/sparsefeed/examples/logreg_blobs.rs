//! Dataset pipeline end to end: generate a synthetic blob classification
//! set, write it as CSV, train L2-regularized multinomial logistic
//! regression with compressed gradients, and report loss/accuracy curves
//! from the stored iterates.
//!
//! ```bash
//! cargo run -p sparsefeed --example logreg_blobs
//! ```

use sparsefeed::config::{ExperimentConfig, KSpec, Method, OutputRuleSpec, ProblemSpec};
use sparsefeed::data::{make_blobs, split_train_test, write_csv};
use sparsefeed::optimizers::ZCorrection;
use sparsefeed::report::{logreg_curves, write_metrics};
use sparsefeed::simulator::{run_experiment, SPLIT_SEED};

fn main() {
    let dir = std::env::temp_dir().join("sparsefeed-logreg-example");
    std::fs::create_dir_all(&dir).unwrap();
    let dataset = make_blobs(2000, 8, 3, 5);
    let csv = dir.join("blobs.csv");
    write_csv(&dataset, 0, &csv).unwrap();
    println!(
        "wrote {} samples, {} features, {} classes -> {}",
        dataset.len(),
        dataset.n_features(),
        dataset.classes(),
        csv.display()
    );

    let config = ExperimentConfig {
        method: Method::SSgdEf,
        problem: ProblemSpec::LogReg {
            path: csv,
            l2: 1e-4,
            label_column: Some(0),
            normalize: true,
        },
        workers: 10,
        k: KSpec::Ratio(0.25),
        eta: 0.05,
        mu_hint: None,
        gamma: None, // defaults to 0.5 * k/d
        sigma: None,
        rounds: 4000,
        stages: 1,
        seed: 42,
        log_every: Some(400),
        repeats: 1,
        output_rule: OutputRuleSpec::Last,
        shadow: false,
        full_batch: false,
        z_correction: ZCorrection::Combined,
    };
    let trace = run_experiment(&config).unwrap();
    let metrics = dir.join("metrics.csv");
    write_metrics(&trace, &metrics).unwrap();
    println!("fingerprint {:016x}, metrics -> {}", trace.config_fingerprint, metrics.display());

    // accuracy/loss curves from the stored iterates, on a seeded 80/20 split
    let mut normalized = dataset.clone();
    sparsefeed::data::normalize_features(&mut normalized.features);
    let (train, test) = split_train_test(&normalized, 0.2, SPLIT_SEED);
    let curves = logreg_curves(&trace, &train, &test, normalized.classes(), 1e-4);
    println!("{:>6}  {:>12}  {:>10}  {:>12}  {:>10}", "round", "train_loss", "train_acc", "test_loss", "test_acc");
    let by_name: std::collections::BTreeMap<&str, &Vec<(u64, f64)>> =
        curves.iter().map(|(n, pts)| (n.as_str(), pts)).collect();
    let train_loss = by_name["train_loss"];
    for i in 0..train_loss.len() {
        println!(
            "{:>6}  {:>12.5}  {:>10.4}  {:>12.5}  {:>10.4}",
            train_loss[i].0,
            train_loss[i].1,
            by_name["train_accuracy"][i].1,
            by_name["test_loss"][i].1,
            by_name["test_accuracy"][i].1
        );
    }
}
