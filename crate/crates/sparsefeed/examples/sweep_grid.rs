//! Grid sweeps with repeated seeds: the cross product of a config template
//! and a grid file runs concurrently, one metrics file per run plus a
//! summary of final losses.
//!
//! ```bash
//! cargo run -p sparsefeed --example sweep_grid
//! ```

use sparsefeed::config::{ExperimentConfig, KSpec, Method, OutputRuleSpec, ProblemSpec};
use sparsefeed::optimizers::ZCorrection;
use sparsefeed::report::{parse_grid, sweep};

fn main() {
    let template = ExperimentConfig {
        method: Method::SSgdEf,
        problem: ProblemSpec::Quadratic {
            d: 50,
            l: 2.0,
            mu: 0.5,
            n_per_worker: 4,
            seed: 7,
            center_scale: 1.0,
        },
        workers: 8,
        k: KSpec::Ratio(0.1),
        eta: 1e-2,
        mu_hint: None,
        gamma: None,
        sigma: None,
        rounds: 2000,
        stages: 1,
        seed: 100,
        log_every: Some(200),
        repeats: 4, // four seed-distinct runs per cell
        output_rule: OutputRuleSpec::Last,
        shadow: false,
        full_batch: false,
        z_correction: ZCorrection::Combined,
    };
    // learning-rate grid times two compression ratios
    let grid = parse_grid("eta = 1e-1, 1e-2, 1e-3\nk_ratio = 0.01, 0.1\n").unwrap();
    let out = std::env::temp_dir().join("sparsefeed-sweep-example");
    let _ = std::fs::remove_dir_all(&out);
    let cells = sweep(&template, &grid, &out).unwrap();

    println!("{} cells x {} repeats -> {}", cells.len(), template.repeats, out.display());
    println!("{:>4}  {:>24}  {:>13}  {:>11}", "cell", "overrides", "mean final", "std");
    for c in &cells {
        let ov: Vec<String> = c.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "{:>4}  {:>24}  {:>13.5e}  {:>11.2e}",
            c.index,
            ov.join(" "),
            c.mean_final_loss,
            c.std_final_loss
        );
    }
    println!("summary file: {}", out.join("summary.csv").display());
}
