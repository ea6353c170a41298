//! Output-selection rules: the reported iterate can be the near-final one,
//! a geometrically weighted random draw (weight (1 - eta*mu)^{-t}, favoring
//! late rounds), or a uniform draw — matching how the different convergence
//! regimes state their guarantees.
//!
//! ```bash
//! cargo run -p sparsefeed --example output_selection
//! ```

use sparsefeed::config::Method;
use sparsefeed::objectives::make_quadratic;
use sparsefeed::optimizers::{
    select_output, CompressorKind, GradientMode, HyperParams, OutputRule, RoundOptions,
    ZCorrection,
};
use sparsefeed::rng::Streams;
use sparsefeed::simulator::{run_method, ResolvedRun};

fn main() {
    let problem = make_quadratic(20, 2.0, 0.5, 3, 4, 7).unwrap();
    let (eta, mu) = (0.05, 0.5);
    let plan = ResolvedRun {
        hp: HyperParams::sgd(eta, 0.1, 4, 50),
        opts: RoundOptions {
            compressor: CompressorKind::RandUniform,
            gradient_mode: GradientMode::Stochastic,
            z_correction: ZCorrection::Combined,
        },
        shadow: false,
        log_every: 1,
        fingerprint: 0,
        seed: 9,
    };
    let trace = run_method(Method::SSgdEf, &problem, &[0.0; 20], &plan).unwrap();

    let streams = Streams::new(9);
    for (name, rule) in [
        ("last", OutputRule::Last),
        ("geometric", OutputRule::Geometric { eta, mu }),
        ("uniform", OutputRule::Uniform),
    ] {
        let mut rng = streams.run_level(2);
        let (t, x) = select_output(&trace, rule, &mut rng).unwrap();
        println!(
            "{name:>9}: round {t:>3}, F(x) = {:.6}",
            problem.value_at(&x)
        );
    }

    // the geometric rule concentrates on late rounds: sample it many times
    let mut counts = vec![0usize; 50];
    for i in 0..10_000 {
        let mut rng = streams.at(i, 0, sparsefeed::rng::Channel::Sample);
        let (t, _) =
            select_output(&trace, OutputRule::Geometric { eta, mu }, &mut rng).unwrap();
        counts[t as usize] += 1;
    }
    let late: usize = counts[40..].iter().sum();
    println!("geometric rule picked the last 10 rounds {:.1}% of the time", late as f64 / 100.0);
}
