//! Communication accounting: raw scalar slots are P * min(k, d) per round
//! (the accelerated method's two k/2 messages sum to the same k), and the
//! capped counter reflects that a node never needs more than d aggregated
//! slots.
//!
//! ```bash
//! cargo run -p sparsefeed --example communication_budget
//! ```

use sparsefeed::config::Method;
use sparsefeed::objectives::make_quadratic;
use sparsefeed::optimizers::{CompressorKind, GradientMode, HyperParams, RoundOptions, ZCorrection};
use sparsefeed::simulator::{comm_cost_per_round, run_method, ResolvedRun};

fn main() {
    let (d, p) = (100usize, 10usize);
    println!("closed-form per-round cost at d={d}, P={p}:");
    println!("{:>14}  {:>4}  {:>8}  {:>8}", "method", "k", "raw", "capped");
    for (method, k) in [
        (Method::ParallelSgd, d),
        (Method::SSgdEf, 1),
        (Method::SSgdEf, 10),
        (Method::SSnagEf, 10),
        (Method::SSgdEf, d),
    ] {
        let (raw, capped) = comm_cost_per_round(method, k, d, p);
        println!("{:>14}  {:>4}  {:>8}  {:>8}", method.name(), k, raw, capped);
    }

    // the meter in a real run counts actual message entries and matches the
    // closed form exactly
    let problem = make_quadratic(20, 2.0, 0.5, 3, 4, 7).unwrap();
    let rounds = 25u64;
    let k = 5usize;
    let run = |method: Method, compressor: CompressorKind, hp: HyperParams| {
        run_method(
            method,
            &problem,
            &[0.0; 20],
            &ResolvedRun {
                hp,
                opts: RoundOptions {
                    compressor,
                    gradient_mode: GradientMode::Stochastic,
                    z_correction: ZCorrection::Combined,
                },
                shadow: false,
                log_every: 5,
                fingerprint: 0,
                seed: 1,
            },
        )
        .unwrap()
    };
    let ef = run(
        Method::SSgdEf,
        CompressorKind::RandUniform,
        HyperParams::sgd(0.02, 0.125, k, rounds),
    );
    let snag = run(
        Method::SSnagEf,
        CompressorKind::RandUniform,
        HyperParams::accelerated(0.02, 0.5, 0.125, k, rounds).unwrap(),
    );
    println!(
        "\nmetered totals over {rounds} rounds at k={k}, P=4, d=20 (T*P*min(k,d) = {}):",
        rounds * 4 * k as u64
    );
    println!("  s_sgd_ef : raw {}", ef.final_record().comm_raw_cum);
    println!("  s_snag_ef: raw {} (floor(k/2) + ceil(k/2) split)", snag.final_record().comm_raw_cum);
}
