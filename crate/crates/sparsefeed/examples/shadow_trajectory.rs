//! The shadow-trajectory identity: the aggregate cumulative compression
//! error equals, exactly, the gap between the real iterate and a
//! hypothetical trajectory driven by the uncompressed averaged gradients.
//! Running with `shadow` enabled asserts this every round; any violation
//! aborts the run.
//!
//! ```bash
//! cargo run -p sparsefeed --example shadow_trajectory
//! ```

use sparsefeed::config::Method;
use sparsefeed::objectives::make_quadratic;
use sparsefeed::optimizers::{CompressorKind, GradientMode, HyperParams, RoundOptions, ZCorrection};
use sparsefeed::simulator::{run_method, ResolvedRun};

fn main() {
    let problem = make_quadratic(50, 2.0, 0.5, 4, 8, 7).unwrap();
    let x0 = vec![0.0; 50];
    for (name, method, hp) in [
        ("s_sgd_ef", Method::SSgdEf, HyperParams::sgd(0.02, 0.05, 5, 1000)),
        (
            "s_snag_ef",
            Method::SSnagEf,
            HyperParams::accelerated(0.02, 0.5, 0.05, 5, 1000).unwrap(),
        ),
    ] {
        let plan = ResolvedRun {
            hp,
            opts: RoundOptions {
                compressor: CompressorKind::RandUniform,
                gradient_mode: GradientMode::Stochastic,
                z_correction: ZCorrection::Combined,
            },
            shadow: true, // assert real - shadow == memory, every round
            log_every: 100,
            fingerprint: 0,
            seed: 7,
        };
        match run_method(method, &problem, &x0, &plan) {
            Ok(trace) => {
                println!("{name}: identity held for all {} rounds", trace.rounds);
                println!("  aggregate memory norm^2 along the way:");
                for rec in &trace.records {
                    println!("    t={:>5}  ||m||^2 = {:.4e}", rec.t, rec.mem_norm_sq);
                }
            }
            Err(e) => println!("{name}: {e}"),
        }
    }
}
