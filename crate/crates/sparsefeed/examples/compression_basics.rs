//! The two sparsifiers side by side: unbiased random compression keeps a
//! uniformly random coordinate subset and rescales by d/k, so averaging many
//! draws recovers the input; top-k keeps the largest magnitudes verbatim and
//! is biased.
//!
//! ```bash
//! cargo run -p sparsefeed --example compression_basics
//! ```

use sparsefeed::compression::{rand_comp, top_k};
use sparsefeed::rng::{Channel, Streams};

fn main() {
    let x = vec![3.0, -5.0, 1.0, 2.0, 0.5, -0.25];
    let (d, k) = (x.len(), 2);
    let streams = Streams::new(7);

    let mut rng = streams.at(0, 0, Channel::SubsetY);
    let msg = rand_comp(&x, k, &mut rng).unwrap();
    println!("input x = {x:?}");
    println!(
        "rand_comp(x, {k}) kept {} of {d} slots (scale d/k = {}):",
        msg.wire_entries(),
        d as f64 / k as f64
    );
    print!("{}", msg.dump_tsv());

    let tk = top_k(&x, k).unwrap();
    println!("top_k(x, {k}) keeps the largest magnitudes verbatim:");
    print!("{}", tk.dump_tsv());

    // empirical mean of many random-compression draws approaches x;
    // top-k is deterministic, so dropped coordinates never recover
    let trials = 200_000;
    let mut mean = vec![0.0; d];
    for t in 0..trials {
        let mut rng = streams.at(t, 0, Channel::SubsetY);
        for (j, v) in rand_comp(&x, k, &mut rng).unwrap().entries {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= trials as f64;
    }
    println!("mean of {trials} rand_comp draws = {mean:.3?}  (unbiased)");
    println!("single top_k densified        = {:.3?}  (biased)", tk.densify());

    // exact second moment: E||densify - x||^2 = (d/k - 1) ||x||^2
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    let mut err = 0.0;
    for t in 0..trials {
        let mut rng = streams.at(t, 1, Channel::SubsetY);
        let dense = rand_comp(&x, k, &mut rng).unwrap().densify();
        err += dense.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    println!(
        "empirical E||err||^2 = {:.4}  vs identity (d/k - 1)||x||^2 = {:.4}",
        err / trials as f64,
        (d as f64 / k as f64 - 1.0) * norm_sq
    );
}
