//! Statistical and exact verifiers for the properties the methods rest on:
//! compressor unbiasedness and second moments, subset uniformity,
//! cross-worker memory orthogonality, memory boundedness and its 1/P
//! scaling, and the equivalence of the three-sequence and momentum forms of
//! the accelerated update.
//!
//! Every check is deterministic given its seed and emits a machine-readable
//! [`CheckReport`]. Statistical thresholds sit at 4 standard errors so a
//! full suite run false-fails with probability well under 1e-3; the Monte
//! Carlo second-moment check uses 3 as specified for it.

use crate::compression::{rand_comp, top_k};
use crate::error::Result;
use crate::objectives::{make_quadratic, Problem};
use crate::optimizers::{
    run_nag, s_sgd_ef_round, s_snag_ef_round, schedule_accel_params, CompressorKind, HyperParams,
    RoundOptions, SgdEfState, SnagEfState,
};
use crate::rng::{Channel, Streams};
use crate::vecops::{dot, norm_sq, rel_vec_gap};

/// Outcome of one verifier.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    /// The quantity compared against `threshold` (meaning is per-check).
    pub statistic: f64,
    pub threshold: f64,
    pub n_trials: usize,
    /// Human-readable context; always non-empty on failure.
    pub details: String,
}

impl CheckReport {
    fn new(
        name: impl Into<String>,
        pass: bool,
        statistic: f64,
        threshold: f64,
        n_trials: usize,
        details: impl Into<String>,
    ) -> Self {
        let mut details = details.into();
        if !pass && details.is_empty() {
            details = format!("statistic {statistic} vs threshold {threshold}");
        }
        Self { name: name.into(), pass, statistic, threshold, n_trials, details }
    }
}

/// Componentwise unbiasedness of a compressor on a fixed dense input:
/// z-scores of the empirical mean against the input, pass when
/// `max |z| < 4`. The top-k compressor is biased and fails this on any
/// input with distinct magnitudes.
pub fn check_unbiasedness(
    kind: CompressorKind,
    k: usize,
    d: usize,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    let x: Vec<f64> = (0..d).map(|j| 1.0 + j as f64 / d as f64).collect();
    let streams = Streams::new(seed);
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for trial in 0..trials {
        let mut rng = streams.at(trial as u64, 0, Channel::SubsetY);
        let msg = match kind {
            CompressorKind::RandUniform => rand_comp(&x, k, &mut rng)?,
            CompressorKind::RandWithReplacement => {
                crate::compression::rand_comp_with_replacement(&x, k, &mut rng)?
            }
            CompressorKind::TopK => top_k(&x, k)?,
            CompressorKind::Identity => rand_comp(&x, d, &mut rng)?,
        };
        let dense = msg.densify();
        for j in 0..d {
            sum[j] += dense[j];
            sum_sq[j] += dense[j] * dense[j];
        }
    }
    let n = trials as f64;
    let mut max_z: f64 = 0.0;
    for j in 0..d {
        let mean = sum[j] / n;
        let var = (sum_sq[j] / n - mean * mean).max(0.0);
        let se = (var / n).sqrt().max(1e-300);
        max_z = max_z.max(((mean - x[j]) / se).abs());
    }
    let pass = max_z < 4.0;
    Ok(CheckReport::new(
        format!("unbiasedness[{kind:?} k={k} d={d}]"),
        pass,
        max_z,
        4.0,
        trials,
        if pass {
            String::new()
        } else {
            format!("componentwise max |z| = {max_z:.2} at {trials} trials")
        },
    ))
}

fn all_subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..d {
            cur.push(j);
            rec(j + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, k, &mut Vec::new(), &mut out);
    out
}

/// Every size-k subset appears with the uniform frequency, within 4
/// standard errors over `trials` draws.
pub fn check_subset_uniformity(d: usize, k: usize, trials: usize, seed: u64) -> Result<CheckReport> {
    let subsets = all_subsets(d, k);
    let x: Vec<f64> = vec![1.0; d];
    let streams = Streams::new(seed);
    let mut counts = vec![0usize; subsets.len()];
    for trial in 0..trials {
        let mut rng = streams.at(trial as u64, 0, Channel::SubsetY);
        let msg = rand_comp(&x, k, &mut rng)?;
        let drawn: Vec<usize> = msg.entries.iter().map(|e| e.0).collect();
        let idx = subsets.iter().position(|s| *s == drawn).expect("subset enumerable");
        counts[idx] += 1;
    }
    let p = 1.0 / subsets.len() as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let max_z = counts
        .iter()
        .map(|c| ((*c as f64 / trials as f64 - p) / se).abs())
        .fold(0.0, f64::max);
    let pass = max_z < 4.0;
    Ok(CheckReport::new(
        format!("subset_uniformity[d={d} k={k}]"),
        pass,
        max_z,
        4.0,
        trials,
        if pass {
            String::new()
        } else {
            format!("subset frequency max |z| = {max_z:.2} over {} subsets", subsets.len())
        },
    ))
}

/// Exact second moment `E||densify(rand_comp(x, k)) − x||² = (d/k − 1)||x||²`:
/// exhaustive subset enumeration for `d <= 6` (tolerance 1e-12 relative),
/// Monte Carlo within 3 standard errors otherwise.
pub fn check_second_moment(k: usize, d: usize, trials: usize, seed: u64) -> Result<CheckReport> {
    let x: Vec<f64> = (0..d).map(|j| ((j * 31) % 17) as f64 / 5.0 - 1.2).collect();
    let target = (d as f64 / k as f64 - 1.0) * norm_sq(&x);
    if d <= 6 {
        let subsets = all_subsets(d, k);
        let scale = d as f64 / k as f64;
        let mean: f64 = subsets
            .iter()
            .map(|s| {
                (0..d)
                    .map(|j| {
                        let v = if s.contains(&j) { scale * x[j] } else { 0.0 };
                        (v - x[j]) * (v - x[j])
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            / subsets.len() as f64;
        let rel = (mean - target).abs() / (1.0 + target.abs());
        let pass = rel <= 1e-12;
        return Ok(CheckReport::new(
            format!("second_moment_exact[d={d} k={k}]"),
            pass,
            rel,
            1e-12,
            subsets.len(),
            if pass {
                String::new()
            } else {
                format!("enumerated {mean} vs identity {target}")
            },
        ));
    }
    let streams = Streams::new(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for trial in 0..trials {
        let mut rng = streams.at(trial as u64, 0, Channel::SubsetY);
        let msg = rand_comp(&x, k, &mut rng)?;
        // ||err||² from the k kept entries: kept coords contribute
        // (scale-1)² x², dropped coords x²
        let kept_sq: f64 = msg.entries.iter().map(|&(j, _)| x[j] * x[j]).sum();
        let scale = d as f64 / k as f64;
        let err = (scale - 1.0) * (scale - 1.0) * kept_sq + (norm_sq(&x) - kept_sq);
        sum += err;
        sum_sq += err * err;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let se = (var / n).sqrt().max(1e-300);
    let z = ((mean - target) / se).abs();
    let pass = z < 3.0;
    Ok(CheckReport::new(
        format!("second_moment_mc[d={d} k={k}]"),
        pass,
        z,
        3.0,
        trials,
        if pass {
            String::new()
        } else {
            format!("MC mean {mean} vs identity {target}, |z| = {z:.2}")
        },
    ))
}

/// Which method a memory check runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryMethod {
    SgdEf,
    SnagEf,
}

fn sgd_memories_after(
    problem: &Problem,
    hp: &HyperParams,
    seed: u64,
    at_rounds: &[u64],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let streams = Streams::new(seed);
    let opts = RoundOptions::default();
    let mut state = SgdEfState::new(
        problem.optimum.as_ref().map(|o| o.point.clone()).unwrap_or(vec![0.0; problem.dim]),
        problem.workers,
    );
    let t_max = *at_rounds.iter().max().unwrap();
    let mut snapshots = Vec::new();
    if at_rounds.contains(&0) {
        snapshots.push(state.memories.clone());
    }
    for t in 1..=t_max {
        s_sgd_ef_round(problem, &mut state, hp, &opts, &streams)?;
        if at_rounds.contains(&t) {
            snapshots.push(state.memories.clone());
        }
    }
    Ok(snapshots)
}

#[allow(clippy::type_complexity)]
fn snag_memories_after(
    problem: &Problem,
    hp: &HyperParams,
    seed: u64,
    at_rounds: &[u64],
) -> Result<Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)>> {
    let streams = Streams::new(seed);
    let opts = RoundOptions::default();
    let mut state = SnagEfState::new(
        problem.optimum.as_ref().map(|o| o.point.clone()).unwrap_or(vec![0.0; problem.dim]),
        problem.workers,
    );
    let t_max = *at_rounds.iter().max().unwrap();
    let mut snapshots = Vec::new();
    if at_rounds.contains(&0) {
        snapshots.push((state.mem.clone(), state.mem_y.clone(), state.mem_z.clone()));
    }
    for t in 1..=t_max {
        s_snag_ef_round(problem, &mut state, hp, &opts, &streams)?;
        if at_rounds.contains(&t) {
            snapshots.push((state.mem.clone(), state.mem_y.clone(), state.mem_z.clone()));
        }
    }
    Ok(snapshots)
}

/// Cross-worker memory orthogonality `E⟨m_{t,p1}, m_{t,p2}⟩ = 0` at the given
/// rounds, averaged over independent seeded runs; pass when every tested
/// mean is within 4 standard errors of zero. For the accelerated method all
/// three memory channels are tested.
pub fn check_memory_orthogonality(
    method: MemoryMethod,
    problem: &Problem,
    hp: &HyperParams,
    at_rounds: &[u64],
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    assert!(problem.workers >= 2, "orthogonality needs at least two workers");
    let pair = (0usize, 1usize);
    // samples[snapshot][channel] -> per-trial inner products
    let n_snapshots = at_rounds.len();
    let channels = match method {
        MemoryMethod::SgdEf => 1,
        MemoryMethod::SnagEf => 3,
    };
    let mut samples = vec![vec![Vec::with_capacity(trials); channels]; n_snapshots];
    for trial in 0..trials {
        let run_seed = seed.wrapping_add(trial as u64);
        match method {
            MemoryMethod::SgdEf => {
                let snaps = sgd_memories_after(problem, hp, run_seed, at_rounds)?;
                for (si, mems) in snaps.iter().enumerate() {
                    samples[si][0].push(dot(&mems[pair.0], &mems[pair.1]));
                }
            }
            MemoryMethod::SnagEf => {
                let snaps = snag_memories_after(problem, hp, run_seed, at_rounds)?;
                for (si, (m, my, mz)) in snaps.iter().enumerate() {
                    samples[si][0].push(dot(&m[pair.0], &m[pair.1]));
                    samples[si][1].push(dot(&my[pair.0], &my[pair.1]));
                    samples[si][2].push(dot(&mz[pair.0], &mz[pair.1]));
                }
            }
        }
    }
    let mut max_z: f64 = 0.0;
    let mut worst = String::new();
    for (si, by_channel) in samples.iter().enumerate() {
        for (ci, vals) in by_channel.iter().enumerate() {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let se = (var / n).sqrt().max(1e-300);
            let z = (mean / se).abs();
            if z > max_z {
                max_z = z;
                worst = format!(
                    "t={} channel={} mean={mean:.3e} se={se:.3e}",
                    at_rounds[si],
                    ["m", "m_y", "m_z"][ci]
                );
            }
        }
    }
    let pass = max_z < 4.0;
    Ok(CheckReport::new(
        format!("memory_orthogonality[{method:?} t={at_rounds:?}]"),
        pass,
        max_z,
        4.0,
        trials,
        if pass { String::new() } else { format!("max |z| = {max_z:.2} ({worst})") },
    ))
}

fn mean_agg_mem_sq_per_round(
    method: MemoryMethod,
    problem: &Problem,
    hp: &HyperParams,
    rounds: u64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let opts = RoundOptions::default();
    let x0 = problem.optimum.as_ref().map(|o| o.point.clone()).unwrap_or(vec![0.0; problem.dim]);
    let mut acc = vec![0.0; rounds as usize];
    for trial in 0..trials {
        let streams = Streams::new(seed.wrapping_add(trial as u64));
        match method {
            MemoryMethod::SgdEf => {
                let mut state = SgdEfState::new(x0.clone(), problem.workers);
                for t in 0..rounds {
                    s_sgd_ef_round(problem, &mut state, hp, &opts, &streams)?;
                    acc[t as usize] += norm_sq(&state.mem_aggregate);
                }
            }
            MemoryMethod::SnagEf => {
                let mut state = SnagEfState::new(x0.clone(), problem.workers);
                for t in 0..rounds {
                    s_snag_ef_round(problem, &mut state, hp, &opts, &streams)?;
                    acc[t as usize] += norm_sq(&state.agg_mem);
                }
            }
        }
    }
    for a in &mut acc {
        *a /= trials as f64;
    }
    Ok(acc)
}

fn window_mean(xs: &[f64], lo_frac: f64, hi_frac: f64) -> f64 {
    let n = xs.len();
    let lo = ((n as f64) * lo_frac) as usize;
    let hi = (((n as f64) * hi_frac) as usize).max(lo + 1).min(n);
    xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
}

/// Memory boundedness: the trial-averaged `||m_t||²` trace plateaus (no
/// divergence) and, run at P = 1 and P = 16 on the same objective and
/// hyperparameters, the plateau scales like 1/P (accepted inside the loose
/// 2x bracket `[1/32, 1/8]`). For the accelerated method, the schedule must
/// satisfy the `β ≤ γ³/α²` precondition or the check fails up front.
pub fn check_memory_bound(
    method: MemoryMethod,
    d: usize,
    k: usize,
    eta: f64,
    rounds: u64,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    let l = 2.0;
    let mu = 0.5;
    let n_small = 4;
    let big_p = 16;
    // flat center generation: same seed and total sample count give the
    // same objective under both worker groupings
    let p1 = make_quadratic(d, l, mu, n_small * big_p, 1, seed ^ 0x9d)?;
    let p16 = make_quadratic(d, l, mu, n_small, big_p, seed ^ 0x9d)?;
    let gamma = 0.5 * k as f64 / d as f64;
    let hp = match method {
        MemoryMethod::SgdEf => HyperParams::sgd(eta, gamma, k, rounds),
        MemoryMethod::SnagEf => {
            let mut hp = HyperParams::accelerated(eta, mu, gamma, k, rounds)?;
            hp.k = k;
            // precondition of the accelerated memory bound
            let bound = gamma.powi(3) / (hp.alpha * hp.alpha);
            if hp.beta > bound {
                return Ok(CheckReport::new(
                    format!("memory_bound[{method:?}]"),
                    false,
                    hp.beta,
                    bound,
                    0,
                    format!(
                        "precondition beta <= gamma^3/alpha^2 violated: beta={} bound={bound}",
                        hp.beta
                    ),
                ));
            }
            hp
        }
    };
    let trace1 = mean_agg_mem_sq_per_round(method, &p1, &hp, rounds, trials, seed)?;
    let trace16 = mean_agg_mem_sq_per_round(method, &p16, &hp, rounds, trials, seed ^ 0x55)?;

    // (a) plateau: late window comparable to mid window for both runs
    let growth1 = window_mean(&trace1, 0.75, 1.0) / window_mean(&trace1, 0.25, 0.5);
    let growth16 = window_mean(&trace16, 0.75, 1.0) / window_mean(&trace16, 0.25, 0.5);
    // (b) 1/P scaling of the plateau level
    let plateau1 = window_mean(&trace1, 0.5, 1.0);
    let plateau16 = window_mean(&trace16, 0.5, 1.0);
    let ratio = plateau16 / plateau1;
    let in_bracket = (1.0 / 32.0..=1.0 / 8.0).contains(&ratio);
    let plateaued = growth1 < 1.5 && growth16 < 1.5;
    let pass = in_bracket && plateaued;
    Ok(CheckReport::new(
        format!("memory_bound[{method:?} d={d} k={k}]"),
        pass,
        ratio,
        1.0 / 8.0,
        trials,
        if pass {
            format!(
                "plateau ratio {ratio:.4} in [1/32, 1/8]; growth factors {growth1:.2}/{growth16:.2}"
            )
        } else {
            format!(
                "plateau ratio {ratio:.4} (bracket [{:.4}, {:.4}]), growth factors {growth1:.2}/{growth16:.2}",
                1.0 / 32.0,
                1.0 / 8.0
            )
        },
    ))
}

/// Negative control: with γ = 0 the memory accumulates raw residuals and
/// grows without plateau. Pass means growth was observed (the feedback term
/// is what keeps the memory bounded).
pub fn check_memory_diverges_without_feedback(
    d: usize,
    k: usize,
    eta: f64,
    rounds: u64,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    let problem = make_quadratic(d, 2.0, 0.5, 4, 4, seed ^ 0xa1)?;
    let hp = HyperParams::sgd(eta, 0.0, k, rounds);
    let trace = mean_agg_mem_sq_per_round(MemoryMethod::SgdEf, &problem, &hp, rounds, trials, seed)?;
    let growth = window_mean(&trace, 0.75, 1.0) / window_mean(&trace, 0.25, 0.5);
    let pass = growth > 2.0;
    Ok(CheckReport::new(
        "memory_diverges_without_feedback",
        pass,
        growth,
        2.0,
        trials,
        format!("late/mid window ratio {growth:.2} (unbounded growth expected at gamma=0)"),
    ))
}

/// Equivalence of the three-sequence accelerated update and its induced
/// momentum form. The three-sequence recursion with constant (η, λ, α, β)
/// collapses to
/// `x_t = x_{t-1} + m (x_{t-1} − x_{t-2}) − η̂ ∇F(x_{t-1}) + m η ∇F(x_{t-2})`
/// with momentum `m = (1−α)(1−β)` and combined step `η̂ = (1−α)η + αλ`,
/// started from `x_1 = x_0 − η̂ ∇F(x_0)`. Pass when the trajectories agree
/// to 1e-8 relative over all T rounds.
pub fn check_nag_equivalence(
    problem: &Problem,
    eta: f64,
    mu: f64,
    t_max: u64,
) -> Result<CheckReport> {
    let (lambda, alpha, beta) = schedule_accel_params(eta, mu)?;
    let x0 = vec![0.8; problem.dim];
    let three_seq = run_nag(problem, &x0, eta, lambda, alpha, beta, t_max);

    let m = (1.0 - alpha) * (1.0 - beta);
    let eta_hat = (1.0 - alpha) * eta + alpha * lambda;
    let c = m * eta;

    let mut momentum = Vec::with_capacity(t_max as usize + 1);
    momentum.push(x0.clone());
    if t_max >= 1 {
        let g0 = problem.full_grad(&x0);
        let x1: Vec<f64> = x0.iter().zip(&g0).map(|(x, g)| x - eta_hat * g).collect();
        momentum.push(x1);
    }
    for _ in 2..=t_max {
        let n = momentum.len();
        let (prev, prev2) = (&momentum[n - 1], &momentum[n - 2]);
        let g_prev = problem.full_grad(prev);
        let g_prev2 = problem.full_grad(prev2);
        let next: Vec<f64> = (0..problem.dim)
            .map(|j| {
                prev[j] + m * (prev[j] - prev2[j]) - eta_hat * g_prev[j] + c * g_prev2[j]
            })
            .collect();
        momentum.push(next);
    }

    let max_gap = three_seq
        .iter()
        .zip(&momentum)
        .map(|(a, b)| rel_vec_gap(a, b))
        .fold(0.0, f64::max);
    let pass = max_gap <= 1e-8;
    Ok(CheckReport::new(
        format!("nag_momentum_equivalence[T={t_max}]"),
        pass,
        max_gap,
        1e-8,
        t_max as usize,
        if pass {
            format!("m={m:.6}, eta_hat={eta_hat:.6}, c={c:.6}")
        } else {
            format!("max relative gap {max_gap:.3e}")
        },
    ))
}

/// Suite depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteProfile {
    Fast,
    Full,
}

/// Run the whole diagnostic suite. Negative controls are reported as their
/// own checks whose pass means the underlying property check failed as it
/// must.
pub fn run_suite(profile: SuiteProfile, seed: u64) -> Result<Vec<CheckReport>> {
    let (mc_trials, orth_trials, bound_trials, bound_rounds) = match profile {
        SuiteProfile::Fast => (20_000, 400, 60, 150),
        SuiteProfile::Full => (100_000, 2_000, 500, 200),
    };
    let mut reports = Vec::new();

    reports.push(check_unbiasedness(CompressorKind::RandUniform, 2, 5, mc_trials, seed)?);
    reports.push(check_unbiasedness(
        CompressorKind::RandWithReplacement,
        2,
        5,
        mc_trials,
        seed ^ 1,
    )?);
    // negative control: top-k is biased and must fail
    let topk = check_unbiasedness(CompressorKind::TopK, 1, 3, mc_trials.min(20_000), seed ^ 2)?;
    reports.push(CheckReport::new(
        "unbiasedness_negative_control[top_k]",
        !topk.pass,
        topk.statistic,
        topk.threshold,
        topk.n_trials,
        "top-k must fail the unbiasedness test".to_string(),
    ));

    reports.push(check_subset_uniformity(5, 2, mc_trials, seed ^ 3)?);

    for d in 1..=6usize {
        for k in 1..=d {
            reports.push(check_second_moment(k, d, 0, seed)?);
        }
    }
    reports.push(check_second_moment(10, 1000, mc_trials, seed ^ 4)?);

    let problem = make_quadratic(4, 2.0, 0.5, 3, 2, 7)?;
    let hp_sgd = HyperParams::sgd(0.05, 0.5 * 2.0 / 4.0, 2, 20);
    reports.push(check_memory_orthogonality(
        MemoryMethod::SgdEf,
        &problem,
        &hp_sgd,
        &[1, 5, 20],
        orth_trials,
        seed ^ 5,
    )?);
    let hp_snag = HyperParams::accelerated(0.05, 0.5, 0.5 * 2.0 / 4.0, 2, 20)?;
    reports.push(check_memory_orthogonality(
        MemoryMethod::SnagEf,
        &problem,
        &hp_snag,
        &[1, 5, 20],
        orth_trials,
        seed ^ 6,
    )?);

    reports.push(check_memory_bound(
        MemoryMethod::SgdEf,
        50,
        5,
        0.01,
        bound_rounds,
        bound_trials,
        seed ^ 7,
    )?);
    // the accelerated memories equilibrate more slowly, and their clean 1/P
    // scaling needs the iterates' own stationary noise to stay small
    // relative to the gradient variance, hence the smaller step
    reports.push(check_memory_bound(
        MemoryMethod::SnagEf,
        50,
        5,
        1e-3,
        2 * bound_rounds,
        bound_trials,
        seed ^ 9,
    )?);
    reports.push(check_memory_diverges_without_feedback(
        50,
        5,
        0.01,
        bound_rounds,
        bound_trials.min(100),
        seed ^ 8,
    )?);

    let nag_problem = make_quadratic(2, 2.0, 0.5, 2, 2, 11)?;
    reports.push(check_nag_equivalence(&nag_problem, 0.1, 0.5, 100)?);

    Ok(reports)
}

/// Render reports as an aligned text table.
pub fn format_report_table(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    let name_w = reports.iter().map(|r| r.name.len()).max().unwrap_or(4).max(5);
    out.push_str(&format!(
        "{:<name_w$}  {:>6}  {:>12}  {:>12}  {:>8}  details\n",
        "check", "result", "statistic", "threshold", "trials"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<name_w$}  {:>6}  {:>12.4e}  {:>12.4e}  {:>8}  {}\n",
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            r.statistic,
            r.threshold,
            r.n_trials,
            r.details
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbiasedness_identity_compressor_is_exact() {
        // k=d: zero deviation, passes trivially
        let r = check_unbiasedness(CompressorKind::RandUniform, 4, 4, 200, 0).unwrap();
        assert!(r.pass);
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn unbiasedness_randcomp_passes_topk_fails() {
        let r = check_unbiasedness(CompressorKind::RandUniform, 2, 5, 30_000, 1).unwrap();
        assert!(r.pass, "{}", r.details);
        let r = check_unbiasedness(CompressorKind::TopK, 1, 3, 5_000, 2).unwrap();
        assert!(!r.pass);
        assert!(!r.details.is_empty());
    }

    #[test]
    fn second_moment_exact_and_mc() {
        // d=4, k=4: zero error exactly
        let r = check_second_moment(4, 4, 0, 0).unwrap();
        assert!(r.pass);
        assert_eq!(r.statistic, 0.0);
        // d=4, k=2 enumerated against the identity
        let r = check_second_moment(2, 4, 0, 0).unwrap();
        assert!(r.pass, "{}", r.details);
        // d=100, k=10 Monte-Carlo
        let r = check_second_moment(10, 100, 20_000, 3).unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn subset_uniformity_small_case() {
        let r = check_subset_uniformity(5, 2, 20_000, 4).unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn orthogonality_zero_at_t_zero_and_passes_later() {
        let problem = make_quadratic(4, 2.0, 0.5, 3, 2, 7).unwrap();
        let hp = HyperParams::sgd(0.05, 0.25, 2, 5);
        let r = check_memory_orthogonality(
            MemoryMethod::SgdEf,
            &problem,
            &hp,
            &[0],
            50,
            5,
        )
        .unwrap();
        assert!(r.pass);
        assert_eq!(r.statistic, 0.0); // memories start at zero

        let r = check_memory_orthogonality(
            MemoryMethod::SgdEf,
            &problem,
            &hp,
            &[1, 5],
            400,
            6,
        )
        .unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn orthogonality_snag_channels() {
        let problem = make_quadratic(4, 2.0, 0.5, 3, 2, 7).unwrap();
        let hp = HyperParams::accelerated(0.05, 0.5, 0.25, 2, 5).unwrap();
        let r = check_memory_orthogonality(
            MemoryMethod::SnagEf,
            &problem,
            &hp,
            &[1, 5],
            400,
            7,
        )
        .unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn memory_bound_scaling_and_negative_control() {
        let r = check_memory_bound(MemoryMethod::SgdEf, 30, 3, 0.01, 120, 80, 8).unwrap();
        assert!(r.pass, "{}", r.details);
        let r = check_memory_diverges_without_feedback(30, 3, 0.01, 120, 40, 9).unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn memory_bound_accelerated_method() {
        // the schedule at this (eta, mu) satisfies beta <= gamma^3/alpha^2
        // and the accelerated memories plateau with the same 1/P scaling
        let r = check_memory_bound(MemoryMethod::SnagEf, 30, 3, 1e-3, 400, 80, 10).unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn nag_equivalence_on_quadratic() {
        let problem = make_quadratic(2, 2.0, 0.5, 2, 2, 11).unwrap();
        let r = check_nag_equivalence(&problem, 0.1, 0.5, 100).unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn nag_equivalence_one_step() {
        // T=1: both forms take the single mixed step x0 - eta_hat grad
        let problem = make_quadratic(3, 2.0, 0.5, 2, 2, 13).unwrap();
        let r = check_nag_equivalence(&problem, 0.2, 0.5, 1).unwrap();
        assert!(r.pass, "{}", r.details);
        // same step up to reassociation: (1-a)y1 + a z1 vs x0 - eta_hat g
        assert!(r.statistic < 1e-14);
    }

    #[test]
    fn nag_equivalence_tiny_eta_frozen() {
        let problem = make_quadratic(3, 2.0, 0.5, 2, 2, 13).unwrap();
        let r = check_nag_equivalence(&problem, 1e-14, 0.5, 20).unwrap();
        assert!(r.pass);
        assert!(r.statistic < 1e-10);
    }

    #[test]
    fn fail_reports_carry_details() {
        let r = check_unbiasedness(CompressorKind::TopK, 1, 3, 5_000, 2).unwrap();
        assert!(!r.pass && !r.details.is_empty());
    }

    #[test]
    fn fast_suite_all_pass() {
        let reports = run_suite(SuiteProfile::Fast, 12345).unwrap();
        let table = format_report_table(&reports);
        for r in &reports {
            assert!(r.pass, "{} failed:\n{table}", r.name);
        }
        // determinism
        let again = run_suite(SuiteProfile::Fast, 12345).unwrap();
        for (a, b) in reports.iter().zip(&again) {
            assert_eq!(a.statistic, b.statistic, "{}", a.name);
        }
    }
}
