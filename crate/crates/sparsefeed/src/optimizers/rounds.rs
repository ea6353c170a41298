//! Synchronous round transitions.
//!
//! Each round: every worker draws its gradient, corrects it with its scaled
//! cumulative compression error, compresses, and updates its memory; the
//! densified messages are averaged in worker-index order and drive the
//! solution update. Worker randomness comes from `(t, p, channel)`-keyed
//! streams, so evaluation order cannot change the result.

use crate::compression::{rand_comp, rand_comp_with_replacement, top_k, CompressedMessage};
use crate::error::{Error, Result};
use crate::objectives::{sample_index, Problem};
use crate::optimizers::{
    one_iter_nag, CompressorKind, GradientMode, HyperParams, RoundOptions, SgdEfState,
    SnagEfState, ZCorrection,
};
use crate::rng::{Channel, Streams};
use crate::vecops::{add_scaled, mean_vectors};

fn compress(
    x: &[f64],
    k: usize,
    kind: CompressorKind,
    rng: &mut impl rand::Rng,
) -> Result<CompressedMessage> {
    match kind {
        CompressorKind::RandUniform => rand_comp(x, k, rng),
        CompressorKind::RandWithReplacement => rand_comp_with_replacement(x, k, rng),
        CompressorKind::TopK => top_k(x, k),
        CompressorKind::Identity => Ok(CompressedMessage {
            dim: x.len(),
            k: x.len(),
            entries: x.iter().cloned().enumerate().collect(),
        }),
    }
}

fn worker_gradient(
    problem: &Problem,
    p: usize,
    x: &[f64],
    t: u64,
    mode: GradientMode,
    streams: &Streams,
) -> Vec<f64> {
    match mode {
        GradientMode::Stochastic => {
            let mut rng = streams.at(t, p, Channel::Sample);
            let i = sample_index(problem, p, &mut rng);
            problem.sample_grad(p, i, x)
        }
        GradientMode::FullBatch => problem.worker_grad(p, x),
    }
}

/// What one S-SGD-EF round surfaces to the simulator.
#[derive(Debug, Clone)]
pub struct SgdRoundInfo {
    /// Per-worker messages, worker-index order.
    pub messages: Vec<CompressedMessage>,
    /// Uncompressed averaged gradient `(1/P) Σ_p ∇f_{i,p}(x_{t-1})`,
    /// consumed by the shadow trajectory.
    pub mean_raw_grad: Vec<f64>,
    /// Raw scalar payload slots sent this round.
    pub comm_entries: u64,
}

/// One synchronous S-SGD-EF round, workers in natural order.
pub fn s_sgd_ef_round(
    problem: &Problem,
    state: &mut SgdEfState,
    hp: &HyperParams,
    opts: &RoundOptions,
    streams: &Streams,
) -> Result<SgdRoundInfo> {
    let order: Vec<usize> = (0..state.workers()).collect();
    s_sgd_ef_round_ordered(problem, state, hp, opts, streams, &order)
}

/// S-SGD-EF round with an explicit worker evaluation order. The trace is
/// independent of `order` because streams are `(t, p)`-keyed and the
/// averages combine in worker-index order.
pub fn s_sgd_ef_round_ordered(
    problem: &Problem,
    state: &mut SgdEfState,
    hp: &HyperParams,
    opts: &RoundOptions,
    streams: &Streams,
    order: &[usize],
) -> Result<SgdRoundInfo> {
    let workers = state.workers();
    debug_assert_eq!(problem.workers, workers);
    hp.validate(problem.dim)?;
    let t = state.t + 1;

    let mut grads: Vec<Option<Vec<f64>>> = vec![None; workers];
    let mut msgs: Vec<Option<CompressedMessage>> = vec![None; workers];
    for &p in order {
        let grad = worker_gradient(problem, p, &state.x, t, opts.gradient_mode, streams);
        // corrected gradient: g = grad + (gamma/eta) m_{t-1,p}
        let mut corrected = grad.clone();
        add_scaled(&mut corrected, hp.gamma / hp.eta, &state.memories[p]);
        let mut subset_rng = streams.at(t, p, Channel::SubsetY);
        let msg = compress(&corrected, hp.k, opts.compressor, &mut subset_rng)?;
        // cumulative error: m_{t,p} = m_{t-1,p} + eta (grad - densified message)
        let dense = msg.densify();
        for ((m, g), v) in state.memories[p].iter_mut().zip(&grad).zip(&dense) {
            *m += hp.eta * (g - v);
        }
        grads[p] = Some(grad);
        msgs[p] = Some(msg);
    }
    let grads: Vec<Vec<f64>> = grads.into_iter().map(Option::unwrap).collect();
    let msgs: Vec<CompressedMessage> = msgs.into_iter().map(Option::unwrap).collect();

    // broadcast + average, then step: x_t = x_{t-1} - eta (1/P) sum ḡ
    let dense_msgs: Vec<Vec<f64>> = msgs.iter().map(|m| m.densify()).collect();
    let mean_msg = mean_vectors(&dense_msgs);
    let mean_raw_grad = mean_vectors(&grads);
    for (xj, g) in state.x.iter_mut().zip(&mean_msg) {
        *xj -= hp.eta * g;
    }
    // maintained aggregate: m_t = m_{t-1} + eta (mean grad - mean message)
    for ((m, g), v) in state.mem_aggregate.iter_mut().zip(&mean_raw_grad).zip(&mean_msg) {
        *m += hp.eta * (g - v);
    }
    state.t = t;

    let comm_entries = msgs.iter().map(|m| m.wire_entries() as u64).sum();
    Ok(SgdRoundInfo { messages: msgs, mean_raw_grad, comm_entries })
}

/// What one S-SNAG-EF round surfaces to the simulator.
#[derive(Debug, Clone)]
pub struct SnagRoundInfo {
    pub messages_y: Vec<CompressedMessage>,
    pub messages_z: Vec<CompressedMessage>,
    pub mean_raw_grad: Vec<f64>,
    pub comm_entries: u64,
}

/// One synchronous S-SNAG-EF round, workers in natural order.
pub fn s_snag_ef_round(
    problem: &Problem,
    state: &mut SnagEfState,
    hp: &HyperParams,
    opts: &RoundOptions,
    streams: &Streams,
) -> Result<SnagRoundInfo> {
    let order: Vec<usize> = (0..state.workers()).collect();
    s_snag_ef_round_ordered(problem, state, hp, opts, streams, &order)
}

/// S-SNAG-EF round with an explicit worker evaluation order.
///
/// Two messages per worker, `floor(k/2)` coordinates for the y-estimator and
/// `ceil(k/2)` for the z-estimator, independent subsets. The three memory
/// vectors and the three solution vectors go through the same three-sequence
/// transition with their corresponding deltas.
pub fn s_snag_ef_round_ordered(
    problem: &Problem,
    state: &mut SnagEfState,
    hp: &HyperParams,
    opts: &RoundOptions,
    streams: &Streams,
    order: &[usize],
) -> Result<SnagRoundInfo> {
    let workers = state.workers();
    debug_assert_eq!(problem.workers, workers);
    hp.validate(problem.dim)?;
    if !(hp.lambda > 0.0) {
        return Err(Error::Invalid("s_snag_ef: lambda must be > 0".into()));
    }
    let compressing = opts.compressor != CompressorKind::Identity;
    if compressing && hp.k < 2 {
        return Err(Error::Invalid(
            "s_snag_ef: k must be >= 2 (two messages per worker)".into(),
        ));
    }
    let (k_y, k_z) = (hp.k / 2, hp.k - hp.k / 2);
    let t = state.t + 1;

    let mut grads: Vec<Option<Vec<f64>>> = vec![None; workers];
    let mut msgs_y: Vec<Option<CompressedMessage>> = vec![None; workers];
    let mut msgs_z: Vec<Option<CompressedMessage>> = vec![None; workers];
    for &p in order {
        let grad = worker_gradient(problem, p, &state.x, t, opts.gradient_mode, streams);
        // corrections scaled by the inverse of each sequence's step size
        let mut g_y = grad.clone();
        add_scaled(&mut g_y, hp.gamma / hp.eta, &state.mem[p]);
        let mut g_z = grad.clone();
        let beta_mem = match opts.z_correction {
            ZCorrection::Combined => &state.mem[p],
            ZCorrection::Conservative => &state.mem_y[p],
        };
        let scale_z = hp.gamma / hp.lambda;
        for ((g, mz), mb) in g_z.iter_mut().zip(&state.mem_z[p]).zip(beta_mem) {
            *g += scale_z * ((1.0 - hp.beta) * mz + hp.beta * mb);
        }
        // two independent compressions
        let mut rng_y = streams.at(t, p, Channel::SubsetY);
        let mut rng_z = streams.at(t, p, Channel::SubsetZ);
        let msg_y = compress(&g_y, k_y, opts.compressor, &mut rng_y)?;
        let msg_z = compress(&g_z, k_z, opts.compressor, &mut rng_z)?;
        // memories through the same transition,
        // dy = eta (ḡ_y - grad), dz = lambda (ḡ_z - grad)
        let dense_y = msg_y.densify();
        let dense_z = msg_z.densify();
        let dy: Vec<f64> = dense_y.iter().zip(&grad).map(|(v, g)| hp.eta * (v - g)).collect();
        let dz: Vec<f64> = dense_z.iter().zip(&grad).map(|(v, g)| hp.lambda * (v - g)).collect();
        // the conservative sequence restarts from the combined one each
        // round (y-slot receives the combined memory), mirroring the
        // solution update below
        let (m, my, mz) = one_iter_nag(
            &state.mem[p],
            &state.mem[p],
            &state.mem_z[p],
            &dy,
            &dz,
            hp.alpha,
            hp.beta,
        );
        state.mem[p] = m;
        state.mem_y[p] = my;
        state.mem_z[p] = mz;
        grads[p] = Some(grad);
        msgs_y[p] = Some(msg_y);
        msgs_z[p] = Some(msg_z);
    }
    let grads: Vec<Vec<f64>> = grads.into_iter().map(Option::unwrap).collect();
    let msgs_y: Vec<CompressedMessage> = msgs_y.into_iter().map(Option::unwrap).collect();
    let msgs_z: Vec<CompressedMessage> = msgs_z.into_iter().map(Option::unwrap).collect();

    // solutions through the same transition with averaged messages
    let dense_y: Vec<Vec<f64>> = msgs_y.iter().map(|m| m.densify()).collect();
    let dense_z: Vec<Vec<f64>> = msgs_z.iter().map(|m| m.densify()).collect();
    let mean_msg_y = mean_vectors(&dense_y);
    let mean_msg_z = mean_vectors(&dense_z);
    let mean_raw_grad = mean_vectors(&grads);
    let dy: Vec<f64> = mean_msg_y.iter().map(|v| hp.eta * v).collect();
    let dz: Vec<f64> = mean_msg_z.iter().map(|v| hp.lambda * v).collect();
    // y_t = x_{t-1} - eta ḡ_y: the conservative step leaves from the
    // combined iterate, which is what gives the accelerated rate
    let (x, y, z) = one_iter_nag(&state.x, &state.x, &state.z, &dy, &dz, hp.alpha, hp.beta);
    state.x = x;
    state.y = y;
    state.z = z;

    // maintained aggregates follow the same recursion as the worker memories
    let agg_dy: Vec<f64> = mean_msg_y
        .iter()
        .zip(&mean_raw_grad)
        .map(|(v, g)| hp.eta * (v - g))
        .collect();
    let agg_dz: Vec<f64> = mean_msg_z
        .iter()
        .zip(&mean_raw_grad)
        .map(|(v, g)| hp.lambda * (v - g))
        .collect();
    let (am, amy, amz) = one_iter_nag(
        &state.agg_mem,
        &state.agg_mem,
        &state.agg_mem_z,
        &agg_dy,
        &agg_dz,
        hp.alpha,
        hp.beta,
    );
    state.agg_mem = am;
    state.agg_mem_y = amy;
    state.agg_mem_z = amz;
    state.t = t;

    let comm_entries = msgs_y
        .iter()
        .chain(msgs_z.iter())
        .map(|m| m.wire_entries() as u64)
        .sum();
    Ok(SnagRoundInfo { messages_y: msgs_y, messages_z: msgs_z, mean_raw_grad, comm_entries })
}

/// Deterministic three-sequence NAG with full gradients. Returns the x
/// trajectory including the start, `t_max + 1` entries.
pub fn run_nag(
    problem: &Problem,
    x0: &[f64],
    eta: f64,
    lambda: f64,
    alpha: f64,
    beta: f64,
    t_max: u64,
) -> Vec<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut z = x0.to_vec();
    let mut traj = Vec::with_capacity(t_max as usize + 1);
    traj.push(x.clone());
    for _ in 0..t_max {
        let grad = problem.full_grad(&x);
        let dy: Vec<f64> = grad.iter().map(|g| eta * g).collect();
        let dz: Vec<f64> = grad.iter().map(|g| lambda * g).collect();
        let (nx, _, nz) = one_iter_nag(&x, &x, &z, &dy, &dz, alpha, beta);
        x = nx;
        z = nz;
        traj.push(x.clone());
    }
    traj
}
