//! Synchronous pseudo-distributed run orchestration: the round loop, metric
//! logging, communication-cost metering, the optional shadow (uncompressed)
//! trajectory, and the staged driver for the recursively regularized method.

use crate::config::{ExperimentConfig, Method, ProblemSpec};
use crate::data;
use crate::error::{Error, Result};
use crate::objectives::{make_logreg, make_nonconvex, make_quadratic_scaled, regularize, Problem};
use crate::optimizers::{
    one_iter_nag, s_sgd_ef_round, s_snag_ef_round, schedule_accel_params, CompressorKind,
    GradientMode, HyperParams, RoundOptions, SgdEfState, SnagEfState,
};
use crate::rng::Streams;
use crate::trace::{RoundRecord, StageRecord, Trace};
use crate::vecops::{add_scaled, norm_sq, sub};

/// Tolerance of the real-minus-shadow identity; it is exact algebra, so only
/// floating-point drift is admissible.
const SHADOW_REL_TOL: f64 = 1e-9;

/// Tolerance of maintained-vs-recomputed aggregate memory.
const AGGREGATE_ABS_TOL: f64 = 1e-12;

/// Fixed seed of the train/test split used for accuracy reporting.
pub const SPLIT_SEED: u64 = 0x5eed_0002;

/// Closed-form per-round communication cost: `(raw, capped)` scalar slots.
/// Raw is `P * min(k, d)` (the accelerated method's two k/2 messages sum to
/// the same k); capped reflects that a node never needs more than `d`
/// aggregated slots.
pub fn comm_cost_per_round(method: Method, k: usize, d: usize, workers: usize) -> (u64, u64) {
    let per_worker = match method {
        Method::ParallelSgd | Method::Snag => d,
        _ => k.min(d),
    };
    let raw = (workers * per_worker) as u64;
    (raw, raw.min(d as u64))
}

/// Execution plan resolved from a config against a concrete problem.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub hp: HyperParams,
    pub opts: RoundOptions,
    pub shadow: bool,
    pub log_every: u64,
    pub fingerprint: u64,
    pub seed: u64,
}

/// Build the problem a config names (loading datasets where needed).
pub fn build_problem(spec: &ProblemSpec, workers: usize) -> Result<Problem> {
    match spec {
        ProblemSpec::Quadratic { d, l, mu, n_per_worker, seed, center_scale } => {
            make_quadratic_scaled(*d, *l, *mu, *n_per_worker, workers, *seed, *center_scale)
        }
        ProblemSpec::LogReg { path, l2, label_column, normalize } => {
            let mut dataset = if path.extension().and_then(|e| e.to_str()) == Some("csv") {
                data::load_csv(path, label_column.unwrap_or(0))?
            } else {
                data::load_libsvm(path)?
            };
            if *normalize {
                data::normalize_features(&mut dataset.features);
            }
            make_logreg(dataset.features, dataset.labels, *l2, workers)
        }
        ProblemSpec::Nonconvex { d, n_per_worker, seed } => {
            make_nonconvex(*d, *n_per_worker, workers, *seed)
        }
    }
}

/// Resolve hyperparameters and round options for a config on a problem.
pub fn resolve_run(config: &ExperimentConfig, problem: &Problem) -> Result<ResolvedRun> {
    config.validate()?;
    let d = problem.dim;
    // non-compressing methods put the whole vector on the wire
    let full_wire = matches!(config.method, Method::ParallelSgd | Method::Snag);
    let k = if full_wire { d } else { config.k.resolve(d, config.min_k())? };
    let gamma = match config.method {
        Method::NaiveSparse => 0.0,
        _ => config.effective_gamma(k, d),
    };
    let (lambda, alpha, beta) = if config.method.is_accelerated() {
        match config.method {
            Method::RegSSnagEf => {
                // each stage re-derives its schedule from the regularized
                // problem's strong convexity
                (0.0, 0.0, 0.0)
            }
            _ => schedule_accel_params(config.eta, config.mu_hint.unwrap())?,
        }
    } else {
        (0.0, 0.0, 0.0)
    };
    let hp = HyperParams {
        eta: config.eta,
        lambda,
        alpha,
        beta,
        gamma,
        k,
        mu_hint: config.mu_hint.unwrap_or(0.0),
        sigma: config.sigma.unwrap_or(0.0),
        rounds: config.rounds,
        stages: config.stages,
    };
    let opts = RoundOptions {
        compressor: match config.method {
            Method::ParallelSgd | Method::Snag => CompressorKind::Identity,
            Method::TopkEf => CompressorKind::TopK,
            _ => CompressorKind::RandUniform,
        },
        gradient_mode: if config.full_batch {
            GradientMode::FullBatch
        } else {
            GradientMode::Stochastic
        },
        z_correction: config.z_correction,
    };
    Ok(ResolvedRun {
        hp,
        opts,
        shadow: config.shadow,
        log_every: config.effective_log_every(),
        fingerprint: config.fingerprint(),
        seed: config.seed,
    })
}

/// Run a configured experiment from the zero vector. Deterministic given the
/// config and seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Trace> {
    let problem = build_problem(&config.problem, config.workers)?;
    let run = resolve_run(config, &problem)?;
    let x0 = vec![0.0; problem.dim];
    run_method(config.method, &problem, &x0, &run)
}

/// Run a method with explicit start and resolved settings.
pub fn run_method(
    method: Method,
    problem: &Problem,
    x0: &[f64],
    run: &ResolvedRun,
) -> Result<Trace> {
    match method {
        Method::ParallelSgd | Method::NaiveSparse | Method::TopkEf | Method::SSgdEf => {
            run_sgd_family(problem, x0, run)
        }
        Method::Snag | Method::SSnagEf => run_snag_family(problem, x0, run),
        Method::RegSSnagEf => reg_s_snag_ef(problem, x0, run),
    }
}

struct TraceBuilder {
    records: Vec<RoundRecord>,
    stored: Vec<(u64, Vec<f64>)>,
    stages: Vec<StageRecord>,
    log_every: u64,
    t_final: u64,
    comm_raw_cum: u64,
    comm_capped_cum: u64,
    dim: usize,
}

impl TraceBuilder {
    fn new(problem: &Problem, x0: &[f64], log_every: u64, t_final: u64) -> Self {
        let mut b = Self {
            records: Vec::new(),
            stored: Vec::new(),
            stages: Vec::new(),
            log_every: log_every.max(1),
            t_final,
            comm_raw_cum: 0,
            comm_capped_cum: 0,
            dim: problem.dim,
        };
        b.write_record(problem, 0, x0, 0.0, 0);
        b
    }

    fn write_record(
        &mut self,
        problem: &Problem,
        t: u64,
        x: &[f64],
        mem_norm_sq: f64,
        comm_round: u64,
    ) {
        let grad = problem.full_grad(x);
        self.records.push(RoundRecord {
            t,
            loss: problem.value_at(x),
            grad_norm_sq: norm_sq(&grad),
            mem_norm_sq,
            comm_entries_round: comm_round,
            comm_raw_cum: self.comm_raw_cum,
            comm_capped_cum: self.comm_capped_cum,
        });
        self.stored.push((t, x.to_vec()));
    }

    /// Account one executed round and log it when the cadence (or the final
    /// window) says so.
    fn after_round(&mut self, problem: &Problem, t: u64, x: &[f64], mem_norm_sq: f64, comm: u64) {
        self.comm_raw_cum += comm;
        self.comm_capped_cum += comm.min(self.dim as u64);
        if t % self.log_every == 0 || t == self.t_final {
            self.write_record(problem, t, x, mem_norm_sq, comm);
        } else if t + 1 == self.t_final {
            // final window: keep x_{T-1} selectable even off-cadence
            self.stored.push((t, x.to_vec()));
        }
    }

    fn finish(self, fingerprint: u64, seed: u64) -> Trace {
        Trace {
            records: self.records,
            stored_iterates: self.stored,
            stages: self.stages,
            config_fingerprint: fingerprint,
            seed,
            rounds: self.t_final,
            selected_stage: None,
        }
    }
}

fn check_shadow(
    t: u64,
    pairs: &[(&str, &[f64], &[f64], &[f64])], // (name, memory, real, shadow)
) -> Result<()> {
    for (name, mem, real, shadow) in pairs {
        let gap: f64 = mem
            .iter()
            .zip(real.iter().zip(shadow.iter()))
            .map(|(m, (r, s))| {
                let diff = m - (r - s);
                diff * diff
            })
            .sum::<f64>()
            .sqrt();
        let scale = 1.0f64
            .max(norm_sq(mem).sqrt())
            .max(norm_sq(real).sqrt())
            .max(norm_sq(shadow).sqrt());
        if gap > SHADOW_REL_TOL * scale {
            return Err(Error::ShadowIdentity {
                round: t,
                detail: format!(
                    "{name}: ||m - (real - shadow)|| = {gap:e} exceeds {SHADOW_REL_TOL:e} * {scale:e}"
                ),
            });
        }
    }
    Ok(())
}

fn check_aggregate(t: u64, maintained: &[f64], recomputed: &[f64]) {
    let gap = norm_sq(&sub(maintained, recomputed)).sqrt();
    assert!(
        gap <= AGGREGATE_ABS_TOL * (1.0 + norm_sq(recomputed).sqrt()),
        "maintained aggregate memory drifted from worker memories at round {t}: {gap:e}"
    );
}

fn run_sgd_family(problem: &Problem, x0: &[f64], run: &ResolvedRun) -> Result<Trace> {
    let streams = Streams::new(run.seed);
    let mut state = SgdEfState::new(x0.to_vec(), problem.workers);
    let mut shadow_x = run.shadow.then(|| x0.to_vec());
    let mut builder = TraceBuilder::new(problem, x0, run.log_every, run.hp.rounds);
    for t in 1..=run.hp.rounds {
        let info = s_sgd_ef_round(problem, &mut state, &run.hp, &run.opts, &streams)?;
        if let Some(sx) = &mut shadow_x {
            // shadow consumes the uncompressed averaged gradient evaluated
            // at the real iterate
            add_scaled(sx, -run.hp.eta, &info.mean_raw_grad);
            check_shadow(t, &[("m", &state.mem_aggregate, &state.x, sx)])?;
        }
        if t % run.log_every == 0 || t == run.hp.rounds {
            check_aggregate(t, &state.mem_aggregate, &state.recomputed_aggregate());
        }
        builder.after_round(problem, t, &state.x, norm_sq(&state.mem_aggregate), info.comm_entries);
    }
    Ok(builder.finish(run.fingerprint, run.seed))
}

fn run_snag_family(problem: &Problem, x0: &[f64], run: &ResolvedRun) -> Result<Trace> {
    let streams = Streams::new(run.seed);
    let mut state = SnagEfState::new(x0.to_vec(), problem.workers);
    let mut builder = TraceBuilder::new(problem, x0, run.log_every, run.hp.rounds);
    let mut shadow = run.shadow.then(|| (x0.to_vec(), x0.to_vec(), x0.to_vec()));
    run_snag_rounds(problem, problem, &mut state, run, &streams, &mut builder, &mut shadow, run.hp.rounds)?;
    Ok(builder.finish(run.fingerprint, run.seed))
}

/// Advance a SNAG-family state by `rounds` rounds, logging into `builder`.
/// `step_problem` drives the updates; logged losses and gradients are
/// evaluated on `eval_problem` (they differ for the staged method, whose
/// rounds run on the regularized stage objective).
#[allow(clippy::too_many_arguments)]
fn run_snag_rounds(
    step_problem: &Problem,
    eval_problem: &Problem,
    state: &mut SnagEfState,
    run: &ResolvedRun,
    streams: &Streams,
    builder: &mut TraceBuilder,
    shadow: &mut Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    rounds: u64,
) -> Result<()> {
    let hp = &run.hp;
    for _ in 0..rounds {
        let info = s_snag_ef_round(step_problem, state, hp, &run.opts, streams)?;
        let t = state.t;
        if let Some((sx, sy, sz)) = shadow {
            let dy: Vec<f64> = info.mean_raw_grad.iter().map(|g| hp.eta * g).collect();
            let dz: Vec<f64> = info.mean_raw_grad.iter().map(|g| hp.lambda * g).collect();
            let (nx, ny, nz) = one_iter_nag(sx, sx, sz, &dy, &dz, hp.alpha, hp.beta);
            *sx = nx;
            *sy = ny;
            *sz = nz;
            check_shadow(
                t,
                &[
                    ("m", &state.agg_mem, &state.x, sx),
                    ("m_y", &state.agg_mem_y, &state.y, sy),
                    ("m_z", &state.agg_mem_z, &state.z, sz),
                ],
            )?;
        }
        if t % run.log_every == 0 || t == builder.t_final {
            check_aggregate(t, &state.agg_mem, &crate::vecops::mean_vectors(&state.mem));
            check_aggregate(t, &state.agg_mem_y, &crate::vecops::mean_vectors(&state.mem_y));
            check_aggregate(t, &state.agg_mem_z, &crate::vecops::mean_vectors(&state.mem_z));
        }
        builder.after_round(eval_problem, t, &state.x, norm_sq(&state.agg_mem), info.comm_entries);
    }
    Ok(())
}

/// Recursively regularized accelerated method: S stages, each minimizing
/// `F + σ‖x − x_{s-1}‖²` with a fresh error-feedback state warm-started at
/// `x_{s-1}`. Per-stage gradients of the original objective are recorded,
/// and the reported stage is drawn uniformly (the full trace is retained).
/// `σ = 0` collapses a single stage to one plain accelerated run.
pub fn reg_s_snag_ef(problem: &Problem, x0: &[f64], run: &ResolvedRun) -> Result<Trace> {
    let hp = &run.hp;
    if hp.stages == 0 {
        return Err(Error::Invalid("reg_s_snag_ef: stages must be >= 1".into()));
    }
    if hp.sigma < 0.0 {
        return Err(Error::Invalid("reg_s_snag_ef: sigma must be >= 0".into()));
    }
    let streams = Streams::new(run.seed);
    let t_total = hp.stages * hp.rounds;
    let mut builder = TraceBuilder::new(problem, x0, run.log_every, t_total);
    let mut current = x0.to_vec();
    let mut global_t = 0u64;
    for s in 1..=hp.stages {
        let staged = regularize(problem, hp.sigma, &current)?;
        let mu_inner = staged.strong_convexity;
        let (lambda, alpha, beta) = schedule_accel_params(hp.eta, mu_inner)?;
        let stage_run = ResolvedRun {
            hp: HyperParams {
                lambda,
                alpha,
                beta,
                mu_hint: mu_inner,
                ..hp.clone()
            },
            ..run.clone()
        };
        // memories reset each stage; the round counter continues so every
        // stage draws fresh streams
        let mut state = SnagEfState::new(current.clone(), problem.workers);
        state.t = global_t;
        let loss_before = problem.value_at(&current);
        let mut shadow = run.shadow.then(|| (current.clone(), current.clone(), current.clone()));
        run_snag_rounds(
            &staged,
            problem,
            &mut state,
            &stage_run,
            &streams,
            &mut builder,
            &mut shadow,
            hp.rounds,
        )?;
        global_t = state.t;
        current = state.x.clone();
        let grad = problem.full_grad(&current);
        builder.stages.push(StageRecord {
            s,
            grad_norm_sq: norm_sq(&grad),
            loss_before,
            loss_after: problem.value_at(&current),
        });
        // stage outputs always stay selectable
        if builder.stored.last().map(|(t, _)| *t) != Some(global_t) {
            builder.stored.push((global_t, current.clone()));
        }
    }
    let mut trace = builder.finish(run.fingerprint, run.seed);
    let mut rng = streams.run_level(1);
    let s_hat = rand::Rng::gen_range(&mut rng, 1..=hp.stages);
    trace.selected_stage = Some(s_hat);
    Ok(trace)
}
