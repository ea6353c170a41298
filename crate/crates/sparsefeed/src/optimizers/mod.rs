//! The optimization methods as pure per-round transitions over explicit
//! state: sparsified SGD with error feedback, its accelerated three-sequence
//! variant, deterministic NAG, the baselines, and the parameter schedules
//! and output-selection rules the theory prescribes.

mod rounds;
mod select;

pub use rounds::{
    run_nag, s_sgd_ef_round, s_sgd_ef_round_ordered, s_snag_ef_round, s_snag_ef_round_ordered,
    SgdRoundInfo, SnagRoundInfo,
};
pub use select::{select_output, OutputRule};

use crate::error::{Error, Result};

/// Which sparsifier the messages go through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressorKind {
    /// Unbiased random subset without replacement (the canonical choice).
    RandUniform,
    /// Unbiased i.i.d. index draws, as the variance-bound proofs treat them.
    RandWithReplacement,
    /// Magnitude top-k, verbatim values (biased baseline).
    TopK,
    /// No compression: the full vector goes on the wire.
    Identity,
}

/// Where the per-round gradients come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// One uniformly drawn sample per worker per round.
    Stochastic,
    /// Each worker uses its exact partition gradient (zero variance).
    FullBatch,
}

/// Which memory the accelerated z-correction mixes in its `β` term: the
/// combined memory `m` (the default) or the conservative channel's `m^(y)`
/// (exposed for sensitivity studies).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZCorrection {
    Combined,
    Conservative,
}

/// Per-run execution options orthogonal to the hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct RoundOptions {
    pub compressor: CompressorKind,
    pub gradient_mode: GradientMode,
    pub z_correction: ZCorrection,
}

impl Default for RoundOptions {
    fn default() -> Self {
        Self {
            compressor: CompressorKind::RandUniform,
            gradient_mode: GradientMode::Stochastic,
            z_correction: ZCorrection::Combined,
        }
    }
}

/// Hyperparameters shared by all methods. Unused fields are ignored by the
/// simpler methods (`lambda`/`alpha`/`beta` by SGD-EF, `sigma`/`stages` by
/// everything but the staged wrapper).
#[derive(Debug, Clone)]
pub struct HyperParams {
    /// Step size η.
    pub eta: f64,
    /// Aggressive step λ.
    pub lambda: f64,
    /// Mixing weight α.
    pub alpha: f64,
    /// z-contraction β.
    pub beta: f64,
    /// Error-feedback scale γ.
    pub gamma: f64,
    /// Kept coordinates per worker per round (split k/2 + k/2 by the
    /// accelerated method: floor for y, ceil for z).
    pub k: usize,
    /// Strong-convexity input for the accelerated schedule.
    pub mu_hint: f64,
    /// Regularization weight σ for the staged wrapper.
    pub sigma: f64,
    /// Inner iterations T.
    pub rounds: u64,
    /// Outer stages S.
    pub stages: u64,
}

impl HyperParams {
    /// Parameters for the non-accelerated methods.
    pub fn sgd(eta: f64, gamma: f64, k: usize, rounds: u64) -> Self {
        Self {
            eta,
            lambda: 0.0,
            alpha: 0.0,
            beta: 0.0,
            gamma,
            k,
            mu_hint: 0.0,
            sigma: 0.0,
            rounds,
            stages: 1,
        }
    }

    /// Parameters for the accelerated method with (λ, α, β) from the
    /// closed-form schedule.
    pub fn accelerated(eta: f64, mu: f64, gamma: f64, k: usize, rounds: u64) -> Result<Self> {
        let (lambda, alpha, beta) = schedule_accel_params(eta, mu)?;
        Ok(Self {
            eta,
            lambda,
            alpha,
            beta,
            gamma,
            k,
            mu_hint: mu,
            sigma: 0.0,
            rounds,
            stages: 1,
        })
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::Invalid("hyperparams: eta must be > 0".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invalid(format!(
                    "hyperparams: {name}={v} must lie in [0, 1]"
                )));
            }
        }
        if self.k == 0 || self.k > dim {
            return Err(Error::Invalid(format!(
                "hyperparams: k={} must satisfy 1 <= k <= d={dim}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Closed-form accelerated schedule: `λ = (1/2)√(η/μ)`, `α = λμ/(2 + λμ)`,
/// `β = λμ/(1 + λμ)`. Guarantees `0 < α < β < 1` and the step condition
/// `αλ/(1−β) ≤ η/4`, which this schedule satisfies identically.
pub fn schedule_accel_params(eta: f64, mu: f64) -> Result<(f64, f64, f64)> {
    if !(eta > 0.0) {
        return Err(Error::Invalid("schedule: eta must be > 0".into()));
    }
    if !(mu > 0.0) {
        return Err(Error::Invalid(
            "schedule: mu must be > 0 (the accelerated method requires a strong-convexity input)"
                .into(),
        ));
    }
    let lambda = 0.5 * (eta / mu).sqrt();
    let s = lambda * mu;
    let alpha = s / (2.0 + s);
    let beta = s / (1.0 + s);
    debug_assert!(0.0 < alpha && alpha < beta && beta < 1.0);
    // αλ/(1−β) = αλ(1+λμ) = (η/4)(1+λμ)/(2+λμ) ≤ η/4
    let cond = alpha * lambda / (1.0 - beta);
    assert!(
        cond <= eta / 4.0 * (1.0 + 1e-12),
        "schedule violated its own step condition: {cond} > {}",
        eta / 4.0
    );
    Ok((lambda, alpha, beta))
}

/// One three-sequence transition:
/// `y' = y − dy`, `z' = (1−β)z + βx − dz`, `x' = (1−α)y' + αz'`,
/// with the incoming `x` on the right-hand side of the z-update.
/// Returns `(x', y', z')`.
pub fn one_iter_nag(
    x: &[f64],
    y: &[f64],
    z: &[f64],
    dy: &[f64],
    dz: &[f64],
    alpha: f64,
    beta: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    debug_assert!(x.len() == y.len() && y.len() == z.len());
    debug_assert!(dy.len() == x.len() && dz.len() == x.len());
    let y1: Vec<f64> = y.iter().zip(dy).map(|(yj, d)| yj - d).collect();
    let z1: Vec<f64> = z
        .iter()
        .zip(x)
        .zip(dz)
        .map(|((zj, xj), d)| (1.0 - beta) * zj + beta * xj - d)
        .collect();
    let x1: Vec<f64> = y1
        .iter()
        .zip(&z1)
        .map(|(yj, zj)| (1.0 - alpha) * yj + alpha * zj)
        .collect();
    (x1, y1, z1)
}

/// State of the error-feedback SGD family: iterate, per-worker cumulative
/// compression errors, and the maintained aggregate.
#[derive(Debug, Clone)]
pub struct SgdEfState {
    pub x: Vec<f64>,
    /// `m_{t,p}` per worker; all zero at t = 0.
    pub memories: Vec<Vec<f64>>,
    /// Maintained `(1/P) Σ_p m_{t,p}`.
    pub mem_aggregate: Vec<f64>,
    pub t: u64,
}

impl SgdEfState {
    pub fn new(x0: Vec<f64>, workers: usize) -> Self {
        let d = x0.len();
        Self {
            x: x0,
            memories: vec![vec![0.0; d]; workers],
            mem_aggregate: vec![0.0; d],
            t: 0,
        }
    }

    pub fn workers(&self) -> usize {
        self.memories.len()
    }

    /// Recompute the aggregate from the worker memories (the maintained copy
    /// must match to 1e-12).
    pub fn recomputed_aggregate(&self) -> Vec<f64> {
        crate::vecops::mean_vectors(&self.memories)
    }
}

/// State of the accelerated method: three solution sequences and three
/// cumulative-error sequences per worker, plus maintained aggregates.
#[derive(Debug, Clone)]
pub struct SnagEfState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub mem: Vec<Vec<f64>>,
    pub mem_y: Vec<Vec<f64>>,
    pub mem_z: Vec<Vec<f64>>,
    pub agg_mem: Vec<f64>,
    pub agg_mem_y: Vec<f64>,
    pub agg_mem_z: Vec<f64>,
    pub t: u64,
}

impl SnagEfState {
    /// Fresh state with `y_0 = z_0 = x_0` and all memories zero.
    pub fn new(x0: Vec<f64>, workers: usize) -> Self {
        let d = x0.len();
        Self {
            x: x0.clone(),
            y: x0.clone(),
            z: x0,
            mem: vec![vec![0.0; d]; workers],
            mem_y: vec![vec![0.0; d]; workers],
            mem_z: vec![vec![0.0; d]; workers],
            agg_mem: vec![0.0; d],
            agg_mem_y: vec![0.0; d],
            agg_mem_z: vec![0.0; d],
            t: 0,
        }
    }

    pub fn workers(&self) -> usize {
        self.mem.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_iter_nag_noop_case() {
        // (x=3, y=2, z=3, dy=0, dz=0, alpha=0, beta=0) -> (x'=2, y'=2, z'=3)
        let (x1, y1, z1) =
            one_iter_nag(&[3.0], &[2.0], &[3.0], &[0.0], &[0.0], 0.0, 0.0);
        assert_eq!(y1, vec![2.0]);
        assert_eq!(z1, vec![3.0]);
        assert_eq!(x1, vec![2.0]);
    }

    #[test]
    fn one_iter_nag_alpha_one_selects_z() {
        let (x1, _, z1) = one_iter_nag(
            &[1.0, -2.0],
            &[0.5, 0.5],
            &[2.0, 3.0],
            &[0.1, 0.2],
            &[0.3, 0.4],
            1.0,
            0.25,
        );
        assert_eq!(x1, z1);
    }

    #[test]
    fn one_iter_nag_hand_arithmetic() {
        // (x=3, y=1, z=2, dy=0.5, dz=0.25, alpha=0.5, beta=0.5)
        // y' = 0.5; z' = 0.5*2 + 0.5*3 - 0.25 = 2.25; x' = 1.375
        let (x1, y1, z1) =
            one_iter_nag(&[3.0], &[1.0], &[2.0], &[0.5], &[0.25], 0.5, 0.5);
        assert_eq!(y1, vec![0.5]);
        assert_eq!(z1, vec![2.25]);
        assert_eq!(x1, vec![1.375]);
    }

    #[test]
    fn schedule_closed_forms() {
        // eta=1, mu=1: lambda=0.5, alpha=0.5/2.5=0.2, beta=0.5/1.5=1/3
        let (l, a, b) = schedule_accel_params(1.0, 1.0).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        assert!((a - 0.2).abs() < 1e-15);
        assert!((b - 1.0 / 3.0).abs() < 1e-15);

        // eta=0.04, mu=0.25: lambda = 0.5*sqrt(0.16) = 0.2
        let (l, a, b) = schedule_accel_params(0.04, 0.25).unwrap();
        assert!((l - 0.2).abs() < 1e-15);
        assert!((a - 0.05 / 2.05).abs() < 1e-15);
        assert!((b - 0.05 / 1.05).abs() < 1e-15);
    }

    #[test]
    fn schedule_degenerates_toward_sgd() {
        // lambda*mu -> 0: alpha -> 0, beta -> 0
        let (_, a, b) = schedule_accel_params(1e-12, 1e-6).unwrap();
        assert!(a < 1e-6);
        assert!(b < 1e-6);
        assert!(a < b);
    }

    #[test]
    fn schedule_rejects_nonpositive_mu() {
        assert!(schedule_accel_params(0.1, 0.0).is_err());
        assert!(schedule_accel_params(0.1, -1.0).is_err());
        assert!(schedule_accel_params(0.0, 1.0).is_err());
    }

    #[test]
    fn hyperparams_validation() {
        let mut hp = HyperParams::sgd(0.1, 0.5, 3, 10);
        assert!(hp.validate(5).is_ok());
        hp.k = 6;
        assert!(hp.validate(5).is_err());
        hp.k = 0;
        assert!(hp.validate(5).is_err());
        hp.k = 3;
        hp.eta = 0.0;
        assert!(hp.validate(5).is_err());
        hp.eta = 0.1;
        hp.gamma = 1.5;
        assert!(hp.validate(5).is_err());
    }
}
