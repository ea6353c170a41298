//! Finite-sum optimization problems partitioned across workers.
//!
//! A [`Problem`] is `F(x) = (1/P) Σ_p (1/N) Σ_i f_{i,p}(x)` with per-sample
//! gradient oracles and the constants the schedules and diagnostics consume:
//! smoothness `L`, strong convexity `mu`, and (when known exactly) the
//! optimum. All oracles are pure and safe to call concurrently; randomness
//! lives in caller-owned streams.
//!
//! Full values and gradients are always the nested index-ordered average of
//! the per-sample oracles, so a full-batch optimizer round averaging the
//! same worker gradients reproduces `full_grad` bitwise.

use crate::error::{Error, Result};
use crate::vecops::{mean_vectors, norm_sq};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// Per-sample value/gradient oracle backing a [`Problem`].
pub trait Oracle: Send + Sync {
    fn sample_value(&self, p: usize, i: usize, x: &[f64]) -> f64;
    fn sample_grad(&self, p: usize, i: usize, x: &[f64]) -> Vec<f64>;
}

/// Known exact minimizer of a problem.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// A finite-sum problem partitioned across `workers` workers with
/// `n_per_worker` samples each.
#[derive(Clone)]
pub struct Problem {
    pub dim: usize,
    pub workers: usize,
    pub n_per_worker: usize,
    /// Smoothness constant; exact for synthetic quadratics, an upper bound
    /// for data problems.
    pub smoothness: f64,
    /// Strong-convexity constant; 0 when none is known.
    pub strong_convexity: f64,
    pub optimum: Option<Optimum>,
    oracle: Arc<dyn Oracle>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("dim", &self.dim)
            .field("workers", &self.workers)
            .field("n_per_worker", &self.n_per_worker)
            .field("smoothness", &self.smoothness)
            .field("strong_convexity", &self.strong_convexity)
            .field("has_optimum", &self.optimum.is_some())
            .finish()
    }
}

impl Problem {
    /// `f_{i,p}(x)` for worker `p`, sample `i`.
    pub fn sample_value(&self, p: usize, i: usize, x: &[f64]) -> f64 {
        debug_assert!(p < self.workers && i < self.n_per_worker);
        self.oracle.sample_value(p, i, x)
    }

    /// `∇f_{i,p}(x)` for worker `p`, sample `i`.
    pub fn sample_grad(&self, p: usize, i: usize, x: &[f64]) -> Vec<f64> {
        debug_assert!(p < self.workers && i < self.n_per_worker);
        self.oracle.sample_grad(p, i, x)
    }

    /// Worker-local full gradient `(1/N) Σ_i ∇f_{i,p}(x)`.
    pub fn worker_grad(&self, p: usize, x: &[f64]) -> Vec<f64> {
        let grads: Vec<Vec<f64>> = (0..self.n_per_worker)
            .map(|i| self.sample_grad(p, i, x))
            .collect();
        mean_vectors(&grads)
    }

    /// `∇F(x)`, the average of the worker gradients.
    pub fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        let grads: Vec<Vec<f64>> = (0..self.workers).map(|p| self.worker_grad(p, x)).collect();
        mean_vectors(&grads)
    }

    /// `F(x)`.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for p in 0..self.workers {
            let mut worker = 0.0;
            for i in 0..self.n_per_worker {
                worker += self.sample_value(p, i, x);
            }
            total += worker / self.n_per_worker as f64;
        }
        total / self.workers as f64
    }

    /// Gap to the known optimum, when one exists.
    pub fn gap(&self, x: &[f64]) -> Option<f64> {
        self.optimum.as_ref().map(|o| self.value_at(x) - o.value)
    }

    /// Total sample count `N * P`.
    pub fn total_samples(&self) -> usize {
        self.workers * self.n_per_worker
    }
}

/// Uniform sample-index draw for worker `p`.
pub fn sample_index(problem: &Problem, p: usize, rng: &mut impl Rng) -> usize {
    debug_assert!(p < problem.workers);
    rng.gen_range(0..problem.n_per_worker)
}

/// Variance estimate `(1/NP) Σ ||∇f_{i,p}(x) − ∇F(x)||²`.
#[derive(Debug, Clone)]
pub struct VarianceEstimate {
    pub value: f64,
    pub n_samples: usize,
    /// True when computed by full enumeration over every `(i, p)`.
    pub exact: bool,
}

/// How to estimate the gradient variance.
#[derive(Debug, Clone, Copy)]
pub enum VarianceMode {
    /// Enumerate all `N * P` samples.
    Exact,
    /// Monte-Carlo over uniformly drawn `(p, i)` pairs.
    Sampled { trials: usize, seed: u64 },
}

/// Estimate the gradient variance at `x`.
pub fn estimate_variance(problem: &Problem, x: &[f64], mode: VarianceMode) -> VarianceEstimate {
    let full = problem.full_grad(x);
    let dev_sq = |p: usize, i: usize| {
        let g = problem.sample_grad(p, i, x);
        g.iter().zip(&full).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    };
    match mode {
        VarianceMode::Exact => {
            let mut sum = 0.0;
            for p in 0..problem.workers {
                for i in 0..problem.n_per_worker {
                    sum += dev_sq(p, i);
                }
            }
            let n = problem.total_samples();
            VarianceEstimate { value: sum / n as f64, n_samples: n, exact: true }
        }
        VarianceMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sum = 0.0;
            for _ in 0..trials {
                let p = rng.gen_range(0..problem.workers);
                let i = rng.gen_range(0..problem.n_per_worker);
                sum += dev_sq(p, i);
            }
            VarianceEstimate { value: sum / trials as f64, n_samples: trials, exact: false }
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic quadratic
// ---------------------------------------------------------------------------

struct Quadratic {
    eigs: Vec<f64>,
    /// Centers in flat order `p * n_per_worker + i`, so regrouping the same
    /// seed under a different worker count keeps the sample set identical.
    centers: Vec<Vec<f64>>,
    n_per_worker: usize,
}

impl Quadratic {
    fn center(&self, p: usize, i: usize) -> &[f64] {
        &self.centers[p * self.n_per_worker + i]
    }
}

impl Oracle for Quadratic {
    fn sample_value(&self, p: usize, i: usize, x: &[f64]) -> f64 {
        let b = self.center(p, i);
        0.5 * x
            .iter()
            .zip(b)
            .zip(&self.eigs)
            .map(|((xj, bj), aj)| aj * (xj - bj) * (xj - bj))
            .sum::<f64>()
    }

    fn sample_grad(&self, p: usize, i: usize, x: &[f64]) -> Vec<f64> {
        let b = self.center(p, i);
        x.iter()
            .zip(b)
            .zip(&self.eigs)
            .map(|((xj, bj), aj)| aj * (xj - bj))
            .collect()
    }
}

/// Synthetic quadratic: `f_{i,p}(x) = (1/2)(x − b_{i,p})ᵀ A (x − b_{i,p})`
/// with diagonal `A`, eigenvalues log-uniform in `[mu, L]` with the extremes
/// pinned to `mu` and `L`, and centers `b_{i,p}` standard normal. The
/// optimum `x* = mean(b)` and `F(x*)` are exact.
pub fn make_quadratic(
    d: usize,
    smoothness: f64,
    mu: f64,
    n_per_worker: usize,
    workers: usize,
    seed: u64,
) -> Result<Problem> {
    make_quadratic_scaled(d, smoothness, mu, n_per_worker, workers, seed, 1.0)
}

/// Quadratic with the center scale exposed; scale 0 puts every `b` at the
/// origin (the closed-form test case), smaller scales shrink the gradient
/// variance without changing `A`.
pub fn make_quadratic_scaled(
    d: usize,
    smoothness: f64,
    mu: f64,
    n_per_worker: usize,
    workers: usize,
    seed: u64,
    center_scale: f64,
) -> Result<Problem> {
    if d == 0 {
        return Err(Error::Invalid("quadratic: dimension must be >= 1".into()));
    }
    if !(mu > 0.0) {
        return Err(Error::Invalid("quadratic: mu must be > 0".into()));
    }
    if mu > smoothness {
        return Err(Error::Invalid(format!(
            "quadratic: mu={mu} must not exceed L={smoothness}"
        )));
    }
    if n_per_worker == 0 || workers == 0 {
        return Err(Error::Invalid("quadratic: need n >= 1 and P >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eigs = vec![0.0; d];
    if d == 1 {
        eigs[0] = smoothness;
    } else {
        eigs[0] = mu;
        eigs[d - 1] = smoothness;
        let (ln_lo, ln_hi) = (mu.ln(), smoothness.ln());
        for e in eigs.iter_mut().take(d - 1).skip(1) {
            let u: f64 = rng.gen_range(0.0..1.0);
            *e = (ln_lo + u * (ln_hi - ln_lo)).exp();
        }
    }
    let total = n_per_worker * workers;
    let centers: Vec<Vec<f64>> = (0..total)
        .map(|_| {
            (0..d)
                .map(|_| center_scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect()
        })
        .collect();
    quadratic_from_parts(eigs, centers, n_per_worker, workers)
}

/// Quadratic from explicit eigenvalues and flat centers (length `N * P`).
pub fn quadratic_from_parts(
    eigs: Vec<f64>,
    centers: Vec<Vec<f64>>,
    n_per_worker: usize,
    workers: usize,
) -> Result<Problem> {
    let d = eigs.len();
    if centers.len() != n_per_worker * workers {
        return Err(Error::Invalid(format!(
            "quadratic: {} centers provided for {} samples",
            centers.len(),
            n_per_worker * workers
        )));
    }
    if centers.iter().any(|c| c.len() != d) {
        return Err(Error::Invalid("quadratic: center dimension mismatch".into()));
    }
    let smoothness = eigs.iter().cloned().fold(f64::MIN, f64::max);
    let mu = eigs.iter().cloned().fold(f64::MAX, f64::min);
    let mut x_star = vec![0.0; d];
    for c in &centers {
        for (a, v) in x_star.iter_mut().zip(c) {
            *a += v;
        }
    }
    for a in &mut x_star {
        *a /= centers.len() as f64;
    }
    let oracle = Quadratic { eigs, centers, n_per_worker };
    let mut problem = Problem {
        dim: d,
        workers,
        n_per_worker,
        smoothness,
        strong_convexity: mu,
        optimum: None,
        oracle: Arc::new(oracle),
    };
    let f_star = problem.value_at(&x_star);
    problem.optimum = Some(Optimum { point: x_star, value: f_star });
    Ok(problem)
}

// ---------------------------------------------------------------------------
// Multinomial logistic regression
// ---------------------------------------------------------------------------

struct LogReg {
    /// Rows already shuffled and truncated; worker `p` owns the contiguous
    /// block `[p * n_per_worker, (p+1) * n_per_worker)`.
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
    n_features: usize,
    l2: f64,
    n_per_worker: usize,
}

impl LogReg {
    fn row(&self, p: usize, i: usize) -> (usize, &[f64], usize) {
        let r = p * self.n_per_worker + i;
        (r, &self.features[r], self.labels[r])
    }

    fn logits(&self, feat: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let w = &x[c * self.n_features..(c + 1) * self.n_features];
                w.iter().zip(feat).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

impl Oracle for LogReg {
    fn sample_value(&self, p: usize, i: usize, x: &[f64]) -> f64 {
        let (_, feat, y) = self.row(p, i);
        let logits = self.logits(feat, x);
        let max = logits.iter().cloned().fold(f64::MIN, f64::max);
        let log_sum = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        log_sum - logits[y] + 0.5 * self.l2 * norm_sq(x)
    }

    fn sample_grad(&self, p: usize, i: usize, x: &[f64]) -> Vec<f64> {
        let (_, feat, y) = self.row(p, i);
        let logits = self.logits(feat, x);
        let max = logits.iter().cloned().fold(f64::MIN, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let denom: f64 = exps.iter().sum();
        let mut grad = vec![0.0; x.len()];
        for c in 0..self.classes {
            let coef = exps[c] / denom - if c == y { 1.0 } else { 0.0 };
            let block = &mut grad[c * self.n_features..(c + 1) * self.n_features];
            for (g, f) in block.iter_mut().zip(feat) {
                *g = coef * f;
            }
        }
        for (g, w) in grad.iter_mut().zip(x) {
            *g += self.l2 * w;
        }
        grad
    }
}

/// Seed for the dataset-to-worker shuffle; fixed so a dataset always
/// partitions the same way.
const PARTITION_SHUFFLE_SEED: u64 = 0x5eed_0001;

/// L2-regularized multinomial logistic regression over a dense dataset.
/// Rows are assigned to workers contiguously after one seeded shuffle;
/// trailing rows that do not fill a worker are dropped. The problem
/// dimension is `classes * n_features` (flattened class-major weights).
/// `L` is the standard upper bound `max_i ||feat_i||² / 4 + l2`; `mu = l2`.
pub fn make_logreg(
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    l2: f64,
    workers: usize,
) -> Result<Problem> {
    if features.is_empty() {
        return Err(Error::Invalid("logreg: empty dataset".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "logreg: {} feature rows vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    if workers == 0 || features.len() < workers {
        return Err(Error::Invalid(format!(
            "logreg: need at least one sample per worker ({} samples, {} workers)",
            features.len(),
            workers
        )));
    }
    if l2 < 0.0 {
        return Err(Error::Invalid("logreg: l2 must be >= 0".into()));
    }
    let n_features = features[0].len();
    if features.iter().any(|r| r.len() != n_features) {
        return Err(Error::Invalid("logreg: ragged feature rows".into()));
    }
    let classes = labels.iter().max().copied().unwrap_or(0) + 1;
    if classes < 2 {
        return Err(Error::Invalid("logreg: need at least two classes".into()));
    }

    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(PARTITION_SHUFFLE_SEED);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_per_worker = features.len() / workers;
    let used = n_per_worker * workers;
    let mut shuffled_feat = Vec::with_capacity(used);
    let mut shuffled_labels = Vec::with_capacity(used);
    for &r in order.iter().take(used) {
        shuffled_feat.push(features[r].clone());
        shuffled_labels.push(labels[r]);
    }

    let max_row_norm_sq = shuffled_feat.iter().map(|r| norm_sq(r)).fold(0.0, f64::max);
    let smoothness = max_row_norm_sq / 4.0 + l2;

    let oracle = LogReg {
        features: shuffled_feat,
        labels: shuffled_labels,
        classes,
        n_features,
        l2,
        n_per_worker,
    };
    Ok(Problem {
        dim: classes * n_features,
        workers,
        n_per_worker,
        smoothness,
        strong_convexity: l2,
        optimum: None,
        oracle: Arc::new(oracle),
    })
}

// ---------------------------------------------------------------------------
// Smooth nonconvex test objective
// ---------------------------------------------------------------------------

struct NonconvexLogistic {
    /// Features scaled to roughly unit norm; flat order as in the quadratic.
    features: Vec<Vec<f64>>,
    /// Labels in {-1, +1} with a fraction flipped so the data is not separable.
    labels: Vec<f64>,
    n_per_worker: usize,
}

/// `r(x) = Σ_j x_j² / (1 + x_j²)`; smooth, bounded, nonconvex, `sup|r''| = 2`.
fn sigmoid_reg_value(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v / (1.0 + v * v)).sum()
}

fn sigmoid_reg_grad_into(x: &[f64], grad: &mut [f64]) {
    for (g, v) in grad.iter_mut().zip(x) {
        let denom = 1.0 + v * v;
        *g += 2.0 * v / (denom * denom);
    }
}

impl Oracle for NonconvexLogistic {
    fn sample_value(&self, p: usize, i: usize, x: &[f64]) -> f64 {
        let r = p * self.n_per_worker + i;
        let margin = -self.labels[r]
            * x.iter().zip(&self.features[r]).map(|(a, b)| a * b).sum::<f64>();
        // ln(1 + e^m) computed stably
        let logistic = if margin > 0.0 {
            margin + (-margin).exp().ln_1p()
        } else {
            margin.exp().ln_1p()
        };
        logistic + sigmoid_reg_value(x)
    }

    fn sample_grad(&self, p: usize, i: usize, x: &[f64]) -> Vec<f64> {
        let r = p * self.n_per_worker + i;
        let y = self.labels[r];
        let feat = &self.features[r];
        let margin = -y * x.iter().zip(feat).map(|(a, b)| a * b).sum::<f64>();
        let sigma = 1.0 / (1.0 + (-margin).exp());
        let mut grad: Vec<f64> = feat.iter().map(|f| -y * sigma * f).collect();
        sigmoid_reg_grad_into(x, &mut grad);
        grad
    }
}

/// Smooth bounded-below nonconvex objective: binary logistic losses on a
/// seeded synthetic dataset plus the coordinatewise regularizer
/// `x² / (1 + x²)`. `mu = 0`; `L = max ||feat||² / 4 + 2` (the regularizer
/// is 2-smooth per coordinate). No optimum is recorded.
pub fn make_nonconvex(
    d: usize,
    n_per_worker: usize,
    workers: usize,
    seed: u64,
) -> Result<Problem> {
    if d == 0 {
        return Err(Error::Invalid("nonconvex: dimension must be >= 1".into()));
    }
    if n_per_worker == 0 || workers == 0 {
        return Err(Error::Invalid("nonconvex: need n >= 1 and P >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let total = n_per_worker * workers;
    let mut features = Vec::with_capacity(total);
    for _ in 0..total {
        let row: Vec<f64> = (0..d)
            .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        features.push(row);
    }
    // labels from a random hyperplane, 10% flipped so no separator exists
    let w_true: Vec<f64> = (0..d)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let labels: Vec<f64> = features
        .iter()
        .map(|f| {
            let raw = if f.iter().zip(&w_true).map(|(a, b)| a * b).sum::<f64>() >= 0.0 {
                1.0
            } else {
                -1.0
            };
            if rng.gen_range(0.0..1.0) < 0.1 {
                -raw
            } else {
                raw
            }
        })
        .collect();
    let max_row_norm_sq = features.iter().map(|r| norm_sq(r)).fold(0.0, f64::max);
    let smoothness = max_row_norm_sq / 4.0 + 2.0;
    let oracle = NonconvexLogistic { features, labels, n_per_worker };
    Ok(Problem {
        dim: d,
        workers,
        n_per_worker,
        smoothness,
        strong_convexity: 0.0,
        optimum: None,
        oracle: Arc::new(oracle),
    })
}

// ---------------------------------------------------------------------------
// Quadratic regularization wrapper
// ---------------------------------------------------------------------------

struct Regularized {
    inner: Arc<dyn Oracle>,
    sigma: f64,
    center: Vec<f64>,
}

impl Oracle for Regularized {
    fn sample_value(&self, p: usize, i: usize, x: &[f64]) -> f64 {
        let q: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        self.inner.sample_value(p, i, x) + self.sigma * q
    }

    fn sample_grad(&self, p: usize, i: usize, x: &[f64]) -> Vec<f64> {
        let mut g = self.inner.sample_grad(p, i, x);
        for (gj, (xj, cj)) in g.iter_mut().zip(x.iter().zip(&self.center)) {
            *gj += 2.0 * self.sigma * (xj - cj);
        }
        g
    }
}

/// `F + σ‖x − center‖²` (no 1/2 factor: the gradient contribution is
/// `2σ(x − center)`). Constants: `L' = L + 2σ`, `mu' = max(mu, 2σ − L)`, so
/// `σ = L` turns an L-smooth objective into a 3L-smooth, L-strongly convex
/// one.
pub fn regularize(problem: &Problem, sigma: f64, center: &[f64]) -> Result<Problem> {
    if sigma < 0.0 {
        return Err(Error::Invalid("regularize: sigma must be >= 0".into()));
    }
    if center.len() != problem.dim {
        return Err(Error::Invalid(format!(
            "regularize: center has dimension {} but problem has {}",
            center.len(),
            problem.dim
        )));
    }
    let optimum = if sigma == 0.0 { problem.optimum.clone() } else { None };
    Ok(Problem {
        dim: problem.dim,
        workers: problem.workers,
        n_per_worker: problem.n_per_worker,
        smoothness: problem.smoothness + 2.0 * sigma,
        strong_convexity: problem.strong_convexity.max(2.0 * sigma - problem.smoothness),
        optimum,
        oracle: Arc::new(Regularized {
            inner: problem.oracle.clone(),
            sigma,
            center: center.to_vec(),
        }),
    })
}
