//! Gradient sparsifiers and the sparse message format.
//!
//! `rand_comp` is the unbiased random sparsifier: it keeps a uniformly random
//! size-k coordinate subset and scales survivors by d/k so the densified
//! message equals the input in expectation. `top_k` is the magnitude-based
//! baseline (values kept verbatim, biased). Messages carry their own
//! wire-size accounting.

use crate::error::Error;
use rand::Rng;

/// A sparse vector message: `(index, value)` pairs with scaling already
/// applied, plus the original dimension and the nominal kept-count.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedMessage {
    /// Dimension of the original dense vector.
    pub dim: usize,
    /// Nominal number of kept coordinates.
    pub k: usize,
    /// Strictly increasing indices, each `< dim`, with their payload values.
    pub entries: Vec<(usize, f64)>,
}

impl CompressedMessage {
    /// Number of scalar payload slots this message occupies on the wire.
    pub fn wire_entries(&self) -> usize {
        self.entries.len().min(self.dim)
    }

    /// Expand the message back into a dense vector.
    pub fn densify(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(j, v) in &self.entries {
            out[j] = v;
        }
        out
    }

    /// Add the message into an accumulator, scaled; avoids densifying.
    pub fn add_scaled_into(&self, scale: f64, acc: &mut [f64]) {
        debug_assert_eq!(acc.len(), self.dim);
        for &(j, v) in &self.entries {
            acc[j] += scale * v;
        }
    }

    /// Debug dump as text lines `index<TAB>value`.
    pub fn dump_tsv(&self) -> String {
        let mut s = String::new();
        for &(j, v) in &self.entries {
            s.push_str(&format!("{j}\t{v:.16e}\n"));
        }
        s
    }

    fn assert_valid(&self) {
        debug_assert!(self.entries.len() <= self.k && self.k <= self.dim);
        debug_assert!(self.entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(self.entries.iter().all(|&(j, _)| j < self.dim));
    }
}

fn check_k(k: usize, d: usize) -> Result<(), Error> {
    if k == 0 || k > d {
        return Err(Error::Invalid(format!(
            "kept-coordinate count k={k} must satisfy 1 <= k <= d={d}"
        )));
    }
    Ok(())
}

/// Draw a uniformly random size-k subset of `0..d` by partial Fisher–Yates,
/// consuming exactly k draws from the stream. Returned indices are unsorted.
fn sample_subset(d: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = rng.gen_range(i..d);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Unbiased random sparsifier: keep a uniform size-k subset J without
/// replacement; entry `j` carries `(d/k) * x[j]`.
pub fn rand_comp(x: &[f64], k: usize, rng: &mut impl Rng) -> Result<CompressedMessage, Error> {
    let d = x.len();
    check_k(k, d)?;
    let mut subset = sample_subset(d, k, rng);
    subset.sort_unstable();
    let scale = d as f64 / k as f64;
    let entries = subset.into_iter().map(|j| (j, scale * x[j])).collect();
    let msg = CompressedMessage { dim: d, k, entries };
    msg.assert_valid();
    Ok(msg)
}

/// With-replacement variant: k i.i.d. uniform index draws, each contributing
/// `(d/k) * x[j]`; repeated indices accumulate. Matches the i.i.d. treatment
/// in the variance-bound proofs; still unbiased.
pub fn rand_comp_with_replacement(
    x: &[f64],
    k: usize,
    rng: &mut impl Rng,
) -> Result<CompressedMessage, Error> {
    let d = x.len();
    check_k(k, d)?;
    let scale = d as f64 / k as f64;
    let mut draws: Vec<usize> = (0..k).map(|_| rng.gen_range(0..d)).collect();
    draws.sort_unstable();
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(k);
    for j in draws {
        match entries.last_mut() {
            Some(last) if last.0 == j => last.1 += scale * x[j],
            _ => entries.push((j, scale * x[j])),
        }
    }
    let msg = CompressedMessage { dim: d, k, entries };
    msg.assert_valid();
    Ok(msg)
}

/// Keep the k largest-magnitude coordinates verbatim (no rescaling).
/// Ties broken toward the lower index.
pub fn top_k(x: &[f64], k: usize) -> Result<CompressedMessage, Error> {
    let d = x.len();
    check_k(k, d)?;
    let mut order: Vec<usize> = (0..d).collect();
    // stable sort on descending |x| keeps lower indices first among ties
    order.sort_by(|&a, &b| x[b].abs().partial_cmp(&x[a].abs()).unwrap());
    let mut kept: Vec<usize> = order.into_iter().take(k).collect();
    kept.sort_unstable();
    let entries = kept.into_iter().map(|j| (j, x[j])).collect();
    let msg = CompressedMessage { dim: d, k, entries };
    msg.assert_valid();
    Ok(msg)
}

/// Expand a message into a dense vector (free-function form of
/// [`CompressedMessage::densify`]).
pub fn densify(msg: &CompressedMessage) -> Vec<f64> {
    msg.densify()
}

/// Number of scalar payload slots a message occupies.
pub fn wire_entries(msg: &CompressedMessage) -> usize {
    msg.wire_entries()
}
