//! Small dense-vector helpers shared across modules.
//!
//! Averages are computed as index-ordered sums followed by one scale, so any
//! two call sites averaging the same vectors produce bitwise-identical
//! results.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `acc += scale * v`
pub fn add_scaled(acc: &mut [f64], scale: f64, v: &[f64]) {
    debug_assert_eq!(acc.len(), v.len());
    for (a, x) in acc.iter_mut().zip(v) {
        *a += scale * x;
    }
}

/// `a - b`
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Index-ordered mean of equally sized vectors.
pub fn mean_vectors(vs: &[Vec<f64>]) -> Vec<f64> {
    assert!(!vs.is_empty());
    let mut acc = vec![0.0; vs[0].len()];
    for v in vs {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let scale = 1.0 / vs.len() as f64;
    for a in &mut acc {
        *a *= scale;
    }
    acc
}

/// Relative vector gap `||a - b|| / max(1, ||a||, ||b||)`.
pub fn rel_vec_gap(a: &[f64], b: &[f64]) -> f64 {
    let diff = norm_sq(&sub(a, b)).sqrt();
    diff / 1.0f64.max(norm_sq(a).sqrt()).max(norm_sq(b).sqrt())
}
