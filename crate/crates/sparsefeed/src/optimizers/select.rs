//! Output-selection rules over a stored trace.
//!
//! The theory reports different iterates depending on the regime: the
//! near-final iterate for the accelerated strongly convex result, a
//! geometrically weighted random iterate for plain strongly convex SGD-EF,
//! and a uniform random iterate for the nonconvex results. Selection draws
//! from the candidate set `{x_{t-1} : t in [T]}`, i.e. stored rounds
//! `0..=T-1`.

use crate::error::{Error, Result};
use crate::trace::Trace;
use rand::Rng;

/// Which stored iterate a run reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputRule {
    /// `x_{T-1}`.
    Last,
    /// `x_{t̂-1}` with `t̂ ∼ [T]` proportional to `(1 - ημ)^{-t̂}`
    /// (larger weight on later iterates). Requires `0 < ημ < 1`.
    Geometric { eta: f64, mu: f64 },
    /// `x_{t̂-1}` with `t̂` uniform on `[T]`.
    Uniform,
}

/// Select the reported iterate from a trace. Returns `(round, iterate)`.
pub fn select_output(
    trace: &Trace,
    rule: OutputRule,
    rng: &mut impl Rng,
) -> Result<(u64, Vec<f64>)> {
    if trace.stored_iterates.is_empty() {
        return Err(Error::Invalid("select_output: empty trace".into()));
    }
    let t_total = trace.rounds;
    // candidates are x_{t-1} for t in [T]; a zero-round trace only has x_0
    let candidates: Vec<&(u64, Vec<f64>)> = if t_total == 0 {
        trace.stored_iterates.iter().take(1).collect()
    } else {
        trace
            .stored_iterates
            .iter()
            .filter(|(t, _)| *t < t_total)
            .collect()
    };
    if candidates.is_empty() {
        return Err(Error::Invalid("select_output: no stored candidate iterates".into()));
    }
    let pick = |idx: usize| -> (u64, Vec<f64>) {
        let (t, x) = candidates[idx];
        (*t, x.clone())
    };
    match rule {
        OutputRule::Last => Ok(pick(candidates.len() - 1)),
        OutputRule::Uniform => {
            let idx = rng.gen_range(0..candidates.len());
            Ok(pick(idx))
        }
        OutputRule::Geometric { eta, mu } => {
            let r = eta * mu;
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Invalid(format!(
                    "select_output: geometric rule requires 0 < eta*mu < 1, got {r}"
                )));
            }
            // weight (1-r)^{-(t+1)}; normalize by the largest (latest) weight
            // before summing so nothing overflows
            let t_max = candidates.last().unwrap().0;
            let rel_weights: Vec<f64> = candidates
                .iter()
                .map(|(t, _)| (1.0 - r).powi((t_max - t) as i32))
                .collect();
            let total: f64 = rel_weights.iter().sum();
            let mut u = rng.gen_range(0.0..1.0) * total;
            for (idx, w) in rel_weights.iter().enumerate() {
                if u < *w || idx == candidates.len() - 1 {
                    return Ok(pick(idx));
                }
                u -= w;
            }
            unreachable!()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Trace;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trace_with_rounds(t_total: u64) -> Trace {
        Trace {
            records: vec![],
            stored_iterates: (0..=t_total).map(|t| (t, vec![t as f64])).collect(),
            stages: vec![],
            config_fingerprint: 0,
            seed: 0,
            rounds: t_total,
            selected_stage: None,
        }
    }

    #[test]
    fn last_rule_returns_t_minus_one() {
        let trace = trace_with_rounds(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (t, x) = select_output(&trace, OutputRule::Last, &mut rng).unwrap();
        assert_eq!(t, 4);
        assert_eq!(x, vec![4.0]);
    }

    #[test]
    fn geometric_weights_match_hand_normalization() {
        // T=3, eta*mu=0.5: weights over x_0,x_1,x_2 are (1/7, 2/7, 4/7)
        let trace = trace_with_rounds(3);
        let trials = 200_000;
        let mut counts = [0usize; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..trials {
            let (t, _) =
                select_output(&trace, OutputRule::Geometric { eta: 0.5, mu: 1.0 }, &mut rng)
                    .unwrap();
            counts[t as usize] += 1;
        }
        let expect = [1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0];
        for (i, c) in counts.iter().enumerate() {
            let freq = *c as f64 / trials as f64;
            let sigma = (expect[i] * (1.0 - expect[i]) / trials as f64).sqrt();
            assert!(
                (freq - expect[i]).abs() < 4.0 * sigma,
                "index {i}: freq {freq} vs {}",
                expect[i]
            );
        }
    }

    #[test]
    fn geometric_limit_is_uniform() {
        // eta*mu -> 0: relative weights all 1
        let trace = trace_with_rounds(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            let (t, _) =
                select_output(&trace, OutputRule::Geometric { eta: 1e-12, mu: 1e-6 }, &mut rng)
                    .unwrap();
            counts[t as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / 40_000.0;
            assert!((freq - 0.25).abs() < 0.02, "freq {freq}");
        }
    }

    #[test]
    fn geometric_rejects_bad_rate() {
        let trace = trace_with_rounds(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(
            select_output(&trace, OutputRule::Geometric { eta: 2.0, mu: 1.0 }, &mut rng).is_err()
        );
    }

    #[test]
    fn empty_trace_is_an_error() {
        let trace = Trace {
            records: vec![],
            stored_iterates: vec![],
            stages: vec![],
            config_fingerprint: 0,
            seed: 0,
            rounds: 0,
            selected_stage: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(select_output(&trace, OutputRule::Last, &mut rng).is_err());
    }

    #[test]
    fn zero_round_trace_returns_initial() {
        let trace = trace_with_rounds(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (t, _) = select_output(&trace, OutputRule::Uniform, &mut rng).unwrap();
        assert_eq!(t, 0);
    }
}
