//! Per-run trace: logged metrics, stored iterates, communication counters.

/// One logged round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Round index; 0 is the initial state before any update.
    pub t: u64,
    /// `F(x_t)`.
    pub loss: f64,
    /// `||∇F(x_t)||²`.
    pub grad_norm_sq: f64,
    /// `||m_t||²` of the aggregate memory (0 for memoryless methods).
    pub mem_norm_sq: f64,
    /// Raw scalar payload slots sent this round (all workers).
    pub comm_entries_round: u64,
    /// Running raw total.
    pub comm_raw_cum: u64,
    /// Running total with the per-round aggregate capped at `d` slots.
    pub comm_capped_cum: u64,
}

/// Per-stage record for the recursively regularized method.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    /// Stage index, 1-based.
    pub s: u64,
    /// `||∇F(x_s)||²` of the original objective at the stage output.
    pub grad_norm_sq: f64,
    /// `F(x_{s-1})` before the stage.
    pub loss_before: f64,
    /// `F(x_s)` after the stage.
    pub loss_after: f64,
}

/// Full record of one experiment run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<RoundRecord>,
    /// Iterates kept for output selection: every logged round plus the final
    /// window (always includes rounds T-1 and T).
    pub stored_iterates: Vec<(u64, Vec<f64>)>,
    /// Stage telemetry; empty for single-stage methods.
    pub stages: Vec<StageRecord>,
    /// Hash of the canonical config text; printed for reproduction.
    pub config_fingerprint: u64,
    pub seed: u64,
    /// Total rounds executed (inner rounds summed across stages).
    pub rounds: u64,
    /// For the staged method: the uniformly drawn reported stage.
    pub selected_stage: Option<u64>,
}

impl Trace {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map(|r| r.loss).unwrap_or(f64::NAN)
    }

    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("trace has at least the initial record")
    }

    /// Stored iterate at round `t`, if kept.
    pub fn iterate_at(&self, t: u64) -> Option<&[f64]> {
        self.stored_iterates
            .iter()
            .find(|(tt, _)| *tt == t)
            .map(|(_, x)| x.as_slice())
    }
}
