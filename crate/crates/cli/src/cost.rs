//! Simulated latency model.
//!
//! Speedups are reported from this model rather than wall clock: the toy
//! branch models are microseconds-cheap, so the interesting quantity is how
//! many full-price forward passes the controller avoided. Defaults are
//! reference per-step latencies of a heavy dual-branch deployment measured
//! in milliseconds.

use serde::{Deserialize, Serialize};

use dualskip::rollout::RolloutResult;
use dualskip::types::{BranchKind, BranchPair, StepSummary};

/// Per-branch full-pass cost plus fixed per-step overhead, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub trajectory_full_ms: f64,
    pub vision_full_ms: f64,
    pub overhead_ms: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            trajectory_full_ms: 20.23,
            vision_full_ms: 244.19,
            overhead_ms: 168.03,
        }
    }
}

/// Per-branch and whole-step speedups of an adaptive run over the
/// full-compute baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Speedups {
    pub vision: f64,
    pub trajectory: f64,
    pub total: f64,
}

impl CostModel {
    pub fn full_cost(&self, branch: BranchKind) -> f64 {
        match branch {
            BranchKind::Vision => self.vision_full_ms,
            BranchKind::Trajectory => self.trajectory_full_ms,
        }
    }

    /// Simulated latency of one branch for one rollout step:
    /// full-pass cost scaled by the compute ratio.
    pub fn branch_latency(&self, summary: &StepSummary) -> f64 {
        self.full_cost(summary.branch) * summary.compute_ratio
    }

    /// Simulated latency of one rollout step: overhead plus both branches.
    pub fn step_latency(&self, summaries: &BranchPair<StepSummary>) -> f64 {
        self.overhead_ms
            + self.branch_latency(&summaries.vision)
            + self.branch_latency(&summaries.trajectory)
    }

    /// Step latency of the full-compute baseline (both ratios at one).
    pub fn baseline_step_latency(&self) -> f64 {
        self.overhead_ms + self.vision_full_ms + self.trajectory_full_ms
    }

    /// Speedup of one branch given its mean compute ratio.
    pub fn branch_speedup(&self, compute_ratio: f64) -> f64 {
        if compute_ratio == 0.0 {
            f64::INFINITY
        } else {
            1.0 / compute_ratio
        }
    }

    /// Aggregate speedups for a finished rollout, from its mean ratios.
    pub fn rollout_speedups(&self, result: &RolloutResult) -> Speedups {
        let rv = result.compute_ratio.vision;
        let rt = result.compute_ratio.trajectory;
        let adaptive_step =
            self.overhead_ms + self.vision_full_ms * rv + self.trajectory_full_ms * rt;
        Speedups {
            vision: self.branch_speedup(rv),
            trajectory: self.branch_speedup(rt),
            total: self.baseline_step_latency() / adaptive_step,
        }
    }
}
