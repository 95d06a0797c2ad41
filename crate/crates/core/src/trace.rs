//! Per-step decision audit log.

use serde::{Deserialize, Serialize};

use crate::controller::GuardFlags;
use crate::types::{BranchKind, Decision};

/// One record per (rollout step, diffusion step, branch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Rollout step `s`.
    pub step: usize,
    /// Diffusion step `k`, counting down from `K`.
    pub k: usize,
    pub branch: BranchKind,
    /// The executed decision, after guard and gate overrides.
    pub decision: Decision,
    pub warmup: bool,
    pub cap: bool,
    pub stall: bool,
    /// True only on vision entries whose skip was flipped by the gate.
    pub gate_forced: bool,
    /// Diff observed at the end of this step.
    pub diff: f64,
    /// Window residual after pushing `diff`; absent until the window fills.
    pub residual: Option<f64>,
    /// Consecutive-skip counter before this step executed.
    pub skips_before: u32,
}

impl TraceEntry {
    pub fn guard_flags(&self) -> GuardFlags {
        GuardFlags {
            warmup: self.warmup,
            cap: self.cap,
            stall: self.stall,
        }
    }

    /// Whether any local guard fired at this step.
    pub fn guard_fired(&self) -> bool {
        self.warmup || self.cap || self.stall
    }
}

/// Ordered collection of trace entries for a whole rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecisionTrace {
    entries: Vec<TraceEntry>,
}

impl DecisionTrace {
    pub fn new() -> Self {
        DecisionTrace::default()
    }

    pub fn from_entries(entries: Vec<TraceEntry>) -> Self {
        DecisionTrace { entries }
    }

    pub fn push(&mut self, entry: TraceEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = TraceEntry>) {
        self.entries.extend(entries);
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of rollout steps covered.
    pub fn rollout_steps(&self) -> usize {
        self.entries.iter().map(|e| e.step + 1).max().unwrap_or(0)
    }

    pub fn for_step(&self, step: usize) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(move |e| e.step == step)
    }

    pub fn for_branch(&self, branch: BranchKind) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(move |e| e.branch == branch)
    }

    /// Executed compute count for one branch across the whole trace.
    pub fn compute_count(&self, branch: BranchKind) -> usize {
        self.for_branch(branch)
            .filter(|e| e.decision.is_compute())
            .count()
    }

    /// Longest run of consecutive skips within any single rollout step.
    pub fn max_consecutive_skips(&self, branch: BranchKind) -> usize {
        let mut max_run = 0usize;
        let mut run = 0usize;
        let mut current_step = None;
        for e in self.for_branch(branch) {
            if current_step != Some(e.step) {
                current_step = Some(e.step);
                run = 0;
            }
            match e.decision {
                Decision::Skip => {
                    run += 1;
                    max_run = max_run.max(run);
                }
                Decision::Compute => run = 0,
            }
        }
        max_run
    }

    /// Structural invariant checks over the whole trace. Returns one message
    /// per violation; an empty list means the trace is clean.
    ///
    /// `num_steps` is the grid step count `K`, `c_max` the skip cap the trace
    /// was produced under.
    pub fn audit(&self, num_steps: usize, c_max: u32) -> Vec<String> {
        let mut violations = Vec::new();
        let rollout_steps = self.rollout_steps();

        for s in 0..rollout_steps {
            for branch in BranchKind::ALL {
                let entries: Vec<&TraceEntry> =
                    self.for_step(s).filter(|e| e.branch == branch).collect();
                if entries.len() != num_steps {
                    violations.push(format!(
                        "step {s} {branch}: {} entries, expected {num_steps}",
                        entries.len()
                    ));
                    continue;
                }
                let expected_ks: Vec<usize> = (1..=num_steps).rev().collect();
                let got_ks: Vec<usize> = entries.iter().map(|e| e.k).collect();
                if got_ks != expected_ks {
                    violations.push(format!("step {s} {branch}: k sequence out of order"));
                }

                let mut skips = 0u32;
                for e in &entries {
                    if e.skips_before != skips {
                        violations.push(format!(
                            "step {s} {branch} k={}: skips_before {} but recomputed {skips}",
                            e.k, e.skips_before
                        ));
                    }
                    if e.guard_fired() && e.decision.is_skip() {
                        violations.push(format!(
                            "step {s} {branch} k={}: guard fired but decision is skip",
                            e.k
                        ));
                    }
                    match e.decision {
                        Decision::Skip => skips += 1,
                        Decision::Compute => skips = 0,
                    }
                    if skips > c_max {
                        violations.push(format!(
                            "step {s} {branch} k={}: {skips} consecutive skips exceed cap {c_max}",
                            e.k
                        ));
                    }
                }
            }

            // Cross-branch checks per diffusion step.
            for k in 1..=num_steps {
                let at =
                    |branch: BranchKind| self.for_step(s).find(|e| e.branch == branch && e.k == k);
                let (Some(vision), Some(trajectory)) =
                    (at(BranchKind::Vision), at(BranchKind::Trajectory))
                else {
                    continue;
                };
                if trajectory.guard_fired() && !vision.decision.is_compute() {
                    violations.push(format!(
                        "step {s} k={k}: trajectory guard fired but vision skipped"
                    ));
                }
                if trajectory.gate_forced {
                    violations.push(format!(
                        "step {s} k={k}: gate_forced set on a trajectory entry"
                    ));
                }
                if vision.gate_forced && !trajectory.guard_fired() {
                    violations.push(format!(
                        "step {s} k={k}: vision gate_forced without a trajectory guard"
                    ));
                }
                if vision.gate_forced && !vision.decision.is_compute() {
                    violations.push(format!(
                        "step {s} k={k}: gate_forced vision entry is not a compute"
                    ));
                }
            }
        }
        violations
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(step: usize, k: usize, branch: BranchKind, decision: Decision) -> TraceEntry {
        TraceEntry {
            step,
            k,
            branch,
            decision,
            warmup: false,
            cap: false,
            stall: false,
            gate_forced: false,
            diff: 0.1,
            residual: None,
            skips_before: 0,
        }
    }

    fn consistent_trace(decisions: &[Decision]) -> DecisionTrace {
        let num = decisions.len();
        let mut trace = DecisionTrace::new();
        for branch in BranchKind::ALL {
            let mut skips = 0u32;
            for (i, &d) in decisions.iter().enumerate() {
                let mut e = entry(0, num - i, branch, d);
                e.skips_before = skips;
                match d {
                    Decision::Skip => skips += 1,
                    Decision::Compute => skips = 0,
                }
                trace.push(e);
            }
        }
        trace
    }

    #[test]
    fn clean_trace_has_no_violations() {
        use Decision::*;
        let trace = consistent_trace(&[Compute, Compute, Compute, Skip, Skip, Compute]);
        assert!(trace.audit(6, 4).is_empty());
    }

    #[test]
    fn audit_flags_cap_violation() {
        use Decision::*;
        let trace = consistent_trace(&[Compute, Skip, Skip, Skip, Skip, Skip]);
        let violations = trace.audit(6, 4);
        assert!(violations.iter().any(|v| v.contains("exceed cap")));
    }

    #[test]
    fn audit_flags_gate_violation() {
        use Decision::*;
        let mut trace = consistent_trace(&[Compute, Skip]);
        // Make the trajectory guard fire at k=1 while vision skipped there.
        let entries: Vec<TraceEntry> = trace
            .entries()
            .iter()
            .cloned()
            .map(|mut e| {
                if e.branch == BranchKind::Trajectory && e.k == 1 {
                    e.stall = true;
                    e.decision = Compute;
                    e.skips_before = 1;
                }
                e
            })
            .collect();
        trace = DecisionTrace::from_entries(entries);
        let violations = trace.audit(2, 4);
        assert!(violations.iter().any(|v| v.contains("vision skipped")));
    }

    #[test]
    fn audit_flags_missing_entries() {
        let mut trace = DecisionTrace::new();
        trace.push(entry(0, 2, BranchKind::Vision, Decision::Compute));
        let violations = trace.audit(2, 4);
        assert!(!violations.is_empty());
    }

    #[test]
    fn max_consecutive_skips_resets_across_rollout_steps() {
        use Decision::*;
        let mut trace = DecisionTrace::new();
        // Two skips at the end of step 0, two at the start of step 1:
        // runs must not merge across the boundary.
        for (s, ds) in [(0usize, [Compute, Skip, Skip]), (1, [Skip, Skip, Compute])] {
            let mut skips = 0u32;
            for (i, d) in ds.into_iter().enumerate() {
                let mut e = entry(s, 3 - i, BranchKind::Vision, d);
                e.skips_before = skips;
                match d {
                    Skip => skips += 1,
                    Compute => skips = 0,
                }
                trace.push(e);
            }
        }
        assert_eq!(trace.max_consecutive_skips(BranchKind::Vision), 2);
    }
}
