//! Per-branch skip controller.
//!
//! The controller watches the scalar diff sequence `d_k = mean |x_k - x_{k-1}|`
//! of one branch while the sampler walks the grid from `k = K` down to `1`.
//! At the end of step `k` it pushes the fresh diff into a three-slot FIFO and
//! tests the second-order residual of the window: when the diff trend is
//! locally affine (residual at or below `theta * d_{k+1}`) the *next* step is
//! marked as a skip. Three safety guards override that decision at the top of
//! each step: a warm-up window of mandatory computes, a cap on consecutive
//! skips, and a stall check on the most recent diff.

use serde::{Deserialize, Serialize};

use crate::config::ControllerConfig;
use crate::error::{Error, Result};
use crate::types::{CrossModalSeed, Decision, Latent};

/// Mean absolute change between consecutive latents of one branch.
///
/// Inputs must share branch and dimension; the diffusion indices are expected
/// to be adjacent but are not checked.
pub fn mean_abs_diff(prev: &Latent, next: &Latent) -> Result<f64> {
    if prev.branch != next.branch {
        return Err(Error::BranchMismatch {
            expected: prev.branch,
            got: next.branch,
        });
    }
    if prev.dim() != next.dim() {
        return Err(Error::DimensionMismatch {
            expected: prev.dim(),
            got: next.dim(),
        });
    }
    let sum: f64 = prev
        .values
        .iter()
        .zip(&next.values)
        .map(|(a, b)| (b - a).abs())
        .sum();
    Ok(sum / prev.dim() as f64)
}

/// Second-order finite-difference residual of three consecutive diffs,
/// ordered oldest to newest: `|(oldest + newest)/2 - middle|`.
///
/// Zero exactly when the three values are affine in their index.
pub fn second_order_residual(oldest: f64, middle: f64, newest: f64) -> f64 {
    (0.5 * (newest + oldest) - middle).abs()
}

/// Smoothness test: skip when the residual is within `theta_eff` times the
/// reference diff. The boundary is inclusive.
pub fn smoothness_skip_test(delta: f64, d_recent: f64, theta_eff: f64) -> Decision {
    if delta <= theta_eff * d_recent {
        Decision::Skip
    } else {
        Decision::Compute
    }
}

/// FIFO of the most recent three diffs, newest last.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiffWindow {
    vals: [f64; 3],
    len: usize,
}

impl DiffWindow {
    pub fn push(&mut self, diff: f64) {
        if self.len < 3 {
            self.vals[self.len] = diff;
            self.len += 1;
        } else {
            self.vals[0] = self.vals[1];
            self.vals[1] = self.vals[2];
            self.vals[2] = diff;
        }
    }

    pub fn clear(&mut self) {
        self.len = 0;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_ready(&self) -> bool {
        self.len == 3
    }

    /// Most recently pushed diff, if any.
    pub fn recent(&self) -> Option<f64> {
        (self.len > 0).then(|| self.vals[self.len - 1])
    }

    /// Middle entry of a full window.
    pub fn middle(&self) -> Option<f64> {
        self.is_ready().then(|| self.vals[1])
    }

    /// Residual of a full window; `None` signals not-ready, in which case the
    /// caller must default to a compute.
    pub fn residual(&self) -> Option<f64> {
        self.is_ready()
            .then(|| second_order_residual(self.vals[0], self.vals[1], self.vals[2]))
    }
}

/// Which local guards fired for one branch at one diffusion step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardFlags {
    pub warmup: bool,
    pub cap: bool,
    pub stall: bool,
}

impl GuardFlags {
    /// The safety signal: 1 when any guard fired.
    pub fn any(self) -> bool {
        self.warmup || self.cap || self.stall
    }
}

/// Mutable controller state for one branch within one rollout step.
#[derive(Debug, Clone)]
pub struct ControllerState {
    window: DiffWindow,
    consecutive_skips: u32,
    next_decision: Decision,
    local_safety_triggers: u32,
    effective_theta: f64,
    effective_warmup: u32,
    last_residual: Option<f64>,
}

impl ControllerState {
    pub fn new(cfg: &ControllerConfig) -> Self {
        let mut state = ControllerState {
            window: DiffWindow::default(),
            consecutive_skips: 0,
            next_decision: Decision::Compute,
            local_safety_triggers: 0,
            effective_theta: cfg.theta,
            effective_warmup: cfg.warmup,
            last_residual: None,
        };
        state.reset(None, cfg);
        state
    }

    /// Clears the window and counters for a new rollout step. With a seed the
    /// effective warm-up and threshold come from it; otherwise from config.
    pub fn reset(&mut self, seed: Option<&CrossModalSeed>, cfg: &ControllerConfig) {
        self.window.clear();
        self.consecutive_skips = 0;
        self.next_decision = Decision::Compute;
        self.local_safety_triggers = 0;
        self.last_residual = None;
        match seed {
            Some(s) => {
                self.effective_warmup = s.seeded_warmup.max(cfg.warmup);
                self.effective_theta = s.seeded_theta.max(cfg.theta);
            }
            None => {
                self.effective_warmup = cfg.warmup;
                self.effective_theta = cfg.theta;
            }
        }
    }

    /// Evaluates the three local guards at the top of diffusion step `k`
    /// (1-based, counting down from `num_steps`).
    ///
    /// The stall term reads the most recent diff, which at step `k` is
    /// `d_{k+1}`; while the window is empty the term is omitted.
    pub fn safety_signal(&self, k: usize, num_steps: usize, cfg: &ControllerConfig) -> GuardFlags {
        let warmup = k + (self.effective_warmup as usize) > num_steps;
        let cap = self.consecutive_skips == cfg.c_max;
        let stall = match self.window.recent() {
            Some(d) => d <= cfg.epsilon,
            None => false,
        };
        GuardFlags { warmup, cap, stall }
    }

    /// Records the executed decision for the current step.
    ///
    /// A skip advances the consecutive-skip counter; any compute resets it,
    /// including gate-forced ones. The local trigger tally moves only when a
    /// local guard fired — a gate-forced compute alone never counts.
    pub fn register_decision_outcome(
        &mut self,
        executed: Decision,
        local_guard_fired: bool,
        _gate_forced: bool,
    ) {
        match executed {
            Decision::Skip => self.consecutive_skips += 1,
            Decision::Compute => self.consecutive_skips = 0,
        }
        if local_guard_fired {
            self.local_safety_triggers += 1;
        }
    }

    /// Pushes the diff observed at the end of the current step and sets the
    /// decision for the next one.
    ///
    /// Skip requires a full window, a residual within `theta_eff` of the
    /// previous diff, and headroom under the consecutive-skip cap; anything
    /// else defaults to compute.
    pub fn observe_and_decide(&mut self, new_diff: f64, cfg: &ControllerConfig) -> Decision {
        self.window.push(new_diff);
        self.last_residual = self.window.residual();
        self.next_decision = match (self.last_residual, self.window.middle()) {
            (Some(delta), Some(d_prev)) => {
                if smoothness_skip_test(delta, d_prev, self.effective_theta).is_skip()
                    && self.consecutive_skips < cfg.c_max
                {
                    Decision::Skip
                } else {
                    Decision::Compute
                }
            }
            _ => Decision::Compute,
        };
        self.next_decision
    }

    pub fn next_decision(&self) -> Decision {
        self.next_decision
    }

    pub fn consecutive_skips(&self) -> u32 {
        self.consecutive_skips
    }

    pub fn local_safety_triggers(&self) -> u32 {
        self.local_safety_triggers
    }

    pub fn effective_theta(&self) -> f64 {
        self.effective_theta
    }

    pub fn effective_warmup(&self) -> u32 {
        self.effective_warmup
    }

    /// Residual computed by the latest `observe_and_decide`, if the window
    /// was full.
    pub fn last_residual(&self) -> Option<f64> {
        self.last_residual
    }

    pub fn recent_diff(&self) -> Option<f64> {
        self.window.recent()
    }

    pub fn window(&self) -> &DiffWindow {
        &self.window
    }
}
