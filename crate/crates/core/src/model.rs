//! Branch velocity models.
//!
//! Toy analytic stand-ins for the two branch networks. Both follow the
//! rectified-flow convention: the field points along the straight line from
//! the current latent to a known target, so a forward Euler sweep over the
//! descending grid lands on the target. The curved variant adds a bump whose
//! exact flow integrates to zero over the full grid, leaving the continuous
//! endpoint unchanged while making the diff sequence non-affine.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::rollout::ContextRecord;
use crate::types::Latent;

/// Velocity field of one branch.
///
/// `evaluate` must be deterministic in `(x, tau, ctx)` and bump the eval
/// counter by exactly one per call. `ground_truth` exposes the exact final
/// latent when the model knows it.
pub trait BranchModel: Send + Sync {
    fn evaluate(&self, x: &Latent, tau: f64, ctx: &ContextRecord) -> Vec<f64>;

    fn ground_truth(&self, ctx: &ContextRecord) -> Option<Vec<f64>>;

    /// Total `evaluate` calls since construction.
    fn eval_count(&self) -> u64;
}

/// Straight-line flow toward a fixed target.
///
/// The field `(x - target) / tau` is constant along the exact path, so Euler
/// integration over any grid reaches the target and cached-velocity reuse
/// reproduces a fresh evaluation up to rounding.
#[derive(Debug)]
pub struct AffineFlowModel {
    target: Vec<f64>,
    evals: AtomicU64,
}

impl AffineFlowModel {
    pub fn new(target: Vec<f64>) -> Self {
        AffineFlowModel {
            target,
            evals: AtomicU64::new(0),
        }
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }
}

impl BranchModel for AffineFlowModel {
    fn evaluate(&self, x: &Latent, tau: f64, _ctx: &ContextRecord) -> Vec<f64> {
        debug_assert!(tau > 0.0, "evaluate is never called at tau = 0");
        self.evals.fetch_add(1, Ordering::Relaxed);
        x.values
            .iter()
            .zip(&self.target)
            .map(|(xi, ti)| (xi - ti) / tau)
            .collect()
    }

    fn ground_truth(&self, _ctx: &ContextRecord) -> Option<Vec<f64>> {
        Some(self.target.clone())
    }

    fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

/// Straight-line flow plus an oscillating bump.
///
/// The field is `(x - target) / tau + a * pi * f * cos(pi * f * tau) * bump`.
/// The exact flow still ends at the target; the Euler endpoint deviates by
/// O(1/K). With `amplitude = 0` this is byte-for-byte the affine model.
#[derive(Debug)]
pub struct CurvedFlowModel {
    target: Vec<f64>,
    amplitude: f64,
    frequency: f64,
    bump: Vec<f64>,
    evals: AtomicU64,
}

impl CurvedFlowModel {
    /// Default bump direction: alternating full-strength signs, so the bump
    /// moves every component without shrinking with dimension.
    pub fn new(target: Vec<f64>, amplitude: f64, frequency: f64) -> Self {
        let bump = (0..target.len())
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        Self::with_bump(target, amplitude, frequency, bump)
    }

    pub fn with_bump(target: Vec<f64>, amplitude: f64, frequency: f64, bump: Vec<f64>) -> Self {
        assert_eq!(target.len(), bump.len(), "bump must match target dimension");
        assert!(amplitude >= 0.0, "amplitude must be nonnegative");
        CurvedFlowModel {
            target,
            amplitude,
            frequency,
            bump,
            evals: AtomicU64::new(0),
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

impl BranchModel for CurvedFlowModel {
    fn evaluate(&self, x: &Latent, tau: f64, _ctx: &ContextRecord) -> Vec<f64> {
        debug_assert!(tau > 0.0, "evaluate is never called at tau = 0");
        self.evals.fetch_add(1, Ordering::Relaxed);
        let phase = std::f64::consts::PI * self.frequency * tau;
        let osc = self.amplitude * std::f64::consts::PI * self.frequency * phase.cos();
        x.values
            .iter()
            .zip(&self.target)
            .zip(&self.bump)
            .map(|((xi, ti), bi)| (xi - ti) / tau + osc * bi)
            .collect()
    }

    fn ground_truth(&self, _ctx: &ContextRecord) -> Option<Vec<f64>> {
        Some(self.target.clone())
    }

    fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}
