//! Shared domain types: branches, latents, decisions, and per-step summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two coupled sampler branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Vision,
    Trajectory,
}

impl BranchKind {
    /// Both branches in the fixed engine order (vision first).
    pub const ALL: [BranchKind; 2] = [BranchKind::Vision, BranchKind::Trajectory];

    pub fn name(self) -> &'static str {
        match self {
            BranchKind::Vision => "vision",
            BranchKind::Trajectory => "trajectory",
        }
    }
}

impl std::fmt::Display for BranchKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-step sampler decision: run the branch model or reuse the cache.
///
/// A `Skip` is only executable while a cached velocity exists for the branch;
/// the sampler rejects it otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Compute,
    Skip,
}

impl Decision {
    pub fn is_compute(self) -> bool {
        matches!(self, Decision::Compute)
    }

    pub fn is_skip(self) -> bool {
        matches!(self, Decision::Skip)
    }
}

/// A branch latent at one diffusion step.
///
/// The dimension is fixed for the duration of a sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub values: Vec<f64>,
    pub branch: BranchKind,
    /// Current diffusion-step index; `k = 0` is the final latent.
    pub k: usize,
}

impl Latent {
    pub fn new(values: Vec<f64>, branch: BranchKind, k: usize) -> Self {
        Latent { values, branch, k }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Euclidean distance to another latent of the same shape.
    pub fn l2_distance(&self, other: &Latent) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum.sqrt())
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A value per branch, in fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchPair<T> {
    pub vision: T,
    pub trajectory: T,
}

impl<T> BranchPair<T> {
    pub fn new(vision: T, trajectory: T) -> Self {
        BranchPair { vision, trajectory }
    }

    pub fn get(&self, branch: BranchKind) -> &T {
        match branch {
            BranchKind::Vision => &self.vision,
            BranchKind::Trajectory => &self.trajectory,
        }
    }

    pub fn get_mut(&mut self, branch: BranchKind) -> &mut T {
        match branch {
            BranchKind::Vision => &mut self.vision,
            BranchKind::Trajectory => &mut self.trajectory,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> BranchPair<U> {
        BranchPair {
            vision: f(&self.vision),
            trajectory: f(&self.trajectory),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (BranchKind, &T)> {
        BranchKind::ALL.into_iter().map(move |b| (b, self.get(b)))
    }
}

/// Per-branch compute/skip accounting for one rollout step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub branch: BranchKind,
    /// Number of diffusion steps that evaluated the branch model.
    pub computes: usize,
    /// Number of diffusion steps that reused the cached velocity.
    pub skips: usize,
    /// `computes / K`, in [0, 1].
    pub compute_ratio: f64,
    /// Fraction of diffusion steps where any local safety guard fired.
    /// Gate-forced computes do not count here.
    pub safety_fraction: f64,
}

impl StepSummary {
    pub fn from_counts(
        branch: BranchKind,
        computes: usize,
        skips: usize,
        guard_steps: usize,
    ) -> Self {
        let k = computes + skips;
        StepSummary {
            branch,
            computes,
            skips,
            compute_ratio: computes as f64 / k as f64,
            safety_fraction: guard_steps as f64 / k as f64,
        }
    }

    /// Total diffusion steps covered by this summary.
    pub fn num_steps(&self) -> usize {
        self.computes + self.skips
    }
}

/// Controller seed carried from one rollout step to the next.
///
/// `beta` is the larger of the two branches' safety fractions; the seeded
/// warm-up and threshold are never below the config baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossModalSeed {
    pub beta: f64,
    pub seeded_warmup: u32,
    pub seeded_theta: f64,
}
