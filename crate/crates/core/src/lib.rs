//! Adaptive dual-branch diffusion sampling with per-step skip control.
//!
//! The engine drives two coupled denoising samplers (a vision branch and a
//! trajectory branch) over a shared diffusion time grid. A per-branch
//! controller watches the evolution of latent changes and decides, one step
//! ahead, whether the next sampler update can reuse the cached velocity
//! prediction instead of evaluating the branch model. Three safety guards
//! (warm-up, consecutive-skip cap, stall check) bound how aggressive the
//! skipping can get, and a unidirectional gate forces a vision compute
//! whenever any trajectory guard fires. Controller statistics from each
//! rollout step seed the next step's warm-up window and skip threshold so
//! closed-loop rollouts stay stable.
//!
//! All runs are deterministic given a scenario, a config, and a seed. Toy
//! branch models with known endpoints make exactness testable: an affine
//! flow is integrated exactly by the Euler update, so any divergence between
//! an adaptive run and the full-compute baseline is controller error.

pub mod config;
pub mod controller;
pub mod error;
pub mod grid;
pub mod model;
pub mod orchestrator;
pub mod rollout;
pub mod sampler;
pub mod scenario;
pub mod trace;
pub mod types;

pub use config::ControllerConfig;
pub use controller::{ControllerState, GuardFlags};
pub use error::{Error, Result};
pub use grid::DiffusionGrid;
pub use model::{AffineFlowModel, BranchModel, CurvedFlowModel};
pub use orchestrator::{run_dual_step, DualStepInputs, DualStepResult};
pub use rollout::{run_rollout, ContextRecord, RolloutResult};
pub use sampler::VelocityCache;
pub use scenario::{ScenarioSpec, SegmentLabel};
pub use trace::{DecisionTrace, TraceEntry};
pub use types::{BranchKind, BranchPair, CrossModalSeed, Decision, Latent, StepSummary};
