//! Dual-branch execution of one rollout step.
//!
//! Per diffusion step the order is fixed: evaluate local guards for both
//! branches, let any fired guard force that branch to compute, apply the
//! unidirectional gate (a trajectory guard forces a vision compute, never the
//! reverse), then execute both branch updates and feed the fresh diffs back
//! into the controllers for the next-step decision.

use crate::config::ControllerConfig;
use crate::controller::ControllerState;
use crate::error::{Error, Result};
use crate::grid::DiffusionGrid;
use crate::model::BranchModel;
use crate::rollout::{initial_noise, noise_seed, ContextRecord};
use crate::sampler::{step, VelocityCache};
use crate::trace::TraceEntry;
use crate::types::{BranchKind, BranchPair, CrossModalSeed, Decision, Latent, StepSummary};

/// Everything one rollout step needs.
pub struct DualStepInputs<'a> {
    pub ctx: &'a ContextRecord,
    pub models: BranchPair<&'a dyn BranchModel>,
    pub grid: &'a DiffusionGrid,
    pub cfg: &'a ControllerConfig,
    /// Seed emitted by the previous rollout step, if any.
    pub seed_in: Option<CrossModalSeed>,
    pub dims: BranchPair<usize>,
    /// Scenario-level seed; per-branch draws are derived from it together
    /// with the rollout-step index.
    pub base_seed: u64,
    pub step_index: usize,
    /// Disables skipping entirely; used for the full-compute baseline.
    pub force_compute: bool,
}

/// Output of one rollout step, including the per-step trace slice.
#[derive(Debug, Clone)]
pub struct DualStepResult {
    pub x0: BranchPair<Latent>,
    pub summaries: BranchPair<StepSummary>,
    pub seed_out: CrossModalSeed,
    /// The seed that was actually consumed, kept for auditing.
    pub seed_in: Option<CrossModalSeed>,
    /// Initial-noise seeds per branch, kept for auditing.
    pub noise_seeds: BranchPair<u64>,
    pub context: ContextRecord,
    pub entries: Vec<TraceEntry>,
}

/// Unidirectional safety gate. A fired trajectory guard forces the vision
/// decision to compute; `gate_forced` reports whether that actually flipped
/// a skip. The trajectory decision is never touched by vision.
pub fn apply_gate(trajectory_guard_fired: bool, vision_decision: Decision) -> (Decision, bool) {
    if trajectory_guard_fired {
        (Decision::Compute, vision_decision.is_skip())
    } else {
        (vision_decision, false)
    }
}

/// Seeds the next rollout step's controller from the cross-modal difficulty
/// score: the warm-up window grows as `max(W, floor(gamma * beta * K))` and
/// the threshold as `theta * (1 + lambda * beta)`.
pub fn seed_next(beta: f64, cfg: &ControllerConfig, num_steps: usize) -> CrossModalSeed {
    debug_assert!((0.0..=1.0).contains(&beta), "beta out of [0, 1]: {beta}");
    let grown = (cfg.gamma * beta * num_steps as f64).floor() as u32;
    CrossModalSeed {
        beta,
        seeded_warmup: cfg.warmup.max(grown),
        seeded_theta: cfg.theta * (1.0 + cfg.lambda * beta),
    }
}

/// Reduces one rollout step's trace slice to per-branch summaries and the
/// seed for the next step.
///
/// The safety fraction counts only steps where a local guard fired;
/// gate-forced computes never contribute.
pub fn summarize(
    entries: &[TraceEntry],
    num_steps: usize,
    cfg: &ControllerConfig,
) -> Result<(BranchPair<StepSummary>, CrossModalSeed)> {
    let mut summaries: Vec<StepSummary> = Vec::with_capacity(2);
    for branch in BranchKind::ALL {
        let slice: Vec<&TraceEntry> = entries.iter().filter(|e| e.branch == branch).collect();
        if slice.len() != num_steps {
            return Err(Error::IncompleteTrace(format!(
                "{branch} has {} entries, expected {num_steps}",
                slice.len()
            )));
        }
        let computes = slice.iter().filter(|e| e.decision.is_compute()).count();
        let guard_steps = slice.iter().filter(|e| e.guard_fired()).count();
        summaries.push(StepSummary::from_counts(
            branch,
            computes,
            num_steps - computes,
            guard_steps,
        ));
    }
    let pair = BranchPair::new(summaries[0], summaries[1]);
    let beta = pair
        .vision
        .safety_fraction
        .max(pair.trajectory.safety_fraction);
    Ok((pair, seed_next(beta, cfg, num_steps)))
}

/// Runs both branches over the full grid for one rollout step.
pub fn run_dual_step(inputs: DualStepInputs<'_>) -> Result<DualStepResult> {
    let num_steps = inputs.grid.num_steps();
    let cfg = inputs.cfg.validate(num_steps)?;

    let noise_seeds = BranchPair::new(
        noise_seed(inputs.base_seed, inputs.step_index, BranchKind::Vision),
        noise_seed(inputs.base_seed, inputs.step_index, BranchKind::Trajectory),
    );
    let mut latents = BranchPair::new(
        initial_noise(
            inputs.dims.vision,
            BranchKind::Vision,
            num_steps,
            noise_seeds.vision,
        ),
        initial_noise(
            inputs.dims.trajectory,
            BranchKind::Trajectory,
            num_steps,
            noise_seeds.trajectory,
        ),
    );

    let mut states = BranchPair::new(ControllerState::new(&cfg), ControllerState::new(&cfg));
    for branch in BranchKind::ALL {
        states.get_mut(branch).reset(inputs.seed_in.as_ref(), &cfg);
    }
    let mut caches = BranchPair::new(VelocityCache::new(), VelocityCache::new());

    let mut entries = Vec::with_capacity(2 * num_steps);
    for k in (1..=num_steps).rev() {
        // Decision phase: guards for both branches, then the gate. This is
        // strictly sequential so the gate reads a fixed trajectory signal.
        let flags = BranchPair::new(
            states.vision.safety_signal(k, num_steps, &cfg),
            states.trajectory.safety_signal(k, num_steps, &cfg),
        );
        let pending = |branch: BranchKind| {
            if inputs.force_compute || flags.get(branch).any() {
                Decision::Compute
            } else {
                states.get(branch).next_decision()
            }
        };
        let decision_trajectory = pending(BranchKind::Trajectory);
        let (decision_vision, gate_forced) =
            apply_gate(flags.trajectory.any(), pending(BranchKind::Vision));
        let decisions = BranchPair::new(decision_vision, decision_trajectory);

        // Execution phase, fixed branch order for a deterministic trace.
        for branch in BranchKind::ALL {
            let decision = *decisions.get(branch);
            let forced = branch == BranchKind::Vision && gate_forced;
            let branch_flags = *flags.get(branch);
            let (next, _velocity) = step(
                latents.get(branch),
                k,
                decision,
                *inputs.models.get(branch),
                caches.get_mut(branch),
                inputs.grid,
                inputs.ctx,
            )?;
            let diff = crate::controller::mean_abs_diff(latents.get(branch), &next)?;
            let state = states.get_mut(branch);
            let skips_before = state.consecutive_skips();
            state.register_decision_outcome(decision, branch_flags.any(), forced);
            state.observe_and_decide(diff, &cfg);
            entries.push(TraceEntry {
                step: inputs.step_index,
                k,
                branch,
                decision,
                warmup: branch_flags.warmup,
                cap: branch_flags.cap,
                stall: branch_flags.stall,
                gate_forced: forced,
                diff,
                residual: state.last_residual(),
                skips_before,
            });
            *latents.get_mut(branch) = next;
        }
    }

    let (summaries, seed_out) = summarize(&entries, num_steps, &cfg)?;
    Ok(DualStepResult {
        x0: latents,
        summaries,
        seed_out,
        seed_in: inputs.seed_in,
        noise_seeds,
        context: inputs.ctx.clone(),
        entries,
    })
}
