//! Autoregressive rollout loop.
//!
//! Each rollout step conditions on the previous step's adaptive outputs
//! (chain-of-forward), consumes the controller seed emitted one step earlier,
//! and is paired with a force-compute baseline run that consumes the exact
//! same initial-noise draws.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ControllerConfig;
use crate::error::{Error, Result};
use crate::grid::DiffusionGrid;
use crate::model::{AffineFlowModel, BranchModel, CurvedFlowModel};
use crate::orchestrator::{run_dual_step, DualStepInputs, DualStepResult};
use crate::scenario::{derive_seed, ScenarioSpec, SegmentLabel};
use crate::trace::DecisionTrace;
use crate::types::{BranchKind, BranchPair, Latent};

/// Conditioning context for one rollout step: the previous final latents of
/// both branches plus the step index and segment label.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextRecord {
    pub step_index: usize,
    pub prev_x0_vision: Latent,
    pub prev_x0_trajectory: Latent,
    pub segment: SegmentLabel,
}

impl ContextRecord {
    /// Context at `s = 0`: zero latents as the scenario's initial condition.
    pub fn initial(vision_dim: usize, trajectory_dim: usize) -> Self {
        ContextRecord {
            step_index: 0,
            prev_x0_vision: Latent::new(vec![0.0; vision_dim], BranchKind::Vision, 0),
            prev_x0_trajectory: Latent::new(vec![0.0; trajectory_dim], BranchKind::Trajectory, 0),
            segment: SegmentLabel::Cruise,
        }
    }

    pub fn prev_x0(&self, branch: BranchKind) -> &Latent {
        match branch {
            BranchKind::Vision => &self.prev_x0_vision,
            BranchKind::Trajectory => &self.prev_x0_trajectory,
        }
    }
}

const NOISE_TAG: u64 = 0x6E0_15E;

/// Seed for the initial-noise draw of one (rollout step, branch) pair.
/// Adaptive and baseline runs call this with identical arguments, so they
/// consume identical draws.
pub fn noise_seed(base: u64, step_index: usize, branch: BranchKind) -> u64 {
    let branch_tag = match branch {
        BranchKind::Vision => 1u64,
        BranchKind::Trajectory => 2u64,
    };
    derive_seed(base, NOISE_TAG, ((step_index as u64) << 8) | branch_tag)
}

/// Standard-normal initial latent at diffusion index `k`.
pub fn initial_noise(dim: usize, branch: BranchKind, k: usize, seed: u64) -> Latent {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    Latent::new(values, branch, k)
}

/// Adaptive rollout paired with its full-compute baseline.
#[derive(Debug, Clone)]
pub struct RolloutResult {
    /// Per-step adaptive results, in order.
    pub steps: Vec<DualStepResult>,
    /// Per-step baseline final latents.
    pub baseline_x0: Vec<BranchPair<Latent>>,
    /// Per-step Euclidean distance between adaptive and baseline outputs.
    pub errors_vs_baseline: Vec<BranchPair<f64>>,
    /// Per-step distance to the model's exact endpoint, when it exposes one.
    pub errors_vs_truth: Vec<BranchPair<Option<f64>>>,
    /// Mean compute ratio per branch over the whole rollout.
    pub compute_ratio: BranchPair<f64>,
    /// Model evaluations consumed by the adaptive run.
    pub eval_counts: BranchPair<u64>,
    /// Model evaluations consumed by the baseline run.
    pub baseline_eval_counts: BranchPair<u64>,
    pub trace: DecisionTrace,
}

impl RolloutResult {
    pub fn num_rollout_steps(&self) -> usize {
        self.steps.len()
    }

    /// Largest adaptive-vs-baseline error across all steps for one branch.
    pub fn max_error_vs_baseline(&self, branch: BranchKind) -> f64 {
        self.errors_vs_baseline
            .iter()
            .map(|e| *e.get(branch))
            .fold(0.0, f64::max)
    }
}

/// Per-step Euclidean distance between paired latents.
pub fn compare_to_baseline(
    adaptive: &[BranchPair<Latent>],
    baseline: &[BranchPair<Latent>],
) -> Result<Vec<BranchPair<f64>>> {
    if adaptive.len() != baseline.len() {
        return Err(Error::DimensionMismatch {
            expected: adaptive.len(),
            got: baseline.len(),
        });
    }
    adaptive
        .iter()
        .zip(baseline)
        .map(|(a, b)| {
            Ok(BranchPair::new(
                a.vision.l2_distance(&b.vision)?,
                a.trajectory.l2_distance(&b.trajectory)?,
            ))
        })
        .collect()
}

/// Builds the per-step branch models. The effective target is the scenario
/// target shifted by `context_coupling` times the previous output of the
/// same branch, which is what makes the rollout chain-of-forward.
fn build_model(
    spec: &ScenarioSpec,
    step_index: usize,
    branch: BranchKind,
    ctx: &ContextRecord,
) -> Box<dyn BranchModel> {
    let plan = spec.step(step_index);
    let base = match branch {
        BranchKind::Vision => &plan.target_vision,
        BranchKind::Trajectory => &plan.target_trajectory,
    };
    let prev = ctx.prev_x0(branch);
    let target: Vec<f64> = base
        .iter()
        .zip(&prev.values)
        .map(|(t, p)| t + spec.context_coupling * p)
        .collect();
    if plan.amplitude == 0.0 {
        Box::new(AffineFlowModel::new(target))
    } else {
        Box::new(CurvedFlowModel::new(target, plan.amplitude, plan.frequency))
    }
}

fn run_chain(
    spec: &ScenarioSpec,
    cfg: &ControllerConfig,
    grid: &DiffusionGrid,
    force_compute: bool,
) -> Result<(Vec<DualStepResult>, BranchPair<u64>)> {
    let mut ctx = ContextRecord::initial(spec.vision_dim, spec.trajectory_dim);
    let mut seed_in = None;
    let mut results = Vec::with_capacity(spec.num_rollout_steps());
    let mut evals = BranchPair::new(0u64, 0u64);

    for s in 0..spec.num_rollout_steps() {
        ctx.step_index = s;
        ctx.segment = spec.step(s).label;
        let vision_model = build_model(spec, s, BranchKind::Vision, &ctx);
        let trajectory_model = build_model(spec, s, BranchKind::Trajectory, &ctx);
        let result = run_dual_step(DualStepInputs {
            ctx: &ctx,
            models: BranchPair::new(vision_model.as_ref(), trajectory_model.as_ref()),
            grid,
            cfg,
            seed_in,
            dims: BranchPair::new(spec.vision_dim, spec.trajectory_dim),
            base_seed: spec.rng_seed,
            step_index: s,
            force_compute,
        })?;
        evals.vision += vision_model.eval_count();
        evals.trajectory += trajectory_model.eval_count();
        seed_in = Some(result.seed_out);
        ctx = ContextRecord {
            step_index: s + 1,
            prev_x0_vision: result.x0.vision.clone(),
            prev_x0_trajectory: result.x0.trajectory.clone(),
            segment: ctx.segment,
        };
        results.push(result);
    }
    Ok((results, evals))
}

/// A single rollout chain: per-step results plus total model evaluations.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub steps: Vec<DualStepResult>,
    pub eval_counts: BranchPair<u64>,
}

/// Runs only the force-compute chain; every decision is a compute and the
/// outputs are the exactness oracle for adaptive runs.
pub fn run_force_compute(
    spec: &ScenarioSpec,
    cfg: &ControllerConfig,
    grid: &DiffusionGrid,
) -> Result<ChainResult> {
    let cfg = cfg.validate(grid.num_steps())?;
    let (steps, eval_counts) = run_chain(spec, &cfg, grid, true)?;
    Ok(ChainResult { steps, eval_counts })
}

/// Runs the adaptive rollout and its paired full-compute baseline.
pub fn run_rollout(
    spec: &ScenarioSpec,
    cfg: &ControllerConfig,
    grid: &DiffusionGrid,
) -> Result<RolloutResult> {
    let cfg = cfg.validate(grid.num_steps())?;
    let (steps, eval_counts) = run_chain(spec, &cfg, grid, false)?;
    let (baseline_steps, baseline_eval_counts) = run_chain(spec, &cfg, grid, true)?;

    let adaptive_x0: Vec<BranchPair<Latent>> = steps.iter().map(|r| r.x0.clone()).collect();
    let baseline_x0: Vec<BranchPair<Latent>> =
        baseline_steps.iter().map(|r| r.x0.clone()).collect();
    let errors_vs_baseline = compare_to_baseline(&adaptive_x0, &baseline_x0)?;

    // Ground-truth distance uses the effective (context-shifted) target, so
    // it is recomputed from each step's own context.
    let mut errors_vs_truth = Vec::with_capacity(steps.len());
    for (s, result) in steps.iter().enumerate() {
        let pair = BranchPair::new(
            ground_truth_error(spec, s, BranchKind::Vision, result)?,
            ground_truth_error(spec, s, BranchKind::Trajectory, result)?,
        );
        errors_vs_truth.push(pair);
    }

    let num_steps = grid.num_steps() as f64;
    let mean_ratio = |branch: BranchKind| {
        steps
            .iter()
            .map(|r| r.summaries.get(branch).computes as f64 / num_steps)
            .sum::<f64>()
            / steps.len() as f64
    };
    let compute_ratio = BranchPair::new(
        mean_ratio(BranchKind::Vision),
        mean_ratio(BranchKind::Trajectory),
    );

    let mut trace = DecisionTrace::new();
    for result in &steps {
        trace.extend(result.entries.iter().cloned());
    }

    Ok(RolloutResult {
        steps,
        baseline_x0,
        errors_vs_baseline,
        errors_vs_truth,
        compute_ratio,
        eval_counts,
        baseline_eval_counts,
        trace,
    })
}

fn ground_truth_error(
    spec: &ScenarioSpec,
    step_index: usize,
    branch: BranchKind,
    result: &DualStepResult,
) -> Result<BranchTruthError> {
    let model = build_model(spec, step_index, branch, &result.context);
    match model.ground_truth(&result.context) {
        Some(truth) => {
            let truth_latent = Latent::new(truth, branch, 0);
            Ok(Some(result.x0.get(branch).l2_distance(&truth_latent)?))
        }
        None => Ok(None),
    }
}

type BranchTruthError = Option<f64>;
