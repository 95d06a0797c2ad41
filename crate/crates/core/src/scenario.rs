//! Scenario definitions: rollout length, segment labels, and per-step branch
//! model parameters, all derived deterministically from one seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::BranchKind;

/// Segment character of a rollout step. Maneuver segments always carry a
/// strictly higher curvature amplitude than cruise segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentLabel {
    Cruise,
    Maneuver,
}

impl std::fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SegmentLabel::Cruise => f.write_str("cruise"),
            SegmentLabel::Maneuver => f.write_str("maneuver"),
        }
    }
}

/// Resolved model parameters for one rollout step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub label: SegmentLabel,
    pub amplitude: f64,
    pub frequency: f64,
    pub target_vision: Vec<f64>,
    pub target_trajectory: Vec<f64>,
}

/// A fully resolved scenario: everything a rollout needs except the
/// controller config and the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub vision_dim: usize,
    pub trajectory_dim: usize,
    pub rng_seed: u64,
    /// How strongly the previous rollout step's output shifts the next
    /// step's target. Values below one keep the chain contractive.
    pub context_coupling: f64,
    steps: Vec<StepPlan>,
}

/// Default latent dimensions: the vision latent is the wide one.
pub const DEFAULT_VISION_DIM: usize = 16;
pub const DEFAULT_TRAJECTORY_DIM: usize = 4;

/// Default curvature settings. Cruise stays far below the skip threshold;
/// maneuver crosses it at the default grid resolution.
pub const CRUISE_AMPLITUDE: f64 = 0.01;
pub const MANEUVER_AMPLITUDE: f64 = 0.5;
pub const DEFAULT_FREQUENCY: f64 = 5.0;
pub const DEFAULT_COUPLING: f64 = 0.3;

impl ScenarioSpec {
    /// Builds a scenario from explicit per-step plans, checking invariants.
    pub fn from_steps(
        name: impl Into<String>,
        vision_dim: usize,
        trajectory_dim: usize,
        rng_seed: u64,
        context_coupling: f64,
        steps: Vec<StepPlan>,
    ) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidScenario("needs at least one step".into()));
        }
        if vision_dim == 0 || trajectory_dim == 0 {
            return Err(Error::InvalidScenario(
                "latent dimensions must be positive".into(),
            ));
        }
        if !context_coupling.is_finite() || context_coupling < 0.0 {
            return Err(Error::InvalidScenario(
                "context_coupling must be finite and nonnegative".into(),
            ));
        }
        let max_cruise = steps
            .iter()
            .filter(|p| p.label == SegmentLabel::Cruise)
            .map(|p| p.amplitude)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_maneuver = steps
            .iter()
            .filter(|p| p.label == SegmentLabel::Maneuver)
            .map(|p| p.amplitude)
            .fold(f64::INFINITY, f64::min);
        if max_cruise.is_finite() && min_maneuver.is_finite() && min_maneuver <= max_cruise {
            return Err(Error::InvalidScenario(format!(
                "maneuver amplitude {min_maneuver} must exceed cruise amplitude {max_cruise}"
            )));
        }
        for (s, p) in steps.iter().enumerate() {
            if p.amplitude < 0.0 || !p.amplitude.is_finite() {
                return Err(Error::InvalidScenario(format!("step {s}: bad amplitude")));
            }
            if p.frequency <= 0.0 || !p.frequency.is_finite() {
                return Err(Error::InvalidScenario(format!("step {s}: bad frequency")));
            }
            if p.target_vision.len() != vision_dim || p.target_trajectory.len() != trajectory_dim {
                return Err(Error::InvalidScenario(format!(
                    "step {s}: target dimensions do not match scenario dims"
                )));
            }
        }
        Ok(ScenarioSpec {
            name: name.into(),
            vision_dim,
            trajectory_dim,
            rng_seed,
            context_coupling,
            steps,
        })
    }

    /// Builds a scenario from segment labels using the default amplitudes,
    /// frequency, dimensions, and coupling. Targets are derived from the seed.
    pub fn from_labels(name: &str, labels: &[SegmentLabel], rng_seed: u64) -> Result<Self> {
        Self::from_labels_with(
            name,
            labels,
            rng_seed,
            DEFAULT_VISION_DIM,
            DEFAULT_TRAJECTORY_DIM,
            CRUISE_AMPLITUDE,
            MANEUVER_AMPLITUDE,
            DEFAULT_FREQUENCY,
            DEFAULT_COUPLING,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_labels_with(
        name: &str,
        labels: &[SegmentLabel],
        rng_seed: u64,
        vision_dim: usize,
        trajectory_dim: usize,
        cruise_amplitude: f64,
        maneuver_amplitude: f64,
        frequency: f64,
        context_coupling: f64,
    ) -> Result<Self> {
        let steps = labels
            .iter()
            .enumerate()
            .map(|(s, &label)| {
                let amplitude = match label {
                    SegmentLabel::Cruise => cruise_amplitude,
                    SegmentLabel::Maneuver => maneuver_amplitude,
                };
                StepPlan {
                    label,
                    amplitude,
                    frequency,
                    target_vision: generate_target(vision_dim, rng_seed, s, BranchKind::Vision),
                    target_trajectory: generate_target(
                        trajectory_dim,
                        rng_seed,
                        s,
                        BranchKind::Trajectory,
                    ),
                }
            })
            .collect();
        Self::from_steps(
            name,
            vision_dim,
            trajectory_dim,
            rng_seed,
            context_coupling,
            steps,
        )
    }

    /// All-cruise scenario with zero curvature: every branch field is an
    /// exact straight line, so the Euler baseline is reproduced exactly.
    pub fn affine(num_rollout_steps: usize, rng_seed: u64) -> Self {
        let labels = vec![SegmentLabel::Cruise; num_rollout_steps];
        Self::from_labels_with(
            "affine",
            &labels,
            rng_seed,
            DEFAULT_VISION_DIM,
            DEFAULT_TRAJECTORY_DIM,
            0.0,
            MANEUVER_AMPLITUDE,
            DEFAULT_FREQUENCY,
            DEFAULT_COUPLING,
        )
        .expect("static labels are valid")
    }

    /// All-cruise scenario with mild curvature; skipping is cap-bound.
    pub fn cruise(num_rollout_steps: usize, rng_seed: u64) -> Self {
        let labels = vec![SegmentLabel::Cruise; num_rollout_steps];
        Self::from_labels("cruise", &labels, rng_seed).expect("static labels are valid")
    }

    /// Uniform-curvature scenario; every step is a maneuver. Used for
    /// long-horizon stability measurements where per-step error scales
    /// should be comparable.
    pub fn curved(num_rollout_steps: usize, rng_seed: u64) -> Self {
        let labels = vec![SegmentLabel::Maneuver; num_rollout_steps];
        Self::from_labels("curved", &labels, rng_seed).expect("static labels are valid")
    }

    /// Alternating cruise blocks with maneuver bursts: three cruise steps,
    /// then two maneuver steps, repeating.
    pub fn mixed(num_rollout_steps: usize, rng_seed: u64) -> Self {
        let labels: Vec<SegmentLabel> = (0..num_rollout_steps)
            .map(|s| {
                if s % 5 < 3 {
                    SegmentLabel::Cruise
                } else {
                    SegmentLabel::Maneuver
                }
            })
            .collect();
        Self::from_labels("mixed", &labels, rng_seed).expect("static labels are valid")
    }

    /// Looks up a named preset.
    pub fn preset(name: &str, num_rollout_steps: usize, rng_seed: u64) -> Result<Self> {
        match name {
            "affine" => Ok(Self::affine(num_rollout_steps, rng_seed)),
            "cruise" => Ok(Self::cruise(num_rollout_steps, rng_seed)),
            "curved" => Ok(Self::curved(num_rollout_steps, rng_seed)),
            "mixed" => Ok(Self::mixed(num_rollout_steps, rng_seed)),
            other => Err(Error::InvalidScenario(format!("unknown preset '{other}'"))),
        }
    }

    /// Replaces the noise seed. Resolved targets are left as built, so this
    /// reruns the same scenario under fresh initial noise.
    pub fn with_rng_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    pub fn num_rollout_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, s: usize) -> &StepPlan {
        &self.steps[s]
    }

    pub fn steps(&self) -> &[StepPlan] {
        &self.steps
    }

    /// Parses a scenario file: flat keys plus `[[segment]]` blocks.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let mut labels = Vec::new();
        for seg in &file.segment {
            if seg.length == 0 {
                return Err(Error::InvalidScenario(
                    "segment length must be positive".into(),
                ));
            }
            labels.extend(std::iter::repeat_n(seg.label, seg.length));
        }
        if labels.is_empty() {
            return Err(Error::InvalidScenario("scenario has no segments".into()));
        }
        Self::from_labels_with(
            file.name.as_deref().unwrap_or("scenario"),
            &labels,
            file.rng_seed.unwrap_or(0),
            file.vision_dim.unwrap_or(DEFAULT_VISION_DIM),
            file.trajectory_dim.unwrap_or(DEFAULT_TRAJECTORY_DIM),
            file.cruise_amplitude.unwrap_or(CRUISE_AMPLITUDE),
            file.maneuver_amplitude.unwrap_or(MANEUVER_AMPLITUDE),
            file.frequency.unwrap_or(DEFAULT_FREQUENCY),
            file.context_coupling.unwrap_or(DEFAULT_COUPLING),
        )
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    vision_dim: Option<usize>,
    trajectory_dim: Option<usize>,
    rng_seed: Option<u64>,
    context_coupling: Option<f64>,
    frequency: Option<f64>,
    cruise_amplitude: Option<f64>,
    maneuver_amplitude: Option<f64>,
    #[serde(default)]
    segment: Vec<SegmentBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentBlock {
    label: SegmentLabel,
    length: usize,
}

/// SplitMix64 step; the standard 64-bit mixer.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Derives an independent stream seed from a base seed and a role tag.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag.wrapping_add(splitmix64(index))))
}

const TARGET_TAG: u64 = 0x7A52_47E7;

/// Per-step, per-branch target with component magnitudes in [3.5, 4.5] and
/// pseudo-random signs. The magnitude floor keeps latent diffs well above
/// every stall threshold in the sweep grid.
fn generate_target(dim: usize, rng_seed: u64, step: usize, branch: BranchKind) -> Vec<f64> {
    let branch_tag = match branch {
        BranchKind::Vision => 1u64,
        BranchKind::Trajectory => 2u64,
    };
    let mut state = derive_seed(rng_seed, TARGET_TAG, (step as u64) << 8 | branch_tag);
    (0..dim)
        .map(|_| {
            state = splitmix64(state);
            let unit = (state >> 11) as f64 / (1u64 << 53) as f64; // [0, 1)
            let magnitude = 3.5 + unit;
            state = splitmix64(state);
            if state & 1 == 0 {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect()
}
