//! Benchmark fixtures shared by the criterion targets.

use dualskip::config::ControllerConfig;
use dualskip::grid::DiffusionGrid;
use dualskip::scenario::ScenarioSpec;

/// The standard benchmark setup: default config, uniform K=100 grid.
pub fn default_setup(rollout_steps: usize) -> (ScenarioSpec, ControllerConfig, DiffusionGrid) {
    (
        ScenarioSpec::mixed(rollout_steps, 42),
        ControllerConfig::default(),
        DiffusionGrid::uniform(100).expect("valid grid"),
    )
}
