//! Run report rendering: a per-step CSV plus a short human summary.

use anyhow::Result;

use dualskip::rollout::RolloutResult;
use dualskip::scenario::ScenarioSpec;
use dualskip::types::BranchKind;

use crate::cost::CostModel;

/// Fixed column order of the per-step run report CSV.
pub const RUN_COLUMNS: [&str; 16] = [
    "step",
    "segment",
    "computes_vision",
    "skips_vision",
    "ratio_vision",
    "rho_vision",
    "computes_trajectory",
    "skips_trajectory",
    "ratio_trajectory",
    "rho_trajectory",
    "beta",
    "l2_vs_baseline_vision",
    "l2_vs_baseline_trajectory",
    "l2_vs_truth_vision",
    "l2_vs_truth_trajectory",
    "latency_ms",
];

/// Per-step metrics as CSV. Byte-stable for identical runs.
pub fn run_report_csv(
    result: &RolloutResult,
    spec: &ScenarioSpec,
    cost: &CostModel,
) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(RUN_COLUMNS)?;
    for (s, step) in result.steps.iter().enumerate() {
        let sv = &step.summaries.vision;
        let st = &step.summaries.trajectory;
        let truth = &result.errors_vs_truth[s];
        let fmt_truth = |e: &Option<f64>| e.map(|v| v.to_string()).unwrap_or_default();
        writer.write_record(&[
            s.to_string(),
            spec.step(s).label.to_string(),
            sv.computes.to_string(),
            sv.skips.to_string(),
            sv.compute_ratio.to_string(),
            sv.safety_fraction.to_string(),
            st.computes.to_string(),
            st.skips.to_string(),
            st.compute_ratio.to_string(),
            st.safety_fraction.to_string(),
            step.seed_out.beta.to_string(),
            result.errors_vs_baseline[s].vision.to_string(),
            result.errors_vs_baseline[s].trajectory.to_string(),
            fmt_truth(&truth.vision),
            fmt_truth(&truth.trajectory),
            cost.step_latency(&step.summaries).to_string(),
        ])?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

/// Short human-readable summary of a finished rollout.
pub fn run_summary_text(result: &RolloutResult, spec: &ScenarioSpec, cost: &CostModel) -> String {
    let speedups = cost.rollout_speedups(result);
    let mut out = String::new();
    out.push_str(&format!(
        "scenario '{}': {} rollout steps, grid K inferred from trace\n",
        spec.name,
        result.num_rollout_steps()
    ));
    out.push_str(&format!(
        "compute ratio: vision {:.4}, trajectory {:.4}\n",
        result.compute_ratio.vision, result.compute_ratio.trajectory
    ));
    out.push_str(&format!(
        "simulated speedup: vision {:.2}x, trajectory {:.2}x, total step {:.2}x\n",
        speedups.vision, speedups.trajectory, speedups.total
    ));
    out.push_str(&format!(
        "max L2 vs baseline: vision {:e}, trajectory {:e}\n",
        result.max_error_vs_baseline(BranchKind::Vision),
        result.max_error_vs_baseline(BranchKind::Trajectory)
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use dualskip::config::ControllerConfig;
    use dualskip::grid::DiffusionGrid;
    use dualskip::rollout::run_rollout;

    #[test]
    fn report_is_deterministic_and_well_formed() {
        let spec = ScenarioSpec::mixed(3, 21);
        let cfg = ControllerConfig::default();
        let grid = DiffusionGrid::uniform(25).unwrap();
        let cost = CostModel::default();
        let a = run_report_csv(&run_rollout(&spec, &cfg, &grid).unwrap(), &spec, &cost).unwrap();
        let b = run_report_csv(&run_rollout(&spec, &cfg, &grid).unwrap(), &spec, &cost).unwrap();
        assert_eq!(a, b);
        let mut lines = a.lines();
        assert_eq!(lines.next().unwrap(), RUN_COLUMNS.join(","));
        assert_eq!(lines.count(), 3);
    }
}
