//! Hyperparameter sweep harness.
//!
//! Runs one rollout per grid point over the cross product of the parameter
//! axes. Grid points are independent, so they run on a worker pool; rows are
//! collected in grid order with deterministic per-point seeds, which keeps
//! the report byte-stable regardless of parallelism.

use anyhow::{ensure, Result};
use rayon::prelude::*;

use dualskip::config::ControllerConfig;
use dualskip::grid::DiffusionGrid;
use dualskip::rollout::run_rollout;
use dualskip::scenario::ScenarioSpec;
use dualskip::types::BranchKind;

use crate::cost::CostModel;

/// Parameter grid. Axes default to the standard ablation values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub thetas: Vec<f64>,
    pub c_maxes: Vec<u32>,
    pub warmups: Vec<u32>,
    pub epsilons: Vec<f64>,
    pub repetitions: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            thetas: vec![0.005, 0.01, 0.02],
            c_maxes: vec![2, 4, 8],
            warmups: vec![0, 3, 5],
            epsilons: vec![1e-6, 1e-4, 1e-2],
            repetitions: 1,
        }
    }
}

impl SweepSpec {
    /// Sweep along a single axis, all other parameters at their defaults.
    pub fn theta_axis(thetas: Vec<f64>) -> Self {
        let base = ControllerConfig::default();
        SweepSpec {
            thetas,
            c_maxes: vec![base.c_max],
            warmups: vec![base.warmup],
            epsilons: vec![base.epsilon],
            repetitions: 1,
        }
    }

    pub fn c_max_axis(c_maxes: Vec<u32>) -> Self {
        let base = ControllerConfig::default();
        SweepSpec {
            thetas: vec![base.theta],
            c_maxes,
            warmups: vec![base.warmup],
            epsilons: vec![base.epsilon],
            repetitions: 1,
        }
    }

    pub fn epsilon_axis(epsilons: Vec<f64>) -> Self {
        let base = ControllerConfig::default();
        SweepSpec {
            thetas: vec![base.theta],
            c_maxes: vec![base.c_max],
            warmups: vec![base.warmup],
            epsilons,
            repetitions: 1,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.thetas.len()
            * self.c_maxes.len()
            * self.warmups.len()
            * self.epsilons.len()
            * self.repetitions
    }

    fn points(&self) -> Vec<(f64, u32, u32, f64, usize)> {
        let mut points = Vec::with_capacity(self.grid_size());
        for &theta in &self.thetas {
            for &c_max in &self.c_maxes {
                for &warmup in &self.warmups {
                    for &epsilon in &self.epsilons {
                        for rep in 0..self.repetitions {
                            points.push((theta, c_max, warmup, epsilon, rep));
                        }
                    }
                }
            }
        }
        points
    }
}

/// One grid point's outcome. Failed runs keep their config columns and carry
/// the failure reason in `status`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub c_max: u32,
    pub warmup: u32,
    pub epsilon: f64,
    pub rep: usize,
    pub status: String,
    pub compute_ratio_vision: f64,
    pub compute_ratio_trajectory: f64,
    pub speedup_vision: f64,
    pub speedup_trajectory: f64,
    pub speedup_total: f64,
    pub max_l2_vision: f64,
    pub max_l2_trajectory: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Fixed column order of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 13] = [
    "theta",
    "c_max",
    "warmup",
    "epsilon",
    "rep",
    "status",
    "compute_ratio_vision",
    "compute_ratio_trajectory",
    "speedup_vision",
    "speedup_trajectory",
    "speedup_total",
    "max_l2_vision",
    "max_l2_trajectory",
];

impl SweepReport {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(SWEEP_COLUMNS)?;
        for row in &self.rows {
            writer.write_record(&[
                row.theta.to_string(),
                row.c_max.to_string(),
                row.warmup.to_string(),
                row.epsilon.to_string(),
                row.rep.to_string(),
                row.status.clone(),
                row.compute_ratio_vision.to_string(),
                row.compute_ratio_trajectory.to_string(),
                row.speedup_vision.to_string(),
                row.speedup_trajectory.to_string(),
                row.speedup_total.to_string(),
                row.max_l2_vision.to_string(),
                row.max_l2_trajectory.to_string(),
            ])?;
        }
        Ok(String::from_utf8(writer.into_inner()?)?)
    }

    /// Rows matching a predicate, in report order.
    pub fn rows_where(&self, pred: impl Fn(&SweepRow) -> bool) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| pred(r)).collect()
    }
}

/// Runs the whole grid against one scenario.
pub fn run_sweep(
    sweep: &SweepSpec,
    scenario: &ScenarioSpec,
    grid: &DiffusionGrid,
    cost: &CostModel,
) -> Result<SweepReport> {
    ensure!(sweep.grid_size() > 0, "sweep grid is empty");
    let points = sweep.points();
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(theta, c_max, warmup, epsilon, rep)| {
            let cfg = ControllerConfig {
                theta,
                c_max,
                warmup,
                epsilon,
                ..Default::default()
            };
            // Repetitions rerun the same scenario under fresh noise.
            let spec = scenario
                .clone()
                .with_rng_seed(scenario.rng_seed.wrapping_add(rep as u64));
            match run_rollout(&spec, &cfg, grid) {
                Ok(result) => {
                    let speedups = cost.rollout_speedups(&result);
                    SweepRow {
                        theta,
                        c_max,
                        warmup,
                        epsilon,
                        rep,
                        status: "ok".to_string(),
                        compute_ratio_vision: result.compute_ratio.vision,
                        compute_ratio_trajectory: result.compute_ratio.trajectory,
                        speedup_vision: speedups.vision,
                        speedup_trajectory: speedups.trajectory,
                        speedup_total: speedups.total,
                        max_l2_vision: result.max_error_vs_baseline(BranchKind::Vision),
                        max_l2_trajectory: result.max_error_vs_baseline(BranchKind::Trajectory),
                    }
                }
                Err(err) => SweepRow {
                    theta,
                    c_max,
                    warmup,
                    epsilon,
                    rep,
                    status: format!("failed: {err}"),
                    compute_ratio_vision: f64::NAN,
                    compute_ratio_trajectory: f64::NAN,
                    speedup_vision: f64::NAN,
                    speedup_trajectory: f64::NAN,
                    speedup_total: f64::NAN,
                    max_l2_vision: f64::NAN,
                    max_l2_trajectory: f64::NAN,
                },
            }
        })
        .collect();
    Ok(SweepReport { rows })
}
