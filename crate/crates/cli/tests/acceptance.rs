//! Acceptance suite. One test per criterion; each prints a PASS line on
//! success (visible with `--nocapture`) and pins its stated runtime budget.
//!
//! Run with: cargo test -p dualskip-cli --test acceptance -- --nocapture

use std::time::Instant;

use dualskip::config::ControllerConfig;
use dualskip::controller::{second_order_residual, smoothness_skip_test};
use dualskip::grid::DiffusionGrid;
use dualskip::model::{AffineFlowModel, BranchModel, CurvedFlowModel};
use dualskip::orchestrator::seed_next;
use dualskip::rollout::{
    initial_noise, noise_seed, run_force_compute, run_rollout, ContextRecord, RolloutResult,
};
use dualskip::sampler::sample_branch_full;
use dualskip::scenario::{ScenarioSpec, SegmentLabel};
use dualskip::types::{BranchKind, Decision, Latent};
use dualskip_cli::cost::CostModel;
use dualskip_cli::report::run_report_csv;
use dualskip_cli::sweep::{run_sweep, SweepSpec};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// Asserts that adaptive model evaluations match the executed compute count,
/// exactly, for both branches of a finished rollout.
fn assert_eval_conservation(result: &RolloutResult, label: &str) {
    for branch in BranchKind::ALL {
        assert_eq!(
            *result.eval_counts.get(branch),
            result.trace.compute_count(branch) as u64,
            "{label}: {branch} eval count diverges from trace computes"
        );
    }
}

#[test]
fn acceptance_1_affine_exactness_oracle() {
    let started = Instant::now();
    let spec = ScenarioSpec::affine(10, 42);
    let cfg = ControllerConfig::default();
    let grid = DiffusionGrid::uniform(100).unwrap();
    let result = run_rollout(&spec, &cfg, &grid).unwrap();

    for (s, (errors, baseline)) in result
        .errors_vs_baseline
        .iter()
        .zip(&result.baseline_x0)
        .enumerate()
    {
        for branch in BranchKind::ALL {
            let rel = errors.get(branch) / baseline.get(branch).l2_norm();
            assert!(rel < 1e-12, "step {s} {branch}: relative error {rel:e}");

            let summary = result.steps[s].summaries.get(branch);
            assert!(
                summary.compute_ratio <= 0.25,
                "step {s} {branch}: compute ratio {}",
                summary.compute_ratio
            );
            let effective_warmup = match &result.steps[s].seed_in {
                Some(seed) => seed.seeded_warmup.max(cfg.warmup),
                None => cfg.warmup,
            } as usize;
            let post_warmup_ratio =
                (summary.computes - effective_warmup) as f64 / (100 - effective_warmup) as f64;
            assert!(
                post_warmup_ratio <= 0.25,
                "step {s} {branch}: post-warm-up ratio {post_warmup_ratio}"
            );
        }
    }
    assert_eval_conservation(&result, "criterion 1");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("acceptance 1 (affine exactness oracle): PASS in {elapsed:?}");
}

#[test]
fn acceptance_2_baseline_equivalence() {
    let started = Instant::now();
    let suite = [
        ScenarioSpec::affine(10, 42),
        ScenarioSpec::cruise(10, 42),
        ScenarioSpec::mixed(10, 42),
        ScenarioSpec::curved(20, 42),
    ];
    let cfg = ControllerConfig::default();
    let grid = DiffusionGrid::uniform(100).unwrap();

    for spec in &suite {
        let chain = run_force_compute(spec, &cfg, &grid).unwrap();
        let mut prev_v = Latent::new(vec![0.0; spec.vision_dim], BranchKind::Vision, 0);
        let mut prev_t = Latent::new(vec![0.0; spec.trajectory_dim], BranchKind::Trajectory, 0);
        for (s, step) in chain.steps.iter().enumerate() {
            for branch in BranchKind::ALL {
                assert_eq!(
                    step.summaries.get(branch).computes,
                    100,
                    "{} s={s} {branch}: c_s must equal K",
                    spec.name
                );
            }
            let plan = spec.step(s);
            let context = ContextRecord::initial(spec.vision_dim, spec.trajectory_dim);
            for branch in BranchKind::ALL {
                let (base_target, prev, dim) = match branch {
                    BranchKind::Vision => (&plan.target_vision, &prev_v, spec.vision_dim),
                    BranchKind::Trajectory => {
                        (&plan.target_trajectory, &prev_t, spec.trajectory_dim)
                    }
                };
                let target: Vec<f64> = base_target
                    .iter()
                    .zip(&prev.values)
                    .map(|(t, p)| t + spec.context_coupling * p)
                    .collect();
                let model: Box<dyn BranchModel> = if plan.amplitude == 0.0 {
                    Box::new(AffineFlowModel::new(target))
                } else {
                    Box::new(CurvedFlowModel::new(target, plan.amplitude, plan.frequency))
                };
                let x_init = initial_noise(dim, branch, 100, noise_seed(spec.rng_seed, s, branch));
                let direct = sample_branch_full(model.as_ref(), &grid, x_init, &context).unwrap();
                assert_eq!(
                    direct.values,
                    step.x0.get(branch).values,
                    "{} s={s} {branch}: force-compute is not bit-identical",
                    spec.name
                );
            }
            prev_v = step.x0.vision.clone();
            prev_t = step.x0.trajectory.clone();
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("acceptance 2 (baseline equivalence): PASS in {elapsed:?}");
}

#[test]
fn acceptance_3_guard_invariants_over_randomized_scenarios() {
    let started = Instant::now();
    for i in 0..1000u64 {
        let h = splitmix64(i.wrapping_mul(0x5851_F42D));
        let k_steps = [11usize, 50, 100][(h % 3) as usize];
        let cruise_amplitude = 0.02 * unit_f64(splitmix64(h ^ 1));
        let maneuver_amplitude = 0.1 + 0.7 * unit_f64(splitmix64(h ^ 2));
        let frequency = 1.0 + 4.0 * unit_f64(splitmix64(h ^ 3));
        let cfg = ControllerConfig {
            theta: 0.001 + 0.05 * unit_f64(splitmix64(h ^ 4)),
            warmup: (splitmix64(h ^ 5) % 6) as u32,
            c_max: 1 + (splitmix64(h ^ 6) % 8) as u32,
            ..Default::default()
        };
        let labels = match h % 4 {
            0 => vec![SegmentLabel::Cruise],
            1 => vec![SegmentLabel::Maneuver],
            2 => vec![SegmentLabel::Cruise, SegmentLabel::Maneuver],
            _ => vec![SegmentLabel::Maneuver, SegmentLabel::Cruise],
        };
        let spec = ScenarioSpec::from_labels_with(
            "random",
            &labels,
            splitmix64(h ^ 7),
            5,
            3,
            cruise_amplitude,
            maneuver_amplitude,
            frequency,
            0.3,
        )
        .unwrap();
        let grid = DiffusionGrid::uniform(k_steps).unwrap();
        let result = run_rollout(&spec, &cfg, &grid).unwrap();

        // Consecutive-skip cap.
        for branch in BranchKind::ALL {
            assert!(
                result.trace.max_consecutive_skips(branch) <= cfg.c_max as usize,
                "scenario {i}: {branch} exceeded the skip cap"
            );
        }

        // Full structural audit (k coverage, counters, guard consistency).
        let violations = result.trace.audit(k_steps, cfg.c_max);
        assert!(violations.is_empty(), "scenario {i}: {violations:?}");

        for (s, step) in result.steps.iter().enumerate() {
            // First effective-warm-up decisions are computes.
            let effective_warmup = match &step.seed_in {
                Some(seed) => seed.seeded_warmup.max(cfg.warmup),
                None => cfg.warmup,
            } as usize;
            for e in result.trace.for_step(s) {
                if e.k + effective_warmup > k_steps {
                    assert!(
                        e.decision.is_compute(),
                        "scenario {i} s={s} k={} {}: warm-up step skipped",
                        e.k,
                        e.branch
                    );
                }
            }

            // Gate: a fired trajectory guard forces a vision compute at that k.
            for k in 1..=k_steps {
                let find = |branch| {
                    result
                        .trace
                        .for_step(s)
                        .find(|e| e.branch == branch && e.k == k)
                        .unwrap()
                };
                if find(BranchKind::Trajectory).guard_fired() {
                    assert!(
                        find(BranchKind::Vision).decision.is_compute(),
                        "scenario {i} s={s} k={k}: gate violated"
                    );
                }
            }

            // Emitted rho equals a recount from local-guard flags alone.
            for branch in BranchKind::ALL {
                let recount = result
                    .trace
                    .for_step(s)
                    .filter(|e| e.branch == branch && e.guard_fired())
                    .count();
                assert_eq!(
                    step.summaries.get(branch).safety_fraction,
                    recount as f64 / k_steps as f64,
                    "scenario {i} s={s} {branch}: rho mismatch"
                );
            }
        }

        assert_eval_conservation(&result, &format!("criterion 3 scenario {i}"));
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("acceptance 3 (guard invariants, 1000 scenarios): PASS in {elapsed:?}");
}

#[test]
fn acceptance_4_eval_count_conservation() {
    let started = Instant::now();
    // Representative runs spanning criteria 1-3 setups; the criterion 1-3
    // tests additionally assert conservation inline on every run they make.
    let grid = DiffusionGrid::uniform(100).unwrap();
    let cfg = ControllerConfig::default();
    for spec in [
        ScenarioSpec::affine(10, 42),
        ScenarioSpec::mixed(10, 42),
        ScenarioSpec::curved(20, 42),
    ] {
        let result = run_rollout(&spec, &cfg, &grid).unwrap();
        assert_eval_conservation(&result, &spec.name.clone());
        for branch in BranchKind::ALL {
            assert_eq!(
                *result.baseline_eval_counts.get(branch),
                (spec.num_rollout_steps() * 100) as u64,
                "{}: baseline must evaluate every step",
                spec.name
            );
        }
    }
    for (k_steps, seed) in [(11usize, 1u64), (50, 2), (100, 3)] {
        let spec = ScenarioSpec::mixed(2, seed);
        let grid = DiffusionGrid::uniform(k_steps).unwrap();
        let result = run_rollout(&spec, &cfg, &grid).unwrap();
        assert_eval_conservation(&result, &format!("K={k_steps}"));
    }
    let elapsed = started.elapsed();
    println!("acceptance 4 (eval-count conservation): PASS in {elapsed:?}");
}

#[test]
fn acceptance_5_equation_unit_checks() {
    let started = Instant::now();

    // residual() is exactly zero on 10,000 affine triples. Components are
    // scaled integers so the affine relation holds exactly in f64.
    let mut state = 0xDEADBEEFu64;
    let mut checked = 0usize;
    while checked < 10_000 {
        state = splitmix64(state);
        let base = (state % (1 << 20)) as i64;
        state = splitmix64(state);
        let slope = (state % (1 << 19)) as i64 - (1 << 18);
        if base + slope < 0 || base + 2 * slope < 0 {
            continue;
        }
        state = splitmix64(state);
        let scale = f64::powi(2.0, -((state % 24) as i32));
        let d0 = base as f64 * scale;
        let d1 = (base + slope) as f64 * scale;
        let d2 = (base + 2 * slope) as f64 * scale;
        assert_eq!(
            second_order_residual(d0, d1, d2),
            0.0,
            "affine triple ({d0}, {d1}, {d2}) has nonzero residual"
        );
        checked += 1;
    }

    // seed_next reproduces the hand-derived values exactly.
    let cfg = ControllerConfig::default();
    let seed = seed_next(0.5, &cfg, 100);
    assert_eq!(seed.seeded_warmup, 5);
    assert_eq!(seed.seeded_theta, 0.0125);

    // The smoothness boundary is inclusive: delta == theta * d skips.
    for (theta, d) in [(0.01, 0.3), (0.005, 1.7), (0.02, 0.001), (0.5, 2.5)] {
        assert_eq!(
            smoothness_skip_test(theta * d, d, theta),
            Decision::Skip,
            "boundary (theta={theta}, d={d}) must skip"
        );
    }
    assert_eq!(smoothness_skip_test(0.003, 0.3, 0.01), Decision::Skip);

    let elapsed = started.elapsed();
    println!("acceptance 5 (equation unit checks): PASS in {elapsed:?}");
}

#[test]
fn acceptance_6_cost_model_consistency() {
    let started = Instant::now();
    let cost = CostModel::default();

    let trajectory_speedup = cost.branch_speedup(10.59 / 20.23);
    assert!(
        (trajectory_speedup - 1.91).abs() / 1.91 < 0.01,
        "trajectory speedup {trajectory_speedup}"
    );
    let vision_speedup = cost.branch_speedup(155.55 / 244.19);
    assert!(
        (vision_speedup - 1.57).abs() / 1.57 < 0.01,
        "vision speedup {vision_speedup}"
    );

    let elapsed = started.elapsed();
    println!("acceptance 6 (cost-model consistency): PASS in {elapsed:?}");
}

#[test]
fn acceptance_7_ablation_trend_reproduction() {
    let started = Instant::now();
    // Default curved scenario for sweeps: the mixed cruise/maneuver preset,
    // which keeps every latent diff above the largest stall threshold in the
    // epsilon grid.
    let scenario = ScenarioSpec::mixed(10, 42);
    let grid = DiffusionGrid::uniform(100).unwrap();
    let cost = CostModel::default();

    // Theta: simulated speedup is non-decreasing in theta.
    let theta_report = run_sweep(
        &SweepSpec::theta_axis(vec![0.005, 0.01, 0.02]),
        &scenario,
        &grid,
        &cost,
    )
    .unwrap();
    let theta_speedups: Vec<f64> = theta_report.rows.iter().map(|r| r.speedup_total).collect();
    assert!(theta_report.rows.iter().all(|r| r.status == "ok"));
    assert!(
        theta_speedups.windows(2).all(|w| w[0] <= w[1]),
        "theta trend violated: {theta_speedups:?}"
    );

    // C_max: strictly increasing speedup.
    let c_max_report = run_sweep(
        &SweepSpec::c_max_axis(vec![2, 4, 8]),
        &scenario,
        &grid,
        &cost,
    )
    .unwrap();
    let c_max_speedups: Vec<f64> = c_max_report.rows.iter().map(|r| r.speedup_total).collect();
    assert!(c_max_report.rows.iter().all(|r| r.status == "ok"));
    assert!(
        c_max_speedups.windows(2).all(|w| w[0] < w[1]),
        "c_max trend violated: {c_max_speedups:?}"
    );

    // Epsilon: compute ratios are identical across the grid.
    let epsilon_report = run_sweep(
        &SweepSpec::epsilon_axis(vec![1e-6, 1e-4, 1e-2]),
        &scenario,
        &grid,
        &cost,
    )
    .unwrap();
    assert!(epsilon_report.rows.iter().all(|r| r.status == "ok"));
    let first = &epsilon_report.rows[0];
    for row in &epsilon_report.rows[1..] {
        assert_eq!(
            row.compute_ratio_vision, first.compute_ratio_vision,
            "epsilon changed the vision compute ratio"
        );
        assert_eq!(
            row.compute_ratio_trajectory, first.compute_ratio_trajectory,
            "epsilon changed the trajectory compute ratio"
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "acceptance 7 (ablation trends; theta {theta_speedups:?}, c_max {c_max_speedups:?}): \
         PASS in {elapsed:?}"
    );
}

#[test]
fn acceptance_8_long_horizon_stability_and_determinism() {
    let started = Instant::now();
    let spec = ScenarioSpec::curved(20, 42);
    let cfg = ControllerConfig::default();
    let grid = DiffusionGrid::uniform(100).unwrap();
    let cost = CostModel::default();

    let result = run_rollout(&spec, &cfg, &grid).unwrap();
    let per_step: Vec<f64> = result
        .errors_vs_baseline
        .iter()
        .map(|e| e.vision.max(e.trajectory))
        .collect();
    let step0 = per_step[0];
    assert!(step0 > 0.0, "step-0 error is degenerate for this scenario");
    for (s, &err) in per_step.iter().enumerate() {
        assert!(
            err <= 10.0 * step0,
            "step {s}: error {err} exceeds 10x step-0 error {step0}"
        );
    }

    // Determinism: three repeated runs render byte-identical reports.
    let render = || {
        let run = run_rollout(&spec, &cfg, &grid).unwrap();
        run_report_csv(&run, &spec, &cost).unwrap()
    };
    let first = render();
    for _ in 0..2 {
        assert_eq!(render(), first, "repeated runs diverged");
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("acceptance 8 (long-horizon stability + determinism): PASS in {elapsed:?}");
}
