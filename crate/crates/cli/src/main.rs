//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when `audit` finds an invariant violation,
//! 2 on invalid input (bad flags, unreadable files, failed validation).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use dualskip::config::ControllerConfig;
use dualskip::grid::DiffusionGrid;
use dualskip::rollout::{run_force_compute, run_rollout};
use dualskip::scenario::ScenarioSpec;
use dualskip_cli::cost::CostModel;
use dualskip_cli::report::{run_report_csv, run_summary_text};
use dualskip_cli::sweep::{run_sweep, SweepSpec};
use dualskip_cli::trace_io::{emit_trace, parse_trace};

#[derive(Parser)]
#[command(
    name = "dualskip",
    version,
    about = "Adaptive dual-branch diffusion sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario with the adaptive controller enabled.
    Run(RunArgs),
    /// Run one scenario with skipping disabled (full-compute baseline).
    Baseline(RunArgs),
    /// Run a hyperparameter sweep and write a CSV report.
    Sweep(SweepArgs),
    /// Check a trace file against the engine invariants.
    Audit(AuditArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML with [[segment]] blocks).
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,

    /// Built-in scenario: affine, cruise, curved, or mixed.
    #[arg(long, default_value = "mixed")]
    preset: String,

    /// Rollout steps for preset scenarios.
    #[arg(long, default_value_t = 10)]
    steps: usize,

    /// Diffusion steps per rollout step.
    #[arg(long, default_value_t = 100)]
    k: usize,

    /// Scenario noise seed (presets only; files carry their own).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConfigArgs {
    /// Controller config file (flat key = value TOML).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the skip tolerance theta.
    #[arg(long)]
    theta: Option<f64>,

    /// Override the warm-up step count.
    #[arg(long)]
    warmup: Option<u32>,

    /// Override the consecutive-skip cap.
    #[arg(long)]
    c_max: Option<u32>,

    /// Override the stall threshold epsilon.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Override the warm-up seeding gain gamma.
    #[arg(long)]
    gamma: Option<f64>,

    /// Override the threshold seeding gain lambda.
    #[arg(long)]
    lambda: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ControllerConfig> {
        let mut cfg = match &self.config {
            Some(path) => ControllerConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ControllerConfig::default(),
        };
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(v) = self.warmup {
            cfg.warmup = v;
        }
        if let Some(v) = self.c_max {
            cfg.c_max = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for relative output paths.
    #[arg(long, env = "DUALSKIP_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    /// Write the decision trace to this file.
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Write the per-step report CSV to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl OutputArgs {
    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,

    /// Comma-separated theta grid.
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,

    /// Comma-separated consecutive-skip cap grid.
    #[arg(long, value_delimiter = ',')]
    c_maxes: Option<Vec<u32>>,

    /// Comma-separated warm-up grid.
    #[arg(long, value_delimiter = ',')]
    warmups: Option<Vec<u32>>,

    /// Comma-separated stall threshold grid.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,

    /// Repetitions per grid point under fresh noise.
    #[arg(long, default_value_t = 1)]
    reps: usize,

    /// Output CSV path.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AuditArgs {
    /// Trace file to check.
    #[arg(long)]
    trace: PathBuf,
}

fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioSpec> {
    match &args.scenario {
        Some(path) => {
            ScenarioSpec::load(path).with_context(|| format!("loading scenario {}", path.display()))
        }
        None => Ok(ScenarioSpec::preset(&args.preset, args.steps, args.seed)?),
    }
}

fn execute_run(args: &RunArgs) -> Result<()> {
    let spec = load_scenario(&args.scenario)?;
    let cfg = args.config.resolve()?;
    let grid = DiffusionGrid::uniform(args.scenario.k)?;
    let result = run_rollout(&spec, &cfg, &grid)?;
    let cost = CostModel::default();

    print!("{}", run_summary_text(&result, &spec, &cost));

    if let Some(path) = &args.output.trace {
        let path = args.output.resolve(path);
        emit_trace(&result, &cfg, &path)?;
        println!("trace written to {}", path.display());
    }
    if let Some(path) = &args.output.report {
        let path = args.output.resolve(path);
        std::fs::write(&path, run_report_csv(&result, &spec, &cost)?)
            .with_context(|| format!("writing report {}", path.display()))?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn execute_baseline(args: &RunArgs) -> Result<()> {
    let spec = load_scenario(&args.scenario)?;
    let cfg = args.config.resolve()?;
    let grid = DiffusionGrid::uniform(args.scenario.k)?;
    let chain = run_force_compute(&spec, &cfg, &grid)?;
    let cost = CostModel::default();

    println!(
        "baseline (force-compute): {} rollout steps, K = {}",
        chain.steps.len(),
        grid.num_steps()
    );
    for (s, step) in chain.steps.iter().enumerate() {
        println!(
            "step {s}: computes = {}/{}, |x0_v| = {:.6}, |x0_t| = {:.6}",
            step.summaries.vision.computes,
            grid.num_steps(),
            step.x0.vision.l2_norm(),
            step.x0.trajectory.l2_norm()
        );
    }
    println!(
        "step latency at full compute: {:.2} ms",
        cost.baseline_step_latency()
    );

    if let Some(path) = &args.output.trace {
        let path = args.output.resolve(path);
        let mut trace = dualskip::trace::DecisionTrace::new();
        for step in &chain.steps {
            trace.extend(step.entries.iter().cloned());
        }
        let file = std::fs::File::create(&path)
            .with_context(|| format!("creating trace file {}", path.display()))?;
        dualskip_cli::trace_io::write_trace(
            std::io::BufWriter::new(file),
            &trace,
            grid.num_steps(),
            &cfg,
        )?;
        println!("trace written to {}", path.display());
    }
    Ok(())
}

fn execute_sweep(args: &SweepArgs) -> Result<()> {
    let spec = load_scenario(&args.scenario)?;
    let grid = DiffusionGrid::uniform(args.scenario.k)?;
    let defaults = SweepSpec::default();
    let sweep = SweepSpec {
        thetas: args.thetas.clone().unwrap_or(defaults.thetas),
        c_maxes: args.c_maxes.clone().unwrap_or(defaults.c_maxes),
        warmups: args.warmups.clone().unwrap_or(defaults.warmups),
        epsilons: args.epsilons.clone().unwrap_or(defaults.epsilons),
        repetitions: args.reps,
    };
    let report = run_sweep(&sweep, &spec, &grid, &CostModel::default())?;
    let path = args.output.resolve(&args.out);
    std::fs::write(&path, report.to_csv_string()?)
        .with_context(|| format!("writing sweep report {}", path.display()))?;
    println!(
        "sweep finished: {} grid points, report written to {}",
        report.rows.len(),
        path.display()
    );
    Ok(())
}

/// Returns true when the trace is clean.
fn execute_audit(args: &AuditArgs) -> Result<bool> {
    let (header, trace) = parse_trace(&args.trace)?;
    let violations = trace.audit(header.grid_steps, header.config.c_max);
    if violations.is_empty() {
        println!(
            "trace ok: {} entries over {} rollout steps",
            trace.len(),
            trace.rollout_steps()
        );
        Ok(true)
    } else {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        eprintln!("{} invariant violation(s) found", violations.len());
        Ok(false)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => execute_run(args).map(|()| ExitCode::SUCCESS),
        Command::Baseline(args) => execute_baseline(args).map(|()| ExitCode::SUCCESS),
        Command::Sweep(args) => execute_sweep(args).map(|()| ExitCode::SUCCESS),
        Command::Audit(args) => execute_audit(args).map(|clean| {
            if clean {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
