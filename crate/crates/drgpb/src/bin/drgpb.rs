use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drgpb::config::Config;
use drgpb::experiment::{compare_radii, run_experiment, write_outputs, Summary};
use drgpb::formats::{self, TrajectoryFile};
use drgpb::oracle::crosscheck;
use drgpb::{Error, Result};
use drgpb_core::model::seeded_rng;
use drgpb_core::{run_filter, sample_trajectory, RadiusSchedule};

#[derive(Parser)]
#[command(name = "drgpb", version, about = "Distributionally robust GPB filtering for Markov jump linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model configuration and print every violated invariant.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample a trajectory from the true transition schedule.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the experiment horizon in the config.
        #[arg(long)]
        horizon: Option<usize>,
        /// RNG stream; run `i` of an experiment uses stream `i`.
        #[arg(long, default_value_t = 0)]
        run: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the filter over a trajectory file and write trace.csv / trace.jsonl.
    Filter {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        /// Constant radius overriding `filter.rtv`.
        #[arg(long)]
        rtv: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo comparison over a radius grid.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        /// Comma-separated radius grid, e.g. `0,0.1,0.3`.
        #[arg(long, value_delimiter = ',')]
        rtv: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Skip writing per-run trace files.
        #[arg(long)]
        no_traces: bool,
    },
    /// Check water-filling against an LP oracle and the equivalent closed form.
    Crosscheck {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        max_modes: usize,
    },
}

const CROSSCHECK_TOL: f64 = 1e-9;

fn validate(config: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let (report, extra) = cfg.validate()?;
    if report.is_ok() && extra.is_empty() {
        println!("ok");
        return Ok(());
    }
    let mut lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    lines.extend(extra);
    for l in &lines {
        println!("{l}");
    }
    Err(Error::Config(lines.join("; ")))
}

fn simulate(config: &Path, seed: u64, horizon: Option<usize>, run: u64, out: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let horizon = horizon
        .or(cfg.experiment.as_ref().map(|e| e.horizon))
        .ok_or_else(|| Error::Config("no horizon given and config has no experiment section".into()))?;
    let schedule = cfg.true_schedule()?;
    let traj = sample_trajectory(&schedule, horizon, cfg.initial_mode(), &mut seeded_rng(seed, run))?;
    TrajectoryFile::from_trajectory(&traj).save(out)?;
    println!("wrote {} steps to {}", horizon, out.display());
    Ok(())
}

fn filter(config: &Path, trajectory: &Path, rtv: Option<f64>, out: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let schedule = cfg.nominal_schedule()?;
    let mut fc = cfg.filter_config()?;
    if let Some(r) = rtv {
        fc.radius = RadiusSchedule::Constant(r);
        fc.radius.validate().map_err(|e| Error::Config(e.to_string()))?;
    }
    let traj = TrajectoryFile::load(trajectory)?.to_trajectory()?;
    if !traj.is_consistent(schedule.base().n_theta()) {
        return Err(Error::Config("trajectory modes exceed the model's mode count".into()));
    }
    let states = run_filter(&schedule, &traj.observations, &fc)?;
    let records = formats::trace_records(&states, Some(&traj));
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    formats::write_trace_csv(out.join("trace.csv"), &records)?;
    formats::write_trace_jsonl(out.join("trace.jsonl"), &records)?;
    let mse = states
        .iter()
        .map(|s| (&traj.states[s.step] - &s.merged.mean).norm_squared())
        .sum::<f64>()
        / states.len() as f64;
    println!("steps {}  rmse {}", states.len(), formats::fmt_f64(mse.sqrt()));
    Ok(())
}

fn print_summary(summary: &Summary) {
    println!("runs {}  horizon {}  seed {}", summary.runs, summary.horizon, summary.seed);
    println!(
        "{:>8} {:>12} {:>12} {:>12} {:>10} {:>10} {:>24} {:>6}",
        "rtv", "window", "mean_rmse", "median_rmse", "rate_nu", "rate_mu", "diff_vs_0 [95% CI]", "wins"
    );
    for row in &summary.rows {
        for w in &row.windows {
            println!(
                "{:>8} {:>12} {:>12.6} {:>12.6} {:>10.4} {:>10.4} {:>+8.4} [{:+.4},{:+.4}] {:>6}",
                row.rtv,
                w.window,
                w.mean_rmse,
                w.median_rmse,
                w.mean_mode_rate_nu,
                w.mean_mode_rate_mu,
                w.vs_zero.mean_diff,
                w.vs_zero.ci_low,
                w.vs_zero.ci_high,
                w.vs_zero.wins
            );
        }
    }
}

fn experiment(
    config: &Path,
    runs: Option<usize>,
    rtv: Option<Vec<f64>>,
    seed: Option<u64>,
    out: &Path,
    no_traces: bool,
) -> Result<()> {
    let cfg = Config::load(config)?;
    let spec = cfg.experiment_spec(runs, rtv, seed)?;
    let batch = run_experiment(&spec, !no_traces)?;
    let summary = compare_radii(&batch, spec.bootstrap_resamples)?;
    write_outputs(&batch, &summary, out)?;
    print_summary(&summary);
    Ok(())
}

fn run_crosscheck(instances: usize, seed: u64, max_modes: usize) -> Result<()> {
    let report = crosscheck(instances, seed, max_modes)?;
    println!("instances            {}", report.instances);
    println!("max |waterfill - lp| {:e}", report.max_oracle_gap);
    println!("max |value - equiv|  {:e}", report.max_equivalent_gap);
    println!("max radius excess    {:e}", report.max_radius_excess);
    println!("max simplex error    {:e}", report.max_simplex_error);
    println!("case 1 / case 2      {} / {}", report.case1_count, report.case2_count);
    if report.passes(CROSSCHECK_TOL) {
        println!("ok");
        Ok(())
    } else {
        Err(Error::Numerical(drgpb_core::Error::Internal(format!(
            "crosscheck deviation above {CROSSCHECK_TOL:e}"
        ))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Simulate { config, seed, horizon, run, out } => simulate(&config, seed, horizon, run, &out),
        Command::Filter { config, trajectory, rtv, out } => filter(&config, &trajectory, rtv, &out),
        Command::Experiment { config, runs, rtv, seed, out, no_traces } => {
            experiment(&config, runs, rtv, seed, &out, no_traces)
        }
        Command::Crosscheck { instances, seed, max_modes } => run_crosscheck(instances, seed, max_modes),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
