//! `vlcra` — command-line front end: channel/state dumps, QoS analysis,
//! IWO-DE optimization, Monte Carlo validation, gradient checks, and
//! manifest replay.
//!
//! Exit codes: 0 success, 1 I/O, 2 usage, 3 invalid scenario or argument,
//! 4 numerical failure, 5 optimization found no feasible point, 6 a check
//! or replay did not meet its tolerance.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;

#[derive(Parser)]
#[command(
    name = "vlcra",
    version,
    about = "MPR-aided random-access VLC uplink: channel, QoS analytics, IWO-DE optimizer, simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the LOS channel matrix and noise variance components as CSV
    Channel(ChannelArgs),
    /// List feasible access states with per-device rates and probabilities
    States(StatesArgs),
    /// Per-device EC, EB, slack and violation breakdown at a given p
    Analyze(AnalyzeArgs),
    /// Search the throughput-optimal access vector under QoS constraints
    Optimize(OptimizeArgs),
    /// Slot-level Monte Carlo validation: analytic vs empirical columns
    Simulate(SimulateArgs),
    /// Compare the closed-form throughput gradient with finite differences
    GradientCheck(GradientCheckArgs),
    /// Re-run a manifest and verify byte-identical outputs
    Replay(ReplayArgs),
}

#[derive(Args, Clone)]
struct ScenarioOpts {
    /// Scenario TOML file; built-in defaults when omitted. Bare names are
    /// also looked up under $VLCRA_SCENARIO_DIR
    #[arg(long, value_name = "FILE")]
    scenario: Option<String>,
    /// Two-group QoS override "THETA_S,THETA_L": the first floor(M/2)
    /// devices get the strict exponent, the rest the loose one
    #[arg(long, value_name = "TS,TL")]
    split_qos: Option<String>,
}

#[derive(Args)]
struct ChannelArgs {
    #[command(flatten)]
    scenario: ScenarioOpts,
    /// Output prefix (writes PREFIX.channel.csv, PREFIX.noise.csv and a
    /// manifest); stdout when omitted
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatesArgs {
    #[command(flatten)]
    scenario: ScenarioOpts,
    /// Access vector "p1,p2,..." or @file; uniform 1/N when omitted
    #[arg(long, value_name = "VEC|@FILE")]
    p: Option<String>,
    /// Output prefix (writes PREFIX.states.csv and a manifest)
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    scenario: ScenarioOpts,
    /// Access vector "p1,p2,..." or @file; uniform 1/N when omitted
    #[arg(long, value_name = "VEC|@FILE")]
    p: Option<String>,
    /// Output prefix (writes PREFIX.devices.csv, PREFIX.summary.csv and a
    /// manifest)
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    scenario: ScenarioOpts,
    /// Master RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial population size
    #[arg(long, default_value_t = 60)]
    w0: usize,
    /// Maximum surviving weeds per generation
    #[arg(long, default_value_t = 50)]
    w_max: usize,
    /// Maximum offspring per weed
    #[arg(long, default_value_t = 6)]
    s_max: usize,
    /// Minimum offspring per weed
    #[arg(long, default_value_t = 1)]
    s_min: usize,
    /// Non-linear modulation index of the dispersion schedule
    #[arg(long, default_value_t = 3.0)]
    phi: f64,
    /// Initial dispersion standard deviation
    #[arg(long, default_value_t = 0.15)]
    sigma_initial: f64,
    /// Final dispersion standard deviation
    #[arg(long, default_value_t = 1e-6)]
    sigma_final: f64,
    /// Number of generations
    #[arg(long, default_value_t = 300)]
    z_max: usize,
    /// DE difference scaling factor
    #[arg(long, default_value_t = 0.75)]
    f0: f64,
    /// DE crossover probability
    #[arg(long, default_value_t = 0.9)]
    cr: f64,
    /// Per-generation trace CSV (generation, best_eta, best_fitness,
    /// feasible_fraction)
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Result CSV (optimal p with per-device EC/EB/slack and the achieved
    /// throughput)
    #[arg(long, value_name = "FILE")]
    result: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioOpts,
    /// Access vector "p1,p2,..." or @file; uniform 1/N when omitted
    #[arg(long, value_name = "VEC|@FILE")]
    p: Option<String>,
    /// Number of simulated slots
    #[arg(long, default_value_t = 500_000)]
    slots: u64,
    /// Simulation RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix (writes PREFIX.sim.csv and a manifest)
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradientCheckArgs {
    #[command(flatten)]
    scenario: ScenarioOpts,
    /// Number of random evaluation points
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    /// Seed for the evaluation points
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pass threshold on the maximum relative deviation
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Output prefix (writes PREFIX.gradient.csv and a manifest)
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Manifest file produced by a previous run
    manifest: PathBuf,
    /// Directory the outputs are rewritten under
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Channel(args) => commands::channel(args),
        Command::States(args) => commands::states(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Optimize(args) => commands::optimize(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::GradientCheck(args) => commands::gradient_check(args),
        Command::Replay(args) => commands::replay(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
