//! Command implementations. Every numeric CSV value is formatted in fixed
//! scientific notation so reruns with the same seed are byte-identical.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use vlcra_core::optimizer::{optimize as run_optimizer, ObjectiveContext, OptimizerParams};
use vlcra_core::qos::{
    constraint_violation, evaluate_qos, mean_service_rate, saturation_throughput,
    throughput_gradient,
};
use vlcra_core::rng::stream;
use vlcra_core::simulator::{run_slots, SimConfig};
use vlcra_core::util::{fmt_sci, sha256_hex};
use vlcra_core::{effective_capacity, noise_components, received_optical_power, Scenario};

use crate::manifest::RunManifest;
use crate::{
    AnalyzeArgs, ChannelArgs, GradientCheckArgs, OptimizeArgs, ReplayArgs, ScenarioOpts,
    SimulateArgs, StatesArgs,
};

/// Exit codes beyond success: see the crate doc comment.
pub const EXIT_IO: u8 = 1;
pub const EXIT_INVALID: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;
pub const EXIT_INFEASIBLE: u8 = 5;
pub const EXIT_CHECK_FAILED: u8 = 6;

#[derive(Debug)]
pub enum CliError {
    Core(vlcra_core::Error),
    Io(std::io::Error),
    BadArgument(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::BadArgument(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                vlcra_core::Error::Validation { .. }
                | vlcra_core::Error::Parse(_)
                | vlcra_core::Error::InvalidParameter { .. } => EXIT_INVALID,
                vlcra_core::Error::SingularChannel { .. }
                | vlcra_core::Error::InfeasibleState { .. }
                | vlcra_core::Error::CoincidentPoints
                | vlcra_core::Error::CapacityExceeded { .. } => EXIT_NUMERICAL,
                vlcra_core::Error::Io(_) => EXIT_IO,
            },
            CliError::Io(_) => EXIT_IO,
            CliError::BadArgument(_) => EXIT_INVALID,
        }
    }
}

impl From<vlcra_core::Error> for CliError {
    fn from(e: vlcra_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CmdResult = Result<u8, CliError>;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn load_scenario(opts: &ScenarioOpts) -> Result<Scenario, CliError> {
    let mut scenario = match &opts.scenario {
        None => Scenario::default(),
        Some(name) => {
            let direct = Path::new(name);
            let path = if direct.exists() {
                direct.to_path_buf()
            } else if !name.contains(std::path::MAIN_SEPARATOR) {
                match std::env::var_os("VLCRA_SCENARIO_DIR") {
                    Some(dir) => {
                        let candidate = Path::new(&dir).join(name);
                        if candidate.exists() {
                            candidate
                        } else {
                            direct.to_path_buf()
                        }
                    }
                    None => direct.to_path_buf(),
                }
            } else {
                direct.to_path_buf()
            };
            Scenario::from_path(&path)?
        }
    };
    if let Some(pair) = &opts.split_qos {
        let (strict, loose) = parse_pair(pair)?;
        scenario.apply_split_qos(strict, loose)?;
    }
    Ok(scenario)
}

fn parse_pair(text: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(CliError::BadArgument(format!(
            "--split-qos expects \"THETA_S,THETA_L\", got {text:?}"
        )));
    }
    let strict = parts[0]
        .parse::<f64>()
        .map_err(|e| CliError::BadArgument(format!("--split-qos: {e}")))?;
    let loose = parts[1]
        .parse::<f64>()
        .map_err(|e| CliError::BadArgument(format!("--split-qos: {e}")))?;
    Ok((strict, loose))
}

fn parse_p(arg: Option<&str>, n: usize) -> Result<Vec<f64>, CliError> {
    let Some(text) = arg else {
        return Ok(vec![1.0 / n as f64; n]);
    };
    let body = match text.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)?,
        None => text.to_string(),
    };
    let values: Result<Vec<f64>, _> = body
        .split([',', '\n', '\r', ' ', '\t', ';'])
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>())
        .collect();
    let values = values.map_err(|e| CliError::BadArgument(format!("--p: {e}")))?;
    if values.len() != n {
        return Err(CliError::BadArgument(format!(
            "--p: expected {} entries, found {}",
            n,
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::BadArgument("--p: entries must be finite".into()));
    }
    Ok(values)
}

fn join_p(p: &[f64]) -> String {
    p.iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

/// Write named CSV parts to `<prefix>.<suffix>` plus a manifest, or print
/// them to stdout when no prefix was given.
fn emit_prefixed(
    command: &str,
    prefix: Option<&Path>,
    parts: &[(&str, String)],
    mut args: BTreeMap<String, String>,
    scenario: &Scenario,
    seed: Option<u64>,
) -> Result<(), CliError> {
    match prefix {
        None => {
            for (suffix, content) in parts {
                println!("# ==== {suffix}");
                print!("{content}");
            }
            Ok(())
        }
        Some(prefix) => {
            args.insert("out".into(), prefix.display().to_string());
            let mut manifest =
                RunManifest::new(command, args, scenario.to_toml_string(), seed);
            for (suffix, content) in parts {
                let path = PathBuf::from(format!("{}.{suffix}", prefix.display()));
                write_file(&path, content)?;
                manifest.record_output(&path.display().to_string(), content);
            }
            let manifest_path = PathBuf::from(format!("{}.manifest.json", prefix.display()));
            write_file(&manifest_path, &manifest.to_json())?;
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// channel
// ---------------------------------------------------------------------------

fn channel_csvs(scenario: &Scenario) -> Result<Vec<(&'static str, String)>, CliError> {
    let h = scenario.channel_matrix()?;
    let n = h.n_devices();
    let mut channel = String::from("pd");
    for j in 1..=n {
        channel.push_str(&format!(",dev_{j}"));
    }
    channel.push('\n');
    for i in 0..h.m_pds() {
        channel.push_str(&(i + 1).to_string());
        for j in 0..n {
            channel.push(',');
            channel.push_str(&fmt_sci(h.gain(i, j)));
        }
        channel.push('\n');
    }

    let all_on = vlcra_core::AccessState::from_bits(
        if n == 32 { u32::MAX } else { (1u32 << n) - 1 },
        n,
    )?;
    let pr_all = received_optical_power(&h, &all_on, scenario.optics().tx_power_w);
    let loaded = noise_components(pr_all, scenario.optics(), scenario.noise());
    let idle = noise_components(0.0, scenario.optics(), scenario.noise());
    let mut noise = String::from("component,value\n");
    for (name, value) in [
        ("received_power_all_active_w", pr_all),
        ("sigma2_shot_signal_all_active", loaded.shot_signal),
        ("sigma2_shot_background", loaded.shot_background),
        ("sigma2_thermal_feedback", loaded.thermal_feedback),
        ("sigma2_thermal_fet", loaded.thermal_fet),
        ("sigma2_total_all_active", loaded.total()),
        ("sigma2_total_zero_power", idle.total()),
    ] {
        noise.push_str(&format!("{name},{}\n", fmt_sci(value)));
    }
    Ok(vec![("channel.csv", channel), ("noise.csv", noise)])
}

pub fn channel(args: ChannelArgs) -> CmdResult {
    let scenario = load_scenario(&args.scenario)?;
    let parts = channel_csvs(&scenario)?;
    emit_prefixed(
        "channel",
        args.out.as_deref(),
        &parts,
        BTreeMap::new(),
        &scenario,
        None,
    )?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// states
// ---------------------------------------------------------------------------

fn states_csv(scenario: &Scenario, p: &[f64]) -> Result<String, CliError> {
    let table = scenario.build_table()?;
    let beta = scenario.betas();
    let probs = table.state_probabilities(p, &beta);
    let n = table.n_devices();
    let mut csv = String::from("state,bits,tau,pi");
    for j in 1..=n {
        csv.push_str(&format!(",rate_{j}"));
    }
    csv.push('\n');
    for (entry, pi) in table.states().iter().zip(probs) {
        let state = vlcra_core::AccessState::from_bits(entry.bits(), n)?;
        csv.push_str(&format!(
            "{},{},{},{}",
            entry.bits(),
            state.bit_string(),
            state.active_count(),
            fmt_sci(pi)
        ));
        for j in 0..n {
            csv.push(',');
            csv.push_str(&fmt_sci(entry.rate_of(j)));
        }
        csv.push('\n');
    }
    Ok(csv)
}

pub fn states(args: StatesArgs) -> CmdResult {
    let scenario = load_scenario(&args.scenario)?;
    let p = parse_p(args.p.as_deref(), scenario.n_devices())?;
    let csv = states_csv(&scenario, &p)?;
    let mut manifest_args = BTreeMap::new();
    manifest_args.insert("p".into(), join_p(&p));
    emit_prefixed(
        "states",
        args.out.as_deref(),
        &[("states.csv", csv)],
        manifest_args,
        &scenario,
        None,
    )?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn analyze_csvs(scenario: &Scenario, p: &[f64]) -> Result<Vec<(&'static str, String)>, CliError> {
    let table = scenario.build_table()?;
    let beta = scenario.betas();
    let eval = evaluate_qos(&table, scenario.traffic(), p, scenario.slot_duration());
    let violation = constraint_violation(p, &eval);
    let eta = saturation_throughput(&table, p, &beta);

    let mut devices =
        String::from("device,p,beta,theta,lambda,ec,eb,slack,omega_qos,omega_p0,omega_p1\n");
    for (j, (dev, viol)) in eval
        .per_device
        .iter()
        .zip(&violation.per_device)
        .enumerate()
    {
        let spec = &scenario.traffic()[j];
        devices.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            j + 1,
            fmt_sci(p[j]),
            fmt_sci(spec.unblocked_probability),
            fmt_sci(spec.qos_exponent),
            fmt_sci(spec.arrival_rate),
            fmt_sci(dev.effective_capacity),
            fmt_sci(dev.effective_bandwidth),
            fmt_sci(dev.slack),
            fmt_sci(viol.qos),
            fmt_sci(viol.below_zero),
            fmt_sci(viol.above_one),
        ));
    }
    let summary = format!(
        "eta,omega_total,feasible\n{},{},{}\n",
        fmt_sci(eta),
        fmt_sci(violation.total),
        violation.total == 0.0
    );
    Ok(vec![("devices.csv", devices), ("summary.csv", summary)])
}

pub fn analyze(args: AnalyzeArgs) -> CmdResult {
    let scenario = load_scenario(&args.scenario)?;
    let p = parse_p(args.p.as_deref(), scenario.n_devices())?;
    let parts = analyze_csvs(&scenario, &p)?;
    let mut manifest_args = BTreeMap::new();
    manifest_args.insert("p".into(), join_p(&p));
    emit_prefixed(
        "analyze",
        args.out.as_deref(),
        &parts,
        manifest_args,
        &scenario,
        None,
    )?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

fn optimizer_params(args: &OptimizeArgs) -> OptimizerParams {
    OptimizerParams {
        initial_population: args.w0,
        max_survivors: args.w_max,
        max_offspring: args.s_max,
        min_offspring: args.s_min,
        modulation_index: args.phi,
        sigma_initial: args.sigma_initial,
        sigma_final: args.sigma_final,
        max_generations: args.z_max,
        scale_factor: args.f0,
        crossover_probability: args.cr,
        seed: args.seed,
    }
}

pub fn optimize(args: OptimizeArgs) -> CmdResult {
    let scenario = load_scenario(&args.scenario)?;
    let table = scenario.build_table()?;
    let params = optimizer_params(&args);
    let ctx = ObjectiveContext::new(&table, scenario.traffic(), scenario.slot_duration());
    let outcome = run_optimizer(&ctx, &params)?;

    let mut trace_csv = String::from("generation,best_eta,best_fitness,feasible_fraction\n");
    for rec in &outcome.trace {
        let best_eta = rec.best_feasible_eta.map(fmt_sci).unwrap_or_default();
        trace_csv.push_str(&format!(
            "{},{},{},{}\n",
            rec.generation,
            best_eta,
            fmt_sci(rec.best_fitness),
            fmt_sci(rec.feasible_fraction),
        ));
    }

    let eval = evaluate_qos(
        &table,
        scenario.traffic(),
        &outcome.best.p,
        scenario.slot_duration(),
    );
    let mut result_csv = String::from("device,p,ec,eb,slack,eta,feasible\n");
    for (j, dev) in eval.per_device.iter().enumerate() {
        result_csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            j + 1,
            fmt_sci(outcome.best.p[j]),
            fmt_sci(dev.effective_capacity),
            fmt_sci(dev.effective_bandwidth),
            fmt_sci(dev.slack),
            fmt_sci(outcome.best.eta),
            outcome.feasible,
        ));
    }

    let mut manifest_args = BTreeMap::new();
    manifest_args.insert("w0".into(), args.w0.to_string());
    manifest_args.insert("w_max".into(), args.w_max.to_string());
    manifest_args.insert("s_max".into(), args.s_max.to_string());
    manifest_args.insert("s_min".into(), args.s_min.to_string());
    manifest_args.insert("phi".into(), format!("{:?}", args.phi));
    manifest_args.insert("sigma_initial".into(), format!("{:?}", args.sigma_initial));
    manifest_args.insert("sigma_final".into(), format!("{:?}", args.sigma_final));
    manifest_args.insert("z_max".into(), args.z_max.to_string());
    manifest_args.insert("f0".into(), format!("{:?}", args.f0));
    manifest_args.insert("cr".into(), format!("{:?}", args.cr));

    let mut outputs: Vec<(PathBuf, String)> = Vec::new();
    if let Some(path) = &args.trace {
        manifest_args.insert("trace".into(), path.display().to_string());
        outputs.push((path.clone(), trace_csv.clone()));
    }
    if let Some(path) = &args.result {
        manifest_args.insert("result".into(), path.display().to_string());
        outputs.push((path.clone(), result_csv.clone()));
    }
    if outputs.is_empty() {
        print!("{result_csv}");
    } else {
        let mut manifest = RunManifest::new(
            "optimize",
            manifest_args,
            scenario.to_toml_string(),
            Some(args.seed),
        );
        for (path, content) in &outputs {
            write_file(path, content)?;
            manifest.record_output(&path.display().to_string(), content);
        }
        let manifest_path = outputs.last().expect("non-empty").0.with_extension("manifest.json");
        write_file(&manifest_path, &manifest.to_json())?;
    }

    let first = outcome
        .first_all_feasible
        .map(|g| g.to_string())
        .unwrap_or_else(|| "never".to_string());
    println!(
        "eta = {}  feasible = {}  first_all_feasible_generation = {}",
        fmt_sci(outcome.best.eta),
        outcome.feasible,
        first
    );
    Ok(if outcome.feasible { 0 } else { EXIT_INFEASIBLE })
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn simulate_csv(scenario: &Scenario, p: &[f64], slots: u64, seed: u64) -> Result<String, CliError> {
    let table = scenario.build_table()?;
    let beta = scenario.betas();
    let cfg = SimConfig {
        n_slots: slots,
        seed,
        slot_duration: scenario.slot_duration(),
        retain_samples: false,
    };
    let sim = run_slots(&table, scenario.traffic(), p, &cfg);
    let analytic_eta = saturation_throughput(&table, p, &beta);

    let mut csv = String::from(
        "device,p,beta,theta,analytic_ec,empirical_ec,analytic_mean_rate,empirical_mean_rate,analytic_eta,empirical_eta\n",
    );
    for (j, stats) in sim.per_device.iter().enumerate() {
        let spec = &scenario.traffic()[j];
        let analytic_ec = effective_capacity(
            j,
            &table,
            p,
            &beta,
            spec.qos_exponent,
            scenario.slot_duration(),
        );
        let analytic_mean = mean_service_rate(j, &table, p, &beta);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            j + 1,
            fmt_sci(p[j]),
            fmt_sci(spec.unblocked_probability),
            fmt_sci(spec.qos_exponent),
            fmt_sci(analytic_ec),
            fmt_sci(stats.empirical_ec),
            fmt_sci(analytic_mean),
            fmt_sci(stats.empirical_mean_rate),
            fmt_sci(analytic_eta),
            fmt_sci(sim.empirical_throughput),
        ));
    }
    Ok(csv)
}

pub fn simulate(args: SimulateArgs) -> CmdResult {
    let scenario = load_scenario(&args.scenario)?;
    let p = parse_p(args.p.as_deref(), scenario.n_devices())?;
    if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(CliError::BadArgument(
            "--p: simulation needs probabilities in [0, 1]".into(),
        ));
    }
    let csv = simulate_csv(&scenario, &p, args.slots, args.seed)?;
    let mut manifest_args = BTreeMap::new();
    manifest_args.insert("p".into(), join_p(&p));
    manifest_args.insert("slots".into(), args.slots.to_string());
    emit_prefixed(
        "simulate",
        args.out.as_deref(),
        &[("sim.csv", csv)],
        manifest_args,
        &scenario,
        Some(args.seed),
    )?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// gradient-check
// ---------------------------------------------------------------------------

const GRADIENT_TAG: u64 = 0x6AD;

struct GradientReport {
    csv: String,
    max_relative_deviation: f64,
}

fn gradient_report(
    scenario: &Scenario,
    points: usize,
    step: f64,
    seed: u64,
) -> Result<GradientReport, CliError> {
    use rand::Rng;
    let table = scenario.build_table()?;
    let beta = scenario.betas();
    let n = table.n_devices();
    let mut csv = String::from("point,coordinate,analytic,finite_difference,relative_deviation\n");
    let mut max_dev = 0.0f64;
    for k in 0..points {
        let mut rng = stream(seed, &[GRADIENT_TAG, k as u64]);
        let p: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
        let grad = throughput_gradient(&table, &p, &beta);
        let scale = grad.iter().fold(1.0f64, |a, &g| a.max(g.abs()));
        for j in 0..n {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[j] += step;
            lo[j] -= step;
            let fd = (saturation_throughput(&table, &hi, &beta)
                - saturation_throughput(&table, &lo, &beta))
                / (2.0 * step);
            let dev = (fd - grad[j]).abs() / scale;
            max_dev = max_dev.max(dev);
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                k,
                j + 1,
                fmt_sci(grad[j]),
                fmt_sci(fd),
                fmt_sci(dev)
            ));
        }
    }
    Ok(GradientReport {
        csv,
        max_relative_deviation: max_dev,
    })
}

pub fn gradient_check(args: GradientCheckArgs) -> CmdResult {
    let scenario = load_scenario(&args.scenario)?;
    let report = gradient_report(&scenario, args.points, args.step, args.seed)?;
    let mut manifest_args = BTreeMap::new();
    manifest_args.insert("points".into(), args.points.to_string());
    manifest_args.insert("step".into(), format!("{:?}", args.step));
    manifest_args.insert("tol".into(), format!("{:?}", args.tol));
    emit_prefixed(
        "gradient-check",
        args.out.as_deref(),
        &[("gradient.csv", report.csv)],
        manifest_args,
        &scenario,
        Some(args.seed),
    )?;
    println!(
        "max_relative_deviation = {}",
        fmt_sci(report.max_relative_deviation)
    );
    Ok(if report.max_relative_deviation <= args.tol {
        0
    } else {
        EXIT_CHECK_FAILED
    })
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

fn manifest_arg<'a>(manifest: &'a RunManifest, key: &str) -> Result<&'a str, CliError> {
    manifest
        .args
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| CliError::BadArgument(format!("manifest is missing the `{key}` argument")))
}

fn parse_manifest<T: std::str::FromStr>(manifest: &RunManifest, key: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    manifest_arg(manifest, key)?
        .parse::<T>()
        .map_err(|e| CliError::BadArgument(format!("manifest `{key}`: {e}")))
}

fn parse_p_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::BadArgument(format!("manifest `p`: {e}")))
        })
        .collect()
}

/// Re-run the manifest's command from its embedded configuration, rewriting
/// every output under `out_dir`, then verify the digests.
pub fn replay(args: ReplayArgs) -> CmdResult {
    let manifest = RunManifest::from_path(&args.manifest)?;
    let scenario = Scenario::from_toml_str(&manifest.scenario_toml)?;

    // Regenerate every output's content keyed by its original path.
    let mut regenerated: Vec<(String, String)> = Vec::new();
    match manifest.command.as_str() {
        "channel" => {
            let parts = channel_csvs(&scenario)?;
            let prefix = manifest_arg(&manifest, "out")?;
            for (suffix, content) in parts {
                regenerated.push((format!("{prefix}.{suffix}"), content));
            }
        }
        "states" => {
            let p = parse_p_list(manifest_arg(&manifest, "p")?)?;
            let prefix = manifest_arg(&manifest, "out")?;
            regenerated.push((format!("{prefix}.states.csv"), states_csv(&scenario, &p)?));
        }
        "analyze" => {
            let p = parse_p_list(manifest_arg(&manifest, "p")?)?;
            let prefix = manifest_arg(&manifest, "out")?;
            for (suffix, content) in analyze_csvs(&scenario, &p)? {
                regenerated.push((format!("{prefix}.{suffix}"), content));
            }
        }
        "simulate" => {
            let p = parse_p_list(manifest_arg(&manifest, "p")?)?;
            let slots: u64 = parse_manifest(&manifest, "slots")?;
            let seed = manifest.seed.unwrap_or(0);
            let prefix = manifest_arg(&manifest, "out")?;
            regenerated.push((
                format!("{prefix}.sim.csv"),
                simulate_csv(&scenario, &p, slots, seed)?,
            ));
        }
        "gradient-check" => {
            let points: usize = parse_manifest(&manifest, "points")?;
            let step: f64 = parse_manifest(&manifest, "step")?;
            let seed = manifest.seed.unwrap_or(0);
            let prefix = manifest_arg(&manifest, "out")?;
            let report = gradient_report(&scenario, points, step, seed)?;
            regenerated.push((format!("{prefix}.gradient.csv"), report.csv));
        }
        "optimize" => {
            let table = scenario.build_table()?;
            let params = OptimizerParams {
                initial_population: parse_manifest(&manifest, "w0")?,
                max_survivors: parse_manifest(&manifest, "w_max")?,
                max_offspring: parse_manifest(&manifest, "s_max")?,
                min_offspring: parse_manifest(&manifest, "s_min")?,
                modulation_index: parse_manifest(&manifest, "phi")?,
                sigma_initial: parse_manifest(&manifest, "sigma_initial")?,
                sigma_final: parse_manifest(&manifest, "sigma_final")?,
                max_generations: parse_manifest(&manifest, "z_max")?,
                scale_factor: parse_manifest(&manifest, "f0")?,
                crossover_probability: parse_manifest(&manifest, "cr")?,
                seed: manifest.seed.unwrap_or(0),
            };
            let ctx =
                ObjectiveContext::new(&table, scenario.traffic(), scenario.slot_duration());
            let outcome = run_optimizer(&ctx, &params)?;
            let mut trace_csv =
                String::from("generation,best_eta,best_fitness,feasible_fraction\n");
            for rec in &outcome.trace {
                let best_eta = rec.best_feasible_eta.map(fmt_sci).unwrap_or_default();
                trace_csv.push_str(&format!(
                    "{},{},{},{}\n",
                    rec.generation,
                    best_eta,
                    fmt_sci(rec.best_fitness),
                    fmt_sci(rec.feasible_fraction),
                ));
            }
            let eval = evaluate_qos(
                &table,
                scenario.traffic(),
                &outcome.best.p,
                scenario.slot_duration(),
            );
            let mut result_csv = String::from("device,p,ec,eb,slack,eta,feasible\n");
            for (j, dev) in eval.per_device.iter().enumerate() {
                result_csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    j + 1,
                    fmt_sci(outcome.best.p[j]),
                    fmt_sci(dev.effective_capacity),
                    fmt_sci(dev.effective_bandwidth),
                    fmt_sci(dev.slack),
                    fmt_sci(outcome.best.eta),
                    outcome.feasible,
                ));
            }
            if let Ok(path) = manifest_arg(&manifest, "trace") {
                regenerated.push((path.to_string(), trace_csv));
            }
            if let Ok(path) = manifest_arg(&manifest, "result") {
                regenerated.push((path.to_string(), result_csv));
            }
        }
        other => {
            return Err(CliError::BadArgument(format!(
                "manifest command `{other}` is not replayable"
            )));
        }
    }

    let mut all_match = true;
    for (path, content) in &regenerated {
        let target = {
            let p = Path::new(path);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                args.out_dir.join(p)
            }
        };
        write_file(&target, content)?;
        let digest = sha256_hex(content.as_bytes());
        let expected = manifest.outputs.iter().find(|o| &o.path == path);
        match expected {
            Some(record) if record.sha256 == digest => {
                println!("{path}: reproduced");
            }
            Some(_) => {
                println!("{path}: MISMATCH");
                all_match = false;
            }
            None => {
                println!("{path}: not in manifest");
                all_match = false;
            }
        }
    }
    if regenerated.len() != manifest.outputs.len() {
        all_match = false;
    }
    Ok(if all_match { 0 } else { EXIT_CHECK_FAILED })
}
