use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wleng::controller::{ControllerConfig, Environment, Policy, DEFAULT_THRESHOLD};
use wleng::harness::{
    self, Algorithm, ComparisonConfig, RunOptions, TrainingConfig, DEFAULT_ITERATIONS,
    DEFAULT_STREAM_LENGTH, DEFAULT_TRAINING_WORKLOADS,
};
use wleng::resources::{SlotQuantum, DEFAULT_SLOTS_PER_DC};
use wleng::rl::{self, Hyperparams, RewardScope};
use wleng::topology::{self, GeneratorParams, RoutingMode};
use wleng::workload::{self, PopSelection, WorkloadGenConfig};
use wleng::GBPS;

/// Joint WAN + data-centre workload placement simulator.
#[derive(Parser)]
#[command(name = "wleng", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic topology file.
    GenTopology(GenTopologyArgs),
    /// Generate a workload stream file for a topology.
    GenWorkloads(GenWorkloadsArgs),
    /// Train a Q-table and write it with its reward log.
    Train(TrainArgs),
    /// Run one algorithm over a stream file.
    Evaluate(EvaluateArgs),
    /// Run several algorithms over shared generated streams and summarize.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenTopologyArgs {
    #[arg(long, default_value_t = 11)]
    pops: usize,
    #[arg(long, default_value_t = 7)]
    dcs: usize,
    #[arg(long, default_value_t = 10.0)]
    capacity_gbps: f64,
    #[arg(long, default_value_t = 1.0)]
    latency_min: f64,
    #[arg(long, default_value_t = 30.0)]
    latency_max: f64,
    #[arg(long, default_value_t = 3.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = DEFAULT_SLOTS_PER_DC)]
    slots_per_dc: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

/// Options shared by every command that simulates placements.
#[derive(Args)]
struct EnvArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Slot quantum as vCPUs,memory GB,storage GB.
    #[arg(long, default_value = "2,4,256")]
    quantum: String,
    /// Maximum post-placement link utilization T.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Route each leg over one shortest path instead of all equal-cost ones.
    #[arg(long)]
    single_path: bool,
    /// Admit placements that fill a cluster completely (F >= 0).
    #[arg(long)]
    permissive_headroom: bool,
}

impl EnvArgs {
    fn environment(&self) -> Result<Environment> {
        let text = read(&self.topology)?;
        let routing = if self.single_path {
            RoutingMode::SinglePath
        } else {
            RoutingMode::Ecmp
        };
        let topo = topology::load_topology_with(&text, routing)
            .with_context(|| format!("loading topology {}", self.topology.display()))?;
        Ok(Environment::new(topo, SlotQuantum::parse(&self.quantum)?))
    }

    fn controller(&self) -> Result<ControllerConfig> {
        let mut c = ControllerConfig::with_threshold(self.threshold)?;
        c.strict_headroom = !self.permissive_headroom;
        Ok(c)
    }
}

#[derive(Args)]
struct GeneratorArgs {
    /// Access-POP selection: `subset`, `all` or a fixed count.
    #[arg(long, default_value = "subset")]
    pop_selection: String,
    /// Latency bound (ms) applied to every generated workload.
    #[arg(long)]
    l_max: Option<f64>,
}

impl GeneratorArgs {
    fn config(&self) -> Result<WorkloadGenConfig> {
        let pop_selection = match self.pop_selection.as_str() {
            "subset" => PopSelection::Subset,
            "all" => PopSelection::All,
            k => PopSelection::Fixed(
                k.parse()
                    .ok()
                    .filter(|&k: &usize| k > 0)
                    .with_context(|| format!("bad --pop-selection `{k}`"))?,
            ),
        };
        if let Some(l) = self.l_max {
            if !(l.is_finite() && l >= 0.0) {
                bail!("--l-max must be a non-negative number of ms");
            }
        }
        Ok(WorkloadGenConfig {
            pop_selection,
            l_max_ms: self.l_max,
        })
    }
}

#[derive(Args)]
struct GenWorkloadsArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long, default_value_t = DEFAULT_STREAM_LENGTH)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value_t = DEFAULT_TRAINING_WORKLOADS)]
    workloads: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon_start: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon_end: f64,
    /// Defaults to 80% of --workloads.
    #[arg(long)]
    epsilon_decay_steps: Option<u64>,
    #[arg(long, default_value_t = 4)]
    util_bins: u16,
    #[arg(long, default_value_t = 4)]
    slot_bins: u16,
    /// Leave the workload's demand class and slot count out of the state.
    #[arg(long)]
    no_workload_features: bool,
    /// Utilization term of the reward: `global` or `workload`.
    #[arg(long, default_value = "global")]
    reward_scope: String,
    /// Policy for states never seen in training.
    #[arg(long, default_value = "PathUtilOpt")]
    fallback: String,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    #[arg(long)]
    reward_log: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    algorithm: String,
    #[arg(long)]
    qtable: Option<PathBuf>,
    #[arg(long)]
    stream: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    skip_infeasible: bool,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = DEFAULT_STREAM_LENGTH)]
    stream_length: usize,
    #[arg(
        long,
        default_value = "random,datacentreopt,pathutilopt,latencyopt,qlearning"
    )]
    algorithms: String,
    #[arg(long)]
    qtable: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long)]
    skip_infeasible: bool,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    #[arg(long)]
    summary: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_table(path: &Path, env: &Environment) -> Result<rl::QTable> {
    rl::load_qtable(&read(path)?, env, None)
        .with_context(|| format!("loading q-table {}", path.display()))
}

fn gen_topology(args: GenTopologyArgs) -> Result<()> {
    if !(args.capacity_gbps.is_finite() && args.capacity_gbps > 0.0) {
        bail!("--capacity-gbps must be positive");
    }
    let params = GeneratorParams {
        pop_count: args.pops,
        dc_count: args.dcs,
        link_capacity: (args.capacity_gbps * GBPS as f64).round() as u64,
        latency_ms: (args.latency_min, args.latency_max),
        avg_degree: args.avg_degree,
        slots_per_dc: args.slots_per_dc,
        seed: args.seed,
    };
    let topo = topology::generate_topology(&params)?;
    write(&args.output, &topo.to_json())
}

fn gen_workloads(args: GenWorkloadsArgs) -> Result<()> {
    let topo = topology::load_topology(&read(&args.topology)?)?;
    let stream =
        workload::generate_stream(args.seed, args.count, &topo, &args.generator.config()?)?;
    write(&args.output, &workload::save_stream(&stream))
}

fn train(args: TrainArgs) -> Result<()> {
    let env = args.env.environment()?;
    let reward_scope = match args.reward_scope.as_str() {
        "global" => RewardScope::Global,
        "workload" => RewardScope::Workload,
        other => bail!("unknown --reward-scope `{other}`"),
    };
    let fallback: Policy = args.fallback.parse()?;
    let hyperparams = Hyperparams {
        alpha: args.alpha,
        gamma: args.gamma,
        epsilon_start: args.epsilon_start,
        epsilon_end: args.epsilon_end,
        epsilon_decay_steps: args
            .epsilon_decay_steps
            .unwrap_or(Hyperparams::for_workloads(args.workloads as u64).epsilon_decay_steps),
        util_bins: args.util_bins,
        slot_bins: args.slot_bins,
        workload_features: !args.no_workload_features,
        reward_scope,
        fallback,
    };
    let config = TrainingConfig {
        workload_count: args.workloads,
        hyperparams,
        controller: args.env.controller()?,
        generator: args.generator.config()?,
        seed: args.seed,
    };
    let (table, log) = harness::run_training(&env, &config)?;
    harness::write_training_outputs(&table, &log, &args.output, &args.reward_log)?;
    eprintln!(
        "trained on {} workloads: {} states, {} failed placements",
        args.workloads,
        table.len(),
        log.windows.iter().map(|w| w.placements_failed).sum::<u64>()
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let env = args.env.environment()?;
    let algorithm: Algorithm = args.algorithm.parse()?;
    let table = args
        .qtable
        .as_deref()
        .map(|p| load_table(p, &env))
        .transpose()?;
    let stream = workload::load_stream(&read(&args.stream)?, &env.topology)
        .with_context(|| format!("loading stream {}", args.stream.display()))?;
    let result = harness::run_iteration(
        &env,
        &stream,
        algorithm,
        table.as_ref(),
        &args.env.controller()?,
        RunOptions {
            skip_infeasible: args.skip_infeasible,
        },
        0,
        args.seed,
    )?;
    write(
        &args.output,
        &harness::results_to_csv(std::slice::from_ref(&result))?,
    )?;
    eprintln!(
        "{}: placed {} of {} ({})",
        result.algorithm,
        result.placed_count,
        stream.len(),
        result.stop_reason.as_str()
    );
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let env = args.env.environment()?;
    let table = args
        .qtable
        .as_deref()
        .map(|p| load_table(p, &env))
        .transpose()?;
    let config = ComparisonConfig {
        iterations: args.iterations,
        stream_length: args.stream_length,
        base_seed: args.base_seed,
        algorithms: Algorithm::parse_list(&args.algorithms)?,
        controller: args.env.controller()?,
        generator: args.generator.config()?,
        options: RunOptions {
            skip_infeasible: args.skip_infeasible,
        },
    };
    let (report, results) = harness::run_comparison(&env, &config, table.as_ref())?;
    harness::write_comparison_outputs(&report, &results, &args.output, &args.summary)?;
    for s in &report.algorithms {
        eprintln!(
            "{:<14} mean {:>8.2}  min {:>5}  max {:>5}  vs random {:>6}  wins {:>5.1}%",
            s.algorithm.as_str(),
            s.mean,
            s.min,
            s.max,
            s.normalized_mean
                .map(|n| format!("{n:.3}"))
                .unwrap_or_else(|| "-".into()),
            s.win_rate * 100.0
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenTopology(a) => gen_topology(a),
        Command::GenWorkloads(a) => gen_workloads(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
