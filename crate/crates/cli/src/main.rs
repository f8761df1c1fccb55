use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cbfnav::metrics::{evaluate, grid_search, write_grid_csv, GridSpec};
use cbfnav::policy::{checkpoint, fixed_policy, random_policy, ActMode, CbfPolicy, GnnPolicy, PolicyParams};
use cbfnav::sim::log::{read_log, write_log};
use cbfnav::sim::{make_scenario, run_episode, EpisodeOptions, EpisodeOutcome, ScenarioKind};
use cbfnav::train::ppo::write_curve_csv;
use cbfnav::train::{TrainConfig, Trainer};
use cbfnav::types::{CbfParams, ParamBounds, WorldConfig};
use cbfnav::{Error, Vec2};
use clap::{Args, Parser, Subcommand};

mod render;

/// Multi-agent navigation with CLF-CBF quadratic programs.
#[derive(Debug, Parser)]
#[command(name = "cbfnav", version)]
struct Cli {
    /// Worker threads for episode collection, grid search and evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one episode and write its trajectory log.
    Simulate(SimulateArgs),
    /// Train the message-passing policy.
    Train(TrainArgs),
    /// Evaluate a grid of fixed (zeta, eta) pairs on one scenario.
    Gridsearch(GridArgs),
    /// Evaluate a policy over seed-shifted scenarios.
    Eval(EvalArgs),
    /// Draw a trajectory log as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file, or builtin:NAME.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Episode options (controller and reward) as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// fixed:za,ea,zo,eo | random | gnn:CHECKPOINT (sampled) | gnn-mean:CHECKPOINT (mean action)
    #[arg(long)]
    policy: String,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Builtin scenario family name.
    #[arg(long)]
    scenario_family: String,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Learning-curve CSV (default: checkpoint path with `.curve.csv`).
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Training configuration as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Episode options (controller and reward) as JSON.
    #[arg(long)]
    episode_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10)]
    zeta_points: usize,
    #[arg(long, default_value_t = 10)]
    eta_points: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 20)]
    episodes: usize,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Trajectory log written by `simulate`.
    #[arg(long)]
    log: PathBuf,
    /// Scenario the log was recorded on (for obstacles and goals).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite(_) => 4,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

enum ScenarioSource {
    Builtin(ScenarioKind),
    File(WorldConfig),
}

impl ScenarioSource {
    fn parse(text: &str) -> CliResult<Self> {
        if let Some(name) = text.strip_prefix("builtin:") {
            let kind = name
                .parse::<ScenarioKind>()
                .map_err(|e| Failure::input(format!("unknown builtin scenario {name:?}: {e}")))?;
            return Ok(Self::Builtin(kind));
        }
        let config =
            WorldConfig::load(text).map_err(|e| Failure::input(format!("cannot read scenario {text}: {e}")))?;
        if let Some(v) = cbfnav::types::validate_config(&config).first() {
            return Err(Failure::input(format!("invalid scenario {text}: {}", v.reason)));
        }
        Ok(Self::File(config))
    }

    fn config(&self, seed: u64) -> WorldConfig {
        match self {
            Self::Builtin(kind) => make_scenario(*kind, seed),
            Self::File(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone)]
enum PolicySpec {
    Fixed(CbfParams),
    Random,
    Gnn(PolicyParams, ActMode),
}

impl PolicySpec {
    fn parse(text: &str) -> CliResult<Self> {
        if text == "random" {
            return Ok(Self::Random);
        }
        if let Some(rest) = text.strip_prefix("fixed:") {
            let vals: Vec<f64> = rest
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::input(format!("bad fixed parameters {rest:?}: {e}")))?;
            let arr: [f64; 4] = vals
                .try_into()
                .map_err(|_| Failure::input("fixed policy needs four values za,ea,zo,eo"))?;
            if arr.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Failure::input("fixed parameters must be positive and finite"));
            }
            return Ok(Self::Fixed(CbfParams::from_array(arr)));
        }
        let gnn = if let Some(path) = text.strip_prefix("gnn:") {
            Some((path, ActMode::Sample))
        } else {
            text.strip_prefix("gnn-mean:").map(|path| (path, ActMode::Mean))
        };
        if let Some((path, mode)) = gnn {
            let params =
                checkpoint::load(path).map_err(|e| Failure::input(format!("cannot load checkpoint {path}: {e}")))?;
            return Ok(Self::Gnn(params, mode));
        }
        Err(Failure::input(format!(
            "unknown policy {text:?}; expected fixed:za,ea,zo,eo, random, gnn:PATH or gnn-mean:PATH"
        )))
    }

    fn build(&self, bounds: ParamBounds) -> Box<dyn CbfPolicy + Send> {
        match self {
            Self::Fixed(p) => Box::new(fixed_policy(*p)),
            Self::Random => Box::new(random_policy(bounds, 10)),
            Self::Gnn(params, mode) => Box::new(GnnPolicy::new(params.clone(), bounds, *mode)),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("invalid {}: {e}", path.display())))
}

fn episode_options(path: Option<&Path>) -> CliResult<EpisodeOptions> {
    let opts: EpisodeOptions = match path {
        Some(p) => read_json(p)?,
        None => EpisodeOptions::default(),
    };
    opts.controller.validate()?;
    opts.reward.validate()?;
    Ok(opts)
}

/// Writes through a temporary sibling so a failed run never leaves a torn file.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Failure::input(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> CliResult<u8> {
    let source = ScenarioSource::parse(&args.common.scenario)?;
    let opts = episode_options(args.common.config.as_deref())?;
    let policy = PolicySpec::parse(&args.policy)?;
    let config = source.config(args.common.seed);
    let mut p = policy.build(opts.controller.param_bounds);
    let traj = run_episode(&config, p.as_mut(), args.common.seed, &opts)?;
    let mut bytes = Vec::new();
    write_log(&traj, &mut bytes)?;
    write_atomic(&args.common.out, &bytes)?;
    let arrived = (0..traj.num_agents()).filter(|&i| traj.arrival_step(i).is_some()).count();
    println!(
        "outcome={} steps={} arrived={}/{} infeasible_steps={} total_reward={:.6}",
        outcome_name(&traj.outcome),
        traj.len().saturating_sub(1),
        arrived,
        traj.num_agents(),
        traj.infeasible_steps(),
        traj.total_reward()
    );
    Ok(match traj.outcome {
        EpisodeOutcome::AllArrived => 0,
        EpisodeOutcome::Timeout => 2,
        EpisodeOutcome::SafetyViolation { .. } => 3,
    })
}

fn outcome_name(o: &EpisodeOutcome) -> &'static str {
    match o {
        EpisodeOutcome::AllArrived => "all_arrived",
        EpisodeOutcome::Timeout => "timeout",
        EpisodeOutcome::SafetyViolation { .. } => "safety_violation",
    }
}

fn train(args: TrainArgs) -> CliResult<u8> {
    let kind: ScenarioKind = args
        .scenario_family
        .strip_prefix("builtin:")
        .unwrap_or(&args.scenario_family)
        .parse()
        .map_err(|e| Failure::input(format!("unknown scenario family {:?}: {e}", args.scenario_family)))?;
    let mut cfg: TrainConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(n) = args.iterations {
        cfg.iterations = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let opts = episode_options(args.episode_config.as_deref())?;
    let curve_path = args.curve.clone().unwrap_or_else(|| {
        let mut s = args.out.as_os_str().to_owned();
        s.push(".curve.csv");
        PathBuf::from(s)
    });

    let mut trainer = Trainer::new(cfg, opts)?;
    let family = move |seed: u64| make_scenario(kind, seed);
    write_atomic(&args.out, &checkpoint::encode(trainer.policy()))?;
    let mut outcome = Ok(());
    for _ in 0..cfg.iterations {
        match trainer.iterate(&family) {
            Ok(row) => {
                println!(
                    "iteration={} mean_reward={:.6} success_rate={:.4} infeasible_steps={:.3} clip_fraction={:.4} approx_kl={:.6}",
                    row.iteration, row.mean_reward, row.success_rate, row.infeasible_steps, row.clip_fraction, row.approx_kl
                );
                write_atomic(&args.out, &checkpoint::encode(trainer.policy()))?;
            }
            Err(e) => {
                log::error!("training stopped: {e}");
                outcome = Err(Failure::from(e));
                break;
            }
        }
    }
    let mut csv = Vec::new();
    write_curve_csv(&trainer.curve, &mut csv)?;
    write_atomic(&curve_path, &csv)?;
    outcome.map(|_| 0)
}

fn gridsearch(args: GridArgs) -> CliResult<u8> {
    let source = ScenarioSource::parse(&args.common.scenario)?;
    let opts = episode_options(args.common.config.as_deref())?;
    if args.zeta_points == 0 || args.eta_points == 0 {
        return Err(Failure::input("grid axes need at least one point"));
    }
    let grid = GridSpec {
        zeta_points: args.zeta_points,
        eta_points: args.eta_points,
        ..GridSpec::default()
    };
    let config = source.config(args.common.seed);
    let rows = grid_search(&config, &grid, &opts, args.common.seed)?;
    let mut csv = Vec::new();
    write_grid_csv(&rows, &mut csv)?;
    write_atomic(&args.common.out, &csv)?;
    let successes = rows.iter().filter(|r| r.success).count();
    if let Some(best) = rows.first() {
        println!(
            "rows={} successes={} best_zeta={} best_eta={} best_spl={:.6} best_pct_speed={:.6}",
            rows.len(),
            successes,
            best.zeta,
            best.eta,
            best.spl,
            best.pct_speed
        );
    }
    Ok(0)
}

fn eval(args: EvalArgs) -> CliResult<u8> {
    let source = ScenarioSource::parse(&args.common.scenario)?;
    let opts = episode_options(args.common.config.as_deref())?;
    let policy = PolicySpec::parse(&args.policy)?;
    if args.episodes == 0 {
        return Err(Failure::input("--episodes must be at least 1"));
    }
    let bounds = opts.controller.param_bounds;
    let make = || policy.build(bounds);
    let family = |seed: u64| source.config(seed);
    let summary = evaluate(&make, &family, args.episodes, args.common.seed, &opts)?;
    let mut text = summary.to_json();
    text.push('\n');
    write_atomic(&args.common.out, text.as_bytes())?;
    println!(
        "episodes={} spl={:.6}+-{:.6} pct_speed={:.6}+-{:.6} success_rate={:.6}+-{:.6}",
        summary.n_episodes,
        summary.spl.mean,
        summary.spl.std,
        summary.pct_speed.mean,
        summary.pct_speed.std,
        summary.success_rate.mean,
        summary.success_rate.std
    );
    Ok(0)
}

fn render_cmd(args: RenderArgs) -> CliResult<u8> {
    let file = fs::File::open(&args.log).map_err(|e| Failure::input(format!("cannot read {}: {e}", args.log.display())))?;
    let log = read_log(BufReader::new(file))?;
    let config = match &args.scenario {
        Some(s) => Some(ScenarioSource::parse(s)?.config(args.seed)),
        None => None,
    };
    let paths: Vec<Vec<Vec2>> = log.paths();
    let svg = render::svg(&paths, config.as_ref());
    write_atomic(&args.out, svg.as_bytes())?;
    println!("agents={} steps={}", paths.len(), paths.iter().map(Vec::len).max().unwrap_or(0));
    Ok(0)
}

fn run(cli: Cli) -> CliResult<u8> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::input("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Gridsearch(a) => gridsearch(a),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CBFNAV_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
