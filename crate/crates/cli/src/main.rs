//! `mbmf`: run, batch and sweep the arbitration experiments, and generate or
//! check world files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mbmf_core::cost::CostMode;
use mbmf_core::env::{generate_arena, load_world, save_world, ArenaParams};
use mbmf_core::harness::output::{emit_outputs, sweep_csv, write_run_log};
use mbmf_core::harness::phases::detect_phases;
use mbmf_core::harness::sweep::DEFAULT_ETAS;
use mbmf_core::harness::{run_batch, run_experiment_full, sweep_eta, AgentKind, ExperimentConfig};
use mbmf_core::Error;

const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_VALIDATION: u8 = 5;

#[derive(Parser)]
#[command(name = "mbmf", version, about = "Model-based / model-free arbitration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded experiment and write its log.
    Run(RunArgs),
    /// Run many seeds (optionally several agents) and write logs, aggregates and charts.
    Batch(BatchArgs),
    /// Sweep the entropy gate constant and report the reward/cost frontier.
    SweepEta(SweepArgs),
    /// Generate a synthetic arena and save it as a world file.
    GenerateWorld(GenerateArgs),
    /// Check a world file: schema, normalisation and goal reachability.
    ValidateWorld { path: PathBuf },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// World file, overriding the config's world source.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Agent kind override (MF_ONLY, MB_ONLY, MC_RND, MC_EC, DQN).
    #[arg(long)]
    agent: Option<String>,
    /// Cost mode override (proxy or measured).
    #[arg(long)]
    cost_mode: Option<String>,
    /// Number of decision steps, overriding the config.
    #[arg(long)]
    steps: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the final model-free Q-table (CSV).
    #[arg(long)]
    dump_q: Option<PathBuf>,
    /// Also write the final model-based models (JSON).
    #[arg(long)]
    dump_model: Option<PathBuf>,
    /// Also write the final network weights (JSON).
    #[arg(long)]
    dump_net: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    common: Common,
    /// Seeds as a range `a..b` or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// Run every agent kind on the same seeds.
    #[arg(long)]
    all_agents: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated eta values.
    #[arg(long, value_delimiter = ',')]
    etas: Option<Vec<f64>>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    p_slip: Option<f64>,
    /// Step of the goal relocation; pass a negative value to disable it.
    #[arg(long, allow_hyphen_values = true)]
    switch_step: Option<i64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the grid layout (JSON).
    #[arg(long)]
    layout: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

fn code_for(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::Parameter { .. } | Error::Parse { .. } => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::Validation(_) | Error::Normalization { .. } | Error::Input(_) | Error::Generation(_) => EXIT_VALIDATION,
        Error::Run { source, .. } => code_for(source),
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            code: code_for(&error),
            error,
        }
    }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Config(format!("cannot parse seeds `{text}` (use `a..b` or `1,2,3`)"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b <= a {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(world) = &common.world {
        config.world = mbmf_core::harness::WorldSource::File { path: world.clone() };
    }
    if let Some(agent) = &common.agent {
        config.agent = agent.parse::<AgentKind>()?;
    }
    if let Some(mode) = &common.cost_mode {
        config.cost.mode = mode.parse::<CostMode>()?;
    }
    if let Some(steps) = common.steps {
        config.total_steps = steps;
    }
    config.validate()?;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// A malformed world file is a validation failure, not a config one.
fn world_failure(e: Error) -> Failure {
    match e {
        Error::Parse { .. } => Failure {
            code: EXIT_VALIDATION,
            error: e,
        },
        other => other.into(),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let config = load_config(&args.common)?;
    let world = config.resolve_world().map_err(world_failure)?;
    let art = run_experiment_full(&config, &world, args.seed)?;
    create_dir(&args.common.out)?;
    let path = args
        .common
        .out
        .join(format!("run_{}_seed{}.csv", config.agent.name().to_ascii_lowercase(), args.seed));
    write_run_log(&art.log, &path)?;
    if let Some(p) = &args.dump_q {
        match &art.mf_table {
            Some(q) => write(p, &q.to_csv())?,
            None => eprintln!("note: {} has no model-free table", config.agent),
        }
    }
    if let Some(p) = &args.dump_model {
        match &art.mb_model {
            Some(m) => write(p, &serde_json::to_string_pretty(m).expect("json value"))?,
            None => eprintln!("note: {} has no model-based expert", config.agent),
        }
    }
    if let Some(p) = &args.dump_net {
        match &art.network {
            Some(net) => net.save(p)?,
            None => eprintln!("note: {} has no network", config.agent),
        }
    }
    println!(
        "{} seed {}: reward {} cost {} units ({:.3} s-eq), log {}",
        config.agent,
        args.seed,
        art.log.total_reward(),
        art.log.total_cost_units(),
        art.log.total_cost_seconds(),
        path.display()
    );
    Ok(())
}

fn cmd_batch(args: BatchArgs) -> Result<(), Failure> {
    let mut config = load_config(&args.common)?;
    if let Some(s) = &args.seeds {
        config.seeds = parse_seeds(s)?;
    }
    let world = config.resolve_world().map_err(world_failure)?;
    let agents: Vec<AgentKind> = if args.all_agents {
        AgentKind::ALL.to_vec()
    } else {
        vec![config.agent]
    };
    let mut batches = Vec::new();
    for agent in agents {
        let mut c = config.clone();
        c.agent = agent;
        let b = run_batch(&c, &world)?;
        let r = b.total_reward();
        let cost = b.total_cost_units();
        println!(
            "{agent}: final reward {:.1} ± {:.1}, cost {:.0} ± {:.0} units over {} seeds",
            r.mean,
            r.std,
            cost.mean,
            cost.std,
            b.runs.len()
        );
        batches.push(b);
    }
    let report = batches
        .iter()
        .find(|b| b.agent == AgentKind::McEc)
        .and_then(|b| b.mean_p_mf())
        .map(|p| detect_phases(&p, config.phase_window, &config.change_steps(&world)));
    if let Some(r) = &report {
        print!("{r}");
    }
    let files = emit_outputs(&batches, report.as_ref(), &args.common.out)?;
    println!("wrote {} files to {}", files.len(), args.common.out.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut config = load_config(&args.common)?;
    config.agent = AgentKind::McEc;
    if let Some(s) = &args.seeds {
        config.seeds = parse_seeds(s)?;
    }
    let etas = args.etas.unwrap_or_else(|| DEFAULT_ETAS.to_vec());
    let world = config.resolve_world().map_err(world_failure)?;
    let points = sweep_eta(&config, &world, &etas)?;
    let table = sweep_csv(&points);
    print!("{table}");
    create_dir(&args.common.out)?;
    write(&args.common.out.join("eta_sweep.csv"), &table)?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let mut params = ArenaParams::default();
    if let Some(p) = args.p_slip {
        params.p_slip = p;
    }
    if let Some(s) = args.switch_step {
        params.switch_step = u64::try_from(s).ok();
    }
    let arena = generate_arena(args.seed, &params)?;
    arena.world.validate()?;
    save_world(&arena.world, &args.out)?;
    if let Some(p) = &args.layout {
        write(p, &serde_json::to_string_pretty(&arena.layout).expect("layout serialises"))?;
    }
    println!(
        "arena seed {}: {} states, goal {}, resets {:?}, written to {}",
        args.seed,
        arena.world.num_states(),
        arena.world.goal(),
        arena.world.resets(),
        args.out.display()
    );
    Ok(())
}

fn cmd_validate(path: PathBuf) -> Result<(), Failure> {
    let world = load_world(&path).map_err(world_failure)?;
    world.validate()?;
    println!(
        "{}: valid ({} states, {} actions, goal {}, {} scheduled change(s))",
        path.display(),
        world.num_states(),
        world.num_actions(),
        world.goal(),
        world.schedule().len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Batch(a) => cmd_batch(a),
        Command::SweepEta(a) => cmd_sweep(a),
        Command::GenerateWorld(a) => cmd_generate(a),
        Command::ValidateWorld { path } => cmd_validate(path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            let mut source = std::error::Error::source(&f.error);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(f.code)
        }
    }
}
