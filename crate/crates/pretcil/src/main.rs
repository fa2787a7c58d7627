use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use pretcil::api::{ActionRequest, CreateRequest, Hub};
use pretcil::log::{replay, SessionLog, WorldSource};
use pretcil::runner::{Memo, Pool, WallClock};
use pretcil::simulate::{run_simulation, SimulatedUser, UserPolicy};
use pretcil::sweep::{run_sweep, write_csv, SweepGrid};
use pretcil_core::responder::FallbackPolicy;
use pretcil_core::planner::SearchMode;
use pretcil_core::session::{Env, SessionConfig};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "pretcil", version, about = "Assistive agent for turn-based STRIPS worlds")]
struct Cli {
    /// Threads for recognition searches.
    #[arg(long, global = true, env = "PRETCIL_WORKERS", default_value_t = default_workers())]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Play a session in the terminal.
    Play(PlayArgs),
    /// Run one simulated user against the agent.
    Simulate(SimulateArgs),
    /// Run a parameter grid of simulations and write CSV.
    Sweep(SweepArgs),
    /// Verify that a session log replays exactly.
    Replay {
        log: PathBuf,
    },
}

#[derive(Args)]
struct WorldArgs {
    /// Domain file in the s-expression dialect (default: Block Words demo).
    #[arg(long, requires = "problem")]
    domain: Option<PathBuf>,
    /// Problem file matching `--domain`.
    #[arg(long, requires = "domain")]
    problem: Option<PathBuf>,
}

impl WorldArgs {
    fn source(&self) -> Result<WorldSource, String> {
        match (&self.domain, &self.problem) {
            (Some(d), Some(p)) => {
                let read = |path: &PathBuf| std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()));
                Ok(WorldSource::Text {
                    domain: read(d)?,
                    problem: read(p)?,
                })
            }
            _ => Ok(WorldSource::demo()),
        }
    }
}

fn serde_name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown value `{s}`"))
}

#[derive(Args)]
struct ConfigArgs {
    /// Necessity threshold in [0, 1].
    #[arg(long, env = "PRETCIL_TAU")]
    tau: Option<f64>,
    /// User actions observed before the agent responds.
    #[arg(long, env = "PRETCIL_HEAD_START")]
    head_start: Option<u32>,
    /// Rationality of the recognition likelihood.
    #[arg(long, env = "PRETCIL_BETA")]
    beta: Option<f64>,
    /// noop or default-goal.
    #[arg(long, env = "PRETCIL_FALLBACK", value_parser = serde_name::<FallbackPolicy>)]
    fallback: Option<FallbackPolicy>,
    /// optimal or satisficing.
    #[arg(long, env = "PRETCIL_MODE", value_parser = serde_name::<SearchMode>)]
    mode: Option<SearchMode>,
    /// Node expansions per recognition search.
    #[arg(long, env = "PRETCIL_BUDGET_NODES")]
    budget_nodes: Option<u64>,
    /// Milliseconds per search.
    #[arg(long, env = "PRETCIL_BUDGET_MS")]
    budget_ms: Option<u64>,
    #[arg(long, env = "PRETCIL_SEED")]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn config(&self) -> SessionConfig {
        let mut c = SessionConfig::default();
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.head_start {
            c.head_start = v;
        }
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = self.fallback {
            c.fallback = v;
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.budget_nodes {
            c.recognition_budget.max_expansions = v;
        }
        if let Some(v) = self.budget_ms {
            c.recognition_budget.max_millis = v;
            c.plan_budget.max_millis = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "PRETCIL_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "PRETCIL_BIND", default_value = "127.0.0.1")]
    bind: String,
    /// Directory for session logs; sessions found there are restored.
    #[arg(long, env = "PRETCIL_LOG_DIR")]
    log_dir: Option<PathBuf>,
    /// Seconds between heartbeat frames on idle event streams.
    #[arg(long, default_value_t = 15)]
    heartbeat: u64,
    /// Publish a `thinking` event before each agent decision.
    #[arg(long)]
    thinking: bool,
}

#[derive(Args)]
struct PlayArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    world: WorldArgs,
    /// Print the agent's beliefs after every turn.
    #[arg(long)]
    debug: bool,
    /// Log the session here.
    #[arg(long)]
    log_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    world: WorldArgs,
    /// The simulated user's hidden goal.
    #[arg(long)]
    goal: String,
    /// optimal, noisy:<eps>, or confuser.
    #[arg(long, default_value = "optimal")]
    policy: UserPolicy,
    /// Seed of the simulated user (default: the session seed).
    #[arg(long)]
    user_seed: Option<u64>,
    #[arg(long, default_value_t = 60)]
    max_turns: u32,
    /// Print the full report, transcript included, as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.9")]
    taus: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,2")]
    head_starts: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    betas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "optimal")]
    policies: Vec<UserPolicy>,
    /// Goals to simulate (default: all hypotheses).
    #[arg(long, value_delimiter = ',')]
    goals: Vec<String>,
    #[arg(long, default_value_t = 1)]
    repetitions: u32,
    #[arg(long, default_value_t = 60)]
    max_turns: u32,
    /// Output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Process-wide search environment: a wall clock and a memoizing pool.
fn make_env(workers: usize) -> Result<Env<'static>, String> {
    let clock: &'static WallClock = Box::leak(Box::new(WallClock::new()));
    let pool = Pool::new(workers.max(1), clock).map_err(|e| e.to_string())?;
    let runner: &'static Memo<Pool<'static>> = Box::leak(Box::new(Memo::new(pool)));
    Ok(Env { clock, runner })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = make_env(cli.workers).and_then(|env| match cli.command {
        Command::Serve(args) => serve(env, args),
        Command::Play(args) => play(env, args),
        Command::Simulate(args) => simulate(env, args),
        Command::Sweep(args) => sweep(env, args),
        Command::Replay { log } => verify(env, log),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn serve(env: Env<'static>, args: ServeArgs) -> Result<(), String> {
    let hub = match &args.log_dir {
        Some(dir) => {
            let (hub, failures) = Hub::recover(env, dir).map_err(|e| e.to_string())?;
            for (path, message) in failures {
                eprintln!("warning: not restoring {}: {message}", path.display());
            }
            hub
        }
        None => Hub::new(env),
    };
    hub.set_thinking_events(args.thinking);
    let router = pretcil::server::router(Arc::new(hub), Duration::from_secs(args.heartbeat.max(1)));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.bind.as_str(), args.port))
            .await
            .map_err(|e| format!("cannot bind {}:{}: {e}", args.bind, args.port))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| e.to_string())?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        pretcil::server::serve(listener, router, shutdown).await.map_err(|e| e.to_string())
    })
}

fn print_view(view: &pretcil::api::ApiSessionView) {
    if let Some(board) = &view.board {
        for stack in &board.stacks {
            println!("  {}", stack.iter().collect::<String>());
        }
        for (actor, held) in &board.held {
            if let Some(block) = held {
                println!("  {actor} holds {block}");
            }
        }
    }
    let words: Vec<String> = view
        .words
        .iter()
        .map(|w| if w.satisfied { format!("[{}]", w.word) } else { w.word.clone() })
        .collect();
    println!("words: {}", words.join(" "));
}

fn play(env: Env<'static>, args: PlayArgs) -> Result<(), String> {
    let hub = match &args.log_dir {
        Some(dir) => Hub::recover(env, dir).map_err(|e| e.to_string())?.0,
        None => Hub::new(env),
    };
    let view = hub
        .create(CreateRequest {
            domain: None,
            world: Some(args.world.source()?),
            debug: args.debug,
            config: args.config.config(),
        })
        .map_err(|e| format_api_error(&e))?;
    let id = view.id.clone();
    let mut view = view;
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        print_view(&view);
        if view.terminal {
            println!("session over: {:?}", view.termination);
            return Ok(());
        }
        for (i, action) in view.legal_actions.iter().enumerate() {
            println!("  {:>2}) {action}", i + 1);
        }
        print!("move (number or action, t = truncate, q = quit)> ");
        io::stdout().flush().map_err(|e| e.to_string())?;
        let Some(line) = lines.next() else { return Ok(()) };
        let line = line.map_err(|e| e.to_string())?;
        let line = line.trim();
        let outcome = match line {
            "" => continue,
            "q" => hub.quit(&id).map(|v| view = v),
            "t" => hub.truncate(&id).map(|v| view = v),
            _ => {
                let action = match line.parse::<usize>() {
                    Ok(n) if (1..=view.legal_actions.len()).contains(&n) => view.legal_actions[n - 1].to_string(),
                    _ => line.to_string(),
                };
                hub.act(&id, &ActionRequest { action }).map(|turn| {
                    if let Some(verdict) = &turn.user.verdict {
                        println!("monitor: {}", serde_json::to_string(verdict).unwrap_or_default());
                    }
                    if let Some(agent) = &turn.agent {
                        println!("agent: {}", agent.action);
                    }
                    if let Some(debug) = &turn.debug {
                        println!("posterior: {}", serde_json::to_string(&debug.posterior).unwrap_or_default());
                    }
                    view = turn.view;
                })
            }
        };
        if let Err(e) = outcome {
            println!("{}", format_api_error(&e));
        }
    }
}

fn format_api_error(e: &pretcil::api::ApiError) -> String {
    let mut s = e.message.clone();
    for f in &e.fields {
        s.push_str(&format!("\n  {}: {}", f.field, f.message));
    }
    s
}

fn simulate(env: Env<'static>, args: SimulateArgs) -> Result<(), String> {
    let (world, hypotheses) = args.world.source()?.build()?;
    let mut config = args.config.config();
    config.true_goal = Some(args.goal.clone());
    let user = SimulatedUser {
        goal: args.goal,
        policy: args.policy,
        seed: args.user_seed.unwrap_or(config.seed),
    };
    let report = run_simulation(&world, &hypotheses, &config, &user, args.max_turns, &env).map_err(|e| e.to_string())?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?);
    } else {
        println!("{}", serde_json::to_string_pretty(&report.metrics).map_err(|e| e.to_string())?);
    }
    Ok(())
}

fn sweep(env: Env<'static>, args: SweepArgs) -> Result<(), String> {
    let (world, hypotheses) = args.world.source()?.build()?;
    let base = args.config.config();
    let grid = SweepGrid {
        taus: args.taus,
        head_starts: args.head_starts,
        betas: args.betas,
        policies: args.policies,
        goals: args.goals,
        repetitions: args.repetitions,
        seed: base.seed,
        max_turns: args.max_turns,
        base,
    };
    let rows = run_sweep(&world, &hypotheses, &grid, &env).map_err(|e| e.to_string())?;
    let result = match args.output {
        Some(path) => write_csv(BufWriter::new(File::create(&path).map_err(|e| e.to_string())?), &rows),
        None => write_csv(io::stdout().lock(), &rows),
    };
    result.map_err(|e| e.to_string())
}

fn verify(env: Env<'static>, path: PathBuf) -> Result<(), String> {
    let log = SessionLog::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let session = replay(&log, &env).map_err(|e| format!("{}: {e}", path.display()))?;
    println!(
        "{}: {} records replayed exactly; turn {}, {} to move",
        path.display(),
        log.records.len(),
        session.state().turn,
        session.state().turn_owner
    );
    Ok(())
}
