//! `rhino`: headless runs, replays, metrics, graphs, recognizer fitting,
//! scenario validation and the session server.

mod files;

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rhino_core::intention::fit_centroids;
use rhino_core::occgraph::{build_graph, to_dot};
use rhino_core::simworld::{labeled_features, run_script, InputLog, LeaderScript, RunConfig};
use rhino_core::skillspec::{builtin_scenarios, IntentionId, Scenario, SkillKind};
use rhino_core::trace::{format_metrics, metrics, replay, ReplayVerdict, Trace};
use rhino_server::{AppState, ServerConfig};

#[derive(Debug, Parser)]
#[command(name = "rhino", version, about = "Reactive intention-driven skill planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a leader script headless and write its trace.
    Run(RunArgs),
    /// Re-execute a trace and report the first divergence, if any.
    Replay {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Print latency and per-skill outcome tables for a trace.
    Metrics {
        #[arg(long)]
        trace: PathBuf,
        /// Used for skill names; defaults to the scenario named in the trace.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Describe a scenario's occupancy graph.
    Graph {
        #[arg(long)]
        scenario: String,
        /// Emit Graphviz DOT instead of an edge list.
        #[arg(long)]
        dot: bool,
    },
    /// Fit a nearest-centroid recognizer on the leader inputs of traces.
    Fit {
        #[arg(long, required = true)]
        trace: Vec<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Host live sessions over HTTP and WebSocket.
    Serve(ServeArgs),
    /// Load a scenario and summarize it.
    Validate {
        #[arg(long)]
        scenario: String,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    scenario: String,
    /// Leader script; without one the leader stays idle.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Horizon in ticks; defaults to the end of the last script entry.
    #[arg(long)]
    ticks: Option<u64>,
    /// Recognize intentions from simulated observations.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Scenarios to offer; defaults to every built-in one.
    #[arg(long)]
    scenario: Vec<String>,
    #[arg(long, default_value_t = ServerConfig::default().snapshot_decimation, value_parser = clap::value_parser!(u32).range(1..))]
    snapshot_decimation: u32,
}

/// Writes to stdout; a reader that went away early is not an error.
fn say(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

macro_rules! sayln {
    ($($arg:tt)*) => {
        say(&format!("{}\n", format_args!($($arg)*)))
    };
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let summary: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("For more information"))
                .collect();
            eprintln!("{}", summary.join(" "));
            return ExitCode::from(2);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("RHINO_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => run(args),
        Command::Replay { scenario, trace } => replay_cmd(&scenario, &trace),
        Command::Metrics { trace, scenario } => metrics_cmd(&trace, scenario.as_deref()),
        Command::Graph { scenario, dot } => graph(&scenario, dot),
        Command::Fit { trace, scenario, out } => fit(&trace, scenario.as_deref(), &out),
        Command::Serve(args) => serve(args),
        Command::Validate { scenario } => validate(&scenario),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let s = files::scenario(&args.scenario)?;
    let script = match &args.script {
        Some(p) => LeaderScript::parse(&files::read(p)?).with_context(|| format!("loading {}", p.display()))?,
        None => LeaderScript::default(),
    };
    let config = RunConfig {
        seed: args.seed,
        recognizer: args.raw,
    };
    let out = run_script(&s, &script, &config, args.ticks)?;
    files::write_atomic(&args.out, &out.trace().to_jsonl())?;
    sayln!(
        "{} events over {} ticks written to {}",
        out.log.len(),
        out.header.ticks,
        args.out.display()
    )
}

fn load_trace(path: &Path) -> Result<Trace> {
    Trace::parse(&files::read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn replay_cmd(scenario: &str, trace: &Path) -> Result<()> {
    let s = files::scenario(scenario)?;
    let t = load_trace(trace)?;
    match replay(&s, &t)? {
        ReplayVerdict::Clean { events } => {
            sayln!("clean: {events} events over {} ticks", t.header.ticks)
        }
        ReplayVerdict::Diverged(d) => bail!("diverged at {d}"),
    }
}

fn metrics_cmd(trace: &Path, scenario: Option<&str>) -> Result<()> {
    let t = load_trace(trace)?;
    let s = match scenario {
        Some(name) => Some(files::scenario(name)?),
        None => files::scenario(&t.header.scenario).ok(),
    };
    say(&format_metrics(&metrics(t.log.events()), s.as_ref()))
}

fn graph(scenario: &str, dot: bool) -> Result<()> {
    let s = files::scenario(scenario)?;
    let g = build_graph(&s);
    if dot {
        return say(&to_dot(&g, &s));
    }
    let mut text = format!("{} occupancies, {} edges\n", g.nodes().len(), g.edges().len());
    for &n in g.nodes() {
        for (skill, to) in g.successors(n) {
            text += &format!(
                "{} -> {}  {}\n",
                s.occupancy_label(n),
                s.occupancy_label(to),
                s.skill(skill).name
            );
        }
    }
    say(&text)
}

fn fit(traces: &[PathBuf], scenario: Option<&str>, out: &Path) -> Result<()> {
    let mut samples = Vec::new();
    let mut chosen: Option<Scenario> = match scenario {
        Some(name) => Some(files::scenario(name)?),
        None => None,
    };
    for path in traces {
        let t = load_trace(path)?;
        let s = match &chosen {
            Some(s) => s,
            None => chosen.insert(files::scenario(&t.header.scenario)?),
        };
        if t.header.scenario != s.name {
            bail!(
                "{} records scenario `{}`, not `{}`",
                path.display(),
                t.header.scenario,
                s.name
            );
        }
        let inputs = InputLog::from_script(s, &t.header.inputs, t.header.ticks)
            .with_context(|| format!("inputs of {}", path.display()))?;
        samples.extend(labeled_features(s, &inputs, t.header.seed));
    }
    let s = chosen.expect("at least one trace");
    let classes: Vec<IntentionId> = s.intentions.iter().map(|i| i.id).collect();
    let model = fit_centroids(&samples, &classes)?;
    let correct = samples
        .iter()
        .filter(|(f, label)| rhino_core::intention::classify(&model, f).0 == *label)
        .count();
    files::write_atomic(out, &model.to_json())?;
    sayln!(
        "{} classes from {} samples, training accuracy {:.1}%, written to {}",
        model.classes().len(),
        samples.len(),
        100.0 * correct as f64 / samples.len().max(1) as f64,
        out.display()
    )
}

fn serve(args: ServeArgs) -> Result<()> {
    let scenarios = if args.scenario.is_empty() {
        builtin_scenarios()
    } else {
        args.scenario
            .iter()
            .map(|s| files::scenario(s))
            .collect::<Result<_>>()?
    };
    let config = ServerConfig {
        snapshot_decimation: args.snapshot_decimation,
        ..ServerConfig::default()
    };
    let runtime = tokio::runtime::Runtime::new().context("starting the runtime")?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(SocketAddr::new(args.host, args.port))
            .await
            .with_context(|| format!("binding {}:{}", args.host, args.port))?;
        let addr = listener.local_addr()?;
        sayln!("listening on http://{addr}")?;
        tracing::info!(%addr, "serving");
        rhino_server::serve(listener, AppState::new(scenarios, config))
            .await
            .context("serving")
    })
}

fn validate(scenario: &str) -> Result<()> {
    let s = files::scenario(scenario)?;
    sayln!(
        "{} skills, {} objects\n{} manipulation, {} motion, {} idle; {} intentions; {} occupancies reachable",
        s.skills.len(),
        s.objects.len(),
        s.count_kind(SkillKind::Manipulation),
        s.count_kind(SkillKind::Motion),
        s.count_kind(SkillKind::Idle),
        s.intentions.len(),
        build_graph(&s).nodes().len()
    )
}
