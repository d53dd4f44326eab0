use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kextract_core::agent::{Agent, AgentError, LoopConfig, OutcomeStatus, TaskReport};
use kextract_core::eval::{emit_report, run_corpus, ReportFormat};
use kextract_core::llm::{
    Backend, LiveBackend, LlmError, LlmGateway, RecordBackend, ReplayBackend, ScriptedBackend,
    TokenLedger,
};
use kextract_core::memory::{EpisodeLog, RuleStore};
use kextract_core::oversight::{
    OracleOversight, OversightChannel, OversightQueue, QueueOversight,
};
use kextract_core::planner::DEFAULT_DEPTH_CAP;
use kextract_core::prompt::PromptBank;
use kextract_core::verify::ResponseCategory;

use crate::serve::{router, spawn_run, ServeState};
use crate::source::{load_corpus, load_scenario_arg, load_script, LoadedScenario};
use crate::terminal::TerminalOversight;

#[derive(Debug, Parser)]
#[command(name = "kextract", version, about = "Extract task knowledge from a language model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn and carry out a task in a scenario.
    Learn(LearnArgs),
    /// Categorize a labeled response corpus.
    Eval(EvalArgs),
    /// Run a task and write every exchange to a corpus file.
    Record(RecordArgs),
    /// Run a task behind an HTTP oversight API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Live,
    Replay,
    Scripted,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Where completions come from.
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Corpus for replay; defaults to the scenario's own.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Responses for the scripted backend (JSON string array or one per line).
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Completions endpoint for the live backend.
    #[arg(long, env = "KEXTRACT_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Environment variable holding the live backend's API key.
    #[arg(long, default_value = "KEXTRACT_API_KEY")]
    pub credential_env: String,
    #[arg(long)]
    pub model: Option<String>,
    /// Stop once this many tokens have been sent and received.
    #[arg(long)]
    pub budget_tokens: Option<u64>,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Bundled scenario name or path to a scenario file or directory.
    pub scenario: String,
    /// Task name; defaults to the scenario's.
    #[arg(long)]
    pub task: Option<String>,
    /// Preference file; defaults to the scenario's.
    #[arg(long)]
    pub prefs: Option<PathBuf>,
    /// Rule store to load before and save after the run.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Episode log (NDJSON), appended to.
    #[arg(long)]
    pub episodes: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub max_repairs: usize,
    #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
    pub depth_cap: usize,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Ask a person at the terminal instead of the preference oracle.
    #[arg(long)]
    pub interactive: bool,
    /// Write the task report as JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Corpus file, or `kitchen35` for the bundled one.
    pub corpus: String,
    /// Bundled scenario name or path.
    pub scenario: String,
    /// Preference file; defaults to the scenario's.
    #[arg(long)]
    pub prefs: Option<PathBuf>,
    /// text, csv or json.
    #[arg(long, default_value = "text")]
    pub format: String,
    #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
    pub depth_cap: usize,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Corpus file to append exchanges to.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub interactive: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Seconds to wait for a decision before suspending the object.
    #[arg(long, default_value_t = 300)]
    pub decision_timeout: u64,
}

/// Exit status for an error: 2 for model backend failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<LlmError>().is_some() {
            return 2;
        }
        if let Some(AgentError::Llm(_)) = cause.downcast_ref::<AgentError>() {
            return 2;
        }
    }
    1
}

fn build_backend(args: &BackendArgs, loaded: &LoadedScenario, default: BackendKind) -> Result<Box<dyn Backend>> {
    Ok(match args.backend.unwrap_or(default) {
        BackendKind::Replay => Box::new(ReplayBackend::new(loaded.corpus(args.corpus.as_deref())?)),
        BackendKind::Scripted => {
            let Some(path) = &args.script else {
                bail!("the scripted backend needs --script");
            };
            Box::new(ScriptedBackend::new(load_script(path)?))
        }
        BackendKind::Live => {
            let Some(endpoint) = &args.endpoint else {
                bail!("the live backend needs --endpoint or KEXTRACT_ENDPOINT");
            };
            Box::new(LiveBackend::new(
                endpoint,
                &args.credential_env,
                args.model.clone(),
                Duration::from_millis(args.timeout_ms),
            ))
        }
    })
}

fn build_agent(
    run: &RunArgs,
    loaded: &LoadedScenario,
    backend: Box<dyn Backend>,
    oversight: Box<dyn OversightChannel + Send>,
) -> Result<Agent> {
    let mut gateway = LlmGateway::new(backend, Arc::new(TokenLedger::new()));
    gateway.budget_tokens = run.backend.budget_tokens;
    gateway.max_retries = run.backend.max_retries;
    let cfg = LoopConfig {
        max_repairs: run.max_repairs,
        depth_cap: run.depth_cap,
        ..LoopConfig::default()
    };
    let mut agent = Agent::new(cfg, PromptBank::bundled(), loaded.lexicon.clone(), gateway, oversight);
    if let Some(path) = &run.rules {
        if path.exists() {
            agent.rules = RuleStore::load(path).with_context(|| format!("loading rules {}", path.display()))?;
        }
    }
    if let Some(path) = &run.episodes {
        agent.episodes =
            EpisodeLog::open(path).with_context(|| format!("opening episode log {}", path.display()))?;
    }
    Ok(agent)
}

fn oracle_or_terminal(
    run: &RunArgs,
    loaded: &LoadedScenario,
    interactive: bool,
) -> Result<Box<dyn OversightChannel + Send>> {
    if interactive {
        return Ok(Box::new(TerminalOversight::new(
            BufReader::new(std::io::stdin()),
            std::io::stderr(),
            loaded.lexicon.clone(),
        )));
    }
    match loaded.preferences(run.prefs.as_deref())? {
        Some(prefs) => Ok(Box::new(OracleOversight::new(prefs))),
        None => bail!(
            "scenario {} has no preference file; pass --prefs or --interactive",
            loaded.name
        ),
    }
}

fn save_rules(agent: &Agent, path: Option<&Path>) -> Result<()> {
    if let Some(p) = path {
        agent.rules.save(p).with_context(|| format!("saving rules {}", p.display()))?;
    }
    Ok(())
}

pub fn summarize(report: &TaskReport) -> String {
    let achieved = report
        .outcomes
        .iter()
        .filter(|o| o.status == OutcomeStatus::Achieved)
        .count();
    let mut out = format!(
        "task: {}\nobjects: {} processed, {} achieved{}\nllm calls: {} ({} repairs, {} action prompts)\n\
         tokens: {} sent, {} received\ndecisions: {}\nrules compiled: {}\n",
        report.task,
        report.objects_processed,
        achieved,
        if report.suspended { ", suspended" } else { "" },
        report.llm_calls,
        report.repairs,
        report.action_prompts,
        report.ledger.sent,
        report.ledger.received,
        report.oversight_decisions,
        report.rules_compiled,
    );
    for c in ResponseCategory::ALL {
        out.push_str(&format!("  {:<24}{:>5}\n", c.label(), report.tally.get(c)));
    }
    out.push_str(&format!("final state: {}\n", report.final_digest));
    out
}

fn learn(args: LearnArgs) -> Result<()> {
    let loaded = load_scenario_arg(&args.run.scenario)?;
    let task = loaded.task(args.run.task.as_deref())?;
    let backend = build_backend(&args.run.backend, &loaded, BackendKind::Replay)?;
    let oversight = oracle_or_terminal(&args.run, &loaded, args.interactive)?;
    let mut agent = build_agent(&args.run, &loaded, backend, oversight)?;
    let mut world = loaded.scenario.world.clone();
    let report = agent.run_task(&mut world, &loaded.scenario.embodiment, &task)?;
    save_rules(&agent, args.run.rules.as_deref())?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = &args.report {
        std::fs::write(path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut stdout = std::io::stdout().lock();
    match args.format {
        OutputFormat::Text => write!(stdout, "{}", summarize(&report))?,
        OutputFormat::Json => writeln!(stdout, "{json}")?,
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let format: ReportFormat = args.format.parse()?;
    let loaded = load_scenario_arg(&args.scenario)?;
    let Some(prefs) = loaded.preferences(args.prefs.as_deref())? else {
        bail!("scenario {} has no preference file; pass --prefs", loaded.name);
    };
    let corpus = load_corpus(&args.corpus)?;
    let report = run_corpus(
        &corpus,
        &loaded.scenario.world,
        &loaded.scenario.embodiment,
        &loaded.lexicon,
        &prefs,
        args.depth_cap,
    )?;
    print!("{}", emit_report(&report, format));
    Ok(())
}

fn record(args: RecordArgs) -> Result<()> {
    let loaded = load_scenario_arg(&args.run.scenario)?;
    let task = loaded.task(args.run.task.as_deref())?;
    let inner = build_backend(&args.run.backend, &loaded, BackendKind::Live)?;
    let backend = Box::new(RecordBackend::new(inner, &args.out));
    let oversight = oracle_or_terminal(&args.run, &loaded, args.interactive)?;
    let mut agent = build_agent(&args.run, &loaded, backend, oversight)?;
    let mut world = loaded.scenario.world.clone();
    let report = agent.run_task(&mut world, &loaded.scenario.embodiment, &task)?;
    save_rules(&agent, args.run.rules.as_deref())?;
    eprintln!("recorded {} exchanges to {}", report.ledger.calls, args.out.display());
    print!("{}", summarize(&report));
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let loaded = load_scenario_arg(&args.run.scenario)?;
    let task = loaded.task(args.run.task.as_deref())?;
    let prefs = loaded.preferences(args.run.prefs.as_deref())?;
    let backend = build_backend(&args.run.backend, &loaded, BackendKind::Replay)?;
    let queue = Arc::new(OversightQueue::new());
    let oversight = Box::new(QueueOversight::new(
        queue.clone(),
        Duration::from_secs(args.decision_timeout),
    ));
    let episodes_path = match &args.run.episodes {
        Some(p) => p.clone(),
        None => std::env::temp_dir().join(format!("kextract-episodes-{}.ndjson", std::process::id())),
    };
    let run = RunArgs {
        episodes: Some(episodes_path.clone()),
        ..args.run.clone()
    };
    let agent = build_agent(&run, &loaded, backend, oversight)?;
    let state = ServeState::new(
        queue,
        loaded.lexicon.clone(),
        loaded.scenario.world.clone(),
        prefs.map(|p| p.document().clone()),
        args.run.prefs.clone(),
        episodes_path,
    );
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", args.host, args.port))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        let _run = spawn_run(
            state.clone(),
            agent,
            loaded.scenario.world.clone(),
            loaded.scenario.embodiment.clone(),
            task,
        );
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Learn(a) => learn(a),
        Command::Eval(a) => eval(a),
        Command::Record(a) => record(a),
        Command::Serve(a) => serve(a),
    }
}
