//! Command-line front end: `train`, `eval`, `battery` and `replay`.
//!
//! Every run starts from a JSON config file (or the defaults), applies flag
//! overrides on top, and prints the resulting effective config before doing any work.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{
    format_table, run_battery, verify_trace, write_episodes_csv, write_plot, write_report_csv,
    BatteryConfig, BenchReport, PolicySpec,
};
use crate::drl::{load_weights, train, PriorityMode, Trainer, TrainerConfig};
use crate::env::{EnvConfig, EnvSettings, EpisodeTrace};
use crate::error::{ReplanError, Result};
use crate::global::GlobalPlannerKind;
use crate::local::{LocalPlannerConfig, LocalPlannerKind};
use crate::strategy::{StrategyConfig, StrategyKind};
use crate::world::{MapKind, ScenarioConfig, DEFAULT_FIELD_SIZE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StrategyChoice {
    None,
    Distance,
    Stuck,
    Time,
    TimePatience,
    Drl,
}

impl StrategyChoice {
    fn rule(self) -> Option<StrategyKind> {
        Some(match self {
            StrategyChoice::None => StrategyKind::None,
            StrategyChoice::Distance => StrategyKind::Distance,
            StrategyChoice::Stuck => StrategyKind::Stuck,
            StrategyChoice::Time => StrategyKind::Time,
            StrategyChoice::TimePatience => StrategyKind::TimePatience,
            StrategyChoice::Drl => return None,
        })
    }

    const RULES: [StrategyChoice; 5] = [
        StrategyChoice::None,
        StrategyChoice::Distance,
        StrategyChoice::Stuck,
        StrategyChoice::Time,
        StrategyChoice::TimePatience,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Train,
    Eval,
    Battery,
    Replay,
}

/// Effective configuration of one run. Top-level keys have matching flags;
/// the nested sections can only be set from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    pub map: MapKind,
    pub gp: GlobalPlannerKind,
    pub lp: LocalPlannerKind,
    pub obstacles: usize,
    pub static_prob: f64,
    pub field_size: f64,
    /// Empty means every rule-based strategy, plus `drl` when weights are given.
    pub strategy: Vec<StrategyChoice>,
    /// Training seed, or the first episode seed for `eval` and `battery`.
    pub seed: u64,
    pub trials: u64,
    pub jobs: usize,
    pub weights: Option<PathBuf>,
    pub out: PathBuf,
    pub traces: bool,
    pub env: EnvConfig,
    pub local: LocalPlannerConfig,
    pub strategy_params: StrategyConfig,
    /// `trainer.seed` always follows the top-level `seed`.
    pub trainer: TrainerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            map: MapKind::Sixteen,
            gp: GlobalPlannerKind::Dijkstra,
            lp: LocalPlannerKind::Dwa,
            obstacles: 10,
            static_prob: 0.3,
            field_size: DEFAULT_FIELD_SIZE,
            strategy: Vec::new(),
            seed: 0,
            trials: 100,
            jobs: 1,
            weights: None,
            out: PathBuf::from("runs"),
            traces: true,
            env: EnvConfig::default(),
            local: LocalPlannerConfig::default(),
            strategy_params: StrategyConfig::default(),
            trainer: TrainerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn settings(&self) -> EnvSettings {
        EnvSettings {
            scenario: ScenarioConfig {
                map_kind: self.map,
                seed: 0,
                n_obstacles: self.obstacles,
                static_prob: self.static_prob,
                field_size_m: self.field_size,
            },
            env: self.env,
            local: self.local,
            global_planner: self.gp,
            local_planner: self.lp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.settings().validate()?;
        self.strategy_params.validate()?;
        self.trainer.validate()?;
        if self.jobs == 0 {
            return Err(ReplanError::Config("jobs must be at least 1".into()));
        }
        if self.strategy.contains(&StrategyChoice::Drl) && self.weights.is_none() {
            return Err(ReplanError::Config(
                "strategy drl needs a weights file (--weights PATH)".into(),
            ));
        }
        Ok(())
    }

    /// Strategies to run, in a fixed order.
    pub fn strategies(&self) -> Vec<StrategyChoice> {
        if !self.strategy.is_empty() {
            return self.strategy.clone();
        }
        let mut all = StrategyChoice::RULES.to_vec();
        if self.weights.is_some() {
            all.push(StrategyChoice::Drl);
        }
        all
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "replan",
    version,
    about = "Learning when to replan: simulation, training and benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a DQN replanning policy.
    Train(RunArgs),
    /// Evaluate one strategy on consecutive seeds and list every episode.
    Eval(RunArgs),
    /// Run a paired battery for one or more strategies and write the report.
    Battery(RunArgs),
    /// Re-simulate trace files, verify them and export plot data.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pillar count: 9, 16 or 25.
    #[arg(long)]
    pub map: Option<MapKind>,
    #[arg(long, value_enum)]
    pub gp: Option<GlobalPlannerKind>,
    #[arg(long, value_enum)]
    pub lp: Option<LocalPlannerKind>,
    #[arg(long)]
    pub obstacles: Option<usize>,
    #[arg(long)]
    pub static_prob: Option<f64>,
    #[arg(long)]
    pub field_size: Option<f64>,
    /// Repeat or separate with commas.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub strategy: Vec<StrategyChoice>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Do not write per-episode traces.
    #[arg(long)]
    pub no_traces: bool,
    /// Training steps (`trainer.total_steps`).
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long, value_enum)]
    pub priority_mode: Option<PriorityMode>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    #[arg(long)]
    pub epsilon_decay_steps: Option<u64>,
    #[arg(long)]
    pub target_sync_every: Option<u64>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Train without importance-sampling weights.
    #[arg(long)]
    pub no_importance_sampling: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Trace files, or directories whose `.trace` files are all replayed.
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    /// Directory for the plot files.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

impl RunArgs {
    /// Loads the config file, if any, and applies the flags on top.
    pub fn resolve(&self, command: CommandKind) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ReplanError::io(path, e))?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| ReplanError::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(k) = c.command {
            if k != command {
                return Err(ReplanError::Config(format!(
                    "config file is for {k:?}, not {command:?}"
                )));
            }
        }
        c.command = Some(command);
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set!(
            map => map, gp => gp, lp => lp, obstacles => obstacles,
            static_prob => static_prob, field_size => field_size, seed => seed,
            trials => trials, jobs => jobs, out => out,
            steps => trainer.total_steps, priority_mode => trainer.priority_mode,
            lr => trainer.lr, batch => trainer.batch, gamma => trainer.gamma,
            warmup_steps => trainer.warmup_steps,
            epsilon_decay_steps => trainer.epsilon_decay_steps,
            target_sync_every => trainer.target_sync_every,
            checkpoint_every => trainer.checkpoint_every,
        );
        if self.weights.is_some() {
            c.weights = self.weights.clone();
        }
        if !self.strategy.is_empty() {
            c.strategy = self.strategy.clone();
        }
        if self.no_traces {
            c.traces = false;
        }
        if self.no_importance_sampling {
            c.trainer.importance_sampling = false;
        }
        c.trainer.seed = c.seed;
        c.validate()?;
        Ok(c)
    }
}

/// Exit status for a library error.
pub fn exit_code(e: &ReplanError) -> i32 {
    match e {
        ReplanError::Config(_) | ReplanError::ModelFormat(_) => EXIT_CONFIG,
        ReplanError::TraceMismatch { .. } => EXIT_MISMATCH,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => a.resolve(CommandKind::Train).and_then(|c| cmd_train(&c)),
        Command::Eval(a) => a.resolve(CommandKind::Eval).and_then(|c| cmd_eval(&c)),
        Command::Battery(a) => a
            .resolve(CommandKind::Battery)
            .and_then(|c| cmd_battery(&c)),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn print_config(c: &RunConfig) -> Result<String> {
    let text = serde_json::to_string_pretty(c).map_err(|e| ReplanError::Config(e.to_string()))?;
    println!("effective config:\n{text}");
    Ok(text)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ReplanError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| ReplanError::io(path, e))
}

pub fn cmd_train(c: &RunConfig) -> Result<()> {
    let config_text = print_config(c)?;
    let existed = c.out.exists();
    create_dir(&c.out)?;
    let mut created = vec![c.out.join("config.json")];
    let outcome = (|| {
        write_file(&created[0], &config_text)?;
        let mut trainer = Trainer::new(c.trainer.clone())?;
        let summary = train(&c.settings(), &mut trainer, Some(&c.out), &mut |line| {
            println!("{line}");
        })?;
        println!(
            "trained {} steps over {} episodes ({} updates, {} seeds without a path)",
            summary.steps,
            summary.episodes.len(),
            summary.updates,
            summary.aborted_seeds.len()
        );
        println!(
            "weights: {}",
            c.out.join(crate::drl::trainer::WEIGHTS_FILE).display()
        );
        Ok(())
    })();
    if outcome.is_err() {
        // leave nothing half-written behind
        created.push(c.out.join(crate::drl::trainer::LOG_FILE));
        created.push(c.out.join(crate::drl::trainer::WEIGHTS_FILE));
        for f in &created {
            let _ = std::fs::remove_file(f);
        }
        if let Ok(entries) = std::fs::read_dir(&c.out) {
            for e in entries.flatten() {
                let name = e.file_name().to_string_lossy().into_owned();
                if name.starts_with("checkpoint_") && name.ends_with(".bin") {
                    let _ = std::fs::remove_file(e.path());
                }
            }
        }
        if !existed {
            let _ = std::fs::remove_dir(&c.out);
        }
    }
    outcome
}

fn policy_for(c: &RunConfig, s: StrategyChoice) -> Result<PolicySpec> {
    match s.rule() {
        Some(kind) => Ok(PolicySpec::Rule(kind, c.strategy_params)),
        None => {
            let path = c.weights.as_ref().ok_or_else(|| {
                ReplanError::Config("strategy drl needs a weights file (--weights PATH)".into())
            })?;
            Ok(PolicySpec::Drl(Arc::new(load_weights(path)?)))
        }
    }
}

fn run_reports(c: &RunConfig, strategies: &[StrategyChoice]) -> Result<Vec<BenchReport>> {
    // load every network before running anything, so a bad file fails fast
    let policies: Vec<PolicySpec> = strategies
        .iter()
        .map(|&s| policy_for(c, s))
        .collect::<Result<_>>()?;
    create_dir(&c.out)?;
    let mut reports = Vec::new();
    for policy in policies {
        let cfg = BatteryConfig {
            settings: c.settings(),
            policy,
            n_trials: c.trials,
            base_seed: c.seed,
            jobs: c.jobs,
            trace_dir: c.traces.then(|| c.out.join("traces")),
        };
        let report = run_battery(&cfg)?;
        if !report.aborted.is_empty() {
            eprintln!(
                "{}: {} episode(s) aborted (no initial path), seeds {:?}",
                report.strategy,
                report.aborted.len(),
                report.aborted
            );
        }
        reports.push(report);
    }
    Ok(reports)
}

pub fn cmd_eval(c: &RunConfig) -> Result<()> {
    let strategies = c.strategies();
    if strategies.len() != 1 {
        return Err(ReplanError::Config(
            "eval runs exactly one strategy; use battery for several".into(),
        ));
    }
    let config_text = print_config(c)?;
    let reports = run_reports(c, &strategies)?;
    write_file(&c.out.join("config.json"), &config_text)?;
    let r = &reports[0];
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "seed  outcome    AT      AL      OL     NR  SGT");
    for e in &r.episodes {
        let _ = writeln!(
            out,
            "{:<5} {:<9} {:>6.1} {:>7.2} {:>7.2} {:>4}  {:.4}",
            e.seed,
            format!("{:?}", e.outcome).to_lowercase(),
            e.at,
            e.al,
            e.ol,
            e.nr,
            e.sgt
        );
    }
    let _ = write!(out, "{}", format_table(&reports));
    write_episodes_csv(&reports, &c.out.join("episodes.csv"))
}

pub fn cmd_battery(c: &RunConfig) -> Result<()> {
    let config_text = print_config(c)?;
    let reports = run_reports(c, &c.strategies())?;
    write_file(&c.out.join("config.json"), &config_text)?;
    let table = format_table(&reports);
    print!("{table}");
    write_file(&c.out.join("report.txt"), &table)?;
    write_report_csv(&reports, &c.out.join("report.csv"))?;
    write_episodes_csv(&reports, &c.out.join("episodes.csv"))
}

fn collect_traces(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| ReplanError::io(p, e))?
                .flatten()
                .map(|e| e.path())
                .filter(|q| q.extension().is_some_and(|x| x == "trace"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    println!(
        "effective config:\n{}",
        serde_json::json!({ "command": "replay", "traces": a.traces, "out": a.out })
    );
    let files = collect_traces(&a.traces)?;
    if files.is_empty() {
        return Err(ReplanError::Config("no trace files found".into()));
    }
    create_dir(&a.out)?;
    for path in &files {
        let f = std::fs::File::open(path).map_err(|e| ReplanError::io(path, e))?;
        let trace = EpisodeTrace::read_from(std::io::BufReader::new(f))?;
        let result = verify_trace(&trace).map_err(|e| match e {
            ReplanError::TraceMismatch { line, detail } => ReplanError::TraceMismatch {
                line,
                detail: format!("{}: {detail}", path.display()),
            },
            other => other,
        })?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trace".into());
        let plot = a.out.join(format!("{stem}.plot.csv"));
        write_plot(&trace, &plot)?;
        println!(
            "verified {} ({} ticks, {:?}, {} replans) -> {}",
            path.display(),
            trace.records.len(),
            result.outcome,
            result.replans,
            plot.display()
        );
    }
    println!("{} trace(s) verified", files.len());
    Ok(())
}
