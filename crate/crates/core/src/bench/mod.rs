//! Seeded trial batteries and the navigation metrics SR, CR, SGT, SPL and NR.

pub mod replay;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drl::{DrlPolicy, QNetwork};
use crate::env::{run_episode, EnvSettings, Outcome, ReplanEnv, ReplanPolicy};
use crate::error::{ReplanError, Result};
use crate::strategy::{RuleStrategy, StrategyConfig, StrategyKind};

pub use replay::{plot_rows, verify_trace, write_plot, PlotRow};

/// Which replanning policy a battery runs.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    Rule(StrategyKind, StrategyConfig),
    Drl(Arc<QNetwork<f32>>),
}

impl PolicySpec {
    pub fn name(&self) -> String {
        match self {
            PolicySpec::Rule(kind, _) => kind.name().to_string(),
            PolicySpec::Drl(_) => "drl".into(),
        }
    }

    pub fn build(&self) -> Box<dyn ReplanPolicy> {
        match self {
            PolicySpec::Rule(kind, cfg) => Box::new(RuleStrategy::new(*kind, *cfg)),
            PolicySpec::Drl(net) => Box::new(DrlPolicy::new(net.as_ref().clone())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatteryConfig {
    pub settings: EnvSettings,
    pub policy: PolicySpec,
    pub n_trials: u64,
    pub base_seed: u64,
    /// Worker threads; 1 runs everything on the calling thread.
    pub jobs: usize,
    /// Write one trace file per episode here.
    pub trace_dir: Option<PathBuf>,
}

impl BatteryConfig {
    pub fn new(settings: EnvSettings, policy: PolicySpec) -> Self {
        Self {
            settings,
            policy,
            n_trials: 100,
            base_seed: 0,
            jobs: 1,
            trace_dir: None,
        }
    }

    pub fn seeds(&self) -> std::ops::Range<u64> {
        self.base_seed..self.base_seed + self.n_trials
    }
}

/// Per-episode quantities entering the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEpisode {
    pub seed: u64,
    pub outcome: Outcome,
    /// Actual time, s.
    pub at: f64,
    /// Optimal time, s.
    pub ot: f64,
    /// Actual travelled length, m.
    pub al: f64,
    /// Optimal length, m.
    pub ol: f64,
    pub nr: u64,
    pub sgt: f64,
}

impl BenchEpisode {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    pub fn from_result(r: &crate::env::EpisodeResult, settings: &EnvSettings) -> Self {
        Self {
            seed: r.seed,
            outcome: r.outcome,
            at: r.sim_time,
            ot: crate::env::reward::optimal_time(r.l_path, &settings.env),
            al: r.travelled,
            ol: r.l_path,
            nr: r.replans,
            sgt: r.sgt,
        }
    }
}

/// Mean over all episodes of `1_suc * OL / max(AL, OL)`.
pub fn compute_spl(results: &[BenchEpisode]) -> f64 {
    mean(results.iter().map(|e| {
        if e.success() {
            e.ol / e.al.max(e.ol)
        } else {
            0.0
        }
    }))
}

/// SPL with the actual length in the numerator, `1_suc * AL / max(AL, OL)`.
pub fn compute_spl_al(results: &[BenchEpisode]) -> f64 {
    mean(results.iter().map(|e| {
        if e.success() {
            e.al / e.al.max(e.ol)
        } else {
            0.0
        }
    }))
}

/// Per-episode `1_suc * OT / clip(AT, alpha OT, beta OT)`.
pub fn episode_sgt(success: bool, ot: f64, at: f64, alpha: f64, beta: f64) -> f64 {
    if !success {
        return 0.0;
    }
    ot / at.clamp(alpha * ot, beta * ot)
}

pub fn compute_sgt(results: &[BenchEpisode], alpha: f64, beta: f64) -> f64 {
    mean(
        results
            .iter()
            .map(|e| episode_sgt(e.success(), e.ot, e.at, alpha, beta)),
    )
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Aggregated battery outcome. Rates are percentages over the completed episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub map: String,
    pub gp: String,
    pub lp: String,
    pub strategy: String,
    pub trials: u64,
    /// Seeds without an initial path; excluded from every metric.
    pub aborted: Vec<u64>,
    pub sr: f64,
    pub cr: f64,
    pub tr: f64,
    pub sgt: f64,
    pub spl: f64,
    pub spl_al: f64,
    pub nr: u64,
    pub episodes: Vec<BenchEpisode>,
}

impl BenchReport {
    pub fn from_episodes(
        settings: &EnvSettings,
        strategy: &str,
        trials: u64,
        episodes: Vec<BenchEpisode>,
        aborted: Vec<u64>,
    ) -> Self {
        let n = episodes.len().max(1) as f64;
        let pct =
            |o: Outcome| 100.0 * episodes.iter().filter(|e| e.outcome == o).count() as f64 / n;
        Self {
            map: settings.scenario.map_kind.to_string(),
            gp: settings.global_planner.to_string(),
            lp: settings.local_planner.to_string(),
            strategy: strategy.to_string(),
            trials,
            sr: pct(Outcome::Success),
            cr: pct(Outcome::Collision),
            tr: pct(Outcome::Timeout),
            sgt: compute_sgt(&episodes, settings.env.sgt_alpha, settings.env.sgt_beta),
            spl: compute_spl(&episodes),
            spl_al: compute_spl_al(&episodes),
            nr: episodes.iter().map(|e| e.nr).sum(),
            aborted,
            episodes,
        }
    }

    pub fn completed(&self) -> usize {
        self.episodes.len()
    }

    pub fn successes(&self) -> usize {
        self.episodes.iter().filter(|e| e.success()).count()
    }
}

/// Runs `cfg.n_trials` episodes on consecutive seeds.
///
/// Episodes run in parallel on `cfg.jobs` threads; results are folded in seed order,
/// so the report does not depend on the thread count.
pub fn run_battery(cfg: &BatteryConfig) -> Result<BenchReport> {
    cfg.settings.validate()?;
    if let Some(dir) = &cfg.trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| ReplanError::io(dir, e))?;
    }
    let name = cfg.policy.name();
    let seeds: Vec<u64> = cfg.seeds().collect();
    let one = |seed: u64| run_one(cfg, &name, seed);
    let results: Vec<Result<Option<BenchEpisode>>> = if cfg.jobs <= 1 {
        seeds.iter().map(|&s| one(s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| ReplanError::Config(format!("thread pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(|&s| one(s)).collect())
    };
    let mut episodes = Vec::with_capacity(seeds.len());
    let mut aborted = Vec::new();
    for (seed, r) in seeds.iter().zip(results) {
        match r? {
            Some(e) => episodes.push(e),
            None => aborted.push(*seed),
        }
    }
    Ok(BenchReport::from_episodes(
        &cfg.settings,
        &name,
        cfg.n_trials,
        episodes,
        aborted,
    ))
}

fn run_one(cfg: &BatteryConfig, name: &str, seed: u64) -> Result<Option<BenchEpisode>> {
    let mut env = ReplanEnv::new(cfg.settings.clone())?;
    env.set_record_trace(cfg.trace_dir.is_some());
    let mut policy = cfg.policy.build();
    let result = match run_episode(&mut env, policy.as_mut(), seed) {
        Ok(r) => r,
        Err(ReplanError::InitialPlanFailed { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if let Some(dir) = &cfg.trace_dir {
        let trace = env.take_trace(name).expect("trace recording was on");
        let path = trace_path(dir, name, seed);
        let f = std::fs::File::create(&path).map_err(|e| ReplanError::io(&path, e))?;
        trace
            .write_to(std::io::BufWriter::new(f))
            .map_err(|e| ReplanError::io(&path, e))?;
    }
    Ok(Some(BenchEpisode::from_result(&result, &cfg.settings)))
}

pub fn trace_path(dir: &Path, policy: &str, seed: u64) -> PathBuf {
    dir.join(format!("{policy}_seed{seed:06}.trace"))
}

pub const REPORT_COLUMNS: [&str; 13] = [
    "map", "gp", "lp", "strategy", "trials", "aborted", "SR", "CR", "TR", "SGT", "SPL", "SPL_al",
    "NR",
];

fn report_fields(r: &BenchReport) -> Vec<String> {
    vec![
        r.map.clone(),
        r.gp.clone(),
        r.lp.clone(),
        r.strategy.clone(),
        r.trials.to_string(),
        r.aborted.len().to_string(),
        format!("{:.1}", r.sr),
        format!("{:.1}", r.cr),
        format!("{:.1}", r.tr),
        format!("{:.4}", r.sgt),
        format!("{:.4}", r.spl),
        format!("{:.4}", r.spl_al),
        r.nr.to_string(),
    ]
}

/// One CSV row per report.
pub fn write_report_csv(reports: &[BenchReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(REPORT_COLUMNS)
        .map_err(|e| csv_err(path, e))?;
    for r in reports {
        w.write_record(report_fields(r))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| ReplanError::io(path, e))
}

pub const EPISODE_COLUMNS: [&str; 9] = [
    "strategy", "seed", "outcome", "AT", "OT", "AL", "OL", "NR", "SGT",
];

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Success => "success",
        Outcome::Collision => "collision",
        Outcome::Timeout => "timeout",
    }
}

/// One CSV row per completed episode, tagged with its strategy.
pub fn write_episodes_csv(reports: &[BenchReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(EPISODE_COLUMNS)
        .map_err(|e| csv_err(path, e))?;
    for r in reports {
        for ep in &r.episodes {
            w.write_record([
                r.strategy.clone(),
                ep.seed.to_string(),
                outcome_name(ep.outcome).to_string(),
                ep.at.to_string(),
                ep.ot.to_string(),
                ep.al.to_string(),
                ep.ol.to_string(),
                ep.nr.to_string(),
                ep.sgt.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| ReplanError::io(path, e))
}

/// Aligned plain-text table, one line per report.
pub fn format_table(reports: &[BenchReport]) -> String {
    let rows: Vec<Vec<String>> =
        std::iter::once(REPORT_COLUMNS.iter().map(|s| s.to_string()).collect())
            .chain(reports.iter().map(report_fields))
            .collect();
    let widths: Vec<usize> = (0..REPORT_COLUMNS.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, &w))| {
                if c < 4 {
                    format!("{v:<w$}")
                } else {
                    format!("{v:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}

fn csv_err(path: &Path, e: csv::Error) -> ReplanError {
    ReplanError::io(path, std::io::Error::other(e))
}
