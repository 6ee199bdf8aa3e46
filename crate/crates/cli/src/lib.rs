//! Batch runner behind the `hkq` binary: reads one JSON experiment config,
//! runs a subcommand, and writes `report.json` plus optional
//! `trace_<k>.csv` files to the output directory.
//!
//! Reports are deterministic: starts are processed in parallel but collected
//! in start order, floats are written with 17 significant digits, and
//! nothing run-dependent (paths, thread counts, timings) is recorded.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::{Path, PathBuf};

use hkq_core::{EPSILON, VERSION};

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
use report::{Report, Verdict};

const DEFAULT_OUT: &str = "hkq-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Flow,
    Lyapunov,
    Critical,
    FrameCheck,
    Poincare,
    BlowupCheck,
    Semistable,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Self::Flow => "flow",
            Self::Lyapunov => "lyapunov",
            Self::Critical => "critical",
            Self::FrameCheck => "frame-check",
            Self::Poincare => "poincare",
            Self::BlowupCheck => "blowup-check",
            Self::Semistable => "semistable",
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub cap: Option<usize>,
    pub jobs: Option<usize>,
}

pub struct RunSummary {
    pub report: Report,
    pub out: PathBuf,
}

pub fn run(task: Task, config: &Path, overrides: &Overrides) -> Result<RunSummary> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = overrides.seed {
        cfg.sampler.seed = seed;
    }
    if let Some(cap) = overrides.cap {
        cfg.cap = Some(cap);
    }
    let out = overrides
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    let pool = match overrides.jobs {
        Some(0) => return Err(CliError::Invalid("--jobs must be positive".into())),
        Some(j) => rayon::ThreadPoolBuilder::new().num_threads(j).build()?,
        None => rayon::ThreadPoolBuilder::new().build()?,
    };
    let outcome = pool.install(|| match task {
        Task::Flow => commands::flow(&cfg),
        Task::Lyapunov => commands::lyapunov(&cfg),
        Task::Critical => commands::critical(&cfg),
        Task::FrameCheck => commands::frame_check(&cfg),
        Task::Poincare => commands::poincare(&cfg),
        Task::BlowupCheck => commands::blowup_check(&cfg),
        Task::Semistable => commands::semistable(&cfg),
    })?;

    std::fs::create_dir_all(&out).map_err(|source| CliError::Write {
        path: out.clone(),
        source,
    })?;
    for (k, trace) in &outcome.traces {
        report::write_trace(&out, *k, trace)?;
    }
    let report = Report {
        tool: "hkq",
        version: VERSION,
        epsilon: EPSILON,
        subcommand: task.name().to_owned(),
        config_hash: cfg.hash(),
        seed: cfg.sampler.seed,
        verdict: if outcome.failures.is_empty() { Verdict::Pass } else { Verdict::Fail },
        failures: outcome.failures,
        result: outcome.result,
    };
    report::write_report(&out, &report)?;
    Ok(RunSummary { report, out })
}
