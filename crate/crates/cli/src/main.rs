use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hkq_cli::report::Verdict;
use hkq_cli::{run, Overrides, Task};

#[derive(Parser)]
#[command(name = "hkq", version, about = "Experiments on linear hyperkähler actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descent sweep with flow-closedness evidence.
    Flow(RunArgs),
    /// Boundedness certificate for circle descents.
    Lyapunov(RunArgs),
    /// Find critical points of f23 and check Hessian identities.
    Critical(RunArgs),
    /// General-frame verdict.
    FrameCheck(RunArgs),
    /// Poincaré series assembly.
    Poincare(RunArgs),
    /// Blow-up charts of quadric cones.
    BlowupCheck(RunArgs),
    /// Semistability classification sweep.
    Semistable(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json and traces.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampler seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Truncation degree for Poincaré series.
    #[arg(long)]
    cap: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (task, args) = match Cli::parse().command {
        Command::Flow(a) => (Task::Flow, a),
        Command::Lyapunov(a) => (Task::Lyapunov, a),
        Command::Critical(a) => (Task::Critical, a),
        Command::FrameCheck(a) => (Task::FrameCheck, a),
        Command::Poincare(a) => (Task::Poincare, a),
        Command::BlowupCheck(a) => (Task::BlowupCheck, a),
        Command::Semistable(a) => (Task::Semistable, a),
    };
    let overrides = Overrides {
        out: args.out,
        seed: args.seed,
        cap: args.cap,
        jobs: args.jobs,
    };
    match run(task, &args.config, &overrides) {
        Ok(summary) => {
            let r = &summary.report;
            println!(
                "{}: {} ({} failures) -> {}",
                r.subcommand,
                if r.verdict == Verdict::Pass { "pass" } else { "fail" },
                r.failures.len(),
                summary.out.join("report.json").display()
            );
            for f in &r.failures {
                eprintln!("  {}{}: {}", f.check, f.index.map(|k| format!("[{k}]")).unwrap_or_default(), f.detail);
            }
            if r.verdict == Verdict::Pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("hkq: {e}");
            ExitCode::from(2)
        }
    }
}
