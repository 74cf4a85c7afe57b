use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ultraslow::report::{run, selftest, EXIT_ERROR};
use ultraslow::scenario::{parse_scenario, OutputFormat, Scenario, Task};

/// Regional gradient controllability and minimum-energy control for
/// Hadamard-Caputo fractional diffusion. Log level via RUST_LOG.
#[derive(Parser)]
#[command(name = "ultraslow", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Forward simulation of the scenario's control and initial state.
    Simulate(RunArgs),
    /// Gramian verdict and rank test. Exit code 2 when NOT controllable.
    Analyze(RunArgs),
    /// Minimum-energy control for the scenario's target.
    Synthesize(RunArgs),
    /// Structural checks of the square worked example.
    ReproduceExample(RunArgs),
    /// Quick checks against frozen reference values.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML). Optional for reproduce-example.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-axis mode cutoff K.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Energy cutoff in log time, needed for alpha <= 1/2.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

fn load(task: Task, args: &RunArgs) -> ultraslow::Result<Scenario> {
    let mut s = match &args.scenario {
        Some(path) => parse_scenario(path)?,
        None if task == Task::ReproduceExample => Scenario::worked_example(),
        None => return Err(ultraslow::Error::Config("--scenario is required".into())),
    };
    if s.task != task {
        log::info!("scenario task {:?} overridden by the command line verb", s.task);
        s.task = task;
    }
    if let Some(k) = args.cutoff {
        s.cutoff = k;
    }
    if let Some(eps) = args.epsilon {
        s.epsilon = Some(eps);
    }
    if let Some(dir) = &args.out {
        s.output.dir = dir.clone();
    }
    if let Some(f) = args.format {
        s.output.format = f;
    }
    s.validate()?;
    Ok(s)
}

fn execute(task: Task, args: &RunArgs) -> ultraslow::Result<i32> {
    let scenario = load(task, args)?;
    let output = ultraslow::par::with_threads(args.threads, || run(&scenario))?;
    for path in output.write(&scenario.output.dir, scenario.output.format)? {
        log::info!("wrote {}", path.display());
    }
    print!("{}", output.summary());
    Ok(output.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.verb {
        Verb::Simulate(a) => execute(Task::Simulate, a),
        Verb::Analyze(a) => execute(Task::Analyze, a),
        Verb::Synthesize(a) => execute(Task::Synthesize, a),
        Verb::ReproduceExample(a) => execute(Task::ReproduceExample, a),
        Verb::Selftest { out } => selftest().and_then(|r| {
            for c in &r.checks {
                println!("[{}] {}: {:.15e} (expected {:.15e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.expected);
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("selftest.json"), serde_json::to_string_pretty(&r)?)?;
            }
            Ok(r.exit_code())
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
