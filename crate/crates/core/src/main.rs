use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;

use spiraldim::dimension::estimate_dimension;
use spiraldim::scenario::{read_samples, run_scenario, Kind, ScenarioConfig, ScenarioError};

/// Minkowski dimension of orbits, trajectory bundles and spirals.
#[derive(Parser)]
#[command(name = "spiraldim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Set any config key, e.g. `params.alpha=0.5`. Applied in order.
    #[arg(long = "override", short = 's', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run(RunArgs),
    /// Re-estimate the dimension from an emitted sample table.
    Estimate {
        #[arg(long)]
        samples: PathBuf,
        /// Ambient dimension: 1 for sequences, 2 for curves.
        #[arg(long)]
        ambient: u8,
    },
    /// Power, geometric or orbit sequence.
    Sequence(RunArgs),
    /// Trajectory bundle through a hyperbolic saddle.
    SaddleBundle(RunArgs),
    /// Trajectory bundle through a semi-hyperbolic corner.
    SemihypBundle(RunArgs),
    /// Spiral around a weak focus.
    FocusSpiral(RunArgs),
    /// Spiral accumulating on a limit cycle.
    LimitCycleSpiral(RunArgs),
    /// Orbit of a saddle-loop return map.
    SaddleLoop(RunArgs),
    /// Consistency report for a two-saddle cycle.
    TwoCycle(RunArgs),
    /// Cyclicity bound from a spiral dimension.
    Cyclicity(RunArgs),
}

fn load(kind: Option<Kind>, args: RunArgs) -> Result<ScenarioConfig, ScenarioError> {
    let overrides = args.overrides;
    let mut config = match (&args.config, kind) {
        (Some(path), Some(kind)) => {
            let config = ScenarioConfig::load(path, &overrides)?;
            if config.kind != kind {
                return Err(ScenarioError::Config(format!(
                    "{} has kind `{}`, expected `{}`",
                    path.display(),
                    config.kind.name(),
                    kind.name()
                )));
            }
            config
        }
        (Some(path), None) => ScenarioConfig::load(path, &overrides)?,
        (None, Some(kind)) => {
            ScenarioConfig::from_toml(&format!("kind = \"{}\"\n", kind.name()), &overrides)?
        }
        (None, None) => return Err(ScenarioError::Config("`run` needs --config".into())),
    };
    if let Some(out) = args.out {
        config
            .overrides
            .push(("outputs.dir".into(), out.display().to_string()));
        config.outputs.dir = Some(out);
    }
    Ok(config)
}

fn run(kind: Option<Kind>, args: RunArgs) -> Result<(), ScenarioError> {
    let config = load(kind, args)?;
    let record = run_scenario(&config)?;
    for w in &record.warnings {
        warn!("{w}");
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&record).expect("record serializes")
    );
    Ok(())
}

fn estimate(samples: PathBuf, ambient: u8) -> Result<(), ScenarioError> {
    let samples = read_samples(&samples)?;
    let e = estimate_dimension(&samples, ambient).map_err(|source| ScenarioError::Pipeline {
        stage: "estimate",
        source,
    })?;
    println!(
        "{}",
        serde_json::to_string_pretty(&e).expect("estimate serializes")
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(None, a),
        Command::Estimate { samples, ambient } => estimate(samples, ambient),
        Command::Sequence(a) => run(Some(Kind::Sequence), a),
        Command::SaddleBundle(a) => run(Some(Kind::SaddleBundle), a),
        Command::SemihypBundle(a) => run(Some(Kind::SemihypBundle), a),
        Command::FocusSpiral(a) => run(Some(Kind::FocusSpiral), a),
        Command::LimitCycleSpiral(a) => run(Some(Kind::LimitCycleSpiral), a),
        Command::SaddleLoop(a) => run(Some(Kind::SaddleLoop), a),
        Command::TwoCycle(a) => run(Some(Kind::TwoCycle), a),
        Command::Cyclicity(a) => run(Some(Kind::Cyclicity), a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
