use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prbench::{execute, Experiment, ExperimentConfig, HarnessError};

/// Phase retrieval experiments. Results are written as CSV.
///
/// Settings come from an optional config file of `key = value` lines and
/// are overridden by `--key value` pairs after it, e.g.
/// `prbench sweep --config grid.cfg --init random --output out/sweep`.
///
/// Exit status: 0 when every pass flag holds, 1 when one fails, 2 on a
/// usage, configuration or I/O error.
#[derive(Parser)]
#[command(name = "prbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run; writes its per-iteration trace.
    Run(Common),
    /// Iterations to tolerance over an n × m × method × seed grid.
    Sweep(Common),
    /// Log-error of a baseline against an accelerated method.
    Headtohead(Common),
    /// Head-to-head slopes across several n.
    Slopes(Common),
    /// Proximity to the leave-one-out sequences.
    Loo(Common),
    /// Convergence rates on a two-dimensional quadratic.
    Oracle(Common),
    /// Recovery from coded diffraction patterns.
    Cdp(Common),
    /// Gaussian concentration bounds of the sensing ensemble.
    Concentration(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` or `--key=value` overrides for any config key.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    overrides: Vec<String>,
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::Run(c) => (Experiment::Run, c),
            Command::Sweep(c) => (Experiment::Sweep, c),
            Command::Headtohead(c) => (Experiment::HeadToHead, c),
            Command::Slopes(c) => (Experiment::Slopes, c),
            Command::Loo(c) => (Experiment::Loo, c),
            Command::Oracle(c) => (Experiment::Oracle, c),
            Command::Cdp(c) => (Experiment::Cdp, c),
            Command::Concentration(c) => (Experiment::Concentration, c),
        }
    }
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, HarnessError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| HarnessError::Config(format!("expected --key, got '{arg}'")))?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| HarnessError::Config(format!("--{key} needs a value")))?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn build(experiment: Experiment, common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(experiment),
    };
    cfg.experiment = experiment;
    for (k, v) in parse_overrides(&common.overrides)? {
        if k.replace('-', "_") == "experiment" {
            return Err(HarnessError::Config(
                "the experiment is chosen by the subcommand".into(),
            ));
        }
        cfg.set(&k, &v)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let (experiment, common) = Cli::parse().command.split();
    let outcome = build(experiment, &common).and_then(|cfg| execute(&cfg));
    match outcome {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for path in &outcome.outputs {
                println!("wrote {}", path.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("prbench: at least one check failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("prbench: {e}");
            ExitCode::from(2)
        }
    }
}
