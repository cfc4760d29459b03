use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use commands::{BranchArg, Output, Selector};
use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] tunable_carnot::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// Core errors raised while building inputs from the config.
    fn config(e: tunable_carnot::Error) -> Self {
        match e {
            tunable_carnot::Error::Domain(_)
            | tunable_carnot::Error::NotAnEngine { .. }
            | tunable_carnot::Error::InvalidState(_) => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other),
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Io(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tunable-carnot",
    version,
    about = "Efficiency at maximum power of a spin Carnot engine between tunable baths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Engine settings; flags override values read from `--config`.
#[derive(Args, Debug, Clone)]
struct EngineArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    t_hot: Option<f64>,
    #[arg(long)]
    t_cold_min: Option<f64>,
    #[arg(long)]
    t_cold_max: Option<f64>,
    #[arg(long)]
    t_cold_steps: Option<usize>,
    #[arg(long)]
    r_hot: Option<f64>,
    #[arg(long)]
    r_cold: Option<f64>,
    #[arg(long)]
    delta_a: Option<f64>,
    #[arg(long)]
    delta_b: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Write the result here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl EngineArgs {
    fn resolve(&self) -> Result<Config, CliError> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let overrides = [
            ("t_hot", self.t_hot),
            ("t_cold_min", self.t_cold_min),
            ("t_cold_max", self.t_cold_max),
            ("r_hot", self.r_hot),
            ("r_cold", self.r_cold),
            ("delta_a", self.delta_a),
            ("delta_b", self.delta_b),
            ("gamma", self.gamma),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v.to_string())?;
            }
        }
        if let Some(n) = self.t_cold_steps {
            cfg.t_cold_steps = n;
        }
        if let Some(p) = &self.output {
            cfg.output = Some(p.clone());
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bounds on the efficiency at maximum power against the Carnot limit.
    Bounds {
        #[command(flatten)]
        engine: EngineArgs,
        /// Ratios r_cold / r_hot, one curve each.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.75, 1.0])]
        ratios: Vec<f64>,
        /// Points of the Carnot-efficiency grid on [0, 1).
        #[arg(long, default_value_t = 100)]
        eta_points: usize,
    },
    /// Maximize power at one cold-bath temperature (JSON).
    Optimize {
        #[command(flatten)]
        engine: EngineArgs,
        /// Cold-bath temperature; defaults to t_cold_min.
        #[arg(long)]
        t_cold: Option<f64>,
    },
    /// Maximize power across the cold-temperature range (CSV).
    Sweep {
        #[command(flatten)]
        engine: EngineArgs,
        /// Worker threads.
        #[arg(long, short, default_value_t = 1)]
        jobs: usize,
    },
    /// Export an optimal stroke protocol (CSV).
    Protocol {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        t_cold: Option<f64>,
        #[arg(long, value_enum, default_value = "hot")]
        branch: BranchArg,
        /// Euler-Lagrange constant; the maximum-power value by default.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "duration")]
        k: Option<f64>,
        /// Stroke duration to solve for instead of a constant.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value_t = tunable_carnot::optimal_protocol::DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Cross-check the optimum by direct integration and audits (JSON).
    Verify {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        t_cold: Option<f64>,
    },
}

fn run(command: Command) -> Result<(Config, Output), CliError> {
    match command {
        Command::Bounds {
            engine,
            ratios,
            eta_points,
        } => {
            let cfg = engine.resolve()?;
            let out = commands::bounds(&cfg, &ratios, eta_points)?;
            Ok((cfg, out))
        }
        Command::Optimize { engine, t_cold } => {
            let cfg = engine.resolve()?;
            let out = commands::optimize(&cfg, t_cold.unwrap_or(cfg.t_cold_min))?;
            Ok((cfg, out))
        }
        Command::Sweep { engine, jobs } => {
            let cfg = engine.resolve()?;
            let out = commands::sweep(&cfg, jobs)?;
            Ok((cfg, out))
        }
        Command::Protocol {
            engine,
            t_cold,
            branch,
            k,
            duration,
            samples,
        } => {
            let cfg = engine.resolve()?;
            let selector = match (k, duration) {
                (Some(k), _) => Selector::K(k),
                (None, Some(t)) => Selector::Duration(t),
                (None, None) => Selector::Optimal,
            };
            let out = commands::protocol(
                &cfg,
                t_cold.unwrap_or(cfg.t_cold_min),
                branch,
                selector,
                samples,
            )?;
            Ok((cfg, out))
        }
        Command::Verify { engine, t_cold } => {
            let cfg = engine.resolve()?;
            let out = commands::verify(&cfg, t_cold.unwrap_or(cfg.t_cold_min))?;
            Ok((cfg, out))
        }
    }
}

fn emit(cfg: &Config, text: &str) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli.command).and_then(|(cfg, out)| {
        emit(&cfg, &out.text)?;
        Ok(out.ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
