//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid configuration,
//! 3 data error, 4 training failure, 5 evaluation failure or model mismatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::experiment::{cmd_eval, cmd_simulate, cmd_train, cmd_validate, ExperimentError};

#[derive(Debug, Parser)]
#[command(name = "dvl-beams", version, about = "Missing DVL beam regression experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Global seed; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override any config key, e.g. `--set libeamsnet.train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a config and list every violation.
    Validate(Common),
    /// Train the configured networks; writes checkpoints and loss CSVs.
    Train(Common),
    /// Score all strategies on the test sections; writes the report.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint files; defaults to `<out>/checkpoints/<estimator>.ckpt`.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        /// Add an upper-bound column that uses the true missing beams.
        #[arg(long)]
        oracle: bool,
    },
    /// Write the configured sections as CSV files under `<out>/data/`.
    Simulate(Common),
}

impl Common {
    /// Loads the config with flag overrides applied (flags win over `--set`).
    pub fn resolve(&self) -> Result<ExperimentConfig, ExperimentError> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.out {
            overrides.push(format!("output_dir={}", toml::Value::String(out.display().to_string())));
        }
        Ok(ExperimentConfig::load(self.config.as_deref(), &overrides)?)
    }
}

fn run_command(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Validate(common) => {
            let cfg = common.resolve()?;
            let issues = cmd_validate(&cfg);
            if issues.is_empty() {
                println!("config is valid");
                Ok(())
            } else {
                Err(crate::config::ConfigError::Invalid(issues).into())
            }
        }
        Command::Train(common) => {
            let cfg = common.resolve()?;
            for t in cmd_train(&cfg)? {
                let last = t.history.last().expect("at least one epoch");
                println!(
                    "{}: {} epochs, final train loss {:.6e}, test loss {:.6e} -> {}",
                    t.model.tag(),
                    t.history.len(),
                    last.train_loss,
                    last.test_loss,
                    t.checkpoint.display()
                );
            }
            Ok(())
        }
        Command::Eval {
            common,
            checkpoints,
            oracle,
        } => {
            let cfg = common.resolve()?;
            let eval = cmd_eval(&cfg, &checkpoints, oracle)?;
            print!("{}", eval.pooled.to_table());
            println!("report written to {}", crate::experiment::report_dir(&cfg.output_dir).display());
            Ok(())
        }
        Command::Simulate(common) => {
            let cfg = common.resolve()?;
            for path in cmd_simulate(&cfg)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
