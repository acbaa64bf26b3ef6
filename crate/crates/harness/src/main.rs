use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use distbeam_harness::checks;
use distbeam_harness::config::ExperimentConfig;
use distbeam_harness::error::HarnessError;
use distbeam_harness::experiment::run_experiment;
use distbeam_harness::presets;

/// Feedback-controlled distributed beamforming: simulator and analysis
/// harness.
#[derive(Parser)]
#[command(name = "distbeam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's horizon.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Run a named preset (fig2, fig3, fig5, ..., fig10).
    Preset {
        name: String,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Print the preset's expanded configs as TOML instead of running.
        #[arg(long)]
        dump_config: bool,
    },
    /// Run acceptance checks ("all" or a check name).
    Check { name: String },
    /// List available presets and checks.
    List,
}

fn apply_overrides(cfg: &mut ExperimentConfig, seed: Option<u64>, horizon: Option<usize>) {
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(h) = horizon {
        cfg.horizon = h;
    }
}

fn execute(command: Command) -> Result<bool, HarnessError> {
    match command {
        Command::Run {
            config,
            out_dir,
            seed,
            horizon,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                HarnessError::Config(format!("cannot read {}: {e}", config.display()))
            })?;
            let mut cfg = ExperimentConfig::from_toml_str(&text)?;
            apply_overrides(&mut cfg, seed, horizon);
            let exp = cfg.validate()?;
            let outcome = run_experiment(&exp, &out_dir)?;
            for file in outcome.files {
                println!("wrote {}", file.display());
            }
            Ok(true)
        }
        Command::Preset {
            name,
            out_dir,
            seed,
            horizon,
            dump_config,
        } => {
            let mut configs = presets::expand(&name)?;
            for cfg in &mut configs {
                apply_overrides(cfg, seed, horizon);
            }
            if dump_config {
                for cfg in &configs {
                    println!("{}", cfg.to_toml_string()?);
                }
                return Ok(true);
            }
            for cfg in &configs {
                let exp = cfg.validate()?;
                let outcome = run_experiment(&exp, &out_dir)?;
                for file in outcome.files {
                    println!("wrote {}", file.display());
                }
            }
            Ok(true)
        }
        Command::Check { name } => {
            let reports = checks::run_checks(&name)?;
            let mut all_passed = true;
            for report in &reports {
                println!("{}", report.status_line());
                all_passed &= report.passed;
            }
            Ok(all_passed)
        }
        Command::List => {
            println!("presets: {}", presets::PRESET_NAMES.join(", "));
            println!("checks:  all, {}", checks::CHECK_NAMES.join(", "));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                HarnessError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
