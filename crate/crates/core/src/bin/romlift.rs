use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use romlift::harness::{
    emit_outputs, fit_rate, preset, preset_names, preset_text, read_convergence_columns,
    run_experiment_with, verify_suite, ExperimentConfig,
};
use romlift::Error;

#[derive(Parser)]
#[command(name = "romlift", version, about = "Internal wave fields from boundary data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study from a config file (or a preset name).
    Run {
        config: String,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the invariants on a preset (or a config file).
    Verify { preset: String },
    /// Fit the log-log slope of one error column of a convergence CSV.
    Rate {
        csv: PathBuf,
        #[arg(long, default_value = "lift_error")]
        column: String,
    },
    /// Print a preset's config.
    DumpConfig { preset: String },
}

fn load(arg: &str) -> Result<ExperimentConfig, Error> {
    let path = Path::new(arg);
    if path.exists() {
        ExperimentConfig::load(path)
    } else if preset_text(arg).is_some() {
        preset(arg)
    } else if arg.ends_with(".toml") {
        ExperimentConfig::load(path)
    } else {
        preset(arg)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, output } => {
            let cfg = load(&config)?;
            let dir = output.unwrap_or_else(|| cfg.output_dir.clone());
            println!("{:>5} {:>12} {:>12} {:>12} {:>12} {:>10}", "n", "tau", "lift", "best", "lift-proj", "kappa");
            let result = run_experiment_with(&cfg, |r| {
                let row = r.row();
                println!(
                    "{:>5} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>10.3e}",
                    row.n, row.tau, row.lift_error, row.best_error, row.lift_vs_projection, row.kappa
                );
            })?;
            for (label, fit) in [("lift", &result.record.lift_rate), ("best", &result.record.best_rate)] {
                match fit {
                    Some(f) => println!("{label} slope {:.4}", f.slope),
                    None => println!("{label} slope not fitted (errors at the floor or too few rows)"),
                }
            }
            emit_outputs(&result, &dir)?;
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { preset } => {
            let cfg = load(&preset)?;
            let report = verify_suite(&cfg);
            print!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Rate { csv, column } => {
            let (taus, errors) = read_convergence_columns(&csv, &column)?;
            let fit = fit_rate(&taus, &errors)?;
            println!("slope {:.12e}", fit.slope);
            println!("intercept {:.12e}", fit.intercept);
            let ratios: Vec<String> = fit.ratios.iter().map(|r| format!("{r:.6e}")).collect();
            println!("ratios {}", ratios.join(","));
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpConfig { preset: name } => {
            let text = preset_text(&name).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown preset {name:?}; available: {}",
                    preset_names().collect::<Vec<_>>().join(", ")
                ))
            })?;
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap's default of 2 would collide with the numerical failure code.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
