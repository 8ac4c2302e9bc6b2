use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use udrl_lab::domains::{domain_by_name, DOMAIN_NAMES};
use udrl_lab::experiments::{
    cmd_reproduce, run_bounds, run_checks, run_iterate, write_outputs, ExperimentConfig,
    Metadata, EXACT_TOL, PRESETS,
};
use udrl_lab::LabError;

#[derive(Parser)]
#[command(name = "udrl-lab", version, about = "Exact analysis of upside-down RL recursions")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Overrides the seed of the configuration or preset.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance for exact reference values.
    #[arg(long, global = true, default_value_t = EXACT_TOL)]
    tolerance: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the recursion over a configured sweep and write a trace CSV.
    Iterate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate bound pipelines over a configured sweep.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Regenerate figure and report data; all presets when none are named.
    Reproduce {
        presets: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check reference values and, optionally, a configuration file.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Inspect built-in domains.
    Domains {
        #[command(subcommand)]
        action: DomainsAction,
    },
}

#[derive(Subcommand)]
enum DomainsAction {
    List,
    /// Print the command extension of a domain as JSON.
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::from_json(&fs::read_to_string(path)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn sweep(
    cli: &Cli,
    config: &Path,
    out: &Path,
    stem: &str,
    run: fn(&ExperimentConfig, usize) -> udrl_lab::Result<udrl_lab::experiments::Table>,
) -> Result<(), LabError> {
    let started = Instant::now();
    let cfg = load_config(config, cli.seed)?;
    let table = run(&cfg, cli.jobs)?;
    let meta = Metadata::new(cfg.hash(), cfg.seed);
    let path = write_outputs(out, stem, &table, &meta, &cfg, started.elapsed().as_secs_f64())?;
    println!("wrote {} ({} rows)", path.display(), table.rows.len());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, LabError> {
    match &cli.command {
        Command::Iterate { config, out } => sweep(cli, config, out, "iterate", run_iterate)?,
        Command::Bounds { config, out } => sweep(cli, config, out, "bounds", run_bounds)?,
        Command::Reproduce { presets, out } => {
            let names: Vec<String> = if presets.is_empty() {
                PRESETS.iter().map(|s| s.to_string()).collect()
            } else {
                presets.clone()
            };
            for path in cmd_reproduce(out, &names, cli.seed.unwrap_or(0), cli.jobs, cli.tolerance)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Validate { config } => {
            if let Some(path) = config {
                load_config(path, cli.seed)?;
                println!("config {} is valid", path.display());
            }
            let checks = run_checks(&DOMAIN_NAMES, cli.tolerance)?;
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {} {}: error {:.3e} (tolerance {:.1e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.domain,
                    c.quantity,
                    c.error,
                    c.tolerance
                );
                ok &= c.pass;
            }
            return Ok(ok);
        }
        Command::Domains { action } => match action {
            DomainsAction::List => {
                for name in DOMAIN_NAMES {
                    let d = domain_by_name(name)?;
                    println!(
                        "{name}\tS={} A={} N={} G={}",
                        d.ce.num_states(),
                        d.ce.num_actions(),
                        d.ce.horizon(),
                        d.ce.num_goals()
                    );
                }
            }
            DomainsAction::Export { name, out } => {
                let json = domain_by_name(name)?.ce.to_json()?;
                match out {
                    Some(path) => fs::write(path, json)?,
                    None => println!("{json}"),
                }
            }
        },
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                LabError::UnknownDomain(_) | LabError::UnknownPreset(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
