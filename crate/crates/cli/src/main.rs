//! `torlab`: configuration-driven experiments on torus homeomorphisms.

mod config;
mod output;
mod recipes;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use config::{config_error, load_config, ExperimentConfig};
use run::{execute, AnalysisFailure, Section};

#[derive(Parser, Debug)]
#[command(
    name = "torlab",
    version,
    about = "Experiments on torus homeomorphisms homotopic to the identity"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized sampling; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the map and write a summary of its Lipschitz and displacement data.
    Build,
    /// Write one orbit of lift points.
    Orbit,
    /// Write the deviation series of one orbit.
    Deviations,
    /// Estimate the rotation set from a sample grid.
    Rotset,
    /// Classify mean motion as bounded, growing or inconclusive.
    Classify,
    /// Search for a non-semi-conjugacy witness.
    Witness,
    /// Construct and verify Anosov-Katok stages.
    Ak {
        /// Last stage to construct.
        #[arg(long)]
        stages: Option<u32>,
    },
    /// Estimate epsilon_f, probe one point and optionally scan a grid.
    Stability,
    /// Run every analysis section present in the config.
    Run,
    /// Run a bundled recipe, or list them when NAME is omitted.
    Recipe {
        name: Option<String>,
        /// Rotation vector `x,y` for rigid and example maps.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        /// Last stage for recipes with an `ak` section.
        #[arg(long)]
        stages: Option<u32>,
    },
    /// Print the configuration schema.
    Schema,
}

fn section(c: &Command) -> Option<Section> {
    match c {
        Command::Build => Some(Section::Build),
        Command::Orbit => Some(Section::Orbit),
        Command::Deviations => Some(Section::Deviations),
        Command::Rotset => Some(Section::Rotset),
        Command::Classify => Some(Section::Classify),
        Command::Witness => Some(Section::Witness),
        Command::Ak { .. } => Some(Section::Ak),
        Command::Stability => Some(Section::Stability),
        Command::Run | Command::Recipe { .. } | Command::Schema => None,
    }
}

fn set_stages(cfg: &mut ExperimentConfig, stages: u32) {
    cfg.analysis.ak.get_or_insert_with(Default::default).stages = stages;
}

fn real_main(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let (mut cfg, base_dir, default_out): (ExperimentConfig, PathBuf, PathBuf) = match &cli.command
    {
        Command::Schema => {
            print!("{}", recipes::SCHEMA);
            return Ok(());
        }
        Command::Recipe { name: None, .. } => {
            for (name, about, _) in recipes::RECIPES {
                println!("{name:<22} {about}");
            }
            return Ok(());
        }
        Command::Recipe {
            name: Some(name),
            rho,
            stages,
        } => {
            let mut cfg = recipes::load(name)?;
            if let Some(r) = rho {
                let [x, y] = r[..] else {
                    return Err(config_error("--rho takes two comma-separated values"));
                };
                cfg.map.set_rho([x, y])?;
            }
            if let Some(s) = stages {
                if cfg.analysis.ak.is_none() {
                    return Err(config_error(format!("recipe {name} has no ak section")));
                }
                set_stages(&mut cfg, *s);
            }
            (
                cfg,
                PathBuf::from("."),
                PathBuf::from(format!("torlab-out/{name}")),
            )
        }
        _ => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| config_error("--config is required for this subcommand"))?;
            let mut cfg = load_config(path)?;
            if let Command::Ak { stages: Some(s) } = cli.command {
                set_stages(&mut cfg, s);
            }
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            (cfg, base, PathBuf::from("torlab-out"))
        }
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or(default_out);
    execute(&cfg, &base_dir, &out, cfg.seed, section(&cli.command))?;
    eprintln!("artifacts written to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<AnalysisFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
