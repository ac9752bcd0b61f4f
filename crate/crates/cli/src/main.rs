use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rpl_cli::commands::{self, IngestArgs, Planner};
use rpl_cli::RunConfig;
use rpl_core::episode::Mode;

#[derive(Parser)]
#[command(name = "rpl", version, about = "Train and evaluate companion-following navigation policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set seed=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for pair in &self.overrides {
            cfg.set_pair(pair, Path::new("."))?;
        }
        cfg.resolve_seed();
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct PlannerArgs {
    /// Policy checkpoint to evaluate.
    #[arg(long, conflicts_with = "baseline")]
    checkpoint: Option<PathBuf>,
    /// Evaluate a built-in baseline instead of a checkpoint.
    #[arg(long)]
    baseline: Option<Baseline>,
}

impl PlannerArgs {
    fn planner(&self) -> Result<Planner> {
        match (&self.checkpoint, self.baseline) {
            (Some(p), None) => Ok(Planner::Policy(p.clone())),
            (None, Some(Baseline::Rvo)) => Ok(Planner::Rvo),
            _ => bail!("give exactly one of --checkpoint or --baseline"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Rvo,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModeArg {
    Scn,
    Nonscn,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Scn => vec![Mode::Scn],
            ModeArg::Nonscn => vec![Mode::NonScn],
            ModeArg::Both => vec![Mode::Scn, Mode::NonScn],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a trajectory file against its map and write a scene manifest.
    Ingest {
        #[arg(long)]
        trajectories: PathBuf,
        /// PGM occupancy map.
        #[arg(long)]
        map: PathBuf,
        /// Map sidecar with resolution and origin; defaults to the map path with `.meta`.
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Scene name; defaults to the trajectory file stem.
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train until the configured iteration count, checkpointing into OUT.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Continue the run stored in OUT.
        #[arg(long)]
        resume: bool,
        /// Shorthand for `--set iterations=N`.
        #[arg(long)]
        iters: Option<u64>,
    },
    /// Terminal-rate report for a checkpoint or the RVO baseline.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        planner: PlannerArgs,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Defaults to `eval_trials`.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Export per-step rollouts for plotting.
    Rollout {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        planner: PlannerArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        /// Force a mode; by default it is drawn with `scn_probability`.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Average minimum pedestrian and maximum companion distances.
    Metrics {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Print a checkpoint's iteration, σ schedule and tensor shapes.
    InspectCheckpoint { path: PathBuf },
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Ingest {
            trajectories,
            map,
            meta,
            out,
            name,
            config,
        } => {
            let cfg = config.load()?;
            let meta = meta.unwrap_or_else(|| map.with_extension("meta"));
            let name = match name {
                Some(n) => n,
                None => trajectories
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "scene".into()),
            };
            commands::ingest(&IngestArgs {
                name: &name,
                trajectories: &trajectories,
                map: &map,
                map_meta: &meta,
                out: &out,
                wanderer_threshold: cfg.wanderer_threshold,
            })
        }
        Command::Train {
            config,
            out,
            resume,
            iters,
        } => {
            let mut cfg = config.load()?;
            if let Some(n) = iters {
                cfg.iterations = n;
            }
            commands::train(&cfg, &out, resume)
        }
        Command::Eval {
            config,
            planner,
            mode,
            trials,
        } => {
            let cfg = config.load()?;
            let trials = trials.unwrap_or(cfg.eval_trials);
            commands::eval(&cfg, &planner.planner()?, &mode.modes(), trials)
        }
        Command::Rollout {
            config,
            planner,
            out,
            episodes,
            mode,
        } => {
            let cfg = config.load()?;
            let mode = match mode {
                None => None,
                Some(ModeArg::Scn) => Some(Mode::Scn),
                Some(ModeArg::Nonscn) => Some(Mode::NonScn),
                Some(ModeArg::Both) => bail!("rollout takes --mode scn or nonscn"),
            };
            commands::rollout(&cfg, &planner.planner()?, mode, episodes, &out)
        }
        Command::Metrics { files } => commands::metrics(&files),
        Command::InspectCheckpoint { path } => commands::inspect_checkpoint(&path),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
