//! `cirsense`: simulate multistatic sweep campaigns, train detectors and
//! position estimators, and emit evaluation reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use cirsense_core::eval::{LinkCombo, ModelKind};
use cirsense_core::nn::Task;
use commands::{cmd_eval, cmd_reproduce, cmd_simulate, cmd_train, CliError};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "cirsense",
    version,
    about = "Synthetic multistatic sensing: sweep simulation, CIR features, learned detection and positioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the CIRSENSE_OUT env var and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Model roster override, e.g. typea,typec,baseline.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// Link combination override, e.g. N2,N234.
    #[arg(long, value_delimiter = ',')]
    combos: Vec<String>,
    /// Receiver ids to keep (e.g. 2,3); other receivers and combos are
    /// dropped from the run.
    #[arg(long, value_delimiter = ',')]
    links: Vec<u8>,
    /// Task override: detect,position.
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic campaign and write dataset.cird.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model on a dataset and write its checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset file from `simulate`.
        #[arg(long)]
        data: PathBuf,
        /// typea | typeb | typec.
        #[arg(long)]
        model: String,
        /// detect | position.
        #[arg(long)]
        task: String,
        /// Link combination, e.g. N234.
        #[arg(long)]
        combo: String,
    },
    /// Evaluate models over link combinations and write reports.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Dataset file from `simulate`.
        #[arg(long)]
        data: PathBuf,
        /// Saved checkpoint to score instead of training in place; repeatable.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
    },
    /// Full protocol: simulate, train every suite cell, emit reports.
    Reproduce {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| CliError::Config(vec![e]))?,
        None => RunConfig::default(),
    };
    if let Ok(dir) = std::env::var("CIRSENSE_OUT") {
        if !dir.is_empty() {
            cfg.out_dir = PathBuf::from(dir);
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if !common.models.is_empty() {
        cfg.models = common.models.clone();
    }
    if !common.combos.is_empty() {
        cfg.combos = common.combos.clone();
    }
    if !common.tasks.is_empty() {
        cfg.tasks = common.tasks.clone();
    }
    if !common.links.is_empty() {
        let keep = &common.links;
        let rx = std::mem::take(&mut cfg.scene.rx_positions);
        cfg.scene.rx_positions = rx
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep.contains(&(*i as u8 + 2)))
            .map(|(_, p)| p)
            .collect();
        cfg.combos.retain(|name| match LinkCombo::parse(name) {
            Ok(c) => c.receiver_ids.iter().all(|id| keep.contains(id)),
            Err(_) => true, // let validation report the bad name
        });
    }
    Ok(cfg)
}

fn parse_combo(s: &str) -> Result<LinkCombo, CliError> {
    LinkCombo::parse(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load_config(&common)?;
            let v = cfg.validate().map_err(CliError::Config)?;
            cmd_simulate(&v)?;
        }
        Command::Train {
            common,
            data,
            model,
            task,
            combo,
        } => {
            let cfg = load_config(&common)?;
            let v = cfg.validate().map_err(CliError::Config)?;
            let model = ModelKind::parse(&model)
                .ok_or_else(|| CliError::Usage(format!("unknown model {model:?}")))?;
            let task = match task.to_ascii_lowercase().as_str() {
                "detect" => Task::Detect,
                "position" => Task::Position,
                other => return Err(CliError::Usage(format!("unknown task {other:?}"))),
            };
            let combo = parse_combo(&combo)?;
            cmd_train(&v, &data, model, task, &combo)?;
        }
        Command::Eval {
            common,
            data,
            checkpoints,
        } => {
            let cfg = load_config(&common)?;
            let v = cfg.validate().map_err(CliError::Config)?;
            cmd_eval(&v, &data, &checkpoints)?;
        }
        Command::Reproduce { common } => {
            let cfg = load_config(&common)?;
            let v = cfg.validate().map_err(CliError::Config)?;
            cmd_reproduce(&v)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprintln!("error: usage: {}", e.to_string().lines().next().unwrap_or(""));
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
