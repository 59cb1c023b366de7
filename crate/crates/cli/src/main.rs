use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use selfik_cli::commands::{
    cmd_adapt, cmd_bench, cmd_eval, cmd_gen_data, cmd_train, AdaptArg, BenchMode, Method,
};
use selfik_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "selfik",
    version,
    about = "Inverse kinematics learning by coordinated sampling and training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config: a JSON file path or a built-in preset
    /// ("desk", "paper"). Defaults to "desk".
    #[arg(long)]
    config: Option<String>,

    /// Directory for inputs and outputs of this run.
    #[arg(long, default_value = "runs/desk")]
    out: PathBuf,

    /// Master seed override; replaces every seed in the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Suppress progress output; stdout carries only the result JSON.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a motor-babbling dataset and write the train/test CSVs.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train an inverse model and write checkpoint, curve, and metrics.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Method::Emssl)]
        method: Method,
    },
    /// Evaluate a checkpoint on the test goals.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Time the sampling acceleration strategies.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = BenchMode::Strategies)]
        mode: BenchMode,
    },
    /// Adapt a trained model to an arm whose link lengths changed.
    Adapt {
        #[command(flatten)]
        common: Common,
        /// Uniform length change applied to every link, cm.
        #[arg(long = "delta-cm")]
        delta_cm: f64,
        #[arg(long, value_enum, default_value_t = AdaptArg::Refit)]
        mode: AdaptArg,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), selfik_cli::CliError> {
    let common = match &cli.command {
        Command::GenData { common }
        | Command::Train { common, .. }
        | Command::Eval { common }
        | Command::Bench { common, .. }
        | Command::Adapt { common, .. } => common,
    };
    let mut cfg = ExperimentConfig::resolve(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.reseed(seed);
    }
    let out = common.out.clone();
    let quiet = common.quiet;
    match cli.command {
        Command::GenData { .. } => cmd_gen_data(&cfg, &out, quiet),
        Command::Train { method, .. } => cmd_train(&cfg, &out, method, quiet),
        Command::Eval { .. } => cmd_eval(&cfg, &out, quiet),
        Command::Bench { mode, .. } => cmd_bench(&cfg, &out, mode, quiet),
        Command::Adapt { delta_cm, mode, .. } => cmd_adapt(&cfg, &out, delta_cm, mode, quiet),
    }
}
