//! `userprior`: command-line front end for the timeline-profile hate speech
//! classifier.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "userprior", version, about = "Hate speech classification with user timeline profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (tweets.jsonl and timelines.jsonl).
    Synth {
        /// JSON generator settings; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export the tweets-per-user distribution as rank/count TSV.
    Dist {
        #[arg(long)]
        input: PathBuf,
        /// Count only tweets of the hate class.
        #[arg(long, requires = "hate_class")]
        hate_only: bool,
        #[arg(long)]
        hate_class: Option<String>,
        /// Builtin label scheme; inferred from the file when omitted.
        #[arg(long)]
        scheme: Option<String>,
        /// Write here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Merge a donor dataset's hate tweets into a base dataset.
    Fuse(FuseArgs),
    /// Train both phases on the whole dataset and save the models.
    Train(RunArgs),
    /// Cross-validate and write metric, bin and prediction reports.
    Eval(RunArgs),
    /// Recompute the timeline-length bin report from a predictions file.
    Bins {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "fused-binary")]
        scheme: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    base_scheme: String,
    #[arg(long)]
    base_timelines: Option<PathBuf>,
    #[arg(long)]
    donor: PathBuf,
    #[arg(long)]
    donor_scheme: String,
    #[arg(long)]
    donor_timelines: Option<PathBuf>,
    #[arg(long)]
    hate_class: String,
    #[arg(long, default_value_t = userprior::corpus::DEFAULT_FUSE_CAP)]
    cap: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth {
            config,
            out_dir,
            seed,
        } => commands::synth(config.as_deref(), &out_dir, seed),
        Command::Dist {
            input,
            hate_only,
            hate_class,
            scheme,
            output,
        } => commands::dist(
            &input,
            hate_class.as_deref().filter(|_| hate_only),
            scheme.as_deref(),
            output.as_deref(),
        ),
        Command::Fuse(a) => commands::fuse(&commands::FuseInputs {
            base: &a.base,
            base_scheme: &a.base_scheme,
            base_timelines: a.base_timelines.as_deref(),
            donor: &a.donor,
            donor_scheme: &a.donor_scheme,
            donor_timelines: a.donor_timelines.as_deref(),
            hate_class: &a.hate_class,
            cap: a.cap,
            out_dir: &a.out_dir,
        }),
        Command::Train(a) => commands::run_config(&a.config, a.seed, a.out_dir)
            .and_then(|cfg| commands::train(&cfg)),
        Command::Eval(a) => commands::run_config(&a.config, a.seed, a.out_dir)
            .and_then(|cfg| commands::eval(&cfg)),
        Command::Bins {
            predictions,
            scheme,
            output,
        } => commands::bins(&predictions, &scheme, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("userprior: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime(err)) => {
            eprintln!("userprior: {err}");
            ExitCode::from(1)
        }
    }
}
