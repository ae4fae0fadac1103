mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Asymptotic analysis, state complexity and automata compilation for
/// neural sequence acceptors.
#[derive(Debug, Parser)]
#[command(name = "na", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Build exact weights for an automaton, grammar or fixed construction.
    Compile(CompileArgs),
    /// Evaluate a checkpoint in the large-weight limit.
    Asym {
        #[command(subcommand)]
        cmd: AsymCmd,
    },
    /// Enumerate configuration sets and classify their growth.
    Statecomp(StatecompArgs),
    /// Train on the counting or reversal task.
    Train {
        #[command(subcommand)]
        cmd: TrainCmd,
    },
    /// Run the acceptance criteria and print a pass/fail matrix.
    Verify(VerifyArgs),
    /// Collect training runs into result tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompileKind {
    Dfa2srn,
    Dfa2gru,
    Sl2cnn,
    Counter,
    AttnIdentity,
    AttnCounting,
    AttnRetrieval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Theta {
    Plus,
    Id,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    pub kind: CompileKind,
    /// DFA or SL grammar file.
    #[arg(long = "in", value_name = "FILE", conflicts_with = "fixture")]
    pub input: Option<PathBuf>,
    /// Bundled DFA or grammar: parity, one-b, contains-ab, no-aa, no-bab.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Checkpoint to write; the manifest goes next to it.
    #[arg(long, value_name = "CHECKPOINT")]
    pub out: PathBuf,
    /// Check the network against its automaton on every string up to this length.
    #[arg(long, value_name = "INT")]
    pub verify_len: Option<usize>,
    /// Counter cell parameters.
    #[arg(long, value_enum, default_value = "plus")]
    pub theta: Theta,
    /// Alphabet of the identity and retrieval encoders.
    #[arg(long, default_value = "01")]
    pub alphabet: String,
}

#[derive(Debug, Subcommand)]
pub enum AsymCmd {
    /// Print accept, reject or unstable; exit 0, 1 or 2 respectively.
    Accept {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "STRING")]
        input: String,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Smallest power-of-two scale realizing the limit decisions on all strings shorter than `m`.
    Scale {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct StatecompArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// h, c, V or summary.
    #[arg(long, default_value = "h")]
    pub selector: String,
    #[arg(long, default_value_t = 1)]
    pub n_min: usize,
    #[arg(long)]
    pub n_max: usize,
    /// Maximum number of inputs enumerated per length.
    #[arg(long, default_value_t = neural_automata::statecomp::DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CommonTrain {
    /// Seed; defaults to NA_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key = value` overrides applied before the flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Use the original experiment's lengths instead of the desk-scale ones.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum TrainCmd {
    /// Next-symbol language model on a^n b^n c.
    Counting {
        #[arg(long, default_value = "lstm")]
        arch: String,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[command(flatten)]
        common: CommonTrain,
    },
    /// LSTM encoder-decoder on binary string reversal.
    Reversal {
        #[arg(long, default_value = "lstm")]
        arch: String,
        #[arg(long)]
        attention: bool,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: CommonTrain,
    },
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only the exact and enumerative criteria.
    #[arg(long)]
    pub skip_training: bool,
    /// Comma-separated criterion numbers.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directories of `na train` runs.
    #[arg(long, num_args = 1.., required = true, value_name = "DIR")]
    pub runs: Vec<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("run `na --help` for usage");
            ExitCode::from(2)
        }
    }
}
