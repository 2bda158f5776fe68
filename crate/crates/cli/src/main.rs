//! `ggratio`: key generation, signing, the ratio attack, and the statistical
//! and revised-variant experiments from the command line.
//!
//! Exit codes: 0 ok, 1 a check or verification failed, 2 input error,
//! 3 infeasible parameters, 4 numeric failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ggratio", version, about = "G+G signatures and the ratio attack")]
pub struct Cli {
    /// TOML file of parameter sets; its sets override built-ins of the same name.
    #[arg(long, global = true, value_name = "PATH")]
    pub params_file: Option<PathBuf>,

    /// Master seed. Defaults to the parameter set's seed.
    #[arg(long, global = true, env = "GGRATIO_SEED")]
    pub seed: Option<u64>,

    /// Worker threads. Defaults to the parameter set's worker count.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Inspect the parameter sets.
    Params {
        #[command(subcommand)]
        action: ParamsAction,
    },
    /// Generate a key pair.
    Keygen {
        set: String,
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        sk: PathBuf,
    },
    /// Sign a message.
    Sign {
        set: String,
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        sk: PathBuf,
        #[command(flatten)]
        message: Message,
        #[arg(long)]
        out: PathBuf,
        /// Sample y with covariance sigma^2 I when Sigma is not positive definite.
        #[arg(long)]
        diag_fallback: bool,
    },
    /// Verify a signature; prints `valid` or `invalid(reason)`.
    Verify {
        set: String,
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        sig: PathBuf,
        #[command(flatten)]
        message: Message,
    },
    /// Print the attack plan.
    Plan {
        set: String,
        #[arg(long)]
        omega: Option<f64>,
        /// Write the attack summary row as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the ratio attack against a freshly generated or supplied key.
    Attack(AttackArgs),
    /// Monte-Carlo checks of the attack's statistics.
    Stats(StatsArgs),
    /// Experiments on the module variant.
    Revised(RevisedArgs),
}

#[derive(Subcommand, Debug)]
pub enum ParamsAction {
    List,
    Show { set: String },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct Message {
    #[arg(long)]
    pub message: Option<String>,
    #[arg(long)]
    pub message_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    pub set: String,
    /// Fixed number of signatures.
    #[arg(long, value_parser = parse_count, conflicts_with = "auto_plan")]
    pub signatures: Option<u64>,
    /// Run at least the planned count, then stop once every cell is decided.
    #[arg(long)]
    pub auto_plan: bool,
    /// Hard limit for --auto-plan.
    #[arg(long, value_parser = parse_count, default_value = "2e8")]
    pub cap: u64,
    /// Score the recovered key against the true one.
    #[arg(long)]
    pub known_key: bool,
    /// Attack this key pair instead of a fresh one.
    #[arg(long, requires = "sk")]
    pub pk: Option<PathBuf>,
    #[arg(long, requires = "pk")]
    pub sk: Option<PathBuf>,
    /// Full signing with hashed challenges instead of uniform ones.
    #[arg(long)]
    pub hashed: bool,
    /// Keep ratios beyond the truncation threshold.
    #[arg(long)]
    pub no_clamp: bool,
    #[arg(long)]
    pub diag_fallback: bool,
    /// Snapshot the accumulator here every 10^6 signatures.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Continue from the snapshot at --checkpoint.
    #[arg(long, requires = "checkpoint")]
    pub resume: bool,
    /// Write the AttackReport as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the attack summary row as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Check {
    WMoments,
    ZVariances,
    RatioMean,
    RatioCauchy,
    Clt,
    RevisedZeroMean,
    All,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    pub check: Check,
    /// Parameter set; ratio-cauchy and clt ignore it, w-moments defaults to table2-col1.
    pub set: Option<String>,
    /// Samples or signatures, overriding each check's default.
    #[arg(long, value_parser = parse_count)]
    pub samples: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_y: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_z: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 50.0)]
    pub half_width: f64,
    #[arg(long, value_parser = parse_count, default_value = "1e4")]
    pub n_bar: u64,
    /// Sample means drawn by the clt check.
    #[arg(long, value_parser = parse_count, default_value = "1000")]
    pub repeats: u64,
    /// Write the reports as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    PdRate,
    NormBound,
    Invalidity,
    Forge,
    ZeroMean,
}

#[derive(Args, Debug)]
pub struct RevisedArgs {
    pub experiment: Experiment,
    pub set: String,
    #[arg(long, value_parser = parse_count)]
    pub trials: Option<u64>,
    /// Signing in the invalidity experiment falls back to sigma^2 I.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub diag_fallback: bool,
    /// Write the module-variant summary row as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Accepts `1000000`, `1e6`, `2.5e7`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("{s:?} is not a non-negative whole number")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(ggratio_core::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
