//! Command-line front end over the fatpoint library: dimension counts,
//! reduction tables, the sampling oracle, scripted degenerations, window
//! scans, and the pinned verification suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fatpoint::cremona::DEFAULT_NEG_CLASS_BOUND;
use fatpoint::oracle::DEFAULT_PRIME;
use fatpoint_cli::commands::{
    cmd_degen, cmd_dim, cmd_oracle, cmd_reduce, cmd_scan, cmd_verify_paper,
};
use fatpoint_cli::grammar::parse_ratio;
use fatpoint_cli::verify::VerifyLevel;
use fatpoint_cli::{CliError, CmdOutput, OutputFormat, RunConfig};

#[derive(Parser)]
#[command(name = "fatpoint", version, about = "Exact tools for plane curve systems with assigned multiple base points", max_term_width = 100)]
struct Cli {
    /// Field characteristic used by the sampling oracle.
    #[arg(long, global = true, default_value_t = DEFAULT_PRIME)]
    prime: u32,

    /// Independent samples per rank computation.
    #[arg(long, global = true, default_value_t = 3)]
    trials: u32,

    /// Base seed for every randomized computation.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Degree bound for negative-class enumeration.
    #[arg(long, global = true, default_value_t = DEFAULT_NEG_CLASS_BOUND)]
    bound: i64,

    /// Output format.
    #[arg(long, global = true, default_value = "text", value_parser = ["text", "json"])]
    format: String,

    /// Worker threads for scans and the verification suite.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Allow rank computations beyond the interactive column budget.
    #[arg(long, global = true)]
    long: bool,

    /// Directory for content-addressed rank witnesses.
    #[arg(long, global = true, default_value = ".fatpoint-cache")]
    cache_dir: PathBuf,

    /// Skip the witness cache entirely.
    #[arg(long, global = true)]
    no_cache: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reports the dimension of a system via the reduction algorithm.
    Dim {
        /// System such as "174; 55^10" or "24; 11^4, [4,4]^2".
        system: String,
    },
    /// Prints the full reduction table of a system.
    Reduce {
        /// System such as "54; 36, 15^6".
        system: String,
    },
    /// Samples the dimension of a system over a finite field.
    Oracle {
        /// System such as "19; 6^10".
        system: String,
    },
    /// Builds one stage of the scripted degeneration and validates it.
    Degen {
        /// Degree of the matched system.
        d: i64,
        /// Common multiplicity of the ten base points.
        m: i64,
        /// Twist parameter.
        a: i64,
        /// Stage of the construction, 1 through 4.
        stage: u8,
    },
    /// Sweeps every slope window pair up to a multiplicity bound.
    Scan {
        /// Largest multiplicity to sweep.
        #[arg(long, default_value_t = 200)]
        m_max: i64,
        /// Lower slope bound as a ratio.
        #[arg(long, default_value = "174/55")]
        lo: String,
        /// Upper slope bound as a ratio.
        #[arg(long, default_value = "19/6")]
        hi: String,
    },
    /// Runs the pinned verification suite.
    VerifyPaper {
        /// Suite depth: "fast" or "full".
        #[arg(long, default_value = "fast")]
        level: String,
    },
}

fn run(cli: Cli) -> Result<CmdOutput, CliError> {
    let config = RunConfig {
        prime: cli.prime,
        trials: cli.trials,
        seed: cli.seed,
        degree_bound: cli.bound,
        cache_dir: (!cli.no_cache).then_some(cli.cache_dir),
        format: match cli.format.as_str() {
            "json" => OutputFormat::Json,
            _ => OutputFormat::Text,
        },
        jobs: cli.jobs,
        long: cli.long,
    }
    .validated()?;
    match cli.command {
        Command::Dim { system } => cmd_dim(&system, &config),
        Command::Reduce { system } => cmd_reduce(&system, &config),
        Command::Oracle { system } => cmd_oracle(&system, &config),
        Command::Degen { d, m, a, stage } => cmd_degen(d, m, a, stage, &config),
        Command::Scan { m_max, lo, hi } => {
            let lo = parse_ratio(&lo)?;
            let hi = parse_ratio(&hi)?;
            cmd_scan(m_max, lo, hi, &config)
        }
        Command::VerifyPaper { level } => {
            let level = match level.as_str() {
                "fast" => VerifyLevel::Fast,
                "full" => VerifyLevel::Full,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown level {other:?}; use \"fast\" or \"full\""
                    )))
                }
            };
            cmd_verify_paper(level, &config)
        }
    }
}

/// Prints the report, treating a closed pipe as a normal early exit.
fn emit(text: &str) -> std::io::Result<()> {
    use std::io::{ErrorKind, Write};
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match writeln!(lock, "{text}").and_then(|_| lock.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(output) => {
            if let Err(e) = emit(&output.text) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            if output.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
