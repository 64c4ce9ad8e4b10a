//! `openshop`: decision tool for open shop processing systems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use openshop::cli::{self, CliError, Verdict};
use openshop::exact_search::SearchLimits;
use openshop::random::RandomProfile;

/// Safety, reachability and deadlock analysis for open shop systems.
///
/// Exit codes: 0 = YES, 1 = NO, 2 = error, 3 = search limit exceeded.
#[derive(Parser)]
#[command(name = "openshop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct LimitArgs {
    /// Maximum number of distinct states the exact search may visit.
    #[arg(long, default_value_t = 1_000_000)]
    max_states: usize,
    /// Optional wall-clock budget for the exact search, in milliseconds.
    #[arg(long)]
    max_millis: Option<u64>,
}

impl LimitArgs {
    fn limits(&self) -> SearchLimits {
        SearchLimits {
            max_states: self.max_states,
            max_millis: self.max_millis,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Is the given state safe (can the system still empty out)?
    Safe {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        state: PathBuf,
        /// Emit a witness: a completion schedule on YES, the blocking
        /// set on NO.
        #[arg(long)]
        witness: bool,
    },
    /// Is the given state reachable from the initial state?
    Reachable {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        state: PathBuf,
        /// Emit an entry schedule on YES.
        #[arg(long)]
        witness: bool,
    },
    /// Can the system reach state --to starting from state --from?
    StateToState {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
        /// Emit a shortest schedule on YES.
        #[arg(long)]
        witness: bool,
    },
    /// Can the system ever reach a deadlock from the initial state?
    Deadlock {
        #[arg(long)]
        system: PathBuf,
        /// Skip the polynomial special cases and always run the exact
        /// search.
        #[arg(long)]
        exact: bool,
        #[command(flatten)]
        limits: LimitArgs,
        /// Emit a deadlock schedule and the resulting state on YES.
        #[arg(long)]
        witness: bool,
    },
    /// Emit a schedule completing the given safe state.
    Complete {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        state: PathBuf,
    },
    /// Generate hardness-reduction instances.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Generate a reproducible random system for the given seed.
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        machines: usize,
        #[arg(long, default_value_t = 3)]
        jobs: usize,
        /// Largest machine capacity.
        #[arg(long, default_value_t = 2)]
        max_cap: usize,
        /// Largest number of machines a job may require.
        #[arg(long, default_value_t = 3)]
        max_req: usize,
        /// Write the system here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// 3-SAT to state-to-state reachability: emits <out>.system,
    /// <out>.s and <out>.t from a DIMACS CNF file.
    Sat {
        /// DIMACS CNF input (three distinct variables per clause).
        #[arg(long)]
        cnf: PathBuf,
        /// Output path prefix.
        #[arg(long)]
        out: PathBuf,
        /// Satisfying assignment (signed variable numbers, e.g. "1 -2
        /// 3"); additionally emits <out>.schedule from s to t.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// 3-dimensional matching to reachable deadlock: emits <out>.system
    /// from a triples file (lines "a1 b2 c3").
    #[command(name = "3dm")]
    Tdm {
        /// Triples input file.
        #[arg(long)]
        triples: PathBuf,
        /// Output path prefix.
        #[arg(long)]
        out: PathBuf,
        /// Perfect matching (subset of the triples, same format);
        /// additionally emits <out>.state and <out>.schedule.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Option<Verdict>, CliError> {
    match cli.command {
        Command::Safe {
            system,
            state,
            witness,
        } => cli::cmd_safe(&system, &state, witness).map(Some),
        Command::Reachable {
            system,
            state,
            witness,
        } => cli::cmd_reachable(&system, &state, witness).map(Some),
        Command::StateToState {
            system,
            from,
            to,
            limits,
            witness,
        } => cli::cmd_state_to_state(&system, &from, &to, &limits.limits(), witness).map(Some),
        Command::Deadlock {
            system,
            exact,
            limits,
            witness,
        } => cli::cmd_deadlock(&system, &limits.limits(), exact, witness).map(Some),
        Command::Complete { system, state } => cli::cmd_complete(&system, &state).map(Some),
        Command::Gen(GenCommand::Sat { cnf, out, witness }) => {
            for path in cli::cmd_gen_sat(&cnf, &out, witness.as_deref())? {
                println!("wrote {}", path.display());
            }
            Ok(None)
        }
        Command::Gen(GenCommand::Tdm {
            triples,
            out,
            witness,
        }) => {
            for path in cli::cmd_gen_3dm(&triples, &out, witness.as_deref())? {
                println!("wrote {}", path.display());
            }
            Ok(None)
        }
        Command::Random {
            seed,
            machines,
            jobs,
            max_cap,
            max_req,
            out,
        } => {
            let profile = RandomProfile {
                machines,
                jobs,
                max_cap,
                max_req,
            };
            let text = cli::cmd_random(seed, &profile)?;
            match out {
                Some(path) => std::fs::write(&path, &text).map_err(|source| CliError::Io {
                    path,
                    source,
                })?,
                None => print!("{text}"),
            }
            Ok(None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Some(verdict)) => {
            print!("{}", verdict.render());
            ExitCode::from(verdict.exit_code() as u8)
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
