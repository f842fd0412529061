mod repl;
mod session;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use udatalog::compose::DEFAULT_UNFOLD_CAP;
use udatalog::term::Const;
use udatalog::transaction::Status;

use session::{goal, load, Config, Failure, Outcome, Session, EXIT_ABORT, EXIT_USAGE};

/// Interpreter and precompiler for U-Datalog with stratified negation.
#[derive(Parser)]
#[command(name = "udatalog", version)]
struct Cli {
    /// Extra universe constants, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    domain: Vec<String>,

    /// Bound on unfolding rounds per recursive component.
    #[arg(long, global = true, default_value_t = DEFAULT_UNFOLD_CAP)]
    unfold_cap: usize,

    /// Print the update set of every solution.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[arg(long, global = true)]
    no_color: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stratify and check rule safety.
    Check { file: PathBuf },
    /// Marking phase only: print the solutions of GOAL.
    Query {
        file: PathBuf,
        goal: String,
        /// Facts to use instead of the program's own.
        #[arg(long)]
        edb: Option<PathBuf>,
    },
    /// Run GOAL as a transaction and print the resulting EDB.
    Tx {
        file: PathBuf,
        goal: String,
        #[arg(long)]
        edb: Option<PathBuf>,
        /// Write the resulting facts here.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Write the composed, recursion-free program.
    Precompile {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the model of every stratum.
    DumpFixpoint {
        file: PathBuf,
        #[arg(long)]
        edb: Option<PathBuf>,
    },
    /// Interactive shell over FILE.
    Repl {
        file: PathBuf,
        #[arg(long)]
        edb: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome<u8> {
    let seed = match std::env::var("UDATALOG_SEED") {
        Ok(s) => Some(s.trim().parse::<u64>().map_err(|_| Failure::usage(format!("UDATALOG_SEED must be a number, got {s:?}")))?),
        Err(_) => None,
    };
    let config = Config {
        domain: cli.domain.iter().map(|d| d.trim()).filter(|d| !d.is_empty()).map(Const::new).collect(),
        unfold_cap: cli.unfold_cap,
        verbose: cli.verbose,
        color: Config::color_enabled(cli.no_color),
        seed,
    };
    let open = |file: &PathBuf, edb: &Option<PathBuf>| -> Outcome<Session> { Ok(Session::new(load(file, edb.as_deref(), &config)?, config.clone())) };
    match cli.command {
        Command::Check { file } => {
            print!("{}", open(&file, &None)?.check()?);
            Ok(0)
        }
        Command::Query { file, goal: g, edb } => {
            let session = open(&file, &edb)?;
            print!("{}", session.query(&goal(&g)?)?);
            Ok(0)
        }
        Command::Tx { file, goal: g, edb, save } => {
            let mut session = open(&file, &edb)?;
            let (text, status) = session.transaction(&goal(&g)?)?;
            print!("{text}");
            print!("{}", session.edb());
            if let Some(path) = save {
                eprint!("{}", session.save(&path)?);
            }
            Ok(if status == Status::Commit { 0 } else { EXIT_ABORT })
        }
        Command::Precompile { file, output } => {
            let text = open(&file, &None)?.precompile()?;
            std::fs::write(&output, text).map_err(|e| Failure::usage(format!("{}: {e}", output.display())))?;
            Ok(0)
        }
        Command::DumpFixpoint { file, edb } => {
            print!("{}", open(&file, &edb)?.fixpoint()?);
            Ok(0)
        }
        Command::Repl { file, edb } => {
            let mut session = open(&file, &edb)?;
            repl::run(&mut session, io::stdin().lock(), io::stdout(), io::stderr()).map_err(|e| Failure::usage(e.to_string()))?;
            Ok(0)
        }
    }
}
