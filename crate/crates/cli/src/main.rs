use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use normsim_cli::{cmd_check, cmd_run, cmd_validate, Outcome, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "normsim", version, about = "Normative multi-agent simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit its JSON-lines event log
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long, env = "NORMSIM_SEED")]
        seed: Option<u64>,
        /// Write the event log here instead of stdout
        #[arg(long, env = "NORMSIM_LOG")]
        log: Option<PathBuf>,
    },
    /// Check one action against a norm file
    Check {
        #[arg(long)]
        norms: PathBuf,
        #[arg(long)]
        action: String,
        #[arg(long, default_value = "DEFAULT")]
        domain: String,
        /// Comma-separated role names
        #[arg(long, default_value = "")]
        roles: String,
        /// Comma-separated key=value bindings
        #[arg(long, default_value = "")]
        state: String,
        /// Print the response as JSON
        #[arg(long)]
        json: bool,
    },
    /// Validate a norm or scenario file
    Validate { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let outcome: Outcome = match &cli.command {
        Command::Run {
            scenario,
            ticks,
            seed,
            log,
        } => cmd_run(scenario, *ticks, *seed, log.as_deref()),
        Command::Check {
            norms,
            action,
            domain,
            roles,
            state,
            json,
        } => cmd_check(norms, action, domain, roles, state, *json),
        Command::Validate { path } => cmd_validate(path),
    };
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    ExitCode::from(outcome.code as u8)
}
