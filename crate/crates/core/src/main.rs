use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coolcav::cli::{self, Command, Io};

#[derive(Parser)]
#[command(name = "coolcav", version, about = "Cavity cooling rates of a trapped atom")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// `--key=value` overrides of configuration entries.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rates, cooling rate and mean phonon number at one detuning point.
    Rates(Common),
    /// Map over the (delta, Delta) plane.
    Sweep(Common),
    /// Time evolution of the phonon distribution.
    Evolve(Common),
    /// Compare the rates against the Lindblad solver.
    Oracle(Common),
    /// Optimal detunings and free-space limits.
    Limits(Common),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (cmd, common) = match args.command {
        Cmd::Rates(c) => (Command::Rates, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Evolve(c) => (Command::Evolve, c),
        Cmd::Oracle(c) => (Command::Oracle, c),
        Cmd::Limits(c) => (Command::Limits, c),
    };
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    let mut io = Io { out: &mut out, err: &mut err };
    let code = match cli::load_config(&common.config, &common.overrides) {
        Ok(cfg) => {
            let threads = std::env::var(cli::THREADS_ENV).ok();
            cli::run(cmd, &cfg, threads.as_deref(), &mut io)
        }
        Err(e) => {
            let _ = writeln!(io.err, "error: {}: {e}", common.config.display());
            // an unreadable config file is a configuration problem
            match e {
                coolcav::Error::Io { .. } => cli::EXIT_CONFIG,
                e => cli::exit_code(&e),
            }
        }
    };
    ExitCode::from(code as u8)
}
