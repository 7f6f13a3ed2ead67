use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freqlab::lab::{self, report::exit_code_for, Command, ExperimentConfig};
use freqlab::par;

#[derive(Parser)]
#[command(name = "freqlab", version, about = "Weighted frequency experiments on Carnot groups")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Run {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Structural identities, gauge harmonicity and catalog checks.
    Identities(Run),
    /// Height, energy and frequency profiles with derivative identities.
    Frequency(Run),
    /// Fit the adjusted-frequency constant and check monotonicity.
    Monotonicity(Run),
    /// Vanishing-order slopes across K.
    Order(Run),
    /// Finite-difference solve, convergence study and discrete pipeline.
    Solve(Run),
    /// Merge reports into a cross-K summary.
    Report {
        paths: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn threads_from_env() -> Result<(), String> {
    match std::env::var("FREQLAB_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("FREQLAB_THREADS must be a positive integer, got '{v}'"))?;
            par::init_threads(Some(n));
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn run(cmd: Command, args: Run) -> i32 {
    let cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let Some(out) = args.out.or_else(|| cfg.out.clone()) else {
        eprintln!("error: no output directory (pass --out or set \"out\")");
        return lab::report::EXIT_USAGE;
    };
    match lab::run(cmd, &cfg, &out) {
        Ok(r) => {
            for c in &r.checks {
                let v = c.value.map(|v| format!(" value={v:.3e}")).unwrap_or_default();
                let t = c.tolerance.map(|t| format!(" tol={t:.1e}")).unwrap_or_default();
                println!("{} {}{v}{t}", if c.passed { "PASS" } else { "FAIL" }, c.name);
            }
            r.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { lab::report::EXIT_USAGE as u8 } else { 0 });
        }
    };
    if let Err(msg) = threads_from_env() {
        eprintln!("error: {msg}");
        return ExitCode::from(lab::report::EXIT_USAGE as u8);
    }
    let code = match cli.command {
        Cmd::Identities(a) => run(Command::Identities, a),
        Cmd::Frequency(a) => run(Command::Frequency, a),
        Cmd::Monotonicity(a) => run(Command::Monotonicity, a),
        Cmd::Order(a) => run(Command::Order, a),
        Cmd::Solve(a) => run(Command::Solve, a),
        Cmd::Report { paths, out } => match lab::run_report(&paths, &out) {
            Ok(s) => {
                println!("{} summary of {} reports", if s.passed { "PASS" } else { "FAIL" }, s.inputs.len());
                s.exit_code
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code_for(&e)
            }
        },
    };
    ExitCode::from(code as u8)
}
