use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pridec::environments::privacy_audit;
use pridec::harness::dec_cli::{run_dec, DecKind, DecParams};
use pridec::harness::{audit_failures, load_config, parse_json, run_experiment, write_csv, HarnessError, ResultRow};
use pridec::learners::Transcript;

#[derive(Parser)]
#[command(name = "pridec", version, about = "DEC certificates and private interactive learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one DEC quantity and print its certificate as JSON.
    Dec {
        #[arg(long, value_enum)]
        kind: DecKind,
        /// Instance JSON (builder id with parameters, or inline class).
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        lambda0: Option<f64>,
        /// Reference model index (default: uniform mixture of the class).
        #[arg(long)]
        reference: Option<usize>,
        #[arg(long)]
        subset_cap: Option<usize>,
    },
    /// Execute the seeded runs of a config and write the results CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Like `run`, with the horizon list replaced.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "T", value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a transcript and print the report.
    Audit {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        alpha: f64,
    },
}

fn emit(rows: &[ResultRow], out: Option<PathBuf>) -> Result<(), HarnessError> {
    match out {
        Some(p) => write_csv(&p, rows)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&pridec::harness::csv_bytes(rows))?;
        }
    }
    let bad = audit_failures(rows);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Audit(format!("runs {bad:?} failed the privacy audit")))
    }
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Dec { kind, instance, gamma, eps, delta, tau, beta, lambda0, reference, subset_cap } => {
            let text = std::fs::read_to_string(&instance)?;
            let prm = DecParams { gamma, eps, delta, tau, beta, lambda0, reference, subset_cap };
            let v = run_dec(kind, &text, &prm)?;
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            Ok(())
        }
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let out = out.or_else(|| cfg.output.csv.as_ref().map(PathBuf::from));
            let rows: Vec<ResultRow> = run_experiment(&cfg, None)?.into_iter().map(|(r, _)| r).collect();
            emit(&rows, out)
        }
        Command::Sweep { config, horizons, out } => {
            let cfg = load_config(&config)?;
            let out = out.or_else(|| cfg.output.csv.as_ref().map(PathBuf::from));
            let rows: Vec<ResultRow> =
                run_experiment(&cfg, Some(&horizons))?.into_iter().map(|(r, _)| r).collect();
            emit(&rows, out)
        }
        Command::Audit { transcript, alpha } => {
            let text = std::fs::read_to_string(&transcript)?;
            let t: Transcript = parse_json(&text)?;
            let rep = privacy_audit(&t, alpha);
            println!("{}", serde_json::to_string_pretty(&rep).expect("json"));
            if rep.pass {
                Ok(())
            } else {
                Err(HarnessError::Audit(format!("{} failure(s)", rep.failures.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
