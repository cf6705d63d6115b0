//! `hgp`: solve, decompose, verify and convert district-heating cases.
//!
//! Exit codes: 0 success, 1 input error, 2 solver failure, 3 identity
//! check failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use heatgrade::case::convert_units;
use heatgrade::case_file::to_json;
use heatgrade::pipeline::{
    resolve_case, run_pipeline, run_verification, ExitStatus, PipelineError, RuleSelection,
    SolveOptions, VerifyOptions,
};
use heatgrade::report::{self, write_atomic};
use heatgrade::units::TemperatureUnit;

#[derive(Parser)]
#[command(
    name = "hgp",
    version,
    about = "District-heating dispatch with energy and grade prices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a case, settle it and write reports.
    Solve {
        /// Case file, or a bundled case name (toy, fournode, island).
        case: String,
        #[arg(long, value_enum, default_value = "both")]
        rule: RuleArg,
        /// Temperature unit to solve and report in.
        #[arg(long)]
        unit: Option<TemperatureUnit>,
        /// Directory for the CSV reports and summary.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Solver tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Print the surplus decomposition of a case.
    Decompose {
        case: String,
        #[arg(long)]
        unit: Option<TemperatureUnit>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Check identities, unit invariance and (optionally) prices by finite
    /// differences.
    Verify {
        case: String,
        #[arg(long, value_enum)]
        oracle: Option<OracleArg>,
        /// Perturbation size for the finite-difference oracle.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Rewrite a case file in another temperature unit.
    Convert {
        case: String,
        #[arg(long)]
        unit: TemperatureUnit,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Energy,
    Double,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Fd,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                ExitStatus::InputError.code() as u8
            } else {
                0
            });
        }
    };
    match run(cli.command) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_status().code() as u8)
        }
    }
}

fn check_tolerance(tol: f64) -> Result<(), PipelineError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(PipelineError::Input(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

fn run(command: Command) -> Result<ExitStatus, PipelineError> {
    let mut stdout = std::io::stdout().lock();
    match command {
        Command::Solve {
            case,
            rule,
            unit,
            out,
            tol,
        } => {
            check_tolerance(tol)?;
            let case = resolve_case(&case)?;
            let rules = match rule {
                RuleArg::Energy => RuleSelection::Energy,
                RuleArg::Double => RuleSelection::Double,
                RuleArg::Both => RuleSelection::Both,
            };
            let run = run_pipeline(
                &case,
                &SolveOptions {
                    rules,
                    unit,
                    out_dir: out,
                    tolerance: tol,
                },
            )?;
            let _ = write!(stdout, "{}", run.summary);
            for path in &run.written {
                let _ = writeln!(stdout, "wrote {}", path.display());
            }
            for f in &run.failures {
                eprintln!("identity check failed: {f}");
            }
            Ok(run.status)
        }
        Command::Decompose {
            case,
            unit,
            out,
            tol,
        } => {
            check_tolerance(tol)?;
            let case = resolve_case(&case)?;
            let run = run_pipeline(
                &case,
                &SolveOptions {
                    rules: RuleSelection::Double,
                    unit,
                    out_dir: None,
                    tolerance: tol,
                },
            )?;
            let _ = write!(stdout, "{}", report::decomposition(&run.analysis));
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|source| PipelineError::Io {
                    path: dir.clone(),
                    source,
                })?;
                let path = dir.join("surplus.csv");
                write_atomic(&path, report::surplus_csv(&run.analysis).as_bytes()).map_err(
                    |source| PipelineError::Io {
                        path: path.clone(),
                        source,
                    },
                )?;
                let _ = writeln!(stdout, "wrote {}", path.display());
            }
            for f in &run.failures {
                eprintln!("identity check failed: {f}");
            }
            Ok(run.status)
        }
        Command::Verify {
            case,
            oracle,
            eps,
            tol,
        } => {
            check_tolerance(tol)?;
            if let Some(e) = eps {
                if !(e.is_finite() && e > 0.0) {
                    return Err(PipelineError::Input(format!(
                        "--eps must be positive, got {e}"
                    )));
                }
            }
            let case = resolve_case(&case)?;
            let run = run_verification(
                &case,
                &VerifyOptions {
                    finite_differences: oracle.is_some(),
                    eps,
                    tolerance: tol,
                },
            )?;
            let _ = write!(stdout, "{}", run.text);
            Ok(run.status)
        }
        Command::Convert { case, unit, out } => {
            let case = resolve_case(&case)?;
            let text = to_json(&convert_units(&case, unit))?;
            match out {
                Some(path) => {
                    write_atomic(&path, text.as_bytes()).map_err(|source| PipelineError::Io {
                        path: path.clone(),
                        source,
                    })?;
                }
                None => {
                    let _ = write!(stdout, "{text}");
                }
            }
            Ok(ExitStatus::Success)
        }
    }
}
