use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stalm_cli::commands::{self, CHECK_NAMES, EXIT_ERROR, EXIT_OK, SWEEP_PARAMS};
use stalm_cli::config::{self, DEFAULTS};

#[derive(Parser)]
#[command(
    name = "stalm",
    version,
    about = "Augmented Lagrangian solver for state-constrained parabolic optimal control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write trace.csv and report.txt.
    ///
    /// Exit status: 0 when the residual tolerance is met, 2 when the outer
    /// iteration cap is reached first, 1 on error.
    #[command(after_help = format!("Config keys and defaults:\n{DEFAULTS}"))]
    Run {
        /// TOML config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification oracles and write verify.csv.
    Verify {
        /// Run only this check.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(CHECK_NAMES))]
        check: Option<String>,
        /// Judge every check against tolerance 0 (harness self-test).
        #[arg(long)]
        force_fail: bool,
        #[arg(long, default_value = "verify")]
        out: PathBuf,
    },
    /// Repeat a run over several values of one parameter.
    #[command(after_help = format!("Config keys and defaults:\n{DEFAULTS}"))]
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SWEEP_PARAMS))]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        /// Output directory, overriding output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let cfg = match config::parse_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit(EXIT_ERROR);
                }
            };
            let dir = out.map_or_else(|| cfg.resolved_output_dir(), |o| config::resolve_output(&o));
            match commands::run_to(&cfg, &dir) {
                Ok(summary) => {
                    println!(
                        "{}: {} outer iterations, R = {}, J = {} ({})",
                        summary.termination.as_str(),
                        summary.outer_iters,
                        summary.final_r,
                        summary.final_j,
                        summary.output_dir.display()
                    );
                    exit(summary.exit_code())
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(EXIT_ERROR)
                }
            }
        }
        Command::Verify { check, force_fail, out } => {
            match commands::verify_command(check.as_deref(), force_fail, &config::resolve_output(&out)) {
                Ok(reports) => {
                    print!("{}", commands::format_reports_table(&reports));
                    exit(if reports.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_ERROR })
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(EXIT_ERROR)
                }
            }
        }
        Command::Sweep { config, param, values, out } => {
            let cfg = match config::parse_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit(EXIT_ERROR);
                }
            };
            let dir = out.map_or_else(|| cfg.resolved_output_dir(), |o| config::resolve_output(&o));
            match commands::sweep_command(&cfg, &param, &values, &dir) {
                Ok(rows) => {
                    for row in &rows {
                        match &row.outcome {
                            Ok(s) => println!(
                                "{param}={}: {} after {} outer iterations, R = {}",
                                row.value,
                                s.termination.as_str(),
                                s.outer_iters,
                                s.final_r
                            ),
                            Err(e) => println!("{param}={}: error: {e}", row.value),
                        }
                    }
                    exit(commands::sweep_exit_code(&rows))
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(EXIT_ERROR)
                }
            }
        }
    }
}
