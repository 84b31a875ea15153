//! `tcdirac` CLI: scenario runs, verification suites, field catalog.
//!
//! Exit codes: 0 success, 2 schema violation, 3 domain error, 4 numerical
//! failure (including failed verification suites), 5 unwritable path.

use clap::{Parser, Subcommand};
use tcdirac_cli::runner::{self, CliError, RunFlags};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "tcdirac", version, about = "Semiclassical trajectory-coherent dynamics engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario config and emit CSV/JSON outputs.
    Run {
        /// Scenario JSON file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the configured Planck constant.
        #[arg(long)]
        hbar: Option<f64>,
        /// Override the correction order (0 or 1).
        #[arg(long)]
        order: Option<u8>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Byte-stable outputs (zeroes wall times in the report).
        #[arg(long)]
        reproducible: bool,
    },
    /// Run the named verification suites and print a residual table.
    Verify {
        /// Comma-separated suite names; defaults to all when omitted. An
        /// explicitly empty selection runs nothing and exits 0.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        suite: Option<Vec<String>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Random draws for the sampled suites.
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Optional directory for verify_report.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Byte-stable report (zeroes wall times).
        #[arg(long)]
        reproducible: bool,
    },
    /// Print the builtin field catalog.
    Catalog,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, hbar, order, seed, reproducible } => {
            let flags = RunFlags { hbar, order, seed, reproducible };
            match runner::run_scenario(&config, &out, &flags) {
                Ok(report) => {
                    for st in &report.stages {
                        println!(
                            "stage {:<12} {}  outputs: {}",
                            st.name,
                            st.status,
                            if st.outputs.is_empty() { "-".into() } else { st.outputs.join(", ") }
                        );
                    }
                    println!("report: {}", out.join("report.json").display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {}", e.message());
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Verify { suite, seed, count, out, reproducible } => {
            let names: Vec<String> = match suite {
                None => tcdirac::verify::ALL_SUITES.iter().map(|s| s.to_string()).collect(),
                Some(v) => v.into_iter().filter(|s| !s.is_empty()).collect(),
            };
            let mut reports = Vec::new();
            let mut all_pass = true;
            for name in &names {
                match tcdirac::verify::run_suite(name, seed, count) {
                    Ok(mut rep) => {
                        if reproducible {
                            rep.wall_s = 0.0;
                        }
                        all_pass &= rep.pass;
                        print_suite(&rep);
                        reports.push(rep);
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(CliError::from(e).exit_code() as u8);
                    }
                }
            }
            if let Some(dir) = out {
                if let Err(e) = write_verify_report(&dir, &reports) {
                    eprintln!("error: {e}");
                    return ExitCode::from(5);
                }
                println!("report: {}", dir.join("verify_report.json").display());
            }
            if names.is_empty() || all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Command::Catalog => {
            println!("{:<18} {:<34} description", "kind", "params");
            for entry in tcdirac::emfield::builtin_catalog() {
                println!("{:<18} {:<34} {}", entry.kind, entry.params, entry.description);
            }
            ExitCode::SUCCESS
        }
    }
}

fn print_suite(rep: &tcdirac::verify::SuiteReport) {
    println!(
        "suite {:<10} {}  ({:.2}s)",
        rep.suite,
        if rep.pass { "PASS" } else { "FAIL" },
        rep.wall_s
    );
    for e in &rep.entries {
        println!(
            "  [{}] {:<62} {:>12.3e}  (tol {:.1e})",
            if e.pass { "ok" } else { "FAIL" },
            e.id,
            e.value,
            e.tolerance
        );
    }
    for n in &rep.notes {
        println!("  note: {n}");
    }
}

fn write_verify_report(dir: &std::path::Path, reports: &[tcdirac::verify::SuiteReport]) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let text = serde_json::to_string_pretty(reports).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("verify_report.json"), format!("{text}\n"))
        .map_err(|e| format!("cannot write verify_report.json: {e}"))
}
