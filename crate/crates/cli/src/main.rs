//! `prgd`: run secrecy-rate sweeps, summarize their CSV output, or run the
//! built-in numerical self-checks.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prgd_core::harness::{self, ExperimentSpec, Scale};
use prgd_core::Error;

#[derive(Parser)]
#[command(name = "prgd", version, about = "Secrecy-rate sweeps for cooperative double-IRS MIMO-OFDM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a spec file or a built-in preset.
    Run {
        /// TOML experiment spec.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        spec: Option<PathBuf>,
        /// Built-in sweep: fig2, fig3, fig4, fig5, fig6, fig7 or desk.
        #[arg(long)]
        preset: Option<String>,
        /// Preset scale: full or desk.
        #[arg(long, default_value = "full", requires = "preset")]
        scale: String,
        /// Results CSV; defaults to the spec's output_path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the number of realizations.
        #[arg(long)]
        realizations: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Record wall-clock time per row (breaks byte-for-byte reproducibility).
        #[arg(long)]
        timing: bool,
        /// Print the resolved spec as TOML and exit.
        #[arg(long)]
        print_spec: bool,
    },
    /// Per-scheme, per-value mean, standard error and bootstrap 95% interval.
    Summarize {
        /// Results CSV written by `run`.
        input: PathBuf,
        /// Summary CSV; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick numerical checks on small instances.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let line = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Run { spec, preset, scale, out, threads, realizations, seed, timing, print_spec } => {
            let mut spec = match (spec, preset) {
                (Some(path), _) => ExperimentSpec::from_toml_str(&std::fs::read_to_string(path)?)?,
                (None, Some(name)) => ExperimentSpec::preset(&name, scale.parse::<Scale>()?)?,
                (None, None) => unreachable!("clap requires one of --spec or --preset"),
            };
            if let Some(n) = realizations {
                spec.n_realizations = n;
            }
            if let Some(s) = seed {
                spec.master_seed = s;
            }
            spec.timing |= timing;
            if let Some(o) = out {
                spec.output_path = Some(o);
            }
            spec.validate()?;
            if print_spec {
                print!("{}", spec.to_toml_string());
                return Ok(ExitCode::SUCCESS);
            }
            let path = spec
                .output_path
                .clone()
                .ok_or_else(|| Error::InvalidConfig("no output path: pass --out or set output_path".into()))?;
            let progress = |done: usize, total: usize| {
                if done == total || done % 25 == 0 {
                    eprintln!("{done}/{total} solves");
                }
            };
            let output = harness::run_with_progress(&spec, threads, &progress)?;
            harness::write_output(&output, &path)?;
            let failed = output.rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!("wrote {} rows to {} ({failed} failed)", output.rows.len(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { input, out } => {
            let rows = harness::read_rows(BufReader::new(File::open(input)?))?;
            let summary = harness::summarize(&rows)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            match out {
                Some(p) => harness::write_summary(&summary, File::create(p)?)?,
                None => harness::write_summary(&summary, io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            let checks = harness::selftest();
            let mut stdout = io::stdout().lock();
            for c in &checks {
                writeln!(stdout, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
            Ok(if checks.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
