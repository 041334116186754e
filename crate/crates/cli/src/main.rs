use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vdm_pog::discharge::Bounds;
use vdm_pog::driver::{run, RunConfig, EXIT_ERRORS};

/// Generates proof obligations for VDM-SL operations and optionally
/// checks them by bounded enumeration.
#[derive(Debug, Parser)]
#[command(name = "vdmpog", version)]
struct Args {
    /// Specification files, processed in the order given.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Print JSON instead of the obligation listing.
    #[arg(long)]
    json: bool,
    /// Try every obligation against small values.
    #[arg(long)]
    discharge: bool,
    /// Largest natural tried [default: 5].
    #[arg(long, value_name = "N")]
    nat_max: Option<i64>,
    /// Longest sequence tried [default: 3].
    #[arg(long, value_name = "N")]
    seq_max: Option<usize>,
    /// Cases per obligation before it is reported Exhausted [default: 10000].
    #[arg(long, value_name = "N")]
    max_cases: Option<u64>,
    /// Time per obligation in milliseconds [default: 5000].
    #[arg(long, value_name = "N")]
    timeout_ms: Option<u64>,
    /// Paths per operation before they are merged and marked Unchecked.
    #[arg(long, value_name = "N")]
    max_paths: Option<usize>,
    /// Express annotated while loops as recursive functions.
    #[arg(long)]
    experimental_loop_functions: bool,
    /// Files processed concurrently, and discharge threads per file.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
}

fn config(a: Args) -> RunConfig {
    let d = Bounds::default();
    let mut c = RunConfig {
        input_paths: a.files,
        emit_json: a.json,
        discharge_enabled: a.discharge,
        bounds: Bounds {
            nat_max: a.nat_max.unwrap_or(d.nat_max),
            seq_len_max: a.seq_max.unwrap_or(d.seq_len_max),
            max_cases: a.max_cases.unwrap_or(d.max_cases),
            timeout_ms: a.timeout_ms.unwrap_or(d.timeout_ms),
            ..d
        },
        experimental_loop_functions: a.experimental_loop_functions,
        jobs: a.jobs.max(1),
        ..RunConfig::default()
    };
    if let Some(n) = a.max_paths {
        c.max_paths = n.max(1);
    }
    c
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERRORS as u8 } else { 0 });
        }
    };
    let out = run(&config(args));
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    ExitCode::from(out.exit_code as u8)
}
