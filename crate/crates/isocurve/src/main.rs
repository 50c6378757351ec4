use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isocurve::job::{batch_exit_code, manifest_value, run_manifest, run_value, RunConfig};

#[derive(Parser)]
#[command(name = "isocurve", version, about = "Exact p-curvature, isomonodromy, and orbit-dynamics jobs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Cap on intermediate numerator degrees (resource guard).
    #[arg(long, env = "ISOCURVE_DEGREE_CAP")]
    degree_cap: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long, env = "ISOCURVE_OUT")]
    out: Option<PathBuf>,

    /// Include wall-clock timings in reports (reports are then no longer
    /// byte-identical across runs).
    #[arg(long, env = "ISOCURVE_TIMING")]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single JSON job file and emit its report.
    Run {
        /// Path to the job JSON.
        job: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every job in a manifest {"jobs": [...]} and emit all reports.
    Scan {
        /// Path to the manifest JSON.
        manifest: PathBuf,
        /// Worker threads; output order stays the input order.
        #[arg(long, env = "ISOCURVE_PARALLEL", default_value_t = 1)]
        parallel: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { job, common } => run_one(&job, &common),
        Command::Scan { manifest, parallel, common } => scan_all(&manifest, parallel, &common),
    };
    ExitCode::from(code.clamp(0, 255) as u8)
}

fn config(common: &Common) -> RunConfig {
    RunConfig { degree_cap: common.degree_cap, timing: common.timing }
}

fn load(path: &PathBuf) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{} is not valid JSON: {e}", path.display()))
}

fn emit(value: &serde_json::Value, out: &Option<PathBuf>) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization");
    text.push('\n');
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
    }
}

fn run_one(path: &PathBuf, common: &Common) -> i32 {
    let value = match load(path) {
        Ok(v) => v,
        Err(msg) => return schema_failure(&msg),
    };
    let report = run_value(&value, &config(common));
    match emit(&report.to_value(), &common.out) {
        Ok(()) => report.exit_code(),
        Err(msg) => schema_failure(&msg),
    }
}

fn scan_all(path: &PathBuf, parallel: usize, common: &Common) -> i32 {
    let value = match load(path) {
        Ok(v) => v,
        Err(msg) => return schema_failure(&msg),
    };
    let reports = match run_manifest(&value, parallel, &config(common)) {
        Ok(r) => r,
        Err(e) => return schema_failure(&e.to_string()),
    };
    match emit(&manifest_value(&reports), &common.out) {
        Ok(()) => batch_exit_code(&reports),
        Err(msg) => schema_failure(&msg),
    }
}

fn schema_failure(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    2
}
