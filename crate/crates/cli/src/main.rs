//! `susychain --job job.json [--out report.json] [--seed N] [--tol T]`
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on
//! invalid input, 3 on a numerical breakdown.

mod jobs;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::Value;
use susychain_core::{Error, VERSION};

use jobs::{Check, Command, Envelope};

#[derive(Parser, Debug)]
#[command(name = "susychain", version, about = "Spin chain / RS model numerics driven by JSON jobs")]
struct Args {
    /// JSON job file
    #[arg(long)]
    job: PathBuf,
    /// report destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// overrides the job's seed
    #[arg(long)]
    seed: Option<u64>,
    /// overrides the job's tolerance
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Serialize)]
struct ErrorJson {
    kind: String,
    message: String,
}

impl From<&Error> for ErrorJson {
    fn from(e: &Error) -> Self {
        let dbg = format!("{e:?}");
        let kind = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string();
        ErrorJson { kind, message: e.to_string() }
    }
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

#[derive(Serialize)]
struct Report {
    command: Option<Command>,
    version: &'static str,
    seed: u64,
    tol: Option<f64>,
    input: Value,
    checks: Vec<Check>,
    pass: bool,
    #[serde(skip_serializing_if = "Value::is_null")]
    result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorJson>,
    /// Kept apart so that reports are otherwise reproducible byte for byte.
    timing: Timing,
}

fn configure_threads() {
    if let Some(n) = std::env::var("SUSYCHAIN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // only fails if a pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    configure_threads();
    let start = Instant::now();

    let text = match std::fs::read_to_string(&args.job) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.job.display());
            return ExitCode::from(2);
        }
    };
    let input: Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("malformed job: {e}");
            return ExitCode::from(2);
        }
    };

    let mut report = Report {
        command: None,
        version: VERSION,
        seed: 0,
        tol: None,
        input: input.clone(),
        checks: vec![],
        pass: false,
        result: Value::Null,
        error: None,
        timing: Timing { wall_seconds: 0.0 },
    };
    let code = match serde_json::from_value::<Envelope>(input.clone()) {
        Err(e) => {
            report.error = Some(ErrorJson { kind: "InvalidArgument".into(), message: e.to_string() });
            2
        }
        Ok(env) => {
            let seed = args.seed.or(env.seed).unwrap_or(0);
            let tol = args.tol.or(env.tol);
            report.command = Some(env.command);
            report.seed = seed;
            report.tol = tol;
            match jobs::run(env.command, &input, seed, tol) {
                Ok(out) => {
                    report.pass = out.checks.iter().all(|c| c.pass);
                    report.checks = out.checks;
                    report.result = out.result;
                    if report.pass { 0 } else { 1 }
                }
                Err(e) => {
                    report.error = Some(ErrorJson::from(&e));
                    if e.is_validation() { 2 } else { 3 }
                }
            }
        }
    };
    report.timing.wall_seconds = start.elapsed().as_secs_f64();

    let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &args.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, body) {
                eprintln!("cannot write {}: {e}", p.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{body}"),
    }
    if let Some(e) = &report.error {
        eprintln!("{}: {}", e.kind, e.message);
    }
    ExitCode::from(code)
}
