//! Command-line front end: `solve`, `verify`, `gen` and `oracle`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::audit::{self, AuditError, DEFAULT_BUDGET};
use crate::generate::{self, Family};
use crate::instance::{self, Instance};
use crate::pipeline::{self, Report, SolveOptions};
use crate::rational;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;
pub const EXIT_CERTIFICATE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "prop-subsidy",
    version,
    about = "Chore allocation with bounded proportionality subsidy and exact certificates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance and write a certified report.
    Solve(SolveArgs),
    /// Re-check every certificate in a saved report.
    Verify(IoArgs),
    /// Generate an instance from a family and seed.
    Gen(GenArgs),
    /// Compare the pipeline with the brute-force optimum.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Input file; standard input when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Threads for piece rounding.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Add approximate decimal values next to the exact ones.
    #[arg(long)]
    pub decimal: bool,
    /// Include the decomposition pieces and their roundings.
    #[arg(long)]
    pub dump_pieces: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Largest number of allocations to enumerate.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    /// Threads for enumeration chunks.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub decimal: bool,
}

/// An error message paired with the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl ToString) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

fn read_input(path: &Option<PathBuf>) -> Result<String, Failure> {
    match path {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot read {}: {e}", p.display()))),
        None => {
            let mut text = String::new();
            io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot read stdin: {e}")))?;
            Ok(text)
        }
    }
}

fn write_output(path: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::new(EXIT_INTERNAL, e)),
    }
}

fn read_instance(path: &Option<PathBuf>) -> Result<Instance, Failure> {
    let text = read_input(path)?;
    instance::parse_instance(&text)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("invalid instance: {e}")))
}

fn pretty(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let inst = read_instance(&args.io.input)?;
    let options = SolveOptions {
        jobs: args.jobs.max(1),
        dump_pieces: args.dump_pieces,
        decimal: args.decimal,
    };
    let solution = pipeline::solve(&inst, options).map_err(|e| Failure::new(EXIT_INTERNAL, e))?;
    write_output(&args.io.output, &pretty(&solution.report))
}

fn verify(args: &IoArgs) -> Result<(), Failure> {
    let text = read_input(&args.input)?;
    let report: Report = serde_json::from_str(&text)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("invalid report: {e}")))?;
    match pipeline::verify(&report) {
        Ok(()) => {
            let names: Vec<&str> = pipeline::CERTIFICATES.to_vec();
            write_output(
                &args.output,
                &pretty(&json!({ "verified": true, "certificates": names })),
            )
        }
        Err(e) => Err(Failure::new(
            EXIT_CERTIFICATE,
            format!("{}: {}", e.certificate, e.detail),
        )),
    }
}

fn gen(args: &GenArgs) -> Result<(), Failure> {
    let family: Family = args
        .family
        .parse()
        .map_err(|e| Failure::new(EXIT_INPUT, e))?;
    let inst = generate::generate(family, args.n, args.m, args.seed)
        .map_err(|e| Failure::new(EXIT_INPUT, e))?;
    write_output(&args.output, &instance::serialize_instance(&inst))
}

fn oracle(args: &OracleArgs) -> Result<(), Failure> {
    let inst = read_instance(&args.io.input)?;
    let solution = pipeline::solve(&inst, SolveOptions::default())
        .map_err(|e| Failure::new(EXIT_INTERNAL, e))?;
    let report = &solution.report;
    let measured = inst.scaled_down(&report.scale);
    let (optimum, best) = audit::brute_force_opt_subsidy(&measured, args.budget, args.jobs.max(1))
        .map_err(|e| match e {
            AuditError::BudgetExceeded { .. } => Failure::new(EXIT_BUDGET, e),
            other => Failure::new(EXIT_INTERNAL, other),
        })?;
    let gap = &report.total_subsidy - &optimum;
    let mut out = json!({
        "optimum": rational::to_text(&optimum),
        "optimal_allocation": best,
        "pipeline_total": rational::to_text(&report.total_subsidy),
        "pipeline_allocation": report.allocation,
        "gap": rational::to_text(&gap),
        "bound": rational::to_text(&report.bound),
        "scale": rational::to_text(&report.scale),
    });
    if args.decimal {
        out["decimal"] = json!({
            "optimum": rational::to_f64(&optimum),
            "pipeline_total": rational::to_f64(&report.total_subsidy),
            "gap": rational::to_f64(&gap),
        });
    }
    write_output(&args.io.output, &pretty(&out))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify(a),
        Command::Gen(a) => gen(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
