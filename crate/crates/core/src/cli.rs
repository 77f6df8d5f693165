//! `blepi` command-line front end.
//!
//! Every command writes one JSON report (to `--out` or standard output).
//! Exit status: 0 when the check passes, 1 on an inequality violation or
//! solver failure, 2 on input errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::datum::{validate_datum, BLDatum, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::serde_ext;
use crate::solver::{solve_mg, MgResult, MgStatus, SolverOptions};
use crate::transport::{monotone_1d_map, parse_targets_json, product_map, Distribution, TransportMap};
use crate::verifier::{
    gaussian_product_map, lemma1_check_with, proof_chain_audit_with, theorem_check_sampled_with, theorem_gap_gaussian, VerifierOptions,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Environment variable capping worker threads (0 = automatic).
pub const THREADS_ENV: &str = "BLEPI_THREADS";

#[derive(Debug, Parser)]
#[command(name = "blepi", version, about = "Gaussian-optimal constants for the entropy-power / Brascamp-Lieb inequality")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: RunOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check signs, surjectivity and dimension balance of a datum.
    Validate,
    /// Compute M_g.
    Solve,
    /// Closed-form check for Gaussian inputs with per-block covariances.
    VerifyGaussian,
    /// Monte Carlo check for scalar blocks with the given targets.
    VerifySampled,
    /// Both sides of the change-of-variables lemma for one map of the datum.
    Lemma1,
    /// Step-by-step quantities of the lemma's chain.
    Audit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Solve => "solve",
            Command::VerifyGaussian => "verify-gaussian",
            Command::VerifySampled => "verify-sampled",
            Command::Lemma1 => "lemma1",
            Command::Audit => "audit",
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct RunOptions {
    /// Datum JSON file.
    #[arg(long, global = true)]
    pub datum: Option<PathBuf>,
    /// Per-block covariances as inline JSON, e.g. "[[1]],[[4]]".
    #[arg(long, global = true)]
    pub sigmas: Option<String>,
    /// JSON file with one 1-D distribution spec per coordinate.
    #[arg(long, global = true)]
    pub targets: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Use this M_g instead of solving for it.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mg: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the parsed datum back out as canonical JSON and exit.
    #[arg(long, global = true)]
    pub dump_datum: bool,
    /// Deterministic 1e-10 jitter before nearest-neighbour search.
    #[arg(long, global = true)]
    pub jitter: bool,
    /// CSV file for the solver's iteration trace.
    #[arg(long, global = true)]
    pub trace_csv: Option<PathBuf>,
    /// Neighbour rank for the nearest-neighbour entropy estimator.
    #[arg(long, global = true, default_value_t = 5)]
    pub k: usize,
    /// Which map A_j of the datum the lemma commands use.
    #[arg(long, global = true, default_value_t = 0)]
    pub map_index: usize,
    #[arg(long, global = true, default_value_t = 8)]
    pub strata: usize,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub stat_tol: Option<f64>,
}

/// A fully parsed invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub options: RunOptions,
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        RunConfig { command: cli.command, options: cli.options }
    }
}

/// Exit status plus the document that was written.
#[derive(Debug)]
pub struct Outcome {
    pub status: i32,
    pub document: Option<String>,
}

/// Per-block covariances: either a JSON array of matrices or a bare
/// comma-separated list of them.
pub fn parse_sigmas(text: &str) -> Result<Vec<DMatrix<f64>>> {
    let raw: Vec<Vec<Vec<f64>>> = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(_) => serde_json::from_str(&format!("[{text}]"))?,
    };
    raw.iter()
        .map(|rows| serde_ext::from_rows(rows).map_err(Error::Structural))
        .collect()
}

/// Iteration trace as CSV with 17 significant digits.
pub fn emit_trace_csv(result: &MgResult, path: &Path) -> Result<()> {
    std::fs::write(path, trace_csv(result)?)?;
    Ok(())
}

pub fn trace_csv(result: &MgResult) -> Result<String> {
    if result.trace.is_empty() {
        return Err(Error::Parameter("solver trace is empty".into()));
    }
    let mut out = String::from("iteration,objective,stationarity\n");
    for t in &result.trace {
        out.push_str(&format!("{},{:.16e},{:.16e}\n", t.iteration, t.objective, t.stationarity));
    }
    Ok(out)
}

fn read_datum(opts: &RunOptions) -> Result<BLDatum> {
    let path = opts.datum.as_ref().ok_or_else(|| Error::Parameter("--datum is required".into()))?;
    BLDatum::from_json(&std::fs::read_to_string(path)?)
}

fn read_targets(path: &Path) -> Result<Vec<Distribution>> {
    parse_targets_json(&std::fs::read_to_string(path)?)
}

fn solver_options(opts: &RunOptions) -> SolverOptions {
    let mut s = SolverOptions { seed: opts.seed, ..Default::default() };
    if let Some(v) = opts.max_iters {
        s.max_iters = v;
    }
    if let Some(v) = opts.restarts {
        s.restarts = v;
    }
    if let Some(v) = opts.stat_tol {
        s.stat_tol = v;
    }
    s
}

fn verifier_options(opts: &RunOptions) -> VerifierOptions {
    VerifierOptions { k: opts.k, jitter: opts.jitter, strata: opts.strata }
}

/// `--mg` when given, otherwise `M_g` from the solver (`+∞` if unbounded).
fn resolve_mg(datum: &BLDatum, opts: &RunOptions) -> Result<(f64, Option<MgResult>)> {
    if let Some(mg) = opts.mg {
        return Ok((mg, None));
    }
    let res = solve_mg(datum, &solver_options(opts))?;
    if res.status == MgStatus::MaxIterations {
        return Err(Error::Consistency(format!("solver did not converge: {}", res.message)));
    }
    Ok((res.mg(), Some(res)))
}

fn lemma_inputs(datum: &BLDatum, opts: &RunOptions) -> Result<(DMatrix<f64>, TransportMap)> {
    let a = datum
        .maps()
        .get(opts.map_index)
        .cloned()
        .ok_or_else(|| Error::Parameter(format!("map index {} out of range", opts.map_index)))?;
    let map = match (&opts.targets, &opts.sigmas) {
        (Some(path), None) => {
            let targets = read_targets(path)?;
            let n = datum.dim();
            if targets.len() != n {
                return Err(Error::Structural(format!("{} targets for dimension {n}", targets.len())));
            }
            let comps = targets.into_iter().map(monotone_1d_map).collect::<Result<Vec<_>>>()?;
            product_map(comps, &vec![1; n])?
        }
        (None, Some(s)) => {
            let sigmas = parse_sigmas(s)?;
            let map = gaussian_product_map(&sigmas)?;
            if map.dim() != datum.dim() {
                return Err(Error::Structural("covariance blocks do not match the datum dimension".into()));
            }
            map
        }
        _ => return Err(Error::Parameter("give exactly one of --targets or --sigmas".into())),
    };
    Ok((a, map))
}

/// Runs one command, returning the report and whether its check passed.
fn execute(config: &RunConfig) -> Result<(Value, bool)> {
    let opts = &config.options;
    let datum = read_datum(opts)?;
    match config.command {
        Command::Validate => {
            let rep = validate_datum(&datum, DEFAULT_RANK_TOL);
            let ok = rep.ok;
            Ok((serde_json::to_value(rep)?, ok))
        }
        Command::Solve => {
            let res = solve_mg(&datum, &solver_options(opts))?;
            if let Some(path) = &opts.trace_csv {
                emit_trace_csv(&res, path)?;
            }
            let ok = res.status != MgStatus::MaxIterations;
            Ok((serde_json::to_value(res)?, ok))
        }
        Command::VerifyGaussian => {
            let sigmas = parse_sigmas(opts.sigmas.as_deref().ok_or_else(|| Error::Parameter("--sigmas is required".into()))?)?;
            let (mg, _) = resolve_mg(&datum, opts)?;
            let rep = theorem_gap_gaussian(&datum, &sigmas, mg)?;
            let ok = rep.passes;
            Ok((serde_json::to_value(rep)?, ok))
        }
        Command::VerifySampled => {
            let path = opts.targets.as_ref().ok_or_else(|| Error::Parameter("--targets is required".into()))?;
            let targets = read_targets(path)?;
            let (mg, _) = resolve_mg(&datum, opts)?;
            let rep = theorem_check_sampled_with(&datum, &targets, opts.samples, opts.seed, mg, &verifier_options(opts))?;
            let ok = rep.passes;
            Ok((serde_json::to_value(rep)?, ok))
        }
        Command::Lemma1 => {
            let (a, map) = lemma_inputs(&datum, opts)?;
            let rep = lemma1_check_with(&a, &map, opts.samples, opts.seed, &verifier_options(opts))?;
            let ok = rep.passes;
            Ok((serde_json::to_value(rep)?, ok))
        }
        Command::Audit => {
            let (a, map) = lemma_inputs(&datum, opts)?;
            let rep = proof_chain_audit_with(&a, &map, opts.samples, opts.seed, &verifier_options(opts))?;
            let ok = rep.conditioning_holds != Some(false) && rep.change_of_variables_matches != Some(false) && rep.det_gap_nonnegative;
            Ok((serde_json::to_value(rep)?, ok))
        }
    }
}

/// Report envelope. Everything except `timestamp` is a pure function of the
/// inputs.
pub fn envelope(command: Command, seed: u64, pass: bool, report: Value, timestamp: u64) -> Value {
    json!({
        "tool": "blepi",
        "version": crate::VERSION,
        "command": command.name(),
        "seed": seed,
        "timestamp": timestamp,
        "pass": pass,
        "report": report,
    })
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn write_output(opts: &RunOptions, text: &str) -> Result<()> {
    match &opts.out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

pub fn run(config: &RunConfig) -> Outcome {
    match run_inner(config) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("blepi: {e}");
            Outcome { status: EXIT_INPUT, document: None }
        }
    }
}

fn run_inner(config: &RunConfig) -> Result<Outcome> {
    let opts = &config.options;
    if opts.dump_datum {
        let text = read_datum(opts)?.to_json() + "\n";
        write_output(opts, &text)?;
        return Ok(Outcome { status: EXIT_PASS, document: Some(text) });
    }
    let (report, pass) = execute(config)?;
    let doc = envelope(config.command, opts.seed, pass, report, now());
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    write_output(opts, &text)?;
    Ok(Outcome { status: if pass { EXIT_PASS } else { EXIT_FAIL }, document: Some(text) })
}

/// Configures the global thread pool from `BLEPI_THREADS`.
pub fn init_threads() {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    if threads > 0 {
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    run(&RunConfig::from(cli)).status
}
