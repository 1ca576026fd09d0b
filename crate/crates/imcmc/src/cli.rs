//! Batch front end: run chains and stream samples, run check suites over a
//! kernel, or compare a sample stream against a reference marginal.
//!
//! Output is line-delimited JSON — one self-describing record per line, so
//! a stream stays parseable even if the process dies mid-run — and a run
//! with the same seed and config produces byte-identical output (timing
//! goes to standard error, never into the stream).
//!
//! Exit codes are a stable contract: 0 success, 1 a check or comparison
//! failed, 2 usage or config error, 3 runtime error.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::kernel::{check, step, CheckMode, KernelSpec};
use crate::registry::{build_kernel, build_oracle, RegistryError};
use crate::rng::RandomSource;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config, unknown ids: the invocation itself is wrong.
    #[error("{0}")]
    Usage(String),
    /// The invocation was fine but execution failed.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::OracleFailed { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "imcmc",
    about = "Involutive MCMC runner: sample, check kernels, compare to oracles"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a chain and write one JSON record per retained sample.
    Run(RunArgs),
    /// Run prior-seeded dynamic checks against a kernel.
    Check(CheckArgs),
    /// Compare a sample stream's discrete marginal against an oracle.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckModeArg {
    /// Trust the transform; no per-step checks.
    Off,
    /// Fail hard on the first check violation.
    Assert,
    /// Reject (and count) proposals that fail a check, then continue.
    Reject,
}

impl From<CheckModeArg> for CheckMode {
    fn from(m: CheckModeArg) -> Self {
        match m {
            CheckModeArg::Off => CheckMode::Off,
            CheckModeArg::Assert => CheckMode::Assert,
            CheckModeArg::Reject => CheckMode::RejectAndLog,
        }
    }
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Kernel id; repeat to run a cycle in the given order.
    #[arg(long = "kernel")]
    kernels: Vec<String>,
    /// Post-burn-in iterations (sweeps of the full cycle).
    #[arg(long)]
    iters: Option<u64>,
    /// Iterations discarded before retention starts.
    #[arg(long)]
    burn_in: Option<u64>,
    /// Keep every thin-th post-burn-in sample.
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    check_mode: Option<CheckModeArg>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Round-trip equality tolerance override for the dynamic checks.
    #[arg(long)]
    equality_tol: Option<f64>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Kernel id to check.
    kernel: String,
    /// Model id the kernel must target (confirms you grabbed the pair you
    /// meant; each kernel carries its model).
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    check_mode: Option<CheckModeArg>,
    #[arg(long)]
    equality_tol: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Sample stream produced by `run`.
    samples: PathBuf,
    /// Oracle id to compare against.
    #[arg(long)]
    oracle: String,
    /// Maximum acceptable total-variation distance.
    #[arg(long, default_value_t = 0.02)]
    threshold: f64,
}

/// A full run configuration; every field can come from the JSON config
/// file, and the corresponding flags win when both are present.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Optional model id; when present, every kernel in the cycle must
    /// target it.
    pub model: Option<String>,
    /// Kernel ids applied in order, once each per iteration.
    pub kernels: Vec<String>,
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub check_mode: Option<CheckModeArg>,
    pub out: Option<PathBuf>,
    pub equality_tol: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            kernels: Vec::new(),
            iterations: 0,
            burn_in: 0,
            thin: 1,
            seed: 0,
            check_mode: None,
            out: None,
            equality_tol: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("reading config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("parsing config {}: {e}", path.display())))
    }

    fn apply_flags(&mut self, args: &RunArgs) {
        if !args.kernels.is_empty() {
            self.kernels = args.kernels.clone();
        }
        if let Some(v) = args.iters {
            self.iterations = v;
        }
        if let Some(v) = args.burn_in {
            self.burn_in = v;
        }
        if let Some(v) = args.thin {
            self.thin = v;
        }
        if let Some(v) = args.seed {
            self.seed = v;
        }
        if let Some(v) = args.check_mode {
            self.check_mode = Some(v);
        }
        if let Some(v) = &args.out {
            self.out = Some(v.clone());
        }
        if let Some(v) = args.equality_tol {
            self.equality_tol = Some(v);
        }
    }

    /// Builds and validates the kernel cycle this config describes.
    pub fn build_cycle(&self) -> Result<Vec<KernelSpec>, CliError> {
        if self.kernels.is_empty() {
            return Err(CliError::Usage(
                "no kernel specified; pass --kernel or set \"kernels\" in the config".into(),
            ));
        }
        if self.thin == 0 {
            return Err(CliError::Usage("thin must be at least 1".into()));
        }
        let mut specs = Vec::with_capacity(self.kernels.len());
        for id in &self.kernels {
            let mut spec = build_kernel(id)?;
            if let Some(mode) = self.check_mode {
                spec.options.check_mode = mode.into();
            }
            if let Some(tol) = self.equality_tol {
                spec.options.equality_tol = tol;
            }
            specs.push(spec);
        }
        let model_name = specs[0].model.name().to_string();
        for spec in &specs[1..] {
            if spec.model.name() != model_name || spec.observations != specs[0].observations {
                return Err(CliError::Usage(format!(
                    "kernels in a cycle must share one model and dataset; `{}` targets `{}`, \
                     expected `{model_name}`",
                    spec.name,
                    spec.model.name(),
                )));
            }
        }
        if let Some(required) = &self.model {
            if *required != model_name {
                return Err(CliError::Usage(format!(
                    "config names model `{required}` but the kernels target `{model_name}`"
                )));
            }
        }
        Ok(specs)
    }
}

/// What a finished run did; the same numbers land in the stream's summary
/// record.
#[derive(Debug)]
pub struct RunSummary {
    pub steps: u64,
    pub retained: u64,
    pub accepted: Vec<u64>,
    pub check_failures: u64,
}

/// Runs the chain described by `cfg`, writing sample and summary records
/// to `out`. Each line is flushed as written so a truncated stream is
/// still line-valid.
pub fn cmd_run(cfg: &RunConfig, out: &mut dyn Write) -> Result<RunSummary, CliError> {
    let specs = cfg.build_cycle()?;
    let runtime = |e: &dyn std::fmt::Display| CliError::Runtime(e.to_string());
    let mut rng = RandomSource::from_seed(cfg.seed);
    let obs = &specs[0].observations;
    let (full, _) = specs[0]
        .model
        .trace_and_score(obs, &mut rng)
        .map_err(|e| runtime(&e))?;
    let mut state = full.without(&obs.key_set());

    let mut accepted = vec![0u64; specs.len()];
    let mut check_failures = 0u64;
    let mut retained = 0u64;
    let total = cfg.burn_in + cfg.iterations;
    for it in 0..total {
        let mut alphas = Vec::with_capacity(specs.len());
        let mut accepts = Vec::with_capacity(specs.len());
        let mut dims = Vec::with_capacity(specs.len());
        let mut log_model = f64::NEG_INFINITY;
        for (si, spec) in specs.iter().enumerate() {
            let (next, diag) = step(spec, &state, &mut rng).map_err(|e| runtime(&e))?;
            if diag.accepted {
                accepted[si] += 1;
            }
            if diag.check_failure.is_some() {
                check_failures += 1;
            }
            log_model = if diag.accepted {
                diag.log_model_new.unwrap_or(diag.log_model_cur)
            } else {
                diag.log_model_cur
            };
            alphas.push(diag.alpha);
            accepts.push(diag.accepted);
            dims.push(diag.reduced_dim);
            state = next;
        }
        if it >= cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
            retained += 1;
            let record = json!({
                "type": "sample",
                "iter": it,
                "trace": state.to_json(),
                "accepted": accepts,
                "alpha": alphas,
                "reduced_dim": dims,
                "log_model": log_model,
            });
            writeln!(out, "{record}").map_err(|e| runtime(&e))?;
            out.flush().map_err(|e| runtime(&e))?;
        }
    }
    let steps = total;
    let summary = json!({
        "type": "summary",
        "kernels": cfg.kernels,
        "model": specs[0].model.name(),
        "seed": cfg.seed,
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "retained": retained,
        "accepted": accepted,
        "accept_rate": accepted
            .iter()
            .map(|&a| if steps == 0 { 0.0 } else { a as f64 / steps as f64 })
            .collect::<Vec<_>>(),
        "check_failures": check_failures,
    });
    writeln!(out, "{summary}").map_err(|e| runtime(&e))?;
    out.flush().map_err(|e| runtime(&e))?;
    Ok(RunSummary { steps, retained, accepted, check_failures })
}

/// Tallied outcome of a check suite.
#[derive(Debug)]
pub struct CheckSummary {
    pub trials: u64,
    pub support_failures: u64,
    pub dimension_failures: u64,
    pub involution_failures: u64,
    pub faults: u64,
    pub first_details: Vec<String>,
}

impl CheckSummary {
    pub fn all_passed(&self) -> bool {
        self.support_failures == 0
            && self.dimension_failures == 0
            && self.involution_failures == 0
            && self.faults == 0
    }
}

/// Runs `trials` prior-seeded dynamic checks against a kernel and tallies
/// failures per check. A trial that faults outright (the transform or a
/// program panicking territory is still an error return here) counts as a
/// detection too, in its own bucket.
pub fn cmd_check(
    spec: &KernelSpec,
    trials: u64,
    seed: u64,
    out: &mut dyn Write,
) -> Result<CheckSummary, CliError> {
    let mut rng = RandomSource::from_seed(seed);
    let mut summary = CheckSummary {
        trials,
        support_failures: 0,
        dimension_failures: 0,
        involution_failures: 0,
        faults: 0,
        first_details: Vec::new(),
    };
    for _ in 0..trials {
        match check(spec, &mut rng) {
            Ok(report) => {
                if !report.support_ok {
                    summary.support_failures += 1;
                }
                if !report.dimension_ok {
                    summary.dimension_failures += 1;
                }
                if !report.involution_ok {
                    summary.involution_failures += 1;
                }
                if !report.passed() && summary.first_details.len() < 5 {
                    summary.first_details.extend(report.detail);
                }
            }
            Err(e) => {
                summary.faults += 1;
                if summary.first_details.len() < 5 {
                    summary.first_details.push(format!("fault: {e}"));
                }
            }
        }
    }
    let io_err = |e: std::io::Error| CliError::Runtime(e.to_string());
    writeln!(out, "kernel: {}", spec.name).map_err(io_err)?;
    writeln!(out, "trials: {trials}").map_err(io_err)?;
    for (label, failures) in [
        ("support", summary.support_failures),
        ("dimension", summary.dimension_failures),
        ("involution", summary.involution_failures),
    ] {
        writeln!(out, "{label}: {} passed, {failures} failed", trials - failures)
            .map_err(io_err)?;
    }
    writeln!(out, "faults: {}", summary.faults).map_err(io_err)?;
    for d in &summary.first_details {
        writeln!(out, "  - {d}").map_err(io_err)?;
    }
    writeln!(out, "verdict: {}", if summary.all_passed() { "PASS" } else { "FAIL" })
        .map_err(io_err)?;
    Ok(summary)
}

/// Outcome of comparing a sample stream against an oracle marginal.
#[derive(Debug)]
pub struct CompareSummary {
    pub samples: u64,
    pub tv: f64,
    pub threshold: f64,
}

impl CompareSummary {
    pub fn passed(&self) -> bool {
        self.tv <= self.threshold
    }
}

/// Reads a `run` output stream and measures the total-variation distance
/// between the empirical marginal at the oracle's address and the oracle
/// itself.
pub fn cmd_compare(
    samples_path: &Path,
    oracle_id: &str,
    threshold: f64,
    out: &mut dyn Write,
) -> Result<CompareSummary, CliError> {
    let oracle = build_oracle(oracle_id)?;
    let file = File::open(samples_path)
        .map_err(|e| CliError::Usage(format!("opening {}: {e}", samples_path.display())))?;
    let addr_key = oracle.address.to_string();
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: serde_json::Value = serde_json::from_str(&line).map_err(|e| {
            CliError::Usage(format!(
                "{}:{}: not a JSON record: {e}",
                samples_path.display(),
                lineno + 1
            ))
        })?;
        if record.get("type").and_then(|t| t.as_str()) != Some("sample") {
            continue;
        }
        let value = record
            .get("trace")
            .and_then(|t| t.get(&addr_key))
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{}:{}: sample has no `{addr_key}` in its trace",
                    samples_path.display(),
                    lineno + 1
                ))
            })?;
        *counts.entry(value.to_string()).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(CliError::Usage(format!(
            "{} contains no sample records",
            samples_path.display()
        )));
    }
    // TV over the union of observed and oracle labels.
    let mut labels: Vec<&str> = oracle.support.iter().map(|(l, _)| l.as_str()).collect();
    for l in counts.keys() {
        if !labels.contains(&l.as_str()) {
            labels.push(l);
        }
    }
    let tv = 0.5
        * labels
            .iter()
            .map(|l| {
                let emp = counts.get(*l).copied().unwrap_or(0) as f64 / total as f64;
                (emp - oracle.prob(l)).abs()
            })
            .sum::<f64>();
    let summary = CompareSummary { samples: total, tv, threshold };
    let record = json!({
        "type": "compare",
        "oracle": oracle_id,
        "address": addr_key,
        "samples": total,
        "tv": tv,
        "threshold": threshold,
        "pass": summary.passed(),
    });
    writeln!(out, "{record}").map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(summary)
}

fn dispatch(cli: Cli) -> i32 {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = match &args.config {
                Some(path) => match RunConfig::from_json_file(path) {
                    Ok(c) => c,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return e.exit_code();
                    }
                },
                None => RunConfig::default(),
            };
            cfg.apply_flags(&args);
            let started = Instant::now();
            let result = match &cfg.out {
                Some(path) => match File::create(path) {
                    Ok(mut f) => cmd_run(&cfg, &mut f),
                    Err(e) => {
                        eprintln!("error: creating {}: {e}", path.display());
                        return EXIT_USAGE;
                    }
                },
                None => cmd_run(&cfg, &mut std::io::stdout().lock()),
            };
            match result {
                Ok(summary) => {
                    eprintln!(
                        "run: {} steps, {} retained, {} check failures, {:.3}s",
                        summary.steps,
                        summary.retained,
                        summary.check_failures,
                        started.elapsed().as_secs_f64()
                    );
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Check(args) => {
            if args.trials == 0 {
                eprintln!("warning: 0 trials requested; the check is vacuous");
            }
            let mut spec = match build_kernel(&args.kernel) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            if let Some(required) = &args.model {
                if required != spec.model.name() {
                    eprintln!(
                        "error: kernel `{}` targets model `{}`, not `{required}`",
                        args.kernel,
                        spec.model.name()
                    );
                    return EXIT_USAGE;
                }
            }
            if let Some(mode) = args.check_mode {
                spec.options.check_mode = mode.into();
            }
            if let Some(tol) = args.equality_tol {
                spec.options.equality_tol = tol;
            }
            match cmd_check(&spec, args.trials, args.seed, &mut std::io::stdout().lock()) {
                Ok(summary) if summary.all_passed() => EXIT_OK,
                Ok(_) => EXIT_FAILED,
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Compare(args) => {
            match cmd_compare(
                &args.samples,
                &args.oracle,
                args.threshold,
                &mut std::io::stdout().lock(),
            ) {
                Ok(summary) if summary.passed() => EXIT_OK,
                Ok(summary) => {
                    eprintln!(
                        "compare: TV {:.6} exceeds threshold {:.6} over {} samples",
                        summary.tv, summary.threshold, summary.samples
                    );
                    EXIT_FAILED
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    }
}

/// Entry point for the binary: parses arguments and returns the process
/// exit code.
pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => dispatch(cli),
        Err(e) => {
            // clap renders its own help/usage text; --help and --version
            // exit zero like any well-behaved tool.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_string(cfg: &RunConfig) -> (RunSummary, String) {
        let mut buf = Vec::new();
        let summary = cmd_run(cfg, &mut buf).unwrap();
        (summary, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn identical_seed_and_config_produce_identical_bytes() {
        let cfg = RunConfig {
            kernels: vec!["toy-split-merge".into(), "toy-walk".into()],
            iterations: 200,
            burn_in: 10,
            seed: 99,
            ..RunConfig::default()
        };
        let (_, first) = run_to_string(&cfg);
        let (_, second) = run_to_string(&cfg);
        assert_eq!(first, second);
        assert!(first.lines().count() == 201); // 200 samples + summary
    }

    #[test]
    fn zero_iterations_emit_only_the_summary() {
        let cfg = RunConfig {
            kernels: vec!["flip".into()],
            ..RunConfig::default()
        };
        let (summary, text) = run_to_string(&cfg);
        assert_eq!(summary.retained, 0);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1);
        let record: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(record["type"], "summary");
        assert_eq!(record["retained"], 0);
    }

    #[test]
    fn every_line_parses_independently_and_carries_diagnostics() {
        let cfg = RunConfig {
            kernels: vec!["gmm-split-merge".into()],
            iterations: 50,
            seed: 3,
            ..RunConfig::default()
        };
        let (_, text) = run_to_string(&cfg);
        let mut saw_dim = false;
        for line in text.lines() {
            let record: serde_json::Value = serde_json::from_str(line).unwrap();
            if record["type"] == "sample" {
                assert!(record["trace"].is_object());
                if record["reduced_dim"][0].is_u64() {
                    saw_dim = true;
                }
            }
        }
        assert!(saw_dim, "sample records carry the reduced Jacobian size");
    }

    #[test]
    fn thinning_keeps_every_nth_sample() {
        let cfg = RunConfig {
            kernels: vec!["flip".into()],
            iterations: 10,
            thin: 3,
            ..RunConfig::default()
        };
        let (summary, text) = run_to_string(&cfg);
        assert_eq!(summary.retained, 4); // iterations 0,3,6,9
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn cycles_must_share_a_model() {
        let cfg = RunConfig {
            kernels: vec!["toy-split-merge".into(), "flip".into()],
            ..RunConfig::default()
        };
        let err = cfg.build_cycle().unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        assert!(err.to_string().contains("share one model"));
    }

    #[test]
    fn unknown_kernel_is_a_usage_error_naming_alternatives() {
        let cfg = RunConfig { kernels: vec!["bogus".into()], ..RunConfig::default() };
        let err = cfg.build_cycle().unwrap_err();
        assert!(matches!(&err, CliError::Usage(m) if m.contains("toy-split-merge")));
    }

    #[test]
    fn flags_override_config_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"kernels": ["flip"], "iterations": 5, "seed": 1}"#,
        )
        .unwrap();
        let mut cfg = RunConfig::from_json_file(&path).unwrap();
        let args = RunArgs { seed: Some(42), iters: Some(7), ..RunArgs::default() };
        cfg.apply_flags(&args);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.iterations, 7);
        assert_eq!(cfg.kernels, vec!["flip".to_string()]);
    }

    #[test]
    fn malformed_and_unknown_config_fields_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"kernels": ["flip"], "iterationz": 5}"#).unwrap();
        let err = RunConfig::from_json_file(&path).unwrap_err();
        assert!(matches!(&err, CliError::Usage(m) if m.contains("iterationz")));
    }

    #[test]
    fn check_reports_all_passing_for_a_correct_kernel() {
        let spec = build_kernel("categorical-walk").unwrap();
        let mut buf = Vec::new();
        let summary = cmd_check(&spec, 50, 7, &mut buf).unwrap();
        assert!(summary.all_passed());
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("involution: 50 passed, 0 failed"));
        assert!(text.contains("verdict: PASS"));
    }

    #[test]
    fn check_counts_failures_for_a_buggy_kernel() {
        let spec = build_kernel("toy-sqrt-merge").unwrap();
        let mut buf = Vec::new();
        let summary = cmd_check(&spec, 200, 7, &mut buf).unwrap();
        assert!(!summary.all_passed());
        assert!(String::from_utf8(buf).unwrap().contains("verdict: FAIL"));
    }

    #[test]
    fn compare_passes_a_long_flip_run_and_fails_a_short_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.jsonl");
        let cfg = RunConfig {
            kernels: vec!["flip".into()],
            iterations: 20_000,
            burn_in: 100,
            seed: 5,
            ..RunConfig::default()
        };
        let mut f = File::create(&path).unwrap();
        cmd_run(&cfg, &mut f).unwrap();
        let mut buf = Vec::new();
        let summary = cmd_compare(&path, "coin", 0.02, &mut buf).unwrap();
        assert!(summary.passed(), "tv = {}", summary.tv);
        let record: serde_json::Value =
            serde_json::from_str(String::from_utf8(buf).unwrap().lines().next().unwrap())
                .unwrap();
        assert_eq!(record["pass"], true);

        // An absurdly tight threshold fails with the distance reported.
        let mut buf = Vec::new();
        let summary = cmd_compare(&path, "coin", 1e-9, &mut buf).unwrap();
        assert!(!summary.passed());
    }

    #[test]
    fn compare_rejects_streams_without_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let err = cmd_compare(&path, "coin", 0.02, &mut Vec::new()).unwrap_err();
        assert!(matches!(&err, CliError::Usage(m) if m.contains("no sample records")));
    }
}
