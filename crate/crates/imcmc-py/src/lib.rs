//! Python bindings for the involutive MCMC engine.
//!
//! The boundary is deliberately thin: traces, diagnostics, and summaries
//! cross as JSON strings in the same wire format the command-line tool
//! emits, so a Python caller sees exactly what a shell caller would see.
//! The one stateful piece — a running chain — lives on the Rust side
//! behind the [`Chain`] class so its random stream never crosses the
//! boundary and reproducibility stays a Rust-side guarantee.

use imcmc::kernel::{check, evaluate_proposal, step, CheckMode, KernelSpec};
use imcmc::registry;
use imcmc::rng::RandomSource;
use imcmc::Trace;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::json;

fn usage(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fault(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_mode(name: &str) -> PyResult<CheckMode> {
    match name {
        "off" => Ok(CheckMode::Off),
        "assert" => Ok(CheckMode::Assert),
        "reject" => Ok(CheckMode::RejectAndLog),
        other => Err(usage(format!(
            "unknown check mode {other:?}; expected \"off\", \"assert\", or \"reject\""
        ))),
    }
}

/// Every registered kernel id, sorted.
#[pyfunction]
fn kernel_ids() -> Vec<String> {
    registry::kernel_ids().into_iter().map(String::from).collect()
}

/// Every registered oracle id, sorted.
#[pyfunction]
fn oracle_ids() -> Vec<String> {
    registry::oracle_ids().into_iter().map(String::from).collect()
}

/// Exact marginal for a registered oracle, as a JSON object
/// `{"address": …, "support": [[value-label, probability], …]}`.
#[pyfunction]
fn oracle_marginal(id: &str) -> PyResult<String> {
    let oracle = registry::build_oracle(id).map_err(usage)?;
    Ok(json!({
        "address": oracle.address.to_string(),
        "support": oracle.support,
    })
    .to_string())
}

/// Run the kernel soundness checks against prior-seeded states and
/// summarize what they found, as a JSON object. `passed` is true only if
/// every trial came back clean.
#[pyfunction]
#[pyo3(signature = (id, trials = 1000, seed = 0))]
fn check_kernel(id: &str, trials: u64, seed: u64) -> PyResult<String> {
    let spec = registry::build_kernel(id).map_err(usage)?;
    let mut rng = RandomSource::from_seed(seed);
    let (mut support, mut dimension, mut involution, mut faults) = (0u64, 0u64, 0u64, 0u64);
    let mut first_details: Vec<String> = Vec::new();
    for _ in 0..trials {
        match check(&spec, &mut rng) {
            Ok(report) => {
                support += u64::from(!report.support_ok);
                dimension += u64::from(!report.dimension_ok);
                involution += u64::from(!report.involution_ok);
                if !report.passed() && first_details.len() < 5 {
                    first_details.extend(report.detail.iter().take(1).cloned());
                }
            }
            Err(e) => {
                faults += 1;
                if first_details.len() < 5 {
                    first_details.push(e.to_string());
                }
            }
        }
    }
    Ok(json!({
        "kernel": spec.name,
        "trials": trials,
        "support_failures": support,
        "dimension_failures": dimension,
        "involution_failures": involution,
        "faults": faults,
        "first_details": first_details,
        "passed": support + dimension + involution + faults == 0,
    })
    .to_string())
}

/// Score a single proposal for a registered kernel from explicit latent
/// and auxiliary traces (both JSON, in trace wire format). Returns the
/// full acceptance breakdown plus the proposed traces.
#[pyfunction]
fn evaluate(id: &str, latents_json: &str, aux_json: &str) -> PyResult<String> {
    let spec = registry::build_kernel(id).map_err(usage)?;
    let latents = Trace::from_json_str(latents_json).map_err(usage)?;
    let aux = Trace::from_json_str(aux_json).map_err(usage)?;
    let p = evaluate_proposal(&spec, &latents, &aux).map_err(fault)?;
    Ok(json!({
        "alpha": p.alpha,
        "log_model_cur": p.log_model_cur,
        "log_model_new": p.log_model_new,
        "log_aux_cur": p.log_aux_cur,
        "log_aux_new": p.log_aux_new,
        "log_abs_det": p.log_abs_det,
        "reduced_dim": p.reduced_dim,
        "new_latents": p.new_latents.to_json(),
        "new_aux": p.new_aux.to_json(),
    })
    .to_string())
}

/// A Markov chain cycling through one or more registered kernels.
///
/// All kernels must target the same model and observations (the registry
/// pairs each kernel with its canonical dataset, so any ids drawn from one
/// model family compose). The initial state is a prior draw conditioned on
/// the observations, taken from the chain's own seeded stream: the same
/// constructor arguments always produce the same chain.
#[pyclass]
struct Chain {
    specs: Vec<KernelSpec>,
    rng: RandomSource,
    state: Trace,
    accepted: Vec<u64>,
    sweeps: u64,
    check_failures: u64,
}

impl Chain {
    fn advance(&mut self) -> PyResult<Vec<serde_json::Value>> {
        let mut records = Vec::with_capacity(self.specs.len());
        for (i, spec) in self.specs.iter().enumerate() {
            let (next, diag) = step(spec, &self.state, &mut self.rng).map_err(fault)?;
            self.accepted[i] += u64::from(diag.accepted);
            self.check_failures += u64::from(diag.check_failure.is_some());
            records.push(json!({
                "kernel": diag.kernel,
                "accepted": diag.accepted,
                "alpha": diag.alpha,
                "reduced_dim": diag.reduced_dim,
            }));
            self.state = next;
        }
        self.sweeps += 1;
        Ok(records)
    }

    fn summary_json(&self) -> String {
        let rates: Vec<f64> = self
            .accepted
            .iter()
            .map(|&a| if self.sweeps == 0 { 0.0 } else { a as f64 / self.sweeps as f64 })
            .collect();
        json!({
            "kernels": self.specs.iter().map(|s| s.name.clone()).collect::<Vec<_>>(),
            "model": self.specs[0].model.name(),
            "sweeps": self.sweeps,
            "accepted": self.accepted,
            "accept_rate": rates,
            "check_failures": self.check_failures,
            "state": self.state.to_json(),
        })
        .to_string()
    }
}

#[pymethods]
impl Chain {
    #[new]
    #[pyo3(signature = (kernels, seed = 0, check_mode = "off"))]
    fn new(kernels: Vec<String>, seed: u64, check_mode: &str) -> PyResult<Self> {
        if kernels.is_empty() {
            return Err(usage("at least one kernel id is required"));
        }
        let mode = parse_mode(check_mode)?;
        let mut specs = Vec::with_capacity(kernels.len());
        for id in &kernels {
            let mut spec = registry::build_kernel(id).map_err(usage)?;
            spec.options.check_mode = mode;
            specs.push(spec);
        }
        for spec in &specs[1..] {
            if spec.model.name() != specs[0].model.name()
                || spec.observations != specs[0].observations
            {
                return Err(usage(format!(
                    "kernels {:?} and {:?} target different models",
                    specs[0].name, spec.name
                )));
            }
        }
        let mut rng = RandomSource::from_seed(seed);
        let (full, _) = specs[0]
            .model
            .trace_and_score(&specs[0].observations, &mut rng)
            .map_err(fault)?;
        let state = full.without(&specs[0].observations.key_set());
        let n = specs.len();
        Ok(Self {
            specs,
            rng,
            state,
            accepted: vec![0; n],
            sweeps: 0,
            check_failures: 0,
        })
    }

    /// Current latent state as a JSON trace.
    fn state_json(&self) -> String {
        self.state.to_json_string()
    }

    /// Replace the latent state with a trace parsed from JSON. The scores
    /// are recomputed on the next step, so handing the chain an impossible
    /// state surfaces as an error there, not here.
    fn set_state_json(&mut self, trace_json: &str) -> PyResult<()> {
        self.state = Trace::from_json_str(trace_json).map_err(usage)?;
        Ok(())
    }

    /// Apply every kernel once, in order. Returns one diagnostics record
    /// per kernel as a JSON array.
    fn sweep(&mut self) -> PyResult<String> {
        let records = self.advance()?;
        Ok(serde_json::Value::Array(records).to_string())
    }

    /// Run `sweeps` full cycles and return the cumulative summary (the
    /// same JSON shape as [`Chain::summary`]).
    fn run(&mut self, sweeps: u64) -> PyResult<String> {
        for _ in 0..sweeps {
            self.advance()?;
        }
        Ok(self.summary_json())
    }

    /// Cumulative summary: per-kernel acceptance counts and rates, check
    /// failures, and the current state.
    fn summary(&self) -> String {
        self.summary_json()
    }
}

#[pymodule]
fn imcmc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Chain>()?;
    m.add_function(wrap_pyfunction!(kernel_ids, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_ids, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(check_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
