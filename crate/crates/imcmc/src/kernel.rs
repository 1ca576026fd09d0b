//! The involutive kernel engine: proposals, acceptance, checking, chains.
//!
//! A kernel bundles a model, an auxiliary program, and a trace transform.
//! One step samples auxiliary randomness `y` for the current latents `x`,
//! pushes `(x, y)` through the transform to get `(x', y')`, and accepts with
//! probability
//!
//! ```text
//! alpha = min(1, exp(log p(x'+obs) - log p(x+obs)
//!                  + log q[x'](y') - log q[x](y)
//!                  + log |det J|))
//! ```
//!
//! A `-inf` appearing in the proposal-side terms simply drives `alpha` to
//! zero — out-of-support proposals reject themselves without any user-side
//! annotations. A `-inf` in the current-state terms means the chain is
//! standing somewhere impossible, which is an error, and a NaN anywhere in
//! the exponent is reported as [`KernelError::InvalidAcceptance`] rather
//! than silently biasing the chain.
//!
//! Because user-supplied transforms are trusted with the measure-theoretic
//! bookkeeping, the engine can re-verify them dynamically: with checking
//! enabled, each viable proposal is pushed back through the transform, and
//! the round trip must restore `(x, y)` within tolerance while the two log
//! determinants cancel. Failures either abort ([`CheckMode::Assert`]) or
//! reject the proposal and report it ([`CheckMode::RejectAndLog`]), so a
//! buggy kernel degrades into a correct-but-lazier sampler instead of a
//! subtly wrong one.

use crate::model::{naive_trace_update, Auxiliary, Model, ModelError, UpdateError};
use crate::rng::RandomSource;
use crate::trace::Trace;
use crate::transform::{CopyMode, Transform, TransformError};

/// How much dynamic verification a kernel performs per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    /// Trust the transform; no round-trip checks.
    Off,
    /// Verify every viable proposal and fail hard on the first violation.
    Assert,
    /// Verify every viable proposal; reject and report violations, then
    /// carry on.
    RejectAndLog,
}

/// Tunable kernel behavior.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct KernelOptions {
    pub check_mode: CheckMode,
    /// Tolerance for trace equality in round-trip checks.
    pub equality_tol: f64,
    /// Tolerance for the determinant antisymmetry check.
    pub det_tol: f64,
    /// Treat the transform's model output as a sparse delta, implicitly
    /// copying everything it does not write.
    pub implicit_copy: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            check_mode: CheckMode::Off,
            equality_tol: 1e-9,
            det_tol: 1e-6,
            implicit_copy: false,
        }
    }
}

/// A complete involutive kernel over one model.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub name: String,
    pub model: Model,
    pub auxiliary: Auxiliary,
    pub transform: Transform,
    pub observations: Trace,
    pub options: KernelOptions,
}

impl KernelSpec {
    pub fn new(
        model: Model,
        auxiliary: Auxiliary,
        transform: Transform,
        observations: Trace,
    ) -> Self {
        let name = transform.name().to_string();
        KernelSpec { name, model, auxiliary, transform, observations, options: KernelOptions::default() }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_options(mut self, options: KernelOptions) -> Self {
        self.options = options;
        self
    }

    fn copy_mode(&self) -> CopyMode {
        if self.options.implicit_copy {
            CopyMode::ImplicitModel
        } else {
            CopyMode::Explicit
        }
    }
}

/// Which dynamic check a proposal failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckFailureKind {
    /// The transform (or trace update) was structurally ill-formed.
    Structural,
    /// Re-applying the transform did not restore the model latents.
    RoundTripModel,
    /// Re-applying the transform did not restore the auxiliary trace.
    RoundTripAux,
    /// The forward and return log determinants do not cancel.
    DetAntisymmetry,
}

/// A report of one failed dynamic check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckFailure {
    pub kernel: String,
    pub kind: CheckFailureKind,
    pub detail: String,
}

/// The outcome of one prior-seeded dynamic check trial (see [`check`]).
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckReport {
    /// The transform's outputs are structurally valid traces of the model
    /// and auxiliary programs. Out-of-support *values* do not fail this
    /// check — proposing them is ordinary rejection behavior — but address
    /// sets the programs could never produce (a misspelled or missing key,
    /// a value of the wrong kind) do.
    pub support_ok: bool,
    /// The transform ran to completion with as many continuous expression
    /// reads as writes (a square Jacobian).
    pub dimension_ok: bool,
    /// Applying the transform twice restored the original traces within
    /// the kernel's equality tolerance.
    pub involution_ok: bool,
    /// One explanatory entry per failed check.
    pub detail: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.support_ok && self.dimension_ok && self.involution_ok
    }
}

/// Everything that can go wrong while stepping a kernel.
#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    /// The chain's current state has zero density or cannot be scored: no
    /// acceptance ratio is defined anywhere from here.
    #[error("invalid current state: {0}")]
    InvalidState(String),
    /// The acceptance exponent evaluated to NaN.
    #[error("invalid acceptance probability: {0}")]
    InvalidAcceptance(String),
    /// The transform failed structurally while building the proposal.
    #[error("transform failed: {0}")]
    Transform(#[from] TransformError),
    /// Scoring the proposal faulted (not a zero density, a genuine fault).
    #[error("scoring the proposal failed: {0}")]
    Model(#[from] ModelError),
    /// Applying the transform's delta to the trace failed.
    #[error("trace update failed: {0}")]
    Update(#[from] UpdateError),
    /// A dynamic check failed under [`CheckMode::Assert`].
    #[error("kernel check failed ({kind:?}): {}", .failure.detail)]
    CheckFailed {
        kind: CheckFailureKind,
        failure: CheckFailure,
    },
    /// The kernels of a cycle disagree on model or observations.
    #[error("cycle is inconsistent: {0}")]
    CycleMismatch(String),
}

impl KernelError {
    /// Structural errors concern the proposal, not the chain state, so
    /// [`CheckMode::RejectAndLog`] may convert them into rejections.
    pub(crate) fn is_structural(&self) -> bool {
        matches!(
            self,
            KernelError::Transform(_) | KernelError::Model(_) | KernelError::Update(_)
        )
    }
}

/// A fully evaluated proposal, before any accept/reject decision.
#[derive(Debug)]
pub struct Proposal {
    pub new_latents: Trace,
    pub new_aux: Trace,
    pub alpha: f64,
    pub log_model_cur: f64,
    pub log_model_new: f64,
    pub log_aux_cur: f64,
    pub log_aux_new: f64,
    pub log_abs_det: f64,
    pub reduced_dim: usize,
}

/// Evaluates the transform and every acceptance term for `(latents, aux)`.
///
/// This is a pure function of its arguments; the sampling step and the
/// exhaustive verification oracle both go through it, so there is exactly
/// one implementation of the acceptance probability.
pub fn evaluate_proposal(
    spec: &KernelSpec,
    latents: &Trace,
    aux: &Trace,
) -> Result<Proposal, KernelError> {
    let full = latents
        .merge(&spec.observations)
        .map_err(|e| KernelError::InvalidState(e.to_string()))?;
    let log_model_cur = spec
        .model
        .score(&full)
        .map_err(|e| KernelError::InvalidState(e.to_string()))?;
    if log_model_cur == f64::NEG_INFINITY {
        return Err(KernelError::InvalidState(
            "current latents have zero density under the model".into(),
        ));
    }
    let log_aux_cur = spec
        .auxiliary
        .score(latents, aux)
        .map_err(|e| KernelError::InvalidState(e.to_string()))?;
    if log_aux_cur == f64::NEG_INFINITY {
        return Err(KernelError::InvalidState(
            "current auxiliary trace has zero density".into(),
        ));
    }

    let moved = spec.transform.apply(latents, &spec.observations, aux, spec.copy_mode())?;
    let reduced_dim = moved.reduced_dim();
    let (new_latents, log_model_new) = if spec.options.implicit_copy {
        let (new_latents, ratio) =
            naive_trace_update(&spec.model, latents, &spec.observations, &moved.model_out)?;
        (new_latents, log_model_cur + ratio)
    } else {
        let new_full = moved
            .model_out
            .merge(&spec.observations)
            .map_err(|e| KernelError::Transform(TransformError::ObservationWrite {
                addr: match e {
                    crate::trace::TraceError::OverlappingKeys(addr) => addr,
                    _ => unreachable!("merge only fails on overlap"),
                },
            }))?;
        let score = spec.model.score(&new_full)?;
        (moved.model_out, score)
    };
    let log_aux_new = spec.auxiliary.score(&new_latents, &moved.aux_out)?;

    let log_det = moved.log_abs_det;
    let total = (log_model_new - log_model_cur) + (log_aux_new - log_aux_cur) + log_det;
    if total.is_nan() {
        return Err(KernelError::InvalidAcceptance(format!(
            "acceptance exponent is NaN (model {log_model_new} - {log_model_cur}, \
             aux {log_aux_new} - {log_aux_cur}, log|det| {log_det})"
        )));
    }
    let alpha = total.exp().min(1.0);
    Ok(Proposal {
        new_latents,
        new_aux: moved.aux_out,
        alpha,
        log_model_cur,
        log_model_new,
        log_aux_cur,
        log_aux_new,
        log_abs_det: log_det,
        reduced_dim,
    })
}

/// Per-step record of what a kernel computed and decided.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StepDiagnostics {
    pub kernel: String,
    pub accepted: bool,
    pub alpha: f64,
    pub log_model_cur: f64,
    pub log_model_new: Option<f64>,
    pub log_aux_cur: f64,
    pub log_aux_new: Option<f64>,
    pub log_abs_det: Option<f64>,
    /// Side length of the reduced Jacobian for this proposal.
    pub reduced_dim: Option<usize>,
    pub check_failure: Option<CheckFailure>,
}

/// Runs the round-trip involution checks on an evaluated proposal. Also
/// used by the exhaustive oracle so checked kernels are simulated with the
/// exact same check logic.
pub(crate) fn run_checks(
    spec: &KernelSpec,
    latents: &Trace,
    aux: &Trace,
    proposal: &Proposal,
) -> Result<(), CheckFailure> {
    let fail = |kind, detail: String| CheckFailure { kernel: spec.name.clone(), kind, detail };
    let back = spec
        .transform
        .apply(&proposal.new_latents, &spec.observations, &proposal.new_aux, spec.copy_mode())
        .map_err(|e| fail(CheckFailureKind::Structural, format!("return transform: {e}")))?;
    let model_back = if spec.options.implicit_copy {
        naive_trace_update(&spec.model, &proposal.new_latents, &spec.observations, &back.model_out)
            .map_err(|e| fail(CheckFailureKind::Structural, format!("return update: {e}")))?
            .0
    } else {
        back.model_out
    };
    let tol = spec.options.equality_tol;
    if !model_back.equal_within(latents, tol) {
        let diff = model_back.diff(latents, tol);
        return Err(fail(
            CheckFailureKind::RoundTripModel,
            format!("latents not restored; first difference at {:?}", diff.first()),
        ));
    }
    if !back.aux_out.equal_within(aux, tol) {
        let diff = back.aux_out.diff(aux, tol);
        return Err(fail(
            CheckFailureKind::RoundTripAux,
            format!("auxiliary trace not restored; first difference at {:?}", diff.first()),
        ));
    }
    let det_sum = proposal.log_abs_det + back.log_abs_det;
    if det_sum.abs() > spec.options.det_tol || det_sum.is_nan() {
        return Err(fail(
            CheckFailureKind::DetAntisymmetry,
            format!(
                "log determinants do not cancel: {} + {} = {det_sum}",
                proposal.log_abs_det, back.log_abs_det
            ),
        ));
    }
    Ok(())
}

/// Runs one randomized involution test on traces simulated from the prior.
///
/// The trial draws a full model trace — latents and simulated observations
/// together — from the prior, draws an auxiliary trace for those latents,
/// and pushes both through the transform. Three properties are checked:
///
/// 1. **Support**: the outputs are structurally valid traces of the model
///    and auxiliary programs. Out-of-support values are fine (proposing
///    them is normal rejection behavior); impossible address sets are not.
/// 2. **Dimension**: the transform runs to completion with a square
///    reduced Jacobian.
/// 3. **Involution**: a second transform application restores the inputs
///    within `equality_tol`.
///
/// Because test cases come from the prior, repeated trials with fresh seeds
/// probe different control-flow paths without needing data or a warm start.
pub fn check(spec: &KernelSpec, rng: &mut RandomSource) -> Result<CheckReport, KernelError> {
    let mut report = CheckReport {
        support_ok: true,
        dimension_ok: true,
        involution_ok: true,
        detail: Vec::new(),
    };

    // A prior draw with zero density (e.g. a model that rejects internally)
    // is not a usable test case; try again a bounded number of times.
    let mut full = Trace::empty();
    let mut found = false;
    for _ in 0..100 {
        let (t, s) = spec.model.trace_and_score(&Trace::empty(), rng)?;
        if s > f64::NEG_INFINITY {
            full = t;
            found = true;
            break;
        }
    }
    if !found {
        return Err(KernelError::InvalidState(
            "could not draw a positive-density prior trace in 100 attempts".into(),
        ));
    }
    let obs_keys = spec.observations.key_set();
    let sim_obs = full.restrict(&obs_keys);
    let latents = full.without(&obs_keys);
    let (aux, aux_score) = spec.auxiliary.trace_and_score(&latents, rng)?;
    debug_assert!(aux_score > f64::NEG_INFINITY);

    // Forward transform; failures here are dimension-check territory (the
    // square-Jacobian audit happens while the determinant is assembled).
    let moved = match spec.transform.apply(&latents, &sim_obs, &aux, spec.copy_mode()) {
        Ok(m) => m,
        Err(e) => {
            report.dimension_ok = false;
            report.detail.push(format!("transform failed: {e}"));
            return Ok(report);
        }
    };
    let new_latents = if spec.options.implicit_copy {
        match naive_trace_update(&spec.model, &latents, &sim_obs, &moved.model_out) {
            Ok((t, _)) => t,
            Err(e) => {
                // The delta names addresses the model cannot absorb: the
                // proposed trace is structurally invalid.
                report.support_ok = false;
                report.detail.push(format!("trace update rejected the output: {e}"));
                return Ok(report);
            }
        }
    } else {
        moved.model_out.clone()
    };

    let new_full = match new_latents.merge(&sim_obs) {
        Ok(t) => t,
        Err(e) => {
            report.support_ok = false;
            report.detail.push(format!("output collides with observations: {e}"));
            return Ok(report);
        }
    };
    let model_report = spec.model.score_report(&new_full)?;
    if let Some(why) = model_report.structural_mismatch {
        report.support_ok = false;
        report.detail.push(format!("proposed model trace is malformed: {why}"));
    }
    let aux_report = spec.auxiliary.score_report(&new_latents, &moved.aux_out)?;
    if let Some(why) = aux_report.structural_mismatch {
        report.support_ok = false;
        report.detail.push(format!("output auxiliary trace is malformed: {why}"));
    }

    // Round trip. Structural collapse on the way back is an involution
    // failure too: f maps this point somewhere it cannot map back from.
    let back = match spec.transform.apply(&new_latents, &sim_obs, &moved.aux_out, spec.copy_mode())
    {
        Ok(b) => b,
        Err(e) => {
            report.involution_ok = false;
            report.detail.push(format!("return transform failed: {e}"));
            return Ok(report);
        }
    };
    let model_back = if spec.options.implicit_copy {
        match naive_trace_update(&spec.model, &new_latents, &sim_obs, &back.model_out) {
            Ok((t, _)) => t,
            Err(e) => {
                report.involution_ok = false;
                report.detail.push(format!("return trace update failed: {e}"));
                return Ok(report);
            }
        }
    } else {
        back.model_out
    };
    let tol = spec.options.equality_tol;
    if !model_back.equal_within(&latents, tol) {
        let diff = model_back.diff(&latents, tol);
        report.involution_ok = false;
        report.detail.push(format!(
            "double application changed the model trace; first difference at {:?}",
            diff.first()
        ));
    }
    if !back.aux_out.equal_within(&aux, tol) {
        let diff = back.aux_out.diff(&aux, tol);
        report.involution_ok = false;
        report.detail.push(format!(
            "double application changed the auxiliary trace; first difference at {:?}",
            diff.first()
        ));
    }
    Ok(report)
}

fn rejected_diagnostics(spec: &KernelSpec, log_model_cur: f64, log_aux_cur: f64) -> StepDiagnostics {
    StepDiagnostics {
        kernel: spec.name.clone(),
        accepted: false,
        alpha: 0.0,
        log_model_cur,
        log_model_new: None,
        log_aux_cur,
        log_aux_new: None,
        log_abs_det: None,
        reduced_dim: None,
        check_failure: None,
    }
}

/// Advances the chain by one application of `spec`.
///
/// Exactly one acceptance uniform is consumed per step (after the auxiliary
/// draws), so chains with checking on and off stay stream-aligned as long as
/// no check actually fires.
pub fn step(
    spec: &KernelSpec,
    latents: &Trace,
    rng: &mut RandomSource,
) -> Result<(Trace, StepDiagnostics), KernelError> {
    let (aux, sampled_aux_score) = spec
        .auxiliary
        .trace_and_score(latents, rng)
        .map_err(|e| KernelError::InvalidState(format!("auxiliary sampling failed: {e}")))?;
    if sampled_aux_score == f64::NEG_INFINITY {
        return Err(KernelError::InvalidState(
            "auxiliary program sampled a zero-density trace".into(),
        ));
    }
    let r = rng.uniform();

    let proposal = match evaluate_proposal(spec, latents, &aux) {
        Ok(p) => p,
        Err(e) if e.is_structural() && spec.options.check_mode == CheckMode::RejectAndLog => {
            let failure = CheckFailure {
                kernel: spec.name.clone(),
                kind: CheckFailureKind::Structural,
                detail: e.to_string(),
            };
            log::warn!("kernel `{}` structural check failure: {}", spec.name, failure.detail);
            let mut diag = rejected_diagnostics(spec, f64::NAN, sampled_aux_score);
            diag.check_failure = Some(failure);
            return Ok((latents.clone(), diag));
        }
        Err(e) if e.is_structural() && spec.options.check_mode == CheckMode::Assert => {
            let failure = CheckFailure {
                kernel: spec.name.clone(),
                kind: CheckFailureKind::Structural,
                detail: e.to_string(),
            };
            return Err(KernelError::CheckFailed { kind: CheckFailureKind::Structural, failure });
        }
        Err(e) => return Err(e),
    };
    debug_assert!(
        (proposal.log_aux_cur - sampled_aux_score).abs() <= 1e-9,
        "auxiliary score drifted between sampling and scoring"
    );

    // Only viable proposals are checked: an auto-rejected, out-of-support
    // proposal is normal operation, not evidence of a bug.
    let mut check_failure = None;
    if spec.options.check_mode != CheckMode::Off && proposal.alpha > 0.0 {
        if let Err(failure) = run_checks(spec, latents, &aux, &proposal) {
            match spec.options.check_mode {
                CheckMode::Assert => {
                    return Err(KernelError::CheckFailed { kind: failure.kind, failure });
                }
                CheckMode::RejectAndLog => {
                    log::warn!(
                        "kernel `{}` {:?} check failure: {}",
                        spec.name,
                        failure.kind,
                        failure.detail
                    );
                    check_failure = Some(failure);
                }
                CheckMode::Off => unreachable!(),
            }
        }
    }

    let accepted = check_failure.is_none() && proposal.alpha > 0.0 && r <= proposal.alpha;
    let diag = StepDiagnostics {
        kernel: spec.name.clone(),
        accepted,
        alpha: if check_failure.is_some() { 0.0 } else { proposal.alpha },
        log_model_cur: proposal.log_model_cur,
        log_model_new: Some(proposal.log_model_new),
        log_aux_cur: proposal.log_aux_cur,
        log_aux_new: Some(proposal.log_aux_new),
        log_abs_det: Some(proposal.log_abs_det),
        reduced_dim: Some(proposal.reduced_dim),
        check_failure,
    };
    let next = if accepted { proposal.new_latents } else { latents.clone() };
    Ok((next, diag))
}

/// A consumer of chain output.
pub trait SampleSink {
    /// Called once per sweep with the post-sweep state and the diagnostics
    /// of every kernel applied during the sweep.
    fn on_sample(&mut self, sweep: usize, state: &Trace, diags: &[StepDiagnostics]);
    /// Called for each dynamic check failure as it happens.
    fn on_check_failure(&mut self, _sweep: usize, _failure: &CheckFailure) {}
}

impl<F: FnMut(usize, &Trace, &[StepDiagnostics])> SampleSink for F {
    fn on_sample(&mut self, sweep: usize, state: &Trace, diags: &[StepDiagnostics]) {
        self(sweep, state, diags)
    }
}

/// Checks that every kernel in a cycle shares one model and one observation
/// dictionary.
pub fn validate_cycle(cycle: &[KernelSpec]) -> Result<(), KernelError> {
    let Some(first) = cycle.first() else { return Ok(()) };
    for spec in &cycle[1..] {
        if !spec.model.same_program(&first.model) {
            return Err(KernelError::CycleMismatch(format!(
                "kernel `{}` uses a different model than `{}`",
                spec.name, first.name
            )));
        }
        if !spec.observations.equal_within(&first.observations, 0.0) {
            return Err(KernelError::CycleMismatch(format!(
                "kernel `{}` uses different observations than `{}`",
                spec.name, first.name
            )));
        }
    }
    Ok(())
}

/// Runs `sweeps` sweeps of the kernel cycle from `start`, reporting each
/// post-sweep state to `sink`. An empty cycle is the identity kernel. The
/// final state is returned.
pub fn chain(
    cycle: &[KernelSpec],
    start: &Trace,
    sweeps: usize,
    rng: &mut RandomSource,
    sink: &mut dyn SampleSink,
) -> Result<Trace, KernelError> {
    validate_cycle(cycle)?;
    let mut state = start.clone();
    let mut diags = Vec::with_capacity(cycle.len());
    for sweep in 0..sweeps {
        diags.clear();
        for spec in cycle {
            let (next, diag) = step(spec, &state, rng)?;
            if let Some(failure) = &diag.check_failure {
                sink.on_check_failure(sweep, failure);
            }
            state = next;
            diags.push(diag);
        }
        sink.on_sample(sweep, &state, &diags);
    }
    Ok(state)
}
