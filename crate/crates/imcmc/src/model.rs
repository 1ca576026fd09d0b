//! Probabilistic programs as effect-handled interpreters.
//!
//! A model is an ordinary Rust closure that describes its generative process
//! by calling [`Interp::sample`] at named addresses. The same program text is
//! reinterpreted under different handlers: a sampler draws fresh values (or
//! takes them from a constraint dictionary), while a scorer replays the
//! program against a fixed trace and accumulates the joint log density. The
//! program's own control flow decides which addresses exist, so
//! transdimensional models need no special support — a trace simply is or
//! isn't consistent with the path the program takes through it.
//!
//! Scoring is strict about structure: an address the program visits but the
//! trace lacks, or a trace key the program never visits, both mean the trace
//! lies outside the model's support and score `-inf`. Malformed programs
//! (duplicate addresses, type confusion between discrete and continuous
//! values) are faults, reported as errors rather than zero density.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::addr::{Address, Component};
use crate::dist::{DistError, Distribution};
use crate::rng::RandomSource;
use crate::trace::{Trace, TraceBuilder, TraceError};
use crate::value::Value;

/// A structural fault in a model program or the data fed to it.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    /// The program visited the same address twice in one execution.
    #[error("model visited address `{0}` twice")]
    DuplicateAddress(Address),
    /// A distribution rejected its parameters or was handed a value of the
    /// wrong kind (discrete where continuous was required, or vice versa).
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Why program execution stopped before reaching its end.
///
/// `ZeroDensity` is not an error: it signals that the trace being scored has
/// no mass under the program, and scoring APIs convert it to `-inf`. `Fault`
/// wraps a genuine [`ModelError`].
#[derive(Debug)]
pub enum Stop {
    ZeroDensity { reason: String },
    Fault(ModelError),
}

impl From<DistError> for Stop {
    fn from(e: DistError) -> Self {
        Stop::Fault(ModelError::Dist(e))
    }
}

/// The effect interface a program runs against.
///
/// Handlers decide what a `sample` statement means. They are internal to the
/// crate; programs only ever see [`Interp`].
pub(crate) trait SiteHandler {
    fn on_site(&mut self, addr: Address, dist: Distribution) -> Result<Value, Stop>;
}

/// The interpreter context passed to model and auxiliary programs.
pub struct Interp<'h> {
    handler: &'h mut dyn SiteHandler,
    prefix: Vec<Component>,
}

impl Interp<'_> {
    /// Introduces a random choice at `addr`, returning its value under the
    /// current interpretation (sampled fresh, read from a trace, ...).
    pub fn sample(
        &mut self,
        addr: impl Into<Address>,
        dist: Distribution,
    ) -> Result<Value, Stop> {
        let addr = addr.into();
        let full = if self.prefix.is_empty() {
            addr
        } else {
            Address::new(
                self.prefix
                    .iter()
                    .cloned()
                    .chain(addr.components().iter().cloned())
                    .collect(),
            )
            .expect("prefixed address is non-empty")
        };
        self.handler.on_site(full, dist)
    }

    /// Runs `body` with `component` appended to the address prefix, so that
    /// recursive programs (trees, nested plates) get hierarchical addresses
    /// without threading path strings by hand.
    pub fn in_scope<R>(
        &mut self,
        component: impl Into<Component>,
        body: impl FnOnce(&mut Self) -> R,
    ) -> R {
        self.prefix.push(component.into());
        let out = body(self);
        self.prefix.pop();
        out
    }
}

type ModelProgram = dyn Fn(&mut Interp<'_>) -> Result<(), Stop> + Send + Sync;
type AuxProgram = dyn Fn(&Trace, &mut Interp<'_>) -> Result<(), Stop> + Send + Sync;

/// A named generative program over traces.
#[derive(Clone)]
pub struct Model {
    name: String,
    program: Arc<ModelProgram>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model").field("name", &self.name).finish()
    }
}

/// A named auxiliary program; its randomness may depend on a model trace.
#[derive(Clone)]
pub struct Auxiliary {
    name: String,
    program: Arc<AuxProgram>,
}

impl fmt::Debug for Auxiliary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Auxiliary").field("name", &self.name).finish()
    }
}

impl Model {
    pub fn new(
        name: impl Into<String>,
        program: impl Fn(&mut Interp<'_>) -> Result<(), Stop> + Send + Sync + 'static,
    ) -> Self {
        Model { name: name.into(), program: Arc::new(program) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// True when `self` and `other` are literally the same program.
    pub fn same_program(&self, other: &Model) -> bool {
        Arc::ptr_eq(&self.program, &other.program)
    }

    /// The joint log density of `trace`, which must contain exactly the
    /// addresses the program visits — no more, no fewer. Structural
    /// mismatches score `-inf`; program faults are errors.
    pub fn score(&self, trace: &Trace) -> Result<f64, ModelError> {
        run_scorer(|interp| (self.program)(interp), trace)
    }

    /// Runs the program forward, drawing fresh values except at addresses
    /// fixed by `constraints`, and returns the complete trace with its joint
    /// log score. A constrained value outside its distribution's support
    /// yields a full trace with score `-inf` rather than an error.
    pub fn trace_and_score(
        &self,
        constraints: &Trace,
        rng: &mut RandomSource,
    ) -> Result<(Trace, f64), ModelError> {
        run_sampler(|interp| (self.program)(interp), constraints, rng)
    }

    /// Like [`Model::score`], but classifies any zero density as structural
    /// (impossible address set) or value-level (out-of-support value).
    pub fn score_report(&self, trace: &Trace) -> Result<ScoreReport, ModelError> {
        run_report_scorer(|interp| (self.program)(interp), trace)
    }
}

impl Auxiliary {
    pub fn new(
        name: impl Into<String>,
        program: impl Fn(&Trace, &mut Interp<'_>) -> Result<(), Stop> + Send + Sync + 'static,
    ) -> Self {
        Auxiliary { name: name.into(), program: Arc::new(program) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The log density of auxiliary trace `aux` given model trace `given`.
    pub fn score(&self, given: &Trace, aux: &Trace) -> Result<f64, ModelError> {
        run_scorer(|interp| (self.program)(given, interp), aux)
    }

    /// Samples an auxiliary trace for model trace `given`.
    pub fn trace_and_score(
        &self,
        given: &Trace,
        rng: &mut RandomSource,
    ) -> Result<(Trace, f64), ModelError> {
        run_sampler(|interp| (self.program)(given, interp), &Trace::empty(), rng)
    }

    /// Like [`Auxiliary::score`], with zero densities classified as in
    /// [`Model::score_report`].
    pub fn score_report(&self, given: &Trace, aux: &Trace) -> Result<ScoreReport, ModelError> {
        run_report_scorer(|interp| (self.program)(given, interp), aux)
    }
}

impl Model {
    /// Runs the program under an arbitrary handler (crate-internal; the
    /// enumeration oracle interprets programs its own way).
    pub(crate) fn run_with(&self, handler: &mut dyn SiteHandler) -> Result<(), Stop> {
        let mut interp = Interp { handler, prefix: Vec::new() };
        (self.program)(&mut interp)
    }
}

impl Auxiliary {
    pub(crate) fn run_with(
        &self,
        given: &Trace,
        handler: &mut dyn SiteHandler,
    ) -> Result<(), Stop> {
        let mut interp = Interp { handler, prefix: Vec::new() };
        (self.program)(given, &mut interp)
    }
}

struct Scorer<'t> {
    trace: &'t Trace,
    visited: BTreeSet<Address>,
    total: f64,
}

impl SiteHandler for Scorer<'_> {
    fn on_site(&mut self, addr: Address, dist: Distribution) -> Result<Value, Stop> {
        let Some(value) = self.trace.get(&addr) else {
            return Err(Stop::ZeroDensity {
                reason: format!("trace has no value at visited address `{addr}`"),
            });
        };
        if !self.visited.insert(addr.clone()) {
            return Err(Stop::Fault(ModelError::DuplicateAddress(addr)));
        }
        let lp = dist.logpdf(value)?;
        if lp == f64::NEG_INFINITY {
            return Err(Stop::ZeroDensity {
                reason: format!("value at `{addr}` is outside the support of {}", dist.kind()),
            });
        }
        self.total += lp;
        Ok(value.clone())
    }
}

fn run_scorer(
    program: impl FnOnce(&mut Interp<'_>) -> Result<(), Stop>,
    trace: &Trace,
) -> Result<f64, ModelError> {
    let mut scorer = Scorer { trace, visited: BTreeSet::new(), total: 0.0 };
    let mut interp = Interp { handler: &mut scorer, prefix: Vec::new() };
    match program(&mut interp) {
        Ok(()) => {
            if scorer.visited.len() != trace.len() {
                // Every visited key is in the trace, so a length mismatch
                // means the trace carries keys the program never visited.
                Ok(f64::NEG_INFINITY)
            } else {
                Ok(scorer.total)
            }
        }
        Err(Stop::ZeroDensity { .. }) => Ok(f64::NEG_INFINITY),
        Err(Stop::Fault(e)) => Err(e),
    }
}

/// A score with the *reason* for any zero density spelled out.
///
/// A density of zero can mean two very different things: a value sitting
/// outside its distribution's support (ordinary Metropolis–Hastings
/// rejection material), or a trace whose address structure the program could
/// never produce — a misspelled key, a missing one, or a value of the wrong
/// kind. The dynamic-check harness needs to tell them apart: only the second
/// kind indicates a bug in whatever constructed the trace.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    /// Joint log density; `-inf` for any zero-density trace.
    pub log_density: f64,
    /// `Some(description)` when the trace cannot structurally arise from
    /// the program, regardless of the values it holds.
    pub structural_mismatch: Option<String>,
}

struct ReportScorer<'t> {
    trace: &'t Trace,
    visited: BTreeSet<Address>,
    total: f64,
    mismatch: Option<String>,
}

impl SiteHandler for ReportScorer<'_> {
    fn on_site(&mut self, addr: Address, dist: Distribution) -> Result<Value, Stop> {
        let Some(value) = self.trace.get(&addr) else {
            self.mismatch = Some(format!("no value at visited address `{addr}`"));
            return Err(Stop::ZeroDensity {
                reason: "structural mismatch".into(),
            });
        };
        if !self.visited.insert(addr.clone()) {
            return Err(Stop::Fault(ModelError::DuplicateAddress(addr)));
        }
        match dist.logpdf(value) {
            Ok(lp) => {
                // Out-of-support values keep executing: the trace may still
                // hide a structural problem worth reporting over this one.
                self.total += lp;
                Ok(value.clone())
            }
            Err(DistError::TagMismatch { .. }) => {
                self.mismatch = Some(format!(
                    "value at `{addr}` has the wrong kind for {}",
                    dist.kind()
                ));
                Err(Stop::ZeroDensity { reason: "structural mismatch".into() })
            }
            Err(e) => Err(Stop::Fault(ModelError::Dist(e))),
        }
    }
}

fn run_report_scorer(
    program: impl FnOnce(&mut Interp<'_>) -> Result<(), Stop>,
    trace: &Trace,
) -> Result<ScoreReport, ModelError> {
    let mut scorer =
        ReportScorer { trace, visited: BTreeSet::new(), total: 0.0, mismatch: None };
    let mut interp = Interp { handler: &mut scorer, prefix: Vec::new() };
    match program(&mut interp) {
        Ok(()) => {
            let mut mismatch = scorer.mismatch;
            if mismatch.is_none() && scorer.visited.len() != trace.len() {
                let extra: Vec<String> = trace
                    .keys()
                    .filter(|k| !scorer.visited.contains(*k))
                    .map(|k| k.to_string())
                    .collect();
                mismatch = Some(format!(
                    "trace has keys the program never visited: {}",
                    extra.join(", ")
                ));
            }
            let log_density = if mismatch.is_some() {
                f64::NEG_INFINITY
            } else {
                scorer.total
            };
            Ok(ScoreReport { log_density, structural_mismatch: mismatch })
        }
        Err(Stop::ZeroDensity { .. }) => Ok(ScoreReport {
            log_density: f64::NEG_INFINITY,
            structural_mismatch: scorer.mismatch,
        }),
        Err(Stop::Fault(e)) => Err(e),
    }
}

struct Sampler<'a> {
    constraints: &'a Trace,
    rng: &'a mut RandomSource,
    built: TraceBuilder,
    total: f64,
}

impl SiteHandler for Sampler<'_> {
    fn on_site(&mut self, addr: Address, dist: Distribution) -> Result<Value, Stop> {
        let value = match self.constraints.get(&addr) {
            Some(v) => v.clone(),
            None => dist.sample(self.rng),
        };
        let lp = dist.logpdf(&value)?;
        self.total += lp;
        self.built.insert(addr, value.clone()).map_err(|e| match e {
            TraceError::DuplicateAddress(a) => Stop::Fault(ModelError::DuplicateAddress(a)),
            other => Stop::ZeroDensity { reason: other.to_string() },
        })?;
        Ok(value)
    }
}

fn run_sampler(
    program: impl FnOnce(&mut Interp<'_>) -> Result<(), Stop>,
    constraints: &Trace,
    rng: &mut RandomSource,
) -> Result<(Trace, f64), ModelError> {
    let mut sampler =
        Sampler { constraints, rng, built: TraceBuilder::new(), total: 0.0 };
    let mut interp = Interp { handler: &mut sampler, prefix: Vec::new() };
    match program(&mut interp) {
        Ok(()) => Ok((sampler.built.build(), sampler.total)),
        Err(Stop::ZeroDensity { .. }) => Ok((sampler.built.build(), f64::NEG_INFINITY)),
        Err(Stop::Fault(e)) => Err(e),
    }
}

/// What went wrong while applying a delta dictionary to a trace.
#[derive(Debug, thiserror::Error)]
pub enum UpdateError {
    #[error("latents and observations share addresses: {0:?}")]
    OverlappingKeys(Vec<Address>),
    #[error("model visited `{0}`, which is in neither the delta nor the current trace")]
    MissingValue(Address),
    #[error("delta tries to override observed address `{0}`")]
    ObservationOverride(Address),
    #[error("delta keys never visited by the updated model: {0:?}")]
    UnusedDelta(Vec<Address>),
    #[error(transparent)]
    Model(#[from] ModelError),
}

struct DeltaScorer<'a> {
    latents: &'a Trace,
    observations: &'a Trace,
    delta: &'a Trace,
    visited: BTreeSet<Address>,
    used_delta: BTreeSet<Address>,
    new_latents: TraceBuilder,
    total: f64,
    zero_density: bool,
    missing_at: Option<Address>,
}

impl SiteHandler for DeltaScorer<'_> {
    fn on_site(&mut self, addr: Address, dist: Distribution) -> Result<Value, Stop> {
        let value = if let Some(v) = self.delta.get(&addr) {
            self.used_delta.insert(addr.clone());
            v.clone()
        } else if let Some(v) = self.latents.get(&addr) {
            v.clone()
        } else if let Some(v) = self.observations.get(&addr) {
            v.clone()
        } else {
            // Not a zero-density event: the update simply cannot proceed.
            // Record the address and halt; the caller turns this into
            // `UpdateError::MissingValue`.
            self.missing_at = Some(addr.clone());
            return Err(Stop::ZeroDensity {
                reason: format!("no value available for `{addr}`"),
            });
        };
        if !self.visited.insert(addr.clone()) {
            return Err(Stop::Fault(ModelError::DuplicateAddress(addr)));
        }
        let lp = dist.logpdf(&value)?;
        if lp == f64::NEG_INFINITY {
            self.zero_density = true;
        }
        self.total += lp;
        if !self.observations.contains(&addr) {
            self.new_latents.insert(addr.clone(), value.clone()).map_err(|e| match e {
                TraceError::DuplicateAddress(a) => {
                    Stop::Fault(ModelError::DuplicateAddress(a))
                }
                other => Stop::ZeroDensity { reason: other.to_string() },
            })?;
        }
        Ok(value)
    }
}

/// Applies a sparse update `delta` to latent trace `latents`, re-running the
/// model to rebuild the updated latents and the log density ratio.
///
/// Each address the model visits takes its value from `delta` if present,
/// otherwise from the current latents or observations; a visited address
/// found nowhere is an error, as are delta keys the updated execution never
/// consumes (a silent no-op update almost always indicates a kernel bug).
/// Returns the updated latent trace together with
/// `log p(new ⊕ obs) - log p(old ⊕ obs)`; either execution may land outside
/// the support, making the ratio `-inf` or `+inf` accordingly.
pub fn naive_trace_update(
    model: &Model,
    latents: &Trace,
    observations: &Trace,
    delta: &Trace,
) -> Result<(Trace, f64), UpdateError> {
    let overlap: Vec<Address> = latents
        .keys()
        .filter(|k| observations.contains(k))
        .cloned()
        .collect();
    if !overlap.is_empty() {
        return Err(UpdateError::OverlappingKeys(overlap));
    }
    for key in delta.keys() {
        if let Some(current) = observations.get(key) {
            if delta.get(key) == Some(current) {
                log::warn!("delta at observed address `{key}` repeats the observed value");
            } else {
                return Err(UpdateError::ObservationOverride(key.clone()));
            }
        }
    }

    let mut handler = DeltaScorer {
        latents,
        observations,
        delta,
        visited: BTreeSet::new(),
        used_delta: BTreeSet::new(),
        new_latents: TraceBuilder::new(),
        total: 0.0,
        zero_density: false,
        missing_at: None,
    };
    // Re-run the full program under the merged lookup.
    {
        let mut interp = Interp { handler: &mut handler, prefix: Vec::new() };
        match (model.program)(&mut interp) {
            Ok(()) => {}
            Err(Stop::Fault(e)) => return Err(UpdateError::Model(e)),
            Err(Stop::ZeroDensity { .. }) => handler.zero_density = true,
        }
    }
    if let Some(addr) = handler.missing_at {
        return Err(UpdateError::MissingValue(addr));
    }
    let unused: Vec<Address> = delta
        .keys()
        .filter(|k| !handler.used_delta.contains(*k) && !observations.contains(k))
        .cloned()
        .collect();
    if !unused.is_empty() {
        return Err(UpdateError::UnusedDelta(unused));
    }
    let new_score = if handler.zero_density { f64::NEG_INFINITY } else { handler.total };
    let old_score = model
        .score(&latents.merge(observations).map_err(|_| {
            UpdateError::OverlappingKeys(Vec::new())
        })?)?;
    let new_latents = handler.new_latents.build();
    Ok((new_latents, new_score - old_score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr;
    use crate::dist::{mixture_of_normals, normal, uniform_discrete};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// A two-component toy: one or two means under a wide prior, unit-scale
    /// equal-weight likelihood at three fixed data addresses.
    fn toy(data: Vec<f64>) -> Model {
        Model::new("toy", move |interp| {
            let k = interp
                .sample("k", uniform_discrete(1, 2).unwrap())?
                .as_int()
                .expect("k is an integer");
            let mut means = Vec::new();
            for j in 1..=k {
                let mu = interp
                    .sample(("mu", j), normal(0.0, 10.0).unwrap())?
                    .as_scalar()
                    .expect("mu is a scalar");
                means.push(mu);
            }
            let weights = vec![1.0 / k as f64; k as usize];
            let scales = vec![1.0; k as usize];
            for (i, _) in data.iter().enumerate() {
                interp.sample(
                    ("y", i as i64),
                    mixture_of_normals(weights.clone(), means.clone(), scales.clone())?,
                )?;
            }
            Ok(())
        })
    }

    fn single_point_toy() -> (Model, Trace) {
        let model = toy(vec![0.0]);
        let obs = Trace::from_pairs([(addr!(("y", 0)), Value::scalar(0.0).unwrap())]).unwrap();
        (model, obs)
    }

    #[test]
    fn scores_known_trace_exactly() {
        let (model, obs) = single_point_toy();
        let latents = Trace::from_pairs([
            (addr!("k"), Value::int(1)),
            (addr!(("mu", 1)), Value::scalar(0.0).unwrap()),
        ])
        .unwrap();
        let full = latents.merge(&obs).unwrap();
        let score = model.score(&full).unwrap();
        assert_relative_eq!(score, -4.833609339963336, epsilon = 1e-12);
    }

    #[test]
    fn structural_mismatches_score_neg_inf() {
        let (model, obs) = single_point_toy();
        // Missing mu(1) for k = 1.
        let missing = Trace::from_pairs([(addr!("k"), Value::int(1))])
            .unwrap()
            .merge(&obs)
            .unwrap();
        assert_eq!(model.score(&missing).unwrap(), f64::NEG_INFINITY);
        // Extra mu(2) the k = 1 path never visits.
        let extra = Trace::from_pairs([
            (addr!("k"), Value::int(1)),
            (addr!(("mu", 1)), Value::scalar(0.0).unwrap()),
            (addr!(("mu", 2)), Value::scalar(3.0).unwrap()),
        ])
        .unwrap()
        .merge(&obs)
        .unwrap();
        assert_eq!(model.score(&extra).unwrap(), f64::NEG_INFINITY);
        // k outside its own support.
        let bad_k = Trace::from_pairs([
            (addr!("k"), Value::int(7)),
            (addr!(("mu", 1)), Value::scalar(0.0).unwrap()),
        ])
        .unwrap()
        .merge(&obs)
        .unwrap();
        assert_eq!(model.score(&bad_k).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn type_confusion_is_a_fault() {
        let (model, obs) = single_point_toy();
        let confused = Trace::from_pairs([
            (addr!("k"), Value::int(1)),
            (addr!(("mu", 1)), Value::bool(true)),
        ])
        .unwrap()
        .merge(&obs)
        .unwrap();
        assert!(matches!(model.score(&confused), Err(ModelError::Dist(_))));
    }

    #[test]
    fn duplicate_address_is_a_fault() {
        let model = Model::new("dup", |interp| {
            interp.sample("x", normal(0.0, 1.0).unwrap())?;
            interp.sample("x", normal(0.0, 1.0).unwrap())?;
            Ok(())
        });
        let trace =
            Trace::from_pairs([(addr!("x"), Value::scalar(0.0).unwrap())]).unwrap();
        assert!(matches!(
            model.score(&trace),
            Err(ModelError::DuplicateAddress(_))
        ));
        let mut rng = RandomSource::from_seed(0);
        assert!(model.trace_and_score(&Trace::empty(), &mut rng).is_err());
    }

    #[test]
    fn transdimensional_path_scores_mixture() {
        let (model, obs) = single_point_toy();
        let latents = Trace::from_pairs([
            (addr!("k"), Value::int(2)),
            (addr!(("mu", 1)), Value::scalar(-1.0).unwrap()),
            (addr!(("mu", 2)), Value::scalar(1.0).unwrap()),
        ])
        .unwrap();
        let score = model.score(&latents.merge(&obs).unwrap()).unwrap();
        let ln_2pi_half = 0.9189385332046727;
        let prior = 2.0 * (-(10.0f64.ln()) - ln_2pi_half - 0.005);
        let like = (0.5 * (-0.5f64).exp() + 0.5 * (-0.5f64).exp()).ln() - ln_2pi_half;
        assert_relative_eq!(score, 0.5f64.ln() + prior + like, epsilon = 1e-12);
    }

    #[test]
    fn scoped_addresses_nest() {
        let model = Model::new("tree", |interp| {
            interp.sample("root", normal(0.0, 1.0).unwrap())?;
            interp.in_scope("l", |interp| {
                interp.sample("leaf", normal(0.0, 1.0).unwrap())?;
                interp.in_scope("r", |interp| {
                    interp.sample("leaf", normal(0.0, 1.0).unwrap())
                })
            })?;
            Ok(())
        });
        let mut rng = RandomSource::from_seed(5);
        let (trace, _) = model.trace_and_score(&Trace::empty(), &mut rng).unwrap();
        let keys: Vec<String> = trace.keys().map(|a| a.to_string()).collect();
        assert_eq!(keys, vec!["l/leaf", "l/r/leaf", "root"]);
    }

    proptest! {
        #[test]
        fn forward_samples_rescore_identically(seed in 0u64..500) {
            let (model, obs) = single_point_toy();
            let mut rng = RandomSource::from_seed(seed);
            let (trace, score) = model.trace_and_score(&obs, &mut rng).unwrap();
            // The observation was honored and the score replays exactly.
            prop_assert_eq!(trace.get(&addr!(("y", 0))), obs.get(&addr!(("y", 0))));
            let rescored = model.score(&trace).unwrap();
            prop_assert!((rescored - score).abs() < 1e-12);
        }
    }

    #[test]
    fn naive_update_ratio_matches_hand_computation() {
        let (model, obs) = single_point_toy();
        let latents = Trace::from_pairs([
            (addr!("k"), Value::int(1)),
            (addr!(("mu", 1)), Value::scalar(0.0).unwrap()),
        ])
        .unwrap();
        let delta =
            Trace::from_pairs([(addr!(("mu", 1)), Value::scalar(1.0).unwrap())]).unwrap();
        let (updated, ratio) =
            naive_trace_update(&model, &latents, &obs, &delta).unwrap();
        assert_eq!(updated.get(&addr!(("mu", 1))), Some(&Value::scalar(1.0).unwrap()));
        assert_eq!(updated.len(), 2); // k and mu(1); observation excluded
        assert_relative_eq!(ratio, -0.505, epsilon = 1e-12);
    }

    #[test]
    fn naive_update_grows_dimension_through_delta() {
        let (model, obs) = single_point_toy();
        let latents = Trace::from_pairs([
            (addr!("k"), Value::int(1)),
            (addr!(("mu", 1)), Value::scalar(0.5).unwrap()),
        ])
        .unwrap();
        let delta = Trace::from_pairs([
            (addr!("k"), Value::int(2)),
            (addr!(("mu", 2)), Value::scalar(-0.5).unwrap()),
        ])
        .unwrap();
        let (updated, ratio) =
            naive_trace_update(&model, &latents, &obs, &delta).unwrap();
        assert_eq!(updated.len(), 3);
        assert!(updated.contains(&addr!(("mu", 2))));
        assert!(ratio.is_finite());
        // Without mu(2) in the delta the k = 2 path dead-ends.
        let short = Trace::from_pairs([(addr!("k"), Value::int(2))]).unwrap();
        assert!(matches!(
            naive_trace_update(&model, &latents, &obs, &short),
            Err(UpdateError::MissingValue(a)) if a == addr!(("mu", 2))
        ));
    }

    #[test]
    fn naive_update_rejects_bad_inputs() {
        let (model, obs) = single_point_toy();
        let latents = Trace::from_pairs([
            (addr!("k"), Value::int(1)),
            (addr!(("mu", 1)), Value::scalar(0.0).unwrap()),
        ])
        .unwrap();
        // Latents overlapping observations.
        let tainted = latents.merge(&obs).unwrap();
        assert!(matches!(
            naive_trace_update(&model, &tainted, &obs, &Trace::empty()),
            Err(UpdateError::OverlappingKeys(_))
        ));
        // Delta that would rewrite an observation.
        let override_obs =
            Trace::from_pairs([(addr!(("y", 0)), Value::scalar(9.0).unwrap())]).unwrap();
        assert!(matches!(
            naive_trace_update(&model, &latents, &obs, &override_obs),
            Err(UpdateError::ObservationOverride(_))
        ));
        // Delta at an address the updated run never visits.
        let unused =
            Trace::from_pairs([(addr!(("mu", 2)), Value::scalar(1.0).unwrap())]).unwrap();
        assert!(matches!(
            naive_trace_update(&model, &latents, &obs, &unused),
            Err(UpdateError::UnusedDelta(_))
        ));
    }

    #[test]
    fn naive_update_out_of_support_gives_infinite_ratio() {
        let (model, obs) = single_point_toy();
        let latents = Trace::from_pairs([
            (addr!("k"), Value::int(1)),
            (addr!(("mu", 1)), Value::scalar(0.0).unwrap()),
        ])
        .unwrap();
        let delta = Trace::from_pairs([(addr!("k"), Value::int(5))]).unwrap();
        // k = 5 is outside uniform_discrete(1, 2): the new score is -inf, but
        // the update itself is well-formed, so the ratio is -inf.
        // The k = 5 path visits mu(1..=5); supply them so lookup succeeds.
        let delta = delta
            .merge(
                &Trace::from_pairs((2..=5).map(|j| {
                    (addr!(("mu", j)), Value::scalar(0.0).unwrap())
                }))
                .unwrap(),
            )
            .unwrap();
        let (_, ratio) = naive_trace_update(&model, &latents, &obs, &delta).unwrap();
        assert_eq!(ratio, f64::NEG_INFINITY);
    }

    #[test]
    fn auxiliary_sees_model_trace() {
        let aux = Auxiliary::new("step-scale", |given, interp| {
            let k = given.get(&addr!("k")).and_then(Value::as_int).unwrap_or(1);
            interp.sample("eps", normal(0.0, k as f64)?)?;
            Ok(())
        });
        let x = Trace::from_pairs([(addr!("k"), Value::int(2))]).unwrap();
        let y = Trace::from_pairs([(addr!("eps"), Value::scalar(1.0).unwrap())]).unwrap();
        let lp = aux.score(&x, &y).unwrap();
        // normal(0, 2) at 1.
        assert_relative_eq!(
            lp,
            -(2.0f64.ln()) - 0.9189385332046727 - 0.125,
            epsilon = 1e-12
        );
        let mut rng = RandomSource::from_seed(9);
        let (draw, score) = aux.trace_and_score(&x, &mut rng).unwrap();
        assert_eq!(draw.len(), 1);
        assert_relative_eq!(aux.score(&x, &draw).unwrap(), score, epsilon = 1e-12);
    }
}
