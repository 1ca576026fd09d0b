//! Exhaustive verification for kernels over finite discrete state spaces.
//!
//! When every latent choice of a model is discrete with enumerable support,
//! the model's state space can be listed outright and a kernel's transition
//! matrix computed by brute force: for each state, enumerate every auxiliary
//! trace, push it through the exact same proposal evaluation the sampler
//! uses, and accumulate `q(y) * alpha` into the target state's column. The
//! resulting matrix can then be tested against ground truth — detailed
//! balance, stationarity of the enumerated posterior, convergence of the
//! state distribution — to residuals near machine precision, with no Monte
//! Carlo noise to hide behind.
//!
//! Enumeration replays the program once per path through its discrete
//! choices, odometer style, so path-dependent control flow (transdimensional
//! models) enumerates correctly. Observed addresses score like any other
//! site; unobserved continuous sites make a model non-enumerable and are
//! reported as such.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;

use crate::addr::Address;
use crate::dist::{logsumexp, Distribution};
use crate::kernel::{
    evaluate_proposal, run_checks, CheckFailure, CheckFailureKind, CheckMode, KernelError,
    KernelSpec,
};
use crate::model::{Auxiliary, Model, ModelError, Stop};
use crate::trace::{Trace, TraceBuilder};
use crate::value::Value;

/// Safety valve for state-space explosions.
const MAX_PATHS: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("address `{0}` is not enumerable (unobserved continuous choice)")]
    NotEnumerable(Address),
    #[error("enumeration exceeded {MAX_PATHS} paths")]
    TooManyPaths,
    #[error("program fault during enumeration: {0}")]
    Model(#[from] ModelError),
    #[error("kernel failed during brute-force evaluation: {0}")]
    Kernel(#[from] KernelError),
    #[error("proposal led to `{0}`, which is not an enumerated state")]
    StateNotFound(String),
}

struct Enumerator<'a> {
    obs: &'a Trace,
    tail_eps: f64,
    prescription: &'a [usize],
    position: usize,
    supports: Vec<usize>,
    built: TraceBuilder,
    total: f64,
    not_enumerable: Option<Address>,
}

impl crate::model::SiteHandler for Enumerator<'_> {
    fn on_site(&mut self, addr: Address, dist: Distribution) -> Result<Value, Stop> {
        if let Some(v) = self.obs.get(&addr) {
            let lp = dist.logpdf(v)?;
            self.total += lp;
            return Ok(v.clone());
        }
        let Some(options) = dist.enumerate_support(self.tail_eps) else {
            self.not_enumerable = Some(addr.clone());
            return Err(Stop::ZeroDensity { reason: format!("`{addr}` is continuous") });
        };
        if options.is_empty() {
            // A distribution with no positive-mass support: dead branch.
            self.total = f64::NEG_INFINITY;
            return Err(Stop::ZeroDensity { reason: format!("`{addr}` has empty support") });
        }
        let choice = self.prescription.get(self.position).copied().unwrap_or(0);
        self.position += 1;
        self.supports.push(options.len());
        let value = Value::Discrete(options[choice].0.clone());
        // Score with the true density, not the (possibly renormalized)
        // enumeration weight, so oracle scores match the sampler's exactly.
        let lp = dist.logpdf(&value)?;
        self.total += lp;
        self.built.insert(addr, value.clone()).map_err(|e| {
            Stop::Fault(ModelError::DuplicateAddress(match e {
                crate::trace::TraceError::DuplicateAddress(a) => a,
                _ => unreachable!("builder insert only fails on duplicates"),
            }))
        })?;
        Ok(value)
    }
}

fn enumerate_runs(
    mut run: impl FnMut(&mut Enumerator<'_>) -> Result<(), Stop>,
    obs: &Trace,
    tail_eps: f64,
) -> Result<Vec<(Trace, f64)>, OracleError> {
    let mut states = Vec::new();
    let mut prescription: Vec<usize> = Vec::new();
    for _guard in 0..MAX_PATHS {
        let mut enumerator = Enumerator {
            obs,
            tail_eps,
            prescription: &prescription,
            position: 0,
            supports: Vec::new(),
            built: TraceBuilder::new(),
            total: 0.0,
            not_enumerable: None,
        };
        let outcome = run(&mut enumerator);
        if let Some(addr) = enumerator.not_enumerable {
            return Err(OracleError::NotEnumerable(addr));
        }
        match outcome {
            Ok(()) => {
                if enumerator.total > f64::NEG_INFINITY {
                    states.push((enumerator.built.build(), enumerator.total));
                }
            }
            Err(Stop::ZeroDensity { .. }) => {} // dead branch, keep enumerating
            Err(Stop::Fault(e)) => return Err(OracleError::Model(e)),
        }
        // Advance the odometer over this path's radixes.
        let supports = enumerator.supports;
        let mut digits = prescription;
        digits.resize(supports.len(), 0);
        let mut pos = supports.len();
        loop {
            if pos == 0 {
                return Ok(states);
            }
            pos -= 1;
            if digits[pos] + 1 < supports[pos] {
                digits[pos] += 1;
                digits.truncate(pos + 1);
                break;
            }
        }
        prescription = digits;
    }
    Err(OracleError::TooManyPaths)
}

/// Enumerates every latent trace of `model` with positive density given
/// `obs`, paired with its exact joint log density `log p(x + obs)`.
pub fn enumerate_model(
    model: &Model,
    obs: &Trace,
    tail_eps: f64,
) -> Result<Vec<(Trace, f64)>, OracleError> {
    enumerate_runs(|e| model.run_with(e), obs, tail_eps)
}

/// Enumerates every auxiliary trace for model trace `given`, with its exact
/// log density `log q[given](y)`.
pub fn enumerate_auxiliary(
    auxiliary: &Auxiliary,
    given: &Trace,
    tail_eps: f64,
) -> Result<Vec<(Trace, f64)>, OracleError> {
    enumerate_runs(|e| auxiliary.run_with(given, e), &Trace::empty(), tail_eps)
}

/// Normalizes enumerated log scores into a probability vector.
pub fn normalized_distribution(states: &[(Trace, f64)]) -> Vec<f64> {
    let scores: Vec<f64> = states.iter().map(|(_, s)| *s).collect();
    let z = logsumexp(&scores);
    scores.iter().map(|s| (s - z).exp()).collect()
}

/// Computes the exact transition matrix of `spec` over `states` by
/// enumerating every auxiliary trace from every state.
///
/// `K[(i, j)]` is the probability that one step from state `i` lands on
/// state `j`. The kernel's own options apply: with checking enabled, any
/// proposal the checks would reject contributes its mass to the diagonal,
/// exactly as the sampler would behave.
pub fn brute_force_kernel(
    spec: &KernelSpec,
    states: &[(Trace, f64)],
    tail_eps: f64,
) -> Result<DMatrix<f64>, OracleError> {
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, (state, _)) in states.iter().enumerate() {
        index.insert(state.to_json_string(), i);
    }
    let n = states.len();
    let mut k = DMatrix::zeros(n, n);
    for (i, (state, _)) in states.iter().enumerate() {
        let mut stay = 1.0;
        for (aux, aux_log_p) in enumerate_auxiliary(&spec.auxiliary, state, tail_eps)? {
            let q = aux_log_p.exp();
            // Error mapping mirrors the sampler's step function so the
            // oracle predicts exactly what a chain with these options does.
            let proposal = match evaluate_proposal(spec, state, &aux) {
                Ok(p) => p,
                Err(e)
                    if e.is_structural()
                        && spec.options.check_mode == CheckMode::RejectAndLog =>
                {
                    continue; // rejected: mass stays on the diagonal
                }
                Err(e) if e.is_structural() && spec.options.check_mode == CheckMode::Assert => {
                    let failure = CheckFailure {
                        kernel: spec.name.clone(),
                        kind: CheckFailureKind::Structural,
                        detail: e.to_string(),
                    };
                    return Err(OracleError::Kernel(KernelError::CheckFailed {
                        kind: CheckFailureKind::Structural,
                        failure,
                    }));
                }
                Err(e) => return Err(OracleError::Kernel(e)),
            };
            let mut alpha = proposal.alpha;
            if spec.options.check_mode != CheckMode::Off && alpha > 0.0 {
                if let Err(failure) = run_checks(spec, state, &aux, &proposal) {
                    match spec.options.check_mode {
                        CheckMode::Assert => {
                            return Err(OracleError::Kernel(KernelError::CheckFailed {
                                kind: failure.kind,
                                failure,
                            }));
                        }
                        CheckMode::RejectAndLog => alpha = 0.0,
                        CheckMode::Off => unreachable!(),
                    }
                }
            }
            if alpha > 0.0 {
                let target = proposal.new_latents.to_json_string();
                let Some(&j) = index.get(&target) else {
                    return Err(OracleError::StateNotFound(target));
                };
                if j != i {
                    k[(i, j)] += q * alpha;
                    stay -= q * alpha;
                }
            }
        }
        k[(i, i)] = stay;
    }
    Ok(k)
}

/// The transition matrix of a whole kernel cycle: the ordered product of the
/// per-kernel matrices.
pub fn brute_force_cycle(
    cycle: &[KernelSpec],
    states: &[(Trace, f64)],
    tail_eps: f64,
) -> Result<DMatrix<f64>, OracleError> {
    let n = states.len();
    let mut k = DMatrix::identity(n, n);
    for spec in cycle {
        k *= brute_force_kernel(spec, states, tail_eps)?;
    }
    Ok(k)
}

/// Largest detailed-balance violation `|pi_i K_ij - pi_j K_ji|` over all
/// state pairs, with `pi` the normalized enumerated posterior.
pub fn detailed_balance_residual(states: &[(Trace, f64)], k: &DMatrix<f64>) -> f64 {
    let pi = normalized_distribution(states);
    let n = states.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((pi[i] * k[(i, j)] - pi[j] * k[(j, i)]).abs());
        }
    }
    worst
}

/// Largest stationarity violation `|(pi K)_j - pi_j|` over states.
pub fn stationarity_residual(states: &[(Trace, f64)], k: &DMatrix<f64>) -> f64 {
    let pi = normalized_distribution(states);
    let n = states.len();
    (0..n)
        .map(|j| {
            let flowed: f64 = (0..n).map(|i| pi[i] * k[(i, j)]).sum();
            (flowed - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Evolves a distribution row vector through `steps` applications of `k`.
pub fn evolve(k: &DMatrix<f64>, start: &[f64], steps: usize) -> Vec<f64> {
    let n = start.len();
    let mut p = start.to_vec();
    for _ in 0..steps {
        let mut next = vec![0.0; n];
        for (i, &pi) in p.iter().enumerate() {
            if pi != 0.0 {
                for j in 0..n {
                    next[j] += pi * k[(i, j)];
                }
            }
        }
        p = next;
    }
    p
}

/// Total variation distance between two distributions over the same states.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must share a state space");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Bucket empirical samples (keyed by trace) against enumerated states,
/// returning the empirical distribution aligned with `states`. Samples not
/// matching any state are counted in the second return value.
pub fn empirical_distribution(
    states: &[(Trace, f64)],
    samples: impl IntoIterator<Item = Trace>,
) -> (Vec<f64>, usize) {
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, (state, _)) in states.iter().enumerate() {
        index.insert(state.to_json_string(), i);
    }
    let mut counts = vec![0usize; states.len()];
    let mut missed = 0usize;
    let mut total = 0usize;
    for sample in samples {
        total += 1;
        match index.get(&sample.to_json_string()) {
            Some(&i) => counts[i] += 1,
            None => missed += 1,
        }
    }
    let denom = total.max(1) as f64;
    (counts.iter().map(|&c| c as f64 / denom).collect(), missed)
}

/// The set of addresses appearing in any enumerated state (diagnostic aid).
pub fn address_universe(states: &[(Trace, f64)]) -> BTreeSet<Address> {
    states
        .iter()
        .flat_map(|(t, _)| t.keys().cloned())
        .collect()
}

// ---------------------------------------------------------------------------
// Reference posteriors for the two-mean toy model
//
// The toy model (`zoo::toy_two_mean_model`) is small enough for its model
// count posterior P(k = 2 | data) to be computed without sampling, two
// independent ways: numerically, by integrating the means out on a grid,
// and in closed form, by expanding the two-mean likelihood over all 2^n
// assignments of points to components (each term a conjugate
// normal-normal integral). Long-run sampler estimates are tested against
// these.

/// Streaming log-sum-exp: one pass, constant memory, so sums with millions
/// of terms need not be materialized.
struct LogSum {
    max: f64,
    sum: f64, // Σ exp(term − max)
}

impl LogSum {
    fn new() -> Self {
        LogSum { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn add(&mut self, term: f64) {
        if term == f64::NEG_INFINITY {
            return;
        }
        if term <= self.max {
            self.sum += (term - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - term).exp() + 1.0;
            self.max = term;
        }
    }

    fn total(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// P(k = 2 | data) for the toy model by adaptive trapezoidal quadrature.
///
/// The one-mean evidence is a 1-d integral; the two-mean evidence is a 2-d
/// integral whose integrand is exchange-symmetric, so only the lower
/// triangle is evaluated and off-diagonal terms doubled. Both run over ±8
/// prior standard deviations, with the grid doubling until the answer
/// moves by less than 1e-9. The model's prior on k is uniform, so those
/// factors cancel in the ratio.
pub fn toy_quadrature_posterior(data: &[f64]) -> f64 {
    if data.is_empty() {
        return 0.5;
    }
    let mut prev = f64::NAN;
    for g in [401usize, 801, 1601, 3201, 6401] {
        let (lm1, lm2) = toy_quadrature_log_marginals(data, g);
        let p = posterior_from_log_marginals(lm1, lm2);
        if (p - prev).abs() < 1e-9 {
            return p;
        }
        prev = p;
    }
    prev
}

fn posterior_from_log_marginals(lm1: f64, lm2: f64) -> f64 {
    let mx = lm1.max(lm2);
    (lm2 - mx).exp() / ((lm1 - mx).exp() + (lm2 - mx).exp())
}

fn toy_quadrature_log_marginals(data: &[f64], g: usize) -> (f64, f64) {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let ln2 = std::f64::consts::LN_2;
    let (lo, hi) = (-80.0, 80.0);
    let h = (hi - lo) / (g - 1) as f64;
    let grid: Vec<f64> = (0..g).map(|i| lo + h * i as f64).collect();
    // Per-point log prior (mean ~ normal(0,10)) and per-datum unit-normal
    // log likelihoods, precomputed once.
    let prior: Vec<f64> = grid
        .iter()
        .map(|m| -0.5 * ln_2pi - (10.0f64).ln() - m * m / 200.0)
        .collect();
    let like: Vec<Vec<f64>> = grid
        .iter()
        .map(|m| {
            data.iter()
                .map(|y| -0.5 * ln_2pi - (y - m) * (y - m) / 2.0)
                .collect()
        })
        .collect();
    let logw = |i: usize| if i == 0 || i == g - 1 { (h / 2.0).ln() } else { h.ln() };

    let mut m1 = LogSum::new();
    for i in 0..g {
        m1.add(logw(i) + prior[i] + like[i].iter().sum::<f64>());
    }

    let mut m2 = LogSum::new();
    for a in 0..g {
        let la = &like[a];
        for b in a..g {
            let lb = &like[b];
            let mut mix = 0.0;
            for i in 0..data.len() {
                let (p, q) = (la[i], lb[i]);
                let (top, bot) = if p >= q { (p, q) } else { (q, p) };
                mix += top + (bot - top).exp().ln_1p() - ln2;
            }
            let sym = if a == b { 0.0 } else { ln2 };
            m2.add(sym + logw(a) + logw(b) + prior[a] + prior[b] + mix);
        }
    }
    (m1.total(), m2.total())
}

/// P(k = 2 | data) for the toy model in closed form via the assignment
/// expansion. Exact up to float rounding; practical for n ≤ 20.
pub fn toy_exact_posterior(data: &[f64]) -> f64 {
    let (lm1, lm2) = toy_exact_log_marginals(data);
    posterior_from_log_marginals(lm1, lm2)
}

/// Log evidences `(log m1, log m2)` of the toy data under the one- and
/// two-mean branches.
///
/// Conditioned on which component each point came from, the two-mean
/// likelihood factors into two independent normal samples with a
/// `normal(0,10)` prior on their means, and that integral has the standard
/// conjugate closed form. Summing it over all 2^n assignments (at weight
/// 2^{-n} each) gives m2 exactly; m1 is the single-assignment case.
pub fn toy_exact_log_marginals(data: &[f64]) -> (f64, f64) {
    let n = data.len();
    assert!(n <= 20, "assignment expansion enumerates 2^n subsets");
    let tau0 = 0.01; // prior precision of each mean, 1/10²
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    // ∫ N(mu; 0, 1/τ0) Π_{i∈S} N(y_i; mu, 1) dmu for a subset with
    // |S| = m, Σ y = s, Σ y² = q.
    let log_g = |s: f64, q: f64, m: usize| {
        let a = m as f64 + tau0;
        -0.5 * m as f64 * ln_2pi + 0.5 * (tau0.ln() - a.ln()) + s * s / (2.0 * a) - q / 2.0
    };
    let (s_all, q_all) = data
        .iter()
        .fold((0.0, 0.0), |(s, q), y| (s + y, q + y * y));
    let lm1 = log_g(s_all, q_all, n);
    let mut terms = LogSum::new();
    for mask in 0u32..1u32 << n {
        let (mut s, mut q, mut m) = (0.0, 0.0, 0usize);
        for (i, y) in data.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s += y;
                q += y * y;
                m += 1;
            }
        }
        terms.add(log_g(s, q, m) + log_g(s_all - s, q_all - q, n - m));
    }
    let lm2 = -(n as f64) * std::f64::consts::LN_2 + terms.total();
    (lm1, lm2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr;
    use crate::dist::{bernoulli, categorical, normal, poisson_plus_one};
    use crate::kernel::KernelOptions;
    use crate::transform::{In, Out, Transform};
    use approx::assert_relative_eq;

    fn flip_spec() -> KernelSpec {
        let model = Model::new("coin", |interp| {
            interp.sample("coin", bernoulli(0.3)?)?;
            Ok(())
        });
        let auxiliary = Auxiliary::new("none", |_, _| Ok(()));
        let transform = Transform::new("flip", |ctx| {
            let b = ctx.read_bool(In::Model, "coin")?;
            ctx.write_discrete(Out::Model, "coin", !b)?;
            Ok(())
        });
        KernelSpec::new(model, auxiliary, transform, Trace::empty())
    }

    #[test]
    fn enumerates_the_coin_model() {
        let spec = flip_spec();
        let states = enumerate_model(&spec.model, &Trace::empty(), 1e-12).unwrap();
        assert_eq!(states.len(), 2);
        let pi = normalized_distribution(&states);
        // States sort by trace content; false enumerates first.
        assert_relative_eq!(pi[0] + pi[1], 1.0, epsilon = 1e-15);
        let by_value: Vec<(bool, f64)> = states
            .iter()
            .zip(&pi)
            .map(|((t, _), &p)| {
                (t.get(&addr!("coin")).unwrap().as_bool().unwrap(), p)
            })
            .collect();
        for (b, p) in by_value {
            assert_relative_eq!(p, if b { 0.3 } else { 0.7 }, epsilon = 1e-15);
        }
    }

    #[test]
    fn flip_kernel_matrix_is_exact() {
        let spec = flip_spec();
        let states = enumerate_model(&spec.model, &Trace::empty(), 1e-12).unwrap();
        let k = brute_force_kernel(&spec, &states, 1e-12).unwrap();
        // Identify which state is heads-up (p = 0.3).
        let t_idx = states
            .iter()
            .position(|(t, _)| t.get(&addr!("coin")).unwrap().as_bool().unwrap())
            .unwrap();
        let f_idx = 1 - t_idx;
        assert_relative_eq!(k[(f_idx, t_idx)], 3.0 / 7.0, epsilon = 1e-14);
        assert_relative_eq!(k[(f_idx, f_idx)], 4.0 / 7.0, epsilon = 1e-14);
        assert_relative_eq!(k[(t_idx, f_idx)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(k[(t_idx, t_idx)], 0.0, epsilon = 1e-14);
        assert!(detailed_balance_residual(&states, &k) < 1e-15);
        assert!(stationarity_residual(&states, &k) < 1e-15);
    }

    #[test]
    fn dependent_two_site_model_balances() {
        // a ~ bern(0.6); b ~ bern(a ? 0.3 : 0.8); the kernel reproposes b.
        let model = Model::new("two-site", |interp| {
            let a = interp.sample("a", bernoulli(0.6)?)?.as_bool().unwrap();
            let p = if a { 0.3 } else { 0.8 };
            interp.sample("b", bernoulli(p)?)?;
            Ok(())
        });
        let auxiliary = Auxiliary::new("none", |_, _| Ok(()));
        let transform = Transform::new("flip-b", |ctx| {
            ctx.copy(In::Model, "a")?;
            let b = ctx.read_bool(In::Model, "b")?;
            ctx.write_discrete(Out::Model, "b", !b)?;
            Ok(())
        });
        let spec = KernelSpec::new(model, auxiliary, transform, Trace::empty());
        let states = enumerate_model(&spec.model, &Trace::empty(), 1e-12).unwrap();
        assert_eq!(states.len(), 4);
        let k = brute_force_kernel(&spec, &states, 1e-12).unwrap();
        assert!(detailed_balance_residual(&states, &k) < 1e-15);
        assert!(stationarity_residual(&states, &k) < 1e-15);
        // Rows are stochastic.
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| k[(i, j)]).sum();
            assert_relative_eq!(row, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn observed_sites_weight_the_posterior() {
        // c ~ bern(0.5); y ~ normal(c ? 2 : -2, 1) observed at 1.0.
        let model = Model::new("obs-coin", |interp| {
            let c = interp.sample("c", bernoulli(0.5)?)?.as_bool().unwrap();
            interp.sample("y", normal(if c { 2.0 } else { -2.0 }, 1.0)?)?;
            Ok(())
        });
        let obs = Trace::from_pairs([(addr!("y"), Value::scalar(1.0).unwrap())]).unwrap();
        let states = enumerate_model(&model, &obs, 1e-12).unwrap();
        assert_eq!(states.len(), 2);
        let pi = normalized_distribution(&states);
        // Posterior odds: exp(-0.5) vs exp(-4.5).
        let idx_true = states
            .iter()
            .position(|(t, _)| t.get(&addr!("c")).unwrap().as_bool().unwrap())
            .unwrap();
        let expect_true = (-0.5f64).exp() / ((-0.5f64).exp() + (-4.5f64).exp());
        assert_relative_eq!(pi[idx_true], expect_true, epsilon = 1e-12);
    }

    #[test]
    fn continuous_latents_are_not_enumerable() {
        let model = Model::new("cont", |interp| {
            interp.sample("x", normal(0.0, 1.0)?)?;
            Ok(())
        });
        assert!(matches!(
            enumerate_model(&model, &Trace::empty(), 1e-12),
            Err(OracleError::NotEnumerable(_))
        ));
    }

    #[test]
    fn truncated_enumeration_covers_poisson_tail() {
        let model = Model::new("pp", |interp| {
            interp.sample("n", poisson_plus_one(1.5)?)?;
            Ok(())
        });
        let states = enumerate_model(&model, &Trace::empty(), 1e-12).unwrap();
        let total: f64 = states.iter().map(|(_, s)| s.exp()).sum();
        // True densities, so the enumerated mass is 1 minus the tiny tail.
        assert!(total > 1.0 - 1e-11 && total <= 1.0 + 1e-15, "mass {total}");
    }

    #[test]
    fn evolve_and_total_variation_converge() {
        let spec = flip_spec();
        let states = enumerate_model(&spec.model, &Trace::empty(), 1e-12).unwrap();
        let k = brute_force_kernel(&spec, &states, 1e-12).unwrap();
        let pi = normalized_distribution(&states);
        let mut start = vec![0.0; states.len()];
        start[0] = 1.0;
        let after_1 = evolve(&k, &start, 1);
        let after_50 = evolve(&k, &start, 50);
        assert!(total_variation(&after_50, &pi) < total_variation(&after_1, &pi));
        assert!(total_variation(&after_50, &pi) < 1e-10);
        // Matrix-power cross-check for the two-step distribution.
        let k2 = k.clone() * k.clone();
        let after_2 = evolve(&k, &start, 2);
        for j in 0..states.len() {
            assert_relative_eq!(after_2[j], k2[(0, j)], epsilon = 1e-14);
        }
    }

    #[test]
    fn checked_kernel_matrix_moves_mass_to_diagonal() {
        // A transform that misbehaves on one state: categorical over 3
        // values; 0 <-> 1 swap is fine, but 2 maps to 0 (not an involution).
        let model = Model::new("three", |interp| {
            interp.sample("v", categorical(vec![0.5, 0.3, 0.2])?)?;
            Ok(())
        });
        let auxiliary = Auxiliary::new("none", |_, _| Ok(()));
        let transform = Transform::new("partial-swap", |ctx| {
            let v = ctx.read_int(In::Model, "v")?;
            let out = match v {
                0 => 1,
                1 => 0,
                _ => 0, // bug: 2 -> 0, but 0 -> 1
            };
            ctx.write_discrete(Out::Model, "v", out)?;
            Ok(())
        });
        let mut spec = KernelSpec::new(model, auxiliary, transform, Trace::empty());
        let states = enumerate_model(&spec.model, &Trace::empty(), 1e-12).unwrap();
        assert_eq!(states.len(), 3);
        let idx_of = |n: i64| {
            states
                .iter()
                .position(|(t, _)| t.get(&addr!("v")).unwrap().as_int().unwrap() == n)
                .unwrap()
        };
        // Unchecked: state 2 leaks to state 0 and balance is broken.
        let k_off = brute_force_kernel(&spec, &states, 1e-12).unwrap();
        assert!(k_off[(idx_of(2), idx_of(0))] > 0.0);
        assert!(detailed_balance_residual(&states, &k_off) > 1e-3);
        // Checked: the bad branch is rejected in place.
        spec.options = KernelOptions {
            check_mode: CheckMode::RejectAndLog,
            ..KernelOptions::default()
        };
        let k_checked = brute_force_kernel(&spec, &states, 1e-12).unwrap();
        assert_relative_eq!(k_checked[(idx_of(2), idx_of(2))], 1.0, epsilon = 1e-14);
        assert!(detailed_balance_residual(&states, &k_checked) < 1e-15);
        // Assert mode refuses to build the matrix at all.
        spec.options.check_mode = CheckMode::Assert;
        assert!(matches!(
            brute_force_kernel(&spec, &states, 1e-12),
            Err(OracleError::Kernel(KernelError::CheckFailed { .. }))
        ));
    }

    #[test]
    fn empirical_bucketing_matches_states() {
        let spec = flip_spec();
        let states = enumerate_model(&spec.model, &Trace::empty(), 1e-12).unwrap();
        let samples = vec![states[0].0.clone(), states[0].0.clone(), states[1].0.clone()];
        let (dist, missed) = empirical_distribution(&states, samples);
        assert_eq!(missed, 0);
        assert_relative_eq!(dist[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(dist[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    // Golden values in the next two tests were frozen from a 20-digit
    // arbitrary-precision run of this same pair of computations (see
    // fixtures/oracle-goldens.txt); the two Rust implementations here are
    // then required to agree with those digits and with each other.

    // Golden literals carry every digit the derivation produced, beyond
    // what f64 distinguishes, so they stay textually diffable against the
    // fixtures file.
    #[test]
    #[allow(clippy::excessive_precision)]
    fn exact_toy_marginals_match_frozen_goldens() {
        let four = crate::zoo::toy_smoke_dataset();
        let (lm1, lm2) = toy_exact_log_marginals(&four);
        assert_relative_eq!(lm1, -24.67273484647197556005, epsilon = 1e-12);
        assert_relative_eq!(lm2, -11.14802313254891127185, epsilon = 1e-12);
        assert_relative_eq!(
            toy_exact_posterior(&four),
            0.9999986625062771956851,
            epsilon = 1e-13
        );

        let ten = crate::zoo::toy_benchmark_dataset();
        let (lm1, lm2) = toy_exact_log_marginals(&ten);
        assert_relative_eq!(lm1, -20.52850334746088181234, epsilon = 1e-12);
        assert_relative_eq!(lm2, -21.3516484211390586881, epsilon = 1e-12);
        assert_relative_eq!(
            toy_exact_posterior(&ten),
            0.3050964561806309877436,
            epsilon = 1e-12
        );
        assert_eq!(toy_exact_posterior(&[]), 0.5);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn quadrature_posterior_agrees_with_the_exact_expansion() {
        let ten = crate::zoo::toy_benchmark_dataset();
        assert!((toy_quadrature_posterior(&ten) - 0.3050964561806309877436).abs() < 1e-7);
        let four = crate::zoo::toy_smoke_dataset();
        assert!((toy_quadrature_posterior(&four) - 0.9999986625062771956851).abs() < 1e-7);
        assert_eq!(toy_quadrature_posterior(&[]), 0.5);
        // An irregular dataset neither method was tuned on.
        let other = [1.3, -0.4, 2.2, 0.0, -1.9, 0.7];
        let gap = (toy_quadrature_posterior(&other) - toy_exact_posterior(&other)).abs();
        assert!(gap < 1e-7, "methods disagree by {gap}");
    }
}
