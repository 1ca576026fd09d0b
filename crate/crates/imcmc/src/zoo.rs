//! Ready-made models and kernels: worked examples the engine is exercised
//! against, plus deliberately broken variants for the dynamic checks to
//! catch.
//!
//! Everything here is plain user-level code — models are ordinary generative
//! programs, kernels are ordinary [`KernelSpec`]s — so this module doubles
//! as a usage reference. The inhabitants:
//!
//! * a two-mean toy mixture with a split/merge kernel small enough to
//!   cross-check against closed-form posteriors,
//! * a full Gaussian mixture with unknown component count and a
//!   moment-matching split/merge move,
//! * Gaussian-process structure learning over a grammar of covariance
//!   expressions, with subtree-regeneration kernels,
//! * Hamiltonian Monte Carlo expressed as an involutive kernel,
//! * tiny fully-discrete kernels whose transition matrices can be
//!   brute-forced exactly, and
//! * [`buggy_kernels`]: three seeded bugs (a wrong merge formula, a
//!   birth/death move with broken index bookkeeping, a misspelled address)
//!   that the checks must detect.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::addr;
use crate::addr::Address;
use crate::autodiff::DiffScalar;
use crate::dist::{
    bernoulli, beta, categorical, dirichlet, gamma, inv_gamma, mixture_of_normals, mvnormal,
    normal, poisson_plus_one, uniform_discrete, Distribution,
};
use crate::kernel::{CheckMode, KernelOptions, KernelSpec};
use crate::model::{Auxiliary, Interp, Model, Stop};
use crate::trace::Trace;
use crate::transform::{Ctx, In, Out, Transform, TransformError};
use crate::value::Value;

// ---------------------------------------------------------------------------
// Datasets

/// Ten observations for the two-mean toy model, placed at standard-normal
/// quantiles (levels 0.1 through 0.9) shifted to centers ±0.9. The shift is
/// chosen so the posterior genuinely hesitates between one and two
/// components — P(k=2 | data) ≈ 0.305 — making it a sharp test for any
/// sampler estimate. The values are frozen as literals because downstream
/// reference numbers were computed for these exact floats.
pub fn toy_benchmark_dataset() -> Vec<f64> {
    vec![
        -2.1815515655446003,
        -1.4244005127080408,
        -0.9,
        -0.3755994872919592,
        0.38155156554460046,
        -0.38155156554460046,
        0.3755994872919592,
        0.9,
        1.4244005127080408,
        2.1815515655446003,
    ]
}

/// Four well-separated observations; the two-component explanation is
/// overwhelming (P(k=2 | data) ≈ 0.9999987), so smoke tests can assert the
/// sampler lands near certainty quickly.
pub fn toy_smoke_dataset() -> Vec<f64> {
    vec![-3.0, -3.0, 3.0, 3.0]
}

/// Thirty points in three groups of ten around −6, 0, and 6, each group at
/// standard-normal quantile offsets. Deterministic by construction; used as
/// the standing dataset for the full Gaussian mixture model.
pub fn gmm_dataset() -> Vec<f64> {
    let offsets = [
        -1.2815515655446004,
        -0.8416212335729142,
        -0.5244005127080407,
        -0.2533471031357997,
        0.0,
        0.2533471031357997,
        0.5244005127080407,
        0.8416212335729142,
        1.2815515655446004,
        1.6448536269514722,
    ];
    let mut data = Vec::with_capacity(30);
    for center in [-6.0, 0.0, 6.0] {
        data.extend(offsets.iter().map(|o| center + o));
    }
    data
}

/// Synthetic inputs/outputs for the structure-learning model: 40 inputs
/// evenly spaced on [0, 8), outputs a linear trend plus a period-2 sinusoid
/// plus a small deterministic high-frequency wiggle standing in for noise.
/// A linear-plus-periodic covariance explains this data far better than a
/// prior draw, which is what the structure-recovery test leans on.
pub fn gp_dataset() -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.2).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| 0.3 * x + 0.8 * (std::f64::consts::PI * x).sin() + 0.05 * (13.7 * x).sin())
        .collect();
    (xs, ys)
}

fn scalar_obs(name: &'static str, data: &[f64]) -> Trace {
    Trace::from_pairs(data.iter().enumerate().map(|(i, &y)| {
        (
            Address::from((name, i as i64)),
            Value::scalar(y).expect("finite datum"),
        )
    }))
    .expect("observation addresses are distinct")
}

fn no_aux() -> Auxiliary {
    Auxiliary::new("no-aux", |_, _| Ok(()))
}

// ---------------------------------------------------------------------------
// Two-mean toy model

/// A mixture with one or two unit-variance, equal-weight components:
/// `k ~ uniform_discrete(1,2)`, means `mu(j) ~ normal(0,10)` for `j = 1..=k`,
/// and `n` observations `y(i)` from the equal-weight mixture.
pub fn toy_two_mean_model(n: usize) -> Model {
    Model::new("toy-two-mean", move |interp| {
        let k = interp
            .sample("k", uniform_discrete(1, 2)?)?
            .as_int()
            .expect("k is an integer");
        let mut means = Vec::with_capacity(k as usize);
        for j in 1..=k {
            let mu = interp
                .sample(("mu", j), normal(0.0, 10.0)?)?
                .as_scalar()
                .expect("mu is a scalar");
            means.push(mu);
        }
        let weights = vec![1.0 / k as f64; k as usize];
        let vars = vec![1.0; k as usize];
        for i in 0..n {
            interp.sample(
                ("y", i as i64),
                mixture_of_normals(weights.clone(), means.clone(), vars.clone())?,
            )?;
        }
        Ok(())
    })
}

/// The toy dataset as an observation trace over `y(0)..y(n-1)`.
pub fn toy_observations(data: &[f64]) -> Trace {
    scalar_obs("y", data)
}

fn toy_split_merge_aux() -> Auxiliary {
    Auxiliary::new("toy-split-merge-aux", |given, interp| {
        let k = given
            .get(&addr!("k"))
            .and_then(Value::as_int)
            .expect("toy model trace has k");
        // Only the split direction needs fresh randomness; the merge is
        // deterministic given the state, so its auxiliary trace is empty.
        if k == 1 {
            interp.sample("u", beta(2.0, 2.0)?)?;
        }
        Ok(())
    })
}

fn toy_split_merge_transform(merge_mu: fn(&DiffScalar, &DiffScalar) -> DiffScalar) -> Transform {
    Transform::new("toy-split-merge", move |ctx| {
        let k = ctx.read_int(In::Model, "k")?;
        if k == 1 {
            let mu = ctx.read(In::Model, ("mu", 1))?;
            let u = ctx.read(In::Aux, "u")?;
            ctx.write_discrete(Out::Model, "k", 2i64)?;
            ctx.write(Out::Model, ("mu", 1), &mu - &u)?;
            ctx.write(Out::Model, ("mu", 2), &mu + &u)?;
        } else {
            let mu1 = ctx.read(In::Model, ("mu", 1))?;
            let mu2 = ctx.read(In::Model, ("mu", 2))?;
            ctx.write_discrete(Out::Model, "k", 1i64)?;
            ctx.write(Out::Model, ("mu", 1), merge_mu(&mu1, &mu2))?;
            ctx.write(Out::Aux, "u", (&mu2 - &mu1) / 2.0)?;
        }
        Ok(())
    })
}

/// The toy split/merge kernel: at `k = 1` it splits `mu` into
/// `(mu - u, mu + u)` with `u ~ beta(2,2)`; at `k = 2` it deterministically
/// merges to the midpoint and reconstructs `u`. Merges whose means are out
/// of order or further than 2 apart reconstruct a `u` outside `(0,1)` and
/// fall to density zero, i.e. they auto-reject rather than err.
pub fn toy_split_merge_kernel(data: &[f64]) -> KernelSpec {
    KernelSpec::new(
        toy_two_mean_model(data.len()),
        toy_split_merge_aux(),
        toy_split_merge_transform(|mu1, mu2| (mu1 + mu2) / 2.0),
        toy_observations(data),
    )
    .named("toy-split-merge")
}

/// A within-`k` Gaussian random walk on the toy model's means: each mean
/// moves by its own `normal(0, step_sd)` increment and the increment is
/// negated on the way out, making the move self-inverse and symmetric.
pub fn toy_walk_kernel(data: &[f64], step_sd: f64) -> KernelSpec {
    let aux = Auxiliary::new("toy-walk-aux", move |given, interp| {
        let k = given
            .get(&addr!("k"))
            .and_then(Value::as_int)
            .expect("toy model trace has k");
        for j in 1..=k {
            interp.sample(("d", j), normal(0.0, step_sd)?)?;
        }
        Ok(())
    });
    let transform = Transform::new("toy-walk", |ctx| {
        let k = ctx.read_int(In::Model, "k")?;
        ctx.copy(In::Model, "k")?;
        for j in 1..=k {
            let mu = ctx.read(In::Model, ("mu", j))?;
            let d = ctx.read(In::Aux, ("d", j))?;
            ctx.write(Out::Model, ("mu", j), &mu + &d)?;
            ctx.write(Out::Aux, ("d", j), -&d)?;
        }
        Ok(())
    });
    KernelSpec::new(
        toy_two_mean_model(data.len()),
        aux,
        transform,
        toy_observations(data),
    )
    .named("toy-walk")
}

// ---------------------------------------------------------------------------
// Gaussian mixture with unknown component count

/// A full mixture model: `k ~ poisson_plus_one(1)`, weights over the
/// `k`-simplex from `dirichlet(2,…,2)` (omitted at `k = 1`, where the
/// simplex is a single point carrying no randomness), per-cluster means
/// `normal(0,10)` and variances `inv_gamma(1,10)`, and `n` observations
/// from the resulting mixture. Clusters are indexed from 0.
pub fn gmm_model(n: usize) -> Model {
    Model::new("gmm", move |interp| {
        let k = interp
            .sample("k", poisson_plus_one(1.0)?)?
            .as_int()
            .expect("k is an integer") as usize;
        let weights = if k >= 2 {
            interp
                .sample("w", dirichlet(vec![2.0; k])?)?
                .as_vector()
                .expect("weights are a vector")
                .to_vec()
        } else {
            vec![1.0]
        };
        let mut means = Vec::with_capacity(k);
        let mut vars = Vec::with_capacity(k);
        for j in 0..k {
            means.push(
                interp
                    .sample(("mu", j as i64), normal(0.0, 10.0)?)?
                    .as_scalar()
                    .expect("mu is a scalar"),
            );
            vars.push(
                interp
                    .sample(("var", j as i64), inv_gamma(1.0, 10.0)?)?
                    .as_scalar()
                    .expect("var is a scalar"),
            );
        }
        for i in 0..n {
            interp.sample(
                ("x", i as i64),
                mixture_of_normals(weights.clone(), means.clone(), vars.clone())?,
            )?;
        }
        Ok(())
    })
}

/// The mixture dataset as an observation trace over `x(0)..x(n-1)`.
pub fn gmm_observations(data: &[f64]) -> Trace {
    scalar_obs("x", data)
}

/// The model's joint log density evaluated by direct formula — Poisson,
/// Dirichlet, normal, inverse-gamma, and mixture terms written out by hand
/// rather than run through the interpreter. Exists so tests can confirm the
/// interpreter's score against an independent computation.
pub fn gmm_closed_form_log_density(trace: &Trace, data: &[f64]) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let k = trace
        .get(&addr!("k"))
        .and_then(Value::as_int)
        .expect("trace has k") as usize;
    let weights: Vec<f64> = if k >= 2 {
        trace
            .get(&addr!("w"))
            .and_then(Value::as_vector)
            .expect("trace has weights")
            .to_vec()
    } else {
        vec![1.0]
    };
    let mut total = 0.0;
    // k - 1 ~ poisson(1): exp(-1) / (k-1)!
    total += -1.0 - (2..k).map(|i| (i as f64).ln()).sum::<f64>();
    // weights ~ dirichlet(2,…,2): Γ(2k)/Γ(2)^k · Π w_j, and Γ(2) = 1.
    if k >= 2 {
        total += ln_gamma(2.0 * k as f64);
        total += weights.iter().map(|w| w.ln()).sum::<f64>();
    }
    let mut means = Vec::with_capacity(k);
    let mut vars = Vec::with_capacity(k);
    for j in 0..k {
        let mu = trace
            .get(&Address::from(("mu", j as i64)))
            .and_then(Value::as_scalar)
            .expect("trace has mu");
        let var = trace
            .get(&Address::from(("var", j as i64)))
            .and_then(Value::as_scalar)
            .expect("trace has var");
        // normal(0, 10) and inv_gamma(shape 1, scale 10).
        total += -0.5 * ln_2pi - (10.0f64).ln() - mu * mu / 200.0;
        total += (10.0f64).ln() - 2.0 * var.ln() - 10.0 / var;
        means.push(mu);
        vars.push(var);
    }
    let wsum: f64 = weights.iter().sum();
    for &x in data {
        let terms: Vec<f64> = (0..k)
            .map(|j| {
                (weights[j] / wsum).ln() - 0.5 * ln_2pi - 0.5 * vars[j].ln()
                    - (x - means[j]) * (x - means[j]) / (2.0 * vars[j])
            })
            .collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        total += m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    }
    total
}

fn gmm_split_merge_aux() -> Auxiliary {
    Auxiliary::new("gmm-split-merge-aux", |given, interp| {
        let k = given
            .get(&addr!("k"))
            .and_then(Value::as_int)
            .expect("gmm trace has k");
        let p_split = if k == 1 { 1.0 } else { 0.5 };
        let split = interp
            .sample("split", bernoulli(p_split)?)?
            .as_bool()
            .expect("split is boolean");
        if split {
            interp.sample("j", uniform_discrete(0, k - 1)?)?;
            interp.sample("u1", beta(2.0, 2.0)?)?;
            interp.sample("v2", beta(2.0, 2.0)?)?;
            interp.sample("u3", beta(1.0, 1.0)?)?;
        } else {
            // Merge target: any cluster other than the last. The `.max(0)`
            // keeps the distribution constructible when scoring impossible
            // aux traces (merge recorded against k = 1), whose density is
            // already zero from the forced-split site.
            interp.sample("j", uniform_discrete(0, (k - 2).max(0))?)?;
        }
        Ok(())
    })
}

fn gmm_split_merge_transform() -> Transform {
    Transform::new("gmm-split-merge", |ctx| {
        let k = ctx.read_int(In::Model, "k")? as usize;
        let split = ctx.read_bool(In::Aux, "split")?;
        let j = ctx.read_int(In::Aux, "j")? as usize;
        if split {
            gmm_split(ctx, k, j)
        } else {
            gmm_merge(ctx, k, j)
        }
    })
}

/// Split cluster `j` of a `k`-cluster state; the second child lands at the
/// new last index `k`. Three degrees of freedom govern the split — `u1` for
/// the weight, `u2 = 2·v2 − 1` for the mean offset, `u3` for the variance
/// share — and the children preserve the parent's total weight, mean, and
/// second moment, so the merge below inverts it exactly.
fn gmm_split(ctx: &mut Ctx<'_>, k: usize, j: usize) -> Result<(), TransformError> {
    let kk = k + 1;
    ctx.write_discrete(Out::Model, "k", kk as i64)?;
    ctx.write_discrete(Out::Aux, "split", false)?;
    ctx.write_discrete(Out::Aux, "j", j as i64)?;
    let u1 = ctx.read(In::Aux, "u1")?;
    let v2 = ctx.read(In::Aux, "v2")?;
    let u3 = ctx.read(In::Aux, "u3")?;
    let u2 = 2.0 * &v2 - 1.0;
    let mu = ctx.read(In::Model, ("mu", j as i64))?;
    let var = ctx.read(In::Model, ("var", j as i64))?;

    if k == 1 {
        // A one-cluster state has no weights address; the new two-cluster
        // simplex has a single free slot and a determined complement.
        ctx.write_slot_derived(Out::Model, "w", 1, 2, 1.0 - u1.primal())?;
        ctx.write_slot(Out::Model, "w", 0, 2, u1.clone())?;
    } else {
        let wj = ctx.read_slot(In::Model, "w", j)?;
        for i in 0..k {
            if i != j {
                ctx.copy_slot(In::Model, "w", i, Out::Model, "w", i, kk)?;
            }
        }
        ctx.write_slot(Out::Model, "w", j, kk, &wj * &u1)?;
        ctx.write_slot(Out::Model, "w", k, kk, &wj * (1.0 - &u1))?;
    }

    // Child weight ratios reduce to functions of u1 alone, which is what
    // keeps the Jacobian's live block at a fixed size for every k.
    let ratio = ((1.0 - &u1) / &u1).sqrt(); // √(w2/w1)
    let sd = var.sqrt();
    let spread = 1.0 - &u2 * &u2;
    let mu1 = &mu - &u2 * &sd * &ratio;
    let mu2 = &mu + &u2 * &sd / &ratio;
    let var1 = &u3 * &spread * &var / &u1;
    let var2 = (1.0 - &u3) * &spread * &var / (1.0 - &u1);
    ctx.write(Out::Model, ("mu", j as i64), mu1)?;
    ctx.write(Out::Model, ("mu", k as i64), mu2)?;
    ctx.write(Out::Model, ("var", j as i64), var1)?;
    ctx.write(Out::Model, ("var", k as i64), var2)?;
    for c in 0..k {
        if c != j {
            ctx.copy(In::Model, ("mu", c as i64))?;
            ctx.copy(In::Model, ("var", c as i64))?;
        }
    }
    Ok(())
}

/// Merge the last cluster into cluster `j`, moment-matching weight, mean,
/// and variance, and reconstruct the three split coordinates into the
/// auxiliary output. Requires `k ≥ 2`; the auxiliary program never proposes
/// a merge at `k = 1`.
fn gmm_merge(ctx: &mut Ctx<'_>, k: usize, j: usize) -> Result<(), TransformError> {
    let out_k = k - 1;
    let last = k - 1;
    ctx.write_discrete(Out::Model, "k", out_k as i64)?;
    ctx.write_discrete(Out::Aux, "split", true)?;
    ctx.write_discrete(Out::Aux, "j", j as i64)?;
    let mu1 = ctx.read(In::Model, ("mu", j as i64))?;
    let mu2 = ctx.read(In::Model, ("mu", last as i64))?;
    let var1 = ctx.read(In::Model, ("var", j as i64))?;
    let var2 = ctx.read(In::Model, ("var", last as i64))?;
    let (w1, w2) = if k == 2 {
        // Two clusters carry one free weight coordinate; the other is the
        // simplex complement, derived arithmetically rather than read.
        let w1 = ctx.read_slot(In::Model, "w", j)?;
        let w2 = 1.0 - &w1;
        (w1, w2)
    } else {
        let w1 = ctx.read_slot(In::Model, "w", j)?;
        let w2 = ctx.read_slot(In::Model, "w", last)?;
        for i in 0..out_k {
            if i != j {
                ctx.copy_slot(In::Model, "w", i, Out::Model, "w", i, out_k)?;
            }
        }
        (w1, w2)
    };
    let s = &w1 + &w2;
    if k > 2 {
        ctx.write_slot(Out::Model, "w", j, out_k, s.clone())?;
    }
    let u1 = &w1 / &s;
    let mu = (&w1 * &mu1 + &w2 * &mu2) / &s;
    let var = (&w1 * (&mu1 * &mu1 + &var1) + &w2 * (&mu2 * &mu2 + &var2)) / &s - &mu * &mu;
    let u2 = (&mu - &mu1) * (&w1 / (&w2 * &var)).sqrt();
    let v2 = (&u2 + 1.0) / 2.0;
    let u3 = &var1 * &w1 / ((1.0 - &u2 * &u2) * &var * &s);
    ctx.write(Out::Model, ("mu", j as i64), mu)?;
    ctx.write(Out::Model, ("var", j as i64), var)?;
    ctx.write(Out::Aux, "u1", u1)?;
    ctx.write(Out::Aux, "v2", v2)?;
    ctx.write(Out::Aux, "u3", u3)?;
    for c in 0..out_k {
        if c != j {
            ctx.copy(In::Model, ("mu", c as i64))?;
            ctx.copy(In::Model, ("var", c as i64))?;
        }
    }
    Ok(())
}

/// The trans-dimensional move for [`gmm_model`]: a fair coin picks split or
/// merge (split is forced at `k = 1`), splits target any cluster, and
/// merges always absorb the last cluster into a random other one. The
/// round-trip tolerance is loosened to 1e-6 because inverse-gamma prior
/// draws occasionally produce variances around 1e6, where even an exact
/// algebraic inverse leaves absolute float residue near 1e-10.
pub fn gmm_split_merge_kernel(data: &[f64]) -> KernelSpec {
    KernelSpec::new(
        gmm_model(data.len()),
        gmm_split_merge_aux(),
        gmm_split_merge_transform(),
        gmm_observations(data),
    )
    .named("gmm-split-merge")
    .with_options(KernelOptions { equality_tol: 1e-6, ..KernelOptions::default() })
}

/// Relabeling move: swap a uniformly chosen cluster with the last one.
/// Pure bookkeeping — every write is a copy — and since the model is
/// exchangeable over cluster labels the acceptance probability is 1. Paired
/// with [`gmm_split_merge_kernel`] so every cluster can eventually be
/// merged, not just the last.
pub fn gmm_cluster_swap_kernel(data: &[f64]) -> KernelSpec {
    let aux = Auxiliary::new("gmm-cluster-swap-aux", |given, interp| {
        let k = given
            .get(&addr!("k"))
            .and_then(Value::as_int)
            .expect("gmm trace has k");
        interp.sample("j", uniform_discrete(0, k - 1)?)?;
        Ok(())
    });
    let transform = Transform::new("gmm-cluster-swap", |ctx| {
        let k = ctx.read_int(In::Model, "k")?;
        let j = ctx.read_int(In::Aux, "j")?;
        let last = k - 1;
        ctx.copy(In::Model, "k")?;
        // The same j undoes the swap, so it passes through unchanged.
        ctx.copy(In::Aux, "j")?;
        for c in 0..k {
            let target = if c == j {
                last
            } else if c == last {
                j
            } else {
                c
            };
            ctx.copy_as(In::Model, ("mu", c), Out::Model, ("mu", target))?;
            ctx.copy_as(In::Model, ("var", c), Out::Model, ("var", target))?;
        }
        if k >= 2 {
            for c in 0..k as usize {
                let target = if c as i64 == j {
                    last as usize
                } else if c == last as usize {
                    j as usize
                } else {
                    c
                };
                ctx.copy_slot(In::Model, "w", c, Out::Model, "w", target, k as usize)?;
            }
        }
        Ok(())
    });
    KernelSpec::new(
        gmm_model(data.len()),
        aux,
        transform,
        gmm_observations(data),
    )
    .named("gmm-cluster-swap")
}

// ---------------------------------------------------------------------------
// Gaussian-process structure learning

/// A covariance-function expression: four leaf kernels and two combinators.
/// Stored in traces as a namespace per node — `kind` holds the production
/// choice, hyperparameters live beside it, children under `left`/`right`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovExpr {
    /// Constant covariance `c`.
    Constant(f64),
    /// Dot-product kernel `(x − offset)·(x' − offset)`.
    Linear(f64),
    /// `exp(−(x − x')² / (2·length²))`.
    SquaredExponential(f64),
    /// `exp(−2·sin²(π·|x − x'| / period) / length²)`.
    Periodic { length: f64, period: f64 },
    Plus(Box<CovExpr>, Box<CovExpr>),
    Times(Box<CovExpr>, Box<CovExpr>),
}

/// Production weights over `kind`: 0.7 spread over the four leaves, 0.15
/// each for `Plus` and `Times`. Mean branching 0.6 < 1, so prior trees are
/// almost surely finite.
const PCFG_WEIGHTS: [f64; 6] = [0.175, 0.175, 0.175, 0.175, 0.15, 0.15];

impl CovExpr {
    /// Covariance between two inputs.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            CovExpr::Constant(c) => *c,
            CovExpr::Linear(offset) => (x - offset) * (y - offset),
            CovExpr::SquaredExponential(length) => {
                let d = x - y;
                (-d * d / (2.0 * length * length)).exp()
            }
            CovExpr::Periodic { length, period } => {
                let s = (std::f64::consts::PI * (x - y).abs() / period).sin();
                (-2.0 * s * s / (length * length)).exp()
            }
            CovExpr::Plus(a, b) => a.eval(x, y) + b.eval(x, y),
            CovExpr::Times(a, b) => a.eval(x, y) * b.eval(x, y),
        }
    }

    /// The Gram matrix on `xs`.
    pub fn matrix(&self, xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), xs.len(), |r, c| self.eval(xs[r], xs[c]))
    }

    /// Number of nodes in the expression tree.
    pub fn size(&self) -> usize {
        match self {
            CovExpr::Plus(a, b) | CovExpr::Times(a, b) => 1 + a.size() + b.size(),
            _ => 1,
        }
    }

    /// Reconstructs the expression stored under `prefix` in a trace;
    /// `None` if the addresses there do not describe a well-formed tree.
    pub fn from_trace(trace: &Trace, prefix: &Address) -> Option<CovExpr> {
        let scalar = |name: &str| {
            trace
                .get(&prefix.child(name))
                .and_then(Value::as_scalar)
        };
        match trace.get(&prefix.child("kind")).and_then(Value::as_int)? {
            0 => Some(CovExpr::Constant(scalar("c")?)),
            1 => Some(CovExpr::Linear(scalar("offset")?)),
            2 => Some(CovExpr::SquaredExponential(scalar("length")?)),
            3 => Some(CovExpr::Periodic { length: scalar("length")?, period: scalar("period")? }),
            kind @ (4 | 5) => {
                let left = CovExpr::from_trace(trace, &prefix.child("left"))?;
                let right = CovExpr::from_trace(trace, &prefix.child("right"))?;
                let (l, r) = (Box::new(left), Box::new(right));
                Some(if kind == 4 { CovExpr::Plus(l, r) } else { CovExpr::Times(l, r) })
            }
            _ => None,
        }
    }

    /// The trace entries this expression occupies under `prefix`; inverse
    /// of [`CovExpr::from_trace`], useful for seeding chains at a chosen
    /// structure.
    pub fn to_trace(&self, prefix: &Address, out: &mut Vec<(Address, Value)>) {
        let kind = Value::int;
        let scalar = |x: f64| Value::scalar(x).expect("finite hyperparameter");
        match self {
            CovExpr::Constant(c) => {
                out.push((prefix.child("kind"), kind(0)));
                out.push((prefix.child("c"), scalar(*c)));
            }
            CovExpr::Linear(offset) => {
                out.push((prefix.child("kind"), kind(1)));
                out.push((prefix.child("offset"), scalar(*offset)));
            }
            CovExpr::SquaredExponential(length) => {
                out.push((prefix.child("kind"), kind(2)));
                out.push((prefix.child("length"), scalar(*length)));
            }
            CovExpr::Periodic { length, period } => {
                out.push((prefix.child("kind"), kind(3)));
                out.push((prefix.child("length"), scalar(*length)));
                out.push((prefix.child("period"), scalar(*period)));
            }
            CovExpr::Plus(a, b) | CovExpr::Times(a, b) => {
                let k = if matches!(self, CovExpr::Plus(..)) { 4 } else { 5 };
                out.push((prefix.child("kind"), kind(k)));
                a.to_trace(&prefix.child("left"), out);
                b.to_trace(&prefix.child("right"), out);
            }
        }
    }
}

/// The grammar prior as a generative program: sample a production, then
/// hyperparameters (`gamma(1,1)`) or children as the production demands.
/// Returns the drawn expression so model code can build its Gram matrix.
fn cov_prior(interp: &mut Interp<'_>) -> Result<CovExpr, Stop> {
    let kind = interp
        .sample("kind", categorical(PCFG_WEIGHTS.to_vec())?)?
        .as_int()
        .expect("kind is an integer");
    let scalar = |interp: &mut Interp<'_>, name: &'static str| -> Result<f64, Stop> {
        Ok(interp
            .sample(name, gamma(1.0, 1.0)?)?
            .as_scalar()
            .expect("hyperparameter is a scalar"))
    };
    Ok(match kind {
        0 => CovExpr::Constant(scalar(interp, "c")?),
        1 => CovExpr::Linear(scalar(interp, "offset")?),
        2 => CovExpr::SquaredExponential(scalar(interp, "length")?),
        3 => {
            let length = scalar(interp, "length")?;
            let period = scalar(interp, "period")?;
            CovExpr::Periodic { length, period }
        }
        4 => CovExpr::Plus(
            Box::new(interp.in_scope("left", cov_prior)?),
            Box::new(interp.in_scope("right", cov_prior)?),
        ),
        5 => CovExpr::Times(
            Box::new(interp.in_scope("left", cov_prior)?),
            Box::new(interp.in_scope("right", cov_prior)?),
        ),
        _ => unreachable!("six productions"),
    })
}

/// Builds the observation distribution `N(0, K + noise·I)`, climbing a
/// jitter ladder (1e-8 up to 1e-4 on the diagonal) if the factorization
/// fails; `None` when even the largest jitter cannot rescue it.
fn gp_likelihood(expr: &CovExpr, xs: &[f64], noise: f64) -> Option<Distribution> {
    let base = expr.matrix(xs);
    for jitter in [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4] {
        let mut cov = base.clone();
        for i in 0..xs.len() {
            cov[(i, i)] += noise + jitter;
        }
        if let Ok(d) = mvnormal(vec![0.0; xs.len()], cov) {
            return Some(d);
        }
    }
    None
}

/// Marginal likelihood `log N(ys; 0, K + noise_var·I)` for an expression,
/// with the same jitter ladder as the model; `-inf` if the covariance never
/// factors, `0.0` for an empty dataset (an empty product of densities).
pub fn gp_marginal_loglik(expr: &CovExpr, xs: &[f64], ys: &[f64], noise_var: f64) -> f64 {
    assert_eq!(xs.len(), ys.len(), "inputs and outputs must pair up");
    assert!(noise_var > 0.0, "noise variance must be positive");
    if xs.is_empty() {
        return 0.0;
    }
    let Some(dist) = gp_likelihood(expr, xs, noise_var) else {
        return f64::NEG_INFINITY;
    };
    let y = Value::continuous(ys.to_vec()).expect("finite outputs");
    dist.logpdf(&y).unwrap_or(f64::NEG_INFINITY)
}

/// Structure-learning model: a covariance expression from the grammar prior
/// under the `cov` namespace, observation noise `noise ~ inv_gamma(1,1)`,
/// and the outputs as one vector-valued site `y` with the GP marginal
/// likelihood.
pub fn gp_model(xs: Vec<f64>) -> Model {
    Model::new("gp-structure", move |interp| {
        let expr = interp.in_scope("cov", cov_prior)?;
        let noise = interp
            .sample("noise", inv_gamma(1.0, 1.0)?)?
            .as_scalar()
            .expect("noise is a scalar");
        match gp_likelihood(&expr, &xs, noise) {
            Some(dist) => {
                interp.sample("y", dist)?;
                Ok(())
            }
            None => Err(Stop::ZeroDensity {
                reason: "covariance failed to factor after jitter retries".into(),
            }),
        }
    })
}

/// The GP outputs as an observation trace (a single vector at `y`).
pub fn gp_observations(ys: &[f64]) -> Trace {
    Trace::from_pairs([(
        addr!("y"),
        Value::continuous(ys.to_vec()).expect("finite outputs"),
    )])
    .expect("single address")
}

/// How the subtree-selection walk descends the expression tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkKind {
    /// Stop at each internal node with probability 1/2, recurse into either
    /// child with probability 1/2: deeper nodes are exponentially less
    /// likely targets.
    Geometric,
    /// Stop with probability 1/(1 + size(left) + size(right)) and recurse
    /// in proportion to subtree sizes, which selects uniformly over nodes.
    Uniform,
}

/// Nodes are counted by their `kind` markers when sizing subtrees from a
/// trace.
fn trace_tree_size(trace: &Trace, node: &Address) -> usize {
    trace
        .under(node)
        .filter(|(a, _)| {
            matches!(
                a.components().last(),
                Some(crate::addr::Component::Key(k)) if k == "kind"
            )
        })
        .count()
}

fn walk_tree(
    given: &Trace,
    interp: &mut Interp<'_>,
    node: Address,
    kind: WalkKind,
) -> Result<(), Stop> {
    let Some(production) = given.get(&node.child("kind")).and_then(Value::as_int) else {
        // The walk has stepped outside the tree recorded in the model
        // trace; such a choice sequence has no mass.
        return Err(Stop::ZeroDensity {
            reason: format!("walk descends below a leaf at `{node}`"),
        });
    };
    let internal = production >= 4;
    let sizes = || {
        let n1 = trace_tree_size(given, &node.child("left")) as f64;
        let n2 = trace_tree_size(given, &node.child("right")) as f64;
        (n1, n2)
    };
    let p_done = match (internal, kind) {
        (false, _) => 1.0,
        (true, WalkKind::Geometric) => 0.5,
        (true, WalkKind::Uniform) => {
            let (n1, n2) = sizes();
            1.0 / (1.0 + n1 + n2)
        }
    };
    let done = interp
        .sample("done", bernoulli(p_done)?)?
        .as_bool()
        .expect("done is boolean");
    if done {
        return Ok(());
    }
    let p_left = match kind {
        WalkKind::Geometric => 0.5,
        WalkKind::Uniform => {
            let (n1, n2) = sizes();
            n1 / (n1 + n2)
        }
    };
    let left = interp
        .sample("recurse_left", bernoulli(p_left)?)?
        .as_bool()
        .expect("recurse_left is boolean");
    let step = if left { "left" } else { "right" };
    interp.in_scope(step, |i| walk_tree(given, i, node.child(step), kind))
}

fn gp_aux(kind: WalkKind) -> Auxiliary {
    let name = match kind {
        WalkKind::Geometric => "gp-subtree-aux-geometric",
        WalkKind::Uniform => "gp-subtree-aux-uniform",
    };
    Auxiliary::new(name, move |given, interp| {
        interp.in_scope("path", |i| walk_tree(given, i, addr!("cov"), kind))?;
        interp.in_scope("new_subtree", cov_prior)?;
        Ok(())
    })
}

fn gp_transform() -> Transform {
    Transform::new("gp-subtree-swap", |ctx| {
        // Replay the walk's recorded choices to find the chosen node.
        let mut node = addr!("cov");
        let mut path = addr!("path");
        loop {
            if ctx.read_bool(In::Aux, path.child("done"))? {
                break;
            }
            let step = if ctx.read_bool(In::Aux, path.child("recurse_left"))? {
                "left"
            } else {
                "right"
            };
            node = node.child(step);
            path = path.child(step);
        }
        // The walk itself transfers unchanged: replayed on the new tree it
        // reaches the same node (all strict ancestors keep their kinds).
        ctx.copy_namespace(In::Aux, &addr!("path"), Out::Aux, &addr!("path"))?;
        // Swap: old subtree out to the auxiliary side, proposed subtree in.
        ctx.copy_namespace(In::Model, &node, Out::Aux, &addr!("new_subtree"))?;
        ctx.copy_namespace(In::Aux, &addr!("new_subtree"), Out::Model, &node)?;
        for a in ctx.addresses_under(In::Model, &addr!("cov")) {
            if !a.starts_with(&node) {
                ctx.copy(In::Model, a)?;
            }
        }
        ctx.copy(In::Model, "noise")?;
        Ok(())
    })
}

/// Subtree-regeneration move for [`gp_model`]: walk to a node, propose a
/// fresh prior subtree there, stash the old one in the auxiliary output so
/// the move inverts itself. Every write is a copy — acceptance is governed
/// entirely by the density ratios.
pub fn gp_structure_kernel(xs: &[f64], ys: &[f64], kind: WalkKind) -> KernelSpec {
    let name = match kind {
        WalkKind::Geometric => "gp-subtree-swap",
        WalkKind::Uniform => "gp-subtree-swap-uniform",
    };
    KernelSpec::new(
        gp_model(xs.to_vec()),
        gp_aux(kind),
        gp_transform(),
        gp_observations(ys),
    )
    .named(name)
}

/// Log-scale random walk on the GP observation noise: `noise' = noise·e^d`
/// with `d ~ normal(0, 0.5)` negated on the way out. The Jacobian
/// contributes `log D = d`. Tolerance loosened as for the mixture kernel:
/// heavy-tailed prior draws of `noise` leave ~1e-10 absolute float residue
/// in an algebraically exact round trip.
pub fn gp_noise_walk_kernel(xs: &[f64], ys: &[f64]) -> KernelSpec {
    let aux = Auxiliary::new("gp-noise-walk-aux", |_, interp| {
        interp.sample("step", normal(0.0, 0.5)?)?;
        Ok(())
    });
    let transform = Transform::new("gp-noise-walk", |ctx| {
        let noise = ctx.read(In::Model, "noise")?;
        let d = ctx.read(In::Aux, "step")?;
        ctx.write(Out::Model, "noise", &noise * d.exp())?;
        ctx.write(Out::Aux, "step", -&d)?;
        ctx.copy_namespace(In::Model, &addr!("cov"), Out::Model, &addr!("cov"))?;
        Ok(())
    });
    KernelSpec::new(gp_model(xs.to_vec()), aux, transform, gp_observations(ys))
        .named("gp-noise-walk")
        .with_options(KernelOptions { equality_tol: 1e-6, ..KernelOptions::default() })
}

// ---------------------------------------------------------------------------
// Hamiltonian Monte Carlo

type SharedForce = Arc<dyn Fn(&[DiffScalar]) -> Vec<DiffScalar> + Send + Sync>;

/// Hamiltonian Monte Carlo as an involutive kernel over a fixed set of
/// scalar positions. The auxiliary program draws a standard-normal momentum
/// per position; the transform runs `steps` leapfrog steps of size `eps`
/// and negates the momenta. `force` evaluates the gradient of the potential
/// `U = −log p̃` at a position vector, in differentiable scalars so the
/// engine can confirm the integrator's volume preservation numerically.
pub fn hmc_kernel(
    model: Model,
    observations: Trace,
    positions: Vec<Address>,
    force: impl Fn(&[DiffScalar]) -> Vec<DiffScalar> + Send + Sync + 'static,
    eps: f64,
    steps: usize,
) -> KernelSpec {
    hmc_kernel_inner(model, observations, positions, Arc::new(force), eps, steps, true)
}

fn hmc_kernel_inner(
    model: Model,
    observations: Trace,
    positions: Vec<Address>,
    force: SharedForce,
    eps: f64,
    steps: usize,
    negate: bool,
) -> KernelSpec {
    let d = positions.len();
    let aux = Auxiliary::new("hmc-momenta", move |_, interp| {
        for i in 0..d {
            interp.sample(("p", i as i64), normal(0.0, 1.0)?)?;
        }
        Ok(())
    });
    let addrs = positions.clone();
    let transform = Transform::new("hmc-leapfrog", move |ctx| {
        let mut qs: Vec<DiffScalar> = addrs
            .iter()
            .map(|a| ctx.read(In::Model, a.clone()))
            .collect::<Result<_, _>>()?;
        let mut ps: Vec<DiffScalar> = (0..addrs.len())
            .map(|i| ctx.read(In::Aux, ("p", i as i64)))
            .collect::<Result<_, _>>()?;
        for _ in 0..steps {
            let g = force(&qs);
            for i in 0..qs.len() {
                ps[i] = &ps[i] - (0.5 * eps) * &g[i];
            }
            for i in 0..qs.len() {
                qs[i] = &qs[i] + eps * &ps[i];
            }
            let g = force(&qs);
            for i in 0..qs.len() {
                ps[i] = &ps[i] - (0.5 * eps) * &g[i];
            }
        }
        for (i, (a, q)) in addrs.iter().zip(qs).enumerate() {
            ctx.write(Out::Model, a.clone(), q)?;
            let p = if negate { -&ps[i] } else { ps[i].clone() };
            ctx.write(Out::Aux, ("p", i as i64), p)?;
        }
        Ok(())
    });
    KernelSpec::new(model, aux, transform, observations).named("hmc-leapfrog")
}

/// HMC on a single standard-normal coordinate `x`, the reference instance
/// whose moments are known exactly.
pub fn hmc_standard_normal_kernel(eps: f64, steps: usize) -> KernelSpec {
    let model = Model::new("standard-normal", |interp| {
        interp.sample("x", normal(0.0, 1.0)?)?;
        Ok(())
    });
    hmc_kernel(
        model,
        Trace::empty(),
        vec![addr!("x")],
        |q| q.to_vec(), // ∇U(x) = x for U = x²/2
        eps,
        steps,
    )
}

/// The classic leapfrog bug: momenta come out un-negated, so the map fails
/// to be an involution. Exists to demonstrate the round-trip check firing.
pub fn hmc_no_negation_kernel(eps: f64, steps: usize) -> KernelSpec {
    let model = Model::new("standard-normal", |interp| {
        interp.sample("x", normal(0.0, 1.0)?)?;
        Ok(())
    });
    hmc_kernel_inner(
        model,
        Trace::empty(),
        vec![addr!("x")],
        Arc::new(|q: &[DiffScalar]| q.to_vec()),
        eps,
        steps,
        false,
    )
    .named("hmc-no-negation")
}

// ---------------------------------------------------------------------------
// Fully discrete kernels

/// Deterministic flip of a biased coin (`coin ~ bernoulli(0.3)`), the
/// smallest possible involutive kernel: no auxiliary randomness at all.
pub fn flip_kernel() -> KernelSpec {
    let model = Model::new("coin", |interp| {
        interp.sample("coin", bernoulli(0.3)?)?;
        Ok(())
    });
    let transform = Transform::new("coin-flip", |ctx| {
        let c = ctx.read_bool(In::Model, "coin")?;
        ctx.write_discrete(Out::Model, "coin", !c)?;
        Ok(())
    });
    KernelSpec::new(model, no_aux(), transform, Trace::empty()).named("bernoulli-flip")
}

/// Two dependent binary sites — `a ~ bernoulli(0.6)`,
/// `b ~ bernoulli(a ? 0.3 : 0.8)` — with a kernel that flips `b` and copies
/// `a`. Exercises conditional dependence in the brute-force oracles.
pub fn two_site_kernel() -> KernelSpec {
    let model = Model::new("two-site", |interp| {
        let a = interp
            .sample("a", bernoulli(0.6)?)?
            .as_bool()
            .expect("a is boolean");
        interp.sample("b", bernoulli(if a { 0.3 } else { 0.8 })?)?;
        Ok(())
    });
    let transform = Transform::new("flip-b", |ctx| {
        let b = ctx.read_bool(In::Model, "b")?;
        ctx.copy(In::Model, "a")?;
        ctx.write_discrete(Out::Model, "b", !b)?;
        Ok(())
    });
    KernelSpec::new(model, no_aux(), transform, Trace::empty()).named("two-site-flip")
}

/// Random walk on three categories by modular shift: `v' = (v + t) mod 3`
/// with `t` uniform; the inverse shift is written back so the move is an
/// involution. A smallest-possible kernel with genuine auxiliary
/// randomness.
pub fn categorical_walk_kernel() -> KernelSpec {
    let model = Model::new("three-state", |interp| {
        interp.sample("v", categorical(vec![0.5, 0.3, 0.2])?)?;
        Ok(())
    });
    let aux = Auxiliary::new("shift-aux", |_, interp| {
        interp.sample("t", uniform_discrete(0, 2)?)?;
        Ok(())
    });
    let transform = Transform::new("mod-shift", |ctx| {
        let v = ctx.read_int(In::Model, "v")?;
        let t = ctx.read_int(In::Aux, "t")?;
        ctx.write_discrete(Out::Model, "v", (v + t) % 3)?;
        ctx.write_discrete(Out::Aux, "t", (3 - t) % 3)?;
        Ok(())
    });
    KernelSpec::new(model, aux, transform, Trace::empty()).named("categorical-walk")
}

/// A four-state kernel whose transform is a correct involution on states
/// {0,1} but broken on {2,3}: it maps 2 → 3 → 0, so the round-trip check
/// fails exactly when the chain stands in the broken region. Under
/// reject-on-failure those moves are refused and the restriction of the
/// chain to the healthy region still satisfies detailed balance; with
/// checks off the same kernel violates it.
pub fn subregion_bug_kernel(mode: CheckMode) -> KernelSpec {
    let model = Model::new("four-state", |interp| {
        interp.sample("v", categorical(vec![0.4, 0.3, 0.2, 0.1])?)?;
        Ok(())
    });
    let transform = Transform::new("partial-swap", |ctx| {
        let v = ctx.read_int(In::Model, "v")?;
        let out = match v {
            0 => 1,
            1 => 0,
            2 => 3,
            _ => 0, // should be 2; the involution breaks here
        };
        ctx.write_discrete(Out::Model, "v", out)?;
        Ok(())
    });
    KernelSpec::new(model, no_aux(), transform, Trace::empty())
        .named("subregion-bug")
        .with_options(KernelOptions { check_mode: mode, ..KernelOptions::default() })
}

// ---------------------------------------------------------------------------
// Seeded bugs

/// The sqrt-merge bug: identical to [`toy_split_merge_kernel`] except the
/// merged mean is the geometric mean `√(mu1·mu2)` instead of the midpoint.
/// Splitting the merged state never lands back on the inputs, so the
/// round-trip check fires; with means of opposite sign the square root is
/// not even defined and the transform faults outright.
pub fn toy_sqrt_merge_kernel(data: &[f64]) -> KernelSpec {
    KernelSpec::new(
        toy_two_mean_model(data.len()),
        toy_split_merge_aux(),
        toy_split_merge_transform(|mu1, mu2| (mu1 * mu2).sqrt()),
        toy_observations(data),
    )
    .named("toy-sqrt-merge")
}

/// Prior-only model with an unbounded number of component means:
/// `k ~ poisson_plus_one(1)`, `mu(j) ~ normal(0,10)` for `j = 1..=k`. Small
/// enough that the birth/death bug below is isolated from any likelihood.
pub fn bd_model() -> Model {
    Model::new("bd-components", |interp| {
        let k = interp
            .sample("k", poisson_plus_one(1.0)?)?
            .as_int()
            .expect("k is an integer");
        for j in 1..=k {
            interp.sample(("mu", j), normal(0.0, 10.0)?)?;
        }
        Ok(())
    })
}

/// A birth/death move with a discrete bookkeeping bug: births always append
/// the new component at the end and record `deletion_idx = k+1`, yet deaths
/// honor an arbitrary `deletion_idx`, shifting later components down. Death
/// at an interior index followed by the recorded rebirth re-inserts the
/// component at the wrong position, so the round-trip check catches it.
pub fn bd_end_only_kernel() -> KernelSpec {
    let aux = Auxiliary::new("bd-aux", |given, interp| {
        let k = given
            .get(&addr!("k"))
            .and_then(Value::as_int)
            .expect("model trace has k");
        let p_birth = if k == 1 { 1.0 } else { 0.5 };
        let birth = interp
            .sample("is_birth", bernoulli(p_birth)?)?
            .as_bool()
            .expect("is_birth is boolean");
        if birth {
            interp.sample("new_mu", normal(0.0, 10.0)?)?;
        } else {
            interp.sample("deletion_idx", uniform_discrete(1, k)?)?;
        }
        Ok(())
    });
    let transform = Transform::new("bd-end-only", |ctx| {
        let k = ctx.read_int(In::Model, "k")?;
        if ctx.read_bool(In::Aux, "is_birth")? {
            ctx.write_discrete(Out::Model, "k", k + 1)?;
            for j in 1..=k {
                ctx.copy(In::Model, ("mu", j))?;
            }
            ctx.copy_as(In::Aux, "new_mu", Out::Model, ("mu", k + 1))?;
            ctx.write_discrete(Out::Aux, "is_birth", false)?;
            ctx.write_discrete(Out::Aux, "deletion_idx", k + 1)?;
        } else {
            let idx = ctx.read_int(In::Aux, "deletion_idx")?;
            ctx.write_discrete(Out::Model, "k", k - 1)?;
            for j in 1..idx {
                ctx.copy(In::Model, ("mu", j))?;
            }
            for j in (idx + 1)..=k {
                ctx.copy_as(In::Model, ("mu", j), Out::Model, ("mu", j - 1))?;
            }
            ctx.copy_as(In::Model, ("mu", idx), Out::Aux, "new_mu")?;
            ctx.write_discrete(Out::Aux, "is_birth", true)?;
        }
        Ok(())
    });
    KernelSpec::new(bd_model(), aux, transform, Trace::empty()).named("bd-end-only")
}

/// The typo bug: the split branch writes the second mean to `nu(2)` instead
/// of `mu(2)`. The proposed trace then has an address the model never
/// visits and is missing one it requires — precisely what the structural
/// support check exists to catch.
pub fn toy_misspelled_kernel(data: &[f64]) -> KernelSpec {
    let transform = Transform::new("toy-misspelled", |ctx| {
        let k = ctx.read_int(In::Model, "k")?;
        if k == 1 {
            let mu = ctx.read(In::Model, ("mu", 1))?;
            let u = ctx.read(In::Aux, "u")?;
            ctx.write_discrete(Out::Model, "k", 2i64)?;
            ctx.write(Out::Model, ("mu", 1), &mu - &u)?;
            ctx.write(Out::Model, ("nu", 2), &mu + &u)?;
        } else {
            let mu1 = ctx.read(In::Model, ("mu", 1))?;
            let mu2 = ctx.read(In::Model, ("mu", 2))?;
            ctx.write_discrete(Out::Model, "k", 1i64)?;
            ctx.write(Out::Model, ("mu", 1), (&mu1 + &mu2) / 2.0)?;
            ctx.write(Out::Aux, "u", (&mu2 - &mu1) / 2.0)?;
        }
        Ok(())
    });
    KernelSpec::new(
        toy_two_mean_model(data.len()),
        toy_split_merge_aux(),
        transform,
        toy_observations(data),
    )
    .named("toy-misspelled")
}

/// The three seeded-bug kernels, each detectable by a different check:
/// wrong merge algebra (round trip), broken discrete bookkeeping (round
/// trip on the death side), and a misspelled address (structural support).
pub fn buggy_kernels() -> Vec<KernelSpec> {
    let data = toy_smoke_dataset();
    vec![
        toy_sqrt_merge_kernel(&data),
        bd_end_only_kernel(),
        toy_misspelled_kernel(&data),
    ]
}

/// Every correct kernel in the zoo, instantiated on its standing dataset —
/// the population that must sail through the dynamic checks.
pub fn correct_kernels() -> Vec<KernelSpec> {
    let toy = toy_smoke_dataset();
    let gmm = gmm_dataset();
    let (xs, ys) = gp_dataset();
    vec![
        toy_split_merge_kernel(&toy),
        toy_walk_kernel(&toy, 0.5),
        gmm_split_merge_kernel(&gmm),
        gmm_cluster_swap_kernel(&gmm),
        gp_structure_kernel(&xs, &ys, WalkKind::Geometric),
        gp_structure_kernel(&xs, &ys, WalkKind::Uniform),
        gp_noise_walk_kernel(&xs, &ys),
        hmc_standard_normal_kernel(0.3, 5),
        flip_kernel(),
        two_site_kernel(),
        categorical_walk_kernel(),
    ]
}
