//! Primitive distributions with exact log-densities.
//!
//! Every kind pairs a sampler with a hand-written log-density over the same
//! reference measure (counting measure for discrete kinds, Lebesgue of the
//! value's dimension for continuous kinds, `k-1`-dimensional Lebesgue for
//! the Dirichlet simplex). The contract the rest of the engine leans on:
//!
//! * parameters are validated at construction ([`DistError::InvalidParams`]);
//! * `logpdf` of an out-of-support or wrong-shape value is `-inf`, **never**
//!   NaN — acceptance ratios stay well-defined arithmetic;
//! * a discrete/continuous tag confusion is a programming error and reported
//!   as [`DistError::TagMismatch`] instead of a density.
//!
//! Densities are never differentiated here; transform Jacobians only ever
//! differentiate the transform map itself.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::Distribution as RandDistribution;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::rng::RandomSource;
use crate::value::{Discrete, Tag, Value};

const LN_2PI: f64 = 1.8378770664093456;

/// Errors raised by distribution construction and scoring.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid parameters for {kind}: {msg}")]
    InvalidParams { kind: &'static str, msg: String },
    #[error("tag mismatch scoring {kind}: expected a {expected} value, got {got}")]
    TagMismatch {
        kind: &'static str,
        expected: Tag,
        got: Tag,
    },
}

fn invalid(kind: &'static str, msg: impl Into<String>) -> DistError {
    DistError::InvalidParams {
        kind,
        msg: msg.into(),
    }
}

/// A multivariate normal with its Cholesky factor precomputed at
/// construction (construction fails unless the covariance is symmetric
/// positive definite).
#[derive(Debug, Clone)]
pub struct MvNormal {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

/// A primitive distribution.
#[derive(Debug, Clone)]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    InvGamma { shape: f64, scale: f64 },
    Beta { a: f64, b: f64 },
    Gamma { shape: f64, scale: f64 },
    PoissonPlusOne { rate: f64 },
    Bernoulli { p: f64 },
    UniformDiscrete { lo: i64, hi: i64 },
    Categorical { weights: Vec<f64>, total: f64 },
    Dirichlet { alphas: Vec<f64> },
    MixtureOfNormals { weights: Vec<f64>, means: Vec<f64>, vars: Vec<f64> },
    MvNormal(Box<MvNormal>),
}

fn require_finite(kind: &'static str, name: &str, x: f64) -> Result<f64, DistError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(kind, format!("{name} must be finite, got {x}")))
    }
}

fn require_positive(kind: &'static str, name: &str, x: f64) -> Result<f64, DistError> {
    require_finite(kind, name, x)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(kind, format!("{name} must be > 0, got {x}")))
    }
}

/// `normal(mean, sd)` over the reals.
pub fn normal(mean: f64, sd: f64) -> Result<Distribution, DistError> {
    require_finite("normal", "mean", mean)?;
    require_positive("normal", "sd", sd)?;
    Ok(Distribution::Normal { mean, sd })
}

/// `inv_gamma(shape, scale)` with density proportional to
/// `x^(-shape-1) * exp(-scale/x)` on `x > 0`.
pub fn inv_gamma(shape: f64, scale: f64) -> Result<Distribution, DistError> {
    require_positive("inv_gamma", "shape", shape)?;
    require_positive("inv_gamma", "scale", scale)?;
    Ok(Distribution::InvGamma { shape, scale })
}

/// `beta(a, b)` on the open interval `(0, 1)`.
pub fn beta(a: f64, b: f64) -> Result<Distribution, DistError> {
    require_positive("beta", "a", a)?;
    require_positive("beta", "b", b)?;
    Ok(Distribution::Beta { a, b })
}

/// `gamma(shape, scale)` with density proportional to
/// `x^(shape-1) * exp(-x/scale)` on `x > 0`.
pub fn gamma(shape: f64, scale: f64) -> Result<Distribution, DistError> {
    require_positive("gamma", "shape", shape)?;
    require_positive("gamma", "scale", scale)?;
    Ok(Distribution::Gamma { shape, scale })
}

/// `poisson_plus_one(rate)`: one plus a Poisson count, supported on the
/// positive integers.
pub fn poisson_plus_one(rate: f64) -> Result<Distribution, DistError> {
    require_positive("poisson_plus_one", "rate", rate)?;
    Ok(Distribution::PoissonPlusOne { rate })
}

/// `bernoulli(p)` over booleans; degenerate `p` of 0 or 1 is allowed.
pub fn bernoulli(p: f64) -> Result<Distribution, DistError> {
    require_finite("bernoulli", "p", p)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("bernoulli", format!("p must lie in [0,1], got {p}")));
    }
    Ok(Distribution::Bernoulli { p })
}

/// `uniform_discrete(lo, hi)`: uniform over the integers `lo..=hi`.
pub fn uniform_discrete(lo: i64, hi: i64) -> Result<Distribution, DistError> {
    if lo > hi {
        return Err(invalid(
            "uniform_discrete",
            format!("empty range {lo}..={hi}"),
        ));
    }
    Ok(Distribution::UniformDiscrete { lo, hi })
}

/// `categorical(weights)` over `0..weights.len()`, weights non-negative with
/// positive total (normalization is implicit).
pub fn categorical(weights: Vec<f64>) -> Result<Distribution, DistError> {
    if weights.is_empty() {
        return Err(invalid("categorical", "no categories"));
    }
    for &w in &weights {
        if !w.is_finite() || w < 0.0 {
            return Err(invalid("categorical", format!("bad weight {w}")));
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(invalid("categorical", "weights sum to zero"));
    }
    Ok(Distribution::Categorical { weights, total })
}

/// `dirichlet(alphas)` over the open `k-1` simplex (density with respect to
/// Lebesgue measure on the first `k-1` coordinates).
pub fn dirichlet(alphas: Vec<f64>) -> Result<Distribution, DistError> {
    if alphas.len() < 2 {
        return Err(invalid("dirichlet", "need at least two concentrations"));
    }
    for &a in &alphas {
        require_positive("dirichlet", "alpha", a)?;
    }
    Ok(Distribution::Dirichlet { alphas })
}

/// `mixture_of_normals(weights, means, vars)`: a scalar mixture
/// parameterized by component **variances**.
pub fn mixture_of_normals(
    weights: Vec<f64>,
    means: Vec<f64>,
    vars: Vec<f64>,
) -> Result<Distribution, DistError> {
    let kind = "mixture_of_normals";
    if weights.is_empty() || weights.len() != means.len() || weights.len() != vars.len() {
        return Err(invalid(
            kind,
            format!(
                "component counts disagree: {} weights, {} means, {} vars",
                weights.len(),
                means.len(),
                vars.len()
            ),
        ));
    }
    for &w in &weights {
        if !w.is_finite() || w < 0.0 {
            return Err(invalid(kind, format!("bad weight {w}")));
        }
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(invalid(kind, "weights sum to zero"));
    }
    for &m in &means {
        require_finite(kind, "mean", m)?;
    }
    for &v in &vars {
        require_positive(kind, "variance", v)?;
    }
    Ok(Distribution::MixtureOfNormals { weights, means, vars })
}

/// `mvnormal(mean, cov)`: a dense multivariate normal. The covariance must
/// be symmetric positive definite; factorization happens once, here.
pub fn mvnormal(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Distribution, DistError> {
    let kind = "mvnormal";
    let d = mean.len();
    if d == 0 || cov.nrows() != d || cov.ncols() != d {
        return Err(invalid(
            kind,
            format!("mean has {} entries but cov is {}x{}", d, cov.nrows(), cov.ncols()),
        ));
    }
    for &m in &mean {
        require_finite(kind, "mean", m)?;
    }
    let asym = (&cov - cov.transpose()).abs().max();
    if !asym.is_finite() || asym > 1e-8 * (1.0 + cov.abs().max()) {
        return Err(invalid(kind, "covariance is not symmetric"));
    }
    let chol = Cholesky::new(cov).ok_or_else(|| invalid(kind, "covariance is not positive definite"))?;
    let log_det: f64 = chol.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
    let log_norm = -0.5 * (d as f64) * LN_2PI - 0.5 * log_det;
    Ok(Distribution::MvNormal(Box::new(MvNormal {
        mean: DVector::from_vec(mean),
        chol,
        log_norm,
    })))
}

fn normal_logpdf(v: f64, mean: f64, sd: f64) -> f64 {
    let z = (v - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

/// `ln(n!)` with an exact integer path for small `n` (so e.g. the
/// `poisson_plus_one(1)` pmf at 1 is exactly `-rate`).
fn ln_factorial(n: i64) -> f64 {
    debug_assert!(n >= 0);
    if n < 2 {
        0.0
    } else if n <= 20 {
        (2..=n).map(|i| (i as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Numerically stable `ln(sum(exp(xs)))`; `-inf` for an all-`-inf` input.
pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Distribution {
    /// The name of this distribution kind, used in error messages.
    pub fn kind(&self) -> &'static str {
        match self {
            Distribution::Normal { .. } => "normal",
            Distribution::InvGamma { .. } => "inv_gamma",
            Distribution::Beta { .. } => "beta",
            Distribution::Gamma { .. } => "gamma",
            Distribution::PoissonPlusOne { .. } => "poisson_plus_one",
            Distribution::Bernoulli { .. } => "bernoulli",
            Distribution::UniformDiscrete { .. } => "uniform_discrete",
            Distribution::Categorical { .. } => "categorical",
            Distribution::Dirichlet { .. } => "dirichlet",
            Distribution::MixtureOfNormals { .. } => "mixture_of_normals",
            Distribution::MvNormal { .. } => "mvnormal",
        }
    }

    /// The tag values of this kind carry.
    pub fn tag(&self) -> Tag {
        match self {
            Distribution::Bernoulli { .. }
            | Distribution::PoissonPlusOne { .. }
            | Distribution::UniformDiscrete { .. }
            | Distribution::Categorical { .. } => Tag::Discrete,
            _ => Tag::Continuous,
        }
    }

    /// Draws a value from this distribution.
    pub fn sample(&self, rng: &mut RandomSource) -> Value {
        match self {
            Distribution::Normal { mean, sd } => {
                let d = rand_distr::Normal::new(*mean, *sd).expect("validated");
                Value::scalar(d.sample(rng)).expect("finite sample")
            }
            Distribution::InvGamma { shape, scale } => {
                // If G ~ gamma(shape, scale = 1/scale_param) then 1/G has the
                // inv_gamma(shape, scale_param) density.
                let d = rand_distr::Gamma::new(*shape, 1.0 / *scale).expect("validated");
                loop {
                    let g: f64 = d.sample(rng);
                    let x = 1.0 / g;
                    if x.is_finite() && x > 0.0 {
                        return Value::scalar(x).expect("finite sample");
                    }
                }
            }
            Distribution::Beta { a, b } => {
                let d = rand_distr::Beta::new(*a, *b).expect("validated");
                loop {
                    let x: f64 = d.sample(rng);
                    // Stay inside the open support; boundary draws are
                    // floating-point artifacts with measure zero.
                    if x > 0.0 && x < 1.0 {
                        return Value::scalar(x).expect("finite sample");
                    }
                }
            }
            Distribution::Gamma { shape, scale } => {
                let d = rand_distr::Gamma::new(*shape, *scale).expect("validated");
                loop {
                    let x: f64 = d.sample(rng);
                    if x.is_finite() && x > 0.0 {
                        return Value::scalar(x).expect("finite sample");
                    }
                }
            }
            Distribution::PoissonPlusOne { rate } => {
                let d = rand_distr::Poisson::new(*rate).expect("validated");
                let n: f64 = d.sample(rng);
                Value::int(n as i64 + 1)
            }
            Distribution::Bernoulli { p } => Value::bool(rng.uniform() < *p),
            Distribution::UniformDiscrete { lo, hi } => {
                let n = (hi - lo + 1) as f64;
                let i = (rng.uniform() * n).floor() as i64;
                Value::int(lo + i.min(hi - lo))
            }
            Distribution::Categorical { weights, total } => {
                Value::int(sample_index(weights, *total, rng) as i64)
            }
            Distribution::Dirichlet { alphas } => loop {
                let gs: Vec<f64> = alphas
                    .iter()
                    .map(|&a| {
                        let d = rand_distr::Gamma::new(a, 1.0).expect("validated");
                        d.sample(rng)
                    })
                    .collect();
                let total: f64 = gs.iter().sum();
                if total > 0.0 && total.is_finite() {
                    let ws: Vec<f64> = gs.iter().map(|g| g / total).collect();
                    if ws.iter().all(|&w| w > 0.0) {
                        return Value::continuous(ws).expect("finite sample");
                    }
                }
            },
            Distribution::MixtureOfNormals { weights, means, vars } => {
                let total: f64 = weights.iter().sum();
                let j = sample_index(weights, total, rng);
                let d = rand_distr::Normal::new(means[j], vars[j].sqrt()).expect("validated");
                Value::scalar(d.sample(rng)).expect("finite sample")
            }
            Distribution::MvNormal(mv) => {
                let std = rand_distr::StandardNormal;
                let z = DVector::from_iterator(
                    mv.mean.len(),
                    (0..mv.mean.len()).map(|_| std.sample(rng)),
                );
                let x = &mv.mean + mv.chol.l() * z;
                Value::continuous(x.iter().cloned().collect()).expect("finite sample")
            }
        }
    }

    /// The log-density of `v`.
    ///
    /// Out-of-support values — including wrong-shaped vectors of the right
    /// tag, which a buggy transform can produce — score `-inf`. Confusing
    /// the discrete/continuous tag is a programming error and is reported as
    /// such rather than silently scored.
    pub fn logpdf(&self, v: &Value) -> Result<f64, DistError> {
        match self {
            Distribution::Normal { mean, sd } => {
                let Some(x) = self.scalar_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                Ok(normal_logpdf(x, *mean, *sd))
            }
            Distribution::InvGamma { shape, scale } => {
                let Some(x) = self.scalar_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                if x <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(shape * scale.ln() - ln_gamma(*shape) - (shape + 1.0) * x.ln() - scale / x)
            }
            Distribution::Beta { a, b } => {
                let Some(x) = self.scalar_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                if x <= 0.0 || x >= 1.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                let ln_b = ln_gamma(*a) + ln_gamma(*b) - ln_gamma(a + b);
                Ok((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_b)
            }
            Distribution::Gamma { shape, scale } => {
                let Some(x) = self.scalar_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                if x <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok((shape - 1.0) * x.ln() - x / scale - ln_gamma(*shape) - shape * scale.ln())
            }
            Distribution::PoissonPlusOne { rate } => {
                let Discrete::Int(n) = self.discrete_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                let n = *n;
                if n < 1 {
                    return Ok(f64::NEG_INFINITY);
                }
                let k = n - 1;
                Ok(k as f64 * rate.ln() - rate - ln_factorial(k))
            }
            Distribution::Bernoulli { p } => {
                let Discrete::Bool(b) = self.discrete_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                Ok(if *b { p.ln() } else { (1.0 - p).ln() })
            }
            Distribution::UniformDiscrete { lo, hi } => {
                let Discrete::Int(n) = self.discrete_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                if n < lo || n > hi {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(-((hi - lo + 1) as f64).ln())
            }
            Distribution::Categorical { weights, total } => {
                let Discrete::Int(i) = self.discrete_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                let i = *i;
                if i < 0 || i as usize >= weights.len() {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(weights[i as usize].ln() - total.ln())
            }
            Distribution::Dirichlet { alphas } => {
                let Some(ws) = self.vector_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                if ws.len() != alphas.len()
                    || ws.iter().any(|&w| w <= 0.0)
                    || (ws.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Ok(f64::NEG_INFINITY);
                }
                let alpha0: f64 = alphas.iter().sum();
                let log_norm = ln_gamma(alpha0) - alphas.iter().map(|&a| ln_gamma(a)).sum::<f64>();
                Ok(log_norm
                    + alphas
                        .iter()
                        .zip(ws)
                        .map(|(&a, &w)| (a - 1.0) * w.ln())
                        .sum::<f64>())
            }
            Distribution::MixtureOfNormals { weights, means, vars } => {
                let Some(x) = self.scalar_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                let total: f64 = weights.iter().sum();
                let terms: Vec<f64> = weights
                    .iter()
                    .zip(means)
                    .zip(vars)
                    .map(|((&w, &m), &var)| {
                        (w / total).ln() + normal_logpdf(x, m, var.sqrt())
                    })
                    .collect();
                Ok(logsumexp(&terms))
            }
            Distribution::MvNormal(mv) => {
                let Some(xs) = self.vector_of(v)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                if xs.len() != mv.mean.len() {
                    return Ok(f64::NEG_INFINITY);
                }
                let centered = DVector::from_iterator(
                    xs.len(),
                    xs.iter().zip(mv.mean.iter()).map(|(x, m)| x - m),
                );
                // Solve L y = centered; the quadratic form is |y|^2.
                let y = mv.chol.l().solve_lower_triangular(&centered).expect("spd");
                Ok(mv.log_norm - 0.5 * y.norm_squared())
            }
        }
    }

    /// Enumerates the support of a discrete kind as `(value, logpmf)` pairs
    /// with positive mass; `None` for continuous kinds.
    ///
    /// The unbounded `poisson_plus_one` support is truncated once the
    /// remaining tail mass drops below `tail_eps`, and the retained masses
    /// are renormalized — this is an oracle-side convention; the engine's
    /// own scoring never truncates.
    pub fn enumerate_support(&self, tail_eps: f64) -> Option<Vec<(Discrete, f64)>> {
        match self {
            Distribution::Bernoulli { p } => Some(
                [(Discrete::Bool(false), (1.0 - p).ln()), (Discrete::Bool(true), p.ln())]
                    .into_iter()
                    .filter(|(_, lp)| *lp > f64::NEG_INFINITY)
                    .collect(),
            ),
            Distribution::UniformDiscrete { lo, hi } => {
                let lp = -((hi - lo + 1) as f64).ln();
                Some((*lo..=*hi).map(|i| (Discrete::Int(i), lp)).collect())
            }
            Distribution::Categorical { weights, total } => Some(
                weights
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(i, &w)| (Discrete::Int(i as i64), w.ln() - total.ln()))
                    .collect(),
            ),
            Distribution::PoissonPlusOne { .. } => {
                let mut out = Vec::new();
                let mut cum = 0.0;
                let mut n = 1i64;
                while 1.0 - cum >= tail_eps {
                    let lp = self
                        .logpdf(&Value::int(n))
                        .expect("integer value for poisson_plus_one");
                    out.push((Discrete::Int(n), lp));
                    cum += lp.exp();
                    n += 1;
                    assert!(n < 10_000, "poisson_plus_one tail failed to converge");
                }
                let log_cum = cum.ln();
                for (_, lp) in &mut out {
                    *lp -= log_cum;
                }
                Some(out)
            }
            _ => None,
        }
    }
}

impl Distribution {
    fn tag_mismatch(&self, v: &Value) -> DistError {
        DistError::TagMismatch {
            kind: self.kind(),
            expected: self.tag(),
            got: v.tag(),
        }
    }

    /// `Some(scalar)` for a length-1 continuous value, `None` for a
    /// continuous value of another shape (out of support), error on a
    /// discrete value.
    fn scalar_of(&self, v: &Value) -> Result<Option<f64>, DistError> {
        match v {
            Value::Continuous(xs) if xs.len() == 1 => Ok(Some(xs[0])),
            Value::Continuous(_) => Ok(None),
            Value::Discrete(_) => Err(self.tag_mismatch(v)),
        }
    }

    fn vector_of<'v>(&self, v: &'v Value) -> Result<Option<&'v [f64]>, DistError> {
        match v {
            Value::Continuous(xs) => Ok(Some(xs)),
            Value::Discrete(_) => Err(self.tag_mismatch(v)),
        }
    }

    fn discrete_of<'v>(&self, v: &'v Value) -> Result<&'v Discrete, DistError> {
        v.as_discrete().ok_or_else(|| self.tag_mismatch(v))
    }
}

fn sample_index(weights: &[f64], total: f64, rng: &mut RandomSource) -> usize {
    let u = rng.uniform() * total;
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{Continuous, ContinuousCDF, Discrete as _};

    fn scalar(x: f64) -> Value {
        Value::scalar(x).unwrap()
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(normal(0.0, 0.0).is_err());
        assert!(normal(f64::NAN, 1.0).is_err());
        assert!(beta(-1.0, 2.0).is_err());
        assert!(gamma(1.0, -2.0).is_err());
        assert!(inv_gamma(0.0, 1.0).is_err());
        assert!(poisson_plus_one(0.0).is_err());
        assert!(bernoulli(1.5).is_err());
        assert!(uniform_discrete(3, 2).is_err());
        assert!(categorical(vec![]).is_err());
        assert!(categorical(vec![0.0, 0.0]).is_err());
        assert!(categorical(vec![1.0, -0.5]).is_err());
        assert!(dirichlet(vec![1.0]).is_err());
        assert!(dirichlet(vec![1.0, 0.0]).is_err());
        assert!(mixture_of_normals(vec![1.0], vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(mixture_of_normals(vec![1.0], vec![0.0], vec![0.0]).is_err());
        let bad_cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(mvnormal(vec![0.0, 0.0], bad_cov).is_err()); // not PD
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
        assert!(mvnormal(vec![0.0, 0.0], asym).is_err());
    }

    #[test]
    fn golden_logpdf_values() {
        // Standard normal at zero: -ln(sqrt(2*pi)).
        assert_relative_eq!(
            normal(0.0, 1.0).unwrap().logpdf(&scalar(0.0)).unwrap(),
            -0.9189385332046727,
            epsilon = 1e-9
        );
        // poisson_plus_one(1) at 1 is exp(-1): log is exactly -1 (every term
        // in the pmf is exact integer-path arithmetic).
        assert_eq!(
            poisson_plus_one(1.0).unwrap().logpdf(&Value::int(1)).unwrap(),
            -1.0
        );
        // beta(2,2) at 1/2 has density 3/2.
        assert_relative_eq!(
            beta(2.0, 2.0).unwrap().logpdf(&scalar(0.5)).unwrap(),
            1.5f64.ln(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn out_of_support_is_neg_inf_never_nan() {
        let cases: Vec<(Distribution, Value)> = vec![
            (beta(2.0, 2.0).unwrap(), scalar(0.0)),
            (beta(2.0, 2.0).unwrap(), scalar(1.0)),
            (beta(2.0, 2.0).unwrap(), scalar(-0.25)),
            (beta(1.0, 1.0).unwrap(), scalar(0.0)), // would be 0*ln(0) without care
            (gamma(2.0, 1.0).unwrap(), scalar(0.0)),
            (inv_gamma(1.0, 10.0).unwrap(), scalar(-3.0)),
            (poisson_plus_one(1.0).unwrap(), Value::int(0)),
            (poisson_plus_one(1.0).unwrap(), Value::bool(true)),
            (uniform_discrete(1, 2).unwrap(), Value::int(3)),
            (categorical(vec![1.0, 0.0]).unwrap(), Value::int(1)),
            (categorical(vec![1.0, 0.0]).unwrap(), Value::int(7)),
            (bernoulli(1.0).unwrap(), Value::bool(false)),
            (dirichlet(vec![2.0, 2.0]).unwrap(), Value::continuous(vec![0.7, 0.7]).unwrap()),
            (dirichlet(vec![2.0, 2.0]).unwrap(), Value::continuous(vec![0.5]).unwrap()),
            (normal(0.0, 1.0).unwrap(), Value::continuous(vec![0.0, 1.0]).unwrap()),
        ];
        for (d, v) in cases {
            let lp = d.logpdf(&v).unwrap();
            assert_eq!(lp, f64::NEG_INFINITY, "{} at {:?}", d.kind(), v);
        }
        // Degenerate bernoulli in-support values stay finite.
        assert_eq!(bernoulli(1.0).unwrap().logpdf(&Value::bool(true)).unwrap(), 0.0);
    }

    #[test]
    fn tag_confusion_is_an_error() {
        assert!(normal(0.0, 1.0).unwrap().logpdf(&Value::int(0)).is_err());
        assert!(bernoulli(0.5).unwrap().logpdf(&scalar(0.5)).is_err());
        assert!(dirichlet(vec![1.0, 1.0]).unwrap().logpdf(&Value::int(0)).is_err());
    }

    /// Trapezoid quadrature of exp(logpdf) over a grid.
    fn integrate(d: &Distribution, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let f = |x: f64| d.logpdf(&scalar(x)).unwrap().exp();
        let mut total = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            total += f(lo + h * i as f64);
        }
        total * h
    }

    /// Same, integrating over log-x to tame heavy tails and the origin.
    fn integrate_log_substituted(d: &Distribution, n: usize) -> f64 {
        let (lo, hi) = (-40.0, 40.0);
        let h = (hi - lo) / n as f64;
        let f = |u: f64| {
            let x = u.exp();
            d.logpdf(&scalar(x)).map(|lp| (lp + u).exp()).unwrap()
        };
        let mut total = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            total += f(lo + h * i as f64);
        }
        total * h
    }

    #[test]
    fn continuous_densities_integrate_to_one() {
        let tol = 1e-6;
        assert_relative_eq!(
            integrate(&normal(1.5, 2.0).unwrap(), 1.5 - 30.0, 1.5 + 30.0, 60_000),
            1.0,
            epsilon = tol
        );
        assert_relative_eq!(
            integrate(&beta(2.0, 2.0).unwrap(), 0.0, 1.0, 20_000),
            1.0,
            epsilon = tol
        );
        assert_relative_eq!(
            integrate(
                &mixture_of_normals(vec![0.3, 0.7], vec![-2.0, 3.0], vec![0.5, 4.0]).unwrap(),
                -40.0,
                40.0,
                80_000
            ),
            1.0,
            epsilon = tol
        );
        assert_relative_eq!(
            integrate_log_substituted(&gamma(2.0, 1.5).unwrap(), 40_000),
            1.0,
            epsilon = tol
        );
        assert_relative_eq!(
            integrate_log_substituted(&inv_gamma(1.0, 10.0).unwrap(), 40_000),
            1.0,
            epsilon = tol
        );
        // Dirichlet(3): grid over the open 2-simplex.
        let d = dirichlet(vec![2.0, 3.0, 1.5]).unwrap();
        let n = 1500;
        let h = 1.0 / n as f64;
        let mut total = 0.0;
        for i in 1..n {
            for j in 1..(n - i) {
                let (w1, w2) = (i as f64 * h, j as f64 * h);
                let v = Value::continuous(vec![w1, w2, 1.0 - w1 - w2]).unwrap();
                total += d.logpdf(&v).unwrap().exp();
            }
        }
        assert_relative_eq!(total * h * h, 1.0, epsilon = 1e-3);
        // 2-d mvnormal over a wide grid.
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let mv = mvnormal(vec![0.5, -0.5], cov).unwrap();
        let (lo, hi, m) = (-12.0, 12.0, 600);
        let hh = (hi - lo) / m as f64;
        let mut total = 0.0;
        for i in 0..=m {
            for j in 0..=m {
                let v = Value::continuous(vec![0.5 + lo + hh * i as f64, -0.5 + lo + hh * j as f64])
                    .unwrap();
                let w = if i == 0 || i == m { 0.5 } else { 1.0 }
                    * if j == 0 || j == m { 0.5 } else { 1.0 };
                total += w * mv.logpdf(&v).unwrap().exp();
            }
        }
        assert_relative_eq!(total * hh * hh, 1.0, epsilon = 1e-5);
    }

    #[test]
    fn discrete_pmfs_sum_to_one() {
        for d in [
            bernoulli(0.3).unwrap(),
            uniform_discrete(-2, 5).unwrap(),
            categorical(vec![0.2, 0.0, 0.5, 0.3]).unwrap(),
        ] {
            let total: f64 = d
                .enumerate_support(0.0)
                .unwrap()
                .iter()
                .map(|(_, lp)| lp.exp())
                .sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
        // Raw poisson_plus_one mass over a deep prefix (no renormalization).
        let d = poisson_plus_one(1.3).unwrap();
        let total: f64 = (1..200).map(|n| d.logpdf(&Value::int(n)).unwrap().exp()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        // The truncated-and-renormalized oracle view also sums to one.
        let trunc: f64 = d
            .enumerate_support(1e-12)
            .unwrap()
            .iter()
            .map(|(_, lp)| lp.exp())
            .sum();
        assert_relative_eq!(trunc, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn logpdf_agrees_with_reference_library() {
        // Cross-check the hand-written densities against statrs point-wise.
        let grid: Vec<f64> = (1..40).map(|i| i as f64 * 0.25).collect();
        let n = statrs::distribution::Normal::new(1.0, 2.0).unwrap();
        let g = statrs::distribution::Gamma::new(2.5, 1.0 / 1.5).unwrap(); // statrs uses rate
        let ig = statrs::distribution::InverseGamma::new(3.0, 2.0).unwrap();
        let be = statrs::distribution::Beta::new(2.0, 3.5).unwrap();
        for &x in &grid {
            assert_relative_eq!(
                normal(1.0, 2.0).unwrap().logpdf(&scalar(x)).unwrap(),
                n.ln_pdf(x),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                gamma(2.5, 1.5).unwrap().logpdf(&scalar(x)).unwrap(),
                g.ln_pdf(x),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                inv_gamma(3.0, 2.0).unwrap().logpdf(&scalar(x)).unwrap(),
                ig.ln_pdf(x),
                epsilon = 1e-10
            );
            if x < 1.0 {
                assert_relative_eq!(
                    beta(2.0, 3.5).unwrap().logpdf(&scalar(x)).unwrap(),
                    be.ln_pdf(x),
                    epsilon = 1e-10
                );
            }
        }
        let po = statrs::distribution::Poisson::new(1.7).unwrap();
        for k in 1..30i64 {
            assert_relative_eq!(
                poisson_plus_one(1.7).unwrap().logpdf(&Value::int(k)).unwrap(),
                po.ln_pmf((k - 1) as u64),
                epsilon = 1e-10
            );
        }
    }

    /// One-sample Kolmogorov–Smirnov statistic against a reference cdf.
    fn ks_stat(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = cdf(x);
                let lo = (c - i as f64 / n).abs();
                let hi = ((i + 1) as f64 / n - c).abs();
                lo.max(hi)
            })
            .fold(0.0, f64::max)
    }

    // KS critical value at significance 1e-3 for n = 1e5:
    // sqrt(-ln(alpha/2)/2) / sqrt(n) = 1.9495/sqrt(1e5).
    const KS_N: usize = 100_000;
    const KS_CRIT: f64 = 1.9495 / 316.22776601683796;

    fn draw_scalars(d: &Distribution, seed: u64) -> Vec<f64> {
        let mut rng = RandomSource::from_seed(seed);
        (0..KS_N).map(|_| d.sample(&mut rng).as_scalar().unwrap()).collect()
    }

    #[test]
    fn samplers_match_densities_continuous() {
        let n = statrs::distribution::Normal::new(-0.5, 1.7).unwrap();
        let mut xs = draw_scalars(&normal(-0.5, 1.7).unwrap(), 11);
        assert!(ks_stat(&mut xs, |x| n.cdf(x)) < KS_CRIT);

        let g = statrs::distribution::Gamma::new(2.0, 1.0 / 1.5).unwrap();
        let mut xs = draw_scalars(&gamma(2.0, 1.5).unwrap(), 12);
        assert!(ks_stat(&mut xs, |x| g.cdf(x)) < KS_CRIT);

        let ig = statrs::distribution::InverseGamma::new(3.0, 2.0).unwrap();
        let mut xs = draw_scalars(&inv_gamma(3.0, 2.0).unwrap(), 13);
        assert!(ks_stat(&mut xs, |x| ig.cdf(x)) < KS_CRIT);

        let be = statrs::distribution::Beta::new(2.0, 2.0).unwrap();
        let mut xs = draw_scalars(&beta(2.0, 2.0).unwrap(), 14);
        assert!(ks_stat(&mut xs, |x| be.cdf(x)) < KS_CRIT);

        // Mixture cdf assembled from component normal cdfs.
        let d = mixture_of_normals(vec![0.25, 0.75], vec![-2.0, 1.0], vec![0.25, 2.0]).unwrap();
        let c1 = statrs::distribution::Normal::new(-2.0, 0.5).unwrap();
        let c2 = statrs::distribution::Normal::new(1.0, 2.0f64.sqrt()).unwrap();
        let mut xs = draw_scalars(&d, 15);
        assert!(ks_stat(&mut xs, |x| 0.25 * c1.cdf(x) + 0.75 * c2.cdf(x)) < KS_CRIT);

        // Dirichlet marginals are beta(alpha_i, alpha0 - alpha_i).
        let d = dirichlet(vec![2.0, 1.0, 3.0]).unwrap();
        let mut rng = RandomSource::from_seed(16);
        let mut first: Vec<f64> = (0..KS_N)
            .map(|_| d.sample(&mut rng).as_vector().unwrap()[0])
            .collect();
        let bm = statrs::distribution::Beta::new(2.0, 4.0).unwrap();
        assert!(ks_stat(&mut first, |x| bm.cdf(x)) < KS_CRIT);

        // mvnormal: a fixed linear projection is univariate normal.
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let mv = mvnormal(vec![0.5, -0.5], cov).unwrap();
        let (u1, u2) = (0.8, -0.6);
        let proj_mean = u1 * 0.5 + u2 * -0.5;
        let proj_var = u1 * u1 * 2.0 + 2.0 * u1 * u2 * 0.6 + u2 * u2 * 1.0;
        let pn = statrs::distribution::Normal::new(proj_mean, proj_var.sqrt()).unwrap();
        let mut rng = RandomSource::from_seed(17);
        let mut proj: Vec<f64> = (0..KS_N)
            .map(|_| {
                let v = mv.sample(&mut rng);
                let xs = v.as_vector().unwrap();
                u1 * xs[0] + u2 * xs[1]
            })
            .collect();
        assert!(ks_stat(&mut proj, |x| pn.cdf(x)) < KS_CRIT);
    }

    #[test]
    fn samplers_match_densities_discrete() {
        // Chi-square goodness of fit at significance 1e-3.
        let chi2_crit = |df: f64| {
            statrs::distribution::ChiSquared::new(df).unwrap().inverse_cdf(1.0 - 1e-3)
        };
        let run = |d: &Distribution, seed: u64| -> (f64, f64) {
            let support = d.enumerate_support(1e-12).unwrap();
            let mut rng = RandomSource::from_seed(seed);
            let n = 100_000usize;
            let mut counts = vec![0usize; support.len()];
            for _ in 0..n {
                let v = d.sample(&mut rng);
                let got = v.as_discrete().unwrap();
                let idx = support.iter().position(|(s, _)| s == got).expect("in support");
                counts[idx] += 1;
            }
            let stat: f64 = support
                .iter()
                .zip(&counts)
                .map(|((_, lp), &c)| {
                    let expect = lp.exp() * n as f64;
                    (c as f64 - expect).powi(2) / expect
                })
                .sum();
            (stat, support.len() as f64 - 1.0)
        };
        for (d, seed) in [
            (bernoulli(0.3).unwrap(), 21),
            (uniform_discrete(1, 6).unwrap(), 22),
            (categorical(vec![0.1, 0.4, 0.0, 0.5]).unwrap(), 23),
            (poisson_plus_one(1.0).unwrap(), 24),
        ] {
            let (stat, df) = run(&d, seed);
            assert!(
                stat < chi2_crit(df),
                "{}: chi2 {stat} over df {df}",
                d.kind()
            );
        }
    }

    #[test]
    fn support_enumeration_shapes() {
        assert_eq!(bernoulli(1.0).unwrap().enumerate_support(0.0).unwrap().len(), 1);
        assert_eq!(bernoulli(0.5).unwrap().enumerate_support(0.0).unwrap().len(), 2);
        assert_eq!(
            categorical(vec![1.0, 0.0, 1.0]).unwrap().enumerate_support(0.0).unwrap().len(),
            2
        );
        assert!(normal(0.0, 1.0).unwrap().enumerate_support(1e-12).is_none());
        let pp = poisson_plus_one(1.0).unwrap().enumerate_support(1e-12).unwrap();
        assert!(pp.len() > 10 && pp.len() < 40, "unexpected truncation {}", pp.len());
    }

    #[test]
    fn mvnormal_matches_dense_inverse_computation() {
        // Independent 5x5 oracle: direct inverse + determinant, no Cholesky.
        let a = DMatrix::from_row_slice(
            5,
            5,
            &[
                4.0, 1.2, 0.8, 0.4, 0.2, //
                1.2, 3.0, 0.9, 0.3, 0.1, //
                0.8, 0.9, 2.5, 0.7, 0.2, //
                0.4, 0.3, 0.7, 2.0, 0.5, //
                0.2, 0.1, 0.2, 0.5, 1.5,
            ],
        );
        let mean = vec![0.1, -0.2, 0.3, -0.4, 0.5];
        let x = vec![1.0, 0.5, -0.3, 0.2, -1.1];
        let mv = mvnormal(mean.clone(), a.clone()).unwrap();
        let inv = a.clone().try_inverse().unwrap();
        let det = a.determinant();
        let centered = DVector::from_iterator(5, x.iter().zip(&mean).map(|(x, m)| x - m));
        let quad = (centered.transpose() * inv * centered)[(0, 0)];
        let expect = -2.5 * LN_2PI - 0.5 * det.ln() - 0.5 * quad;
        assert_relative_eq!(
            mv.logpdf(&Value::continuous(x).unwrap()).unwrap(),
            expect,
            epsilon = 1e-8
        );
    }
}
