#!/usr/bin/env python3
"""Independent oracle for the two-mean toy posterior P(k=2 | data).

The model: k ~ uniform{1,2}; mu_j ~ Normal(0, 10) for j = 1..k; each data
point y_i ~ (1/k) * sum_j Normal(mu_j, 1). The k-posterior needs the two
marginal likelihoods

    m_1 = int N(mu; 0, 100) prod_i N(y_i; mu, 1) dmu
    m_2 = int int N(mu1;0,100) N(mu2;0,100) prod_i [ (N(y_i;mu1,1)+N(y_i;mu2,1))/2 ] dmu1 dmu2

computed here by two unrelated methods that must agree:

1. Exact subset expansion: the likelihood product expands into 2^n terms,
   each a product of one-mean conjugate marginals with the closed form
   G(S) = (2pi)^(-m/2) sqrt(t0/(t0+m)) exp(-q/2 + s^2/(2(t0+m))),
   where t0 = 1/100, m = |S|, s = sum_{i in S} y_i, q = sum y_i^2.
2. High-resolution trapezoid quadrature over [-8sd, +8sd] per dimension.

Run: python3 scripts/posterior_oracle.py
"""

from itertools import combinations

import mpmath as mp

mp.mp.dps = 40

V0 = mp.mpf(100)      # prior variance of each mean
T0 = 1 / V0


def log_g(subset_sum, subset_sq, m):
    """log of the one-mean conjugate marginal for a data subset."""
    m = mp.mpf(m)
    return (
        -m / 2 * mp.log(2 * mp.pi)
        + mp.log(T0 / (T0 + m)) / 2
        - subset_sq / 2
        + subset_sum**2 / (2 * (T0 + m))
    )


def exact_log_m1(ys):
    s = mp.fsum(ys)
    q = mp.fsum(y * y for y in ys)
    return log_g(s, q, len(ys))


def exact_log_m2(ys):
    n = len(ys)
    total = mp.fsum(y * y for y in ys)
    terms = []
    for m in range(n + 1):
        for subset in combinations(range(n), m):
            s1 = mp.fsum(ys[i] for i in subset)
            q1 = mp.fsum(ys[i] ** 2 for i in subset)
            s2 = mp.fsum(ys) - s1
            q2 = total - q1
            terms.append(log_g(s1, q1, m) + log_g(s2, q2, n - m))
    log_sum = terms[0]
    for t in terms[1:]:
        log_sum = max(log_sum, t) + mp.log1p(mp.e ** (min(log_sum, t) - max(log_sum, t)))
    return log_sum - n * mp.log(2)


def quad_log_m1(ys, points=20001, span=8):
    sd = mp.sqrt(V0)
    lo, hi = -span * sd, span * sd
    h = (hi - lo) / (points - 1)
    vals = []
    for i in range(points):
        mu = lo + i * h
        lp = -mp.log(2 * mp.pi * V0) / 2 - mu**2 / (2 * V0)
        for y in ys:
            lp += -mp.log(2 * mp.pi) / 2 - (y - mu) ** 2 / 2
        vals.append(mp.e**lp)
    return mp.log(h * (mp.fsum(vals) - (vals[0] + vals[-1]) / 2))


def quad_log_m2(ys, points=1601, span=8):
    sd = mp.sqrt(V0)
    lo = -span * sd
    h = (2 * span * sd) / (points - 1)
    mus = [lo + i * h for i in range(points)]
    lognorm = [[-mp.log(2 * mp.pi) / 2 - (y - mu) ** 2 / 2 for mu in mus] for y in ys]
    prior = [
        mp.e ** (-mp.log(2 * mp.pi * V0) / 2 - mu**2 / (2 * V0)) for mu in mus
    ]
    total = mp.mpf(0)
    half = mp.log(2)
    for a in range(points):
        row = mp.mpf(0)
        for b in range(points):
            lp = mp.mpf(0)
            for yi in range(len(ys)):
                la, lb = lognorm[yi][a], lognorm[yi][b]
                hi_, lo_ = (la, lb) if la > lb else (lb, la)
                lp += hi_ + mp.log1p(mp.e ** (lo_ - hi_)) - half
            row += prior[b] * mp.e**lp
        wa = mp.mpf(1) if 0 < a < points - 1 else mp.mpf("0.5")
        total += wa * prior[a] * row
    return mp.log(total * h * h)


def report(name, ys):
    ys = [mp.mpf(str(y)) for y in ys]
    lm1, lm2 = exact_log_m1(ys), exact_log_m2(ys)
    p2 = mp.e ** (lm2 - (max(lm1, lm2) + mp.log(
        mp.e ** (lm1 - max(lm1, lm2)) + mp.e ** (lm2 - max(lm1, lm2))
    )))
    print(f"{name}: data = {[mp.nstr(y, 17) for y in ys]}")
    print(f"  exact log m1 = {mp.nstr(lm1, 22)}")
    print(f"  exact log m2 = {mp.nstr(lm2, 22)}")
    print(f"  P(k=2|data)  = {mp.nstr(p2, 22)}")
    return lm1, lm2, p2


if __name__ == "__main__":
    # Spec-style smoke dataset.
    lm1, lm2, p2 = report("four-point", [-3, -3, 3, 3])
    q1 = quad_log_m1([mp.mpf(v) for v in (-3, -3, 3, 3)])
    q2 = quad_log_m2([mp.mpf(v) for v in (-3, -3, 3, 3)])
    print(f"  quad  log m1 = {mp.nstr(q1, 22)}  (|diff| {mp.nstr(abs(q1-lm1), 3)})")
    print(f"  quad  log m2 = {mp.nstr(q2, 22)}  (|diff| {mp.nstr(abs(q2-lm2), 3)})")
