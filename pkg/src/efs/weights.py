"""Inclusion-probability weights of randomized forward selection.

Under an orthonormal design the ensemble estimator is OLS with the
coefficient of the rank-``j`` feature multiplied by ``w_j^{k,m,p}``, the
probability that this feature is selected within ``k`` randomized steps when
each step picks the best of ``m`` features drawn without replacement. The
weights depend on ranks only, never on data.

Ranks are 1-based in the public API (``j = 1`` is the largest ``|beta_hat|``);
the ``w`` arrays are ordinary 0-based NumPy vectors with ``w[j - 1]``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import expit, gammaln

from efs._backend import kernels
from efs._rng import derive_rng

ENUMERATION_BUDGET = 10**7
MC_CHUNK = 8192


@dataclass(frozen=True)
class WeightTable:
    """Weights ``w[j-1] = w_j^{k,m,p}`` for one ``(k, m, p)`` configuration."""

    k: int
    m: int
    p: int
    w: np.ndarray
    stderr: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.w.shape != (self.p,):
            raise ValueError(f"weight vector has shape {self.w.shape}, expected ({self.p},)")

    @property
    def mass(self):
        return float(math.fsum(self.w))

    def prefix_sums(self):
        return np.cumsum(self.w)


@dataclass(frozen=True)
class AsymptoticWeightSpec:
    """Subsampling ratio with its rate ``alpha = -log(1 - gamma)`` and midpoint ``h``."""

    gamma: float
    k: int
    alpha: float
    h: float

    @classmethod
    def from_gamma(cls, gamma, k):
        _check_gamma(gamma)
        a = rate(gamma)
        return cls(gamma=float(gamma), k=int(k), alpha=a, h=midpoint(a, k))


def _check_config(k, m, p):
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if not 0 <= k <= p:
        raise ValueError(f"k must lie in [0, p={p}], got {k}")
    if not 1 <= m <= p:
        raise ValueError(f"m must lie in [1, p={p}], got {m}")


def _check_gamma(gamma):
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")


def rate(gamma):
    """``alpha = -log(1 - gamma)``."""
    _check_gamma(gamma)
    return -math.log1p(-gamma)


def midpoint(alpha, k):
    """``h(alpha, k) = log(exp(alpha k) - 1) / alpha``, computed without overflow."""
    if k <= 0:
        return -math.inf
    return k + math.log(-math.expm1(-alpha * k)) / alpha


def _log_binom(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    valid = (b >= 0) & (b <= a)
    with np.errstate(invalid="ignore"):
        out = gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)
    return np.where(valid, out, -np.inf)


EXACT_RATIO_MAX = 2000


def _ratio(a, b, log_den):
    return np.clip(np.exp(_log_binom(a, b) - log_den), 0.0, 1.0)


def _binom_column(top, b):
    # exact C(a, b) for a = 0..top, walking down from C(top, b)
    out = [0] * (top + 1)
    c = math.comb(top, b)
    for a in range(top, b - 1, -1):
        out[a] = c
        c = c * (a - b) // a if a else 0
    return out


def _coefficients(pp, mm):
    """First-step probabilities for a pool of ``pp`` ranks and ``mm`` candidates.

    Returns, per rank ``j``: it wins; a better rank wins and ``j`` keeps its
    rank; a worse rank wins and ``j`` moves up one place. Small pools use exact
    integer ratios (correctly rounded), large ones log-gamma.
    """
    if pp <= EXACT_RATIO_MAX:
        cm, cm1 = _binom_column(pp, mm), _binom_column(pp, mm - 1)
        den = cm[pp]
        first = np.array([cm1[pp - j] / den for j in range(1, pp + 1)])
        after = np.array([cm[pp - j] / den for j in range(1, pp + 1)])
        before = np.array([(den - cm[pp - j + 1]) / den for j in range(1, pp + 1)])
        return first, after, before
    j = np.arange(1, pp + 1, dtype=np.float64)
    log_den = float(_log_binom(pp, mm))
    first = _ratio(pp - j, mm - 1, log_den)
    after = _ratio(pp - j, mm, log_den)
    before = 1.0 - _ratio(pp - j + 1, mm, log_den)
    return first, after, before


@lru_cache(maxsize=256)
def _table(k, m, p):
    # level kk works on pool size p - (k - kk)
    prev = np.zeros(p - k)
    for kk in range(1, k + 1):
        pp = p - k + kk
        first, after, before = _coefficients(pp, min(m, pp))
        same = np.zeros(pp)
        same[: pp - 1] = prev
        shifted = np.zeros(pp)
        shifted[1:] = prev
        prev = first + after * same + before * shifted
    out = np.clip(prev, 0.0, 1.0) if k else np.zeros(p)
    out.setflags(write=False)
    return out


def exact_weight_table(k, m, p):
    """All weights ``w_1..w_p`` for ``(k, m, p)`` by dynamic programming.

    The first-step conditioning recurrence couples ``(k, p)`` to
    ``(k - 1, p - 1)``, so a single sweep over ``k`` levels gives the whole
    vector in ``O(k p)``. When the pool is smaller than ``m`` every remaining
    feature is a candidate.
    """
    k, m, p = int(k), int(m), int(p)
    _check_config(k, m, p)
    return WeightTable(k, m, p, _table(k, m, p).copy())


def exact_weight(j, k, m, p):
    """Probability that the rank-``j`` feature is selected within ``k`` steps."""
    k, m, p, j = int(k), int(m), int(p), int(j)
    _check_config(k, m, p)
    if not 1 <= j <= p:
        raise ValueError(f"j must lie in [1, p={p}], got {j}")
    return float(_table(k, m, p)[j - 1])


def enumeration_size(k, m, p):
    """Number of candidate-set sequences the enumeration oracle visits."""
    total = 1
    for step in range(min(k, p)):
        pool = p - step
        total *= math.comb(pool, m) if pool > m else 1
    return total


def enumerate_weights(k, m, p, budget=ENUMERATION_BUDGET):
    """Weights by brute force over every sequence of candidate sets.

    Each sequence ``V_1, ..., V_k`` has probability ``prod 1 / C(|pool_l|, m)``
    and deterministically selects the smallest rank in each ``V_l``. The
    probabilities are accumulated as exact fractions.
    """
    k, m, p = int(k), int(m), int(p)
    _check_config(k, m, p)
    size = enumeration_size(k, m, p)
    if size > budget:
        raise ValueError(f"enumeration needs {size} sequences, budget is {budget}")
    incl = [Fraction(0)] * p

    def walk(pool, steps, prob, chosen):
        if steps == 0:
            for s in chosen:
                incl[s] += prob
            return
        if len(pool) <= m:
            subsets = [pool]
        else:
            subsets = list(itertools.combinations(pool, m))
        share = prob / len(subsets)
        for sub in subsets:
            s = min(sub)
            walk(tuple(x for x in pool if x != s), steps - 1, share, chosen + (s,))

    walk(tuple(range(p)), min(k, p), Fraction(1), ())
    return WeightTable(k, m, p, np.array([float(x) for x in incl]))


def mc_weight_table(k, m, p, replicates, seed=0, with_replacement=False):
    """Empirical inclusion frequencies of the rank-only randomized selection.

    Replicates are processed in chunks of ``MC_CHUNK``; chunk ``c`` draws from
    the stream ``(seed, c)``, so the result does not depend on how chunks are
    scheduled. Standard errors are binomial, ``sqrt(w (1 - w) / replicates)``.
    """
    k, m, p, replicates = int(k), int(m), int(p), int(replicates)
    _check_config(k, m, p)
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    steps = min(k, p)
    width = min(m, p)
    counts = np.zeros(p, dtype=np.int64)
    for c, start in enumerate(range(0, replicates, MC_CHUNK)):
        n = min(MC_CHUNK, replicates - start)
        U = derive_rng(seed, c).random((n, steps, width))
        counts += kernels.rank_mc_counts(k, m, p, U, with_replacement)
    w = counts / replicates
    se = np.sqrt(w * (1.0 - w) / replicates)
    return WeightTable(k, m, p, w, stderr=se)


def _asym_complement_low(j, k, alpha):
    # 1 - w_i(k) for i = 1..j (j < k) via the recurrence in j; every term is
    # positive, so small complements keep full relative precision
    tail = math.exp(-alpha * k)
    v = 1.0
    for i in range(1, j + 1):
        coef = math.exp(-alpha * (k - i + 1)) * -math.expm1(-alpha * (i - 1))
        v = tail + coef * (1.0 - v)
    return v


def _asym_high(j, k, alpha):
    # w_j(kk) for kk = 1..k (j >= k) via the recurrence in k; coefficients <= 1
    w = 0.0
    for kk in range(1, k + 1):
        coef = math.exp(-alpha * (j - kk)) * -math.expm1(-alpha * kk)
        w = coef * (1.0 - w)
    return w


def asymptotic_weight(j, k, gamma):
    """Limit of ``w_j^{k,m,p}`` as ``m, p -> inf`` with ``m / p -> gamma``."""
    _check_gamma(gamma)
    j, k = int(j), int(k)
    if j < 1 or k < 0:
        raise ValueError("need j >= 1 and k >= 0")
    if k == 0:
        return 0.0
    alpha = rate(gamma)
    if j >= k:
        return _asym_high(j, k, alpha)
    return 1.0 - _asym_complement_low(j, k, alpha)


def asymptotic_weight_complement(j, k, gamma):
    """``1 - asymptotic_weight(j, k, gamma)`` without cancellation for ``j < k``."""
    _check_gamma(gamma)
    j, k = int(j), int(k)
    if j < 1 or k < 0:
        raise ValueError("need j >= 1 and k >= 0")
    if k == 0:
        return 1.0
    alpha = rate(gamma)
    if j >= k:
        return 1.0 - _asym_high(j, k, alpha)
    return _asym_complement_low(j, k, alpha)


def asymptotic_weights(k, gamma, n):
    """``[asymptotic_weight(j, k, gamma) for j in 1..n]`` as an array."""
    return np.array([asymptotic_weight(j, k, gamma) for j in range(1, n + 1)])


def sandwich_bounds(j, k, gamma):
    """Logistic lower/upper bounds on the asymptotic weight (midpoints ``h`` and ``h + 1``)."""
    alpha = rate(gamma)
    h = midpoint(alpha, k)
    return float(expit(alpha * (h - j))), float(expit(alpha * (h + 1 - j)))


def limit_weight(d, gamma, tol=1e-15, max_terms=200):
    """Large-``k`` limit of the asymptotic weight at offset ``d = k - j``.

    For ``d >= -1/2`` the series ``sum_{i>=0} (-1)^i exp(-alpha i (d + i/2 + 1/2))``
    is used; below that the equivalent form
    ``sum_{i>=1} (-1)^(i+1) exp(alpha i (d - i/2 + 1/2))``, whose terms decay from
    the start. Summation stops at the first term below ``tol``; at the default
    ``max_terms`` this needs roughly ``alpha >= 2e-3`` and raises otherwise.
    """
    _check_gamma(gamma)
    if tol <= 0:
        raise ValueError("tol must be positive")
    alpha = rate(gamma)
    if d >= -0.5:
        first, sign = 0, 1.0
        expo = lambda i: -alpha * i * (d + i / 2 + 0.5)  # noqa: E731
    else:
        first, sign = 1, 1.0
        expo = lambda i: alpha * i * (d - i / 2 + 0.5)  # noqa: E731
    terms = []
    for n, i in enumerate(itertools.count(first)):
        if n >= max_terms:
            raise RuntimeError(
                f"limit_weight series not below tol={tol} after {max_terms} terms "
                f"(alpha={alpha:.3g}, d={d})"
            )
        t = math.exp(expo(i))
        if t < tol:
            break
        terms.append(sign * t)
        sign = -sign
    return math.fsum(terms)


def logistic_approx(j, k, m, p):
    """Closed-form logistic surrogate ``1 / (1 + (1 - m/p)^(k - j + 1/2))``.

    ``j`` may be fractional. For plots and comparisons only.
    """
    if not 1 <= m < p:
        raise ValueError(f"need 1 <= m < p, got m={m}, p={p}")
    t = (k - j + 0.5) * math.log1p(-m / p)
    return float(expit(-t))
