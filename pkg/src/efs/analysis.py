"""Bias/variance diagnostics: degrees of freedom, error identities, comparisons.

Fitters passed to :func:`df_monte_carlo` are callables ``fitter(y, rng)``
returning fitted values, either one ``(n,)`` vector or a stack ``(K, n)``
(e.g. a whole selection path). Deterministic fitters ignore ``rng``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from efs._rng import derive_rng, map_ordered
from efs.greedy import (
    DesignMatrix,
    FeatureOrdering,
    efs_base_fit,
    efs_exact_orthogonal,
    fs_coef_path,
    fs_fit,
)
from efs.weights import exact_weight_table


@dataclass(frozen=True, eq=False)
class DfEstimate:
    """Monte Carlo degrees of freedom with the matching training error.

    ``samples[r]`` is ``eps_r . fhat_r / sigma2`` for replicate ``r``; keep it
    for paired comparisons between estimators run with the same seed. When the
    fitter returns ``(fitted, info)`` the ``info`` objects land in ``extras``.
    """

    df: float | np.ndarray
    stderr: float | np.ndarray
    replicates: int
    train_mse: float | np.ndarray
    train_mse_se: float | np.ndarray
    samples: np.ndarray
    mse_samples: np.ndarray
    extras: tuple = ()


@dataclass(frozen=True)
class ErrorDecomposition:
    train_mse: float
    df_term: float
    pred_proxy: float
    sigma2: float

    @property
    def excess_risk(self):
        """Estimate of ``E||f - fhat||^2``: the proxy minus the noise floor."""
        return self.pred_proxy - self.sigma2


@dataclass(frozen=True)
class MajorizationReport:
    holds: bool
    max_violation: float
    mass_error: float
    pairs: tuple


@dataclass(frozen=True, eq=False)
class EscapeDesign:
    design: DesignMatrix
    beta: float
    zeta: float

    def expected_gram(self):
        p = self.design.p
        G = np.eye(p)
        G[0, p - 1] = G[p - 1, 0] = G[1, p - 1] = G[p - 1, 1] = 3 ** -0.5
        return G

    def gram_error(self):
        return float(np.max(np.abs(self.design.gram / self.design.n - self.expected_gram())))


def _summarize(values):
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean(axis=0)
    se = values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])
    if np.ndim(mean) == 0:
        return float(mean), float(se)
    return mean, se


def df_monte_carlo(fitter, design, true_f, sigma2, replicates=2000, seed=0):
    """Degrees of freedom ``sum_i Cov(y_i, fhat_i) / sigma2`` by simulation.

    Replicate ``r`` draws Gaussian noise from stream ``(seed, r)`` and hands
    the fitter stream ``(seed, r, 1)``. With ``f`` known, ``eps . fhat / sigma2``
    is an unbiased per-replicate estimate.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if replicates < 2:
        raise ValueError("replicates must be >= 2")
    true_f = np.asarray(true_f, dtype=np.float64)
    n = design.n
    if true_f.shape != (n,):
        raise ValueError(f"true_f has shape {true_f.shape}, expected ({n},)")
    sd = math.sqrt(sigma2)

    def one(r):
        eps = derive_rng(seed, r).normal(0.0, sd, n)
        y = true_f + eps
        out = fitter(y, derive_rng(seed, r, 1))
        info = None
        if isinstance(out, tuple):
            out, info = out
        fhat = np.asarray(out, dtype=np.float64)
        if not np.all(np.isfinite(fhat)):
            raise FloatingPointError(f"fitter returned non-finite values at replicate {r}")
        resid = y - fhat
        return fhat @ eps / sigma2, np.sum(resid * resid, axis=-1) / n, info

    out = map_ordered(one, range(replicates))
    samples = np.array([o[0] for o in out])
    mse = np.array([o[1] for o in out])
    df, se = _summarize(samples)
    tm, tm_se = _summarize(mse)
    extras = tuple(o[2] for o in out) if any(o[2] is not None for o in out) else ()
    return DfEstimate(df, se, replicates, tm, tm_se, samples, mse, extras)


def _steps_increments(fs_df_sequence, p):
    seq = np.asarray(fs_df_sequence, dtype=np.float64)
    width = seq.shape[-1]
    if width == p:
        zero = np.zeros(seq.shape[:-1] + (1,))
        seq = np.concatenate([zero, seq], axis=-1)
    elif width != p + 1:
        raise ValueError(f"df sequence has length {width}; expected {p} or {p + 1}")
    return np.diff(seq, axis=-1)


def df_decomposition(fs_df_sequence, weights):
    """Ensemble df as ``sum_j w_j (df_j - df_{j-1})`` over the FS df sequence.

    ``fs_df_sequence`` holds ``df(FS(1)), ..., df(FS(p))``, optionally with a
    leading ``df(FS(0)) = 0``. A 2-D input is treated row-wise (one row per
    replicate), which makes standard errors easy.
    """
    inc = _steps_increments(fs_df_sequence, weights.p)
    return inc @ weights.w


def training_gap(beta_hat_sq, weights):
    """``||y - FS(k)||^2 - ||y - EFS(k, m)||^2`` on an orthonormal design.

    ``beta_hat_sq`` is the rank-sorted profile of squared OLS coefficients.
    Positive values mean the ensemble fits the training data better.
    """
    b2 = np.asarray(beta_hat_sq, dtype=np.float64)
    if b2.shape != (weights.p,):
        raise ValueError(f"profile has shape {b2.shape}, expected ({weights.p},)")
    if np.any(b2 < 0):
        raise ValueError("squared coefficients must be non-negative")
    if np.any(np.diff(b2) > 1e-12 * max(1.0, float(b2.max()))):
        raise ValueError("profile must be non-increasing")
    k = weights.k
    w = weights.w
    gain = np.sum(b2[k:] * (1.0 - (1.0 - w[k:]) ** 2))
    loss = np.sum(b2[:k] * (1.0 - w[:k]) ** 2)
    return float(gain - loss)


def gap_lower_bound(beta_hat_sq, k):
    """``(1/4) Bbar^2 / Abar`` with ``Abar``, ``Bbar`` the means over ranks 1..k and k+1..2k."""
    b2 = np.asarray(beta_hat_sq, dtype=np.float64)
    if b2.shape[0] < 2 * k:
        raise ValueError("profile needs at least 2k entries")
    a = b2[:k].mean()
    b = b2[k : 2 * k].mean()
    return float(0.25 * b * b / a)


def best_training_gap(beta_hat_sq, k, m_grid=None):
    """Largest :func:`training_gap` over ``m_grid`` (default ``1..p``); returns ``(m, gap)``."""
    p = len(beta_hat_sq)
    grid = range(1, p + 1) if m_grid is None else m_grid
    best = max(((training_gap(beta_hat_sq, exact_weight_table(k, m, p)), -m) for m in grid))
    return -best[1], best[0]


def prediction_decomposition(train_mse, df, sigma2, n):
    """Right-hand side of the fixed-design identity
    ``E||f - fhat||^2 + sigma2 = E||y - fhat||^2 + 2 sigma2 df / n``.
    """
    for name, v in (("train_mse", train_mse), ("df", df), ("sigma2", sigma2)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    df_term = 2.0 * sigma2 * df / n
    return ErrorDecomposition(train_mse, df_term, train_mse + df_term, sigma2)


def majorization_check(k, p, m_grid, tol=1e-12):
    """Prefix sums of the weights grow with ``m`` and all end at ``k``."""
    grid = list(m_grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("m_grid must be ascending")
    tables = {m: exact_weight_table(k, m, p).prefix_sums() for m in grid}
    pairs = []
    worst = 0.0
    for a, b in zip(grid, grid[1:]):
        excess = float(np.max(tables[a] - tables[b]))
        worst = max(worst, excess)
        pairs.append((a, b, excess <= tol))
    mass = max((abs(t[-1] - min(k, p)) for t in tables.values()), default=0.0)
    return MajorizationReport(
        holds=all(ok for *_, ok in pairs) and mass <= 1e-10,
        max_violation=worst,
        mass_error=float(mass),
        pairs=tuple(pairs),
    )


def elastic_net_orthogonal(beta_hat, lambda1, lambda2):
    """Closed-form elastic net under ``X'X/n = I``: soft threshold, then scale."""
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("penalties must be non-negative")
    bh = np.asarray(beta_hat, dtype=np.float64)
    return np.sign(bh) * np.maximum(np.abs(bh) - lambda1 / 2.0, 0.0) / (1.0 + lambda2)


def elastic_net_mismatch(beta_hat, weights, n_grid=400):
    """Smallest max-abs gap between EFS coefficients and any elastic net fit.

    ``beta_hat`` is rank-sorted. For each ``lambda1`` on a grid the best
    ``1 / (1 + lambda2)`` in ``(0, 1]`` is found by least squares. A clearly
    positive result means that weight profile is outside the elastic net family.
    """
    bh = np.asarray(beta_hat, dtype=np.float64)
    target = weights.w * bh
    best = (math.inf, 0.0, 0.0)
    for lam1 in np.linspace(0.0, 2.0 * np.abs(bh).max(), n_grid):
        base = elastic_net_orthogonal(bh, lam1, 0.0)
        denom = base @ base
        scale = 1.0 if denom == 0 else min(1.0, max(1e-12, (base @ target) / denom))
        gap = float(np.max(np.abs(scale * base - target)))
        if gap < best[0]:
            best = (gap, float(lam1), 1.0 / scale - 1.0)
    return best


def build_escape_design(p, n, beta, zeta):
    """Design where greedy selection is lured by a spurious correlated feature.

    Features ``0..p-2`` are orthonormal canonical directions; feature ``p-1`` is
    ``(x_0 + x_1 + u) / sqrt(3)`` with ``u`` the next canonical direction. The
    noiseless response is ``beta (x_0 + x_1) + zeta * sum(x_2..x_{p-2})``.
    """
    if p < 5:
        raise ValueError("escape design needs p >= 5")
    if n < p:
        raise ValueError("escape design needs n >= p")
    if not (beta / math.sqrt(6.0) > zeta > 0):
        raise ValueError("need beta / sqrt(6) > zeta > 0")
    root_n = math.sqrt(n)
    X = np.zeros((n, p))
    X[np.arange(p - 1), np.arange(p - 1)] = root_n
    X[[0, 1, p - 1], p - 1] = root_n / math.sqrt(3.0)
    design = DesignMatrix(X, normalized=True)
    y = beta * (X[:, 0] + X[:, 1]) + zeta * X[:, 2 : p - 1].sum(axis=1)
    return EscapeDesign(design, float(beta), float(zeta)), y


def base_fit_errors(design, y, k, m, replicates, seed=0):
    """Training errors ``||y - f_check||^2`` of ``replicates`` single randomized fits."""

    def one(r):
        _, model = efs_base_fit(design, y, k, m, seed=seed, replicate=r)
        resid = y - model.fitted
        return resid @ resid / design.n

    return np.array(map_ordered(one, range(replicates)))


# fitters ---------------------------------------------------------------


def zero_fitter(design):
    return lambda y, rng: np.zeros(design.n)


def ols_fitter(design):
    X = design.X
    pinv = np.linalg.pinv(X)
    return lambda y, rng: X @ (pinv @ y)


def fs_fitter(design, k):
    return lambda y, rng: fs_fit(design, y, k)[1].fitted


def fs_path_fitter(design, k_max):
    """Fitted values of FS(1..k_max) stacked as a ``(k_max, n)`` array."""
    G = design.gram
    X = design.X
    return lambda y, rng: fs_coef_path(G, X.T @ y, k_max) @ X.T


def efs_exact_fitter(design, k, m):
    weights = exact_weight_table(k, m, design.p)

    def fit(y, rng):
        ordering = FeatureOrdering.from_response(design, y)
        return efs_exact_orthogonal(design, ordering, k, m, weights).fitted

    return fit


def sparse_unit_signal(design, s):
    """``f = X beta`` with ``beta_j = 1`` for the first ``s`` features."""
    beta = np.zeros(design.p)
    beta[:s] = 1.0
    return design.X @ beta, beta

