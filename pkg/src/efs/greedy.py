"""Forward selection, its feature-subsampled randomization, and ensembles.

All fits run in Gram space: with ``G = X'X`` and ``b = X'y`` each step costs
``O(l p)`` regardless of ``n``. Feature indices are 0-based here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from efs._backend import kernels
from efs._rng import derive_rng
from efs.weights import WeightTable, exact_weight_table

DEGENERATE_TOL = 1e-10
ORTHONORMAL_TOL = 1e-8
ENSEMBLE_CHUNK = 32


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Fixed design with columns scaled to ``mean(x_j**2) == 1`` when ``normalized``."""

    X: np.ndarray
    normalized: bool = False
    scale: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"design must be a non-empty 2-D array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("design contains non-finite values")
        object.__setattr__(self, "X", X)
        if self.normalized:
            norms = np.mean(X * X, axis=0)
            if np.max(np.abs(norms - 1.0)) > 1e-10:
                raise ValueError("columns are flagged normalized but mean(x**2) != 1")

    @classmethod
    def from_array(cls, X, normalize=True):
        X = np.asarray(X, dtype=np.float64)
        if not normalize:
            return cls(X)
        scale = np.sqrt(np.mean(X * X, axis=0))
        if np.any(scale == 0):
            raise ValueError("cannot normalize an all-zero column")
        return cls(X / scale, normalized=True, scale=scale)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @cached_property
    def gram(self):
        return self.X.T @ self.X

    def is_orthonormal(self, tol=ORTHONORMAL_TOL):
        return bool(np.max(np.abs(self.gram / self.n - np.eye(self.p))) <= tol)


@dataclass(frozen=True, eq=False)
class FeatureOrdering:
    """Features sorted by ``|<y, x_j>|`` descending, ties to the lower index."""

    perm: np.ndarray
    beta_hat: np.ndarray

    @classmethod
    def from_response(cls, design, y):
        y = _check_response(design, y)
        raw = design.X.T @ y / design.n
        perm = np.argsort(-np.abs(raw), kind="stable")
        return cls(perm=perm, beta_hat=raw[perm])

    @property
    def rank(self):
        """``rank[i]`` is the 0-based rank of original feature ``i``."""
        out = np.empty_like(self.perm)
        out[self.perm] = np.arange(self.perm.shape[0])
        return out


@dataclass(frozen=True, eq=False)
class SelectionPath:
    selected: tuple
    candidates: tuple
    residual_norms: np.ndarray
    diagnostics: tuple = ()


@dataclass(frozen=True, eq=False)
class FittedModel:
    coef: np.ndarray
    fitted: np.ndarray
    k: int
    m: int | None = None
    B: int | None = None
    exact: bool = False
    meta: dict = field(default_factory=dict, compare=False)


def _check_response(design, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (design.n,):
        raise ValueError(f"response has shape {y.shape}, expected ({design.n},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    return y


def _check_steps(design, k):
    if not 0 <= k <= min(design.n, design.p):
        raise ValueError(f"k must lie in [0, min(n, p)={min(design.n, design.p)}], got {k}")


def _check_m(design, m):
    if not 1 <= m <= design.p:
        raise ValueError(f"m must lie in [1, p={design.p}], got {m}")


def draw_uniforms(seed, replicate, k, m, p, stream=()):
    """Uniforms driving one randomized path; rows are steps, so prefixes nest in ``k``."""
    return derive_rng(seed, *stream, replicate).random((k, min(m, p)))


def _run(design, y, k, m, U, with_replacement=False):
    G = design.gram
    b = design.X.T @ y
    sel, R, qty, cand = kernels.greedy_path(G, b, k, m, U, DEGENERATE_TOL, with_replacement)
    coef_path = kernels.coef_paths(sel, R, qty, design.p)
    coef = coef_path[-1] if sel.shape[0] else np.zeros(design.p)
    rss = float(y @ y) - np.cumsum(qty * qty)
    residual_norms = np.maximum(rss, 0.0) / design.n
    diag = ()
    if sel.shape[0] < k:
        diag = (
            f"stopped after {sel.shape[0]} of {k} steps: every remaining feature "
            "lies in the span of the selected ones",
        )
    cands = tuple(tuple(int(v) for v in row if v >= 0) for row in cand[: sel.shape[0]])
    path = SelectionPath(
        selected=tuple(int(s) for s in sel),
        candidates=cands,
        residual_norms=residual_norms,
        diagnostics=diag,
    )
    return path, coef


def fs_fit(design, y, k):
    """Plain forward selection for ``k`` steps."""
    y = _check_response(design, y)
    _check_steps(design, k)
    p = design.p
    path, coef = _run(design, y, k, p, np.zeros((k, p)))
    return path, FittedModel(coef=coef, fitted=design.X @ coef, k=k, m=p, B=1)


def efs_base_fit(design, y, k, m, seed=0, replicate=0, with_replacement=False):
    """One randomized forward selection run: each step maximizes over ``m`` sampled features.

    The candidate draws come from stream ``(seed, replicate)``, the same stream
    :func:`efs_ensemble_fit` gives its base fit number ``replicate``.
    """
    y = _check_response(design, y)
    _check_steps(design, k)
    _check_m(design, m)
    U = draw_uniforms(seed, replicate, k, m, design.p)
    path, coef = _run(design, y, k, m, U, with_replacement)
    return path, FittedModel(coef=coef, fitted=design.X @ coef, k=k, m=m, B=1)


def ensemble_coef_path(G, b, k, m, B, seed=0, with_replacement=False, stream=()):
    """Mean coefficient path (rows: 1..k steps) of ``B`` randomized base fits.

    Base fit ``i`` uses stream ``(seed, *stream, i)``. Fits are summed in fixed
    chunks in index order, so the result is independent of the worker count.
    With ``m >= p`` there is no randomness and plain forward selection is returned.
    """
    p = G.shape[0]
    if k == 0:
        return np.zeros((0, p))
    if m >= p and not with_replacement:
        return fs_coef_path(G, b, k)
    total = np.zeros((k, p))
    for start in range(0, B, ENSEMBLE_CHUNK):
        stop = min(B, start + ENSEMBLE_CHUNK)
        U = np.stack([draw_uniforms(seed, i, k, m, p, stream) for i in range(start, stop)])
        total += kernels.ensemble_coef_paths(G, b, k, m, U, DEGENERATE_TOL, with_replacement) * (
            stop - start
        )
    return total / B


def efs_ensemble_fit(design, y, k, m, B, seed=0, with_replacement=False):
    """Average of ``B`` independent :func:`efs_base_fit` runs."""
    y = _check_response(design, y)
    _check_steps(design, k)
    _check_m(design, m)
    if B < 1:
        raise ValueError("B must be >= 1")
    path = ensemble_coef_path(design.gram, design.X.T @ y, k, m, B, seed, with_replacement)
    coef = path[-1] if k else np.zeros(design.p)
    return FittedModel(coef=coef, fitted=design.X @ coef, k=k, m=m, B=B)


def efs_exact_orthogonal(design, ordering, k, m, weights=None):
    """The ``B -> infinity`` ensemble on an orthonormal design: rank-reweighted OLS."""
    if not design.is_orthonormal():
        raise ValueError("exact ensemble needs an orthonormal design (X'X/n = I)")
    p = design.p
    if weights is None:
        weights = exact_weight_table(k, m, p)
    elif not isinstance(weights, WeightTable) or (weights.k, weights.m, weights.p) != (k, m, p):
        raise ValueError("weight table does not match (k, m, p)")
    coef = np.zeros(p)
    coef[ordering.perm] = weights.w * ordering.beta_hat
    return FittedModel(coef=coef, fitted=design.X @ coef, k=k, m=m, exact=True)


def orthonormal_design(n, p, seed=0):
    """Random design with ``X'X / n = I`` exactly up to rounding (needs ``n >= p``)."""
    if n < p:
        raise ValueError("orthonormal design needs n >= p")
    Z = derive_rng(seed).standard_normal((n, p))
    Q, R = np.linalg.qr(Z)
    Q = Q * np.sign(np.diag(R))
    return DesignMatrix(Q * np.sqrt(n), normalized=True)


def fs_coef_path(G, b, k):
    """Coefficients of plain forward selection after each of ``1..k`` steps."""
    p = G.shape[0]
    sel, R, qty, _ = kernels.greedy_path(G, b, k, p, np.zeros((k, p)), DEGENERATE_TOL, False)
    path = kernels.coef_paths(sel, R, qty, p)
    if sel.shape[0] < k:
        fill = path[-1] if sel.shape[0] else np.zeros(p)
        path = np.vstack([path, np.tile(fill, (k - sel.shape[0], 1))])
    return path
