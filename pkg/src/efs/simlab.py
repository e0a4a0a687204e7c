"""Simulation study: banded Gaussian designs, CV choice of ``m``, df vs training error."""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass

import numpy as np

from efs._rng import derive_rng
from efs.analysis import df_monte_carlo
from efs.greedy import DesignMatrix, ensemble_coef_path, fs_coef_path

GRID_LENGTH = 12
RESULT_HEADER = ("k", "method", "chosen_m", "df", "df_se", "train_mse", "train_mse_se")


def fmt(x):
    """Floats with 17 significant digits, integers as integers."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def gen_banded_gaussian(n, p, rho, seed=0):
    """Rows IID ``N(0, Sigma)`` with ``Sigma_ij = rho^|i-j|``, columns then normalized.

    Columns come from the AR(1) recursion
    ``x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j``, which has exactly that covariance.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    Z = derive_rng(seed).standard_normal((n, p))
    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + c * Z[:, j]
    return DesignMatrix.from_array(X)


def banded_quadratic_form(beta, rho):
    """``beta' Sigma beta`` for ``Sigma_ij = rho^|i-j|``, summed over the support of beta."""
    beta = np.asarray(beta, dtype=np.float64)
    idx = np.flatnonzero(beta)
    if idx.size == 0:
        return 0.0
    v = beta[idx]
    lag = np.abs(idx[:, None] - idx[None, :])
    return float(v @ (rho**lag) @ v)


def calibrate_sigma2(beta, sigma_params, snr):
    """Noise variance hitting ``snr = beta' Sigma beta / sigma^2``; ``sigma_params = (rho, p)``."""
    rho, p = sigma_params
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (p,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({p},)")
    if not snr > 0:
        raise ValueError("snr must be positive")
    signal = banded_quadratic_form(beta, rho)
    if signal <= 0:
        raise ValueError("zero signal cannot reach a finite snr")
    return signal / snr


def geometric_grid(p, length=GRID_LENGTH, start=2):
    """Rounded geometric grid from ``start`` to ``p``, deduplicated and ascending."""
    if p <= start:
        return [int(p)]
    raw = np.round(np.exp(np.linspace(math.log(start), math.log(p), length))).astype(int)
    return [int(v) for v in np.unique(raw)]


def fold_indices(n, folds, seed=0):
    """Shuffle rows with ``seed``, then cut into ``folds`` contiguous blocks."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise ValueError(f"{folds} folds leave some fold empty with n={n}")
    perm = derive_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def cv_errors(design, y, k_max, m_grid, B, folds, seed=0):
    """Held-out MSE for every ``(m, k)``, shape ``(len(m_grid), k_max)``.

    Fold ``f`` with grid value ``m`` refits the ensemble with base-fit streams
    ``(seed, f, m, i)``. Paths nest in ``k``, so one ``k_max`` fit per cell
    serves every smaller model size.
    """
    X = design.X
    y = np.asarray(y, dtype=np.float64)
    grid = list(m_grid)
    if not grid:
        raise ValueError("m_grid is empty")
    parts = fold_indices(design.n, folds, seed)
    err = np.zeros((len(grid), k_max))
    for f, test in enumerate(parts):
        train = np.setdiff1d(np.arange(design.n), test, assume_unique=True)
        Xtr, Xte = X[train], X[test]
        G = Xtr.T @ Xtr
        b = Xtr.T @ y[train]
        kk = min(k_max, len(train))
        for i, m in enumerate(grid):
            path = ensemble_coef_path(G, b, kk, m, B, seed, stream=(f, m))
            if kk < k_max:
                path = np.vstack([path, np.tile(path[-1], (k_max - kk, 1))])
            resid = y[test][None, :] - path @ Xte.T
            err[i] += np.mean(resid * resid, axis=1)
    return err / len(parts)


def _argmin_m(err_col, grid):
    # grid ascending, so the first minimum is the smallest m
    return grid[int(np.argmin(err_col))]


def cv_select_m(design, y, k, m_grid, B, folds, seed=0):
    """``m`` with the smallest cross-validated error for ``k`` steps (ties to smaller ``m``)."""
    grid = sorted(set(int(m) for m in m_grid))
    err = cv_errors(design, y, k, grid, B, folds, seed)
    return _argmin_m(err[:, k - 1], grid)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 300
    p: int = 50
    rho: float = 0.5
    s: int = 10
    snr: float = 0.25
    k_max: int = 20
    B: int = 100
    m_grid: tuple | None = None
    folds: int = 10
    seed: int = 0
    replicates: int = 50

    def __post_init__(self):
        if self.m_grid is not None:
            object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not 1 <= self.s <= self.p:
            raise ValueError("s must lie in [1, p]")
        if not 1 <= self.k_max <= self.p:
            raise ValueError("k_max must lie in [1, p]")
        if self.B < 1 or self.replicates < 2:
            raise ValueError("need B >= 1 and replicates >= 2")
        if self.m_grid is not None:
            if not self.m_grid or any(not 1 <= m <= self.p for m in self.m_grid):
                raise ValueError("m_grid must be a non-empty subset of 1..p")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def grid(self):
        if self.m_grid is None:
            return geometric_grid(self.p)
        return sorted(set(self.m_grid))


@dataclass(frozen=True)
class ExperimentRow:
    k: int
    method: str
    chosen_m: int
    df: float
    df_se: float
    train_mse: float
    train_mse_se: float


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: tuple
    sigma2: float

    def row(self, k, method):
        for r in self.rows:
            if r.k == k and r.method == method:
                return r
        raise KeyError((k, method))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in self.rows:
            w.writerow([fmt(getattr(r, name)) for name in RESULT_HEADER])
        return buf.getvalue()


def _mode(values):
    vals, counts = np.unique(np.asarray(values), return_counts=True)
    return int(vals[int(np.argmax(counts))])


def run_experiment(config):
    """FS(k) versus CV-tuned EFS(k, m) for ``k = 1..k_max``.

    One design is drawn from stream ``(seed, 0)``; outer replicates redraw the
    noise only (fixed design) and rerun the whole pipeline, including the CV
    choice of ``m``, so the df estimate covers the tuned procedure. Rows carry
    the most frequent chosen ``m`` across replicates.
    """
    cfg = config
    design = gen_banded_gaussian(cfg.n, cfg.p, cfg.rho, seed=_child(cfg.seed, 0))
    beta = np.zeros(cfg.p)
    beta[: cfg.s] = 1.0
    sigma2 = calibrate_sigma2(beta, (cfg.rho, cfg.p), cfg.snr)
    true_f = design.X @ beta
    grid = cfg.grid()
    K = cfg.k_max
    X = design.X
    G = design.gram

    def fitter(y, rng):
        cv_seed, efs_seed = (int(v) for v in rng.integers(0, 2**63, size=2))
        b = X.T @ y
        fs = fs_coef_path(G, b, K)
        err = cv_errors(design, y, K, grid, cfg.B, cfg.folds, cv_seed)
        chosen = [_argmin_m(err[:, k], grid) for k in range(K)]
        efs = np.empty_like(fs)
        for m in sorted(set(chosen)):
            path = ensemble_coef_path(G, b, K, m, cfg.B, efs_seed)
            for k in range(K):
                if chosen[k] == m:
                    efs[k] = path[k]
        return np.vstack([fs, efs]) @ X.T, chosen

    est = df_monte_carlo(fitter, design, true_f, sigma2, cfg.replicates, seed=_child(cfg.seed, 1))
    chosen = np.array(est.extras)
    rows = []
    for k in range(1, K + 1):
        for method, col, m in (("FS", k - 1, cfg.p), ("EFS", K + k - 1, _mode(chosen[:, k - 1]))):
            rows.append(
                ExperimentRow(
                    k=k,
                    method=method,
                    chosen_m=m,
                    df=float(est.df[col]),
                    df_se=float(est.stderr[col]),
                    train_mse=float(est.train_mse[col]),
                    train_mse_se=float(est.train_mse_se[col]),
                )
            )
    return ExperimentResult(cfg, tuple(rows), sigma2)


def _child(seed, key):
    return int(derive_rng(seed, key).integers(0, 2**63))
