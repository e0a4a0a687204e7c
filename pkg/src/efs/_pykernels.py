"""Pure NumPy implementations of the hot loops.

Every function here has a twin of the same name and signature in
``_ckernels.pyx``. Both consume the same pre-drawn uniforms, so for a fixed
input they make the same random choices; the compiled twin is only faster.

Index conventions are 0-based throughout. Uniform arrays have one row per
selection step and ``min(m, p)`` columns; row ``l`` drives the partial
Fisher-Yates shuffle of step ``l``.
"""
import numpy as np


def _draw_candidates(pool, m, u_row, with_replacement):
    size = pool.shape[0]
    if with_replacement:
        idx = np.minimum((u_row[:m] * size).astype(np.int64), size - 1)
        return pool[idx]
    if size <= m:
        return pool
    pool = pool.copy()
    for i in range(m):
        t = i + int(u_row[i] * (size - i))
        if t >= size:
            t = size - 1
        pool[i], pool[t] = pool[t], pool[i]
    return pool[:m]


def rank_mc_counts(k, m, p, U, with_replacement=False):
    """Count how often each rank is selected over ``U.shape[0]`` replicates.

    Selection sees ranks only: among the sampled candidates the smallest rank
    (largest absolute OLS coefficient) wins.
    """
    counts = np.zeros(p, dtype=np.int64)
    for r in range(U.shape[0]):
        taken = np.zeros(p, dtype=bool)
        for step in range(min(k, p)):
            pool = np.flatnonzero(~taken)
            cand = _draw_candidates(pool, m, U[r, step], with_replacement)
            s = cand.min()
            taken[s] = True
        counts += taken
    return counts


def greedy_path(G, b, k, m, U, tol=1e-10, with_replacement=False):
    """Forward selection in Gram space, optionally restricted per step.

    Parameters
    ----------
    G : (p, p) array
        ``X.T @ X``.
    b : (p,) array
        ``X.T @ y``.
    k : int
        Number of steps.
    m : int
        Candidate-set size; ``m >= p`` gives plain forward selection.
    U : (k, min(m, p)) array
        Uniforms for the candidate draws.

    Returns
    -------
    selected : (k_eff,) int64
    R : (k_eff, k_eff) upper-triangular factor of the selected columns
    qty : (k_eff,) projections of y on the orthonormalized columns
    cand : (k, min(m, p)) int64, candidate sets (``-1`` padded)
    """
    G = np.asarray(G, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    p = G.shape[0]
    mm = min(m, p)
    diag = np.diag(G).copy()
    c = b.copy()
    d = diag.copy()
    A = np.zeros((k, p))
    qty = np.zeros(k)
    R = np.zeros((k, k))
    taken = np.zeros(p, dtype=bool)
    selected = []
    cand_out = np.full((k, mm), -1, dtype=np.int64)
    for l in range(k):
        pool = np.flatnonzero(~taken & (d > tol * diag))
        if pool.shape[0] == 0:
            break
        cand = _draw_candidates(pool, m, U[l], with_replacement)
        cand_out[l, : cand.shape[0]] = cand
        obj = c[cand] ** 2 / d[cand]
        best = obj.max()
        s = int(cand[obj == best].min())
        norm = np.sqrt(d[s])
        # accumulate in the compiled kernel's order so exact ties break the same way
        row = G[s].copy()
        for t in range(l):
            row -= A[t, s] * A[t]
        row /= norm
        A[l] = row
        qty[l] = c[s] / norm
        R[:l, l] = A[:l, s]
        R[l, l] = norm
        c -= row * qty[l]
        d -= row * row
        taken[s] = True
        selected.append(s)
    ke = len(selected)
    return np.array(selected, dtype=np.int64), R[:ke, :ke].copy(), qty[:ke].copy(), cand_out


def coef_paths(selected, R, qty, p):
    """Least-squares coefficients for every prefix of the selection path."""
    ke = selected.shape[0]
    out = np.zeros((ke, p))
    for l in range(1, ke + 1):
        beta = np.zeros(l)
        for i in range(l - 1, -1, -1):
            beta[i] = (qty[i] - R[i, i + 1 : l] @ beta[i + 1 : l]) / R[i, i]
        out[l - 1, selected[:l]] = beta
    return out


def ensemble_coef_paths(G, b, k, m, U, tol=1e-10, with_replacement=False):
    """Mean coefficient path over ``U.shape[0]`` randomized base fits.

    Row ``l`` of the result is the ensemble at ``l + 1`` steps. A base fit
    that stops early keeps its last coefficients for the remaining rows.
    """
    p = G.shape[0]
    total = np.zeros((k, p))
    for r in range(U.shape[0]):
        sel, R, qty, _ = greedy_path(G, b, k, m, U[r], tol, with_replacement)
        paths = coef_paths(sel, R, qty, p)
        ke = sel.shape[0]
        if ke:
            total[:ke] += paths
            total[ke:] += paths[-1]
    return total / U.shape[0]
