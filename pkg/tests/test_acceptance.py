"""Acceptance suite: twelve criteria, each at its stated tolerance and time budget.

Run under pytest (a summary block lists one PASS/FAIL line per criterion) or
directly with ``python tests/test_acceptance.py``.
"""
import itertools
import math
import time

import numpy as np
import pytest

from efs import analysis as A
from efs import simlab as S
from efs import weights as W
from efs.greedy import FeatureOrdering, efs_exact_orthogonal, fs_fit, orthonormal_design

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []


def c1_oracle_equivalence():
    worst = 0.0
    for p in range(1, 7):
        for k in range(0, p + 1):
            for m in range(1, p + 1):
                diff = np.abs(W.exact_weight_table(k, m, p).w - W.enumerate_weights(k, m, p).w)
                worst = max(worst, float(diff.max()))
    return worst <= 1e-12, f"max |DP - enumeration| = {worst:.2e}"


def c2_monte_carlo():
    mc = W.mc_weight_table(3, 3, 10, 10**5, seed=0)
    exact = W.exact_weight_table(3, 3, 10)
    z = np.abs(mc.w - exact.w)
    inside = bool(np.all(z <= 3 * mc.stderr))
    mass_err = abs(exact.mass - 3)
    worst = float(np.max(np.where(mc.stderr > 0, z / np.where(mc.stderr > 0, mc.stderr, 1), 0)))
    return inside and mass_err <= 1e-12, f"max |z| = {worst:.2f} SE, mass error {mass_err:.1e}"


def c3_sandwich(rel=1e-12):
    # some points sit on a bound (j = k = 1) or within 1e-16 relative of it, so the
    # comparison allows rounding-level slack; test_weights repeats it in high precision
    bad = 0
    total = 0
    tight = 0
    for k in (1, 5, 10, 20):
        for g in (0.05, 1 / 3, 0.9):
            for j in range(1, 3 * k + 1):
                lo, hi = W.sandwich_bounds(j, k, g)
                w = W.asymptotic_weight(j, k, g)
                bad += not (lo * (1 - rel) <= w <= hi * (1 + rel))
                tight += not (lo <= w <= hi)
                total += 1
    return bad == 0, f"{bad} violations over {total} points ({tight} within rounding of a bound)"


def c4_offset_limit(tol=1e-12):
    sym = 0.0
    bound_fail = 0
    shape_fail = 0
    for g in (0.1, 1 / 3, 0.9):
        a = W.rate(g)
        w = {d: W.limit_weight(d, g) for d in range(-12, 13)}
        for d in range(-10, 11):
            sym = max(sym, abs(w[d] + w[-(d + 1)] - 1.0))
            if d < 0:
                lo, hi = 1 / (1 + math.exp(-a * d)), 1 / (1 + math.exp(-a * (d + 0.5)))
            else:
                lo, hi = 1 / (1 + math.exp(-a * (d + 0.5))), 1 / (1 + math.exp(-a * (d + 1)))
            bound_fail += not (lo - tol <= w[d] <= hi + tol)
            shape_fail += w[d + 1] < w[d] - tol
            second = w[d + 1] - 2 * w[d] + w[d - 1]
            if d <= -2:
                shape_fail += second < -tol
            if d >= 1:
                shape_fail += second > tol
    ok = sym < 1e-12 and bound_fail == 0 and shape_fail == 0
    return ok, f"symmetry {sym:.1e}, bound failures {bound_fail}, shape failures {shape_fail}"


def c5_convergence():
    j, k, g = 3, 5, 1 / 3
    target = W.asymptotic_weight(j, k, g)
    errs = [abs(W.exact_weight(j, k, math.floor(g * p), p) - target) for p in (60, 120, 240, 480)]
    ok = all(b < a for a, b in zip(errs, errs[1:]))
    return ok, "errors " + ", ".join(f"{e:.4f}" for e in errs)


def c6_training_gap():
    rng = np.random.default_rng(0)
    worst = 0.0
    for trial in range(20):
        p = int(rng.integers(4, 16))
        n = p + int(rng.integers(0, 10))
        d = orthonormal_design(n, p, seed=trial)
        y = d.X @ rng.normal(size=p) + rng.normal(size=n)
        k, m = int(rng.integers(0, p + 1)), int(rng.integers(1, p + 1))
        order = FeatureOrdering.from_response(d, y)
        _, fs = fs_fit(d, y, k)
        ex = efs_exact_orthogonal(d, order, k, m)
        direct = (np.sum((y - fs.fitted) ** 2) - np.sum((y - ex.fitted) ** 2)) / n
        worst = max(worst, abs(A.training_gap(order.beta_hat**2, W.exact_weight_table(k, m, p)) - direct))
    b2 = 1.0 / np.arange(1, 201)
    m, gap = A.best_training_gap(b2, 5)
    bound = A.gap_lower_bound(b2, 5)
    ok = worst <= 1e-10 and gap > bound
    return ok, f"identity error {worst:.1e}; best gap {gap:.4f} at m={m} vs bound {bound:.5f}"


def c7_df_decomposition():
    p, k, reps = 10, 3, 2000
    d = orthonormal_design(p, p, seed=0)
    zero = np.zeros(p)
    fs = A.df_monte_carlo(A.fs_path_fitter(d, p), d, zero, 1.0, reps, seed=1)
    parts = []
    ok = True
    for i, m in enumerate((2, 5, 8)):
        direct = A.df_monte_carlo(A.efs_exact_fitter(d, k, m), d, zero, 1.0, reps, seed=100 + i)
        rows = A.df_decomposition(fs.samples, W.exact_weight_table(k, m, p))
        se = math.hypot(direct.stderr, rows.std(ddof=1) / math.sqrt(reps))
        z = abs(direct.df - rows.mean()) / se
        ok &= z < 4
        parts.append(f"m={m}: {direct.df:.3f} vs {rows.mean():.3f} ({z:.2f} SE)")
    return ok, "; ".join(parts)


def concave_sequences(p):
    j = np.arange(1, p + 1, dtype=float)
    yield j
    yield np.sqrt(j)
    yield np.log1p(j)
    yield np.minimum(j, 2.0)
    yield 1 - 0.5**j
    yield np.full(p, 3.0)
    rng = np.random.default_rng(p)
    for _ in range(20):
        yield np.cumsum(np.sort(rng.exponential(size=p))[::-1])


def c8_concave_monotone():
    bad = 0
    checks = 0
    for p in range(1, 11):
        tables = {(k, m): W.exact_weight_table(k, m, p) for k in range(p + 1) for m in range(1, p + 1)}
        for seq in concave_sequences(p):
            for k in range(p + 1):
                vals = [A.df_decomposition(seq, tables[k, m]) for m in range(1, p + 1)]
                bad += sum(b < a - 1e-12 for a, b in zip(vals, vals[1:]))
                checks += p - 1
    return bad == 0, f"{bad} violations over {checks} adjacent pairs"


def c9_non_monotone_df():
    n = p = 200
    k, reps = 5, 2000
    d = orthonormal_design(n, p, seed=0)
    f, _ = A.sparse_unit_signal(d, k)
    efs = A.df_monte_carlo(A.efs_exact_fitter(d, k, p // 3), d, f, 1.0, reps, seed=7)
    fs = A.df_monte_carlo(A.fs_fitter(d, k), d, f, 1.0, reps, seed=7)
    diff = efs.samples - fs.samples  # same noise, paired
    mean, se = diff.mean(), diff.std(ddof=1) / math.sqrt(reps)
    return mean - 3 * se > 0, f"df(EFS) {efs.df:.2f} - df(FS) {fs.df:.2f} = {mean:.2f} +- {se:.2f}"


def c10_escape():
    p, k, beta, zeta = 60, 30, 1.0, 0.3
    esc, y = A.build_escape_design(p, p, beta, zeta)
    gram_err = esc.gram_error()
    path, _ = fs_fit(esc.design, y, k)
    errs = A.base_fit_errors(esc.design, y, k, p // 3, 500, seed=0)
    mean, se = errs.mean(), errs.std(ddof=1) / math.sqrt(errs.size)
    bound = (p - k) * zeta**2
    ok = gram_err <= 1e-10 and path.selected[0] == p - 1 and mean + 3 * se < bound
    return ok, (
        f"Gram error {gram_err:.1e}; FS first pick {path.selected[0] + 1}; "
        f"base error {mean:.4f} +- {se:.4f} vs {bound:.2f}"
    )


def c11_simulation(replicates=100):
    wins = {}
    for snr in (0.25, 1.0):
        cfg = S.ExperimentConfig(n=300, p=50, rho=0.5, s=10, snr=snr, k_max=20, B=100,
                                 folds=10, seed=0, replicates=replicates)
        res = S.run_experiment(cfg)
        wins[snr] = {
            k: res.row(k, "EFS").df <= res.row(k, "FS").df
            and res.row(k, "EFS").train_mse <= res.row(k, "FS").train_mse
            for k in range(1, 21)
        }
    low = np.mean(list(wins[0.25].values()))
    near = [k for k in (9, 10, 11) if wins[1.0][k]]
    ok = low >= 0.8 and not near
    return ok, f"SNR 0.25: EFS dominates at {low:.0%} of k; SNR 1.0: still dominates at k={near}"


def c12_shrinkage():
    p, k = 12, 4
    d = orthonormal_design(p, p, seed=0)
    rng = np.random.default_rng(1)
    worst_drop = 0.0
    worst_eq = 0.0
    for _ in range(20):
        beta = rng.normal(size=p) * rng.exponential(size=p)
        y = d.X @ beta
        order = FeatureOrdering.from_response(d, y)
        norms = []
        for m in range(1, p + 1):
            fit = efs_exact_orthogonal(d, order, k, m)
            norms.append(math.sqrt(fit.fitted @ fit.fitted / d.n))
        worst_drop = max(worst_drop, max(a - b for a, b in zip(norms, norms[1:])))
        worst_eq = max(worst_eq, abs(norms[0] - k / p * np.linalg.norm(order.beta_hat)))
    ok = worst_drop <= 1e-12 and worst_eq <= 1e-12
    return ok, f"largest decrease {max(worst_drop, 0):.1e}; m=1 norm error {worst_eq:.1e}"


CRITERIA = [
    (1, "oracle weight equivalence", c1_oracle_equivalence, 10),
    (2, "Monte Carlo weight agreement", c2_monte_carlo, 30),
    (3, "logistic sandwich", c3_sandwich, 1),
    (4, "offset-limit properties", c4_offset_limit, 1),
    (5, "finite-to-asymptotic convergence", c5_convergence, 5),
    (6, "training gap identity and bound", c6_training_gap, 5),
    (7, "df decomposition", c7_df_decomposition, 60),
    (8, "concavity gives monotone df", c8_concave_monotone, 10),
    (9, "non-monotone df", c9_non_monotone_df, 120),
    (10, "escape construction", c10_escape, 60),
    (11, "simulation study (reduced scale)", c11_simulation, 900),
    (12, "shrinkage", c12_shrinkage, 5),
]


def evaluate(number, name, fn, budget):
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    ok = bool(ok) and elapsed < budget
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} [{name}] {detail} ({elapsed:.1f}s / {budget}s)"
    return ok, line


@pytest.mark.parametrize("number,name,fn,budget", CRITERIA, ids=[f"c{c[0]}" for c in CRITERIA])
def test_criterion(number, name, fn, budget):
    ok, line = evaluate(number, name, fn, budget)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
