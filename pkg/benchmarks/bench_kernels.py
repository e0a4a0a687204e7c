"""Time the compiled kernels against the NumPy fallback on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends consume identical uniforms, so the outputs are also compared.
"""
import argparse
import timeit

import numpy as np

from efs._backend import get_kernels


def cases():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 50))
    G, b = X.T @ X, X.T @ rng.normal(size=300)
    yield "greedy_path p=50 k=20 m=9", lambda K: K.greedy_path(G, b, 20, 9, rng_u(20, 9))
    U = np.random.default_rng(1).random((32, 20, 9))
    yield "ensemble 32 fits p=50 k=20 m=9", lambda K: K.ensemble_coef_paths(G, b, 20, 9, U)
    X2 = rng.normal(size=(1000, 100))
    G2, b2 = X2.T @ X2, X2.T @ rng.normal(size=1000)
    U2 = np.random.default_rng(2).random((32, 20, 34))
    yield "ensemble 32 fits p=100 k=20 m=34", lambda K: K.ensemble_coef_paths(G2, b2, 20, 34, U2)
    R = np.random.default_rng(3).random((2000, 5, 3))
    yield "rank counts 2000 reps k=5 m=3 p=20", lambda K: K.rank_mc_counts(5, 3, 20, R)


def rng_u(k, m):
    return np.random.default_rng(4).random((k, m))


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=0, atol=1e-10)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = get_kernels("python")
    try:
        cy = get_kernels("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    print(f"{'case':38s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}  match")
    for name, fn in cases():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:38s} {t_py:10.2f} {t_cy:10.3f} {t_py / t_cy:7.0f}x  {same(fn(py), fn(cy))}")


if __name__ == "__main__":
    main()
