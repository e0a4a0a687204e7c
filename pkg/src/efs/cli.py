"""Command line entry point: ``efs weights|fit|analyze|simulate``.

Exit codes: 0 success, 2 invalid input, 3 I/O failure. Tabular output is
CSV with floats at 17 significant digits; ``--out`` files are written to a
temporary sibling and renamed into place, so a failed run leaves nothing behind.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from efs import analysis, greedy, simlab, weights
from efs.simlab import fmt

DEFAULT_SEED = 0


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".efs-", dir=folder)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _seed(args, fallback=DEFAULT_SEED):
    return fallback if args.seed is None else args.seed


def _load_config(path):
    with open(path) as fh:
        raw = fh.read()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})")
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    return data


def _take(cfg, allowed, required=()):
    unknown = set(cfg) - set(allowed) - set(required)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    missing = [key for key in required if key not in cfg]
    if missing:
        raise ValueError(f"missing config keys: {missing}")
    out = dict(allowed)
    out.update(cfg)
    return out


# weights ---------------------------------------------------------------


def cmd_weights(args):
    kind = args.kind
    if kind == "exact":
        _need(args, "k", "m", "p")
        table = weights.exact_weight_table(args.k, args.m, args.p)
        return _csv(("j", "weight"), zip(range(1, args.p + 1), table.w))
    if kind == "mc":
        _need(args, "k", "m", "p", "reps")
        table = weights.mc_weight_table(args.k, args.m, args.p, args.reps, seed=_seed(args))
        return _csv(("j", "weight", "stderr"), zip(range(1, args.p + 1), table.w, table.stderr))
    if kind == "asymptotic":
        _need(args, "k", "gamma")
        alpha = weights.rate(args.gamma)
        count = args.p if args.p is not None else int(math.ceil(args.k + 40.0 / alpha))
        w = weights.asymptotic_weights(args.k, args.gamma, count)
        return _csv(("j", "weight"), zip(range(1, count + 1), w))
    _need(args, "d", "gamma")
    return _csv(("j", "weight"), [(args.d, weights.limit_weight(args.d, args.gamma))])


def _need(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"weights {args.kind} requires {' '.join(missing)}")


# fit -------------------------------------------------------------------


def read_data(path):
    """First column ``y``, the rest ``X``; a non-numeric first row is a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows:
        try:
            [float(v) for v in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise ValueError(f"{path} has no data rows")
    width = len(rows[0])
    if width < 2 or any(len(r) != width for r in rows):
        raise ValueError(f"{path} must have a constant number (>= 2) of columns")
    try:
        data = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}")
    return data[:, 0], data[:, 1:]


def cmd_fit(args):
    y, X = read_data(args.data)
    design = greedy.DesignMatrix.from_array(X)
    if args.k is None:
        raise UsageError("fit requires --k")
    if args.method == "fs":
        path, model = greedy.fs_fit(design, y, args.k)
        selected = [s + 1 for s in path.selected]
    else:
        m = args.m if args.m is not None else max(1, design.p // 3)
        B = args.B if args.B is not None else 100
        model = greedy.efs_ensemble_fit(design, y, args.k, m, B, seed=_seed(args))
        selected = [int(j) + 1 for j in np.flatnonzero(model.coef)]
    resid = y - model.fitted
    out = {
        "selected": selected,
        "coef": [float(c) for c in model.coef / design.scale],
        "train_mse": float(resid @ resid / design.n),
    }
    return json.dumps(out) + "\n"


# analyze ---------------------------------------------------------------


def _analyze_df(cfg, seed):
    c = _take(cfg, {"n": None, "sigma2": 1.0, "replicates": 2000}, ("k", "m", "p"))
    p, k, m = int(c["p"]), int(c["k"]), int(c["m"])
    n = int(c["n"]) if c["n"] is not None else p
    design = greedy.orthonormal_design(n, p, seed=seed)
    zero = np.zeros(n)
    reps, s2 = int(c["replicates"]), float(c["sigma2"])
    efs = analysis.df_monte_carlo(
        analysis.efs_exact_fitter(design, k, m), design, zero, s2, reps, seed=seed
    )
    fs = analysis.df_monte_carlo(
        analysis.fs_path_fitter(design, p), design, zero, s2, reps, seed=seed + 1
    )
    per_rep = analysis.df_decomposition(fs.samples, weights.exact_weight_table(k, m, p))
    dec = per_rep.mean()
    dec_se = per_rep.std(ddof=1) / math.sqrt(reps)
    return [
        ("df_monte_carlo", efs.df, efs.stderr),
        ("df_decomposition", dec, dec_se),
        ("difference", efs.df - dec, math.hypot(efs.stderr, dec_se)),
    ]


def _analyze_gap(cfg, seed):
    c = _take(cfg, {"profile": "harmonic", "m_grid": None}, ("k", "p"))
    p, k = int(c["p"]), int(c["k"])
    prof = c["profile"]
    if prof == "harmonic":
        b2 = 1.0 / np.arange(1, p + 1)
    elif isinstance(prof, list):
        b2 = np.asarray(prof, dtype=np.float64)
    else:
        raise ValueError("profile must be 'harmonic' or a list of squared coefficients")
    m, gap = analysis.best_training_gap(b2, k, c["m_grid"])
    return [
        ("best_m", m, 0.0),
        ("best_gap", gap, 0.0),
        ("lower_bound", analysis.gap_lower_bound(b2, k), 0.0),
    ]


def _analyze_majorization(cfg, seed):
    c = _take(cfg, {"m_grid": None}, ("k", "p"))
    p, k = int(c["p"]), int(c["k"])
    grid = list(range(1, p + 1)) if c["m_grid"] is None else [int(m) for m in c["m_grid"]]
    rep = analysis.majorization_check(k, p, grid)
    return [
        ("holds", int(rep.holds), 0.0),
        ("max_violation", rep.max_violation, 0.0),
        ("mass_error", rep.mass_error, 0.0),
    ]


def _analyze_escape(cfg, seed):
    c = _take(cfg, {"n": None, "m": None, "replicates": 500}, ("p", "k", "beta", "zeta"))
    p, k = int(c["p"]), int(c["k"])
    n = int(c["n"]) if c["n"] is not None else p
    m = int(c["m"]) if c["m"] is not None else p // 3
    esc, y = analysis.build_escape_design(p, n, float(c["beta"]), float(c["zeta"]))
    path, model = greedy.fs_fit(esc.design, y, k)
    resid = y - model.fitted
    errs = analysis.base_fit_errors(esc.design, y, k, m, int(c["replicates"]), seed=seed)
    return [
        ("gram_error", esc.gram_error(), 0.0),
        ("fs_first_pick", path.selected[0] + 1, 0.0),
        ("fs_train_error", resid @ resid / n, 0.0),
        ("fs_train_error_formula", (p - k) * esc.zeta**2, 0.0),
        ("base_train_error", errs.mean(), errs.std(ddof=1) / math.sqrt(errs.size)),
    ]


ANALYSES = {
    "df": _analyze_df,
    "gap": _analyze_gap,
    "majorization": _analyze_majorization,
    "escape": _analyze_escape,
}


def cmd_analyze(args):
    cfg = _load_config(args.config)
    rows = ANALYSES[args.kind](cfg, _seed(args))
    return _csv(("quantity", "value", "stderr"), rows)


# simulate --------------------------------------------------------------


def cmd_simulate(args):
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    config = simlab.ExperimentConfig.from_dict(cfg)
    return simlab.run_experiment(config).to_csv()


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help="random seed (default 0)")
    common.add_argument("--out", default=None, help="output file (default stdout)")

    parser = _Parser(prog="efs", description="Ensemble forward selection toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    w = sub.add_parser("weights", parents=[common], help="selection weight tables")
    w.add_argument("kind", choices=("exact", "asymptotic", "limit", "mc"))
    w.add_argument("--k", type=int)
    w.add_argument("--m", type=int)
    w.add_argument("--p", type=int)
    w.add_argument("--reps", type=int)
    w.add_argument("--gamma", type=float)
    w.add_argument("--d", type=float)
    w.set_defaults(func=cmd_weights)

    f = sub.add_parser("fit", parents=[common], help="fit FS or EFS to a CSV data set")
    f.add_argument("method", choices=("fs", "efs"))
    f.add_argument("--k", type=int)
    f.add_argument("--m", type=int)
    f.add_argument("--B", type=int)
    f.add_argument("--data", required=True)
    f.set_defaults(func=cmd_fit)

    a = sub.add_parser("analyze", parents=[common], help="df, gap, majorization, escape")
    a.add_argument("kind", choices=tuple(ANALYSES))
    a.add_argument("--config", required=True)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", parents=[common], help="FS vs EFS simulation study")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_simulate)
    return parser


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command == "simulate" and args.out is None:
            raise UsageError("simulate requires --out")
        text = args.func(args)
        _emit(text, args.out)
    except OSError as exc:
        print(f"efs: I/O error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, TypeError, KeyError) as exc:
        msg = " ".join(str(exc).split())
        print(f"efs: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
