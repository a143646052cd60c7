"""Command-line interface: ``daglearn {simulate,learn,eval,bench}``.

Exit codes: 0 ok, 2 usage or input error, 3 learned but not converged,
4 optimization diverged.
"""

import argparse
import csv
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .acyclicity import is_dag
from .errors import DagLearnError, DimensionError, DivergedError, InputError
from .metrics import count_accuracy
from .pipeline import MODELS, Cell, learn, run_cell
from .simulate import MECHANISMS, SemSpec, parse_graph, sample_dag, simulate_sem
from .solver import InnerOptions, LearnConfig

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_DIVERGED = 0, 2, 3, 4
GRAPHS = ("er1", "er2", "er4", "sf1", "sf2", "sf4")
THREADS_ENV = "DAGLEARN_THREADS"

log = logging.getLogger("daglearn")


def _manifest(command, config, seed, outputs, wall_time):
    return {"command": command, "config": config, "seed": seed, "versions": io.versions(),
            "wall_time": wall_time, "outputs": [str(p) for p in outputs]}


def _hidden(text):
    text = text.strip()
    if text in ("", "0"):
        return ()
    try:
        sizes = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad hidden layer spec {text!r}")
    if any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("hidden sizes must be positive (use 0 for linear)")
    return sizes


def cmd_simulate(args):
    t0 = time.perf_counter()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = parse_graph(args.graph, args.d, args.seed)
    B = sample_dag(spec)
    ds = simulate_sem(B, SemSpec(args.sem), args.n, args.seed)
    paths = [out / "X.csv", out / "W_true.csv", out / "manifest.json"]
    io.write_matrix(paths[0], ds.X)
    io.write_matrix(paths[1], ds.B_true, integer=True)
    config = {"d": args.d, "graph": args.graph, "sem": args.sem, "n": args.n,
              "column_means": ds.column_means.tolist()}
    io.write_json(paths[2], _manifest("simulate", config, args.seed, paths,
                                      time.perf_counter() - t0))
    return EXIT_OK


def _learn_config(args):
    inner = InnerOptions(memory=args.memory, pg_tol=args.pg_tol, max_iters=args.max_inner_iters)
    return LearnConfig(lam=args.lam, rho_init=args.rho_init, rho_max=args.rho_max,
                       h_tol=args.h_tol, max_dual_iters=args.max_dual_iters,
                       progress_ratio=args.progress_ratio, inner=inner,
                       threshold=args.threshold, seed=args.seed)


def cmd_learn(args):
    t0 = time.perf_counter()
    X = io.read_matrix(args.input)
    d = X.shape[1]
    forbidden = None
    if args.mask:
        forbidden = io.read_matrix(args.mask)
        if forbidden.shape != (d, d):
            raise InputError(f"mask must be {d}x{d}, got {forbidden.shape}")
    try:
        cfg = _learn_config(args)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result, _, means = learn(X, args.model, cfg, hidden=args.hidden, n_basis=args.basis_r,
                                 lambda1=args.lambda1, forbidden=forbidden, ridge=args.ridge)
    except DivergedError as exc:
        io.write_json(out / "trace.json", [r.__dict__ for r in exc.trace])
        raise
    paths = [out / "W_est.csv", out / "B_est.csv", out / "trace.json", out / "manifest.json"]
    io.write_matrix(paths[0], result.W_est)
    io.write_matrix(paths[1], result.B_est, integer=True)
    io.write_json(paths[2], [r.__dict__ for r in result.trace])
    config = {"input": str(args.input), "model": args.model, "hidden": list(args.hidden),
              "basis_r": args.basis_r, "lambda1": args.lambda1, "ridge": args.ridge,
              "mask": args.mask,
              "learn": cfg.to_dict()}
    manifest = _manifest("learn", config, args.seed, paths, time.perf_counter() - t0)
    manifest.update(converged=result.converged, h_final=result.h_final,
                    effective_threshold=result.effective_threshold,
                    column_means=means.tolist(), n_edges=int(result.B_est.sum()))
    io.write_json(paths[3], manifest)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_eval(args):
    B_true = io.read_matrix(args.true)
    B_est = io.read_matrix(args.est)
    if B_true.shape != B_est.shape:
        raise DimensionError(f"shape mismatch: {B_true.shape} vs {B_est.shape}")
    if not is_dag(B_est):
        log.warning("estimate is not acyclic")
    report = count_accuracy(B_true, B_est, args.threshold)
    print(report.to_json())
    return EXIT_OK


GRID_KEYS = {"graph": "graph", "d": "d", "n": "n", "sem": "sem", "model": "model",
             "lambda": "lam", "threshold": "threshold", "hidden": "hidden",
             "basis_r": "basis_r", "lambda1": "lambda1", "ridge": "ridge"}
RESULT_FIELDS = ["graph", "d", "n", "sem", "model", "lam", "threshold", "hidden", "basis_r",
                 "lambda1", "ridge", "seed", "status", "error", "fdr", "tpr", "fpr", "shd", "nnz",
                 "effective_threshold", "n_true", "converged", "h_final", "wall_time",
                 "learn_time"]
N_KEY_FIELDS = 11
METRIC_FIELDS = ["fdr", "tpr", "fpr", "shd", "nnz", "wall_time"]


def load_grid(path):
    """Expand a JSON grid file into a list of :class:`Cell`.

    Keys are ``graph, d, n, sem, model, lambda, threshold, hidden, basis_r,
    lambda1, ridge`` (scalar or list; lists are crossed) plus an optional ``solver``
    object passed to :class:`LearnConfig`.
    """
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read grid {path}: {exc}") from exc
    unknown = set(spec) - set(GRID_KEYS) - {"solver"}
    if unknown:
        raise InputError(f"unknown grid keys: {sorted(unknown)}")
    solver = spec.get("solver", {})
    axes = []
    for key, attr in GRID_KEYS.items():
        if key not in spec:
            continue
        vals = spec[key]
        if key == "hidden":
            # a flat list of ints is a list of single-layer sizes
            vals = vals if isinstance(vals, list) else [vals]
            vals = [tuple(v) if isinstance(v, list) else ((v,) if v else ()) for v in vals]
        elif not isinstance(vals, list):
            vals = [vals]
        axes.append([(attr, v) for v in vals])
    return [Cell(solver=dict(solver), **dict(combo)) for combo in itertools.product(*axes)]


def _safe_run(cell, seed):
    try:
        return run_cell(cell, seed)
    except Exception as exc:  # isolate failing cells
        row = dict(cell.key(), seed=seed, status="error", error=f"{type(exc).__name__}: {exc}")
        return row


def aggregate(rows):
    groups = {}
    for row in rows:
        key = tuple(row[k] for k in RESULT_FIELDS[:N_KEY_FIELDS])
        groups.setdefault(key, []).append(row)
    out = []
    for key, members in groups.items():
        ok = [r for r in members if r["status"] == "ok"]
        agg = dict(zip(RESULT_FIELDS[:N_KEY_FIELDS], key), n_runs=len(members), n_ok=len(ok))
        for m in METRIC_FIELDS:
            vals = np.array([float(r[m]) for r in ok])
            agg[f"{m}_mean"] = float(vals.mean()) if len(vals) else float("nan")
            agg[f"{m}_std"] = float(vals.std()) if len(vals) else float("nan")
        out.append(agg)
    return out


def _workers(requested):
    cap = os.environ.get(THREADS_ENV)
    n = requested if requested else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def cmd_bench(args):
    cells = load_grid(args.grid)
    jobs = [(cell, args.seed + r) for cell in cells for r in range(args.repeats)]
    workers = _workers(args.workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_safe_run, *zip(*jobs)))
    else:
        rows = [_safe_run(cell, seed) for cell, seed in jobs]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(out, rows, RESULT_FIELDS)
    agg = aggregate(rows)
    summary = out.with_name(out.stem + "_summary.csv")
    _write_rows(summary, agg, list(agg[0].keys()) if agg else [])
    for r in rows:
        if r["status"] != "ok":
            log.warning("cell failed (seed %s): %s", r["seed"], r["error"])
    return EXIT_OK if any(r["status"] == "ok" for r in rows) else EXIT_USAGE


def _write_rows(path, rows, fields):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be a nonnegative number")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="daglearn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a random DAG and SEM data")
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--graph", choices=GRAPHS, required=True)
    p.add_argument("--sem", choices=MECHANISMS, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("learn", help="learn a DAG from a data CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--model", choices=MODELS, default="mlp")
    p.add_argument("--hidden", type=_hidden, default=(10,),
                   help="hidden layer sizes, e.g. 10 or 10,5; 0 for a linear model")
    p.add_argument("--basis-r", type=_positive_int, default=10)
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, default=0.01)
    p.add_argument("--lambda1", type=_nonneg_float, default=0.0)
    p.add_argument("--ridge", type=_nonneg_float, default=0.0,
                   help="l2 weight on all MLP weight matrices (mlp only)")
    p.add_argument("--threshold", type=_nonneg_float, default=0.3)
    p.add_argument("--mask", help="d x d 0/1 CSV; 1 forbids the edge row -> column")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho-init", type=float, default=1.0)
    p.add_argument("--rho-max", type=float, default=1e16)
    p.add_argument("--h-tol", type=float, default=1e-8)
    p.add_argument("--max-dual-iters", type=_positive_int, default=100)
    p.add_argument("--progress-ratio", type=float, default=0.25)
    p.add_argument("--memory", type=_positive_int, default=10)
    p.add_argument("--pg-tol", type=float, default=1e-5)
    p.add_argument("--max-inner-iters", type=_positive_int, default=1000)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("eval", help="score an estimated DAG against the truth")
    p.add_argument("--true", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--threshold", type=float, default=None,
                   help="effective threshold to echo in the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run a simulation grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--repeats", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0, help="first seed; repeats use seed+r")
    p.add_argument("--workers", type=int, default=1,
                   help=f"parallel workers (0 = all cores), capped by ${THREADS_ENV}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DivergedError as exc:
        print(f"daglearn: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DagLearnError, ValueError) as exc:
        print(f"daglearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
