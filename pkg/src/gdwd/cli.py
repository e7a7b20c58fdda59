"""Command-line interface: ``gdwd train | predict | bench``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from . import solver as S
from .errors import DWDError, InvalidInputError, NumericalError
from .ingest import binarize_labels, load_libsvm
from .metrics import classification_error
from .model import (ProblemData, compute_class_weights, compute_penalty_parameter,
                    median_interclass_distance)
from .modelfile import load_model, save_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

BENCH_COLUMNS = ("Data", "n", "d", "C", "Iter", "Time", "psqmr", "double", "TrainErr")

log = logging.getLogger("gdwd")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def build_problem(X, y, q: float, C: Optional[float], weighted: bool) -> ProblemData:
    """Assemble a training problem, filling in the default ``C``."""
    if C is None:
        dist = median_interclass_distance(X, y)
        C = compute_penalty_parameter(X.shape[1], X.shape[0], dist, q)
    tau = compute_class_weights(y, q) if weighted else None
    return ProblemData(X, y, q=q, C=C, tau=tau)


def _options(args) -> S.SolverOptions:
    return S.SolverOptions(max_iter=args.max_iter, tol=args.tol, mu=args.mu,
                           variant=args.variant, strategy=args.force_strategy,
                           seed=args.seed)


def write_log(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, fieldnames=S.LOG_COLUMNS)
        wr.writeheader()
        for row in rows:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def summary_line(result: S.SolveResult, err: float) -> str:
    return (f"iter {result.iterations} | status {result.status.value} | "
            f"train error {err:.2f}% | psqmr|double {result.psqmr_iters}|{result.doubles} | "
            f"time {result.solve_time:.2f}s")


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    X, raw = load_libsvm(args.data, d=args.d)
    y, label_map = binarize_labels(raw)
    read_time = time.perf_counter() - t0
    p = build_problem(X, y, args.q, args.C, args.weighted)
    result = S.solve(p, _options(args))
    result.model.label_map = label_map
    result.model.termination["time"] = read_time + result.solve_time
    err = classification_error(result.model.w, result.model.beta, p.X, p.y)
    print(f"n {p.n} | d {p.d} | C {p.C:.6g} | q {p.q:g} | variant {args.variant} | "
          f"strategy {result.strategy.value if result.strategy else 'none'}")
    print(summary_line(result, err))
    if args.model_out:
        save_model(result.model, args.model_out)
    if args.log_out:
        write_log(result.log, args.log_out)
    if args.plot_out and result.log:
        from .report import plot_convergence
        plot_convergence(result.log, args.plot_out, title=os.path.basename(args.data))
    return EXIT_NUMERICAL if result.status is S.Status.NUMERICAL_FAILURE else EXIT_OK


def align_features(X, d_model: int, clip: bool):
    """Pad or (with ``clip``) truncate the feature rows to the model's ``d``."""
    d = X.shape[0]
    if d > d_model:
        extra = X[d_model:, :]
        if extra.nnz and not clip:
            raise InvalidInputError(
                f"test data has features beyond the model dimension {d_model}; "
                "pass --clip-features to drop them")
        return X[:d_model, :].tocsc()
    if d < d_model:
        return sp.vstack([X, sp.csc_matrix((d_model - d, X.shape[1]))]).tocsc()
    return X


def cmd_predict(args) -> int:
    m = load_model(args.model)
    X, raw = load_libsvm(args.data)
    X = align_features(X, m.w.size, args.clip_features)
    scores = m.decision_function(X)
    signs = np.where(scores > 0, 1, -1)
    inverse = {v: k for k, v in (m.label_map or {-1.0: -1, 1.0: 1}).items()}
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", encoding="utf-8")
    try:
        for s in signs:
            lab = inverse[int(s)]
            out.write(f"{int(lab) if lab == int(lab) else lab}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if m.label_map and np.all(np.isin(raw, list(m.label_map))):
        y = np.array([m.label_map[float(v)] for v in raw], dtype=float)
        err = classification_error(m.w, m.beta, X, y)
        print(f"test error {err:.2f}% on {y.size} samples", file=sys.stderr)
    return EXIT_OK


def _dataset_name(path) -> str:
    base = os.path.basename(os.fspath(path))
    for group in ((".gz", ".bz2", ".xz"), (".txt", ".libsvm", ".svm")):
        for suffix in group:
            if base.endswith(suffix):
                base = base[: -len(suffix)]
                break
    return base


def run_bench(paths, qs, variants, options: S.SolverOptions, C=None, weighted=True,
              fig_dir=None) -> List[dict]:
    """Solve every dataset for each ``q`` and variant.

    Returns one record per run; records of failed runs carry the error
    message in ``TrainErr`` and empty numeric fields.
    """
    records = []
    for path in paths:
        name = _dataset_name(path)
        try:
            t0 = time.perf_counter()
            X, raw = load_libsvm(path)
            y, _ = binarize_labels(raw)
            read_time = time.perf_counter() - t0
        except (DWDError, OSError) as exc:
            log.error("%s: %s", path, exc)
            for q in qs:
                for var in variants:
                    records.append(dict(Data=name, variant=var, q=q, n="", d="", C="",
                                        Iter="", Time="", psqmr="", double="",
                                        TrainErr=f"FAILED: {exc}", status="DataError"))
            continue
        for q in qs:
            try:
                p = build_problem(X, y, q, C, weighted)
            except DWDError as exc:
                for var in variants:
                    records.append(dict(Data=name, variant=var, q=q, n=X.shape[1],
                                        d=X.shape[0], C="", Iter="", Time="", psqmr="",
                                        double="", TrainErr=f"FAILED: {exc}",
                                        status="DataError"))
                continue
            for var in variants:
                opts = S.SolverOptions(**{**vars(options), "variant": var})
                rec = dict(Data=name, variant=var, q=q, n=p.n, d=p.d, C=p.C)
                try:
                    res = S.solve(p, opts)
                except DWDError as exc:
                    rec.update(Iter="", Time="", psqmr="", double="",
                               TrainErr=f"FAILED: {exc}", status="Error")
                    records.append(rec)
                    continue
                err = classification_error(res.model.w, res.model.beta, p.X, p.y)
                rec.update(Iter=res.iterations, Time=read_time + res.solve_time,
                           psqmr=res.psqmr_iters, double=res.doubles, TrainErr=err,
                           status=res.status.value)
                if res.status is not S.Status.CONVERGED:
                    rec["TrainErr"] = f"{err:.2f} ({res.status.value})"
                records.append(rec)
                if fig_dir is not None and res.log:
                    from .report import plot_convergence
                    plot_convergence(res.log, os.path.join(fig_dir, f"{name}_{var}_q{q:g}.png"),
                                     title=f"{name} {var} q={q:g}")
    return records


def _cell(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def write_bench_csv(records, stream) -> None:
    wr = csv.writer(stream)
    wr.writerow(BENCH_COLUMNS)
    for r in records:
        row = dict(r, Data=f"{r['Data']}:{r['variant']}:q={r['q']:g}")
        if isinstance(row["TrainErr"], float):
            row["TrainErr"] = f"{row['TrainErr']:.2f}"
        if isinstance(row["Time"], float):
            row["Time"] = f"{row['Time']:.3f}"
        wr.writerow([_cell(row[c]) for c in BENCH_COLUMNS])


def cmd_bench(args) -> int:
    base = S.SolverOptions(max_iter=args.max_iter, tol=args.tol, mu=args.mu,
                           strategy=args.force_strategy, seed=args.seed)
    fig_dir = None
    if not args.no_figures:
        fig_dir = args.fig_dir or (os.path.dirname(os.path.abspath(args.out))
                                   if args.out not in (None, "-") else os.getcwd())
        os.makedirs(fig_dir, exist_ok=True)
    records = run_bench(args.datasets, args.q, args.variants, base, C=args.C,
                        weighted=args.weighted, fig_dir=fig_dir)
    if args.out in (None, "-"):
        write_bench_csv(records, sys.stdout)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_bench_csv(records, fh)
    if fig_dir is not None:
        from .report import plot_bench
        plot_bench(records, os.path.join(fig_dir, "bench.png"))
    return EXIT_OK


def _add_solver_flags(p):
    p.add_argument("--max-iter", type=_positive(int), default=2000)
    p.add_argument("--tol", type=_positive(float), default=1e-5)
    p.add_argument("--mu", type=_positive(float), default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force-strategy", choices=("auto", "direct", "smw", "iterative"),
                   default="auto")
    p.add_argument("--weighted", type=_bool, default=True, metavar="BOOL")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gdwd", description="Generalized DWD classifier")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model on a LIBSVM file")
    t.add_argument("--data", required=True)
    t.add_argument("--q", type=_positive(float), default=1.0)
    t.add_argument("--C", type=_positive(float), default=None,
                   help="penalty parameter (default: data-driven heuristic)")
    t.add_argument("--variant", choices=("sgs", "direct"), default="sgs")
    t.add_argument("--d", type=_positive(int), default=None, help="feature dimension")
    t.add_argument("--model-out")
    t.add_argument("--log-out", help="per-iteration CSV log")
    t.add_argument("--plot-out", help="convergence figure (PNG/PDF)")
    _add_solver_flags(t)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict labels with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", default="-")
    pr.add_argument("--clip-features", action="store_true")
    pr.set_defaults(func=cmd_predict)

    b = sub.add_parser("bench", help="benchmark table over datasets, variants and q")
    b.add_argument("datasets", nargs="+")
    b.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    b.add_argument("--fig-dir", help="figure directory (default: next to the CSV)")
    b.add_argument("--no-figures", action="store_true")
    b.add_argument("--q", type=_positive(float), nargs="+", default=[1.0, 2.0])
    b.add_argument("--variants", nargs="+", choices=("sgs", "direct"),
                   default=["sgs", "direct"])
    b.add_argument("--C", type=_positive(float), default=None)
    _add_solver_flags(b)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"gdwd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DWDError, OSError) as exc:
        print(f"gdwd: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
