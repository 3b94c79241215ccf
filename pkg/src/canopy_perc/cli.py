"""Command-line front end.

Every subcommand writes CSV (default) or JSON to --output, or to stdout.
Environment overrides: CANOPY_OUTPUT (output path) and CANOPY_WORKERS
(worker count); explicit flags win.  Output never depends on the worker
count.  Errors print one JSON line to stderr, e.g.
{"error": "usage", "message": "..."}; usage errors exit 2 and estimator
refusals exit 3.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from functools import partial

import numpy as np

from . import __version__
from . import experiments as ex
from .dynamics import KEEP_ALL, ROOT_COMPONENT, run_mafia, sample_async_graph, sample_mafia_limit, sample_yule_tree
from .edge_model import GeneratingMeasure, explore_infinite_cluster, sample_finite_edge_model
from .group_tree import canopy_tree
from .multigraph import RootedMultiGraph
from .particle_model import sample_particle_graph
from .streams import default_workers, map_replicates, replicate_rng, replicate_seed
from .walk_constants import DEFAULT_TOL, WalkConstants

EXIT_USAGE = 2
EXIT_REFUSED = 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    if isinstance(x, bool) or isinstance(x, np.bool_):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "inf" if math.isinf(x) else f"{float(x):.12g}"
    return str(x)


class Table:
    """Rows plus header, rendered as CSV or as a JSON document with run metadata."""

    def __init__(self, header: list[str], rows: list[list] | None = None):
        self.header = header
        self.rows = rows or []

    def render(self, fmt: str, meta: dict) -> str:
        if fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.header)
            for r in self.rows:
                w.writerow([_fmt(x) for x in r])
            return buf.getvalue()
        records = [{h: _json_value(x) for h, x in zip(self.header, r)} for r in self.rows]
        return json.dumps({"run": meta, "records": records}, indent=1) + "\n"


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if math.isnan(x) else (str(x) if math.isinf(x) else float(x))
    return x


# -- argument helpers ---------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, samples: int | None = 100) -> None:
    p.add_argument("--b", type=int, default=2, help="branching factor")
    p.add_argument("--seed", type=int, default=0, help="master seed (64-bit)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default CANOPY_WORKERS or 1)")
    p.add_argument("--output", default=None, help="output path (default CANOPY_OUTPUT or stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--wall-time", action="store_true", help="record wall time in JSON metadata")
    if samples is not None:
        p.add_argument("--samples", "-N", type=int, default=samples, help="replicates")


def _sizes(p, n=False, t=False, k=False) -> None:
    if n:
        p.add_argument("--n", type=int, default=None, help="tree height")
    if t:
        p.add_argument("--t", type=float, default=None, help="Yule time")
    if k:
        p.add_argument("--k", type=int, default=None, help="group volume exponent")


def _model_size(args) -> tuple[str, object]:
    model = args.model
    given = {name: getattr(args, name, None) for name in ("n", "t")}
    given = {k: v for k, v in given.items() if v is not None}
    if len(given) != 1:
        raise UsageError("give exactly one size parameter (--n or --t)")
    name, value = next(iter(given.items()))
    want = "t" if model == ex.MAFIA else "n"
    if name != want:
        raise UsageError(f"model {model} takes --{want}, not --{name}")
    return model, value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="canopy-perc", description="Percolation on canopy trees: samplers and experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("constants", help="table of zeta_h, Xi_k and sigma values")
    _common(s, samples=None)
    s.add_argument("--max-k", type=int, default=10)
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)

    s = sub.add_parser("sample", help="dump one sampled graph")
    _common(s, samples=None)
    s.add_argument("--model", choices=(ex.EDGE, ex.PARTICLE, ex.MAFIA, ex.EDGE_INF), default=ex.EDGE)
    _sizes(s, n=True, t=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--cap", type=int, default=10**6)

    s = sub.add_parser("chi", help="mean cluster size of the identity in the infinite model")
    _common(s, samples=1000)
    s.add_argument("--lambda", dest="lam", required=True, help="value, list a,b,c or grid min:max:step")
    s.add_argument("--cap", type=int, default=10**6)
    s.add_argument("--records", action="store_true", help="emit per-replicate records")

    s = sub.add_parser("sweep", help="P(connected) and P(no isolated vertex) on a lambda grid")
    _common(s, samples=100)
    s.add_argument("--model", choices=ex.MODELS, default=ex.EDGE)
    _sizes(s, n=True, t=True)
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--records", action="store_true", help="emit per-replicate records instead of the summary")

    s = sub.add_parser("threshold", help="bisected lambda for P(event) = target")
    _common(s, samples=200)
    s.add_argument("--model", choices=ex.MODELS, default=ex.EDGE)
    _sizes(s, n=True, t=True)
    s.add_argument("--target", type=float, default=0.5)
    s.add_argument("--lo", type=float, default=None)
    s.add_argument("--hi", type=float, default=None)

    s = sub.add_parser("invariance", help="chi-square test of star(C_n) against C_(n+1)")
    _common(s, samples=100_000)
    _sizes(s, n=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--lambda-other", dest="lam_other", type=float, default=None)

    s = sub.add_parser("mafia", help="run the mafia process from one vertex")
    _common(s, samples=None)
    _sizes(s, t=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--mode", choices=(KEEP_ALL, ROOT_COMPONENT), default=ROOT_COMPONENT)
    s.add_argument("--boost", action="store_true")
    s.add_argument("--trace", action="store_true", help="emit the event trace (time, vertex, event)")

    s = sub.add_parser("yule", help="leaf counts of Yule trees")
    _common(s, samples=100)
    _sizes(s, t=True)

    s = sub.add_parser("mlimit", help="samples of the limit object M(lambda)")
    _common(s, samples=100)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--epsilon", type=float, default=1e-6)
    s.add_argument("--cap", type=int, default=10**6)

    s = sub.add_parser("percolation", help="largest-cluster fraction on V_k")
    _common(s, samples=10)
    s.add_argument("--measure", choices=("canonical", "power"), default="canonical")
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--k", required=True, help="value, list or grid min:max:step")

    s = sub.add_parser("degree", help="root degree against the series")
    _common(s, samples=10_000)
    s.add_argument("--lambda", dest="lam", required=True)

    s = sub.add_parser("certificate", help="linkage certificate against connectivity")
    _common(s, samples=100)
    s.add_argument("--model", choices=ex.MODELS, default=ex.EDGE)
    _sizes(s, n=True, t=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--k", type=int, default=None, help="cousin depth (default ceil(log_b size))")
    return p


# -- subcommands --------------------------------------------------------------------------

def _grid(text: str) -> list[float]:
    try:
        return ex.parse_grid(text)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_constants(args, workers) -> Table:
    if args.max_k < 1:
        raise UsageError("--max-k must be >= 1")
    return Table(["name", "k_or_h", "b", "value", "lo", "hi"], [list(r) for r in WalkConstants(args.b, args.tol).table(args.max_k)])


def _sample_graph(model: str, size, lam: float, b: int, rng, cap: int):
    if model == ex.EDGE:
        return sample_finite_edge_model(int(size), lam, b, rng), int(size)
    if model == ex.PARTICLE:
        return sample_particle_graph(int(size), lam, b, rng), int(size)
    if model == ex.MAFIA:
        g, _ = sample_async_graph(float(size), lam, b, rng)
        return g, None
    c = explore_infinite_cluster(lam, b, rng, cap)
    return c.graph, None


def cmd_sample(args, workers) -> str:
    if args.model == ex.EDGE_INF:
        if args.n is not None or args.t is not None:
            raise UsageError("model edge-inf takes no size parameter")
        size = None
    else:
        _, size = _model_size(args)
    rng = replicate_rng(args.seed, 0)
    g, n = _sample_graph(args.model, size, args.lam, args.b, rng, args.cap)
    return g.dump(args.b, n)


def cmd_chi(args, workers) -> Table:
    lams = _grid(args.lam)
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    estimates = [ex.estimate_chi(lam, args.b, args.samples, args.seed, args.cap, workers) for lam in lams]
    if args.records:
        return _records_table([r for e in estimates for r in e.records])
    rows = [[e.lam, args.b, e.mean, e.se, e.ci[0], e.ci[1], e.n_used, e.n_truncated, e.heavy_tail,
             e.top_share, e.quantiles["0.5"], e.quantiles["0.9"], e.quantiles["0.99"]] for e in estimates]
    return Table(["lambda", "b", "mean", "se", "ci_lo", "ci_hi", "n_used", "n_truncated", "heavy_tail",
                  "top1pct_share", "q50", "q90", "q99"], rows)


def _records_table(records) -> Table:
    return Table(list(ex.CSV_FIELDS), [r.row() for r in records])


def cmd_sweep(args, workers) -> Table:
    model, size = _model_size(args)
    grid = _grid(args.lam)
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    records = ex.sweep_records(model, size, grid, args.b, args.samples, args.seed, workers)
    if args.records:
        return _records_table(records)
    rows = [[model, args.b, size, pt.lam, pt.p_connected, pt.se_connected, pt.p_no_isolated, pt.se_no_isolated, pt.n]
            for pt in ex.summarize_sweep(records)]
    return Table(["model", "b", "size", "lambda", "p_connected", "se_connected", "p_no_isolated",
                  "se_no_isolated", "replicates"], rows)


def cmd_threshold(args, workers) -> Table:
    model, size = _model_size(args)
    try:
        est = ex.crossing_estimates(model, size, args.b, args.target, args.samples, args.seed, args.lo, args.hi, workers)
    except ValueError as e:
        raise UsageError(str(e)) from None
    rows = [[model, args.b, size, e.event, e.lambda_star, e.ci[0], e.ci[1], e.se, e.target, e.replicates]
            for e in est.values()]
    return Table(["model", "b", "size", "event", "lambda_star", "ci_lo", "ci_hi", "se", "target", "replicates"], rows)


def cmd_invariance(args, workers) -> Table:
    if args.n is None:
        raise UsageError("--n is required")
    r = ex.invariance_test(args.n, args.lam, args.b, args.samples, args.seed, args.lam_other)
    lam_other = args.lam if args.lam_other is None else args.lam_other
    return Table(["n", "b", "lambda", "lambda_other", "samples", "statistic", "dof", "bins", "p_value"],
                 [[args.n, args.b, args.lam, lam_other, args.samples, r.statistic, r.dof, r.n_bins, r.p_value]])


def cmd_mafia(args, workers):
    if args.t is None:
        raise UsageError("--t is required")
    trace: list = []
    g = run_mafia(RootedMultiGraph.single_vertex(), args.lam, args.t, args.b, replicate_rng(args.seed, 0),
                  args.mode, args.boost, trace if args.trace else None)
    if args.trace:
        return Table(["time", "vertex", "event"], [list(e) for e in trace])
    conn, iso = g.is_connected(), g.n_isolated()
    return Table(["t", "b", "lambda", "mode", "vertices", "edges", "connected", "isolated"],
                 [[args.t, args.b, args.lam, args.mode, g.n_vertices, g.edge_total, conn, iso]])


def _yule_replicate(index, seed, t, b):
    tree = sample_yule_tree(t, b, np.random.default_rng(seed))
    return tree.n_leaves, tree.n_internal, int(tree.depth.max())


def cmd_yule(args, workers) -> Table:
    if args.t is None:
        raise UsageError("--t is required")
    res = map_replicates(partial(_yule_replicate, t=args.t, b=args.b), args.seed, range(args.samples), workers)
    return Table(["replicate", "seed", "t", "leaves", "internal", "max_depth"],
                 [[i, replicate_seed(args.seed, i), args.t, *r] for i, r in enumerate(res)])


def _mlimit_replicate(index, seed, lam, epsilon, cap):
    s = sample_mafia_limit(lam, np.random.default_rng(seed), epsilon, cap)
    g = s.graph
    root_mult = int(g.mult[(g.u == g.root) | (g.v == g.root)].sum())
    return g.n_vertices, g.edge_total, root_mult, s.boundary_touched, s.truncated, s.path_length


def cmd_mlimit(args, workers) -> Table:
    if args.b != 2:
        raise UsageError("the limit object is defined for b = 2 only")
    if not 0 < args.epsilon < 1:
        raise UsageError("--epsilon must lie in (0, 1)")
    fn = partial(_mlimit_replicate, lam=args.lam, epsilon=args.epsilon, cap=args.cap)
    res = map_replicates(fn, args.seed, range(args.samples), workers)
    return Table(["replicate", "seed", "lambda", "size", "edges", "root_degree", "boundary_touched", "truncated",
                  "path_length"], [[i, replicate_seed(args.seed, i), args.lam, *r] for i, r in enumerate(res)])


def cmd_percolation(args, workers) -> Table:
    if args.measure == "power":
        if args.alpha is None:
            raise UsageError("--measure power needs --alpha")
        measure = GeneratingMeasure.power(args.alpha, args.b)
    else:
        measure = GeneratingMeasure.canonical(args.b)
    ks = [int(k) for k in _grid(args.k)]
    pts = ex.percolation_sweep(measure, args.lam, ks, args.samples, args.seed, workers)
    return Table(["measure", "b", "lambda", "k", "largest_fraction", "se", "root_fraction", "replicates"],
                 [[measure.tag(), args.b, args.lam, p.k, p.mean_fraction, p.se, p.mean_root_fraction, p.n] for p in pts])


def cmd_degree(args, workers) -> Table:
    rows = ex.degree_check(_grid(args.lam), args.b, args.samples, args.seed)
    return Table(["lambda", "b", "series", "simple_mean", "simple_se", "multi_mean", "multi_se", "ratio_sqrt"],
                 [[r.lam, args.b, r.series, r.simple_mean, r.simple_se, r.multi_mean, r.multi_se, r.ratio] for r in rows])


def _certificate_replicate(index, seed, model, size, lam, b, k):
    rng = np.random.default_rng(seed)
    if model == ex.MAFIA:
        g, tree = sample_async_graph(float(size), lam, b, rng)
    else:
        g, _ = _sample_graph(model, size, lam, b, rng, 0)
        tree = canopy_tree(int(size), b)
    kk = k if k is not None else max(1, math.ceil(math.log(max(float(size), 2.0), b)))
    cert = ex.linkage_certificate(g, tree, kk, check=False)
    return cert, g.is_connected()


def cmd_certificate(args, workers) -> Table:
    model, size = _model_size(args)
    fn = partial(_certificate_replicate, model=model, size=size, lam=args.lam, b=args.b, k=args.k)
    res = map_replicates(fn, args.seed, range(args.samples), workers)
    return Table(["model", "b", "size", "lambda", "replicate", "seed", "certificate", "connected"],
                 [[model, args.b, size, args.lam, i, replicate_seed(args.seed, i), c, conn]
                  for i, (c, conn) in enumerate(res)])


COMMANDS = {
    "constants": cmd_constants, "sample": cmd_sample, "chi": cmd_chi, "sweep": cmd_sweep,
    "threshold": cmd_threshold, "invariance": cmd_invariance, "mafia": cmd_mafia, "yule": cmd_yule,
    "mlimit": cmd_mlimit, "percolation": cmd_percolation, "degree": cmd_degree, "certificate": cmd_certificate,
}


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        workers = args.workers if args.workers is not None else default_workers()
        if workers < 1:
            raise UsageError("--workers must be >= 1")
        if getattr(args, "samples", 1) < 1:
            raise UsageError("--samples must be >= 1")
        out = COMMANDS[args.command](args, workers)
    except UsageError as e:
        return _error("usage", str(e), EXIT_USAGE)
    except ex.EstimatorRefused as e:
        return _error("refused", str(e), EXIT_REFUSED)
    except ValueError as e:
        return _error("usage", str(e), EXIT_USAGE)

    if isinstance(out, Table):
        meta = {"command": args.command, "master_seed": args.seed, "version": __version__}
        if args.wall_time:
            meta["wall_time"] = round(time.perf_counter() - started, 3)
        text = out.render(args.format, meta)
    else:
        text = out
    path = args.output or os.environ.get("CANOPY_OUTPUT")
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
