"""Command line interface: ``lngca <command> ...``.

Every command writes ``<prefix>manifest.json`` recording its arguments, seed
and outputs; ``lngca rerun MANIFEST --out-prefix NEW`` repeats the run into a
new location so the outputs can be compared byte for byte.

All randomness comes from ``--seed`` through named child streams. The BLAS
thread count defaults to ``$LNGCA_NUM_THREADS`` (1 when unset); one thread
keeps floating-point reductions in a fixed order.
"""

import argparse
from dataclasses import asdict
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from ._validation import InputError
from .discrepancy import KINDS, DiscrepancyKind
from .estimator import EstimatorOptions, multi_restart
from .fileio import (
    read_csv_matrix,
    read_image,
    read_json,
    write_csv_matrix,
    write_csv_records,
    write_json,
    write_pgm,
)
from .linalg import center_whiten, signed_perm_error
from .qtest import TestConfig, select_q
from .simulation import (
    ExperimentConfig,
    UnmixConfig,
    image_unmix,
    median_by_source,
    run_experiment1,
    run_experiment2,
    run_experiment3,
    summarize_records,
)
from .sources import LIBRARY_VERSION, SOURCE_IDS

logger = logging.getLogger("lngca")

THREADS_ENV = "LNGCA_NUM_THREADS"

# named child streams drawn from --seed
STREAM_ESTIMATE, STREAM_TEST, STREAM_IMAGES = 11, 12, 13


def _rng(seed, stream):
    return np.random.default_rng([seed, stream])


def _child_seed(seed, stream):
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def _out(prefix, name):
    path = prefix + name
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _kind(args):
    return DiscrepancyKind(args.kind, gpois_df=args.gpois_df, gpois_grid=args.gpois_grid)


def _load(args):
    header = {"auto": None, "yes": True, "no": False}[args.header]
    Y, _ = read_csv_matrix(args.input, header=header)
    return Y


# -- commands -----------------------------------------------------------------


def cmd_whiten(args):
    Y = _load(args)
    wr = center_whiten(Y)
    z_path = _out(args.out_prefix, "Z.csv")
    h_path = _out(args.out_prefix, "H.json")
    write_csv_matrix(z_path, wr.Z)
    write_json(h_path, {"H": wr.H, "Hinv": wr.Hinv, "mean": wr.mean})
    return {"n": Y.shape[0], "p": Y.shape[1]}, [z_path, h_path]


def cmd_estimate(args):
    Y = _load(args)
    p = Y.shape[1]
    if not 0 <= args.q <= p or (args.estimator == "max" and args.q == 0):
        raise InputError("--q must lie in [%d, %d], got %d" % (args.estimator == "max", p, args.q))
    wr = center_whiten(Y)
    opts = EstimatorOptions(
        kind=_kind(args), max_iter=args.max_iter, tol=args.tol, restarts=args.restarts
    )
    est = multi_restart(wr.Z, args.q, opts, args.estimator, _rng(args.seed, STREAM_ESTIMATE))
    w_path = _out(args.out_prefix, "W.csv")
    c_path = _out(args.out_prefix, "components.csv")
    d_path = _out(args.out_prefix, "disc.json")
    write_csv_matrix(w_path, est.W)
    write_csv_matrix(c_path, est.components)
    report = {
        "q": est.q,
        "estimator": est.method,
        "kind": opts.kind.tag,
        "disc": est.disc,
        "objective": est.objective,
        "iterations": est.iterations,
        "converged": est.converged,
        "restart_index": est.restart_index,
        "restart_objectives": est.restart_objectives,
        # rows acting on centered observations: components = (Y - mean) @ W_observed.T
        "W_observed": est.W @ wr.H,
    }
    if args.truth and est.q > 0:
        A, _ = read_csv_matrix(args.truth, header=None)
        if A.shape != (p, p):
            raise InputError("%s: mixing matrix must be %dx%d, got %r" % (args.truth, p, p, A.shape))
        W0 = np.linalg.solve(A, wr.Hinv)
        err, Q = signed_perm_error(W0[: est.q], est.W_signal)
        report["truth_error"] = err
        report["alignment"] = {"perm": Q.perm, "signs": Q.signs}
    write_json(d_path, report)
    return {"n": Y.shape[0], "p": p, "options": asdict(opts)}, [w_path, c_path, d_path]


def cmd_test_q(args):
    Y = _load(args)
    wr = center_whiten(Y)
    opts = EstimatorOptions(kind=_kind(args), max_iter=args.max_iter, tol=args.tol, restarts=args.restarts)
    cfg = TestConfig(
        kind=opts.kind,
        B=args.B,
        alpha=args.alpha,
        estimator_opts=opts,
        mode=args.mode,
        seed=_child_seed(args.seed, STREAM_TEST),
    )
    sel = select_q(wr.Z, cfg, search=args.search)
    s_path = _out(args.out_prefix, "selection.json")
    out = sel.to_dict()
    out["kind"] = opts.kind.tag
    out["B"] = cfg.B
    out["alpha"] = cfg.alpha
    write_json(s_path, out)
    return {"n": Y.shape[0], "p": Y.shape[1]}, [s_path]


def cmd_simulate(args):
    exp = args.experiment
    kinds = tuple(args.kinds.split(","))
    dists = tuple(args.distributions) if args.distributions else SOURCE_IDS
    if exp == 1:
        q, p, n, m = args.q or 2, args.p or 4, args.n or 1000, args.m or 4
    elif exp == 2:
        q = args.q or 2
        p, n = args.p or 2 * q, args.n or 500 * q
        m = args.m or p
    else:
        q, p, n, m = args.q or 2, args.p or 4, args.n or 2000, args.m or 1
    cfg = ExperimentConfig(
        q=q, p=p, n=n, trials=args.trials, kinds=kinds, m=m, seed=args.seed, distributions=dists
    )
    r_path = _out(args.out_prefix, "results.csv")
    s_path = _out(args.out_prefix, "summary.json")
    if exp in (1, 2):
        records = run_experiment1(cfg) if exp == 1 else run_experiment2(cfg)
        # wall-clock runtimes go to the manifest so every listed output is
        # bit-identical on a rerun
        rows = [r.to_dict() for r in records]
        for row in rows:
            del row["runtime"]
        write_csv_records(r_path, rows)
        timing = _runtime_summary(records)
        summary = {"experiment": exp, "cells": summarize_records(records)}
        if exp == 1:
            summary["by_source"] = [
                {"sources": s, "kind": k, "estimator": e, "median": v}
                for (s, k, e), v in sorted(median_by_source(records).items())
            ]
    else:
        tcfg = TestConfig(B=args.B, alpha=args.alpha, estimator_opts=EstimatorOptions(restarts=m))
        table = run_experiment3(cfg, tcfg)
        rows = []
        for (kind, mode), by_k in table.pvalues.items():
            for k, ps in by_k.items():
                for t, pv in enumerate(ps):
                    rows.append({"trial": t, "kind": kind, "mode": mode, "k": k, "pvalue": pv})
        write_csv_records(r_path, rows)
        summary = {"experiment": 3, **table.to_dict()}
        timing = None
    write_json(s_path, summary)
    return {"config": cfg.to_dict()}, [r_path, s_path], timing


def _runtime_summary(records):
    cells = {}
    for r in records:
        cells.setdefault((r.kind, r.estimator), []).append(r.runtime)
    return [
        {"kind": k, "estimator": e, "median_runtime": float(np.median(v)),
         "total_runtime": float(np.sum(v))}
        for (k, e), v in sorted(cells.items())
    ]


def cmd_unmix_images(args):
    images = [read_image(path) for path in args.images]
    cfg = UnmixConfig(
        kind=args.kind,
        B=args.B,
        alpha=args.alpha,
        mode=args.mode,
        n_noise=0 if args.no_noise else args.n_noise,
        m=args.restarts,
        identity_mixing=args.identity_mixing,
        select=not args.no_select,
    )
    res = image_unmix(images, _rng(args.seed, STREAM_IMAGES), cfg)
    outputs = []
    for j, img in enumerate(res.recovered):
        path = _out(args.out_prefix, "component%d.pgm" % (j + 1))
        write_pgm(path, img)
        outputs.append(path)
    report = {
        "images": list(args.images),
        "kind": cfg.kind,
        "q_selected": res.selection.q_selected if res.selection else None,
        "selection": res.selection.to_dict() if res.selection else None,
        "alignment": {"perm": res.alignment.perm, "signs": res.alignment.signs},
        "disc": res.disc,
        "error_norms": res.error_norms,
        "image_norms": res.image_norms,
        "relative_errors": res.relative_errors,
        "exact_recovery": res.exact(),
        "mixing": res.A,
    }
    r_path = _out(args.out_prefix, "report.json")
    write_json(r_path, report)
    return {"config": asdict(cfg)}, outputs + [r_path]


def cmd_rerun(args):
    manifest = read_json(args.manifest)
    argv = list(manifest["argv"])
    try:
        i = argv.index("--out-prefix")
    except ValueError:
        raise InputError("%s: manifest argv has no --out-prefix" % args.manifest) from None
    argv[i + 1] = args.out_prefix
    return main(argv)


# -- parser -------------------------------------------------------------------


def _common(sp, data=True):
    if data:
        sp.add_argument("--header", choices=("auto", "yes", "no"), default="auto",
                        help="whether the CSV has a header line (default: detect)")
    sp.add_argument("--out-prefix", required=True,
                    help="prefix prepended to every output file name, e.g. 'out/run1_'")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-v", "--verbose", action="store_true")


def _estimation(sp, kind="GPois", restarts=None):
    sp.add_argument("--kind", choices=KINDS, default=kind)
    sp.add_argument("--restarts", type=int, default=restarts,
                    help="random starting points (default: p)" if restarts is None else None)
    sp.add_argument("--max-iter", type=int, default=100)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--gpois-df", type=float, default=6.0)
    sp.add_argument("--gpois-grid", type=int, default=500)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lngca", description="Linear non-Gaussian component analysis."
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("whiten", help="center and whiten a data matrix")
    sp.add_argument("input")
    _common(sp)
    sp.set_defaults(func=cmd_whiten)

    sp = sub.add_parser("estimate", help="estimate the unmixing matrix")
    sp.add_argument("input")
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--estimator", choices=("max", "maxmin"), default="maxmin")
    sp.add_argument("--truth", help="CSV of the true p x p mixing matrix, for scoring")
    _estimation(sp)
    _common(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("test-q", help="select the number of non-Gaussian components")
    sp.add_argument("input")
    sp.add_argument("--B", type=int, default=200)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--mode", choices=("current", "cumulative"), default="current")
    sp.add_argument("--search", choices=("sweep", "binary"), default="sweep")
    _estimation(sp, restarts=1)
    _common(sp)
    sp.set_defaults(func=cmd_test_q)

    sp = sub.add_parser("simulate", help="run a simulation experiment")
    sp.add_argument("--experiment", type=int, choices=(1, 2, 3), required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--q", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int, help="restarts per fit")
    sp.add_argument("--kinds", default="JB,GPois", help="comma-separated discrepancy kinds")
    sp.add_argument("--distributions", help="source ids to use, e.g. 'abc' (default: all)")
    sp.add_argument("--B", type=int, default=200)
    sp.add_argument("--alpha", type=float, default=0.05)
    _common(sp, data=False)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("unmix-images", help="unmix images mixed with Gaussian noise images")
    sp.add_argument("images", nargs="+", help="grayscale PGM (P5) or CSV images of equal size")
    sp.add_argument("--kind", choices=KINDS, default="GPois")
    sp.add_argument("--B", type=int, default=100)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--mode", choices=("current", "cumulative"), default="current")
    sp.add_argument("--restarts", type=int, default=3)
    sp.add_argument("--n-noise", type=int, default=3)
    sp.add_argument("--no-noise", action="store_true", help="do not add noise images")
    sp.add_argument("--identity-mixing", action="store_true")
    sp.add_argument("--no-select", action="store_true", help="skip the test for q")
    _common(sp, data=False)
    sp.set_defaults(func=cmd_unmix_images)

    sp = sub.add_parser("rerun", help="repeat a run recorded in a manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out-prefix", required=True)
    sp.set_defaults(func=cmd_rerun)
    return parser


def _threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError("%s must be an integer, got %r" % (THREADS_ENV, raw)) from None
    if n < 1:
        raise InputError("%s must be >= 1, got %d" % (THREADS_ENV, n))
    return n


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "rerun":
        try:
            return cmd_rerun(args)
        except InputError as exc:
            print("lngca: error: %s" % exc, file=sys.stderr)
            return 2
    from threadpoolctl import threadpool_limits

    t0 = time.perf_counter()
    try:
        threads = _threads()
        with threadpool_limits(limits=threads):
            result = args.func(args)
    except InputError as exc:
        print("lngca: error: %s" % exc, file=sys.stderr)
        return 2
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print("lngca: %s failed: %s" % (args.command, exc), file=sys.stderr)
        return 1
    config, outputs = result[:2]
    manifest = {
        "command": args.command,
        "argv": argv,
        "config": config,
        "seed": args.seed,
        "library_version": __version__,
        "source_library_version": LIBRARY_VERSION,
        "threads": threads,
        "wall_time": time.perf_counter() - t0,
        "outputs": outputs,
    }
    if len(result) > 2 and result[2] is not None:
        manifest["timing"] = result[2]
    write_json(_out(args.out_prefix, "manifest.json"), manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
