"""Command-line front end: ``mspca {predict,simulate,run,bench}``.

Exit codes: 0 success, 1 usage error (bad flags or values), 2 data error
(unreadable or malformed files, infeasible mixtures).  Set
``MSPCA_NUM_THREADS`` to cap the BLAS thread pool.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import bench
from .core import MsPcaConfig, run_ms_pca
from .io import load_matrix, save_dataset
from .rmt import RmtDomainError, predict_spikes
from .simulate import InfeasibleWeightsError, contaminate_mean_cov_shift, default_shift_magnitude, make_dataset
from .spectral import DataError

DEFAULT_SEED = 12345
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
THREADS_ENV = "MSPCA_NUM_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if any(not math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("values must be finite")
    return vals


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _fraction(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text!r}")
    return v


def _count(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_text(rows, header):
    from io import StringIO

    buf = StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v):
    return repr(float(v))


# predict

def cmd_predict(args):
    c = args.c
    if not (math.isfinite(c) and c > 0):
        raise UsageError(f"--c must be positive, got {c}")
    pred = predict_spikes(args.ell, args.theta_sq, c)
    if args.format == "json":
        doc = {"c": c, "lambda_P": pred.lambda_P, "lambda_A": pred.lambda_A, "merged": pred.merged,
               "bulk_edge": pred.bulk_edge, "sub_threshold": [list(x) for x in pred.sub_threshold]}
        _emit(json.dumps(doc, indent=1) + "\n", args.out)
    else:
        rows = [("lambda_P", _num(v)) for v in pred.lambda_P]
        rows += [("lambda_A", _num(v)) for v in pred.lambda_A]
        rows += [("merged", _num(v)) for v in pred.merged]
        rows += [("bulk_edge", _num(pred.bulk_edge))]
        rows += [(f"sub_threshold_{kind}", _num(v)) for kind, v in pred.sub_threshold]
        _emit(_csv_text(rows, ("kind", "value")), args.out)
    return EXIT_OK


# simulate

def cmd_simulate(args):
    d = args.d
    n = args.n if args.n is not None else d
    c = d / n
    ells = args.ell if args.ell is not None else [2.0 * math.sqrt(c)]
    pis = args.pi1
    if any(not 0 < p < 1 for p in pis):
        raise UsageError(f"--pi1 values must lie in (0, 1), got {pis}")
    if args.m_norm is not None:
        mags = args.m_norm
        if len(mags) != len(pis):
            raise UsageError("--m-norm needs one value per --pi1 entry")
    else:
        mags = [default_shift_magnitude(c, p) for p in pis]
    spec = {"d": d, "n": n, "ells": ells, "pi1": pis, "m_norm": mags, "entries": args.entries,
            "direction_mode": args.direction_mode}
    if args.ell2 is not None:
        if len(pis) != 1:
            raise UsageError("--ell2 supports a single mixture component")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed)))
        ds = contaminate_mean_cov_shift(d, n, ells, mags[0], pis[0], args.ell2, rng, args.entries,
                                        args.direction_mode)
        ds.seed = args.seed
        spec["ell2"] = args.ell2
    else:
        ds = make_dataset(d, n, ells, mags, pis, seed=args.seed, direction_mode=args.direction_mode,
                          entries=args.entries)
    data_path, meta_path = save_dataset(ds, args.out, spec)
    print(f"wrote {data_path} and {meta_path}")
    for i, th in enumerate(ds.thetas):
        print(f"theta_{i + 1} = {th:.6g}  theta_{i + 1}^2 = {th * th:.6g}  pi_{i + 1} = {ds.weights[i]:.6g}")
    return EXIT_OK


# run

def _result_doc(res):
    doc = {
        "epsilon": res.epsilon,
        "spike_count": res.spike_count,
        "neutral": res.neutral,
        "eigenvalues": [float(v) for v in res.eigenvalues[: max(res.spike_count + len(res.fill), 1)]],
        "match_report": [
            {"index": m.index, "eigenvalue": m.eigenvalue, "matched": m.matched, "distance": m.distance,
             "stable": m.stable}
            for m in res.match_report
        ],
        "stable": [{"eigenvalue": lam, "vector": u.tolist()} for lam, u in res.stable],
        "removed": [{"eigenvalue": lam, "distance": dist, "vector": u.tolist()} for lam, u, dist in res.removed],
        "fill": [{"eigenvalue": lam, "vector": u.tolist()} for lam, u in res.fill],
        "knockoff_theta_prime_sq": [k.theta_prime_sq for k in res.knockoffs],
        "no_initial_spike": any(k.no_initial_spike for k in res.knockoffs),
    }
    return doc


def _result_rows(doc):
    rows = [("summary", "", key, doc[key]) for key in ("epsilon", "spike_count", "neutral")]
    for m in doc["match_report"]:
        rows += [("match", m["index"], k, m[k]) for k in ("eigenvalue", "matched", "distance", "stable")]
    for role in ("stable", "removed", "fill"):
        for i, comp in enumerate(doc[role]):
            rows.append((role, i, "eigenvalue", comp["eigenvalue"]))
            if role == "removed":
                rows.append((role, i, "distance", comp["distance"]))
            rows += [(role, i, f"u{j}", v) for j, v in enumerate(comp["vector"])]
    return [(a, b, c, _num(v) if isinstance(v, float) else v) for a, b, c, v in rows]


def cmd_run(args):
    X = load_matrix(args.input)
    if X.ndim != 2 or min(X.shape) < 2:
        raise DataError(f"{args.input}: need a d x n matrix with d, n >= 2, got {X.shape}")
    if args.transpose:
        X = X.T
    try:
        cfg = MsPcaConfig(top_k_out=args.top_k, C=args.C, pi_prime=args.pi_prime,
                          theta_prime_sq=args.theta_prime_sq, theta_rule=args.theta_rule,
                          spike_margin=args.spike_margin, num_knockoffs=args.num_knockoffs,
                          seed=args.seed, solver=args.solver)
    except ValueError as exc:
        raise UsageError(str(exc))
    res = run_ms_pca(X, cfg)
    doc = _result_doc(res)
    if args.format == "json":
        _emit(json.dumps(doc) + "\n", args.out)
    else:
        _emit(_csv_text(_result_rows(doc), ("section", "index", "key", "value")), args.out)
    if args.out not in (None, "-"):
        kept = ", ".join(f"{lam:.4f}" for lam, _ in res.stable) or "none"
        print(f"{res.spike_count} outlying eigenvalue(s); stable: {kept}; removed: {len(res.removed)}; "
              f"epsilon = {res.epsilon:.4g}")
    return EXIT_OK


# bench

def cmd_bench(args):
    over = dict(d=args.d, c=args.c, pi1=args.pi1, ell=args.ell, theta_sq=args.theta_sq, ell2=args.ell2,
                methods=args.methods, trials=args.trials, base_seed=args.base_seed, C=args.C,
                workers=args.workers)
    over = {k: (tuple(v) if isinstance(v, list) else v) for k, v in over.items()}
    try:
        cfg = bench.default_config(args.scenario, **over)
    except ValueError as exc:
        raise UsageError(str(exc))
    progress = None
    if not args.quiet:
        def progress(done, total):
            print(f"\r[{done}/{total}] trials", end="" if done < total else "\n", file=sys.stderr)
    records = bench.run_experiment(cfg, progress)
    from io import StringIO

    buf = StringIO()
    (bench.write_json if args.format == "json" else bench.write_csv)(records, buf)
    _emit(buf.getvalue(), args.out)
    aggs = bench.aggregate(records)
    summary_stream = sys.stderr if args.out in (None, "-") else sys.stdout
    print(bench.format_summary(aggs), file=summary_stream)
    if args.svg:
        metric = {"residual_decay": "max_residual", "fluctuation": "max_fluctuation",
                  "knockoff_spectrum": "contaminated_top1"}.get(args.scenario)
        if metric is None:
            metric = next(a["metric"] for a in aggs)
        group = "method" if args.scenario in ("alignment_sweep", "mean_cov_shift") else "pi1"
        try:
            bench.write_svg(aggs, args.svg, metric, group=group,
                            log=args.scenario in ("residual_decay", "fluctuation"))
        except ValueError as exc:
            print(f"svg skipped: {exc}", file=sys.stderr)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="mspca", description="Mean-shift PCA: spike prediction, simulation and estimation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pr = sub.add_parser("predict", help="asymptotic outlier locations")
    pr.add_argument("--c", type=float, required=True, help="aspect ratio d/n")
    pr.add_argument("--ell", type=_floats, default=[], help="covariance spike strengths, comma-separated")
    pr.add_argument("--theta-sq", type=_floats, default=[], help="mean-shift strengths theta^2")
    pr.add_argument("--format", choices=("csv", "json"), default="csv")
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=cmd_predict)

    sm = sub.add_parser("simulate", help="write a synthetic dataset")
    sm.add_argument("--d", type=_count, default=900)
    sm.add_argument("--n", type=_count, default=1000)
    sm.add_argument("--ell", type=_floats, default=None, help="covariance spikes (default 2 sqrt(c))")
    sm.add_argument("--pi1", type=_floats, default=[0.05], help="mixture weights, comma-separated")
    sm.add_argument("--m-norm", type=_floats, default=None,
                    help="mean-shift norms (default 2 sqrt(sqrt(c)/pi1))")
    sm.add_argument("--ell2", type=float, default=None, help="extra outlier covariance spike")
    sm.add_argument("--entries", choices=("gaussian", "rademacher"), default="gaussian")
    sm.add_argument("--direction-mode", choices=("haar_sphere", "iid_gaussian", "rademacher"),
                    default="haar_sphere")
    sm.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sm.add_argument("--out", required=True, help="dataset path; metadata goes to <out>.meta")
    sm.set_defaults(func=cmd_simulate)

    rn = sub.add_parser("run", help="run MS-PCA on a data file")
    rn.add_argument("--input", required=True, help="dataset file, .npy, or text matrix (rows = coordinates)")
    rn.add_argument("--transpose", action="store_true", help="input stores observations as rows")
    rn.add_argument("--top-k", type=int, default=1)
    rn.add_argument("--C", type=_positive, default=None)
    rn.add_argument("--pi-prime", type=float, default=1.0)
    rn.add_argument("--theta-prime-sq", type=_positive, default=None)
    rn.add_argument("--theta-rule", choices=("mp", "esd"), default="mp")
    rn.add_argument("--spike-margin", type=float, default=None)
    rn.add_argument("--num-knockoffs", type=_count, default=1)
    rn.add_argument("--solver", choices=("auto", "dense", "partial"), default="auto")
    rn.add_argument("--seed", type=int, default=DEFAULT_SEED)
    rn.add_argument("--format", choices=("csv", "json"), default="json")
    rn.add_argument("--out", default=None)
    rn.set_defaults(func=cmd_run)

    bn = sub.add_parser("bench", help="run a Monte-Carlo scenario")
    bn.add_argument("--scenario", choices=bench.SCENARIOS, required=True)
    bn.add_argument("--d", type=_ints, default=None)
    bn.add_argument("--c", type=_floats, default=None)
    bn.add_argument("--pi1", type=_floats, default=None)
    bn.add_argument("--ell", type=_floats, default=None)
    bn.add_argument("--theta-sq", type=_floats, default=None)
    bn.add_argument("--ell2", type=_floats, default=None)
    bn.add_argument("--methods", type=lambda s: [x for x in s.split(",") if x], default=None)
    bn.add_argument("--trials", type=_count, default=None)
    bn.add_argument("--base-seed", type=int, default=DEFAULT_SEED)
    bn.add_argument("--C", type=_positive, default=None)
    bn.add_argument("--workers", type=_count, default=1)
    bn.add_argument("--format", choices=("csv", "json"), default="csv")
    bn.add_argument("--out", default=None)
    bn.add_argument("--svg", default=None, help="also write a summary plot")
    bn.add_argument("--quiet", action="store_true")
    bn.set_defaults(func=cmd_bench)
    return p


def _thread_limit():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        limit = _thread_limit()
        if limit is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=limit):
                return args.func(args)
        return args.func(args)
    except (UsageError, RmtDomainError) as exc:
        print(f"mspca {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InfeasibleWeightsError, OSError) as exc:
        print(f"mspca {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
