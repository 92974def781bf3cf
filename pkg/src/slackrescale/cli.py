"""Command-line interface.

Commands
--------
train             train a multi-label model, write checkpoint/history/metrics
search-bench      run every search over a seeded ensemble and tabulate
adversarial-demo  show the three-label instance that defeats lambda-only search
emit-points       dump (h, g) of every label of one example as CSV

Exit status: 0 on success, 2 on usage errors, 1 on runtime errors.  The
log level is taken from ``SLACKRESCALE_LOG_LEVEL`` (default WARNING).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DISTRIBUTIONS,
    FORMATS,
    ParseError,
    adversarial_instance,
    fixture_path,
    load_multilabel,
    load_parents,
    random_instance,
)
from .metrics import evaluate
from .model import HierarchicalTask, ModelState, MultiLabelTask, instance_for, load_checkpoint, save_checkpoint
from .oracles import EnumerationInstance
from .search import SEARCHES, SearchConfig, exhaustive_search, run_search
from .training import SearchStrategy, cutting_plane_train, sgd_train

log = logging.getLogger("slackrescale")

BENCH_SEARCHES = ("angular", "bisecting", "binary", "sarawagi")
EXACT_RTOL = 1e-9

TRAIN_EPILOG = """\
outputs (in --out):
  model-<objective>.json     checkpoint: {format, version, C, task, w, extra}
  history-<objective>.jsonl  one JSON object per epoch (sgd: epoch, queries,
                             active, objective) or round (cutting-plane: round,
                             added, working_set, objective, dual, success_rate,
                             queries_per_search); wall time only with --timing
  metrics-<objective>.json   acc, label_loss, micro_f1, macro_f1, n
"""

BENCH_EPILOG = """\
CSV columns: search, instances, success_rate, exact_rate, mean_queries
             [, mean_time_ms with --timing]
trace JSONL: one object per oracle query: instance, search, t, lam,
             phi_hat and search-specific fields (alpha, beta, depth, bound)
"""

POINTS_EPILOG = "CSV columns: label, h, g, phi (one row per label)"


class UsageError(Exception):
    pass


def _search_config(args) -> SearchConfig:
    return SearchConfig(max_queries=args.max_queries, stop_ratio=args.stop_ratio)


def _add_search_options(p):
    p.add_argument("--stop-ratio", type=float, default=0.999,
                   help="stop angular search once incumbent/bound exceeds this (default 0.999)")
    p.add_argument("--max-queries", type=_positive(int), default=1000, help="oracle query budget per search")


def _load_dataset(args):
    path = args.data or fixture_path("yeast_style.svm")
    return load_multilabel(path, args.format)


def cmd_train(args) -> int:
    ds = _load_dataset(args)
    if args.hierarchy:
        parents = load_parents(args.hierarchy)
        if len(parents) != ds.d_labels:
            raise UsageError(f"hierarchy has {len(parents)} nodes, data has {ds.d_labels} labels")
        task = HierarchicalTask(ds.d_features, parents)
    else:
        task = MultiLabelTask(ds.d_features, ds.d_labels)
    train = ds.examples("train")
    eval_split = "test" if np.any(ds.split == "test") else "train"
    strategy = SearchStrategy(args.search, _search_config(args), args.backend)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    objectives = ("slack", "margin") if args.objective == "both" else (args.objective,)
    for obj in objectives:
        model = ModelState.zeros(task, args.C)
        if args.trainer == "sgd":
            model, history = sgd_train(model, train, strategy, epochs=args.epochs, mode=obj,
                                       seed=args.seed, batch_size=args.batch_size,
                                       threads=args.threads)
        else:
            model, _, history = cutting_plane_train(model, train, strategy, eps=args.eps,
                                                    max_rounds=args.rounds, mode=obj)
        if not args.timing:
            history = [{k: v for k, v in rec.items() if k != "time"} for rec in history]
        save_checkpoint(model, out / f"model-{obj}.json",
                        extra={"objective": obj, "trainer": args.trainer, "search": args.search})
        with open(out / f"history-{obj}.jsonl", "w") as fh:
            for rec in history:
                fh.write(json.dumps(rec, sort_keys=True, default=float) + "\n")
        report = evaluate(model, ds, eval_split)
        (out / f"metrics-{obj}.json").write_text(report.to_json() + "\n")
        print(f"{obj:6s} {eval_split}: acc={report.acc:.4f} label_loss={report.label_loss:.4f} "
              f"micro_f1={report.micro_f1:.4f} macro_f1={report.macro_f1:.4f}")
    return 0


def _ensemble(args):
    rng = np.random.default_rng(args.seed)
    for k in range(args.instances):
        if args.ensemble == "adversarial":
            yield adversarial_instance(args.eps_adv, 1.0, 1.0)
        else:
            M = args.M if args.M else int(rng.integers(3, 201))
            yield random_instance(M, args.distribution, seed=args.seed * 1_000_003 + k)


def cmd_search_bench(args) -> int:
    names = args.searches
    stats = {n: {"success": 0, "exact": 0, "queries": 0, "time": 0.0} for n in names}
    cfg = _search_config(args)
    cfg.trace = bool(args.trace)
    trace_fh = open(args.trace, "w") if args.trace else None
    count = 0
    try:
        for k, inst in enumerate(_ensemble(args)):
            count += 1
            phi_star = exhaustive_search(inst).best_phi
            for n in names:
                t0 = time.perf_counter()
                o = run_search(n, inst, cfg, xi=args.xi)
                stats[n]["time"] += time.perf_counter() - t0
                stats[n]["queries"] += o.queries
                stats[n]["success"] += o.best_phi > args.xi + args.eps
                stats[n]["exact"] += o.best_phi >= phi_star * (1.0 - EXACT_RTOL)
                if trace_fh:
                    for rec in o.trace:
                        trace_fh.write(json.dumps({"instance": k, "search": n, **rec},
                                                  sort_keys=True, default=float) + "\n")
    finally:
        if trace_fh:
            trace_fh.close()
    header = ["search", "instances", "success_rate", "exact_rate", "mean_queries"]
    if args.timing:
        header.append("mean_time_ms")
    rows = []
    for n in names:
        s = stats[n]
        row = [n, count, s["success"] / max(count, 1), s["exact"] / max(count, 1), s["queries"] / max(count, 1)]
        if args.timing:
            row.append(1e3 * s["time"] / max(count, 1))
        rows.append(row)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in row])
    widths = [max(len(h), 10) for h in header]
    print("  ".join(h.rjust(wd) for h, wd in zip(header, widths)))
    for row in rows:
        cells = [f"{v:.4f}" if isinstance(v, float) else str(v) for v in row]
        print("  ".join(c.rjust(wd) for c, wd in zip(cells, widths)))
    return 0


def cmd_adversarial_demo(args) -> int:
    try:
        inst = adversarial_instance(args.eps, args.H, args.G)
    except ValueError as e:
        raise UsageError(str(e)) from None
    star = exhaustive_search(inst)
    print(f"labels: A=({args.eps:g}, {args.G:g})  B=({args.H:g}, {args.eps:g})  C=({args.H / 2:g}, {args.G / 2:g})")
    print(f"optimum: {star.best_label} with phi={star.best_phi:.6g}")
    print(f"{'search':>10s}  {'label':>5s}  {'phi':>10s}  {'queries':>7s}  certificate")
    cfg = _search_config(args)
    for n in BENCH_SEARCHES:
        o = run_search(n, inst, cfg)
        cert = o.certificate.kind
        if o.certificate.ratio is not None and not o.certificate.is_exact:
            cert += f"({o.certificate.ratio:.4g})"
        print(f"{n:>10s}  {str(o.best_label):>5s}  {o.best_phi:10.6g}  {o.queries:7d}  {cert}")
        if n != "angular":
            print(f"{'':>10s}  gap to optimum: {star.best_phi / max(o.best_phi, 1e-300):.4g}x")
    return 0


def cmd_emit_points(args) -> int:
    if args.instance == "adversarial":
        inst = adversarial_instance(args.eps, 1.0, 1.0)
    else:
        if not args.model:
            raise UsageError("--model is required unless --instance adversarial")
        model = load_checkpoint(args.model)
        ds = _load_dataset(args)
        exs = ds.examples()
        if not 0 <= args.index < len(exs):
            raise UsageError(f"--index {args.index} out of range (dataset has {len(exs)} examples)")
        inst = instance_for(model, exs[args.index], "enumeration")
    if not isinstance(inst, EnumerationInstance):
        raise UsageError("emit-points needs an enumerable backend")
    keep = inst.g > 0 if args.exclude_gold else np.ones(inst.size, dtype=bool)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "h", "g", "phi"])
        for i in np.flatnonzero(keep):
            ans = inst._answer(int(i))
            lab = ans.label
            if isinstance(lab, tuple):
                lab = "".join(str(c) for c in lab)
            h, g = ans.point
            w.writerow([lab, repr(h), repr(g), repr(h * g)])
    finally:
        if args.out:
            fh.close()
    return 0


def _positive(kind):
    def parse(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return parse


def _nonnegative_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slackrescale", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a multi-label model", epilog=TRAIN_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--data", help="dataset file (default: bundled yeast-style fixture)")
    p.add_argument("--format", choices=FORMATS, default="svmlight-multilabel")
    p.add_argument("--hierarchy", help="parent-list file; trains a hierarchical model")
    p.add_argument("--objective", choices=("slack", "margin", "both"), default="slack")
    p.add_argument("--trainer", choices=("sgd", "cutting-plane"), default="sgd")
    p.add_argument("--search", choices=sorted(SEARCHES), default="angular")
    p.add_argument("--backend", choices=("auto", "factorized", "enumeration"), default="auto")
    p.add_argument("-C", type=_positive(float), default=1e-2, help="regularisation constant")
    p.add_argument("--epochs", type=_nonnegative_int, default=20)
    p.add_argument("--rounds", type=_nonnegative_int, default=50, help="cutting-plane rounds")
    p.add_argument("--eps", type=_positive(float), default=1e-3, help="cutting-plane violation margin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=_positive(int), default=1)
    p.add_argument("--threads", type=_positive(int), default=1)
    p.add_argument("--timing", action="store_true", help="record wall time in the history")
    p.add_argument("--out", default=".", help="output directory")
    _add_search_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("search-bench", help="compare searches on a seeded ensemble", epilog=BENCH_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--ensemble", choices=("random", "adversarial"), default="random")
    p.add_argument("--instances", type=_nonnegative_int, default=200)
    p.add_argument("-M", type=_positive(int), default=None, help="labels per instance (default: 3..200)")
    p.add_argument("--distribution", choices=DISTRIBUTIONS, default="uniform")
    p.add_argument("--eps-adv", type=_positive(float), default=1e-3, help="eps of the adversarial ensemble")
    p.add_argument("--searches", nargs="+", choices=sorted(SEARCHES), default=list(BENCH_SEARCHES))
    p.add_argument("--xi", type=float, default=0.0, help="current slack for the success test")
    p.add_argument("--eps", type=float, default=0.0, help="violation margin for the success test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="write the table as CSV here")
    p.add_argument("--trace", help="write per-query trace records as JSON lines here")
    p.add_argument("--timing", action="store_true", help="include mean wall time (not reproducible)")
    _add_search_options(p)
    p.set_defaults(func=cmd_search_bench)

    p = sub.add_parser("adversarial-demo", help="three-label instance beyond lambda-only search")
    p.add_argument("--eps", type=_positive(float), default=1e-3)
    p.add_argument("--H", type=_positive(float), default=1.0)
    p.add_argument("--G", type=_positive(float), default=1.0)
    _add_search_options(p)
    p.set_defaults(func=cmd_adversarial_demo)

    p = sub.add_parser("emit-points", help="(h, g) of every label of one example", epilog=POINTS_EPILOG)
    p.add_argument("--model", help="checkpoint written by 'train'")
    p.add_argument("--data", help="dataset file (default: bundled yeast-style fixture)")
    p.add_argument("--format", choices=FORMATS, default="svmlight-multilabel")
    p.add_argument("--index", type=int, default=0, help="example index in the dataset")
    p.add_argument("--instance", choices=("model", "adversarial"), default="model")
    p.add_argument("--eps", type=_positive(float), default=1e-3, help="eps of the adversarial instance")
    p.add_argument("--exclude-gold", action="store_true", help="drop zero-error labels")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_emit_points)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("SLACKRESCALE_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"slackrescale: error: {e}", file=sys.stderr)
        return 2
    except (OSError, ParseError, ValueError) as e:
        print(f"slackrescale: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
