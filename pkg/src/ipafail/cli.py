"""Command-line front end.

Node indices in every file and on the command line are 1-based.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .failsets import is_stopping_set, is_termatiko_graph, is_termatiko_ipa
from .fileio import FormatError, alist_text, format_vector, read_matrix, read_signal, weighted_text
from .ipa import DEFAULT_TOL, ipa, recovery_trace
from .search import (Budget, BudgetExceeded, CrossValidationError, brute_force_termatiko,
                     default_threads, enumerate_stopping_sets, ensemble_stats, heuristic_termatiko)
from .tanner import MatrixError, binarize, builtin_instance, gen_array_ldpc, gen_protograph_lift, measure, BUILTINS

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INCOMPLETE = 3

log = logging.getLogger("ipafail")


class UsageError(Exception):
    pass


def _parse_proto(text: str) -> np.ndarray:
    try:
        rows = [[int(t) for t in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise UsageError(f"bad protomatrix {text!r}; use '3,3' or '1,2;2,1'") from None
    if len({len(r) for r in rows}) != 1:
        raise UsageError("protomatrix rows differ in length")
    return np.array(rows)


def _parse_set(text: str, n: int) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        nodes = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"bad node set {text!r}") from None
    for v in nodes:
        if not 1 <= v <= n:
            raise UsageError(f"node {v} out of range 1..{n}")
    return [v - 1 for v in nodes]


def _write_output(text: str, out: str | None, manifest: dict | None = None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).write_text(text)
    if manifest is not None:
        Path(out + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _manifest(args, started, matrix=None, complete=True, seeds=None) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("func",) and not callable(v)}
    man = {
        "command": args.command,
        "parameters": params,
        "tool_version": __version__,
        "wall_clock_seconds": round(time.monotonic() - started, 3),
        "complete": complete,
    }
    if matrix is not None:
        man["matrix"] = {"m": matrix.m, "n": matrix.n, "nnz": matrix.nnz, "sha256_16": matrix.fingerprint()}
    if seeds is not None:
        man["seeds"] = seeds
    return man


def _budget(args) -> Budget:
    return Budget(seconds=args.budget_seconds)


def _threads(args) -> int:
    return args.threads or default_threads()


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args, started):
    if args.builtin:
        matrix = builtin_instance(args.builtin).matrix
    elif args.family == "array":
        if args.p is None:
            raise UsageError("--family array needs --p")
        matrix = gen_array_ldpc(args.p)
    elif args.family == "protograph":
        if args.proto is None or args.lift is None:
            raise UsageError("--family protograph needs --proto and --lift")
        matrix = gen_protograph_lift(_parse_proto(args.proto), args.lift, args.seed)
    else:
        raise UsageError("give --builtin or --family")
    text = weighted_text(matrix) if args.format == "weighted" else alist_text(matrix)
    _write_output(text, args.out, _manifest(args, started, matrix, seeds=[args.seed]))
    return EXIT_OK


def cmd_ipa(args, started):
    matrix = read_matrix(args.matrix, args.weighted)
    truth = None
    if args.signal:
        truth = read_signal(args.signal, matrix.n)
        y = measure(matrix, truth)
    elif args.measurements:
        y = read_signal(args.measurements, matrix.m)
    else:
        raise UsageError("give --signal (ground truth) or --measurements")
    res = ipa(y, matrix, max_iter=args.max_iter, tol=args.tol, trace=bool(args.trace))
    lines = [format_vector(res.x_hat)]
    summary = f"# iterations={res.iterations} converged={str(res.converged).lower()}"
    if truth is not None:
        same = res.x_hat == truth if res.exact else np.abs(res.x_hat - truth) <= args.tol
        summary += f" recovered={int(same.sum())}/{matrix.n}"
    lines.append(summary)
    _write_output("\n".join(lines) + "\n", None)
    if args.trace:
        states = [{"iteration": s.iteration, "lower": s.lower.tolist(), "upper": s.upper.tolist(),
                   "edge_lower": None if s.edge_lower is None else s.edge_lower.tolist(),
                   "edge_upper": None if s.edge_upper is None else s.edge_upper.tolist()} for s in res.trace]
        g = matrix.graph
        doc = {"edges": [[int(c) + 1, int(v) + 1] for c, v in zip(g.edge_chk, g.edge_var)], "states": states}
        if truth is not None:
            rt = recovery_trace(truth, matrix, max_iter=args.max_iter, tol=args.tol)
            doc["gamma"] = [sorted(v + 1 for v in s) for s in rt.gamma]
            doc["Gamma"] = [sorted(v + 1 for v in s) for s in rt.Gamma]
        Path(args.trace).write_text(json.dumps(doc) + "\n")
    return EXIT_OK if res.converged else EXIT_INCOMPLETE


def cmd_verify(args, started):
    matrix = read_matrix(args.matrix, args.weighted)
    T = _parse_set(args.set, matrix.n)
    out = {"kind": args.kind, "set": [v + 1 for v in sorted(T)]}
    if args.kind == "stopping":
        out["verdict"] = is_stopping_set(matrix, T)
    else:
        verdicts = {}
        if args.method in ("graph", "both"):
            res = is_termatiko_graph(matrix, T)
            verdicts["graph"] = res.is_termatiko
            out.update({k: v for k, v in res.to_dict(base=1).items() if k != "termatiko"})
        if args.method in ("ipa", "both"):
            verdicts["ipa"] = is_termatiko_ipa(binarize(matrix), T)
        out["verdicts"] = verdicts
        out["verdict"] = all(verdicts.values())
        if len(set(verdicts.values())) > 1:
            out["disagreement"] = True
    sys.stdout.write(json.dumps(out, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_stopping_sets(args, started):
    matrix = read_matrix(args.matrix, args.weighted)
    res = enumerate_stopping_sets(matrix, args.tau, budget=_budget(args), threads=_threads(args))
    lines = ["size,nodes"] + [f"{len(s)},{' '.join(str(v + 1) for v in s)}" for s in res.sets]
    _write_output("\n".join(lines) + "\n", args.out, _manifest(args, started, matrix, res.complete))
    spectrum = ", ".join(f"{k}:{c}" for k, c in res.spectrum().items())
    print(f"# s_min={res.s_min} spectrum={{{spectrum}}} complete={str(res.complete).lower()}", file=sys.stderr)
    return EXIT_OK if res.complete else EXIT_INCOMPLETE


def cmd_termatiko(args, started):
    matrix = binarize(read_matrix(args.matrix, args.weighted))
    budget = _budget(args)
    if args.mode == "brute":
        if args.kmax is None:
            raise UsageError("--mode brute needs --kmax")
        res = brute_force_termatiko(matrix, args.kmax, collect=bool(args.list_sets) or args.cross_validate > 0,
                                    cross_validate=args.cross_validate / 100.0, seed=args.seed,
                                    budget=budget, threads=_threads(args))
    else:
        if args.tau is None:
            raise UsageError("--mode heuristic needs --tau")
        res = heuristic_termatiko(matrix, args.tau, kmax=args.kmax, strategy=args.strategy,
                                  budget=budget, threads=_threads(args))
    doc = res.spectrum.to_json()
    if args.cross_validate and args.mode == "brute":
        doc["cross_checked"] = res.cross_checked
    if args.list_sets:
        doc["sets"] = [{"T": [v + 1 for v in row], "class": f"T{c}"}
                       for k in sorted(res.by_size)
                       for row, c in zip(res.by_size[k].tolist(), res.classes[k].tolist())]
    text = json.dumps(doc, sort_keys=True) + "\n"
    _write_output(text, args.out, _manifest(args, started, matrix, res.spectrum.complete, [args.seed]))
    return EXIT_OK if res.spectrum.complete else EXIT_INCOMPLETE


def cmd_ensemble(args, started):
    proto = _parse_proto(args.proto)
    stats = ensemble_stats(proto, args.lift, args.count, args.tau, args.kmax, args.seed,
                           budget_seconds=args.budget_seconds, threads=_threads(args))
    complete = all(r.complete for r in stats.rows)
    seeds = [r.seed for r in stats.rows]
    _write_output(stats.to_csv(), args.out, _manifest(args, started, None, complete, seeds))
    return EXIT_OK if complete else EXIT_INCOMPLETE


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for searches")
    common.add_argument("--budget-seconds", type=float, default=None, help="wall-clock budget")
    common.add_argument("-v", "--verbose", action="store_true")

    mat = argparse.ArgumentParser(add_help=False)
    mat.add_argument("--matrix", required=True, help="alist file (or weighted triples with --weighted)")
    mat.add_argument("--weighted", action="store_true", help="matrix file is a 'j i value' triple list")

    p = argparse.ArgumentParser(prog="ipafail", description="Interval passing and its failing sets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a generated or built-in matrix")
    g.add_argument("--builtin", choices=BUILTINS)
    g.add_argument("--family", choices=["array", "protograph"])
    g.add_argument("--p", type=int)
    g.add_argument("--proto", help="protomatrix, rows ';'-separated, e.g. '3,3'")
    g.add_argument("--lift", type=int)
    g.add_argument("--format", choices=["alist", "weighted"], default="alist")
    g.add_argument("-o", "--out")
    g.set_defaults(func=cmd_gen)

    i = sub.add_parser("ipa", parents=[common, mat], help="reconstruct a signal")
    i.add_argument("--signal", help="ground-truth signal CSV; measurements are computed from it")
    i.add_argument("--measurements", help="measurement CSV (no ground truth)")
    i.add_argument("--max-iter", type=int, default=None)
    i.add_argument("--tol", type=float, default=DEFAULT_TOL)
    i.add_argument("--trace", help="write per-iteration messages as JSON")
    i.set_defaults(func=cmd_ipa)

    v = sub.add_parser("verify", parents=[common, mat], help="test one node set")
    v.add_argument("--set", required=True, help="comma-separated 1-based variable nodes")
    v.add_argument("--kind", choices=["stopping", "termatiko"], required=True)
    v.add_argument("--method", choices=["ipa", "graph", "both"], default="both")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("stopping-sets", parents=[common, mat], help="enumerate small stopping sets")
    s.add_argument("--tau", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_stopping_sets)

    t = sub.add_parser("termatiko", parents=[common, mat], help="termatiko size spectrum")
    t.add_argument("--mode", choices=["brute", "heuristic"], required=True)
    t.add_argument("--kmax", type=int)
    t.add_argument("--tau", type=int)
    t.add_argument("--strategy", choices=["subsets", "containment"], default="subsets")
    t.add_argument("--cross-validate", type=float, default=0.0, metavar="PERCENT")
    t.add_argument("--list-sets", action="store_true", help="include the sets in the JSON")
    t.add_argument("--out")
    t.set_defaults(func=cmd_termatiko)

    e = sub.add_parser("ensemble", parents=[common], help="statistics over protograph lifts")
    e.add_argument("--proto", required=True)
    e.add_argument("--lift", type=int, required=True)
    e.add_argument("--count", type=int, required=True)
    e.add_argument("--tau", type=int, required=True)
    e.add_argument("--kmax", type=int, required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_ensemble)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.monotonic()
    try:
        return args.func(args, started)
    except (UsageError, FormatError, MatrixError, FileNotFoundError, IndexError, ValueError) as e:
        print(f"ipafail {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as e:
        print(f"ipafail {args.command}: {e}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except CrossValidationError as e:
        print(f"ipafail {args.command}: cross-validation failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
