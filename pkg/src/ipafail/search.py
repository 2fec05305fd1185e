"""Enumeration of stopping sets and termatiko sets, and size spectra."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import _kernels
from .failsets import is_termatiko_ipa
from .tanner import MeasurementMatrix, TannerGraph, gen_protograph_lift

log = logging.getLogger(__name__)


class BudgetExceeded(RuntimeError):
    """A search cannot start (or finish) within its configured budget."""


class CrossValidationError(AssertionError):
    """The graph criterion and the reconstruction-based definition disagree."""


@dataclass
class Budget:
    """Wall-clock and search-size limits shared by the engines.

    ``max_nodes`` caps branch-and-bound nodes per root subtree;
    ``max_candidates`` caps the number of sets brute force may test.
    """

    seconds: float | None = None
    max_nodes: int | None = None
    max_candidates: int | None = None
    started: float = field(default_factory=time.monotonic)
    exhausted: bool = False

    def out_of_time(self) -> bool:
        if self.seconds is not None and time.monotonic() - self.started > self.seconds:
            self.exhausted = True
        return self.exhausted


def _graph(obj) -> TannerGraph:
    return obj.graph if isinstance(obj, MeasurementMatrix) else obj


def _gargs(g: TannerGraph):
    return (g.n, g.m, g.chk_ptr, g.edge_var, g.var_ptr, g.var_adj)


def _map_ordered(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            yield from ex.map(fn, items)
    else:
        yield from map(fn, items)


def default_threads() -> int:
    return os.cpu_count() or 1


@dataclass
class SizeSpectrum:
    """Multiplicities per set size, split by class.

    ``exact[k]`` is False where a count is only a lower bound. For stopping
    sets every set is counted under ``t1`` only and ``kind`` is ``"stopping"``.
    """

    method: str
    t1: dict[int, int]
    t2: dict[int, int]
    exact: dict[int, bool]
    tau: int | None = None
    kmax: int | None = None
    s_min: int | None = None
    complete: bool = True
    kind: str = "termatiko"

    @property
    def sizes(self) -> list[int]:
        return sorted(set(self.t1) | set(self.t2))

    def count(self, k: int) -> int:
        return self.t1.get(k, 0) + self.t2.get(k, 0)

    @property
    def h_min(self) -> int | None:
        hits = [k for k in self.sizes if self.count(k) > 0]
        return min(hits) if hits else None

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "kind": self.kind,
            "tau": self.tau,
            "kmax": self.kmax,
            "complete": self.complete,
            "sizes": [{"k": k, "t1": self.t1.get(k, 0), "t2": self.t2.get(k, 0),
                       "exact": self.exact.get(k, False)} for k in self.sizes],
            "h_min": self.h_min,
            "s_min": self.s_min,
        }


# --------------------------------------------------------------------------
# stopping sets


@dataclass
class StoppingSets:
    sets: list[tuple[int, ...]]
    tau: int
    complete: bool
    nodes: int

    def spectrum(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for s in self.sets:
            out[len(s)] = out.get(len(s), 0) + 1
        return dict(sorted(out.items()))

    @property
    def s_min(self) -> int | None:
        return min(map(len, self.sets)) if self.sets else None


class _Stream:
    """Per-root batches of stopping sets; records whether the stream finished."""

    def __init__(self, graph, tau, budget, threads):
        self.g = _graph(graph)
        self.tau = tau
        self.budget = budget or Budget()
        self.threads = threads
        self.complete = True
        self.nodes = 0

    def _root(self, r):
        if self.budget.out_of_time():
            return None
        cap = self.budget.max_nodes if self.budget.max_nodes is not None else 2 ** 62
        return _kernels.stopping_search(np.array([r], dtype=np.int64), np.arange(r, dtype=np.int64),
                                        self.tau, cap, False, *_gargs(self.g))

    def __iter__(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for res in _map_ordered(self._root, range(self.g.n), self.threads):
            if res is None:
                self.complete = False
                continue
            sets, sizes, nodes, complete = res
            self.nodes += int(nodes)
            self.complete &= bool(complete)
            if len(sizes):
                # lexicographic order within a root is global order since the root is the minimum
                keys = [tuple(row[:k]) for row, k in zip(sets.tolist(), sizes.tolist())]
                order = sorted(range(len(keys)), key=keys.__getitem__)
                sets, sizes = sets[order], sizes[order]
            yield sets, sizes


def iter_stopping_sets(graph, tau: int, *, budget: Budget | None = None,
                       threads: int = 1) -> Iterator[tuple[int, ...]]:
    """Yield every nonempty stopping set of size ``<= tau`` once, in lexicographic order."""
    for sets, sizes in _Stream(graph, tau, budget, threads):
        for row, k in zip(sets.tolist(), sizes.tolist()):
            yield tuple(row[:k])


def enumerate_stopping_sets(graph, tau: int, *, budget: Budget | None = None,
                            threads: int = 1) -> StoppingSets:
    """All nonempty stopping sets of size at most ``tau``.

    ``complete`` is False if the budget ran out; the sets found so far are
    still returned.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1")
    stream = _Stream(graph, tau, budget, threads)
    sets = []
    for rows, sizes in stream:
        sets.extend(tuple(row[:k]) for row, k in zip(rows.tolist(), sizes.tolist()))
    if not stream.complete:
        log.warning("stopping-set enumeration incomplete (tau=%d, %d sets so far)", tau, len(sets))
    return StoppingSets(sets, tau, stream.complete, stream.nodes)


def minimum_stopping_set_size(graph, tau: int, *, budget: Budget | None = None) -> tuple[int | None, bool]:
    """Smallest nonempty stopping-set size up to ``tau`` by iterative deepening.

    Returns ``(size or None, complete)``.
    """
    g = _graph(graph)
    for t in range(1, tau + 1):
        stream = _Stream(g, t, budget, 1)
        found = any(len(sizes) for sizes in (s for _, s in stream))
        if found:
            return t, True
        if not stream.complete:
            return None, False
    return None, True


def contained_in_stopping_set(graph, T: Iterable[int], tau: int, *, max_nodes: int = 2 ** 62) -> bool | None:
    """Whether some stopping set of size ``<= tau`` contains ``T``; None if undecided."""
    g = _graph(graph)
    sets, sizes, nodes, complete = _kernels.stopping_search(
        np.array(sorted(T), dtype=np.int64), np.empty(0, dtype=np.int64), tau, max_nodes, True, *_gargs(g))
    if len(sizes):
        return True
    return False if complete else None


# --------------------------------------------------------------------------
# termatiko sets


@dataclass
class TermatikoSearch:
    """Termatiko sets found by one engine.

    ``by_size[k]`` holds an ``(count, k)`` array of sets and ``classes[k]`` the
    matching class codes (1 for T1, 2 for T2). Sizes not collected are absent.
    """

    spectrum: SizeSpectrum
    by_size: dict[int, np.ndarray]
    classes: dict[int, np.ndarray]
    kmax: int
    cross_checked: int = 0

    @property
    def sets(self) -> Iterator[frozenset[int]]:
        for k in sorted(self.by_size):
            for row in self.by_size[k].tolist():
                yield frozenset(row)

    def class_of(self, T) -> int | None:
        key = tuple(sorted(T))
        arr = self.by_size.get(len(key))
        if arr is None or not len(arr):
            return None
        hit = np.flatnonzero((arr == np.array(key)).all(axis=1))
        return int(self.classes[len(key)][hit[0]]) if len(hit) else None


def _collect_mask(collect, kmax):
    mask = np.zeros(kmax + 1, dtype=np.bool_)
    if collect is True:
        mask[1:] = True
    elif collect:
        for k in collect:
            if 1 <= k <= kmax:
                mask[k] = True
    return mask


def brute_force_termatiko(graph, kmax: int, *, collect: bool | Iterable[int] = True,
                          cross_validate: float = 0.0, seed: int = 0, matrix: MeasurementMatrix | None = None,
                          budget: Budget | None = None, threads: int = 1) -> TermatikoSearch:
    """Test every set of ``1..kmax`` variables with the graph criterion.

    With ``cross_validate=p`` a seeded sample of ``ceil(p * C(n, k))`` random
    candidates plus ``ceil(p * hits)`` of the found sets per size is re-tested
    by running reconstruction; any disagreement raises
    :class:`CrossValidationError`.
    """
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    if isinstance(graph, MeasurementMatrix):
        matrix = matrix or graph
    g = _graph(graph)
    budget = budget or Budget()
    total = sum(math.comb(g.n, k) for k in range(1, kmax + 1))
    if budget.max_candidates is not None and total > budget.max_candidates:
        raise BudgetExceeded(f"{total} candidate sets exceed the budget of {budget.max_candidates}")
    mask = _collect_mask(collect, kmax)
    counts = np.zeros((kmax + 1, 3), dtype=np.int64)
    found: dict[int, list] = {k: [] for k in range(1, kmax + 1) if mask[k]}
    found_cls: dict[int, list] = {k: [] for k in found}
    complete = True

    def run(r):
        if budget.out_of_time():
            return None
        return _kernels.brute_force_root(r, kmax, mask, *_gargs(g))

    for res in _map_ordered(run, range(g.n), threads):
        if res is None:
            complete = False
            continue
        cnt, rows, cls = res
        counts += cnt
        if len(rows):
            sizes = (rows >= 0).sum(axis=1)
            for k in found:
                sel = sizes == k
                if sel.any():
                    found[k].append(rows[sel, :k])
                    found_cls[k].append(cls[sel])
    by_size = {k: (np.concatenate(v) if v else np.empty((0, k), dtype=np.int32)) for k, v in found.items()}
    classes = {k: (np.concatenate(v) if v else np.empty(0, dtype=np.int8)) for k, v in found_cls.items()}
    spec = SizeSpectrum(
        "brute",
        {k: int(counts[k, 1]) for k in range(1, kmax + 1)},
        {k: int(counts[k, 2]) for k in range(1, kmax + 1)},
        {k: complete for k in range(1, kmax + 1)},
        kmax=kmax,
        complete=complete,
    )
    result = TermatikoSearch(spec, by_size, classes, kmax)
    if cross_validate > 0:
        if matrix is None:
            raise ValueError("cross-validation needs the matrix")
        result.cross_checked = _cross_validate(matrix, result, cross_validate, seed)
    return result


def _cross_validate(matrix: MeasurementMatrix, result: TermatikoSearch, frac: float, seed: int) -> int:
    g = matrix.graph
    rng = np.random.default_rng(seed)
    checked = 0
    for k in range(1, result.kmax + 1):
        ncand = math.ceil(frac * math.comb(g.n, k))
        sample = np.array([np.sort(rng.choice(g.n, size=k, replace=False)) for _ in range(ncand)],
                          dtype=np.int32).reshape(ncand, k)
        if k in result.by_size and len(result.by_size[k]):
            hits = result.by_size[k]
            pick = rng.choice(len(hits), size=min(len(hits), math.ceil(frac * len(hits))), replace=False)
            sample = np.concatenate([sample, hits[np.sort(pick)]])
        if not len(sample):
            continue
        verdicts = _kernels.classify_sets(sample, np.full(len(sample), k, dtype=np.int64), *_gargs(g))
        for row, verdict in zip(sample.tolist(), verdicts.tolist()):
            by_ipa = is_termatiko_ipa(matrix, row)
            if by_ipa != (verdict != 0):
                raise CrossValidationError(
                    f"set {row}: graph criterion says {verdict != 0}, reconstruction says {by_ipa}")
        checked += len(sample)
    return checked


def _spectrum_from(found: dict[tuple[int, ...], int], method: str, tau: int, kmax: int | None,
                   complete: bool, s_min: int | None) -> tuple[SizeSpectrum, dict, dict]:
    t1: dict[int, int] = {}
    t2: dict[int, int] = {}
    buckets: dict[int, list] = {}
    cls_b: dict[int, list] = {}
    for key in sorted(found):
        k = len(key)
        (t1 if found[key] == 1 else t2)[k] = (t1 if found[key] == 1 else t2).get(k, 0) + 1
        buckets.setdefault(k, []).append(key)
        cls_b.setdefault(k, []).append(found[key])
    top = kmax if kmax is not None else tau
    for k in range(1, top + 1):
        t1.setdefault(k, 0)
        t2.setdefault(k, 0)
    spec = SizeSpectrum(method, t1, t2, {k: False for k in t1}, tau=tau, kmax=kmax,
                        s_min=s_min, complete=complete)
    by_size = {k: np.array(v, dtype=np.int32).reshape(len(v), k) for k, v in buckets.items()}
    classes = {k: np.array(v, dtype=np.int8) for k, v in cls_b.items()}
    return spec, by_size, classes


def heuristic_termatiko(graph, tau: int, *, kmax: int | None = None, strategy: str = "subsets",
                        budget: Budget | None = None, threads: int = 1,
                        symmetry: bool = True) -> TermatikoSearch:
    """Termatiko sets that lie inside some stopping set of size at most ``tau``.

    ``strategy="subsets"`` enumerates the stopping sets and tests all their
    nonempty subsets (up to size ``kmax``), deduplicating globally.
    ``strategy="containment"`` yields the same sets from the other side: it
    enumerates termatiko sets exhaustively up to ``kmax`` and keeps those
    contained in a stopping set of size ``<= tau``. It needs ``kmax`` and is
    the practical route when stopping sets are very numerous. With
    ``symmetry`` it tests one set per orbit of the block cyclic shift (see
    :func:`cyclic_shift_order`).

    Counts are lower bounds on the true multiplicities.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1")
    g = _graph(graph)
    budget = budget or Budget()
    if strategy == "subsets":
        return _heuristic_subsets(g, tau, kmax, budget, threads)
    if strategy == "containment":
        if kmax is None:
            raise ValueError("the containment strategy needs kmax")
        return _heuristic_containment(g, tau, kmax, budget, threads, symmetry)
    raise ValueError(f"unknown strategy {strategy!r}")


def _heuristic_subsets(g, tau, kmax, budget, threads):
    limit = kmax if kmax is not None else tau
    found: dict[tuple[int, ...], int] = {}
    stream = _Stream(g, tau, budget, threads)
    s_min = None
    for sets, sizes in stream:
        if not len(sizes):
            continue
        smallest = int(sizes.min())
        s_min = smallest if s_min is None else min(s_min, smallest)
        hits = _kernels.subsets_of_sets(sets, sizes, limit, *_gargs(g))
        if not len(hits):
            continue
        # decode (row, mask) pairs into padded sorted subsets and dedupe per batch
        bits = (hits[:, 1:2] >> np.arange(sets.shape[1])) & 1
        elems = np.sort(np.where(bits == 1, sets[hits[:, 0]], g.n), axis=1)
        elems, first = np.unique(elems, axis=0, return_index=True)
        ks = (elems < g.n).sum(axis=1)
        for row, k, cls in zip(elems.tolist(), ks.tolist(), hits[first, 2].tolist()):
            found.setdefault(tuple(row[:k]), cls)
    spec, by_size, classes = _spectrum_from(found, f"heuristic(tau={tau})", tau, kmax, stream.complete, s_min)
    return TermatikoSearch(spec, by_size, classes, limit)


def cyclic_shift_order(graph) -> int:
    """Largest block size ``L > 1`` whose simultaneous cyclic shift is an automorphism.

    The shift sends column ``b*L + i`` to ``b*L + (i+1) % L`` and does the
    same to rows. Quasi-cyclic matrices (array matrices, protograph lifts)
    have this symmetry with ``L`` the circulant size. Returns 1 if no block
    size dividing both dimensions works.
    """
    g = _graph(graph)
    d = math.gcd(g.m, g.n)
    if d < 2:
        return 1
    keys = np.sort(g.edge_chk.astype(np.int64) * g.n + g.edge_var)
    for L in sorted((q for q in range(2, d + 1) if d % q == 0), reverse=True):
        r = g.edge_chk.astype(np.int64)
        c = g.edge_var.astype(np.int64)
        r = r - r % L + (r % L + 1) % L
        c = c - c % L + (c % L + 1) % L
        if np.array_equal(np.sort(r * g.n + c), keys):
            return L
    return 1


def _orbit_keys(rows: np.ndarray, L: int, n: int, chunk: int = 1 << 18) -> np.ndarray | None:
    """Smallest encoded image of each row under the ``L`` block shifts, or None on overflow."""
    k = rows.shape[1]
    if float(n) ** k >= 2.0 ** 62:
        return None
    weights = n ** np.arange(k - 1, -1, -1, dtype=np.int64)
    out = np.empty(len(rows), dtype=np.int64)
    for lo in range(0, len(rows), chunk):
        part = rows[lo:lo + chunk].astype(np.int64)
        base, off = part - part % L, part % L
        best = None
        for s in range(L):
            key = np.sort(base + (off + s) % L, axis=1) @ weights
            best = key if best is None else np.minimum(best, key)
        out[lo:lo + chunk] = best
    return out


def _heuristic_containment(g, tau, kmax, budget, threads, symmetry=True):
    exact = brute_force_termatiko(g, kmax, budget=budget, threads=threads)
    cap = budget.max_nodes if budget.max_nodes is not None else 2 ** 62
    found: dict[tuple[int, ...], int] = {}
    complete = exact.spectrum.complete
    # containment is invariant under automorphisms, so one test per orbit suffices
    L = cyclic_shift_order(g) if symmetry else 1
    for k in range(1, kmax + 1):
        rows = exact.by_size[k]
        if not len(rows):
            continue
        keys = _orbit_keys(rows, L, g.n) if L > 1 else None
        if keys is None:
            reps, inverse = rows, None
        else:
            _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
            reps = rows[first]
        log.debug("containment k=%d: %d sets, %d tested", k, len(rows), len(reps))
        keep, undecided = _kernels.contained_batch(reps, np.full(len(reps), k, dtype=np.int64),
                                                   tau, cap, *_gargs(g))
        if inverse is not None:
            keep, undecided = keep[inverse.ravel()], undecided[inverse.ravel()]
        complete &= not undecided.any()
        for row, cls in zip(rows[keep].tolist(), exact.classes[k][keep].tolist()):
            found[tuple(row)] = cls
    s_min, s_done = minimum_stopping_set_size(g, tau, budget=budget)
    spec, by_size, classes = _spectrum_from(found, f"heuristic(tau={tau})", tau, kmax, complete and s_done, s_min)
    return TermatikoSearch(spec, by_size, classes, kmax)


# --------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleRow:
    index: int
    seed: int
    s_min: int | None
    h_min: int | None
    h_min_heuristic: int | None
    h_min_brute: int | None
    complete: bool


@dataclass
class EnsembleStats:
    rows: list[EnsembleRow]
    proto: list[list[int]]
    lift: int
    tau: int
    kmax: int

    def mean(self, attr: str) -> float | None:
        vals = [getattr(r, attr) for r in self.rows if getattr(r, attr) is not None]
        return float(np.mean(vals)) if vals else None

    def to_csv(self) -> str:
        lines = ["index,seed,s_min,h_min,h_min_heuristic,h_min_brute,complete"]
        fmt = lambda v: "" if v is None else str(v)
        for r in self.rows:
            lines.append(",".join([str(r.index), str(r.seed), fmt(r.s_min), fmt(r.h_min),
                                   fmt(r.h_min_heuristic), fmt(r.h_min_brute), str(r.complete).lower()]))
        ms, mh = self.mean("s_min"), self.mean("h_min")
        lines.append(f"mean,,{'' if ms is None else f'{ms:.4f}'},{'' if mh is None else f'{mh:.4f}'},,,")
        return "\n".join(lines) + "\n"


def ensemble_stats(proto, lift: int, count: int, tau: int, kmax: int, seed: int, *,
                   budget_seconds: float | None = None, max_nodes: int | None = None,
                   threads: int = 1) -> EnsembleStats:
    """Stopping distance and estimated termatiko distance over seeded lifts.

    Matrix ``i`` uses seed ``seed + i``. The stopping distance comes from
    enumeration up to ``tau`` (None if no stopping set that small exists);
    the termatiko estimate is the smaller of the heuristic minimum and the
    exhaustive minimum up to ``kmax``. Budgets apply per matrix and leave
    missing values flagged rather than guessed.
    """
    if min(lift, count, tau, kmax) < 1:
        raise ValueError("lift, count, tau and kmax must be positive")
    proto = np.atleast_2d(np.asarray(proto, dtype=np.int64))
    rows = []
    for i in range(count):
        s = seed + i
        A = gen_protograph_lift(proto, lift, s)
        budget = Budget(seconds=budget_seconds, max_nodes=max_nodes)
        heur = heuristic_termatiko(A, tau, budget=budget, threads=threads)
        brute = brute_force_termatiko(A, kmax, collect=False, budget=budget, threads=threads)
        hh, hb = heur.spectrum.h_min, brute.spectrum.h_min
        cands = [h for h in (hh, hb) if h is not None]
        complete = heur.spectrum.complete and brute.spectrum.complete
        s_min = heur.spectrum.s_min if heur.spectrum.complete else None
        rows.append(EnsembleRow(i, s, s_min, min(cands) if cands else None, hh, hb, complete))
        log.info("lift %d (seed %d): s_min=%s h_min=%s", i, s, s_min, rows[-1].h_min)
    return EnsembleStats(rows, proto.tolist(), lift, tau, kmax)
