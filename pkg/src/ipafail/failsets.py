"""Stopping sets, termatiko sets and related predicates.

A set ``T`` of variable nodes is termatiko when reconstruction from the
measurements of its binary indicator returns the all-zero vector. Two
independent routes decide this: :func:`is_termatiko_ipa` runs the
reconstruction, :func:`is_termatiko_graph` applies the local graph condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .ipa import ipa
from .tanner import MeasurementMatrix, TannerGraph, indicator, measure, support


class TermatikoClass(str, Enum):
    T1 = "T1"  # every check in N(T) also touches the companion set
    T2 = "T2"


def _as_graph(obj) -> TannerGraph:
    return obj.graph if isinstance(obj, MeasurementMatrix) else obj


def _as_set(graph: TannerGraph, nodes: Iterable[int]) -> frozenset[int]:
    nodes = frozenset(int(v) for v in nodes)
    bad = [v for v in nodes if not 0 <= v < graph.n]
    if bad:
        raise IndexError(f"variable node {bad[0]} out of range 0..{graph.n - 1}")
    return nodes


def _t_counts(graph: TannerGraph, T: frozenset[int]) -> np.ndarray:
    cnt = np.zeros(graph.m, dtype=np.int64)
    for t in T:
        cnt[graph.var_neighbors(t)] += 1
    return cnt


def is_stopping_set(graph, S: Iterable[int]) -> bool:
    """Every check touching ``S`` sees it at least twice. The empty set qualifies."""
    graph = _as_graph(graph)
    S = _as_set(graph, S)
    cnt = _t_counts(graph, S)
    return not np.any(cnt == 1)


def companion_set(graph, T: Iterable[int]) -> tuple[frozenset[int], frozenset[int]]:
    """Return ``(N, S)``: the checks adjacent to ``T`` and the other variables
    whose checks all lie in ``N``."""
    graph = _as_graph(graph)
    T = _as_set(graph, T)
    cnt = _t_counts(graph, T)
    N = frozenset(np.flatnonzero(cnt).tolist())
    S = set()
    for c in N:
        for v in graph.chk_neighbors(c).tolist():
            if v not in T and v not in S and np.all(cnt[graph.var_neighbors(v)] > 0):
                S.add(v)
    return N, frozenset(S)


@dataclass(frozen=True)
class TermatikoAnalysis:
    T: frozenset[int]
    N: frozenset[int]
    S: frozenset[int]
    is_termatiko: bool
    cls: TermatikoClass | None = None
    witness_check: int | None = None
    witness_var: int | None = None

    def to_dict(self, base: int = 0) -> dict:
        def s(nodes):
            return sorted(v + base for v in nodes)

        return {
            "T": s(self.T),
            "N": s(self.N),
            "S": s(self.S),
            "termatiko": self.is_termatiko,
            "class": self.cls.value if self.cls else None,
            "witness": None if self.witness_check is None else {
                "check": self.witness_check + base, "variable": self.witness_var + base},
        }


def is_termatiko_graph(graph, T: Iterable[int]) -> TermatikoAnalysis:
    """Decide the termatiko property from the graph structure alone.

    Every check ``c`` in ``N(T)`` must either touch the companion set ``S`` or
    have at least two ``T``-neighbours whose checks all see ``T`` at least
    twice. On failure the first violating check is reported with the variable
    that reconstruction recovers through it in the first iteration.
    """
    graph = _as_graph(graph)
    T = _as_set(graph, T)
    N, S = companion_set(graph, T)
    cnt = _t_counts(graph, T)
    all_touch_s = True
    for c in sorted(N):
        nbrs = graph.chk_neighbors(c).tolist()
        if any(v in S for v in nbrs):
            continue
        all_touch_s = False
        in_t = [v for v in nbrs if v in T]
        strong = [v for v in in_t if np.all(cnt[graph.var_neighbors(v)] >= 2)]
        if len(strong) < 2:
            v_star = strong[0] if strong else in_t[0]
            return TermatikoAnalysis(T, N, S, False, None, c, v_star)
    if not T:
        return TermatikoAnalysis(T, N, S, True, None)
    cls = TermatikoClass.T1 if all_touch_s else TermatikoClass.T2
    return TermatikoAnalysis(T, N, S, True, cls)


def is_termatiko_ipa(matrix: MeasurementMatrix, T: Iterable[int], *, max_iter: int | None = None) -> bool:
    """Run reconstruction on the binary indicator of ``T`` and test for an all-zero output."""
    if not matrix.binary:
        raise ValueError("is_termatiko_ipa needs a binary matrix; binarize it first")
    T = _as_set(matrix.graph, T)
    x = indicator(matrix.n, T)
    res = ipa(measure(matrix, x), matrix, max_iter=max_iter)
    return not np.any(res.x_hat)


@dataclass(frozen=True)
class PrunedInstance:
    """Subgraph on checks ``N(T)`` and variables ``T | S``.

    ``var_map[i]``/``chk_map[j]`` give the original index of local variable
    ``i``/check ``j``; ``T`` is expressed in local indices.
    """

    matrix: MeasurementMatrix
    var_map: tuple[int, ...]
    chk_map: tuple[int, ...]
    T: frozenset[int]


def prune_inactive(matrix: MeasurementMatrix, T: Iterable[int]) -> PrunedInstance:
    """Drop every variable that a zero-valued check already pins to zero.

    For the indicator of ``T``, checks outside ``N(T)`` read zero, so their
    neighbours outside ``T | S`` get upper bound zero at initialization and
    never influence the others.
    """
    T = _as_set(matrix.graph, T)
    N, S = companion_set(matrix, T)
    var_map = tuple(sorted(T | S))
    chk_map = tuple(sorted(N))
    if not var_map:
        raise ValueError("nothing left after pruning an empty set")
    vloc = {v: i for i, v in enumerate(var_map)}
    cloc = {c: j for j, c in enumerate(chk_map)}
    keep = np.isin(matrix.rows, chk_map) & np.isin(matrix.cols, var_map)
    rows = [cloc[r] for r in matrix.rows[keep].tolist()]
    cols = [vloc[c] for c in matrix.cols[keep].tolist()]
    sub = MeasurementMatrix(len(chk_map), len(var_map), rows, cols, matrix.values[keep])
    return PrunedInstance(sub, var_map, chk_map, frozenset(vloc[t] for t in T))


def duplicate_columns(matrix: MeasurementMatrix) -> list[tuple[int, ...]]:
    """Groups of variables with identical check neighbourhoods.

    Such variables cannot be told apart by any measurement, so any signal
    supported on one of them is ambiguous.
    """
    g = matrix.graph
    groups: dict[tuple[int, ...], list[int]] = {}
    for v in range(matrix.n):
        groups.setdefault(tuple(g.var_neighbors(v).tolist()), []).append(v)
    return [tuple(vs) for vs in groups.values() if len(vs) > 1]


class InconclusiveError(ValueError):
    """The termatiko catalog does not reach the size needed for a verdict."""


def full_failure_check(matrix: MeasurementMatrix, x, catalog) -> bool:
    """Predict whether reconstruction fails to return ``x`` exactly.

    Failure is predicted iff ``supp(x)`` contains a nonempty catalogued
    termatiko set. ``catalog`` needs ``sets`` and ``kmax`` attributes, as on
    the result of :func:`ipafail.search.brute_force_termatiko`, and must cover
    all sizes up to ``|supp(x)|``.
    """
    supp = support(x)
    if len(supp) > catalog.kmax:
        raise InconclusiveError(f"catalog covers sizes <= {catalog.kmax}, support has {len(supp)}")
    return any(t and t <= supp for t in catalog.sets)
