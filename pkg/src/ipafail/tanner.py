"""Sparse nonnegative measurement matrices, their Tanner graphs, and generators.

Nodes are 0-based everywhere in this module; file formats and the CLI
translate to 1-based indices at the boundary.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class MatrixError(ValueError):
    """Raised when a matrix violates a structural invariant."""


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """An ``m x n`` nonnegative matrix stored as sorted (row, col, value) triples.

    Zeros are structural absence: every stored value is strictly positive.
    Every column must carry at least one entry; zero rows are allowed.
    """

    m: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    binary: bool = field(default=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if not (len(rows) == len(cols) == len(values)):
            raise MatrixError("rows, cols and values must have equal length")
        if self.m < 0 or self.n < 1:
            raise MatrixError(f"bad shape {self.m}x{self.n}")
        if len(rows) and (rows.min() < 0 or rows.max() >= self.m):
            raise MatrixError("row index out of range")
        if len(cols) and (cols.min() < 0 or cols.max() >= self.n):
            raise MatrixError("column index out of range")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise MatrixError("stored values must be finite and strictly positive")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if len(rows) > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise MatrixError(f"duplicate entry at ({rows[k]}, {cols[k]})")
        col_deg = np.bincount(cols, minlength=self.n)
        if np.any(col_deg == 0):
            v = int(np.flatnonzero(col_deg == 0)[0])
            raise MatrixError(f"column {v} has no nonzero entry")
        binary = bool(np.all(values == 1.0))
        for name, arr in (("rows", rows), ("cols", cols), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "binary", binary)

    @classmethod
    def from_dense(cls, a) -> "MeasurementMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise MatrixError("dense matrix must be 2-D")
        if np.any(a < 0):
            raise MatrixError("measurement matrix must be nonnegative")
        r, c = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], r, c, a[r, c])

    @classmethod
    def from_edges(cls, m: int, n: int, edges: Iterable[tuple[int, int]]) -> "MeasurementMatrix":
        """Binary matrix from (row, col) pairs."""
        edges = list(edges)
        r = [e[0] for e in edges]
        c = [e[1] for e in edges]
        return cls(m, n, r, c, np.ones(len(edges)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.m, self.n))
        a[self.rows, self.cols] = self.values
        return a

    def entries(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()))

    def column_weights(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.n)

    def row_weights(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.m)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.m} {self.n} {self.nnz}\n".encode())
        h.update(self.rows.tobytes())
        h.update(self.cols.tobytes())
        h.update(self.values.tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, MeasurementMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash(self.fingerprint())

    def __repr__(self):
        kind = "binary" if self.binary else "real"
        return f"MeasurementMatrix({self.m}x{self.n}, nnz={self.nnz}, {kind})"

    @cached_property
    def graph(self) -> "TannerGraph":
        return build_graph(self)


@dataclass(frozen=True, eq=False)
class TannerGraph:
    """Bipartite adjacency in CSR form, both directions.

    Edges are numbered in row-major order, so the edges of check ``c`` are
    ``chk_ptr[c]:chk_ptr[c+1]``. ``var_edges[var_ptr[v]:var_ptr[v+1]]`` lists
    the edge ids incident to variable ``v`` in increasing check order.
    """

    m: int
    n: int
    chk_ptr: np.ndarray
    edge_var: np.ndarray
    edge_chk: np.ndarray
    edge_val: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray
    var_adj: np.ndarray

    @property
    def num_edges(self) -> int:
        return len(self.edge_var)

    def chk_neighbors(self, c: int) -> np.ndarray:
        return self.edge_var[self.chk_ptr[c]:self.chk_ptr[c + 1]]

    def var_neighbors(self, v: int) -> np.ndarray:
        return self.var_adj[self.var_ptr[v]:self.var_ptr[v + 1]]

    def var_degree(self) -> np.ndarray:
        return np.diff(self.var_ptr)

    def chk_degree(self) -> np.ndarray:
        return np.diff(self.chk_ptr)

    def neighborhood(self, vs: Iterable[int]) -> np.ndarray:
        """Sorted union of the check neighborhoods of ``vs``."""
        vs = list(vs)
        if not vs:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([self.var_neighbors(v) for v in vs]))

    def to_matrix(self) -> MeasurementMatrix:
        return MeasurementMatrix(self.m, self.n, self.edge_chk, self.edge_var, self.edge_val)


def build_graph(matrix: MeasurementMatrix) -> TannerGraph:
    rows, cols = matrix.rows, matrix.cols
    chk_ptr = np.zeros(matrix.m + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=matrix.m), out=chk_ptr[1:])
    var_ptr = np.zeros(matrix.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=matrix.n), out=var_ptr[1:])
    # stable sort keeps check order inside each column
    var_edges = np.argsort(cols, kind="stable").astype(np.int64)
    arrays = dict(
        chk_ptr=chk_ptr,
        edge_var=cols.copy(),
        edge_chk=rows.copy(),
        edge_val=matrix.values.copy(),
        var_ptr=var_ptr,
        var_edges=var_edges,
        var_adj=rows[var_edges].copy(),
    )
    for arr in arrays.values():
        arr.setflags(write=False)
    return TannerGraph(matrix.m, matrix.n, **arrays)


def measure(matrix: MeasurementMatrix, x) -> np.ndarray:
    """Return ``y = A x``.

    Integral matrix and signal give an ``int64`` result computed exactly.
    """
    x = np.asarray(x)
    if x.shape != (matrix.n,):
        raise ValueError(f"signal length {x.shape} does not match n={matrix.n}")
    integral = matrix.binary and np.all(np.mod(x, 1) == 0)
    if integral:
        xi = x.astype(np.int64)
        y = np.zeros(matrix.m, dtype=np.int64)
        np.add.at(y, matrix.rows, xi[matrix.cols])
        return y
    y = np.zeros(matrix.m)
    np.add.at(y, matrix.rows, matrix.values * x.astype(np.float64)[matrix.cols])
    return y


def binarize(matrix: MeasurementMatrix, x=None):
    """Replace every nonzero by one; optionally map ``x`` to its support indicator."""
    b = MeasurementMatrix(matrix.m, matrix.n, matrix.rows, matrix.cols, np.ones(matrix.nnz))
    if x is None:
        return b
    x = np.asarray(x)
    if x.shape != (matrix.n,):
        raise ValueError(f"signal length {x.shape} does not match n={matrix.n}")
    return b, (x != 0).astype(np.int64)


def support(x) -> frozenset[int]:
    return frozenset(np.flatnonzero(np.asarray(x)).tolist())


def indicator(n: int, nodes: Iterable[int]) -> np.ndarray:
    z = np.zeros(n, dtype=np.int64)
    z[list(nodes)] = 1
    return z


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, int(p ** 0.5) + 1))


def gen_array_ldpc(p: int) -> MeasurementMatrix:
    """Column-weight-3 array LDPC matrix of size ``3p x p^2``.

    Block ``(r, j)`` is ``P^(r*j mod p)`` where ``P`` shifts by one position.
    """
    if not isinstance(p, (int, np.integer)) or p < 3 or not _is_prime(int(p)):
        raise ValueError(f"p must be an odd prime, got {p!r}")
    p = int(p)
    i = np.arange(p)
    rows, cols = [], []
    for r in range(3):
        for j in range(p):
            rows.append(r * p + i)
            cols.append(j * p + (i + r * j) % p)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return MeasurementMatrix(3 * p, p * p, rows, cols, np.ones(len(rows)))


def circulant_offsets(weight: int, lift: int, rng: np.random.Generator) -> np.ndarray:
    return np.sort(rng.choice(lift, size=weight, replace=False))


def gen_protograph_lift(proto, lift: int, seed: int) -> MeasurementMatrix:
    """Lift a protomatrix by replacing each entry ``w`` with a weight-``w`` circulant.

    The first row of every circulant gets ``w`` distinct offsets drawn from
    ``numpy.random.default_rng(seed)``; row ``r`` is row 0 shifted right by ``r``.
    """
    proto = np.atleast_2d(np.asarray(proto, dtype=np.int64))
    if np.any(proto < 0):
        raise ValueError("protomatrix entries must be nonnegative")
    if lift < 1:
        raise ValueError("lift must be positive")
    if proto.size and proto.max() > lift:
        raise ValueError(f"lift {lift} too small for protomatrix entry {proto.max()}")
    rng = np.random.default_rng(seed)
    rows, cols = [], []
    r = np.arange(lift)
    for bi in range(proto.shape[0]):
        for bj in range(proto.shape[1]):
            w = int(proto[bi, bj])
            if w == 0:
                continue
            for off in circulant_offsets(w, lift, rng):
                rows.append(bi * lift + r)
                cols.append(bj * lift + (r + off) % lift)
    if not rows:
        raise ValueError("protomatrix has no nonzero entries")
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    m, n = proto.shape[0] * lift, proto.shape[1] * lift
    return MeasurementMatrix(m, n, rows, cols, np.ones(len(rows)))


def random_binary_matrix(m: int, n: int, degrees: Sequence[int], rng: np.random.Generator) -> MeasurementMatrix:
    """Random binary matrix, each column degree drawn uniformly from ``degrees``."""
    rows, cols = [], []
    for v in range(n):
        d = int(rng.choice(degrees))
        rows.extend(rng.choice(m, size=d, replace=False).tolist())
        cols.extend([v] * d)
    return MeasurementMatrix(m, n, rows, cols, np.ones(len(rows)))


@dataclass(frozen=True)
class Instance:
    matrix: MeasurementMatrix
    sets: dict[str, frozenset[int]]
    signal: np.ndarray | None = None


_FIGURES = {
    # fig1/fig2 use the 0-based labels of their drawings; fig5 is labelled from 1
    "fig1": (3, 7, [[0, 2, 4, 6], [1, 2, 5, 6], [3, 4, 5, 6]], {"T": {0, 1}, "S": {2}, "N": {0, 1}}),
    "fig2": (3, 7, [[0, 1, 4, 6], [1, 2, 5], [2, 3, 4, 5, 6]], {"T": {1, 2, 5}, "S": {0, 3, 4, 6}, "N": {0, 1, 2}}),
    "fig5": (4, 6, [[0, 1, 5], [0, 3, 4], [1, 2, 5], [2, 3, 4]], {"V_S": {0, 1, 2, 3}}),
}


def builtin_instance(name: str) -> Instance:
    """Small hand-drawn graphs: ``fig1``, ``fig2`` (termatiko examples), ``fig5`` (counter-example).

    ``fig5`` is stored 0-based, so its ``v1..v6`` are columns ``0..5`` and it
    comes with the signal ``(0,0,1,1,0,0)``.
    """
    try:
        m, n, chk, sets = _FIGURES[name]
    except KeyError:
        raise ValueError(f"unknown builtin instance {name!r}; choose from {sorted(_FIGURES)}") from None
    matrix = MeasurementMatrix.from_edges(m, n, [(c, v) for c, vs in enumerate(chk) for v in vs])
    signal = np.array([0, 0, 1, 1, 0, 0]) if name == "fig5" else None
    return Instance(matrix, {k: frozenset(v) for k, v in sets.items()}, signal)


BUILTINS = tuple(_FIGURES)
