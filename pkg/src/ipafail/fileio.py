"""Readers and writers for matrix and signal files.

alist (MacKay) for binary matrices, a ``j i value`` triple list for weighted
ones, and one-value-per-line CSV for signals. Indices in files are 1-based.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .tanner import MatrixError, MeasurementMatrix


class FormatError(ValueError):
    def __init__(self, path, lineno, msg):
        self.path, self.lineno = path, lineno
        where = f"{path}:{lineno}" if lineno else str(path)
        super().__init__(f"{where}: {msg}")


def _int_tokens(path, lineno, line, expect=None):
    try:
        vals = [int(t) for t in line.split()]
    except ValueError:
        raise FormatError(path, lineno, f"expected integers, got {line.strip()!r}") from None
    if expect is not None and len(vals) != expect:
        raise FormatError(path, lineno, f"expected {expect} integers, got {len(vals)}")
    return vals


def read_alist(path) -> MeasurementMatrix:
    path = Path(path)
    lines = [(i + 1, ln) for i, ln in enumerate(path.read_text().splitlines()) if ln.strip()]
    if len(lines) < 4:
        raise FormatError(path, len(lines), "truncated alist header")
    it = iter(lines)

    def nxt():
        try:
            return next(it)
        except StopIteration:
            raise FormatError(path, None, "unexpected end of file") from None

    lineno, ln = nxt()
    n, m = _int_tokens(path, lineno, ln, 2)
    if n < 1 or m < 0:
        raise FormatError(path, lineno, f"bad dimensions n={n} m={m}")
    lineno, ln = nxt()
    max_cd, max_rd = _int_tokens(path, lineno, ln, 2)
    lineno, ln = nxt()
    col_deg = _int_tokens(path, lineno, ln, n)
    if any(d < 1 for d in col_deg):
        raise FormatError(path, lineno, "column degree must be at least 1")
    if max(col_deg) != max_cd:
        raise FormatError(path, lineno, f"max column degree {max(col_deg)} != declared {max_cd}")
    lineno, ln = nxt()
    row_deg = _int_tokens(path, lineno, ln, m) if m else []
    if m and max(row_deg) != max_rd:
        raise FormatError(path, lineno, f"max row degree {max(row_deg)} != declared {max_rd}")

    col_edges = set()
    for v in range(n):
        lineno, ln = nxt()
        idx = [j for j in _int_tokens(path, lineno, ln) if j != 0]
        if len(idx) != col_deg[v]:
            raise FormatError(path, lineno, f"column {v + 1} lists {len(idx)} rows, degree is {col_deg[v]}")
        for j in idx:
            if not 1 <= j <= m:
                raise FormatError(path, lineno, f"row index {j} out of range 1..{m}")
            col_edges.add((j - 1, v))
    row_edges = set()
    for c in range(m):
        lineno, ln = nxt()
        idx = [i for i in _int_tokens(path, lineno, ln) if i != 0]
        if len(idx) != row_deg[c]:
            raise FormatError(path, lineno, f"row {c + 1} lists {len(idx)} columns, degree is {row_deg[c]}")
        for i in idx:
            if not 1 <= i <= n:
                raise FormatError(path, lineno, f"column index {i} out of range 1..{n}")
            row_edges.add((c, i - 1))
    if col_edges != row_edges:
        raise FormatError(path, lineno, "column and row lists describe different matrices")
    if len(col_edges) != sum(col_deg):
        raise FormatError(path, None, "duplicate indices in column lists")
    return MeasurementMatrix.from_edges(m, n, sorted(col_edges))


def alist_text(matrix: MeasurementMatrix) -> str:
    if not matrix.binary:
        raise MatrixError("alist holds binary matrices only; use the weighted format")
    g = matrix.graph
    cd, rd = g.var_degree(), g.chk_degree()
    out = [f"{matrix.n} {matrix.m}", f"{cd.max()} {rd.max() if matrix.m else 0}",
           " ".join(map(str, cd)), " ".join(map(str, rd))]
    for v in range(matrix.n):
        idx = (g.var_neighbors(v) + 1).tolist()
        out.append(" ".join(map(str, idx + [0] * (cd.max() - len(idx)))))
    for c in range(matrix.m):
        idx = (g.chk_neighbors(c) + 1).tolist()
        out.append(" ".join(map(str, idx + [0] * (rd.max() - len(idx)))))
    return "\n".join(out) + "\n"


def write_alist(matrix: MeasurementMatrix, path) -> None:
    Path(path).write_text(alist_text(matrix))


def read_weighted(path) -> MeasurementMatrix:
    path = Path(path)
    rows = []
    header = None
    for lineno, ln in enumerate(path.read_text().splitlines(), 1):
        if not ln.strip() or ln.lstrip().startswith("#"):
            continue
        parts = ln.split()
        if header is None:
            header = _int_tokens(path, lineno, ln, 3)
            continue
        if len(parts) != 3:
            raise FormatError(path, lineno, "expected 'j i value'")
        try:
            j, i, a = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(path, lineno, f"cannot parse {ln.strip()!r}") from None
        if not (1 <= j <= header[0] and 1 <= i <= header[1]):
            raise FormatError(path, lineno, f"index ({j}, {i}) out of range")
        if not a > 0:
            raise FormatError(path, lineno, "values must be strictly positive")
        rows.append((j - 1, i - 1, a))
    if header is None:
        raise FormatError(path, None, "missing 'm n nnz' header")
    m, n, nnz = header
    if len(rows) != nnz:
        raise FormatError(path, None, f"header declares {nnz} entries, found {len(rows)}")
    r, c, v = zip(*rows) if rows else ((), (), ())
    try:
        return MeasurementMatrix(m, n, list(r), list(c), list(v))
    except MatrixError as e:
        raise FormatError(path, None, str(e)) from None


def weighted_text(matrix: MeasurementMatrix) -> str:
    out = [f"{matrix.m} {matrix.n} {matrix.nnz}"]
    out += [f"{j + 1} {i + 1} {a!r}" for j, i, a in matrix.entries()]
    return "\n".join(out) + "\n"


def write_weighted(matrix: MeasurementMatrix, path) -> None:
    Path(path).write_text(weighted_text(matrix))


def read_matrix(path, weighted: bool = False) -> MeasurementMatrix:
    return read_weighted(path) if weighted else read_alist(path)


def read_signal(path, n: int | None = None) -> np.ndarray:
    path = Path(path)
    vals = []
    for lineno, ln in enumerate(path.read_text().splitlines(), 1):
        tok = ln.strip().rstrip(",")
        if not tok:
            continue
        try:
            vals.append(float(tok))
        except ValueError:
            raise FormatError(path, lineno, f"not a number: {tok!r}") from None
        if vals[-1] < 0 or not np.isfinite(vals[-1]):
            raise FormatError(path, lineno, "signal values must be finite and nonnegative")
    if n is not None and len(vals) != n:
        raise FormatError(path, None, f"signal has {len(vals)} values, matrix has n={n}")
    x = np.array(vals)
    if np.all(np.mod(x, 1) == 0):
        return x.astype(np.int64)
    return x


def format_vector(x) -> str:
    x = np.asarray(x)
    if x.dtype.kind in "iu":
        return "\n".join(map(str, x.tolist()))
    return "\n".join(repr(float(v)) for v in x)


def write_signal(x, path) -> None:
    Path(path).write_text(format_vector(x) + "\n")
