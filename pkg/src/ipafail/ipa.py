"""Interval-passing reconstruction of nonnegative signals.

Every coordinate carries a lower and an upper bound. Measurement nodes
tighten the bounds of their neighbours from the others' bounds, and variable
nodes keep the tightest interval they hear. The output is the vector of
lower bounds at the fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .tanner import MeasurementMatrix, measure

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class IntervalState:
    """Messages after ``iteration`` rounds.

    ``lower``/``upper`` are the variable-to-measurement bounds, one per
    variable because they do not depend on the receiving node. ``edge_lower``
    and ``edge_upper`` are the measurement-to-variable bounds indexed like
    ``TannerGraph`` edges; they are ``None`` for the initial state.
    """

    iteration: int
    lower: np.ndarray
    upper: np.ndarray
    edge_lower: np.ndarray | None
    edge_upper: np.ndarray | None


@dataclass(frozen=True)
class IpaResult:
    x_hat: np.ndarray
    upper: np.ndarray
    iterations: int
    converged: bool
    exact: bool
    trace: list[IntervalState] | None = None


@dataclass(frozen=True)
class RecoveryTrace:
    """Per-iteration sets of variables whose lower (``gamma``) or upper
    (``Gamma``) bound equals the true value."""

    gamma: list[frozenset[int]]
    Gamma: list[frozenset[int]]

    def __len__(self):
        return len(self.gamma)

    def padded(self, length: int) -> "RecoveryTrace":
        """Extend with copies of the final fixed-point state."""
        extra = length - len(self)
        if extra <= 0:
            return self
        return RecoveryTrace(self.gamma + [self.gamma[-1]] * extra, self.Gamma + [self.Gamma[-1]] * extra)


def _is_integral(a) -> bool:
    a = np.asarray(a)
    return a.dtype.kind in "iub" or bool(np.all(np.mod(a, 1) == 0))


def ipa(y, matrix: MeasurementMatrix, *, max_iter: int | None = None, tol: float = DEFAULT_TOL,
        trace: bool = False) -> IpaResult:
    """Run interval passing on measurements ``y`` of ``matrix``.

    Uses a flooding schedule: all measurement-to-variable messages, then all
    variable-to-measurement messages. For a binary matrix and integral ``y``
    every message is an integer and the stop rule is exact equality; ``tol``
    only applies to real-valued instances. ``max_iter`` defaults to ``10 * n``.
    """
    y = np.asarray(y)
    if y.shape != (matrix.m,):
        raise ValueError(f"measurement length {y.shape} does not match m={matrix.m}")
    if not np.all(np.isfinite(y.astype(np.float64))):
        raise ValueError("measurements must be finite")
    if max_iter is None:
        max_iter = 10 * matrix.n
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    exact = matrix.binary and _is_integral(y)
    if exact and np.abs(y).max(initial=0) >= 2 ** 52:
        raise ValueError("measurements too large for exact arithmetic")
    g = matrix.graph
    lo, hi, it, converged, lo_h, hi_h, elo_h, ehi_h = _kernels.ipa_kernel(
        g.chk_ptr, g.edge_var, g.edge_chk, g.edge_val, g.var_ptr, g.var_edges,
        y.astype(np.float64), int(max_iter), 0.0 if exact else float(tol), bool(matrix.binary), bool(trace))

    # on the exact path every message is an integer held exactly in a double
    conv = (lambda a: a.astype(np.int64)) if exact else (lambda a: a)
    states = None
    if trace:
        states = [
            IntervalState(ell, conv(lo_h[ell]), conv(hi_h[ell]),
                          None if ell == 0 else conv(elo_h[ell]),
                          None if ell == 0 else conv(ehi_h[ell]))
            for ell in range(it + 1)
        ]
    return IpaResult(conv(lo), conv(hi), int(it), bool(converged), exact, states)


def _equal_mask(a, x, exact, tol):
    if exact:
        return np.asarray(a) == np.asarray(x)
    return np.abs(np.asarray(a, dtype=np.float64) - np.asarray(x, dtype=np.float64)) <= tol


def ipa_recovered_positions(x, matrix: MeasurementMatrix, *, max_iter: int | None = None,
                            tol: float = DEFAULT_TOL) -> frozenset[int]:
    """Positions ``v`` where reconstruction from ``A x`` returns ``x_v``."""
    x = np.asarray(x)
    res = ipa(measure(matrix, x), matrix, max_iter=max_iter, tol=tol)
    exact = res.exact and _is_integral(x)
    return frozenset(np.flatnonzero(_equal_mask(res.x_hat, x, exact, tol)).tolist())


def recovery_trace(x, matrix: MeasurementMatrix, *, max_iter: int | None = None,
                   tol: float = DEFAULT_TOL) -> RecoveryTrace:
    x = np.asarray(x)
    res = ipa(measure(matrix, x), matrix, max_iter=max_iter, tol=tol, trace=True)
    exact = res.exact and _is_integral(x)
    gam, Gam = [], []
    for st in res.trace:
        gam.append(frozenset(np.flatnonzero(_equal_mask(st.lower, x, exact, tol)).tolist()))
        Gam.append(frozenset(np.flatnonzero(_equal_mask(st.upper, x, exact, tol)).tolist()))
    return RecoveryTrace(gam, Gam)
