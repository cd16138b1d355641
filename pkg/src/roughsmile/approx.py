"""Stopping-time piecewise-constant approximation of a stochastic integral.

Given an integrand path a and threshold delta, the integrand is frozen at its
value at the last stopping time ``tau_k = first node after tau_{k-1} with
|a - a(tau_{k-1})| > delta``; integrating the frozen integrand against x
left-point reproduces the telescoping sum

    sum_k a(tau_{k-1}) (x(t ^ tau_k) - x(t ^ tau_{k-1}))

exactly at every grid node. Stopping times are snapped to grid nodes (the
continuum infimum between nodes is not interpolated) and the frozen integrand
switches anchors AT the trigger node, so ``|a - frozen(a)| <= delta`` holds at
every node: inside an interval the threshold has not yet been crossed, and at
the trigger the anchor is already the new one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, InvalidInputError
from .grid import GridFunction, holder_dist


@dataclass(frozen=True)
class StoppingPartition:
    """Threshold-crossing partition of the grid."""

    delta: float
    taus: np.ndarray  # stopping times (grid nodes), starting at 0, ending at T
    indices: np.ndarray  # node indices of the taus


def stopping_times(a: GridFunction, delta: float) -> StoppingPartition:
    """Greedy left-to-right threshold scan over grid nodes."""
    if not delta > 0.0:
        raise InvalidInputError("delta must be positive")
    vals = a.values
    n = a.n
    idx = [0]
    anchor = 0
    j = 1
    while j <= n:
        if abs(vals[j] - vals[anchor]) > delta:
            idx.append(j)
            anchor = j
        j += 1
    if idx[-1] != n:
        idx.append(n)
    indices = np.asarray(idx, dtype=np.int64)
    return StoppingPartition(float(delta), indices * a.dt, indices)


def frozen_integrand(a: GridFunction, delta: float) -> np.ndarray:
    """Cell values of the anchor-frozen integrand (left-point on each cell)."""
    part = stopping_times(a, delta)
    cells = np.arange(a.n)
    # anchor of cell j = last stopping node <= t_j
    pos = np.searchsorted(part.indices, cells, side="right") - 1
    return a.values[part.indices[pos]]


def stieltjes_left(a: GridFunction, x: GridFunction) -> GridFunction:
    """Left-point Riemann-Stieltjes sum of ``int a dx`` at every node."""
    if not a.same_grid(x):
        raise GridMismatchError("stieltjes_left requires a shared grid")
    inc = a.values[:-1] * np.diff(x.values)
    return GridFunction(a.horizon, np.concatenate(([0.0], np.cumsum(inc))))


def g_delta(a: GridFunction, x: GridFunction, delta: float) -> GridFunction:
    """Stopping-time approximation of ``int a dx`` at every grid node."""
    if not a.same_grid(x):
        raise GridMismatchError("g_delta requires a shared grid")
    psi = frozen_integrand(a, delta)
    inc = psi * np.diff(x.values)
    return GridFunction(a.horizon, np.concatenate(([0.0], np.cumsum(inc))))


@dataclass(frozen=True)
class GdeltaReport:
    """Holder distances of the approximation along a delta ladder."""

    deltas: np.ndarray
    distances: np.ndarray
    beta: float
    tolerance: float | None

    @property
    def monotone(self) -> bool:
        """Nonincreasing along the ladder, with 5% slack per step."""
        d = self.distances
        return bool(np.all(d[1:] <= d[:-1] * 1.05 + 1e-15))

    @property
    def final_ok(self) -> bool:
        return self.tolerance is None or self.distances[-1] <= self.tolerance

    @property
    def passed(self) -> bool:
        return self.monotone and self.final_ok

    def to_csv(self, path):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("delta,holder_dist\n")
            for d, v in zip(self.deltas, self.distances):
                fh.write(f"{d:.17g},{v:.17g}\n")


def gdelta_convergence(
    a: GridFunction,
    x: GridFunction,
    beta: float,
    delta_ladder,
    tolerance: float | None = None,
) -> GdeltaReport:
    """Distances to the left-point Stieltjes integral along a delta ladder.

    The reference integral uses the same left-point convention, so the only
    difference is the integrand freezing; the distance column should fall
    (up to 5% slack) as delta shrinks and end below ``tolerance`` if given.
    """
    if not (0.0 < beta < 1.0):
        raise InvalidInputError("beta must be in (0, 1)")
    deltas = np.asarray([float(d) for d in delta_ladder])
    if deltas.size == 0 or np.any(np.diff(deltas) >= 0.0):
        raise InvalidInputError("delta ladder must be nonempty and decreasing")
    ref = stieltjes_left(a, x)
    dists = np.array(
        [holder_dist(g_delta(a, x, d), ref, beta) for d in deltas]
    )
    return GdeltaReport(deltas, dists, beta, tolerance)
