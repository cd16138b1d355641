"""Uniform-grid paths with discrete Holder norms and moduli.

A :class:`GridFunction` samples a real function at the n+1 nodes ``i*T/n`` of
``[0, T]``. The discrete Holder norm is ``|x_0|`` plus the max of
``|x_j - x_i| / (t_j - t_i)**alpha`` over all grid pairs, i.e. it is exact on
the grid rather than subsampled; cost is O(n^2), so the pairwise scans refuse
grids beyond ``NORM_CELL_CAP`` cells.

Unless an operation states otherwise, integrand-like data attached to cells is
interpreted as piecewise constant from the left endpoint (the Ito convention
used throughout the package).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._accel import max_weighted_increment
from .errors import GridMismatchError, InvalidInputError

# Pairwise norm scans are exact over all O(n^2) grid pairs; cap the cell count
# so a report cannot silently swallow the CPU.
NORM_CELL_CAP = 4096


@dataclass(frozen=True)
class GridFunction:
    """Real-valued function sampled on the uniform grid of ``[0, horizon]``.

    Parameters
    ----------
    horizon : float
        Right endpoint T of the time interval, strictly positive.
    values : array_like
        n+1 finite values at the nodes ``i*T/n``, n >= 1.
    """

    horizon: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 2:
            raise InvalidInputError("values must be a 1-d sequence of length >= 2")
        if not np.isfinite(vals).all():
            raise InvalidInputError("values must be finite")
        if not (np.isfinite(self.horizon) and self.horizon > 0.0):
            raise InvalidInputError("horizon must be positive and finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def n(self) -> int:
        """Number of grid cells."""
        return self.values.size - 1

    @property
    def dt(self) -> float:
        return self.horizon / self.n

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n + 1)

    def same_grid(self, other: "GridFunction") -> bool:
        return self.n == other.n and self.horizon == other.horizon

    def _check_same_grid(self, other: "GridFunction"):
        if not self.same_grid(other):
            raise GridMismatchError(
                f"grids differ: (n={self.n}, T={self.horizon}) vs "
                f"(n={other.n}, T={other.horizon})"
            )

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_grid(other)
            return GridFunction(self.horizon, self.values + other.values)
        return GridFunction(self.horizon, self.values + float(other))

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_grid(other)
            return GridFunction(self.horizon, self.values - other.values)
        return GridFunction(self.horizon, self.values - float(other))

    def __mul__(self, scalar):
        return GridFunction(self.horizon, self.values * float(scalar))

    __rmul__ = __mul__


def _check_alpha(alpha: float):
    if not (0.0 < alpha <= 1.0):
        raise InvalidInputError(f"alpha must be in (0, 1], got {alpha}")


def _check_cap(x: GridFunction):
    if x.n > NORM_CELL_CAP:
        raise InvalidInputError(
            f"pairwise norm scan refused for n={x.n} > {NORM_CELL_CAP} cells"
        )


def _lag_weights(x: GridFunction, alpha: float, max_lag: int) -> np.ndarray:
    lags = np.arange(1, max_lag + 1, dtype=np.float64)
    return (lags * x.dt) ** (-alpha)


def holder_norm(x: GridFunction, alpha: float) -> float:
    """Discrete alpha-Holder norm: |x_0| + sup of increment ratios.

    The sup runs over all grid pairs i < j of
    ``|x_j - x_i| / (t_j - t_i)**alpha``; exact on the grid, O(n^2).
    """
    _check_alpha(alpha)
    _check_cap(x)
    w = _lag_weights(x, alpha, x.n)
    return abs(float(x.values[0])) + float(max_weighted_increment(x.values, w))


def holder_dist(x: GridFunction, y: GridFunction, alpha: float) -> float:
    """Holder norm of the pointwise difference x - y (grids must match)."""
    x._check_same_grid(y)
    return holder_norm(x - y, alpha)


def modulus(x: GridFunction, alpha: float, delta: float) -> float:
    """Window modulus: sup of increment ratios over pairs with t_j - t_i <= delta."""
    _check_alpha(alpha)
    _check_cap(x)
    if not (0.0 < delta <= x.horizon):
        raise InvalidInputError(f"delta must be in (0, horizon], got {delta}")
    # Floating slack so delta == k*dt admits lag k exactly.
    max_lag = min(x.n, int(np.floor(delta / x.dt * (1.0 + 1e-12))))
    if max_lag < 1:
        return 0.0
    w = _lag_weights(x, alpha, max_lag)
    return float(max_weighted_increment(x.values, w))


def resample(x: GridFunction, m: int) -> GridFunction:
    """Piecewise-linear resample of x onto an m-cell grid, same horizon."""
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    new_times = np.linspace(0.0, x.horizon, m + 1)
    return GridFunction(x.horizon, np.interp(new_times, x.times, x.values))


def write_csv(x: GridFunction, path):
    """Serialize as two columns ``t,value`` at full double precision."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("t,value\n")
        for t, v in zip(x.times, x.values):
            fh.write(f"{t:.17g},{v:.17g}\n")


def read_csv(path) -> GridFunction:
    """Read a GridFunction written by :func:`write_csv`."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 2:
        raise InvalidInputError(f"{path}: not a t,value table")
    t, v = data[:, 0], data[:, 1]
    horizon = float(t[-1])
    gf = GridFunction(horizon, v)
    if not np.allclose(t, gf.times, rtol=0.0, atol=1e-12 * max(1.0, horizon)):
        raise InvalidInputError(f"{path}: time column is not a uniform grid")
    return gf
