"""Deterministic rough-path plumbing for bounded-variation drivers.

A two-component grid path is lifted by computing the second-level iterated
integrals of its piecewise-linear interpolant exactly: over one cell the
integral of ``(z^i - z^i_s) dz^j`` is ``(cell average of z^i minus left value)
times the z^j increment``, i.e. ``dz^i * dz^j / 2``. Second levels are stored
anchored at 0 and general increments recovered through Chen's relation, which
the piecewise-linear construction satisfies identically.

The skeleton controlled ODE treats the Stratonovich equation with
bounded-variation controls as a classical ODE (no rough integration is
performed numerically) and integrates it with a classical 4th-order one-step
method, 4 substeps per cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, GridMismatchError, InvalidInputError
from .grid import GridFunction, holder_norm
from .kernels import conv_weights
from .model import FunctionFamily, ModelSpec, eval_family, validate


@dataclass(frozen=True)
class YoungLift:
    """Two-component grid path with exact second-level iterated integrals.

    ``second[i, j, k]`` holds the (i, j) iterated integral over [0, t_k] of
    the piecewise-linear interpolants; increments over grid pairs come from
    :meth:`second_increment` via Chen's relation.
    """

    z1: GridFunction
    z2: GridFunction
    second: np.ndarray  # shape (2, 2, n+1)

    @property
    def n(self) -> int:
        return self.z1.n

    def _first(self, i: int) -> np.ndarray:
        return self.z1.values if i == 0 else self.z2.values

    def second_increment(self, a: int, b: int) -> np.ndarray:
        """2x2 array of second-level increments over [t_a, t_b], a <= b."""
        out = np.empty((2, 2))
        for i in range(2):
            zi = self._first(i)
            for j in range(2):
                zj = self._first(j)
                out[i, j] = (
                    self.second[i, j, b]
                    - self.second[i, j, a]
                    - (zi[a] - zi[0]) * (zj[b] - zj[a])
                )
        return out


def young_pair(z1: GridFunction, z2: GridFunction) -> YoungLift:
    """Lift (z1, z2) by the exact piecewise-linear cell rule.

    The (1,1) component uses the closed square formula, so the geometric
    convention ``half the squared increment`` holds identically.
    """
    if not z1.same_grid(z2):
        raise GridMismatchError("young_pair requires a shared grid")
    n = z1.n
    comps = (z1.values, z2.values)
    second = np.zeros((2, 2, n + 1))
    for i in range(2):
        zi = comps[i]
        dzi = np.diff(zi)
        for j in range(2):
            if i == 0 and j == 0:
                second[0, 0] = 0.5 * (zi - zi[0]) ** 2
                continue
            zj = comps[j]
            dzj = np.diff(zj)
            cell = (0.5 * dzi + (zi[:-1] - zi[0])) * dzj
            second[i, j, 1:] = np.cumsum(cell)
    return YoungLift(z1, z2, second)


def _direct_second(L: YoungLift, a: int, b: int) -> np.ndarray:
    """Recompute the second level over [t_a, t_b] from the paths themselves."""
    out = np.empty((2, 2))
    for i in range(2):
        zi = L._first(i)[a : b + 1]
        dzi = np.diff(zi)
        for j in range(2):
            zj = L._first(j)[a : b + 1]
            dzj = np.diff(zj)
            out[i, j] = float(np.sum((0.5 * dzi + (zi[:-1] - zi[0])) * dzj))
    return out


def chen_defect(L: YoungLift, max_triples: int = 64) -> float:
    """Worst Chen-relation defect over a deterministic sample of triples.

    For each triple (s, u, t) the outer and left increments come from the
    stored node-anchored values while the right one is recomputed directly
    from the paths, so the stored second level is actually exercised (pure
    Chen reconstruction would satisfy the relation for any stored numbers).
    Entrywise max of ``|Z_st - Z_su - Z_ut - z_su (x) z_ut|``.
    """
    n = L.n
    triples = [(0, k, n) for k in range(n + 1)]
    step = max(1, n // int(np.sqrt(max_triples)))
    for s in range(0, n - 1, step):
        for t in range(s + 2, n + 1, step):
            triples.append((s, (s + t) // 2, t))
    z = np.stack([L._first(0), L._first(1)])
    worst = 0.0
    for s, u, t in triples:
        z_su = z[:, u] - z[:, s]
        z_ut = z[:, t] - z[:, u]
        defect = (
            L.second_increment(s, t)
            - L.second_increment(s, u)
            - _direct_second(L, u, t)
            - np.outer(z_su, z_ut)
        )
        worst = max(worst, float(np.abs(defect).max()))
    return worst


@dataclass(frozen=True)
class YoungBoundReport:
    ratio: float
    young_constant: float
    alpha1: float
    alpha2: float

    @property
    def within_bound(self) -> bool:
        return self.ratio <= self.young_constant + 1e-9


def young_bound_check(L: YoungLift, alpha1: float, alpha2: float) -> YoungBoundReport:
    """Sharpness of the Young estimate on the (1,2) component.

    Computes ``R = max |Z12_st| / (|z1| |z2| |t-s|^(a1+a2))`` over grid pairs,
    with the Holder increment seminorms of the components; R should be O(1),
    bounded by the Young constant ``1 / (1 - 2^(1 - a1 - a2))``.
    """
    if not alpha1 + alpha2 > 1.0:
        raise InvalidInputError("young_bound_check needs alpha1 + alpha2 > 1")
    n = L.n
    dt = L.z1.dt
    sem1 = holder_norm(L.z1, alpha1) - abs(float(L.z1.values[0]))
    sem2 = holder_norm(L.z2, alpha2) - abs(float(L.z2.values[0]))
    if sem1 == 0.0 or sem2 == 0.0:
        return YoungBoundReport(
            0.0, 1.0 / (1.0 - 2.0 ** (1.0 - alpha1 - alpha2)), alpha1, alpha2
        )
    z1v, z2v = L.z1.values, L.z2.values
    s12 = L.second[0, 1]
    ratio = 0.0
    for s in range(n):
        t = np.arange(s + 1, n + 1)
        inc = s12[t] - s12[s] - (z1v[s] - z1v[0]) * (z2v[t] - z2v[s])
        gaps = (t - s) * dt
        ratio = max(ratio, float(np.abs(inc / gaps ** (alpha1 + alpha2)).max()))
    return YoungBoundReport(
        ratio / (sem1 * sem2),
        1.0 / (1.0 - 2.0 ** (1.0 - alpha1 - alpha2)),
        alpha1,
        alpha2,
    )


@dataclass(frozen=True)
class SkeletonResult:
    """Solution of the skeleton controlled ODE, started at 0."""

    y: GridFunction
    driver_stats: dict


def skeleton_solve(
    sigma1: FunctionFamily,
    sigma2: FunctionFamily,
    a: GridFunction,
    atilde: GridFunction,
    x: GridFunction,
    y0: float,
    substeps: int = 4,
) -> SkeletonResult:
    """Integrate ``y' = sigma1(y0+y) a(t) x'(t) + sigma2(y0+y) atilde(t)``.

    ``x'`` is the cell slope of the piecewise-linear x; a and atilde are
    interpolated linearly inside cells. Classical RK4 with ``substeps``
    stages per cell; the returned path starts at 0 (the caller owns y0).
    """
    if not (a.same_grid(atilde) and a.same_grid(x)):
        raise GridMismatchError("skeleton_solve requires a shared grid")
    if substeps < 1:
        raise InvalidInputError("substeps must be >= 1")
    n = x.n
    h = x.dt / substeps
    slopes = np.diff(x.values) / x.dt
    av, tv = a.values, atilde.values
    y = np.zeros(n + 1)
    cur = 0.0
    for cell in range(n):
        sl = slopes[cell]
        a0c, a1c = av[cell], av[cell + 1]
        t0c, t1c = tv[cell], tv[cell + 1]

        def rhs(theta, yy):
            # theta in [0, 1] is position inside the cell
            acur = a0c + (a1c - a0c) * theta
            tcur = t0c + (t1c - t0c) * theta
            return (
                eval_family(sigma1, y0 + yy) * acur * sl
                + eval_family(sigma2, y0 + yy) * tcur
            )

        for sub in range(substeps):
            th = sub / substeps
            dth = 1.0 / substeps
            k1 = rhs(th, cur)
            k2 = rhs(th + 0.5 * dth, cur + 0.5 * h * k1)
            k3 = rhs(th + 0.5 * dth, cur + 0.5 * h * k2)
            k4 = rhs(th + dth, cur + h * k3)
            cur = cur + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(cur):
            raise BlowUpError(f"skeleton state became non-finite in cell {cell}")
        y[cell + 1] = cur
    stats = {
        "x_holder_0.45": holder_norm(x, 0.45),
        "a_sup": float(np.abs(av).max()),
        "atilde_sup": float(np.abs(tv).max()),
    }
    return SkeletonResult(GridFunction(x.horizon, y), stats)


def short_time_skeleton(
    m: ModelSpec, w: GridFunction, wperp: GridFunction
) -> GridFunction:
    """Forward skeleton map of the short-time asymptotics.

    Returns ``sigma(Y0) * int_0^. f(Psi(a(A0) K0 w')_r, 0) dx_r`` with
    ``x = rho w + sqrt(1-rho^2) wperp`` and trapezoid quadrature against the
    increments of x. This is the map whose level sets define the pathwise
    rate; it is evaluated, never optimized over.
    """
    rep = validate(m)
    if not rep.ok:
        raise InvalidInputError("model invalid: " + "; ".join(rep.violations))
    if not w.same_grid(wperp):
        raise GridMismatchError("w and wperp must share a grid")
    from dataclasses import replace

    pure = replace(m.kernel, family="riemann_liouville")
    wmat = conv_weights(pure, w.n, w.horizon, targets="nodes")
    slopes = np.diff(w.values) / w.dt
    u = eval_family(m.a, m.a0) * (wmat @ slopes)
    vv = eval_family(m.psi, u)
    fv = eval_family(m.f, vv, 0.0)
    x = m.rho * w.values + np.sqrt(1.0 - m.rho**2) * wperp.values
    dx = np.diff(x)
    sigma0 = eval_family(m.sigma, m.y0)
    contrib = sigma0 * 0.5 * (fv[:-1] + fv[1:]) * dx
    out = np.concatenate(([0.0], np.cumsum(contrib)))
    return GridFunction(w.horizon, out)
