"""Monte Carlo simulation of the rough volatility model and its diagnostics.

Scheme: per path, i.i.d. normal increments drive the pair (W, Wperp); the
volatility driver A takes explicit Euler steps; the convolved driver at all
nodes comes from the kernel-averaged weights (exact cell integrals of the
power part, left-point increments), shared with the rate solver; the log
price Y takes explicit Ito steps. Rare-event probabilities are plain Monte
Carlo with explicit flags, no importance sampling; acceptance of limit
statements is therefore phrased as trends.

Reproducibility: paths are simulated in fixed-size batches of ``BATCH``;
batch b of logical stream s draws from ``Philox(key=seed, counter=[0, b, s,
0])``, so every path's substream is a pure function of (seed, path index) and
results are bitwise independent of how batches are scheduled. Estimator
reductions run in batch order with numpy's pairwise summation. Terminal
samples reuse stream 0 for every maturity (common random numbers across the
maturity ladder, which smooths trend diagnostics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import rate as rate_mod
from ._accel import batch_max_weighted_increment
from .errors import EstimatorError, InvalidInputError
from .kernels import conv_weights
from .model import ModelSpec, eval_family, validate

BATCH = 4096


@dataclass(frozen=True)
class MCConfig:
    """Simulation size, seed and variance-reduction switches."""

    n_paths: int = 200_000
    n_steps: int = 500
    maturities: tuple = ()
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths < 1000:
            raise InvalidInputError("n_paths must be >= 1000 for CI estimators")
        if self.n_steps < 50:
            raise InvalidInputError("n_steps must be >= 50")
        if any(not (0.0 < t <= 1.0) for t in self.maturities):
            raise InvalidInputError("maturities must lie in (0, 1]")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidInputError("seed must be a 64-bit unsigned integer")


def _batch_rng(seed: int, stream: int, batch: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=int(seed), counter=[0, int(batch), int(stream), 0])
    )


def _batch_sizes(n_paths: int):
    sizes = [BATCH] * (n_paths // BATCH)
    if n_paths % BATCH:
        sizes.append(n_paths % BATCH)
    return sizes


def _normals(rng, size: int, n_steps: int, columns: int, antithetic: bool):
    if antithetic:
        half = (size + 1) // 2
        z = rng.standard_normal((half, n_steps, columns))
        return np.concatenate([z, -z], axis=0)[:size]
    return rng.standard_normal((size, n_steps, columns))


@dataclass(frozen=True)
class TerminalSample:
    """Terminal log returns of one simulation, with exclusion accounting."""

    y: np.ndarray  # kept terminal values of Y_t
    t: float
    y0: float
    mu: float
    n_excluded: int
    n_requested: int


def simulate_terminal(m: ModelSpec, t: float, cfg: MCConfig) -> TerminalSample:
    """Simulate terminal values Y_t of the model by the convolution scheme.

    Deterministic given (model, t, cfg): same seed gives bitwise-identical
    output for any batch scheduling. Non-finite paths are excluded and
    counted; an exclusion rate above 0.1% raises :class:`EstimatorError`.
    """
    rep = validate(m)
    if not rep.ok:
        raise InvalidInputError("model invalid: " + "; ".join(rep.violations))
    if not (0.0 < t <= 1.0):
        raise InvalidInputError("maturity t must lie in (0, 1]")

    n = cfg.n_steps
    dt = t / n
    sqdt = math.sqrt(dt)
    rho = m.rho
    rho_perp = math.sqrt(1.0 - rho * rho)
    f_constant = m.f.tag == "constant"
    if not f_constant:
        wk = conv_weights(m.kernel, n, horizon=t, targets="nodes") / dt
        wk_t = np.ascontiguousarray(wk.T)
    times = np.arange(n) * dt

    out = []
    excluded = 0
    # non-finite states are excluded after the fact; keep the loops quiet
    with np.errstate(over="ignore", invalid="ignore"):
        for b, size in enumerate(_batch_sizes(cfg.n_paths)):
            out.append(_terminal_batch(m, cfg, b, size, n, dt, sqdt, rho, rho_perp,
                                       f_constant, None if f_constant else wk_t, times))
    yt = np.concatenate(out)
    keep = np.isfinite(yt)
    excluded = int((~keep).sum())
    if excluded > 0.001 * cfg.n_paths:
        raise EstimatorError(
            f"{excluded} of {cfg.n_paths} paths became non-finite (> 0.1%)"
        )
    return TerminalSample(yt[keep], float(t), m.y0, m.kernel.mu, excluded, cfg.n_paths)


def _terminal_batch(m, cfg, b, size, n, dt, sqdt, rho, rho_perp, f_constant, wk_t, times):
    z = _normals(_batch_rng(cfg.seed, 0, b), size, n, 2, cfg.antithetic)
    dw = sqdt * z[:, :, 0]
    dx = rho * dw + rho_perp * sqdt * z[:, :, 1]

    if f_constant:
        v = None
    else:
        a_state = np.full(size, m.a0)
        da = np.empty((size, n))
        for k in range(n):
            da[:, k] = (
                eval_family(m.b, a_state, times[k]) * dt
                + eval_family(m.a, a_state, times[k]) * dw[:, k]
            )
            a_state = a_state + da[:, k]
        v = eval_family(m.psi, da @ wk_t)  # (size, n+1)

    y = np.full(size, m.y0)
    for k in range(n):
        sig = eval_family(m.sigma, y)
        fv = eval_family(m.f, v[:, k] if v is not None else y, times[k])
        if f_constant:
            fv = np.broadcast_to(np.asarray(fv), y.shape)
        amp = sig * fv
        y = y + amp * dx[:, k] - 0.5 * amp * amp * dt
    return y


@dataclass(frozen=True)
class TailEstimate:
    """Empirical scaled-return tail probability and its rate statistic."""

    t: float
    x: float
    p_hat: float
    ci_halfwidth: float
    rate_stat: float | None
    n_hits: int
    n_paths: int

    @property
    def degenerate(self) -> bool:
        """No hits or all hits: the rate statistic is undefined."""
        return self.rate_stat is None


def tail_estimate(sample: TerminalSample, x: float) -> TailEstimate:
    """Tail estimate from an existing terminal sample (x != 0)."""
    if x == 0.0:
        raise InvalidInputError("tail threshold x must be nonzero")
    scaled = sample.t**sample.mu * (sample.y - sample.y0)
    hits = int((scaled >= x).sum()) if x > 0.0 else int((scaled <= x).sum())
    n = sample.y.size
    p = hits / n
    ci = 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n)
    rate_stat = None
    if 0.0 < p < 1.0:
        rate_stat = -(sample.t ** (2.0 * sample.mu + 1.0)) * math.log(p)
    return TailEstimate(sample.t, float(x), p, ci, rate_stat, hits, n)


def tail_prob(m: ModelSpec, t: float, x: float, cfg: MCConfig) -> TailEstimate:
    """P(t^mu (Y_t - Y_0) beyond x) by plain Monte Carlo."""
    return tail_estimate(simulate_terminal(m, t, cfg), x)


@dataclass(frozen=True)
class PriceEstimate:
    """Monte Carlo OTM option price with a normal-approximation CI."""

    t: float
    x: float
    side: str
    strike: float
    price: float
    ci_halfwidth: float
    n_paths: int
    moment_caveat: bool  # call-side prices assume an unverified moment bound


def price_estimate(sample: TerminalSample, x: float, side: str) -> PriceEstimate:
    """Option price from an existing terminal sample (OTM convention)."""
    if side not in ("put", "call"):
        raise InvalidInputError("side must be 'put' or 'call'")
    if side == "put" and x > 0.0:
        raise InvalidInputError("put side requires log-moneyness x <= 0")
    if side == "call" and x < 0.0:
        raise InvalidInputError("call side requires log-moneyness x >= 0")
    strike = math.exp(x * sample.t ** (-sample.mu))
    s = np.exp(sample.y - sample.y0)  # S_t with S_0 = 1
    payoff = np.maximum(strike - s, 0.0) if side == "put" else np.maximum(s - strike, 0.0)
    n = payoff.size
    price = float(payoff.mean())
    ci = 1.96 * float(payoff.std(ddof=1)) / math.sqrt(n)
    return PriceEstimate(sample.t, float(x), side, strike, price, ci, n, side == "call")


def option_price(m: ModelSpec, t: float, x: float, side: str, cfg: MCConfig) -> PriceEstimate:
    """OTM put/call price at strike exp(x * t^-mu), S_0 = 1."""
    return price_estimate(simulate_terminal(m, t, cfg), x, side)


def _bs_total(spot: float, strike: float, total_vol: float, side: str) -> float:
    """Zero-rate Black-Scholes price in total volatility (allows 0)."""
    if total_vol <= 0.0:
        intrinsic = spot - strike if side == "call" else strike - spot
        return max(intrinsic, 0.0)
    d1 = math.log(spot / strike) / total_vol + 0.5 * total_vol
    d2 = d1 - total_vol
    if side == "call":
        return spot * float(ndtr(d1)) - strike * float(ndtr(d2))
    return strike * float(ndtr(-d2)) - spot * float(ndtr(-d1))


def bs_price(spot: float, strike: float, vol_sqrt_t: float, side: str) -> float:
    """Zero-rate Black-Scholes price; ``vol_sqrt_t`` is sigma * sqrt(t)."""
    if side not in ("put", "call"):
        raise InvalidInputError("side must be 'put' or 'call'")
    if spot <= 0.0 or strike <= 0.0 or vol_sqrt_t <= 0.0:
        raise InvalidInputError("spot, strike and vol_sqrt_t must be positive")
    return _bs_total(spot, strike, vol_sqrt_t, side)


def implied_vol(price: float, spot: float, strike: float, t: float, side: str) -> float:
    """Invert Black-Scholes by bisection on total volatility.

    Bisection to 1e-10 in total vol, at most 200 iterations; returns the
    annualized volatility. A price at the intrinsic lower bound returns 0.
    """
    if side not in ("put", "call"):
        raise InvalidInputError("side must be 'put' or 'call'")
    if spot <= 0.0 or strike <= 0.0 or t <= 0.0:
        raise InvalidInputError("spot, strike and t must be positive")
    intrinsic = max(spot - strike if side == "call" else strike - spot, 0.0)
    upper = spot if side == "call" else strike
    if price < intrinsic - 1e-12 or price >= upper:
        from .errors import InversionError

        raise InversionError(
            f"price {price} outside no-arbitrage bounds [{intrinsic}, {upper})"
        )
    if price <= intrinsic:
        return 0.0
    lo, hi = 0.0, 1.0
    while _bs_total(spot, strike, hi, side) < price:
        hi *= 2.0
        if hi > 1e6:  # cannot happen inside the bounds, defensive
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _bs_total(spot, strike, mid, side) < price:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    return 0.5 * (lo + hi) / math.sqrt(t)


@dataclass(frozen=True)
class SmileMCRow:
    x: float
    t: float
    strike: float
    price: float
    ci_halfwidth: float
    impvol: float | None
    sigma_asym: float
    rel_gap: float | None
    zero_hits: bool
    moment_caveat: bool


@dataclass(frozen=True)
class SmileMCReport:
    rows: tuple

    def gaps(self, x: float) -> list:
        return [r.rel_gap for r in self.rows if r.x == x and r.rel_gap is not None]

    def gaps_nonincreasing(self, x: float, slack: float = 1.05) -> bool:
        """Trend flag: gaps shrink (up to slack) as the maturity ladder falls."""
        g = self.gaps(x)
        return all(b <= a * slack for a, b in zip(g, g[1:]))

    def to_csv(self, path):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("x,t,strike,price,ci,impvol,sigma_asym,rel_gap,flag\n")
            for r in self.rows:
                iv = "" if r.impvol is None else f"{r.impvol:.17g}"
                gap = "" if r.rel_gap is None else f"{r.rel_gap:.17g}"
                flags = []
                if r.zero_hits:
                    flags.append("zero_hits")
                if r.moment_caveat:
                    flags.append("moment_caveat")
                fh.write(
                    f"{r.x:.17g},{r.t:.17g},{r.strike:.17g},{r.price:.17g},"
                    f"{r.ci_halfwidth:.17g},{iv},{r.sigma_asym:.17g},{gap},"
                    f"{'+'.join(flags)}\n"
                )


def smile_convergence_report(
    m: ModelSpec,
    x_grid,
    maturities,
    cfg: MCConfig,
    n: int = rate_mod.DEFAULT_N,
    span: float = 0.5,
    points: int = 8,
) -> SmileMCReport:
    """Implied vols from MC prices against the asymptotic smile level.

    For each (x, t): price the OTM option at strike exp(x * t^-mu), invert to
    an implied vol and compare with ``|x| / sqrt(2 * tail_rate(x))``. Rows
    with zero OTM hits are flagged and carry no gap; call-side rows carry the
    moment-condition caveat flag. One terminal sample per maturity is shared
    across the whole x grid.
    """
    xs = [float(x) for x in x_grid if float(x) != 0.0]
    if not xs:
        raise InvalidInputError("x grid must contain nonzero entries")
    sigma_a = {
        x: abs(x)
        / math.sqrt(2.0 * rate_mod.lambda_star(m, x, n=n, span=span, points=points).value)
        for x in xs
    }
    rows = []
    for t in maturities:
        sample = simulate_terminal(m, float(t), cfg)
        for x in xs:
            side = "put" if x < 0.0 else "call"
            est = price_estimate(sample, x, side)
            if est.price <= 0.0:
                rows.append(
                    SmileMCRow(
                        x, float(t), est.strike, est.price, est.ci_halfwidth,
                        None, sigma_a[x], None, True, est.moment_caveat,
                    )
                )
                continue
            iv = implied_vol(est.price, 1.0, est.strike, float(t), side)
            gap = abs(iv - sigma_a[x]) / sigma_a[x]
            rows.append(
                SmileMCRow(
                    x, float(t), est.strike, est.price, est.ci_halfwidth,
                    iv, sigma_a[x], gap, False, est.moment_caveat,
                )
            )
    return SmileMCReport(tuple(rows))


_INTEGRANDS = ("sign_switch", "clipped_brownian", "unit")


@dataclass(frozen=True)
class UetCell:
    integrand: str
    eps: float
    K: float
    p_hat: float
    n_hits: int
    n_paths: int


@dataclass(frozen=True)
class UetFit:
    slope: float
    intercept: float
    r_squared: float
    n_cells: int


@dataclass(frozen=True)
class UetReport:
    cells: tuple
    fits: dict  # integrand -> UetFit
    alpha: float

    def to_csv(self, path):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("integrand,eps,K,p_hat\n")
            for c in self.cells:
                fh.write(f"{c.integrand},{c.eps:.17g},{c.K:.17g},{c.p_hat:.17g}\n")


def _integrand_values(name: str, b_nodes: np.ndarray) -> np.ndarray:
    """Left-node integrand values; all bounded by 1 and adapted."""
    left = b_nodes[:, :-1]
    if name == "unit":
        return np.ones_like(left)
    if name == "sign_switch":
        u = np.sign(left)
        u[u == 0.0] = 1.0
        return u
    if name == "clipped_brownian":
        return np.clip(left, -1.0, 1.0)
    raise InvalidInputError(f"unknown integrand {name!r}; known: {_INTEGRANDS}")


def uet_tail_experiment(
    alpha: float,
    eps_ladder,
    K_ladder,
    integrands=("sign_switch", "clipped_brownian"),
    cfg: MCConfig = MCConfig(n_paths=20_000, n_steps=256),
) -> UetReport:
    """Gaussian-tail experiment for Holder norms of stopped integrals.

    For each bounded adapted integrand U (sup |U| <= 1) and each eps, the
    left-point integral of U against the sqrt(eps)-scaled Brownian driver is
    simulated on the [0, 1] grid and the grid alpha-Holder norm recorded;
    ``p_hat(eps, K)`` estimates the norm exceeding K. Per integrand, log
    p_hat is regressed on K^2/eps over cells with 0 < p_hat < 1 (zero-hit and
    saturated cells are excluded); a uniform Gaussian tail shows up as a
    negative slope with high R^2.
    """
    if not (1.0 / 3.0 <= alpha < 0.5):
        raise InvalidInputError("alpha must lie in [1/3, 1/2)")
    eps_ladder = [float(e) for e in eps_ladder]
    K_ladder = [float(k) for k in K_ladder]
    if not eps_ladder or not K_ladder:
        raise InvalidInputError("ladders must be nonempty")
    for name in integrands:
        if name not in _INTEGRANDS:
            raise InvalidInputError(f"unknown integrand {name!r}; known: {_INTEGRANDS}")

    n = cfg.n_steps
    dt = 1.0 / n
    sqdt = math.sqrt(dt)
    lags = np.arange(1, n + 1, dtype=np.float64)
    lag_weights = (lags * dt) ** (-alpha)

    cells = []
    fits = {}
    for i_idx, name in enumerate(integrands):
        pts_x, pts_y = [], []
        for e_idx, eps in enumerate(eps_ladder):
            stream = 1 + i_idx * len(eps_ladder) + e_idx
            norms = []
            for b, size in enumerate(_batch_sizes(cfg.n_paths)):
                z = _normals(_batch_rng(cfg.seed, stream, b), size, n, 1, cfg.antithetic)
                db = sqdt * z[:, :, 0]
                b_nodes = np.concatenate(
                    [np.zeros((size, 1)), np.cumsum(db, axis=1)], axis=1
                )
                u = _integrand_values(name, b_nodes)
                integral = math.sqrt(eps) * np.concatenate(
                    [np.zeros((size, 1)), np.cumsum(u * db, axis=1)], axis=1
                )
                norms.append(
                    batch_max_weighted_increment(
                        np.ascontiguousarray(integral), lag_weights
                    )
                )
            norms = np.concatenate(norms)
            for K in K_ladder:
                hits = int((norms >= K).sum())
                p = hits / norms.size
                cells.append(UetCell(name, eps, K, p, hits, norms.size))
                if 0.0 < p < 1.0:
                    pts_x.append(K * K / eps)
                    pts_y.append(math.log(p))
        if len(pts_x) >= 2:
            px, py = np.asarray(pts_x), np.asarray(pts_y)
            slope, intercept = np.polyfit(px, py, 1)
            resid = py - (slope * px + intercept)
            sstot = float(((py - py.mean()) ** 2).sum())
            r2 = 1.0 - float((resid**2).sum()) / sstot if sstot > 0.0 else 0.0
            fits[name] = UetFit(float(slope), float(intercept), r2, px.size)
        else:
            fits[name] = UetFit(math.nan, math.nan, math.nan, len(pts_x))
    return UetReport(tuple(cells), fits, alpha)
