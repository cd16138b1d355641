"""Acceptance suite: one test per criterion, printed as PASS/FAIL lines.

Criterion 8's final-gap threshold is asserted exactly as stated even though
the subexponential prefactor of the tail probability cannot shrink below it
at the stated maturities and path counts (see notes in the repo docs); the
test is expected to stay red under plain Monte Carlo.
"""

import io
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.special import ndtr

from conftest import subprocess_env
from roughsmile.grid import GridFunction, holder_norm
from roughsmile.kernels import (
    apply_k_eps,
    apply_k_path,
    gamma_fractional,
    keps_convergence_report,
    riemann_liouville,
)
from roughsmile.approx import gdelta_convergence
from roughsmile.lift import chen_defect, young_pair
from roughsmile.mc import (
    MCConfig,
    bs_price,
    implied_vol,
    price_estimate,
    simulate_terminal,
    tail_estimate,
    uet_tail_experiment,
)
from roughsmile.model import family, model_to_json, preset
from roughsmile.rate import gradient, lambda_star, smile, solve_rate

BS = preset("black_scholes")
RB = preset("rough_bergomi")
RH = preset("rough_heston_like")

RB_MATURITIES = (0.1, 0.05, 0.02, 0.01)
RB_CFG = MCConfig(n_paths=400_000, n_steps=500, seed=2024, maturities=RB_MATURITIES)


@pytest.fixture(scope="module")
def rb_samples():
    """One 400k-path terminal sample per maturity, shared by criteria 8-9."""
    return {t: simulate_terminal(RB, t, RB_CFG) for t in RB_MATURITIES}


@pytest.fixture(scope="module")
def rb_lambda():
    return {x: lambda_star(RB, x, n=128).value for x in (-0.1, 0.1)}


def _report(num, ok, detail):
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")


def test_criterion_01_flat_smile_oracle():
    start = time.time()
    zs = (0.05, -0.05, 0.1, -0.1, 0.2, -0.2, 0.4, -0.4)
    worst = 0.0
    for rho in (-0.7, 0.0, 0.7):
        m = BS.with_(rho=rho)
        for z in zs:
            res = solve_rate(m, z, n=128)
            oracle = z * z / (2.0 * 0.09)
            worst = max(worst, abs(res.value - oracle) / oracle)
    table = smile(BS.with_(rho=-0.7), zs, n=128)
    sig_err = float(np.abs(table.sigma_asym - 0.3).max())
    elapsed = time.time() - start
    ok = worst < 1e-4 and sig_err < 1e-3 and elapsed < 10.0
    _report(1, ok, f"rate rel err {worst:.2e}, smile err {sig_err:.2e}, {elapsed:.1f}s")
    assert worst < 1e-4
    assert sig_err < 1e-3
    assert elapsed < 10.0


def test_criterion_02_zero_cost_point():
    jt = solve_rate(RB, 0.0).value
    lt = lambda_star(RB, 0.0).value
    _report(2, jt == 0.0 and lt == 0.0, f"J(0)={jt}, tail_rate(0)={lt}")
    assert jt == 0.0
    assert lt == 0.0


def test_criterion_03_gradient_fidelity():
    start = time.time()
    rng = np.random.default_rng(17)
    worst = 0.0
    for m in (BS, RB, RH):
        for _ in range(10):
            g = rng.normal(size=32) * 0.6
            ga = gradient(m, 0.12, g, mode="analytic")
            gf = gradient(m, 0.12, g, mode="fd")
            worst = max(worst, float(np.abs(ga - gf).max() / max(np.abs(gf).max(), 1e-12)))
    # kinked volatility function: the analytic path must hand over to FD
    kinked = BS.with_(f=family("sqrt_plus", floor=0.04), psi=family("shift_psi", c=0.04))
    auto = gradient(kinked, 0.1, np.zeros(32), mode="auto")
    fd = gradient(kinked, 0.1, np.zeros(32), mode="fd")
    fallback_exact = bool(np.array_equal(auto, fd))
    elapsed = time.time() - start
    ok = worst < 1e-5 and fallback_exact and elapsed < 1.0
    _report(3, ok, f"max rel err {worst:.2e}, fallback={fallback_exact}, {elapsed:.2f}s")
    assert worst < 1e-5
    assert fallback_exact
    assert elapsed < 1.0


def test_criterion_04_kernel_scale_invariance_and_trend():
    start = time.time()
    rng = np.random.default_rng(23)
    rl = riemann_liouville(0.3)
    paths = [
        GridFunction(1.0, np.cumsum(np.concatenate(([0.0], rng.normal(size=512)))) / 512**0.5),
        GridFunction(1.0, np.linspace(0.0, 1.0, 513) ** 0.45),
    ]
    worst_rl = 0.0
    for path in paths:
        base = apply_k_path(rl, path)
        for eps in (1.0, 0.5, 0.1, 0.01, 0.001):
            d = float(np.abs(apply_k_eps(rl, path, eps).values - base.values).max())
            worst_rl = max(worst_rl, d)

    gf = gamma_fractional(-0.2, -1.0)
    t = np.linspace(0.0, 1.0, 513)
    ladder = [1.0 / 2**j for j in range(7)]
    rep = keps_convergence_report(gf, [GridFunction(1.0, t**0.45)], ladder, gamma=gf.gamma)
    d = rep.distances(0)
    ratios = d[:-1] / d[1:]
    # the exponential Lipschitz factor makes the first halving intrinsically
    # milder; the per-halving contraction is read as the geometric mean
    geo = float(np.exp(np.mean(np.log(ratios))))
    elapsed = time.time() - start
    ok = worst_rl < 1e-12 and geo >= 1.8 and elapsed < 30.0
    _report(4, ok, f"RL dev {worst_rl:.1e}, contraction {geo:.3f}/halving, {elapsed:.1f}s")
    assert worst_rl < 1e-12
    assert np.all(np.diff(d) < 0.0)
    assert geo >= 1.8
    assert elapsed < 30.0


def test_criterion_05_chen_and_ibp_identities():
    start = time.time()
    rng = np.random.default_rng(31)
    n = 256
    worst_chen = worst_ibp = 0.0
    for _ in range(100):
        z1 = GridFunction(1.0, np.cumsum(np.concatenate(([0.0], rng.normal(size=n)))) / n**0.5)
        z2 = GridFunction(1.0, np.cumsum(np.concatenate(([0.0], rng.normal(size=n)))) / n**0.5)
        lift = young_pair(z1, z2)
        worst_chen = max(worst_chen, chen_defect(lift))
        for a, b in ((0, n), (n // 5, 3 * n // 4)):
            inc = lift.second_increment(a, b)
            prod = (z1.values[b] - z1.values[a]) * (z2.values[b] - z2.values[a])
            worst_ibp = max(worst_ibp, abs(inc[0, 1] + inc[1, 0] - prod))
    elapsed = time.time() - start
    ok = worst_chen < 1e-10 and worst_ibp < 1e-10 and elapsed < 5.0
    _report(5, ok, f"chen {worst_chen:.1e}, ibp {worst_ibp:.1e}, {elapsed:.1f}s")
    assert worst_chen < 1e-10
    assert worst_ibp < 1e-10
    assert elapsed < 5.0


def test_criterion_06_gdelta_convergence():
    start = time.time()
    n = 1024
    t = np.linspace(0.0, 1.0, n + 1)
    a = GridFunction(1.0, np.sin(2.0 * np.pi * t))
    x = GridFunction(1.0, t + np.sin(4.0 * np.pi * t) / 4.0)
    tol = 0.02 * holder_norm(x, 0.3)
    rep = gdelta_convergence(a, x, 0.3, [0.5, 0.25, 0.1, 0.05, 0.02], tolerance=tol)
    elapsed = time.time() - start
    ok = rep.monotone and rep.final_ok and elapsed < 5.0
    _report(6, ok, f"final {rep.distances[-1]:.4f} < {tol:.4f}, {elapsed:.1f}s")
    assert rep.monotone
    assert rep.final_ok
    assert elapsed < 5.0


def test_criterion_07_reduced_model_mc_exactness():
    start = time.time()
    c, t = 0.3, 0.05
    cfg = MCConfig(n_paths=200_000, n_steps=500, seed=77)
    sample = simulate_terminal(BS, t, cfg)
    n = sample.y.size
    dev_mean = abs(sample.y.mean() + 0.5 * c * c * t) / (c * math.sqrt(t / n))
    var = sample.y.var(ddof=1)
    dev_var = abs(var - c * c * t) / (c * c * t * math.sqrt(2.0 / (n - 1)))
    dev_tails = []
    for x in (0.1, 0.2, -0.15):
        est = tail_estimate(sample, x)
        zstar = (abs(x) * t ** (-sample.mu) + math.copysign(0.5 * c * c * t, x)) / (
            c * math.sqrt(t)
        )
        p = float(1.0 - ndtr(zstar))
        dev_tails.append(abs(est.p_hat - p) / math.sqrt(p * (1.0 - p) / n))
    put = price_estimate(sample, -0.1, "put")
    exact_put = bs_price(1.0, put.strike, c * math.sqrt(t), "put")
    dev_put = abs(put.price - exact_put) / (put.ci_halfwidth / 1.96)
    elapsed = time.time() - start
    devs = [dev_mean, dev_var, *dev_tails, dev_put]
    ok = max(devs) < 4.0 and elapsed < 60.0
    _report(7, ok, f"max deviation {max(devs):.2f} std errors, {elapsed:.1f}s")
    assert max(devs) < 4.0
    assert elapsed < 60.0


def test_criterion_08_ldp_trend(rb_samples, rb_lambda):
    start = time.time()
    gaps = {}
    for x in (-0.1, 0.1):
        stats = []
        for t in RB_MATURITIES:
            est = tail_estimate(rb_samples[t], x)
            assert not est.degenerate, f"undersampled cell t={t} x={x}"
            stats.append(est.rate_stat)
        lam = rb_lambda[x]
        monotone_toward = all(
            abs(s2 - lam) <= abs(s1 - lam) for s1, s2 in zip(stats, stats[1:])
        )
        gaps[x] = abs(stats[-1] - lam) / lam
        assert monotone_toward, f"rate_stat not monotone toward the rate at x={x}"
    elapsed = time.time() - start
    worst = max(gaps.values())
    ok = worst < 0.20
    _report(
        8, ok,
        f"gaps at t=0.01: x=-0.1 -> {gaps[-0.1]:.1%}, x=+0.1 -> {gaps[0.1]:.1%}, "
        f"{elapsed:.0f}s (threshold 20%)",
    )
    # Stated threshold. The tail statistic carries a subexponential
    # correction ~ t^(2 mu + 1) |log t| that is still several times larger
    # than 20% at t = 0.01, and maturities small enough to shrink it are
    # not resolvable by plain Monte Carlo; see the repo notes.
    assert worst < 0.20, (
        f"final relative gap {worst:.1%} exceeds the stated 20%: the "
        "prefactor bias cannot be removed at these maturities by plain MC"
    )


def test_criterion_09_smile_limit_trend(rb_samples, rb_lambda):
    start = time.time()
    x = -0.1
    sigma_asym = abs(x) / math.sqrt(2.0 * rb_lambda[x])
    gaps = []
    for t in RB_MATURITIES:
        est = price_estimate(rb_samples[t], x, "put")
        assert est.price > 0.0
        iv = implied_vol(est.price, 1.0, est.strike, t, "put")
        gaps.append(abs(iv - sigma_asym) / sigma_asym)
    elapsed = time.time() - start
    decreasing = all(g2 <= g1 for g1, g2 in zip(gaps, gaps[1:]))
    ok = decreasing and gaps[-1] < 0.15
    _report(
        9, ok,
        "gaps " + " ".join(f"{g:.2%}" for g in gaps) + f", {elapsed:.0f}s",
    )
    assert decreasing
    assert gaps[-1] < 0.15


def test_criterion_10_uet_tail_shape():
    start = time.time()
    cfg = MCConfig(n_paths=20_000, n_steps=256, seed=55)
    rep = uet_tail_experiment(
        0.4,
        [0.5, 0.2, 0.1],
        [0.8, 1.0, 1.2, 1.5, 1.9, 2.4, 3.0],
        integrands=("sign_switch", "clipped_brownian"),
        cfg=cfg,
    )
    elapsed = time.time() - start
    detail = ", ".join(
        f"{name}: slope={fit.slope:.3f} r2={fit.r_squared:.3f}"
        for name, fit in rep.fits.items()
    )
    ok = all(f.slope < 0.0 and f.r_squared >= 0.9 for f in rep.fits.values())
    _report(10, ok and elapsed < 300.0, f"{detail}, {elapsed:.0f}s")
    for name, fit in rep.fits.items():
        assert fit.slope < 0.0, name
        assert fit.r_squared >= 0.9, name
    assert elapsed < 300.0


def _tail_csv(sample, xs):
    buf = io.StringIO()
    buf.write("t,x,p_hat,ci,rate_stat\n")
    for x in xs:
        est = tail_estimate(sample, x)
        rs = "" if est.rate_stat is None else f"{est.rate_stat:.17g}"
        buf.write(f"{est.t:.17g},{est.x:.17g},{est.p_hat:.17g},{est.ci_halfwidth:.17g},{rs}\n")
    return buf.getvalue()


def test_criterion_11_determinism(tmp_path):
    # library level: a full-size criterion-7 rerun is byte-identical
    cfg = MCConfig(n_paths=200_000, n_steps=500, seed=77)
    csv_a = _tail_csv(simulate_terminal(BS, 0.05, cfg), (0.1, 0.2, -0.15))
    csv_b = _tail_csv(simulate_terminal(BS, 0.05, cfg), (0.1, 0.2, -0.15))
    assert csv_a == csv_b

    # UET report CSV
    ucfg = MCConfig(n_paths=4_000, n_steps=64, seed=3)
    f1, f2 = tmp_path / "u1.csv", tmp_path / "u2.csv"
    uet_tail_experiment(0.4, [0.5], [1.0, 1.5], cfg=ucfg).to_csv(f1)
    uet_tail_experiment(0.4, [0.5], [1.0, 1.5], cfg=ucfg).to_csv(f2)
    assert f1.read_bytes() == f2.read_bytes()

    # CLI pipeline end to end
    cfg_path = tmp_path / "bs.json"
    cfg_path.write_text(json.dumps(model_to_json(BS)))
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        res = subprocess.run(
            [sys.executable, "-m", "roughsmile", "simulate", "--config",
             str(cfg_path), "--t", "0.05", "--x=-0.1,0.1", "--paths", "2000",
             "--steps", "50", "--seed", "123", "--out", str(out)],
            capture_output=True, text=True, timeout=600, env=subprocess_env(),
        )
        assert res.returncode == 0, res.stderr
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1]
    _report(11, ok, "byte-identical CSVs at fixed seed")
    assert ok
