"""Batch command-line front end.

Commands: ``rate``, ``smile``, ``simulate``, ``validate``. JSON in (model
configs), CSV out (results); stdout carries summary lines (provenance lines
are ``#``-prefixed), stderr carries warnings. Exit codes are a stable
contract: 0 success, 1 validation-suite failure, 2 solver failure, 64 config
error.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import approx, kernels, lift, mc, rate
from .errors import (
    ConfigError,
    EstimatorError,
    InvalidInputError,
    OptimizationFailure,
    RoughSmileError,
)
from .grid import GridFunction, holder_norm
from .model import load_model, validate

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 64


def _load_valid_model(path):
    m = load_model(path)
    rep = validate(m)
    if not rep.ok:
        raise ConfigError("; ".join(rep.violations))
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return m


def _float_list(text: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}: {exc}") from exc
    if not vals:
        raise ConfigError(f"empty numeric list {text!r}")
    return vals


def cmd_rate(args) -> int:
    m = _load_valid_model(args.config)
    print(f"# rate config={args.config} z={args.z:g} n={args.n} tol={args.tol:g}")
    try:
        res = rate.solve_rate(m, args.z, n=args.n, tol=args.tol)
    except OptimizationFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"J={res.value:.12g}")
    print(
        f"# start={res.start_label} iterations={res.iterations} "
        f"grad_norm={res.grad_norm:.3g} converged={res.converged}"
    )
    if args.out:
        # control is piecewise constant on cells; t column is cell left edges
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write("t,value\n")
            dt = 1.0 / res.control.size
            for j, gj in enumerate(res.control):
                fh.write(f"{j * dt:.17g},{gj:.17g}\n")
    return EXIT_OK


def cmd_smile(args) -> int:
    m = _load_valid_model(args.config)
    if args.points < 2:
        raise ConfigError("smile needs --points >= 2")
    if not args.x_max > args.x_min:
        raise ConfigError("smile needs x_max > x_min")
    xs = np.linspace(args.x_min, args.x_max, args.points)
    print(
        f"# smile config={args.config} x=[{args.x_min:g},{args.x_max:g}] "
        f"points={args.points} n={args.n} tol={args.tol:g} threads={args.threads}"
    )
    try:
        table = rate.smile(m, xs, n=args.n, tol=args.tol, threads=args.threads)
    except OptimizationFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    table.to_csv(args.out)
    print(f"rows={table.x.size} out={args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    m = _load_valid_model(args.config)
    t_list = _float_list(args.t)
    x_list = _float_list(args.x)
    if any(x == 0.0 for x in x_list):
        raise ConfigError("simulate needs nonzero log-moneyness values")
    cfg = mc.MCConfig(
        n_paths=args.paths, n_steps=args.steps, seed=args.seed,
        maturities=tuple(t_list),
    )
    print(
        f"# simulate config={args.config} t={args.t} x={args.x} "
        f"paths={args.paths} steps={args.steps} seed={args.seed} n={args.n}"
    )
    def asym(x):
        return abs(x) / math.sqrt(2.0 * rate.lambda_star(m, x, n=args.n).value)

    try:
        if args.threads > 1 and len(x_list) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                sig_asym = dict(zip(x_list, pool.map(asym, x_list)))
        else:
            sig_asym = {x: asym(x) for x in x_list}
    except OptimizationFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if any(x > 0.0 for x in x_list):
        print(
            "warning: call-side rows assume the moment condition (unverified)",
            file=sys.stderr,
        )
    lines = ["t,x,p_hat,ci,rate_stat,price,impvol,gap"]
    for t in t_list:
        sample = mc.simulate_terminal(m, t, cfg)
        for x in x_list:
            est = mc.tail_estimate(sample, x)
            if est.rate_stat is None:
                print(
                    f"warning: zero or saturated tail cell at t={t:g} x={x:g}",
                    file=sys.stderr,
                )
            side = "put" if x < 0.0 else "call"
            pe = mc.price_estimate(sample, x, side)
            if pe.price > 0.0:
                iv = mc.implied_vol(pe.price, 1.0, pe.strike, t, side)
                gap = abs(iv - sig_asym[x]) / sig_asym[x]
                iv_s, gap_s = f"{iv:.17g}", f"{gap:.17g}"
            else:
                print(
                    f"warning: zero OTM hits at t={t:g} x={x:g}", file=sys.stderr
                )
                iv_s, gap_s = "", ""
            rs = "" if est.rate_stat is None else f"{est.rate_stat:.17g}"
            lines.append(
                f"{t:.17g},{x:.17g},{est.p_hat:.17g},{est.ci_halfwidth:.17g},"
                f"{rs},{pe.price:.17g},{iv_s},{gap_s}"
            )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        print(f"rows={len(lines) - 1} out={args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _validate_kernel(args) -> int:
    print("# validate kernel: scale invariance + Lipschitz-part convergence")
    rng = np.random.default_rng(args.seed)
    n = 256
    tt = np.linspace(0.0, 1.0, n + 1)
    paths = [
        GridFunction(1.0, np.cumsum(np.concatenate(([0.0], rng.normal(size=n)))) / np.sqrt(n)),
        GridFunction(1.0, tt**0.45),
    ]
    rl = kernels.riemann_liouville(0.3)
    worst = 0.0
    for path in paths:
        base = kernels.apply_k_path(rl, path)
        for eps in (1.0, 0.5, 0.1, 0.01):
            d = np.abs(kernels.apply_k_eps(rl, path, eps).values - base.values).max()
            worst = max(worst, float(d))
    print(f"riemann_liouville sup |K^eps - K| over eps ladder: {worst:.3g}")
    if worst > 1e-12:
        print(f"FAIL: scale invariance violated ({worst:.3g} > 1e-12)")
        return EXIT_VALIDATION
    gf = kernels.gamma_fractional(-0.2, -1.0)
    ladder = [1.0, 0.5, 0.25, 0.125, 1 / 16, 1 / 32, 1 / 64]
    rep = kernels.keps_convergence_report(gf, paths, ladder, gamma=gf.gamma)
    if args.out:
        rep.to_csv(args.out)
    for p in range(len(paths)):
        d = rep.distances(p)
        print(f"gamma_fractional path {p} distances: {np.array2string(d, precision=4)}")
        if not np.all(np.diff(d) < 0.0):
            print(f"FAIL: distances not decreasing for path {p}")
            return EXIT_VALIDATION
    if rep.any_violation:
        bad = next(r for r in rep.rows if r.violation)
        print(f"FAIL: envelope violation at path={bad.path_index} eps={bad.eps:g}")
        return EXIT_VALIDATION
    print("PASS")
    return EXIT_OK


def _validate_chen(args) -> int:
    print("# validate chen: lift defects on random piecewise-linear pairs")
    rng = np.random.default_rng(args.seed)
    n = 256
    worst_chen = worst_ibp = 0.0
    for _ in range(100):
        z1 = GridFunction(1.0, np.cumsum(np.concatenate(([0.0], rng.normal(size=n)))) / np.sqrt(n))
        z2 = GridFunction(1.0, np.cumsum(np.concatenate(([0.0], rng.normal(size=n)))) / np.sqrt(n))
        L = lift.young_pair(z1, z2)
        worst_chen = max(worst_chen, lift.chen_defect(L))
        prod = (z1.values[-1] - z1.values[0]) * (z2.values[-1] - z2.values[0])
        ibp = abs(L.second[0, 1, -1] + L.second[1, 0, -1] - prod)
        worst_ibp = max(worst_ibp, float(ibp))
    print(f"max chen defect: {worst_chen:.3g}; max integration-by-parts defect: {worst_ibp:.3g}")
    if worst_chen >= 1e-10 or worst_ibp >= 1e-10:
        print("FAIL: defect at or above 1e-10")
        return EXIT_VALIDATION
    print("PASS")
    return EXIT_OK


def _validate_gdelta(args) -> int:
    print("# validate gdelta: stopping-time approximation of the smooth pair")
    n = 1024
    tt = np.linspace(0.0, 1.0, n + 1)
    a = GridFunction(1.0, np.sin(2.0 * np.pi * tt))
    x = GridFunction(1.0, tt + np.sin(4.0 * np.pi * tt) / 4.0)
    tol = 0.02 * holder_norm(x, 0.3)
    rep = approx.gdelta_convergence(a, x, 0.3, [0.5, 0.25, 0.1, 0.05, 0.02], tolerance=tol)
    if args.out:
        rep.to_csv(args.out)
    for d, v in zip(rep.deltas, rep.distances):
        print(f"delta={d:g} holder_dist={v:.6g}")
    if not rep.monotone:
        print("FAIL: distance column is not nonincreasing (5% slack)")
        return EXIT_VALIDATION
    if not rep.final_ok:
        print(f"FAIL: final distance {rep.distances[-1]:.6g} above {tol:.6g}")
        return EXIT_VALIDATION
    print("PASS")
    return EXIT_OK


def _validate_uet(args) -> int:
    print("# validate uet: Gaussian-tail fit for stopped-integral Holder norms")
    cfg = mc.MCConfig(n_paths=20_000, n_steps=256, seed=args.seed)
    rep = mc.uet_tail_experiment(
        0.4,
        [0.5, 0.2, 0.1],
        [0.8, 1.0, 1.2, 1.5, 1.9, 2.4, 3.0],
        integrands=("sign_switch", "clipped_brownian"),
        cfg=cfg,
    )
    if args.out:
        rep.to_csv(args.out)
    status = EXIT_OK
    for name, fit in rep.fits.items():
        print(
            f"{name}: slope={fit.slope:.4g} r2={fit.r_squared:.4g} cells={fit.n_cells}"
        )
        if not (fit.r_squared >= 0.9 and fit.slope < 0.0):
            print(f"FAIL: {name} tail is not Gaussian-shaped (need r2>=0.9, slope<0)")
            status = EXIT_VALIDATION
    if status == EXIT_OK:
        print("PASS")
    return status


def cmd_validate(args) -> int:
    runner = {
        "kernel": _validate_kernel,
        "chen": _validate_chen,
        "gdelta": _validate_gdelta,
        "uet": _validate_uet,
    }[args.suite]
    return runner(args)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad usage is a config error, not exit 2
        self.print_usage(sys.stderr)
        print(f"config error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="roughsmile",
        description="Rate functions and short-maturity smiles for rough volatility models",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("rate", help="solve the rate function at one target")
    pr.add_argument("--config", required=True)
    pr.add_argument("--z", type=float, required=True)
    pr.add_argument("--n", type=int, default=rate.DEFAULT_N)
    pr.add_argument("--tol", type=float, default=rate.DEFAULT_TOL)
    pr.add_argument("--out", default=None, help="CSV of the optimal control")
    pr.set_defaults(func=cmd_rate)

    ps = sub.add_parser("smile", help="asymptotic smile table over an x grid")
    ps.add_argument("--config", required=True)
    ps.add_argument("--x-min", dest="x_min", type=float, required=True)
    ps.add_argument("--x-max", dest="x_max", type=float, required=True)
    ps.add_argument("--points", type=int, required=True)
    ps.add_argument("--n", type=int, default=rate.DEFAULT_N)
    ps.add_argument("--tol", type=float, default=rate.DEFAULT_TOL)
    ps.add_argument("--threads", type=int, default=1)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_smile)

    pm = sub.add_parser("simulate", help="MC tails, prices and implied vols")
    pm.add_argument("--config", required=True)
    pm.add_argument("--t", required=True, help="comma-separated maturities")
    pm.add_argument("--x", required=True, help="comma-separated log-moneyness values")
    pm.add_argument("--paths", type=int, default=200_000)
    pm.add_argument("--steps", type=int, default=500)
    pm.add_argument("--seed", type=int, default=0)
    pm.add_argument("--n", type=int, default=rate.DEFAULT_N)
    pm.add_argument("--threads", type=int, default=1)
    pm.add_argument("--out", default=None)
    pm.set_defaults(func=cmd_simulate)

    pv = sub.add_parser("validate", help="run a module validation suite")
    pv.add_argument("suite", choices=("kernel", "chen", "gdelta", "uet"))
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--out", default=None)
    pv.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OptimizationFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (EstimatorError, RoughSmileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
