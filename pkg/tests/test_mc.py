import math

import numpy as np
import pytest
from scipy.special import ndtr

from roughsmile.errors import EstimatorError, InvalidInputError, InversionError
from roughsmile.mc import (
    MCConfig,
    bs_price,
    implied_vol,
    option_price,
    price_estimate,
    simulate_terminal,
    smile_convergence_report,
    tail_estimate,
    tail_prob,
    uet_tail_experiment,
)
from roughsmile.model import family, preset

BS = preset("black_scholes")
RB = preset("rough_bergomi")
FAST = MCConfig(n_paths=20_000, n_steps=100, seed=42)


@pytest.fixture(scope="module")
def bs_sample():
    return simulate_terminal(BS, 0.05, FAST)


class TestMCConfig:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            MCConfig(n_paths=100)
        with pytest.raises(InvalidInputError):
            MCConfig(n_steps=10)
        with pytest.raises(InvalidInputError):
            MCConfig(maturities=(1.5,))
        with pytest.raises(InvalidInputError):
            MCConfig(seed=-1)


class TestSimulateTerminal:
    def test_deterministic(self):
        a = simulate_terminal(BS, 0.05, FAST)
        b = simulate_terminal(BS, 0.05, FAST)
        np.testing.assert_array_equal(a.y, b.y)

    def test_seed_matters(self):
        other = MCConfig(n_paths=20_000, n_steps=100, seed=43)
        a = simulate_terminal(BS, 0.05, FAST)
        b = simulate_terminal(BS, 0.05, other)
        assert not np.array_equal(a.y, b.y)

    def test_gaussian_moments(self, bs_sample):
        # reduced model: Y_t ~ N(y0 - c^2 t / 2, c^2 t)
        c, t = 0.3, 0.05
        n = bs_sample.y.size
        se_mean = c * math.sqrt(t) / math.sqrt(n)
        assert abs(bs_sample.y.mean() + 0.5 * c * c * t) < 4.0 * se_mean
        var = bs_sample.y.var(ddof=1)
        se_var = c * c * t * math.sqrt(2.0 / (n - 1))
        assert abs(var - c * c * t) < 4.0 * se_var

    def test_gaussian_tails(self, bs_sample):
        c, t, mu = 0.3, 0.05, BS.kernel.mu
        for x in (0.1, 0.2, -0.15):
            est = tail_estimate(bs_sample, x)
            zstar = (abs(x) * t ** (-mu) + math.copysign(0.5 * c * c * t, x)) / (
                c * math.sqrt(t)
            )
            p_exact = float(1.0 - ndtr(zstar))
            se = math.sqrt(p_exact * (1.0 - p_exact) / bs_sample.y.size)
            assert abs(est.p_hat - p_exact) < 4.0 * se

    def test_symmetry_at_zero_rho(self):
        # uncorrelated noise: terminal law is a variance mixture of normals,
        # each symmetric about its own drift; skewness is near 0
        m = RB.with_(rho=0.0, f=family("bergomi_f", xi=0.04, eta=0.5, H=0.3))
        s = simulate_terminal(m, 0.05, FAST)
        y = s.y - s.y.mean()
        skew = (y**3).mean() / (y**2).mean() ** 1.5
        assert abs(skew) < 4.0 * math.sqrt(6.0 / y.size)

    def test_antithetic_deterministic(self):
        cfg = MCConfig(n_paths=10_000, n_steps=64, seed=9, antithetic=True)
        a = simulate_terminal(BS, 0.1, cfg)
        b = simulate_terminal(BS, 0.1, cfg)
        np.testing.assert_array_equal(a.y, b.y)

    def test_step_doubling_self_consistent(self):
        for m in (BS, RB, preset("rough_heston_like")):
            p1 = tail_prob(m, 0.05, 0.1, MCConfig(n_paths=20_000, n_steps=100, seed=5))
            p2 = tail_prob(m, 0.05, 0.1, MCConfig(n_paths=20_000, n_steps=200, seed=5))
            assert abs(p1.p_hat - p2.p_hat) < 2.0 * (p1.ci_halfwidth + p2.ci_halfwidth)

    def test_maturity_domain(self):
        with pytest.raises(InvalidInputError):
            simulate_terminal(BS, 1.5, FAST)

    def test_blowup_paths_raise_estimator_error(self):
        exploding = RB.with_(b=family("linear", m=500.0, c=0.0), a0=1.0)
        with pytest.raises(EstimatorError):
            simulate_terminal(exploding, 0.1, MCConfig(n_paths=1000, n_steps=50, seed=1))


class TestTailEstimate:
    def test_zero_threshold_rejected(self, bs_sample):
        with pytest.raises(InvalidInputError):
            tail_estimate(bs_sample, 0.0)

    def test_zero_hits_flagged(self, bs_sample):
        est = tail_estimate(bs_sample, 5.0)
        assert est.p_hat == 0.0
        assert est.rate_stat is None and est.degenerate

    def test_rate_stat_value(self, bs_sample):
        est = tail_estimate(bs_sample, 0.1)
        expected = -(0.05 ** (2.0 * BS.kernel.mu + 1.0)) * math.log(est.p_hat)
        assert est.rate_stat == pytest.approx(expected, rel=1e-12)


class TestOptionPrice:
    def test_put_matches_black_scholes(self, bs_sample):
        c, t = 0.3, 0.05
        est = price_estimate(bs_sample, -0.1, "put")
        exact = bs_price(1.0, est.strike, c * math.sqrt(t), "put")
        assert abs(est.price - exact) < 4.0 * est.ci_halfwidth / 1.96

    def test_atm_price_sane(self, bs_sample):
        est = price_estimate(bs_sample, 0.0, "call")
        s_mean = float(np.exp(bs_sample.y).mean())
        assert 0.0 < est.price < s_mean + 1.0

    def test_put_call_parity_atm(self, bs_sample):
        # (S-K)+ - (K-S)+ = S - K pathwise; at x=0 both sides are admissible
        call = price_estimate(bs_sample, 0.0, "call")
        put = price_estimate(bs_sample, 0.0, "put")
        s = np.exp(bs_sample.y)
        se = float(s.std(ddof=1)) / math.sqrt(s.size)
        assert abs((call.price - put.price) - (1.0 - call.strike)) < 3.0 * se

    def test_otm_side_preconditions(self, bs_sample):
        with pytest.raises(InvalidInputError):
            price_estimate(bs_sample, 0.1, "put")
        with pytest.raises(InvalidInputError):
            price_estimate(bs_sample, -0.1, "call")
        with pytest.raises(InvalidInputError):
            price_estimate(bs_sample, 0.1, "straddle")

    def test_call_carries_caveat(self, bs_sample):
        assert price_estimate(bs_sample, 0.1, "call").moment_caveat
        assert not price_estimate(bs_sample, -0.1, "put").moment_caveat

    def test_option_price_entrypoint(self):
        est = option_price(BS, 0.05, -0.1, "put", FAST)
        assert est.price > 0.0

    def test_put_price_log_rate_drifts_toward_tail_rate(self):
        # -t^(2mu+1) log(price) approaches the tail rate from above as the
        # maturity shrinks (trend check; the limit itself sits beyond plain MC)
        from roughsmile.rate import lambda_star

        lam = lambda_star(RB, -0.1, n=64).value
        cfg = MCConfig(n_paths=30_000, n_steps=100, seed=19)
        mu = RB.kernel.mu
        stats = []
        for t in (0.1, 0.05, 0.02, 0.01):
            pe = price_estimate(simulate_terminal(RB, t, cfg), -0.1, "put")
            stats.append(-(t ** (2.0 * mu + 1.0)) * math.log(pe.price))
        assert all(
            abs(s2 - lam) < abs(s1 - lam) for s1, s2 in zip(stats, stats[1:])
        )


class TestBsPrice:
    def test_atm_call_value(self):
        # 2 Phi(0.1) - 1 via the erfc representation of the normal CDF
        expected = math.erfc(-0.1 / math.sqrt(2.0)) - 1.0
        assert bs_price(1.0, 1.0, 0.2, "call") == pytest.approx(expected, abs=1e-12)
        assert bs_price(1.0, 1.0, 0.2, "call") == pytest.approx(0.0796557, abs=5e-8)

    def test_otm_vanishes_with_vol(self):
        assert bs_price(1.0, 1.2, 1e-9, "call") < 1e-12
        assert bs_price(1.0, 0.8, 1e-9, "put") < 1e-12

    def test_put_call_parity(self):
        for k in (0.7, 1.0, 1.3):
            lhs = bs_price(1.0, k, 0.35, "call") - bs_price(1.0, k, 0.35, "put")
            assert lhs == pytest.approx(1.0 - k, abs=1e-12)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            bs_price(-1.0, 1.0, 0.2, "call")
        with pytest.raises(InvalidInputError):
            bs_price(1.0, 1.0, 0.0, "call")


class TestImpliedVol:
    def test_roundtrip(self):
        p = bs_price(1.0, 1.1, 0.2 * math.sqrt(0.25), "call")
        assert implied_vol(p, 1.0, 1.1, 0.25, "call") == pytest.approx(0.2, abs=1e-9)
        p = bs_price(1.0, 0.9, 0.45 * math.sqrt(0.1), "put")
        assert implied_vol(p, 1.0, 0.9, 0.1, "put") == pytest.approx(0.45, abs=1e-8)

    def test_lower_bound_returns_zero(self):
        assert implied_vol(0.0, 1.0, 1.2, 0.5, "call") == 0.0
        assert implied_vol(0.1, 1.0, 1.1, 0.5, "call") > 0.0

    def test_monotone_in_price(self):
        ivs = [implied_vol(p, 1.0, 1.05, 0.25, "call") for p in (0.01, 0.02, 0.05)]
        assert ivs[0] < ivs[1] < ivs[2]

    def test_out_of_bounds(self):
        with pytest.raises(InversionError):
            implied_vol(1.5, 1.0, 1.1, 0.25, "call")  # above spot
        with pytest.raises(InversionError):
            implied_vol(0.05, 1.0, 1.1, 0.25, "put")  # below intrinsic - eps? no: fine
            # (0.1 - ... ) put intrinsic is 0.1; 0.05 < 0.1


class TestSmileReport:
    def test_flat_smile_and_zero_hit_flag(self):
        # flat smile: MC implied vols sit within 2% of 0.3 at t = 0.01 for
        # |x| <= 0.2, while the far wing has no OTM hits and is flagged
        cfg = MCConfig(n_paths=50_000, n_steps=200, seed=21)
        rep = smile_convergence_report(
            BS, [-0.2, -0.1, 0.1, 0.2, -0.5], [0.01], cfg, n=64, points=2
        )
        for r in rep.rows:
            if r.x == -0.5:
                assert r.zero_hits and r.rel_gap is None
            else:
                assert not r.zero_hits
                assert r.rel_gap < 0.02

    def test_csv(self, tmp_path):
        cfg = MCConfig(n_paths=5_000, n_steps=50, seed=7)
        rep = smile_convergence_report(BS, [-0.1], [0.05], cfg, n=64, points=2)
        out = tmp_path / "report.csv"
        rep.to_csv(out)
        lines = out.read_text().splitlines()
        assert lines[0] == "x,t,strike,price,ci,impvol,sigma_asym,rel_gap,flag"
        assert len(lines) == 2

    def test_trend_flag(self):
        from roughsmile.mc import SmileMCReport, SmileMCRow

        def row(t, gap):
            return SmileMCRow(-0.1, t, 1.0, 0.01, 0.001, 0.2, 0.21, gap, False, False)

        good = SmileMCReport((row(0.1, 0.03), row(0.05, 0.02), row(0.01, 0.01)))
        assert good.gaps_nonincreasing(-0.1)
        bad = SmileMCReport((row(0.1, 0.01), row(0.05, 0.05)))
        assert not bad.gaps_nonincreasing(-0.1)


class TestUet:
    CFG = MCConfig(n_paths=4_000, n_steps=64, seed=11)

    def test_fits_negative_gaussian_slope(self):
        rep = uet_tail_experiment(
            0.4, [0.5, 0.2], [1.0, 1.4, 1.8, 2.2], cfg=self.CFG
        )
        for fit in rep.fits.values():
            assert fit.slope < 0.0
            assert fit.r_squared >= 0.8

    def test_unit_integrand_matches_direct_brownian(self):
        # U = 1 reproduces the scaled driver itself; an independent run with
        # a different seed estimates the same Brownian-norm tail
        rep1 = uet_tail_experiment(0.4, [0.5], [1.5], integrands=("unit",), cfg=self.CFG)
        other = MCConfig(n_paths=4_000, n_steps=64, seed=99)
        rep2 = uet_tail_experiment(0.4, [0.5], [1.5], integrands=("unit",), cfg=other)
        p1, p2 = rep1.cells[0].p_hat, rep2.cells[0].p_hat
        se = math.sqrt(p1 * (1 - p1) / 4000 + p2 * (1 - p2) / 4000)
        assert abs(p1 - p2) < 4.0 * se

    def test_small_threshold_saturates(self):
        rep = uet_tail_experiment(0.4, [0.5], [0.05], integrands=("unit",), cfg=self.CFG)
        assert rep.cells[0].p_hat > 0.9

    def test_bounded_integrands_dominated_by_unit(self):
        # |U| <= 1 time-changes the integral into a slower clock: cell by
        # cell the tails sit below the unit-integrand tail (up to MC noise)
        ks = [1.0, 1.4, 1.8]
        unit = uet_tail_experiment(0.4, [0.5, 0.2], ks, integrands=("unit",), cfg=self.CFG)
        both = uet_tail_experiment(
            0.4, [0.5, 0.2], ks, integrands=("sign_switch", "clipped_brownian"),
            cfg=self.CFG,
        )
        punit = {(c.eps, c.K): c.p_hat for c in unit.cells}
        for c in both.cells:
            base = punit[(c.eps, c.K)]
            se = math.sqrt(max(base * (1 - base), c.p_hat * (1 - c.p_hat)) / 4000)
            assert c.p_hat <= base + 4.0 * se

    def test_argument_validation(self):
        with pytest.raises(InvalidInputError):
            uet_tail_experiment(0.6, [0.5], [1.0], cfg=self.CFG)
        with pytest.raises(InvalidInputError):
            uet_tail_experiment(0.4, [], [1.0], cfg=self.CFG)
        with pytest.raises(InvalidInputError):
            uet_tail_experiment(0.4, [0.5], [1.0], integrands=("bogus",), cfg=self.CFG)

    def test_deterministic_cells(self):
        r1 = uet_tail_experiment(0.4, [0.5], [1.2], integrands=("sign_switch",), cfg=self.CFG)
        r2 = uet_tail_experiment(0.4, [0.5], [1.2], integrands=("sign_switch",), cfg=self.CFG)
        assert r1.cells[0].p_hat == r2.cells[0].p_hat
