"""Acceptance suite: one test per exit criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` (or see the captured
stdout of failing/passing tests in the full run). Criteria 6 and 7 are
simulation studies over fixed seed panels and take a few minutes each; all
seeds and tolerances are frozen here.
"""

import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from ppextremes.analysis import (
    Estimator,
    mse_study,
    propriety_oracle_jeffreys,
    return_level,
    return_level_curve,
    run_inference,
    summarize,
)
from ppextremes.core import (
    GpdParams,
    ModelContext,
    OriginalParams,
    gev_cdf,
    gpd_cdf,
    gpd_quantile,
    to_orthogonal,
    to_original,
)
from ppextremes.diagnostics import autocorrelation, ess, local_rhat, rhat_infinity
from ppextremes.ingest import DeclusterConfig, decluster, load_csv
from ppextremes.model import ExceedanceData, Parameterization, pp_loglik_orthogonal_raw
from ppextremes.priors import PcPriorConfig, PriorSpec, pc_equal_tailed_interval
from ppextremes.sampler import SamplerConfig
from ppextremes.simulate import GeneratorSpec, acov_offdiag, generate

from synth_garonne import TRUTH as GARONNE_TRUTH, build_daily_series
from test_priors import PC_INTERVAL_TABLE, pc_mass_quadrature
from test_simulate import pushforward_acov


def verdict(number: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {number}: {detail}"


class TestCriterion1Intensity:
    """Expected exceedance counts of the three reference scenarios."""

    def test_intensity_oracle(self):
        getcontext().prec = 40
        oracles = {
            # 40 (4/3)^4, 5 * 15^(10/7), 20 e : arbitrary-precision evaluations
            (40.0, 30.0, 50.0, 15.0, -0.25): float(Decimal(40) * (Decimal(4) / Decimal(3)) ** 4),
            (5.0, 10.0, 30.0, 15.0, 0.7): float(
                Decimal(5) * (Decimal(15).ln() * Decimal(10) / Decimal(7)).exp()
            ),
            (20.0, 20.0, 25.0, 5.0, 0.0): float(Decimal(20) * Decimal(1).exp()),
        }
        frozen = [126.41975308641975, 239.38689649844592, 54.365636569180905]
        reported = [126, 239, 54]
        results = []
        for (tup, oracle), froz, rep in zip(oracles.items(), frozen, reported):
            m, u, mu, sigma, xi = tup
            assert oracle == pytest.approx(froz, rel=1e-14)
            r = to_orthogonal(OriginalParams(mu, sigma, xi), ModelContext(u=u, m=m)).r
            results.append(abs(r - oracle) / oracle < 5e-5 and round(r) == rep)
        verdict(1, all(results), f"intensities to 4 significant figures: {frozen}")


class TestCriterion2Propriety:
    def test_quadrature_matches_closed_form(self):
        rels = {}
        for delta in (0.5, 1.0, 5.0):
            numeric, analytic = propriety_oracle_jeffreys(delta)
            rels[delta] = abs(numeric - analytic) / analytic
        verdict(2, all(r < 0.005 for r in rels.values()), f"quadrature vs closed form rel errors {rels}")


class TestCriterion3PcPrior:
    def test_normalization_and_intervals(self):
        ok = True
        details = []
        for lam in (0.5, 1.0, 3.0, 5.0, 10.0, 15.0):
            mass = pc_mass_quadrature(lam)
            if abs(mass - 1.0) > 1e-6:
                ok = False
                details.append(f"mass({lam})={mass}")
            lo, hi = pc_equal_tailed_interval(PcPriorConfig(lam))
            t_lo, t_hi = PC_INTERVAL_TABLE[lam]
            if lam == 0.5:
                # reported at one-decimal precision, truncated: -36.871 -> -36.8
                if math.floor(abs(lo) * 10) / 10 != abs(t_lo):
                    ok = False
                    details.append(f"lo({lam})={lo}")
            elif abs(lo - t_lo) > 0.02:
                ok = False
                details.append(f"lo({lam})={lo}")
            if abs(hi - t_hi) > 0.02:
                ok = False
                details.append(f"hi({lam})={hi}")
            llo, lhi = pc_equal_tailed_interval(PcPriorConfig(lam, use_laplace_approx=True))
            if abs(lhi - math.log(20.0) / lam) > 1e-10 or abs(llo + math.log(20.0) / lam) > 1e-10:
                ok = False
                details.append(f"laplace({lam})")
        verdict(3, ok, "normalization 1e-6 and 95% intervals" + (f"; misses: {details}" if details else ""))


class TestCriterion4FisherOrthogonality:
    def test_monte_carlo_hessian(self):
        r0, nu0, xi0 = 50.0, 10.0, 0.2
        st = nu0 / (1 + xi0)
        th0 = np.array([r0, nu0, xi0])
        hs = 1e-4 * (1 + np.abs(th0))
        rng = np.random.default_rng(414)
        n_rep = 10_000
        H_acc = np.zeros((3, 3))
        for _ in range(n_rep):
            n = int(rng.poisson(r0))
            while n == 0:
                n = int(rng.poisson(r0))
            q = rng.random(n)
            ys = st * ((1 - q) ** -xi0 - 1) / xi0
            ys = ys[ys > 0]
            d = ExceedanceData(u=0.0, m=1.0, xs=ys)

            def f(th):
                return pp_loglik_orthogonal_raw(th[0], th[1], th[2], d)

            f0 = f(th0)
            for i in range(3):
                tp, tm = th0.copy(), th0.copy()
                tp[i] += hs[i]
                tm[i] -= hs[i]
                H_acc[i, i] += (f(tp) - 2 * f0 + f(tm)) / hs[i] ** 2
                for j in range(i + 1, 3):
                    tpp = th0.copy(); tpp[i] += hs[i]; tpp[j] += hs[j]
                    tpm = th0.copy(); tpm[i] += hs[i]; tpm[j] -= hs[j]
                    tmp = th0.copy(); tmp[i] -= hs[i]; tmp[j] += hs[j]
                    tmm = th0.copy(); tmm[i] -= hs[i]; tmm[j] -= hs[j]
                    v = (f(tpp) - f(tpm) - f(tmp) + f(tmm)) / (4 * hs[i] * hs[j])
                    H_acc[i, j] += v
                    H_acc[j, i] += v
        info_mc = -H_acc / n_rep
        expected = np.diag([1 / r0, r0 / (nu0**2 * (1 + 2 * xi0)), r0 / (1 + xi0) ** 2])
        diag_rel = np.abs(np.diag(info_mc) - np.diag(expected)) / np.diag(expected)
        ok = bool(np.all(diag_rel < 0.05))
        for i in range(3):
            for j in range(i + 1, 3):
                bound = 0.05 * math.sqrt(expected[i, i] * expected[j, j])
                ok = ok and abs(info_mc[i, j]) < bound
        verdict(4, ok, f"MC Fisher at (50, 10, 0.2): diag rel {np.round(diag_rel, 4)}")


class TestCriterion5SharkeyRoots:
    def test_roots_and_oracle(self):
        ok = True
        for xi in (-0.4, -0.1, 0.3, 0.7):
            _, _, sxi = acov_offdiag(1.0 / (1.0 + xi), 1.0, xi, 1.0)
            ok = ok and abs(sxi) < 1e-10
        _, mxi, _ = acov_offdiag(0.0, 1.0, 0.3, 1.0)
        ok = ok and mxi == 0.0
        point = (0.8, 12.0, 0.3, 7.0)
        got = acov_offdiag(*point)
        want = pushforward_acov(*point)
        rels = [abs(g - w) / abs(w) for g, w in zip(got, want)]
        ok = ok and all(r < 0.02 for r in rels)
        verdict(5, ok, f"root residuals exact; inverse-Fisher oracle rel {np.round(rels, 5)}")


MIXING_SCENARIOS = {
    "bounded": dict(m=40, u=30, mu=50, sigma=15, xi=-0.25),
    "light": dict(m=20, u=20, mu=25, sigma=5, xi=0.0),
    "heavy": dict(m=5, u=10, mu=30, sigma=15, xi=0.7),
}
MIXING_PARAMS = {
    "original": Parameterization("pp_original"),
    "tuned_interval": Parameterization("pp_original", m_override="sharkey_interval"),
    "count_rule": Parameterization("pp_original", m_override="nu_count"),
    "orthogonal": Parameterization("pp_orthogonal"),
}
RHAT_THRESHOLD = 1.03
MIXING_SEEDS = list(range(1, 11))  # data seed 1000+s, sampler seed 5000+s


class TestCriterion6MixingOrdering:
    @pytest.mark.parametrize("scenario", sorted(MIXING_SCENARIOS))
    def test_orthogonal_dominates(self, scenario):
        sc = MIXING_SCENARIOS[scenario]
        wins = 0
        for s in MIXING_SEEDS:
            data = generate(GeneratorSpec(**sc, seed=1000 + s)).data
            stats = {}
            for name, param in MIXING_PARAMS.items():
                prior = PriorSpec(
                    "jeffreys_orthogonal" if param.kind == "pp_orthogonal" else "jeffreys_original"
                )
                cfg = SamplerConfig(n_chains=4, n_draws=1000, n_burnin=1000, seed=5000 + s)
                try:
                    chains, _ = run_inference(data, param, prior, cfg)
                    total_ess = sum(ess(chains, k) for k in range(3))
                    worst = max(rhat_infinity(chains, k) for k in range(3))
                except Exception:
                    total_ess, worst = 0.0, float("inf")
                stats[name] = (total_ess, worst)
            o_ess, o_rhat = stats["orthogonal"]
            highest_ess = all(o_ess > v[0] for k, v in stats.items() if k != "orthogonal")
            converged_while_other_fails = o_rhat < RHAT_THRESHOLD and any(
                v[1] >= RHAT_THRESHOLD for k, v in stats.items() if k != "orthogonal"
            )
            wins += highest_ess and converged_while_other_fails
        verdict(6, wins >= 8, f"{scenario}: orthogonal wins {wins}/10 seeds")


@pytest.fixture(scope="module")
def mse_report():
    base = GeneratorSpec(m=1.0, u=10.0, mu=0.0, sigma=15.0, xi=0.0, seed=2024)
    estimators = [
        Estimator(
            "orthogonal_jeffreys",
            "posterior_mean",
            Parameterization("pp_orthogonal"),
            PriorSpec("jeffreys_orthogonal"),
        ),
        Estimator(
            "original_jeffreys",
            "posterior_mean",
            Parameterization("pp_original"),
            PriorSpec("jeffreys_original"),
        ),
    ]
    return mse_study([0.3, 0.7], 50, estimators, base, sampler=SamplerConfig())


class TestCriterion7ReplicationMse:
    """MSE of the posterior-mean shape estimate, orthogonal vs original.

    The 0.7 case passes with a wide margin. The 0.3 case is implemented
    exactly as stated and is expected to fail at ratio ~0.6: with this
    sampler family the original parameterization's chains, however poorly
    mixed, add only ~60% sampling error on top of the posterior's intrinsic
    MSE at that shape (measured 0.54-0.72 across master seeds). See the
    decisions ledger for the full analysis.
    """

    @pytest.mark.parametrize("ix, xi0", [(0, 0.3), (1, 0.7)])
    def test_mse_ratio(self, mse_report, ix, xi0):
        ratio = mse_report.mse[0, ix] / mse_report.mse[1, ix]
        verdict(7, ratio <= 0.5, f"xi0={xi0}: MSE ratio orthogonal/original = {ratio:.3f} (<= 0.5 required)")


class TestCriterion8ReturnLevels:
    def test_plugin_at_reported_posterior_means(self):
        level = return_level(OriginalParams(2560.8, 919.6, 0.015), 100.0)
        rel = abs(level - 6949.0) / 6949.0
        assert rel < 0.01
        # definitional inversion holds exactly
        assert gev_cdf(level, OriginalParams(2560.8, 919.6, 0.015)) == pytest.approx(0.99, abs=1e-10)

    def test_synthetic_river_pipeline(self, tmp_path):
        daily = tmp_path / "daily.csv"
        build_daily_series(daily)
        series = load_csv(daily)
        res = decluster(
            series,
            DeclusterConfig(threshold_u=2000.0, gap_days=3, season=(12, 1, 2, 3, 4, 5)),
            m=99.0,
        )
        assert res.n_clusters == 182
        chains, _ = run_inference(
            res.data,
            Parameterization("pp_orthogonal"),
            PriorSpec("jeffreys_orthogonal"),
            SamplerConfig(n_chains=4, n_draws=1000, n_burnin=1000, seed=42),
        )
        summary = summarize(chains)
        ok = True
        zs = {}
        for coord in ("mu", "sigma", "xi"):
            z = (summary[coord]["mean"] - GARONNE_TRUTH[coord]) / summary[coord]["sd"]
            zs[coord] = round(z, 2)
            ok = ok and abs(z) < 3
        curve = return_level_curve(chains, np.geomspace(2.0, 1e4, 30))
        ok = ok and bool(np.all(np.diff(curve.mean) > 0)) and curve.n_excluded == 0
        level = return_level(OriginalParams(2560.8, 919.6, 0.015), 100.0)
        verdict(
            8,
            ok,
            f"plug-in 100-block level {level:.0f} within 1% of 6949; "
            f"182-cluster fixture recovery z-scores {zs}",
        )


class TestCriterion9PropertySuites:
    """Spot checks; the full per-module property suites are the rest of tests/."""

    def test_bundle(self):
        rng = np.random.default_rng(9)
        ok = True
        # transform round trip at 1e-12 across the shape range
        for xi in np.linspace(-0.49, 1.0, 16):
            p = OriginalParams(mu=3.0, sigma=2.0, xi=float(xi))
            ctx = ModelContext(u=2.0, m=7.0)
            back = to_original(to_orthogonal(p, ctx), ctx)
            ok = ok and abs(back.mu - p.mu) < 1e-9 and abs(back.sigma - p.sigma) / p.sigma < 1e-12
        # distribution inversion at 1e-10
        q = np.linspace(0.01, 0.99, 21)
        for xi in (-0.3, 0.0, 0.4):
            gp = GpdParams(1.7, xi)
            ok = ok and bool(np.allclose(gpd_cdf(gpd_quantile(q, gp), gp), q, atol=1e-10))
        # white-noise autocorrelation band
        rho = autocorrelation(rng.standard_normal(10_000), max_lag=10)
        ok = ok and bool(np.all(np.abs(rho[1:]) < 4 / math.sqrt(10_000)))
        # monotone-map invariance of the local scale-reduction factor
        x = rng.standard_normal((2, 400))
        ok = ok and local_rhat(x, 0, 0.3) == pytest.approx(
            local_rhat(np.exp(x), 0, float(np.exp(0.3))), rel=1e-12
        )
        # declustering idempotence is exercised in tests/test_ingest.py
        verdict(9, ok, "round-trips, inversions, ACF band, rank invariance (full suites in tests/)")
