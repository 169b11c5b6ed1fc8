"""Adaptive Metropolis-Hastings and chain transforms."""

import math

import numpy as np
import pytest

from ppextremes.core import ModelContext, OriginalParams, rescale_blocks, to_orthogonal
from ppextremes.model import ExceedanceData, Parameterization, build_log_posterior
from ppextremes.priors import PriorSpec
from ppextremes.sampler import (
    ChainSet,
    InitializationError,
    SamplerConfig,
    chainset_from_csv,
    chainset_to_csv,
    run_chains,
    transform_chains,
)


class GaussianTarget:
    """Independent standard normal in d dimensions, identity coordinate map."""

    def __init__(self, d=3):
        self.dimension = d
        self.labels = tuple(f"x{i}" for i in range(d))
        self.sampling_labels = self.labels

    def to_constrained(self, z):
        return np.asarray(z, dtype=float)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return float(-0.5 * np.sum(z * z))


class HalfLineTarget(GaussianTarget):
    """Gaussian on the first coordinate restricted to x0 > 1."""

    def __call__(self, z):
        if z[0] <= 1.0:
            return -math.inf
        return super().__call__(z)


def small_cfg(**kw):
    base = dict(n_chains=4, n_draws=1000, n_burnin=1000, seed=123, init=np.zeros(3))
    base.update(kw)
    return SamplerConfig(**base)


class TestRunChains:
    def test_gaussian_moments(self):
        cs = run_chains(GaussianTarget(3), small_cfg())
        flat = cs.draws.reshape(-1, 3)
        assert np.all(np.abs(flat.mean(axis=0)) < 0.1)
        assert np.all(np.abs(flat.var(axis=0) - 1.0) < 0.1)

    def test_acceptance_near_target(self):
        cs = run_chains(GaussianTarget(3), small_cfg())
        for rate in cs.acceptance_rates:
            assert abs(rate - 0.234) < 0.08

    def test_deterministic(self):
        a = run_chains(GaussianTarget(2), small_cfg(init=np.zeros(2)))
        b = run_chains(GaussianTarget(2), small_cfg(init=np.zeros(2)))
        assert np.array_equal(a.draws, b.draws)
        assert np.array_equal(a.raw_draws, b.raw_draws)
        assert a.acceptance_rates == b.acceptance_rates

    def test_different_seeds_differ(self):
        a = run_chains(GaussianTarget(2), small_cfg(init=np.zeros(2), seed=1))
        b = run_chains(GaussianTarget(2), small_cfg(init=np.zeros(2), seed=2))
        assert not np.array_equal(a.draws, b.draws)

    def test_no_draw_outside_support(self):
        cfg = small_cfg(init=np.array([2.0, 0.0, 0.0]), n_draws=500, n_burnin=300)
        cs = run_chains(HalfLineTarget(3), cfg)
        assert np.all(cs.draws[:, :, 0] > 1.0)

    def test_identity_target_draws_equal_raw(self):
        cs = run_chains(GaussianTarget(2), small_cfg(init=np.zeros(2)))
        assert np.array_equal(cs.draws, cs.raw_draws)

    def test_requires_init(self):
        with pytest.raises(InitializationError):
            run_chains(GaussianTarget(2), SamplerConfig(init=None))

    def test_init_failure_reported(self):
        class Hopeless(GaussianTarget):
            def __call__(self, z):
                return -math.inf

        with pytest.raises(InitializationError):
            run_chains(Hopeless(2), small_cfg(init=np.zeros(2)))

    def test_shapes_and_metadata(self):
        cfg = small_cfg(n_chains=3, n_draws=200, n_burnin=100)
        cs = run_chains(GaussianTarget(3), cfg)
        assert cs.draws.shape == (3, 200, 3)
        assert cs.seeds == ((123, 0), (123, 1), (123, 2))
        assert cs.proposal_scales.shape == (3, 3)
        assert np.all(cs.proposal_scales > 0)


def posterior_chainset(kind="pp_orthogonal", seed=5, m_override=None, n_draws=300):
    rng = np.random.default_rng(77)
    xs = 10.0 + rng.exponential(2.0, size=40)
    data = ExceedanceData(u=10.0, m=8.0, xs=xs)
    param = Parameterization(kind, m_override=m_override)
    prior = PriorSpec("flat")
    target = build_log_posterior(param, prior, data)
    theta0 = {
        "pp_orthogonal": np.array([40.0, 2.0, 0.1]),
        "pp_original": np.array([12.0, 2.0, 0.1]),
        "gpd_orthogonal": np.array([2.0, 0.1]),
        "gpd_original": np.array([2.0, 0.1]),
    }[kind]
    cfg = SamplerConfig(
        n_chains=2, n_draws=n_draws, n_burnin=300, seed=seed, init=target.to_unconstrained(theta0)
    )
    return run_chains(target, cfg), target, data


class TestTransformChains:
    def test_identity_parameterization(self):
        cs, target, data = posterior_chainset("pp_original")
        ctx = ModelContext(u=data.u, m=data.m)
        out = transform_chains(cs, target.param, ctx, m_used=target.m_used)
        assert np.array_equal(out.draws, cs.draws)
        assert out.labels == ("mu", "sigma", "xi")

    def test_orthogonal_maps_back(self):
        cs, target, data = posterior_chainset("pp_orthogonal")
        ctx = ModelContext(u=data.u, m=data.m)
        out = transform_chains(cs, target.param, ctx, m_used=target.m_used)
        assert out.draws.shape == cs.draws.shape
        # spot-check one draw against the scalar inverse transform
        from ppextremes.core import OrthogonalParams, to_original

        r, nu, xi = cs.draws[1, 17]
        p = to_original(OrthogonalParams(r, nu, xi), ctx)
        assert np.allclose(out.draws[1, 17], [p.mu, p.sigma, p.xi], rtol=1e-12)

    def test_r_equals_m_draws_map_to_threshold(self):
        draws = np.tile(np.array([8.0, 3.0, 0.25]), (2, 5, 1))
        cs = ChainSet(
            draws=draws,
            raw_draws=draws.copy(),
            labels=("r", "nu", "xi"),
            raw_labels=("log_r", "log_nu", "xi"),
            acceptance_rates=(1.0, 1.0),
            seeds=((0, 0), (0, 1)),
            proposal_scales=np.ones((2, 3)),
        )
        ctx = ModelContext(u=30.0, m=8.0)
        out = transform_chains(cs, Parameterization("pp_orthogonal"), ctx)
        assert np.allclose(out.draws[..., 0], 30.0)
        assert np.allclose(out.draws[..., 1], 3.0 / 1.25)

    def test_m_override_maps_back_by_rescaling(self):
        cs, target, data = posterior_chainset("pp_original", m_override=20.0)
        ctx = ModelContext(u=data.u, m=data.m)
        out = transform_chains(cs, target.param, ctx, m_used=target.m_used)
        p = OriginalParams(*cs.draws[0, 3])
        q = rescale_blocks(p, 20.0, data.m)
        assert np.allclose(out.draws[0, 3], [q.mu, q.sigma, q.xi], rtol=1e-12)
        # the induced intensity is invariant under the mapping
        o_over = to_orthogonal(p, ModelContext(u=data.u, m=20.0))
        o_ref = to_orthogonal(OriginalParams(*out.draws[0, 3]), ctx)
        assert o_ref.r == pytest.approx(o_over.r, rel=1e-10)

    def test_gpd_orthogonal(self):
        cs, target, data = posterior_chainset("gpd_orthogonal")
        ctx = ModelContext(u=data.u, m=data.m)
        out = transform_chains(cs, target.param, ctx)
        nu = cs.draws[:, :, 0]
        xi = cs.draws[:, :, 1]
        assert np.allclose(out.draws[:, :, 0], nu / (1 + xi))
        assert out.labels == ("sigma_tilde", "xi")

    def test_singular_draws_flagged_and_replaced(self):
        draws = np.array(
            [
                [[8.0, 3.0, 0.25], [8.0, 3.0, -1.0], [4.0, 2.0, 0.1]],
            ]
        )
        cs = ChainSet(
            draws=draws,
            raw_draws=draws.copy(),
            labels=("r", "nu", "xi"),
            raw_labels=("log_r", "log_nu", "xi"),
            acceptance_rates=(1.0,),
            seeds=((0, 0),),
            proposal_scales=np.ones((1, 3)),
        )
        ctx = ModelContext(u=30.0, m=8.0)
        out = transform_chains(cs, Parameterization("pp_orthogonal"), ctx)
        assert out.n_flagged == 1
        assert out.flagged == ((0, 1),)
        assert np.array_equal(out.draws[0, 1], out.draws[0, 0])
        assert np.all(np.isfinite(out.draws))

    def test_shape_preserved(self):
        cs, target, data = posterior_chainset("pp_orthogonal")
        out = transform_chains(cs, target.param, ModelContext(u=data.u, m=data.m))
        assert out.draws.shape == cs.draws.shape
        assert out.raw_draws.shape == cs.raw_draws.shape
        assert out.acceptance_rates == cs.acceptance_rates


class TestChainSetCsv:
    def test_roundtrip(self, tmp_path):
        cs, target, data = posterior_chainset("pp_orthogonal", n_draws=50)
        path = tmp_path / "chains.csv"
        chainset_to_csv(cs, path)
        back = chainset_from_csv(path)
        assert np.allclose(back.draws, cs.draws)
        assert np.allclose(back.raw_draws, cs.raw_draws)
        assert back.labels == cs.labels
        assert back.seeds == cs.seeds
        assert back.acceptance_rates == pytest.approx(cs.acceptance_rates)
