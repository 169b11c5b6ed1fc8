"""Distribution functions, parameter transforms and Fisher information."""

import math

import numpy as np
import pytest

from ppextremes.core import (
    DomainError,
    GpdParams,
    ModelContext,
    OriginalParams,
    OrthogonalParams,
    fisher_information,
    gev_cdf,
    gpd_cdf,
    gpd_quantile,
    gpd_scale_at_threshold,
    rescale_blocks,
    to_original,
    to_orthogonal,
)


def random_params(rng, n=100, xi_range=(-0.49, 1.0)):
    """Random valid (params, context) pairs with u inside the support."""
    out = []
    for _ in range(n):
        xi = rng.uniform(*xi_range)
        sigma = rng.uniform(0.5, 20.0)
        mu = rng.uniform(-10.0, 50.0)
        p = OriginalParams(mu=mu, sigma=sigma, xi=xi)
        u = mu - rng.uniform(0.0, 2.0) * sigma
        if 1 + xi * (u - mu) / sigma > 0.05:
            m = rng.uniform(0.5, 100.0)
            out.append((p, ModelContext(u=u, m=m)))
    return out


class TestGevCdf:
    def test_gumbel_at_location(self):
        p = OriginalParams(mu=2.0, sigma=3.0, xi=0.0)
        assert gev_cdf(2.0, p) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_xi_half_at_location(self):
        p = OriginalParams(mu=2.0, sigma=3.0, xi=0.5)
        assert gev_cdf(2.0, p) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_negative_shape_value(self):
        # (1 + xi)^(-1/xi) at z=1, xi=-0.25: 0.75^4 = 81/256 exactly
        p = OriginalParams(mu=1.0, sigma=2.0, xi=-0.25)
        assert gev_cdf(3.0, p) == pytest.approx(math.exp(-81.0 / 256.0), rel=1e-13)

    def test_clamps_outside_support(self):
        heavy = OriginalParams(mu=0.0, sigma=1.0, xi=0.5)
        assert gev_cdf(-3.0, heavy) == 0.0
        bounded = OriginalParams(mu=0.0, sigma=1.0, xi=-0.5)
        assert gev_cdf(3.0, bounded) == 1.0

    def test_nondecreasing(self):
        rng = np.random.default_rng(0)
        for xi in (-0.4, -0.1, 0.0, 0.3, 1.0):
            p = OriginalParams(mu=rng.normal(), sigma=1.0 + rng.random(), xi=xi)
            x = np.linspace(-20, 20, 2001)
            v = gev_cdf(x, p)
            assert np.all(np.diff(v) >= -1e-15)

    def test_nonfinite_rejected(self):
        p = OriginalParams(mu=0.0, sigma=1.0, xi=0.1)
        with pytest.raises(DomainError):
            gev_cdf(float("nan"), p)


class TestGpd:
    def test_cdf_lower_endpoint(self):
        for xi in (-0.3, 0.0, 0.7):
            assert gpd_cdf(0.0, GpdParams(sigma_tilde=2.0, xi=xi)) == 0.0

    def test_unit_exponential_quantile(self):
        q = 1.0 - math.exp(-1.0)
        assert gpd_quantile(q, GpdParams(1.0, 0.0)) == pytest.approx(1.0, rel=1e-12)

    def test_analytic_median(self):
        # invert 1 - (1 + xi y / s)^(-1/xi) at q = 1/2
        val = gpd_quantile(0.5, GpdParams(sigma_tilde=2.0, xi=0.5))
        assert val == pytest.approx(2.0 * (0.5**-0.5 - 1.0) / 0.5, rel=1e-12)

    def test_quantile_inverts_cdf(self):
        rng = np.random.default_rng(1)
        for xi in (-0.45, -0.1, 0.0, 0.2, 0.9):
            p = GpdParams(sigma_tilde=0.5 + 3 * rng.random(), xi=xi)
            q = np.linspace(0.001, 0.999, 101)
            back = gpd_cdf(gpd_quantile(q, p), p)
            assert np.allclose(back, q, rtol=1e-10, atol=1e-12)

    def test_q_one_unbounded_raises(self):
        with pytest.raises(DomainError):
            gpd_quantile(1.0, GpdParams(1.0, 0.0))
        with pytest.raises(DomainError):
            gpd_quantile(1.0, GpdParams(1.0, 0.4))

    def test_q_one_bounded_support(self):
        assert gpd_quantile(1.0, GpdParams(1.0, -0.5)) == pytest.approx(2.0)


class TestOrthogonalTransform:
    def test_intensity_bounded_tail(self):
        o = to_orthogonal(OriginalParams(50, 15, -0.25), ModelContext(u=30, m=40))
        assert o.r == pytest.approx(10240.0 / 81.0, rel=1e-12)

    def test_intensity_gumbel(self):
        o = to_orthogonal(OriginalParams(25, 5, 0.0), ModelContext(u=20, m=20))
        assert o.r == pytest.approx(20.0 * math.e, rel=1e-12)

    def test_u_at_location(self):
        p = OriginalParams(mu=7.0, sigma=3.0, xi=0.4)
        o = to_orthogonal(p, ModelContext(u=7.0, m=11.0))
        assert o.r == pytest.approx(11.0, rel=1e-14)
        assert o.nu == pytest.approx((1 + 0.4) * 3.0, rel=1e-14)

    def test_support_violation(self):
        with pytest.raises(DomainError):
            to_orthogonal(OriginalParams(0.0, 1.0, -0.5), ModelContext(u=3.0, m=1.0))

    def test_inverse_r_equals_m(self):
        ctx = ModelContext(u=10.0, m=6.0)
        p = to_original(OrthogonalParams(r=6.0, nu=4.0, xi=0.3), ctx)
        assert p.mu == pytest.approx(10.0, abs=1e-12)
        assert p.sigma == pytest.approx(4.0 / 1.3, rel=1e-12)

    def test_inverse_gumbel_limit(self):
        p = to_original(OrthogonalParams(100.0, 15.0, 0.0), ModelContext(u=10.0, m=1.0))
        assert p.mu == pytest.approx(10.0 + 15.0 * math.log(100.0), rel=1e-12)
        assert p.sigma == pytest.approx(15.0)
        # the xi -> 0 limit agrees with nearby nonzero shapes
        for xi in (1e-6, -1e-6):
            pn = to_original(OrthogonalParams(100.0, 15.0, xi), ModelContext(u=10.0, m=1.0))
            assert pn.mu == pytest.approx(p.mu, rel=1e-5)

    def test_roundtrip_simple(self):
        ctx = ModelContext(u=10.0, m=5.0)
        p = OriginalParams(mu=30.0, sigma=15.0, xi=0.7)
        back = to_original(to_orthogonal(p, ctx), ctx)
        assert back.mu == pytest.approx(p.mu, rel=1e-12)
        assert back.sigma == pytest.approx(p.sigma, rel=1e-12)

    def test_roundtrip_sweep(self):
        rng = np.random.default_rng(42)
        pairs = random_params(rng, n=200)
        assert len(pairs) > 150
        for p, ctx in pairs:
            back = to_original(to_orthogonal(p, ctx), ctx)
            assert back.mu == pytest.approx(p.mu, rel=1e-12, abs=1e-9)
            assert back.sigma == pytest.approx(p.sigma, rel=1e-12)

    def test_roundtrip_near_zero_shape(self):
        # dense band across the branch switch
        ctx = ModelContext(u=3.0, m=9.0)
        for xi in np.concatenate([np.linspace(-1e-4, 1e-4, 41), [-1e-9, 1e-9, 0.0]]):
            p = OriginalParams(mu=5.0, sigma=2.0, xi=float(xi))
            back = to_original(to_orthogonal(p, ctx), ctx)
            assert back.mu == pytest.approx(p.mu, rel=1e-10)
            assert back.sigma == pytest.approx(p.sigma, rel=1e-10)

    def test_singularity_at_minus_one(self):
        with pytest.raises(DomainError):
            to_original(OrthogonalParams(5.0, 1.0, -1.0), ModelContext(u=0.0, m=1.0))


class TestRescaleBlocks:
    def test_identity(self):
        p = OriginalParams(4.0, 2.0, 0.3)
        q = rescale_blocks(p, 7.0, 7.0)
        assert (q.mu, q.sigma, q.xi) == (p.mu, p.sigma, p.xi)

    def test_group_property(self):
        p = OriginalParams(4.0, 2.0, -0.2)
        q = rescale_blocks(rescale_blocks(p, 3.0, 11.0), 11.0, 3.0)
        assert q.mu == pytest.approx(p.mu, rel=1e-13)
        assert q.sigma == pytest.approx(p.sigma, rel=1e-13)

    def test_gumbel_limit(self):
        p = OriginalParams(4.0, 2.0, 0.0)
        q = rescale_blocks(p, 2.0, 8.0)
        assert q.mu == pytest.approx(4.0 - 2.0 * math.log(4.0), rel=1e-13)
        assert q.sigma == pytest.approx(2.0)

    def test_orthogonal_invariance(self):
        # (r, nu, xi) does not depend on the scaling factor choice
        rng = np.random.default_rng(3)
        pairs = random_params(rng, n=150)
        assert len(pairs) >= 100
        for p, ctx in pairs[:100]:
            m2 = float(rng.uniform(0.5, 120.0))
            p2 = rescale_blocks(p, ctx.m, m2)
            o1 = to_orthogonal(p, ctx)
            o2 = to_orthogonal(p2, ModelContext(u=ctx.u, m=m2))
            assert o2.r == pytest.approx(o1.r, rel=1e-9)
            assert o2.nu == pytest.approx(o1.nu, rel=1e-9)


class TestFisherInformation:
    def test_identity_point(self):
        fi = fisher_information(OrthogonalParams(1.0, 1.0, 0.0))
        assert np.allclose(fi, np.eye(3))

    def test_example_point(self):
        fi = fisher_information(OrthogonalParams(4.0, 2.0, 0.5))
        assert np.allclose(np.diag(fi), [0.25, 0.5, 4.0 / 2.25])

    def test_offdiagonals_exactly_zero(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            fi = fisher_information(
                OrthogonalParams(rng.uniform(0.1, 100), rng.uniform(0.1, 30), rng.uniform(-0.49, 1.5))
            )
            off = fi - np.diag(np.diag(fi))
            assert np.all(off == 0.0)

    def test_undefined_below_half(self):
        with pytest.raises(DomainError):
            fisher_information(OrthogonalParams(1.0, 1.0, -0.5))


class TestGpdScaleAtThreshold:
    def test_zero_shape(self):
        g = gpd_scale_at_threshold(OriginalParams(5.0, 2.0, 0.0), u=9.0)
        assert g.sigma_tilde == 2.0

    def test_u_at_location(self):
        g = gpd_scale_at_threshold(OriginalParams(5.0, 2.0, 0.7), u=5.0)
        assert g.sigma_tilde == 2.0

    def test_matches_nu_over_one_plus_xi(self):
        rng = np.random.default_rng(11)
        pairs = random_params(rng, n=150)
        for p, ctx in pairs[:100]:
            g = gpd_scale_at_threshold(p, ctx.u)
            o = to_orthogonal(p, ctx)
            assert g.sigma_tilde * (1 + p.xi) == pytest.approx(o.nu, rel=1e-11)

    def test_nonpositive_rejected(self):
        with pytest.raises(DomainError):
            gpd_scale_at_threshold(OriginalParams(0.0, 1.0, -0.5), u=3.0)


class TestZeroShapeBranchAgreement:
    """The xi = 0 branches agree with xi = +-1e-7 evaluations to 1e-6."""

    def test_gev_cdf(self):
        p0 = OriginalParams(1.0, 2.0, 0.0)
        x = np.linspace(-3, 9, 25)
        for xi in (1e-7, -1e-7):
            v = gev_cdf(x, OriginalParams(1.0, 2.0, xi))
            assert np.allclose(v, gev_cdf(x, p0), rtol=1e-6, atol=1e-9)

    def test_gpd_cdf_and_quantile(self):
        y = np.linspace(0, 10, 21)
        q = np.linspace(0.01, 0.99, 21)
        for xi in (1e-7, -1e-7):
            assert np.allclose(
                gpd_cdf(y, GpdParams(2.0, xi)), gpd_cdf(y, GpdParams(2.0, 0.0)), rtol=1e-6, atol=1e-9
            )
            assert np.allclose(
                gpd_quantile(q, GpdParams(2.0, xi)),
                gpd_quantile(q, GpdParams(2.0, 0.0)),
                rtol=1e-6,
            )

    def test_transforms(self):
        ctx = ModelContext(u=3.0, m=7.0)
        base = to_orthogonal(OriginalParams(5.0, 2.0, 0.0), ctx)
        for xi in (1e-7, -1e-7):
            o = to_orthogonal(OriginalParams(5.0, 2.0, xi), ctx)
            assert o.r == pytest.approx(base.r, rel=1e-6)
            assert o.nu == pytest.approx(base.nu, rel=1e-6)

    def test_rescale(self):
        base = rescale_blocks(OriginalParams(5.0, 2.0, 0.0), 3.0, 12.0)
        for xi in (1e-7, -1e-7):
            q = rescale_blocks(OriginalParams(5.0, 2.0, xi), 3.0, 12.0)
            assert q.mu == pytest.approx(base.mu, rel=1e-6)
            assert q.sigma == pytest.approx(base.sigma, rel=1e-6)
