"""Extreme-value distributions and parameter transforms.

Implements the GEV and GPD distribution functions, the orthogonal
reparameterization (r, nu, xi) of the Poisson-process model for threshold
exceedances with its inverse, block rescaling of (mu, sigma), and the
diagonal Fisher information in orthogonal coordinates.

All functions are pure; parameter containers are frozen dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Below this |xi| the analytic xi=0 limits are used; above it, expm1/log1p
# formulations keep the xi != 0 branch accurate down to the switch point.
XI_SWITCH = 1e-8


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


def _require_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class OriginalParams:
    """Location/scale/shape triplet (mu, sigma, xi) of the GEV-calibrated model."""

    mu: float
    sigma: float
    xi: float

    def __post_init__(self) -> None:
        _require_finite(mu=self.mu, sigma=self.sigma, xi=self.xi)
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class OrthogonalParams:
    """Orthogonal coordinates (r, nu, xi): Poisson intensity, orthogonal GPD scale, shape."""

    r: float
    nu: float
    xi: float

    def __post_init__(self) -> None:
        _require_finite(r=self.r, nu=self.nu, xi=self.xi)
        if self.r <= 0:
            raise DomainError(f"r must be positive, got {self.r}")
        if self.nu <= 0:
            raise DomainError(f"nu must be positive, got {self.nu}")


@dataclass(frozen=True)
class ModelContext:
    """Threshold u and block scaling factor m that anchor a parameterization."""

    u: float
    m: float

    def __post_init__(self) -> None:
        _require_finite(u=self.u, m=self.m)
        if self.m <= 0:
            raise DomainError(f"m must be positive, got {self.m}")


@dataclass(frozen=True)
class GpdParams:
    """GPD scale at the threshold (sigma_tilde) and shape xi."""

    sigma_tilde: float
    xi: float

    def __post_init__(self) -> None:
        _require_finite(sigma_tilde=self.sigma_tilde, xi=self.xi)
        if self.sigma_tilde <= 0:
            raise DomainError(f"sigma_tilde must be positive, got {self.sigma_tilde}")


def gev_cdf(x, p: OriginalParams):
    """GEV cumulative distribution function at ``x``.

    Outside the support the value clamps to 0 (below a lower endpoint,
    xi > 0) or 1 (above an upper endpoint, xi < 0). Accepts scalars or
    arrays; returns the matching shape.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("x must be finite")
    z = (x - p.mu) / p.sigma
    if abs(p.xi) < XI_SWITCH:
        out = np.exp(-np.exp(-z))
    else:
        t = 1.0 + p.xi * z
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            inner = np.exp(-np.log(t) / p.xi)
            val = np.exp(-inner)
        out = np.where(t > 0, val, 0.0 if p.xi > 0 else 1.0)
    return out if out.ndim else float(out)


def gpd_cdf(y, p: GpdParams):
    """GPD cdf of an excess ``y >= 0``; the xi=0 branch is the exponential cdf."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("y must be finite")
    if np.any(y < 0):
        raise DomainError("excess y must be >= 0")
    if abs(p.xi) < XI_SWITCH:
        out = -np.expm1(-y / p.sigma_tilde)
    else:
        t = 1.0 + p.xi * y / p.sigma_tilde
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = -np.expm1(-np.log(t) / p.xi)
        # xi < 0 above the upper endpoint: cdf is exactly 1
        out = np.where(t > 0, val, 1.0)
    return out if out.ndim else float(out)


def gpd_quantile(q, p: GpdParams):
    """Inverse of :func:`gpd_cdf` on ``0 <= q < 1``.

    ``q = 1`` with xi >= 0 would be +infinity and raises instead, so callers
    must handle unbounded support deliberately.
    """
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or np.any(q > 1) or not np.all(np.isfinite(q)):
        raise DomainError("q must lie in [0, 1)")
    if np.any(q == 1):
        if p.xi >= 0:
            raise DomainError("quantile at q=1 is infinite for xi >= 0")
        out = np.where(q == 1, -p.sigma_tilde / p.xi, _gpd_quantile_interior(q, p))
    else:
        out = _gpd_quantile_interior(q, p)
    return out if out.ndim else float(out)


def _gpd_quantile_interior(q, p: GpdParams):
    if abs(p.xi) < XI_SWITCH:
        return -p.sigma_tilde * np.log1p(-q)
    with np.errstate(divide="ignore", invalid="ignore"):
        return p.sigma_tilde * np.expm1(-p.xi * np.log1p(-q)) / p.xi


def to_orthogonal(p: OriginalParams, ctx: ModelContext) -> OrthogonalParams:
    """Map (mu, sigma, xi) at scaling m to the orthogonal coordinates (r, nu, xi).

    Requires the threshold u to lie in the support: 1 + xi (u - mu) / sigma > 0.
    """
    w = (ctx.u - p.mu) / p.sigma
    if abs(p.xi) < XI_SWITCH:
        if -w > 700.0:
            raise DomainError("intensity overflows at these parameters")
        r = ctx.m * math.exp(-w)
    else:
        t = 1.0 + p.xi * w
        if t <= 0:
            raise DomainError("threshold u lies outside the support of the model")
        if -math.log(t) / p.xi > 700.0:
            raise DomainError("intensity overflows at these parameters")
        r = ctx.m * math.exp(-math.log(t) / p.xi)
    nu = (1.0 + p.xi) * (p.sigma + p.xi * (ctx.u - p.mu))
    if not (r > 0 and nu > 0 and math.isfinite(r) and math.isfinite(nu)):
        raise DomainError("transform left the orthogonal domain (r, nu must be positive finite)")
    return OrthogonalParams(r=r, nu=nu, xi=p.xi)


def to_original(p: OrthogonalParams, ctx: ModelContext) -> OriginalParams:
    """Inverse of :func:`to_orthogonal`: (r, nu, xi) at scaling m back to (mu, sigma, xi).

    The xi = 0 limit is mu = u + nu log(r/m), sigma = nu; it follows from
    expanding (1 - (r/m)^xi)/xi -> -log(r/m) as xi -> 0, which the displayed
    xi != 0 formulas approach continuously.
    """
    if p.xi <= -1.0:
        raise DomainError("inverse transform is singular at xi = -1 and undefined below")
    lr = math.log(p.r / ctx.m)
    if abs(p.xi) < XI_SWITCH:
        mu = ctx.u + p.nu * lr
        sigma = p.nu
    else:
        mu = ctx.u + p.nu / (1.0 + p.xi) * math.expm1(p.xi * lr) / p.xi
        sigma = p.nu / (1.0 + p.xi) * math.exp(p.xi * lr)
    if not (math.isfinite(mu) and math.isfinite(sigma) and sigma > 0):
        raise DomainError("inverse transform produced values outside the original domain")
    return OriginalParams(mu=mu, sigma=sigma, xi=p.xi)


def rescale_blocks(p: OriginalParams, k1: float, k2: float) -> OriginalParams:
    """Rescale (mu, sigma) calibrated for k1 blocks to k2 blocks; xi is unchanged."""
    if k1 <= 0 or k2 <= 0:
        raise DomainError("block counts k1, k2 must be positive")
    ell = math.log(k2 / k1)
    if abs(p.xi) < XI_SWITCH:
        return OriginalParams(mu=p.mu - p.sigma * ell, sigma=p.sigma, xi=p.xi)
    mu2 = p.mu + p.sigma * math.expm1(-p.xi * ell) / p.xi
    sigma2 = p.sigma * math.exp(-p.xi * ell)
    return OriginalParams(mu=mu2, sigma=sigma2, xi=p.xi)


def fisher_information(p: OrthogonalParams) -> np.ndarray:
    """Fisher information in orthogonal coordinates: exactly diagonal.

    diag(1/r, r / (nu^2 (1 + 2 xi)), r / (1 + xi)^2); defined for xi > -1/2.
    """
    if p.xi <= -0.5:
        raise DomainError("Fisher information is undefined for xi <= -1/2")
    return np.diag(
        [
            1.0 / p.r,
            p.r / (p.nu**2 * (1.0 + 2.0 * p.xi)),
            p.r / (1.0 + p.xi) ** 2,
        ]
    )


def gpd_scale_at_threshold(p: OriginalParams, u: float) -> GpdParams:
    """GPD scale at threshold u: sigma_tilde = sigma + xi (u - mu) = nu / (1 + xi)."""
    _require_finite(u=u)
    st = p.sigma + p.xi * (u - p.mu)
    if st <= 0:
        raise DomainError(f"sigma + xi (u - mu) must be positive, got {st}")
    return GpdParams(sigma_tilde=st, xi=p.xi)
