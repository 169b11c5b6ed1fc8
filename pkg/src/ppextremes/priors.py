"""Prior log-densities: Jeffreys (orthogonal and original coordinates),
the penalized-complexity prior on the shape parameter, and the composite
prior that combines the two.

Conventions
-----------
* Jeffreys priors are unnormalized (improper); the PC prior is a proper,
  normalized density.
* Every log-prior returns -inf outside its support and never raises, so
  samplers can reject gracefully.
* The PC distance here is d(xi) = |xi| / sqrt(1 - xi); a constant factor
  in the distance only rescales the penalization rate, so rates quoted
  elsewhere should be interpreted against this distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ModelContext, OriginalParams, OrthogonalParams, XI_SWITCH

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class PcPriorConfig:
    """Penalization rate and whether to substitute the Laplace approximation."""

    lam: float
    use_laplace_approx: bool = False

    def __post_init__(self) -> None:
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"penalization rate must be positive, got {self.lam}")


PRIOR_KINDS = ("jeffreys_orthogonal", "jeffreys_original", "pc_composite", "flat")


@dataclass(frozen=True)
class PriorSpec:
    """Named prior choice; ``pc`` must be present exactly for pc_composite."""

    kind: str
    pc: PcPriorConfig | None = None

    def __post_init__(self) -> None:
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}; expected one of {PRIOR_KINDS}")
        if (self.kind == "pc_composite") != (self.pc is not None):
            raise ValueError("pc configuration must be given iff kind='pc_composite'")


# Float kernels: the sampler-facing versions that accept raw coordinates and
# encode support exclusion as -inf.

def jeffreys_orthogonal_logpdf(r: float, nu: float, xi: float) -> float:
    if not (r > 0 and nu > 0 and xi > -0.5):
        return _NEG_INF
    return 0.5 * math.log(r) - math.log(nu) - math.log1p(xi) - 0.5 * math.log1p(2.0 * xi)


def jeffreys_original_logpdf(mu: float, sigma: float, xi: float, u: float) -> float:
    if not (sigma > 0 and xi > -0.5):
        return _NEG_INF
    w = (u - mu) / sigma
    base = -2.0 * math.log(sigma) - math.log1p(xi) - 0.5 * math.log1p(2.0 * xi)
    if abs(xi) < XI_SWITCH:
        return -1.5 * w + base
    t = 1.0 + xi * w
    if t <= 0:
        return _NEG_INF
    return (-1.5 / xi - 1.0) * math.log(t) + base


def pc_logpdf(xi: float, cfg: PcPriorConfig) -> float:
    if cfg.use_laplace_approx:
        return math.log(cfg.lam / 2.0) - cfg.lam * abs(xi)
    if xi >= 1.0:
        return _NEG_INF
    one_m = 1.0 - xi
    return (
        math.log(cfg.lam / 2.0)
        + math.log1p(-xi / 2.0)
        - 1.5 * math.log(one_m)
        - cfg.lam * abs(xi) / math.sqrt(one_m)
    )


def pc_composite_logpdf(r: float, nu: float, xi: float, cfg: PcPriorConfig) -> float:
    if not (r > 0 and nu > 0):
        return _NEG_INF
    return pc_logpdf(xi, cfg) - math.log(nu)


# Typed wrappers matching the domain-object API.

def log_jeffreys_orthogonal(p: OrthogonalParams) -> float:
    """Unnormalized Jeffreys log-density in (r, nu, xi); -inf for xi <= -1/2."""
    return jeffreys_orthogonal_logpdf(p.r, p.nu, p.xi)


def log_jeffreys_original(p: OriginalParams, ctx: ModelContext) -> float:
    """Unnormalized Jeffreys log-density in (mu, sigma, xi) at threshold ctx.u.

    Equals the pushforward of :func:`log_jeffreys_orthogonal` under the
    orthogonal transform, up to an additive constant (both are unnormalized).
    """
    return jeffreys_original_logpdf(p.mu, p.sigma, p.xi, ctx.u)


def pc_distance(xi: float) -> float:
    """Complexity distance |xi| / sqrt(1 - xi) from the xi = 0 base model; +inf for xi >= 1."""
    if xi >= 1.0:
        return float("inf")
    return abs(xi) / math.sqrt(1.0 - xi)


def pc_log_density(xi: float, cfg: PcPriorConfig) -> float:
    """Normalized PC prior log-density on xi (support xi < 1), or its
    Laplace(0, 1/rate) approximation on all of R when configured."""
    return pc_logpdf(xi, cfg)


def log_pc_composite(p: OrthogonalParams, cfg: PcPriorConfig) -> float:
    """PC prior on xi times the Jeffreys-rule 1/nu factor; flat in r."""
    return pc_composite_logpdf(p.r, p.nu, p.xi, cfg)


def pc_cdf(xi: float, cfg: PcPriorConfig) -> float:
    """Closed-form cdf of the PC prior (or of its Laplace approximation)."""
    if cfg.use_laplace_approx:
        if xi < 0:
            return 0.5 * math.exp(cfg.lam * xi)
        return 1.0 - 0.5 * math.exp(-cfg.lam * xi)
    if xi >= 1.0:
        return 1.0
    d = pc_distance(xi)
    if xi <= 0:
        return 0.5 * math.exp(-cfg.lam * d)
    return 1.0 - 0.5 * math.exp(-cfg.lam * d)


def pc_equal_tailed_interval(cfg: PcPriorConfig, prob: float = 0.95) -> tuple[float, float]:
    """Equal-tailed credible interval of the PC prior (or Laplace variant).

    Both tails carry mass (1 - prob)/2; by the symmetry of the distance the
    two endpoints solve |xi| / sqrt(1 - xi) = log(1/(1-prob)) / rate, a
    quadratic in xi.
    """
    if not 0 < prob < 1:
        raise ValueError("prob must lie in (0, 1)")
    c = math.log(1.0 / (1.0 - prob)) / cfg.lam
    if cfg.use_laplace_approx:
        return -c, c
    disc = math.sqrt(c**4 + 4.0 * c**2)
    return (-(c * c) - disc) / 2.0, (-(c * c) + disc) / 2.0
