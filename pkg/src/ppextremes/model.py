"""Log-posterior targets for threshold-exceedance data.

Provides the Poisson-process likelihood in original (mu, sigma, xi) and
orthogonal (r, nu, xi) coordinates, the GPD likelihood in (sigma_tilde, xi)
and (nu, xi), and assembles them with a prior into a sampler-ready target.

Samplers explore transformed coordinates: positive parameters on the log
scale, and under the Jeffreys priors the shape as sqrt(1 + 2 xi), which
turns the prior's integrable boundary singularity into the coordinate
Jacobian (the prior is flat in that coordinate). The log-Jacobian of these
per-coordinate monotone maps is added to the target, which removes boundary
pathologies without affecting Fisher diagonality.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .core import GpdParams, ModelContext, OriginalParams, XI_SWITCH, gpd_quantile
from .priors import (
    PcPriorConfig,
    PriorSpec,
    jeffreys_orthogonal_logpdf,
    jeffreys_original_logpdf,
    pc_composite_logpdf,
    pc_logpdf,
)

_NEG_INF = float("-inf")


class ConfigError(ValueError):
    """An invalid model/prior/configuration combination was requested."""


@dataclass(frozen=True)
class ExceedanceData:
    """Threshold u, scaling factor m, and the exceedances above u."""

    u: float
    m: float
    xs: np.ndarray

    def __post_init__(self) -> None:
        xs = np.asarray(self.xs, dtype=float)
        if xs.ndim != 1 or xs.size < 1:
            raise ValueError("xs must be a non-empty 1-d array of exceedances")
        if not np.all(np.isfinite(xs)):
            raise ValueError("exceedances must be finite")
        if not np.all(xs > self.u):
            raise ValueError("every exceedance must lie strictly above the threshold u")
        if not (self.m > 0 and math.isfinite(self.m) and math.isfinite(self.u)):
            raise ValueError("m must be positive and u finite")
        xs = xs.copy()
        xs.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        excess = xs - self.u
        excess.setflags(write=False)
        object.__setattr__(self, "_excess", excess)

    @property
    def n_u(self) -> int:
        return int(self.xs.size)

    @property
    def excesses(self) -> np.ndarray:
        return self._excess  # type: ignore[attr-defined]


PARAMETERIZATION_KINDS = ("pp_original", "pp_orthogonal", "gpd_original", "gpd_orthogonal")
M_OVERRIDE_NAMES = ("keep", "nu_count", "sharkey_interval")


@dataclass(frozen=True)
class Parameterization:
    """Coordinate system for sampling, plus the optional m replacement rule.

    ``m_override`` applies only to pp_original and is one of "keep",
    "nu_count" (m = n_u), "sharkey_interval" (midpoint of the tuned
    interval), or an explicit numeric value. ``fix_xi`` pins the shape
    parameter, removing it from the sampled coordinates.
    """

    kind: str
    m_override: str | float | None = None
    fix_xi: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in PARAMETERIZATION_KINDS:
            raise ConfigError(
                f"unknown parameterization {self.kind!r}; expected one of {PARAMETERIZATION_KINDS}"
            )
        if self.m_override is not None:
            if self.kind != "pp_original":
                raise ConfigError("m_override is only valid for pp_original")
            if isinstance(self.m_override, str):
                if self.m_override not in M_OVERRIDE_NAMES:
                    raise ConfigError(
                        f"unknown m_override {self.m_override!r}; expected one of "
                        f"{M_OVERRIDE_NAMES} or a number"
                    )
            elif not (float(self.m_override) > 0):
                raise ConfigError("explicit m_override must be positive")


# Likelihood kernels on raw coordinates. Support violations yield -inf.

def pp_loglik_original_raw(mu: float, sigma: float, xi: float, d: ExceedanceData) -> float:
    if not (sigma > 0 and math.isfinite(mu) and math.isfinite(xi)):
        return _NEG_INF
    w = (d.u - mu) / sigma
    s = (d.xs - mu) / sigma
    if abs(xi) < XI_SWITCH:
        if -w > 700.0:
            return _NEG_INF
        lam = d.m * math.exp(-w)
        return -lam - d.n_u * math.log(sigma) - float(np.sum(s))
    tw = 1.0 + xi * w
    ts = 1.0 + xi * s
    if tw <= 0 or np.min(ts) <= 0:
        return _NEG_INF
    log_lam_excess = -math.log(tw) / xi
    if log_lam_excess > 700.0:  # intensity overflows: likelihood is zero
        return _NEG_INF
    lam = d.m * math.exp(log_lam_excess)
    if not math.isfinite(lam):
        return _NEG_INF
    return -lam - d.n_u * math.log(sigma) - (1.0 + 1.0 / xi) * float(np.sum(np.log(ts)))


def pp_loglik_orthogonal_raw(r: float, nu: float, xi: float, d: ExceedanceData) -> float:
    if not (r > 0 and nu > 0 and xi > -1.0 and math.isfinite(r) and math.isfinite(nu)):
        return _NEG_INF
    y = d.excesses
    if abs(xi) < XI_SWITCH:
        return -r + d.n_u * math.log(r / d.m) - d.n_u * math.log(nu) - float(np.sum(y)) / nu
    t = 1.0 + (xi * (1.0 + xi) / nu) * y
    if np.min(t) <= 0:
        return _NEG_INF
    return (
        -r
        + d.n_u * math.log(r / d.m)
        - d.n_u * math.log(nu / (1.0 + xi))
        - (1.0 + 1.0 / xi) * float(np.sum(np.log(t)))
    )


def gpd_loglik_raw(sigma_tilde: float, xi: float, d: ExceedanceData) -> float:
    if not (sigma_tilde > 0 and math.isfinite(sigma_tilde) and math.isfinite(xi)):
        return _NEG_INF
    y = d.excesses
    if abs(xi) < XI_SWITCH:
        return -d.n_u * math.log(sigma_tilde) - float(np.sum(y)) / sigma_tilde
    t = 1.0 + xi * y / sigma_tilde
    if np.min(t) <= 0:
        return _NEG_INF
    return -d.n_u * math.log(sigma_tilde) - (1.0 + 1.0 / xi) * float(np.sum(np.log(t)))


def gpd_loglik_orthogonal_raw(nu: float, xi: float, d: ExceedanceData) -> float:
    if not (nu > 0 and xi > -1.0):
        return _NEG_INF
    return gpd_loglik_raw(nu / (1.0 + xi), xi, d)


# Typed wrappers.

def pp_loglik_original(p: OriginalParams, d: ExceedanceData) -> float:
    """Poisson-process log-likelihood in (mu, sigma, xi) at the data's scaling m."""
    return pp_loglik_original_raw(p.mu, p.sigma, p.xi, d)


def pp_loglik_orthogonal(p, d: ExceedanceData) -> float:
    """Poisson-process log-likelihood in orthogonal coordinates (r, nu, xi).

    Identical as a function of the data to :func:`pp_loglik_original`
    composed with the coordinate change (no Jacobian is involved).
    """
    return pp_loglik_orthogonal_raw(p.r, p.nu, p.xi, d)


def gpd_loglik(p, d: ExceedanceData) -> float:
    """GPD log-likelihood of the excesses; accepts GpdParams or orthogonal (nu, xi)."""
    if isinstance(p, GpdParams):
        return gpd_loglik_raw(p.sigma_tilde, p.xi, d)
    return gpd_loglik_orthogonal_raw(p.nu, p.xi, d)


_COMPATIBLE_PRIORS = {
    "pp_original": ("jeffreys_original", "flat"),
    "pp_orthogonal": ("jeffreys_orthogonal", "pc_composite", "flat"),
    "gpd_original": ("flat",),
    "gpd_orthogonal": ("pc_composite", "flat"),
}

_LABELS = {
    "pp_original": ("mu", "sigma", "xi"),
    "pp_orthogonal": ("r", "nu", "xi"),
    "gpd_original": ("sigma_tilde", "xi"),
    "gpd_orthogonal": ("nu", "xi"),
}

# Lower bound of each coordinate's support, or None for a free coordinate.
# Bounded coordinates are sampled as log(coord - bound); the shape bound is
# prior-dependent (the Jeffreys priors live on xi > -1/2) and is resolved
# when the target is assembled.
_COORD_BOUNDS = {
    "pp_original": (None, 0.0, "xi"),
    "pp_orthogonal": (0.0, 0.0, "xi"),
    "gpd_original": (0.0, "xi"),
    "gpd_orthogonal": (0.0, "xi"),
}

# Shape-coordinate treatment by prior family. Under the Jeffreys priors the
# shape lives on xi > -1/2 with the prior blowing up like (1+2xi)^(-1/2) at
# the boundary; sampling zeta = sqrt(1+2xi) makes that factor exactly the
# Jacobian, so the prior is flat in zeta and the spike disappears from the
# sampled density. Other priors sample xi untransformed.
_XI_SQRT = "sqrt_onep2xi"
_XI_MAP = {
    "jeffreys_orthogonal": _XI_SQRT,
    "jeffreys_original": _XI_SQRT,
    "pc_composite": None,
    "flat": None,
}


class LogPosterior:
    """A sampler-ready posterior target.

    ``log_density(theta)`` evaluates log-likelihood + log-prior at a point in
    the model's natural coordinates. ``eval(z)`` (also ``__call__``) works on
    the unconstrained sampling coordinates and includes the log-Jacobian of
    the coordinate map. Both return -inf outside the support and never raise.
    """

    def __init__(
        self,
        param: Parameterization,
        prior: PriorSpec,
        data: ExceedanceData,
        m_reference: float,
    ) -> None:
        self.param = param
        self.prior = prior
        self.data = data
        self.m_used = data.m
        self.m_reference = m_reference
        full_labels = _LABELS[param.kind]
        maps = [
            _XI_MAP[prior.kind] if b == "xi" else b for b in _COORD_BOUNDS[param.kind]
        ]
        if param.fix_xi is not None:
            keep = [i for i, lab in enumerate(full_labels) if lab != "xi"]
        else:
            keep = list(range(len(full_labels)))
        self._keep = keep
        self._full_dim = len(full_labels)
        self.labels = tuple(full_labels)
        self._maps = [maps[i] for i in keep]
        names = []
        for j, i in enumerate(keep):
            if self._maps[j] is None:
                names.append(full_labels[i])
            elif self._maps[j] == _XI_SQRT:
                names.append("sqrt_one_plus_two_xi")
            else:
                names.append("log_" + full_labels[i])
        self.sampling_labels = tuple(names)
        self.dimension = len(keep)
        self._loglik = self._make_loglik()
        self._logprior = self._make_logprior()

    def _make_loglik(self) -> Callable[..., float]:
        kind, d = self.param.kind, self.data
        if kind == "pp_original":
            return lambda th: pp_loglik_original_raw(th[0], th[1], th[2], d)
        if kind == "pp_orthogonal":
            return lambda th: pp_loglik_orthogonal_raw(th[0], th[1], th[2], d)
        if kind == "gpd_original":
            return lambda th: gpd_loglik_raw(th[0], th[1], d)
        return lambda th: gpd_loglik_orthogonal_raw(th[0], th[1], d)

    def _make_logprior(self) -> Callable[..., float]:
        kind, pk = self.param.kind, self.prior.kind
        if pk not in _COMPATIBLE_PRIORS[kind]:
            raise ConfigError(
                f"prior {pk!r} is not compatible with parameterization {kind!r}; "
                f"allowed: {_COMPATIBLE_PRIORS[kind]}"
            )
        if pk == "flat":
            return lambda th: 0.0
        if pk == "jeffreys_orthogonal":
            return lambda th: jeffreys_orthogonal_logpdf(th[0], th[1], th[2])
        if pk == "jeffreys_original":
            u = self.data.u
            return lambda th: jeffreys_original_logpdf(th[0], th[1], th[2], u)
        cfg: PcPriorConfig = self.prior.pc  # type: ignore[assignment]
        if kind == "pp_orthogonal":
            return lambda th: pc_composite_logpdf(th[0], th[1], th[2], cfg)
        # gpd_orthogonal: same composite form with the intensity coordinate absent
        return lambda th: (pc_logpdf(th[1], cfg) - math.log(th[0])) if th[0] > 0 else _NEG_INF

    # Coordinate maps -------------------------------------------------------

    def to_constrained(self, z: np.ndarray) -> np.ndarray:
        """Map a sampling vector to the full natural coordinates."""
        z = np.asarray(z, dtype=float)
        theta = np.empty(self._full_dim)
        if self.param.fix_xi is not None:
            theta[self.labels.index("xi")] = self.param.fix_xi
        for j, i in enumerate(self._keep):
            mp = self._maps[j]
            if mp is None:
                theta[i] = z[j]
            elif mp == _XI_SQRT:
                theta[i] = 0.5 * (z[j] * z[j] - 1.0) if z[j] > 0 else -1.0
            else:
                theta[i] = mp + math.exp(z[j])
        return theta

    def to_unconstrained(self, theta: np.ndarray) -> np.ndarray:
        """Map full natural coordinates to the sampling vector."""
        theta = np.asarray(theta, dtype=float)
        z = np.empty(self.dimension)
        for j, i in enumerate(self._keep):
            mp = self._maps[j]
            if mp is None:
                z[j] = theta[i]
            elif mp == _XI_SQRT:
                z[j] = math.sqrt(1.0 + 2.0 * theta[i])
            else:
                z[j] = math.log(theta[i] - mp)
        return z

    # Evaluation ------------------------------------------------------------

    def log_density(self, theta) -> float:
        """Log-likelihood plus log-prior at a point in natural coordinates."""
        theta = np.asarray(theta, dtype=float)
        ll = self._loglik(theta)
        if ll == _NEG_INF or not math.isfinite(ll):
            return _NEG_INF
        lp = self._logprior(theta)
        if not math.isfinite(lp):
            return _NEG_INF
        return ll + lp

    def eval(self, z) -> float:
        """Target density on the sampling scale, log-Jacobian included."""
        z = np.asarray(z, dtype=float)
        log_jac = 0.0
        for j in range(self.dimension):
            mp = self._maps[j]
            if mp is None:
                continue
            if mp == _XI_SQRT:
                if z[j] <= 0:
                    return _NEG_INF
                log_jac += math.log(z[j])
            else:
                if z[j] > 700.0:  # exp would overflow
                    return _NEG_INF
                log_jac += z[j]
        theta = self.to_constrained(z)
        ld = self.log_density(theta)
        if ld == _NEG_INF:
            return _NEG_INF
        return ld + log_jac

    def __call__(self, z) -> float:
        return self.eval(z)


def resolve_m_override(data: ExceedanceData, m_override: str | float | None) -> float:
    """Resolve an m replacement rule to a concrete scaling factor."""
    if m_override is None or m_override == "keep":
        return data.m
    if m_override == "nu_count":
        return float(data.n_u)
    if m_override == "sharkey_interval":
        # Imported here to avoid a module cycle (simulate depends on model).
        from .simulate import ml_fit, tune_m

        fit = ml_fit(data, Parameterization("gpd_orthogonal"))
        xi_hat = float(fit.params[1])
        return float(tune_m(data, xi_hat).chosen_m)
    return float(m_override)


def build_log_posterior(
    param: Parameterization, prior: PriorSpec, data: ExceedanceData
) -> LogPosterior:
    """Assemble the posterior target for a parameterization/prior pair.

    For pp_original with an m override, the data's scaling factor is replaced
    before building the likelihood; the returned target records both the m
    actually used and the reference m so chains can be mapped back.
    """
    m_reference = data.m
    if param.kind == "pp_original" and param.m_override is not None:
        m_used = resolve_m_override(data, param.m_override)
        if m_used != data.m:
            data = replace(data, m=m_used)
    return LogPosterior(param=param, prior=prior, data=data, m_reference=m_reference)


def posterior_predictive_draw(chains, ctx: ModelContext, rng: np.random.Generator) -> float:
    """Draw one new exceedance above ctx.u from the posterior predictive.

    Picks a posterior draw uniformly at random, then samples a single GPD
    excess at that draw's parameters.
    """
    draws = chains.draws
    if draws.size == 0:
        raise ValueError("chains contain no draws")
    flat = draws.reshape(-1, draws.shape[-1])
    idx = int(rng.integers(flat.shape[0]))
    theta = flat[idx]
    labels = chains.labels
    if "sigma_tilde" in labels:
        st = float(theta[labels.index("sigma_tilde")])
        xi = float(theta[labels.index("xi")])
    elif "mu" in labels:
        mu = float(theta[labels.index("mu")])
        sigma = float(theta[labels.index("sigma")])
        xi = float(theta[labels.index("xi")])
        st = sigma + xi * (ctx.u - mu)
    else:
        raise ValueError(f"cannot locate GPD scale in chain labels {labels}")
    q = float(rng.random())
    return ctx.u + float(gpd_quantile(q, GpdParams(sigma_tilde=st, xi=xi)))


# Exceedance file format: a CSV with a "value" column (optionally a leading
# "date" column) plus a JSON sidecar holding u, m and n_u.

def write_exceedances(data: ExceedanceData, path: str | Path, dates=None) -> tuple[Path, Path]:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        if dates is not None:
            fh.write("date,value\n")
            for dt, v in zip(dates, data.xs):
                fh.write(f"{dt},{float(v)!r}\n")
        else:
            fh.write("value\n")
            for v in data.xs:
                fh.write(f"{float(v)!r}\n")
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump({"u": data.u, "m": data.m, "n_u": data.n_u}, fh, indent=2)
        fh.write("\n")
    return path, meta_path


def read_exceedances(path: str | Path, u: float | None = None, m: float | None = None) -> ExceedanceData:
    path = Path(path)
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    if (u is None or m is None) and meta_path.exists():
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        u = meta["u"] if u is None else u
        m = meta["m"] if m is None else m
    if u is None or m is None:
        raise ConfigError(f"u and m are required (no sidecar found at {meta_path})")
    values = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        try:
            vcol = header.index("value")
        except ValueError as exc:
            raise ConfigError(f"{path}: expected a 'value' column, got {header}") from exc
        for line in fh:
            line = line.strip()
            if line:
                values.append(float(line.split(",")[vcol]))
    return ExceedanceData(u=float(u), m=float(m), xs=np.asarray(values))
