"""Multi-chain adaptive random-walk Metropolis-Hastings.

Each iteration sweeps the coordinates one at a time: a Gaussian step on a
single coordinate with its own scale, accepted or rejected on its own.
Scales adapt during burn-in by Robbins-Monro toward the target acceptance
rate per coordinate and are frozen afterwards, so detailed balance holds on
the retained draws. There is no cross-coordinate proposal structure at all:
how well a coordinate system suits one-at-a-time moves (that is, how close
its posterior is to independence) is exactly what the parameterization
comparisons measure.

Chains own independent RNG streams derived from (seed, chain index); a run
is bit-reproducible regardless of execution order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    DomainError,
    ModelContext,
    OriginalParams,
    OrthogonalParams,
    rescale_blocks,
    to_original,
)


class InitializationError(RuntimeError):
    """No finite starting point could be found for a chain."""


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 4
    n_draws: int = 1000
    n_burnin: int = 1000
    target_accept: float = 0.234
    seed: int = 0
    init: np.ndarray | None = None  # unconstrained coordinates; resolved by callers
    jitter: float = 0.1

    def __post_init__(self) -> None:
        if min(self.n_chains, self.n_draws, self.n_burnin) < 1:
            raise ValueError("n_chains, n_draws and n_burnin must all be >= 1")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")


@dataclass(frozen=True)
class ChainSet:
    """M chains by N draws, in natural coordinates plus the raw sampling space.

    ``draws`` holds the current coordinate system (natural model coordinates
    after :func:`run_chains`, reference coordinates after
    :func:`transform_chains`); ``raw_draws`` keeps the unconstrained vectors
    the kernel actually walked.
    """

    draws: np.ndarray
    raw_draws: np.ndarray
    labels: tuple[str, ...]
    raw_labels: tuple[str, ...]
    acceptance_rates: tuple[float, ...]
    seeds: tuple[tuple[int, int], ...]
    proposal_scales: np.ndarray
    n_flagged: int = 0
    flagged: tuple[tuple[int, int], ...] = ()
    info: dict | None = None

    def __post_init__(self) -> None:
        for name in ("draws", "raw_draws", "proposal_scales"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.draws.ndim != 3 or self.raw_draws.ndim != 3:
            raise ValueError("draws and raw_draws must have shape (chains, draws, coords)")
        if not np.all(np.isfinite(self.draws)):
            raise ValueError("draws contain non-finite values")

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    @property
    def n_coords(self) -> int:
        return self.draws.shape[2]


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chain,)))


def _initial_scales(d: int) -> np.ndarray:
    """Unit starting scale per coordinate; burn-in adaptation takes it from there."""
    return np.ones(d)


def run_chains(target, cfg: SamplerConfig) -> ChainSet:
    """Run M adaptive Metropolis-Hastings chains against ``target``.

    ``target`` must expose ``dimension``, ``labels``, ``sampling_labels``,
    ``to_constrained`` and be callable on unconstrained vectors.
    """
    if cfg.init is None:
        raise InitializationError(
            "no initial point: set SamplerConfig.init (run_inference derives a moment-based one)"
        )
    init = np.asarray(cfg.init, dtype=float)
    d = target.dimension
    if init.shape != (d,):
        raise InitializationError(f"init has shape {init.shape}, target dimension is {d}")

    scales0 = _initial_scales(d)
    M, N = cfg.n_chains, cfg.n_draws
    n_full = target.to_constrained(init).size
    raw = np.empty((M, N, d))
    nat = np.empty((M, N, n_full))
    accept_rates = []
    final_scales = np.empty((M, d))
    seeds = tuple((cfg.seed, c) for c in range(M))

    for c in range(M):
        rng = _chain_rng(cfg.seed, c)
        x = None
        for _ in range(100):
            cand = init + cfg.jitter * (np.abs(init) + 0.1) * rng.standard_normal(d)
            if math.isfinite(target(cand)):
                x = cand
                break
        if x is None:
            raise InitializationError(
                f"chain {c}: no finite starting point found after 100 jitter attempts"
            )
        lp = target(x)
        log_scale = np.log(scales0)
        for t in range(1, cfg.n_burnin + 1):
            steps = np.exp(log_scale) * rng.standard_normal(d)
            us = rng.random(d)
            gain = t**-0.5
            for i in range(d):
                prop = x.copy()
                prop[i] += steps[i]
                lp_prop = target(prop)
                log_ratio = lp_prop - lp
                alpha = math.exp(min(0.0, log_ratio)) if math.isfinite(log_ratio) else 0.0
                if math.log(us[i]) < log_ratio:
                    x, lp = prop, lp_prop
                log_scale[i] += gain * (alpha - cfg.target_accept)
        scale = np.exp(log_scale)  # frozen for the retained draws
        final_scales[c] = scale
        n_accept = 0
        for t in range(N):
            steps = scale * rng.standard_normal(d)
            us = rng.random(d)
            for i in range(d):
                prop = x.copy()
                prop[i] += steps[i]
                lp_prop = target(prop)
                if math.log(us[i]) < lp_prop - lp:
                    x, lp = prop, lp_prop
                    n_accept += 1
            raw[c, t] = x
            nat[c, t] = target.to_constrained(x)
        accept_rates.append(n_accept / (N * d))

    return ChainSet(
        draws=nat,
        raw_draws=raw,
        labels=tuple(target.labels),
        raw_labels=tuple(target.sampling_labels),
        acceptance_rates=tuple(accept_rates),
        seeds=seeds,
        proposal_scales=final_scales,
        info={"seed": cfg.seed, "n_burnin": cfg.n_burnin, "target_accept": cfg.target_accept},
    )


def transform_chains(
    cs: ChainSet,
    param,
    ctx: ModelContext,
    m_used: float | None = None,
) -> ChainSet:
    """Map chains elementwise to the reference coordinate system.

    Reference coordinates are (mu, sigma, xi) at ctx.m for the
    Poisson-process parameterizations and (sigma_tilde, xi) for the GPD
    ones. Draws where the map is singular are replaced by the previous
    valid draw of their chain (the first valid one for a leading run) and
    reported via ``n_flagged``/``flagged``; the array shape is preserved.
    """
    if m_used is None:
        m_used = (cs.info or {}).get("m_used", ctx.m)
    kind = param.kind
    labels = cs.labels
    M, N, _ = cs.draws.shape
    flagged: list[tuple[int, int]] = []

    if kind == "gpd_original":
        out = cs.draws.copy()
        out_labels = ("sigma_tilde", "xi")
    elif kind == "gpd_orthogonal":
        i_nu, i_xi = labels.index("nu"), labels.index("xi")
        nu = cs.draws[:, :, i_nu]
        xi = cs.draws[:, :, i_xi]
        with np.errstate(divide="ignore", invalid="ignore"):
            st = nu / (1.0 + xi)
        out = np.stack([st, xi], axis=-1)
        bad = ~np.isfinite(st) | (st <= 0)
        flagged = [(int(c), int(t)) for c, t in zip(*np.nonzero(bad))]
        out_labels = ("sigma_tilde", "xi")
    else:
        out = np.empty_like(cs.draws)
        out_labels = ("mu", "sigma", "xi")
        for c in range(M):
            for t in range(N):
                theta = cs.draws[c, t]
                try:
                    if kind == "pp_orthogonal":
                        p = to_original(
                            OrthogonalParams(r=theta[0], nu=theta[1], xi=theta[2]), ctx
                        )
                    else:  # pp_original, possibly at an overridden scaling factor
                        p = OriginalParams(mu=theta[0], sigma=theta[1], xi=theta[2])
                        if m_used != ctx.m:
                            p = rescale_blocks(p, m_used, ctx.m)
                    out[c, t] = (p.mu, p.sigma, p.xi)
                except DomainError:
                    flagged.append((c, t))
                    out[c, t] = np.nan

    if flagged:
        for c, t in flagged:
            prev = t - 1
            while prev >= 0 and not np.all(np.isfinite(out[c, prev])):
                prev -= 1
            if prev >= 0:
                out[c, t] = out[c, prev]
            else:
                nxt = t + 1
                while nxt < N and not np.all(np.isfinite(out[c, nxt])):
                    nxt += 1
                if nxt == N:
                    raise DomainError(f"chain {c}: every draw is singular under the transform")
                out[c, t] = out[c, nxt]

    info = dict(cs.info or {})
    info.update({"m_used": m_used, "m_reference": ctx.m, "u": ctx.u, "kind": kind})
    return ChainSet(
        draws=out,
        raw_draws=cs.raw_draws,
        labels=out_labels,
        raw_labels=cs.raw_labels,
        acceptance_rates=cs.acceptance_rates,
        seeds=cs.seeds,
        proposal_scales=cs.proposal_scales,
        n_flagged=len(flagged),
        flagged=tuple(flagged),
        info=info,
    )


def chainset_to_csv(cs: ChainSet, path: str | Path) -> tuple[Path, Path]:
    """Write draws as columnar CSV (chain, draw, coords..., sampling coords...)
    plus a JSON sidecar with seeds, acceptance rates and proposal scales."""
    path = Path(path)
    cols = list(cs.labels) + ["sampling_" + lab for lab in cs.raw_labels]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("chain,draw," + ",".join(cols) + "\n")
        for c in range(cs.n_chains):
            for t in range(cs.n_draws):
                vals = [repr(float(v)) for v in cs.draws[c, t]] + [repr(float(v)) for v in cs.raw_draws[c, t]]
                fh.write(f"{c},{t}," + ",".join(vals) + "\n")
    side = {
        "labels": list(cs.labels),
        "raw_labels": list(cs.raw_labels),
        "seeds": [list(s) for s in cs.seeds],
        "acceptance_rates": list(cs.acceptance_rates),
        "proposal_scales": cs.proposal_scales.tolist(),
        "n_flagged": cs.n_flagged,
        "info": cs.info or {},
    }
    side_path = path.with_suffix(path.suffix + ".meta.json")
    with open(side_path, "w", encoding="utf-8") as fh:
        json.dump(side, fh, indent=2)
        fh.write("\n")
    return path, side_path


def chainset_from_csv(path: str | Path) -> ChainSet:
    """Rebuild a ChainSet from :func:`chainset_to_csv` output."""
    path = Path(path)
    side_path = path.with_suffix(path.suffix + ".meta.json")
    with open(side_path, encoding="utf-8") as fh:
        side = json.load(fh)
    labels = tuple(side["labels"])
    raw_labels = tuple(side["raw_labels"])
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    chains = rows[:, 0].astype(int)
    M = chains.max() + 1
    N = rows.shape[0] // M
    k, dr = len(labels), len(raw_labels)
    draws = rows[:, 2 : 2 + k].reshape(M, N, k)
    raw = rows[:, 2 + k : 2 + k + dr].reshape(M, N, dr)
    return ChainSet(
        draws=draws,
        raw_draws=raw,
        labels=labels,
        raw_labels=raw_labels,
        acceptance_rates=tuple(side["acceptance_rates"]),
        seeds=tuple((int(a), int(b)) for a, b in side["seeds"]),
        proposal_scales=np.asarray(side["proposal_scales"]),
        n_flagged=int(side.get("n_flagged", 0)),
        info=side.get("info") or {},
    )
