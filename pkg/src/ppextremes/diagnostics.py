"""Convergence diagnostics: autocorrelation, effective sample size, and the
quantile-local potential scale reduction factor with its supremum summary.

ESS follows the pooled between/within construction with the lag sum
truncated by Geyer's initial monotone positive-pair rule. The local factor
is the classical split-chain R-hat computed on indicator transforms
1{theta <= x}, which makes it invariant under strictly increasing maps of
the coordinate; its supremum over x is attained at pooled draw values, so
the full-grid mode is exact.

Chains are split in half before R-hat and ESS (standard practice; pass
split=False to disable).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RHAT_GRID_LIMIT = 4096
RHAT_QUANTILE_GRID = 512


class DegenerateChainError(ValueError):
    """A diagnostic is undefined on constant (zero-variance) input."""


def _as_matrix(chains) -> np.ndarray:
    x = np.asarray(chains, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("expected a chain (N,) or stacked chains (M, N)")
    return x


def _coord_matrix(chains, coord: int) -> np.ndarray:
    if hasattr(chains, "draws"):
        return np.asarray(chains.draws[:, :, coord], dtype=float)
    return _as_matrix(chains)


def _split(x: np.ndarray) -> np.ndarray:
    m, n = x.shape
    half = n // 2
    return np.concatenate([x[:, :half], x[:, n - half :]], axis=0)


def _acov_fft(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased (divide-by-N) autocovariances per row, lags 0..max_lag."""
    m, n = x.shape
    xc = x - x.mean(axis=1, keepdims=True)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft, axis=1)
    acov = np.fft.irfft(f * np.conj(f), nfft, axis=1)[:, : max_lag + 1].real
    return acov / n


def autocorrelation(chains, max_lag: int) -> np.ndarray:
    """Autocorrelation at lags 0..max_lag, averaged across chains.

    Each chain is centered by its own mean; autocovariances use the biased
    divide-by-N estimator and are normalized by the averaged lag-0 value.
    """
    x = _as_matrix(chains)
    if x.shape[1] <= max_lag:
        raise ValueError(f"chain length {x.shape[1]} must exceed max_lag {max_lag}")
    acov = _acov_fft(x, max_lag).mean(axis=0)
    if acov[0] <= 0:
        raise DegenerateChainError("autocorrelation is undefined for a constant chain")
    return acov / acov[0]


def ess(chains, coord: int = 0, split: bool = True) -> float:
    """Effective sample size MN / (1 + 2 sum rho_t) for one coordinate.

    Uses the pooled autocorrelation (within-chain autocovariances against
    the between+within variance), with Geyer's initial monotone
    positive-pair truncation of the lag sum.
    """
    x = _coord_matrix(chains, coord)
    m_orig, n_orig = x.shape
    if m_orig < 2:
        raise ValueError("ess requires at least 2 chains")
    if n_orig < 8:
        raise ValueError("ess requires at least 8 draws per chain")
    if split:
        x = _split(x)
    m, n = x.shape
    w = x.var(axis=1, ddof=1).mean()
    b_over_n = x.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * w + b_over_n
    if var_plus <= 0 or not math.isfinite(var_plus):
        raise DegenerateChainError("ess is undefined: zero pooled variance")
    max_lag = n - 1
    acov = _acov_fft(x, max_lag).mean(axis=0)
    rho = 1.0 - (w - acov) / var_plus
    # Geyer pairs P_k = rho_{2k} + rho_{2k+1}: truncate at the first
    # non-positive pair, then enforce monotone non-increase.
    n_pairs = (max_lag + 1) // 2
    pair_sum = 0.0
    prev = math.inf
    for k in range(n_pairs):
        p = rho[2 * k] + rho[2 * k + 1]
        if p <= 0:
            break
        p = min(p, prev)
        pair_sum += p
        prev = p
    tau = max(2.0 * pair_sum - 1.0, 1.0 / (m_orig * n_orig))
    return float(m_orig * n_orig / tau)


def ess_trajectory(chains, coord: int = 0, n_points: int = 20, split: bool = True) -> np.ndarray:
    """ESS computed on growing prefixes of the chains.

    Returns an array of shape (n_points, 2): draws used per chain, ESS.
    """
    x = _coord_matrix(chains, coord)
    n = x.shape[1]
    lengths = np.unique(np.linspace(8, n, n_points).astype(int))
    lengths = lengths[lengths >= 8]
    out = np.empty((lengths.size, 2))
    for i, ln in enumerate(lengths):
        out[i, 0] = ln
        out[i, 1] = ess(x[:, :ln], split=split)
    return out


def local_rhat(chains, coord: int = 0, x: float = 0.0, split: bool = True) -> float:
    """Split-chain R-hat of the indicator transform 1{theta <= x}.

    Degenerate indicator configurations (all zero or all one) return
    exactly 1 by convention; chains separated by x yield +inf.
    """
    z = (_coord_matrix(chains, coord) <= x).astype(float)
    if z.shape[0] < 2:
        raise ValueError("local_rhat requires at least 2 chains")
    if split:
        z = _split(z)
    m, n = z.shape
    total = z.sum()
    if total == 0 or total == z.size:
        return 1.0
    w = z.var(axis=1, ddof=1).mean()
    b_over_n = z.mean(axis=1).var(ddof=1)
    if w == 0:
        return 1.0 if b_over_n == 0 else float("inf")
    var_plus = (n - 1) / n * w + b_over_n
    return float(math.sqrt(var_plus / w))


def rhat_grid(chains, coord: int = 0) -> np.ndarray:
    """Evaluation grid for the local R-hat curve.

    All distinct pooled draw values when there are at most 4096 of them
    (exact mode: indicator statistics only change at data points), else 512
    equispaced quantiles of the pooled draws.
    """
    pooled = _coord_matrix(chains, coord).ravel()
    distinct = np.unique(pooled)
    if distinct.size <= RHAT_GRID_LIMIT:
        return distinct
    return np.unique(np.quantile(pooled, np.linspace(0.0, 1.0, RHAT_QUANTILE_GRID)))


def rhat_curve(chains, coord: int = 0, grid=None, split: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Local R-hat evaluated over a grid of x values (vectorized)."""
    x = _coord_matrix(chains, coord)
    if x.shape[0] < 2:
        raise ValueError("rhat_curve requires at least 2 chains")
    if grid is None:
        grid = rhat_grid(chains, coord)
    grid = np.asarray(grid, dtype=float)
    if split:
        x = _split(x)
    m, n = x.shape
    vals = np.empty(grid.size)
    block = 256
    for start in range(0, grid.size, block):
        g = grid[start : start + block]
        z = (x[:, :, None] <= g[None, None, :]).astype(float)
        means = z.mean(axis=1)
        w = z.var(axis=1, ddof=1).mean(axis=0)
        b_over_n = means.var(axis=0, ddof=1)
        total = means.mean(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            var_plus = (n - 1) / n * w + b_over_n
            v = np.sqrt(var_plus / w)
        v[(w == 0) & (b_over_n > 0)] = np.inf
        v[(w == 0) & (b_over_n == 0)] = 1.0
        v[(total == 0) | (total == 1)] = 1.0
        vals[start : start + g.size] = v
    return grid, vals


def rhat_infinity(chains, coord: int = 0, split: bool = True) -> float:
    """Supremum of the local R-hat over the evaluation grid."""
    _, vals = rhat_curve(chains, coord, split=split)
    return float(np.max(vals))


@dataclass(frozen=True)
class DiagnosticsReport:
    """Per-coordinate diagnostic curves and scalar summaries."""

    labels: tuple[str, ...]
    acf: np.ndarray                       # (n_coords, max_lag + 1)
    ess_trajectory: tuple[np.ndarray, ...]  # per coordinate, (n_points, 2)
    rhat_curves: tuple[tuple[np.ndarray, np.ndarray], ...]
    rhat_inf: tuple[float, ...]
    ess_final: tuple[float, ...]
    threshold: float


def build_report(
    chains,
    max_lag: int = 50,
    n_ess_points: int = 20,
    threshold: float = 1.03,
    split: bool = True,
) -> DiagnosticsReport:
    """Compute the full diagnostic set for every coordinate of a ChainSet.

    The R-hat threshold is carried as a display annotation only; nothing
    fails when it is crossed.
    """
    labels = tuple(chains.labels)
    n_coords = chains.draws.shape[2]
    max_lag = min(max_lag, chains.draws.shape[1] - 1)
    acf = np.empty((n_coords, max_lag + 1))
    trajs = []
    curves = []
    rinf = []
    essf = []
    for k in range(n_coords):
        x = chains.draws[:, :, k]
        try:
            acf[k] = autocorrelation(x, max_lag)
        except DegenerateChainError:
            acf[k] = np.nan
            acf[k, 0] = 1.0
        trajs.append(ess_trajectory(x, n_points=n_ess_points, split=split))
        curves.append(rhat_curve(chains, k, split=split))
        rinf.append(float(np.max(curves[-1][1])))
        essf.append(ess(x, split=split))
    return DiagnosticsReport(
        labels=labels,
        acf=acf,
        ess_trajectory=tuple(trajs),
        rhat_curves=tuple(curves),
        rhat_inf=tuple(rinf),
        ess_final=tuple(essf),
        threshold=threshold,
    )


def report_to_csv(report: DiagnosticsReport, out_dir: str | Path, prefix: str = "") -> list[Path]:
    """Write one CSV per diagnostic (acf, ess trajectory, rhat curve)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    p = out_dir / f"{prefix}acf.csv"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("coord,lag,rho\n")
        for k, lab in enumerate(report.labels):
            for lag, rho in enumerate(report.acf[k]):
                fh.write(f"{lab},{lag},{float(rho)!r}\n")
    paths.append(p)

    p = out_dir / f"{prefix}ess.csv"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("coord,draws,ess\n")
        for k, lab in enumerate(report.labels):
            for ln, e in report.ess_trajectory[k]:
                fh.write(f"{lab},{int(ln)},{float(e)!r}\n")
    paths.append(p)

    p = out_dir / f"{prefix}rhat.csv"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("coord,x,rhat\n")
        for k, lab in enumerate(report.labels):
            xs, vals = report.rhat_curves[k]
            for x, v in zip(xs, vals):
                fh.write(f"{lab},{float(x)!r},{float(v)!r}\n")
    paths.append(p)
    return paths


def report_summary_json(report: DiagnosticsReport, path: str | Path) -> Path:
    path = Path(path)
    payload = {
        "threshold": report.threshold,
        "coords": {
            lab: {"ess": report.ess_final[k], "rhat_inf": report.rhat_inf[k]}
            for k, lab in enumerate(report.labels)
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path
