"""Daily-series ingestion and preprocessing: CSV loading with missing-value
masking, seasonal filtering, and runs declustering of threshold exceedances.

Gap semantics: a new cluster starts when the calendar-day gap between
successive exceedances is at least ``gap_days`` (exceedances closer than the
gap merge), so data gaps count as separation. Season membership is tested
per month, which lets a season such as December-May span the year end.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .model import ExceedanceData

NA_SENTINELS = {"", "na", "nan", "null", "none", "-999", "-9999"}


@dataclass(frozen=True)
class DailySeries:
    """Calendar-dated measurements with a missing-value mask (True = missing)."""

    dates: np.ndarray   # datetime64[D]
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if not (dates.shape == values.shape == mask.shape):
            raise ValueError("dates, values and mask must have identical shapes")
        if dates.size and np.any(np.diff(dates).astype(int) <= 0):
            raise ValueError("dates must be strictly increasing")
        if not np.all(np.isfinite(values[~mask])):
            raise ValueError("unmasked values must be finite")
        for name, arr in (("dates", dates), ("values", values), ("mask", mask)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.dates.size)


@dataclass(frozen=True)
class DeclusterConfig:
    """Runs-declustering settings: minimum separation, season months, threshold."""

    threshold_u: float
    gap_days: int = 3
    season: tuple[int, ...] | None = None  # calendar months, e.g. (12, 1, 2, 3, 4, 5)

    def __post_init__(self) -> None:
        if self.gap_days < 1:
            raise ValueError("gap_days must be >= 1")
        if not math.isfinite(self.threshold_u):
            raise ValueError("threshold_u must be finite")
        if self.season is not None:
            months = tuple(int(mo) for mo in self.season)
            if any(mo < 1 or mo > 12 for mo in months):
                raise ValueError("season months must lie in 1..12")
            object.__setattr__(self, "season", months)


def load_csv(path: str | Path, date_column: int = 0, value_column: int = 1) -> DailySeries:
    """Read a two-column (ISO-8601 date, numeric value) CSV into a DailySeries.

    A header row is detected and skipped; NA-like sentinels become masked
    entries; duplicate or retrograde dates and malformed rows are rejected
    with the offending line number.
    """
    path = Path(path)
    dates: list[date] = []
    values: list[float] = []
    mask: list[bool] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            raw_date = row[date_column].strip()
            if lineno == 1:
                try:
                    date.fromisoformat(raw_date)
                except ValueError:
                    continue  # header row
            try:
                dt = date.fromisoformat(raw_date)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse date {raw_date!r}") from exc
            raw_val = row[value_column].strip()
            if raw_val.lower() in NA_SENTINELS:
                values.append(np.nan)
                mask.append(True)
            else:
                try:
                    values.append(float(raw_val))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: cannot parse value {raw_val!r}") from exc
                mask.append(False)
            if dates and dt == dates[-1]:
                raise ValueError(f"{path}:{lineno}: duplicate date {dt.isoformat()}")
            dates.append(dt)
    if not dates:
        raise ValueError(f"{path}: no data rows")
    return DailySeries(
        dates=np.array(dates, dtype="datetime64[D]"),
        values=np.array(values),
        mask=np.array(mask, dtype=bool),
    )


@dataclass(frozen=True)
class DeclusterResult:
    data: ExceedanceData
    cluster_dates: np.ndarray
    n_clusters: int
    funnel: dict[str, int]


def decluster(s: DailySeries, cfg: DeclusterConfig, m: float | None = None) -> DeclusterResult:
    """Seasonal filter, threshold, then runs declustering of a daily series.

    Consecutive exceedances separated by fewer than ``gap_days`` calendar
    days merge into one cluster represented by its maximum (ties keep the
    earliest day). ``m`` defaults to the number of distinct calendar years
    in the series.
    """
    n_raw = len(s)
    keep = ~s.mask
    n_unmasked = int(np.sum(keep))
    dates = s.dates[keep]
    values = s.values[keep]

    if cfg.season is not None:
        months = dates.astype("datetime64[M]").astype(int) % 12 + 1
        in_season = np.isin(months, cfg.season)
        dates, values = dates[in_season], values[in_season]
    n_in_season = int(dates.size)

    exceed = values > cfg.threshold_u
    ex_dates = dates[exceed]
    ex_values = values[exceed]
    n_exceed = int(ex_dates.size)
    if n_exceed == 0:
        raise ValueError(f"no exceedances above u={cfg.threshold_u}")

    gaps = np.diff(ex_dates).astype(int)
    new_cluster = np.concatenate([[True], gaps >= cfg.gap_days])
    cluster_id = np.cumsum(new_cluster) - 1
    n_clusters = int(cluster_id[-1]) + 1
    reps = np.empty(n_clusters)
    rep_dates = np.empty(n_clusters, dtype="datetime64[D]")
    for k in range(n_clusters):
        sel = cluster_id == k
        vals = ex_values[sel]
        imax = int(np.argmax(vals))
        reps[k] = vals[imax]
        rep_dates[k] = ex_dates[sel][imax]

    if m is None:
        years = np.unique(s.dates.astype("datetime64[Y]"))
        m = float(years.size)

    data = ExceedanceData(u=cfg.threshold_u, m=float(m), xs=reps)
    funnel = {
        "n_raw": n_raw,
        "n_unmasked": n_unmasked,
        "n_in_season": n_in_season,
        "n_exceedances": n_exceed,
        "n_clusters": n_clusters,
    }
    return DeclusterResult(data=data, cluster_dates=rep_dates, n_clusters=n_clusters, funnel=funnel)


def series_from_exceedances(result: DeclusterResult) -> DailySeries:
    """View the cluster maxima as a sparse daily series (for re-declustering)."""
    return DailySeries(
        dates=result.cluster_dates,
        values=result.data.xs,
        mask=np.zeros(result.n_clusters, dtype=bool),
    )
