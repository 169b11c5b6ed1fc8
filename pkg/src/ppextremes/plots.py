"""Figure rendering for CLI reports.

Every plot is drawn from an already-written CSV, never from in-memory
state, so any figure can be regenerated offline from the delimited output
alone. Files are written as SVG with deterministic content (fixed hash salt,
no embedded date).
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "ppextremes"
plt.rcParams["figure.figsize"] = (9.0, 3.2)

_SAVE_KW = {"metadata": {"Date": None}, "bbox_inches": "tight"}


def _read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _grouped(rows, group_keys: tuple[str, ...], x_key: str, y_key: str):
    out: dict[tuple, tuple[list[float], list[float]]] = defaultdict(lambda: ([], []))
    for row in rows:
        key = tuple(row[k] for k in group_keys)
        out[key][0].append(float(row[x_key]))
        out[key][1].append(float(row[y_key]))
    return out


def _coords_in_order(rows, key: str = "coord") -> list[str]:
    seen: list[str] = []
    for row in rows:
        if row[key] not in seen:
            seen.append(row[key])
    return seen


def _panel_plot(csv_path, out_path, x_key, y_key, xlabel, ylabel, hline=None, logy=False):
    rows = _read_csv(csv_path)
    coords = _coords_in_order(rows)
    has_param = "parameterization" in rows[0]
    group_keys = ("coord", "parameterization") if has_param else ("coord",)
    data = _grouped(rows, group_keys, x_key, y_key)
    fig, axes = plt.subplots(1, len(coords), squeeze=False)
    for j, coord in enumerate(coords):
        ax = axes[0, j]
        for key, (xs, ys) in data.items():
            if key[0] != coord:
                continue
            label = key[1] if has_param else None
            ax.plot(xs, ys, lw=1.2, label=label)
        if hline is not None:
            ax.axhline(hline, color="gray", lw=0.8, ls="--")
        ax.set_title(coord)
        ax.set_xlabel(xlabel)
        if logy:
            ax.set_yscale("log")
        if j == 0:
            ax.set_ylabel(ylabel)
    if has_param:
        axes[0, -1].legend(fontsize=7)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return Path(out_path)


def plot_acf(csv_path, out_path) -> Path:
    """Autocorrelation versus lag, one panel per coordinate."""
    return _panel_plot(csv_path, out_path, "lag", "rho", "lag", "autocorrelation")


def plot_ess(csv_path, out_path, recommended: float = 400.0) -> Path:
    """ESS as a function of draws used, one panel per coordinate."""
    return _panel_plot(csv_path, out_path, "draws", "ess", "draws", "ESS", hline=recommended)


def plot_rhat(csv_path, out_path, threshold: float = 1.03) -> Path:
    """Local R-hat curves with the configured threshold line."""
    return _panel_plot(csv_path, out_path, "x", "rhat", "quantile x", r"local $\hat{R}$", hline=threshold)


def plot_return_levels(csv_path, out_path, observed_csv=None) -> Path:
    """Return-level curves with credible bands on a log period axis.

    ``observed_csv`` optionally supplies empirical points (columns T, value).
    """
    rows = _read_csv(csv_path)
    labels = []
    for row in rows:
        if row["label"] not in labels:
            labels.append(row["label"])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for lab in labels:
        sel = [r for r in rows if r["label"] == lab]
        T = [float(r["T"]) for r in sel]
        ax.plot(T, [float(r["mean"]) for r in sel], lw=1.4, label=lab or "posterior mean")
        ax.plot(T, [float(r["lo"]) for r in sel], lw=0.9, ls="--")
        ax.plot(T, [float(r["hi"]) for r in sel], lw=0.9, ls="--")
    if observed_csv is not None:
        obs = _read_csv(observed_csv)
        ax.scatter(
            [float(r["T"]) for r in obs],
            [float(r["value"]) for r in obs],
            s=10,
            color="black",
            zorder=3,
            label="observed",
        )
    ax.set_xscale("log")
    ax.set_xlabel("return period T")
    ax.set_ylabel("return level")
    ax.legend(fontsize=8)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return Path(out_path)


def plot_relative_widths(csv_path, out_path) -> Path:
    """Credible-interval length relative to the point estimate, per prior label."""
    rows = _read_csv(csv_path)
    labels = []
    for row in rows:
        if row["label"] not in labels:
            labels.append(row["label"])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for lab in labels:
        sel = [r for r in rows if r["label"] == lab]
        T = [float(r["T"]) for r in sel]
        ax.plot(T, [100.0 * float(r["relative_width"]) for r in sel], lw=1.4, label=lab)
    ax.set_xscale("log")
    ax.set_xlabel("return period T")
    ax.set_ylabel("CI length / point estimate (%)")
    ax.legend(fontsize=8)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return Path(out_path)


def plot_mse(csv_path, out_path) -> Path:
    """MSE of the shape estimate against the true value, per estimator."""
    rows = _read_csv(csv_path)
    data = _grouped(rows, ("estimator",), "xi0", "mse")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for (name,), (xs, ys) in data.items():
        ax.plot(xs, ys, marker="o", ms=3, lw=1.2, label=name)
    ax.set_xlabel(r"true shape $\xi_0$")
    ax.set_ylabel("MSE")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return Path(out_path)


def plot_propriety(csv_path, out_path) -> Path:
    """Numeric quadrature versus closed-form normalization constants."""
    rows = _read_csv(csv_path)
    deltas = [float(r["x_minus_u"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.plot(deltas, [float(r["numeric"]) for r in rows], marker="o", ms=4, lw=0, label="quadrature")
    ax.plot(deltas, [float(r["analytic"]) for r in rows], lw=1.2, label="closed form")
    ax.set_xlabel("x - u")
    ax.set_ylabel("normalization constant")
    ax.legend(fontsize=8)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return Path(out_path)


def plot_exceedances(csv_path, out_path, threshold: float | None = None) -> Path:
    """Declustered exceedances over time with the threshold line."""
    rows = _read_csv(csv_path)
    dates = [r["date"] for r in rows]
    values = [float(r["value"]) for r in rows]
    xs = np.array(dates, dtype="datetime64[D]")
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    ax.scatter(xs.astype("datetime64[s]").astype(object), values, s=8)
    if threshold is not None:
        ax.axhline(threshold, color="red", lw=1.0)
    ax.set_xlabel("date")
    ax.set_ylabel("value")
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return Path(out_path)
