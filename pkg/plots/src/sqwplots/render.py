"""Figures from experiment CSVs, nothing recomputed.

Every number on a figure is read from the file: decay fits ride along in the
CSV's fit columns and the gap bound is itself a column, so the plots cannot
drift from the tables they illustrate.  Error bars are drawn at +-2 std_error.
SVG keeps its labels as text elements so annotations stay grep-able.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.fonttype"] = "none"

import matplotlib.pyplot as plt
import numpy as np

# columns each kind needs; extra columns are fine and ignored
SCHEMAS = {
    "decay": ("distance", "mean", "std_error", "strength",
              "fit_c", "fit_g", "fit_g_stderr", "fit_r2"),
    "gapbound": ("z_re", "z_im", "eta", "mean", "std_error", "bound"),
    "probe": ("distance", "probe_mean", "probe_std_error",
              "ec_mean", "ec_std_error", "strength"),
    "g-ladder": ("strength", "fit_g", "fit_g_stderr"),
}

# log-scale y by default for the curves that decay over decades
LOG_Y_DEFAULT = {"decay": True, "gapbound": True, "probe": True, "g-ladder": False}


class SchemaError(ValueError):
    """Input CSV does not carry the columns the plot kind needs."""


@dataclass
class PlotJob:
    source: str
    kind: str
    target: str
    log_y: bool | None = None
    dpi: int = 150


def read_table(path, kind):
    """Parse one harness CSV (comment lines skipped) into float columns.

    Raises SchemaError naming every missing column, and rejects tables with
    fewer than two data rows.
    """
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown plot kind {kind!r}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        header = reader.fieldnames or ()
        missing = [col for col in SCHEMAS[kind] if col not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)
    if len(rows) < 2:
        raise SchemaError(f"{path}: need at least 2 data rows, got {len(rows)}")
    table = {}
    for col in SCHEMAS[kind]:
        try:
            table[col] = np.array([float(row[col]) for row in rows])
        except ValueError:
            raise SchemaError(f"{path}: column {col!r} is not numeric") from None
    return table


def _groups(values):
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen


def _plot_decay(ax, t):
    for phi in _groups(t["strength"]):
        sel = t["strength"] == phi
        d, m, se = t["distance"][sel], t["mean"][sel], t["std_error"][sel]
        c, g, r2 = t["fit_c"][sel][0], t["fit_g"][sel][0], t["fit_r2"][sel][0]
        label = f"phi = {phi:g}: g = {g:.4f}, R2 = {r2:.4f}"
        pts = ax.errorbar(d, m, yerr=2.0 * se, fmt="o", capsize=3, label=label)
        if math.isfinite(g):
            grid = np.linspace(d.min(), d.max(), 200)
            ax.plot(grid, c * np.exp(-g * grid), "--",
                    color=pts.lines[0].get_color(), linewidth=1)
    ax.set_xlabel("distance")
    ax.set_ylabel("mean fractional moment")
    ax.legend()


def _plot_gapbound(ax, t):
    for z in _groups(list(zip(t["z_re"], t["z_im"]))):
        sel = (t["z_re"] == z[0]) & (t["z_im"] == z[1])
        order = np.argsort(t["eta"][sel])
        eta = t["eta"][sel][order]
        mean = t["mean"][sel][order]
        se = t["std_error"][sel][order]
        bound = t["bound"][sel][order]
        zlab = complex(z[0], z[1])
        ax.errorbar(eta, mean, yerr=2.0 * se, fmt="o", capsize=3,
                    label=f"estimate, z = {zlab:g}")
        ok = np.isfinite(bound)
        if ok.any():
            ax.plot(eta[ok], bound[ok], "--", linewidth=1,
                    label=f"bound, z = {zlab:g}")
    ax.set_xscale("log")
    ax.set_xlabel("eta")
    ax.set_ylabel("gap probability")
    ax.legend(fontsize="small")


def _plot_probe(ax, t):
    for phi in _groups(t["strength"]):
        sel = t["strength"] == phi
        d = t["distance"][sel]
        ax.errorbar(d, t["probe_mean"][sel], yerr=2.0 * t["probe_std_error"][sel],
                    fmt="o", capsize=3, label=f"probe, phi = {phi:g}")
        ax.errorbar(d, t["ec_mean"][sel], yerr=2.0 * t["ec_std_error"][sel],
                    fmt="s", capsize=3, mfc="none", label=f"correlator, phi = {phi:g}")
    ax.set_xlabel("distance")
    ax.set_ylabel("amplitude")
    ax.legend(fontsize="small")


def _plot_g_ladder(ax, t):
    order = np.argsort(t["strength"])
    ax.errorbar(t["strength"][order], t["fit_g"][order],
                yerr=2.0 * t["fit_g_stderr"][order], fmt="o-", capsize=3)
    ax.set_xlabel("deviation strength")
    ax.set_ylabel("fitted decay rate g")


_PAINTERS = {
    "decay": _plot_decay,
    "gapbound": _plot_gapbound,
    "probe": _plot_probe,
    "g-ladder": _plot_g_ladder,
}


def render(job: PlotJob) -> str:
    """Draw one figure from one CSV and write it to job.target.

    The output format follows the target extension (SVG for vector output,
    PNG and friends for raster at job.dpi).  Returns the target path.
    """
    t = read_table(job.source, job.kind)
    log_y = LOG_Y_DEFAULT[job.kind] if job.log_y is None else job.log_y
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        _PAINTERS[job.kind](ax, t)
        if log_y:
            ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(job.target, dpi=job.dpi)
    finally:
        plt.close(fig)
    return job.target
