"""Render figure analogues from the experiment harness's result CSVs.

The only coupling to the solver package is the CSV file format: a fixed
9-column header

    preset,distribution,sigma,tau,trial,seed,rel_error,iterations,wall_ms

with one row per run (fig2/fig3/fig4) or one row per recorded iterate
(fig1 trajectory files, where ``iterations`` holds the iterate index).
Aggregation over trials (means, ratio medians) happens here so the raw
per-trial rows stay inspectable.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

EXPECTED_HEADER = ("preset", "distribution", "sigma", "tau", "trial", "seed",
                   "rel_error", "iterations", "wall_ms")

FIGURES = ("fig1", "fig2", "fig3", "fig4")


class SchemaError(ValueError):
    """The CSV header does not carry the expected columns."""


@dataclass(frozen=True)
class FigureSpec:
    figure: str
    csv_path: str
    out_path: str
    log_x: bool | None = None  # None: the figure's conventional default
    log_y: bool = True

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ValueError(f"figure must be one of {FIGURES}, got {self.figure!r}")


@dataclass
class RenderSummary:
    """What was drawn: series label -> number of plotted points."""

    figure: str
    out_path: str
    series: dict[str, int] = field(default_factory=dict)

    @property
    def series_count(self) -> int:
        return len(self.series)


def read_rows(csv_path) -> list[dict]:
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise SchemaError(f"{csv_path}: empty file, expected header "
                              f"{','.join(EXPECTED_HEADER)}") from None
        missing = [c for c in EXPECTED_HEADER if c not in header]
        if missing:
            raise SchemaError(f"{csv_path}: missing columns {missing}")
        idx = {c: header.index(c) for c in EXPECTED_HEADER}
        rows = []
        for raw in reader:
            rows.append({
                "preset": raw[idx["preset"]],
                "distribution": raw[idx["distribution"]],
                "sigma": float(raw[idx["sigma"]]),
                "tau": float(raw[idx["tau"]]),
                "trial": int(raw[idx["trial"]]),
                "seed": int(raw[idx["seed"]]),
                "rel_error": float(raw[idx["rel_error"]]),
                "iterations": int(raw[idx["iterations"]]),
                "wall_ms": float(raw[idx["wall_ms"]]),
            })
    return rows


def _mean(values) -> float:
    values = [v for v in values if not math.isnan(v)]
    return sum(values) / len(values) if values else math.nan


def _series_fig1(rows):
    """sigma -> [(iteration, mean rel_error over trials)]."""
    by_sigma = defaultdict(lambda: defaultdict(list))
    for r in rows:
        by_sigma[r["sigma"]][r["iterations"]].append(r["rel_error"])
    return {
        f"sigma={sigma:g}": sorted(
            (it, _mean(errs)) for it, errs in per_iter.items())
        for sigma, per_iter in sorted(by_sigma.items())
    }


def _series_fig2(rows):
    """distribution -> [(sigma, mean final rel_error)]."""
    by_dist = defaultdict(lambda: defaultdict(list))
    for r in rows:
        by_dist[r["distribution"]][r["sigma"]].append(r["rel_error"])
    return {
        dist: sorted((s, _mean(errs)) for s, errs in per_sigma.items())
        for dist, per_sigma in sorted(by_dist.items())
    }


def _series_fig3(rows):
    """distribution -> [(tau, mean final rel_error)], finite taus only."""
    by_dist = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if math.isfinite(r["tau"]):
            by_dist[r["distribution"]][r["tau"]].append(r["rel_error"])
    return {
        dist: sorted((t, _mean(errs)) for t, errs in per_tau.items())
        for dist, per_tau in sorted(by_dist.items())
    }


def _series_fig4(rows):
    """distribution -> [(sigma, mean of per-trial best-tau / LS ratios)]."""
    cells = defaultdict(lambda: {"best": math.inf, "ls": math.nan})
    for r in rows:
        cell = cells[(r["distribution"], r["sigma"], r["trial"])]
        if math.isinf(r["tau"]):
            cell["ls"] = r["rel_error"]
        elif not math.isnan(r["rel_error"]):
            cell["best"] = min(cell["best"], r["rel_error"])
    per_group = defaultdict(lambda: defaultdict(list))
    for (dist, sigma, _trial), cell in cells.items():
        if cell["ls"] and not math.isnan(cell["ls"]) and math.isfinite(cell["best"]):
            per_group[dist][sigma].append(cell["best"] / cell["ls"])
    return {
        dist: sorted((s, _mean(ratios)) for s, ratios in per_sigma.items())
        for dist, per_sigma in sorted(per_group.items())
    }


_BUILDERS = {"fig1": _series_fig1, "fig2": _series_fig2,
             "fig3": _series_fig3, "fig4": _series_fig4}
_X_LABELS = {"fig1": "iteration", "fig2": "noise level sigma",
             "fig3": "Huber threshold tau", "fig4": "noise level sigma"}
_Y_LABELS = {"fig1": "relative error", "fig2": "mean relative error",
             "fig3": "mean relative error", "fig4": "best-tau / LS error ratio"}
_LOG_X_DEFAULT = {"fig1": False, "fig2": True, "fig3": True, "fig4": True}


def render(spec: FigureSpec) -> RenderSummary:
    """Draw one figure from the CSV and write it to ``spec.out_path``.

    A header-only CSV produces an empty-axes figure and still succeeds.
    Returns the series/point counts actually drawn so callers can check them
    against the CSV contents.
    """
    rows = read_rows(spec.csv_path)
    series = _BUILDERS[spec.figure](rows)
    log_x = _LOG_X_DEFAULT[spec.figure] if spec.log_x is None else spec.log_x

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    summary = RenderSummary(figure=spec.figure, out_path=str(spec.out_path))
    for label, points in series.items():
        xs = [x for x, _ in points]
        ys = [y for _, y in points]
        ax.plot(xs, ys, marker="o" if spec.figure != "fig1" else None,
                markersize=3, label=label)
        summary.series[label] = len(points)
    if log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(_X_LABELS[spec.figure])
    ax.set_ylabel(_Y_LABELS[spec.figure])
    if series:
        ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150)
    plt.close(fig)
    return summary
